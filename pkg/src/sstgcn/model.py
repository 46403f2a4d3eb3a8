"""The risk model: per-slice spatial graph embedding, an LSTM over the
slice sequence, and a sigmoid head.

Each slice goes through two graph convolutions, attention-sum pooling to a
fixed-width vector, and is joined with an embedding of the slice's static
vector; the resulting per-slice vectors feed the LSTM in ascending time
order with parameters shared across slices.  Pooling makes the model
indifferent to the node count, so subgraphs of any size fit one parameter
set.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .numcore import Tensor, add_rowvec, concat_cols, matmul

CHECKPOINT_FORMAT = "sstgcn-checkpoint"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Checkpoint file malformed or incompatible with the model config."""


@dataclass(frozen=True)
class ModelConfig:
    """Layer widths.  Defaults are the tuned configuration; the usual tuning
    grid is {8, 16, 32, 64, 128} for GCN/FC units and {8, 16, 32, 64} for
    LSTM units."""

    node_features: int = 18
    static_features: int = 21
    gcn1_channels: int = 64
    gcn2_channels: int = 32
    static_units: tuple[int, int] = (32, 16)
    concat_units: tuple[int, int] = (32, 16)
    lstm_units: int = 8
    output_units: int = 8

    def __post_init__(self):
        widths = (
            self.node_features,
            self.static_features,
            self.gcn1_channels,
            self.gcn2_channels,
            *self.static_units,
            *self.concat_units,
            self.lstm_units,
            self.output_units,
        )
        if any(w < 1 for w in widths):
            raise ValueError("all layer widths must be positive")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "ModelConfig":
        kwargs = dict(doc)
        for key in ("static_units", "concat_units"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


class ParamSet:
    """Ordered, named trainable tensors with snapshot/restore support."""

    def __init__(self):
        self._tensors: dict[str, Tensor] = {}

    def add(self, name: str, array) -> Tensor:
        if name in self._tensors:
            raise ValueError(f"duplicate parameter {name}")
        t = Tensor(array, requires_grad=True)
        self._tensors[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def items(self):
        return self._tensors.items()

    def names(self) -> list[str]:
        return list(self._tensors)

    def count(self) -> int:
        return sum(t.data.size for t in self._tensors.values())

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._tensors.items()}

    def restore(self, snap: dict[str, np.ndarray]):
        for name, t in self._tensors.items():
            t.data[...] = snap[name]

    def zero_arrays(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(t.data) for name, t in self._tensors.items()}

    def set_all(self, value: float):
        for t in self._tensors.values():
            t.data[...] = value


def _glorot(rng, rows: int, cols: int, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, (rows, cols))


class ModelParams(ParamSet):
    """All trainable tensors, Glorot-initialized, biases zero, slopes 0.25."""

    def __init__(self, config: ModelConfig | None = None, seed: int = 0):
        super().__init__()
        self.config = config if config is not None else ModelConfig()
        c = self.config
        rng = np.random.default_rng(seed)

        def dense(prefix, d_in, d_out):
            self.add(f"{prefix}.W", _glorot(rng, d_in, d_out, d_in, d_out))
            self.add(f"{prefix}.b", np.zeros((1, d_out)))

        dense("gcn1", c.node_features, c.gcn1_channels)
        self.add("gcn1.alpha", [[0.25]])
        dense("gcn2", c.gcn1_channels, c.gcn2_channels)
        self.add("gcn2.alpha", [[0.25]])
        self.add("attn.a", _glorot(rng, c.gcn2_channels, 1, c.gcn2_channels, 1))
        dense("static1", c.static_features, c.static_units[0])
        dense("static2", c.static_units[0], c.static_units[1])
        concat_in = c.gcn2_channels + c.static_units[1]
        dense("concat1", concat_in, c.concat_units[0])
        dense("concat2", c.concat_units[0], c.concat_units[1])
        lstm_in = c.concat_units[1] + c.lstm_units
        for gate in ("i", "f", "o", "c"):
            self.add(
                f"lstm.W{gate}", _glorot(rng, lstm_in, c.lstm_units, lstm_in, c.lstm_units)
            )
            self.add(f"lstm.b{gate}", np.zeros((1, c.lstm_units)))
        dense("out1", c.lstm_units, c.output_units)
        dense("out2", c.output_units, 1)


# --- forward pass -------------------------------------------------------------


def gcn_layer(v: Tensor, lap: Tensor, w: Tensor, b: Tensor, alpha: Tensor) -> Tensor:
    """One graph convolution: slope-rectified (lap·V·W + bias-row)."""
    return add_rowvec(matmul(matmul(lap, v), w), b).prelu(alpha)


def global_attention_sum_pool(v2: Tensor, a: Tensor) -> Tensor:
    """Attention-weighted sum of node rows; output is 1 x channels."""
    logits = matmul(v2, a)  # (n, 1)
    weights = logits.T.softmax_rows()  # (1, n)
    return matmul(weights, v2)


def static_embed(s: Tensor, params: ParamSet) -> Tensor:
    h = add_rowvec(matmul(s, params["static1.W"]), params["static1.b"]).relu()
    return add_rowvec(matmul(h, params["static2.W"]), params["static2.b"]).relu()


def slice_embed(v: Tensor, lap: Tensor, s: Tensor, params: ParamSet) -> Tensor:
    """Embed one slice to a fixed-width vector regardless of node count."""
    v1 = gcn_layer(v, lap, params["gcn1.W"], params["gcn1.b"], params["gcn1.alpha"])
    v2 = gcn_layer(v1, lap, params["gcn2.W"], params["gcn2.b"], params["gcn2.alpha"])
    dynamic = global_attention_sum_pool(v2, params["attn.a"])
    static = static_embed(s, params)
    h = concat_cols(dynamic, static)
    h = add_rowvec(matmul(h, params["concat1.W"]), params["concat1.b"]).relu()
    return add_rowvec(matmul(h, params["concat2.W"]), params["concat2.b"]).relu()


def lstm_forward(seq: list[Tensor], params: ParamSet) -> Tensor:
    """Run the gates over the sequence from zero state; return the last h."""
    if not seq:
        raise ValueError("lstm_forward needs a non-empty sequence")
    units = params["lstm.bi"].cols
    h = Tensor(np.zeros((1, units)))
    c = Tensor(np.zeros((1, units)))
    for x in seq:
        z = concat_cols(h, x)
        gate_i = add_rowvec(matmul(z, params["lstm.Wi"]), params["lstm.bi"]).sigmoid()
        gate_f = add_rowvec(matmul(z, params["lstm.Wf"]), params["lstm.bf"]).sigmoid()
        gate_o = add_rowvec(matmul(z, params["lstm.Wo"]), params["lstm.bo"]).sigmoid()
        cand = add_rowvec(matmul(z, params["lstm.Wc"]), params["lstm.bc"]).tanh()
        c = gate_f * c + gate_i * cand
        h = gate_o * c.tanh()
    return h


def predict(sample, params: ParamSet) -> Tensor:
    """Accident probability for one sample as a 1x1 tensor in (0, 1)."""
    lap = Tensor(sample.laplacian)
    seq = [
        slice_embed(Tensor(v), lap, Tensor(s), params)
        for v, s in zip(sample.slices, sample.statics)
    ]
    h = lstm_forward(seq, params)
    h = add_rowvec(matmul(h, params["out1.W"]), params["out1.b"]).relu()
    return add_rowvec(matmul(h, params["out2.W"]), params["out2.b"]).sigmoid()


def predict_proba(sample, params: ParamSet) -> float:
    return predict(sample, params).item()


# --- checkpointing ------------------------------------------------------------


def save_checkpoint(params: ModelParams, path) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": params.config.to_json(),
        "tensors": {
            name: {"shape": list(t.data.shape), "data": t.data.ravel().tolist()}
            for name, t in params.items()
        },
    }
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_checkpoint(path, config: ModelConfig | None = None) -> ModelParams:
    """Rebuild params from a checkpoint, verifying shapes against the config.

    When config is None the checkpoint's own config is used; passing one
    asserts the checkpoint fits an externally chosen architecture.
    """
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError("not a model checkpoint (bad format field)")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('version')!r}")
    stored = ModelConfig.from_json(doc["config"])
    if config is not None and config != stored:
        raise CheckpointError(f"checkpoint config {stored} != requested {config}")
    params = ModelParams(stored, seed=0)
    tensors = doc["tensors"]
    missing = set(params.names()) - set(tensors)
    extra = set(tensors) - set(params.names())
    if missing or extra:
        raise CheckpointError(f"tensor names mismatch: missing {sorted(missing)}, extra {sorted(extra)}")
    for name, t in params.items():
        entry = tensors[name]
        if tuple(entry["shape"]) != t.data.shape:
            raise CheckpointError(
                f"shape mismatch for {name}: checkpoint {entry['shape']} vs config {list(t.data.shape)}"
            )
        t.data[...] = np.asarray(entry["data"], dtype=float).reshape(t.data.shape)
    return params
