"""Sample construction and the synthetic world that feeds it.

A sample is n graph slices taken k minutes apart around a center road's
K-hop subgraph, one static vector per slice, and a binary label saying
whether an accident happens on the center road within the next k minutes.
The synthetic generator replaces the real data sources with a road network
and per-minute streams whose planted accident process correlates with both
own-road and neighboring-road conditions, so that learning is verifiable.
"""

from __future__ import annotations

import json
import math
import zipfile
from dataclasses import dataclass, field, replace

import numpy as np

from . import roadgraph
from .roadgraph import FILTER_KINDS, Road, RoadNetwork, Subgraph

MINUTES_PER_DAY = 1440

# Node-feature column order; width 18.
NODE_FEATURE_NAMES = (
    "sun_diff",
    "lanes",
    "speed_limit",
    "length",
    "bump",
    "camera",
    "poi_golf",
    "poi_sales",
    "poi_gym",
    "poi_mail",
    "poi_food",
    "poi_bakery",
    "poi_food_center",
    "poi_restaurant",
    "poi_pharmacy",
    "poi_hospital",
    "traffic_speed",
    "focus",
)
NODE_FEATURE_WIDTH = len(NODE_FEATURE_NAMES)

# Static layout: day-of-week one-hot(7), time-of-day(1), season one-hot(4),
# sun altitude(1), weather(8); width 21.
STATIC_WIDTH = 21

WEATHER_FIELDS = (
    "rain",
    "temperature",
    "humidity",
    "visibility",
    "dew_point",
    "cloud",
    "vapor_pressure",
    "ground_temp",
)

# Fixed scaling bounds per feature (published attribute ranges); values are
# clamped into these before min-max scaling so train/test scaling is
# identical by construction.
RANGES: dict[str, tuple[float, float]] = {
    "sun_diff": (0.0, 180.0),
    "lanes": (1.0, 7.0),
    "speed_limit": (10.0, 110.0),
    "length": (12.6924, 9101.8543),
    "poi": (0.0, 10.0),
    "traffic_speed": (0.0, 110.0),
    "time": (0.0, 1439.0),
    "sun_altitude": (0.0, 76.122),
    "rain": (0.0, 64.7),
    "temperature": (-18.5, 36.3),
    "humidity": (11.0, 100.0),
    "visibility": (33.0, 5000.0),
    "dew_point": (-27.0, 26.4),
    "cloud": (0.0, 10.0),
    "vapor_pressure": (0.7, 34.4),
    "ground_temp": (-12.7, 58.7),
}

_MONTH_DAYS = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)
_MONTH_STARTS = np.cumsum((0,) + _MONTH_DAYS[:-1])

DATASET_FORMAT = "sstgcn-dataset"
DATASET_VERSION = 1


class DataGapError(ValueError):
    """A stream does not cover a minute the sample needs."""


class ParseError(ValueError):
    """A dataset file line could not be parsed."""


class EmptyDatasetError(ValueError):
    """Assembly needs at least one accident."""


def normalize_feature(value: float, lo: float, hi: float) -> float:
    """Clamp value into [lo, hi] and min-max scale to [0, 1]."""
    if not lo < hi:
        raise ValueError(f"bad range [{lo}, {hi}]")
    v = min(max(value, lo), hi)
    return (v - lo) / (hi - lo)


def sun_road_angle(azimuth_deg: float, heading_deg: float) -> float:
    """Minimal angle in [0, 180] between solar azimuth and road heading."""
    return abs((azimuth_deg - heading_deg + 180.0) % 360.0 - 180.0)


def day_of_week(minute: int) -> int:
    return (minute // MINUTES_PER_DAY) % 7


def month_of(minute: int) -> int:
    day = (minute // MINUTES_PER_DAY) % 365
    return int(np.searchsorted(_MONTH_STARTS, day, side="right"))  # 1..12


def season_index(minute: int) -> int:
    """0 winter (Dec-Feb), 1 spring, 2 summer, 3 autumn."""
    m = month_of(minute)
    if m in (12, 1, 2):
        return 0
    if m in (3, 4, 5):
        return 1
    if m in (6, 7, 8):
        return 2
    return 3


@dataclass
class DynamicStreams:
    """Per-minute dynamic state of the world.

    speed is piecewise-constant over 5-minute bins (stored expanded per
    minute); weather columns follow WEATHER_FIELDS; sun holds altitude and
    azimuth in degrees; accidents is a (road_id, minute) list.
    """

    minutes: int
    road_ids: list[int]
    speed: np.ndarray  # (n_roads, minutes)
    weather: np.ndarray  # (minutes, 8)
    sun: np.ndarray  # (minutes, 2): altitude, azimuth
    accidents: list[tuple[int, int]]

    def __post_init__(self):
        self._row = {r: i for i, r in enumerate(self.road_ids)}
        by_road: dict[int, list[int]] = {}
        for road, minute in self.accidents:
            by_road.setdefault(road, []).append(minute)
        self._accident_minutes = {r: np.sort(m) for r, m in by_road.items()}

    def _check_minute(self, minute: int):
        if not 0 <= minute < self.minutes:
            raise DataGapError(f"minute {minute} outside stream [0, {self.minutes})")

    def speed_at(self, road: int, minute: int) -> float:
        self._check_minute(minute)
        return float(self.speed[self._row[road], minute])

    def weather_at(self, minute: int) -> np.ndarray:
        self._check_minute(minute)
        return self.weather[minute]

    def sun_at(self, minute: int) -> tuple[float, float]:
        self._check_minute(minute)
        return float(self.sun[minute, 0]), float(self.sun[minute, 1])

    def has_accident_in(self, road: int, start: int, end: int) -> bool:
        """True if the road has an accident in the half-open window (start, end]."""
        mins = self._accident_minutes.get(road)
        if mins is None:
            return False
        i = np.searchsorted(mins, start, side="right")
        return i < len(mins) and mins[i] <= end


@dataclass
class GraphSlice:
    """One time slice: node features over the subgraph plus its operator."""

    features: np.ndarray  # (n_nodes, NODE_FEATURE_WIDTH)
    laplacian: np.ndarray  # shared across the sample's slices


@dataclass
class Sample:
    """One training example (see module docstring for the layout)."""

    nodes: list[int]
    laplacian: np.ndarray
    slices: list[np.ndarray]  # each (n_nodes, NODE_FEATURE_WIDTH), ascending time
    statics: list[np.ndarray]  # each (STATIC_WIDTH,), ascending time
    label: int
    center: int
    t: int
    n: int
    k: int

    def graph_slices(self) -> list[GraphSlice]:
        return [GraphSlice(f, self.laplacian) for f in self.slices]

    def slice_minutes(self) -> list[int]:
        return [self.t - (self.n - 1 - i) * self.k for i in range(self.n)]

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "center": self.center,
            "t": self.t,
            "n": self.n,
            "k": self.k,
            "nodes": list(self.nodes),
            "L": self.laplacian.tolist(),
            "slices": [s.tolist() for s in self.slices],
            "statics": [s.tolist() for s in self.statics],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Sample":
        return cls(
            nodes=[int(r) for r in doc["nodes"]],
            laplacian=np.array(doc["L"], dtype=float),
            slices=[np.array(s, dtype=float) for s in doc["slices"]],
            statics=[np.array(s, dtype=float) for s in doc["statics"]],
            label=int(doc["label"]),
            center=int(doc["center"]),
            t=int(doc["t"]),
            n=int(doc["n"]),
            k=int(doc["k"]),
        )


@dataclass
class SampleSet:
    samples: list[Sample]
    n: int
    k: int
    khop: int
    filter_kind: str

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples])


def _static_vector(streams: DynamicStreams, minute: int) -> np.ndarray:
    out = np.zeros(STATIC_WIDTH)
    out[day_of_week(minute)] = 1.0
    out[7] = normalize_feature(minute % MINUTES_PER_DAY, *RANGES["time"])
    out[8 + season_index(minute)] = 1.0
    altitude, _ = streams.sun_at(minute)
    out[12] = normalize_feature(altitude, *RANGES["sun_altitude"])
    weather = streams.weather_at(minute)
    for i, name in enumerate(WEATHER_FIELDS):
        out[13 + i] = normalize_feature(weather[i], *RANGES[name])
    return out


def _node_features(
    net: RoadNetwork, streams: DynamicStreams, nodes: list[int], minute: int, center: int
) -> np.ndarray:
    _, azimuth = streams.sun_at(minute)
    out = np.zeros((len(nodes), NODE_FEATURE_WIDTH))
    for i, rid in enumerate(nodes):
        road = net.roads[rid]
        out[i, 0] = normalize_feature(
            sun_road_angle(azimuth, road.heading_deg), *RANGES["sun_diff"]
        )
        out[i, 1] = normalize_feature(road.lanes, *RANGES["lanes"])
        out[i, 2] = normalize_feature(road.speed_limit, *RANGES["speed_limit"])
        out[i, 3] = normalize_feature(road.length_m, *RANGES["length"])
        out[i, 4] = float(road.bump)
        out[i, 5] = float(road.camera)
        for p in range(10):
            out[i, 6 + p] = normalize_feature(road.poi[p], *RANGES["poi"])
        out[i, 16] = normalize_feature(streams.speed_at(rid, minute), *RANGES["traffic_speed"])
        out[i, 17] = 1.0 if rid == center else 0.0
    return out


def build_sample(
    net: RoadNetwork,
    streams: DynamicStreams,
    center: int,
    t: int,
    n: int,
    k: int,
    khop: int,
    filter_kind: str = "dist-lap",
    subgraph: Subgraph | None = None,
) -> Sample:
    """Assemble one sample anchored at minute t.

    Slices are taken at t-(n-1)k ... t ascending; the label is 1 iff the
    center road has an accident in (t, t+k].
    """
    if n < 1 or k < 1:
        raise ValueError(f"n and k must be >= 1, got n={n}, k={k}")
    start = t - (n - 1) * k
    if start < 0:
        raise ValueError(f"sample window underflows the stream: t={t}, n={n}, k={k}")
    if t + k >= streams.minutes:
        raise DataGapError(
            f"label window (t, t+k] needs minute {t + k}, stream ends at {streams.minutes - 1}"
        )
    sub = subgraph if subgraph is not None else roadgraph.build_subgraph(
        net, center, khop, filter_kind
    )
    minutes = range(start, t + 1, k)
    slices = [_node_features(net, streams, sub.nodes, m, center) for m in minutes]
    statics = [_static_vector(streams, m) for m in minutes]
    label = 1 if streams.has_accident_in(center, t, t + k) else 0
    return Sample(
        nodes=sub.nodes,
        laplacian=sub.laplacian,
        slices=slices,
        statics=statics,
        label=label,
        center=center,
        t=t,
        n=n,
        k=k,
    )


# --- synthetic world ---------------------------------------------------------


def generate_synthetic_network(seed: int, n_roads: int) -> RoadNetwork:
    """Connected grid-with-deletions road graph, attributes uniform in range."""
    if n_roads < 2:
        raise ValueError(f"n_roads must be >= 2, got {n_roads}")
    rng = np.random.default_rng(seed)
    net = RoadNetwork()
    for rid in range(n_roads):
        net.add_road(
            Road(
                id=rid,
                lanes=int(rng.integers(1, 8)),
                speed_limit=float(rng.integers(10, 111)),
                length_m=float(rng.uniform(*RANGES["length"])),
                bump=int(rng.integers(0, 2)),
                camera=int(rng.integers(0, 2)),
                poi=[int(p) for p in rng.integers(0, 11, 10)],
                heading_deg=float(rng.uniform(0.0, 360.0)),
            )
        )
    cols = max(2, math.ceil(math.sqrt(n_roads)))
    for idx in range(n_roads):
        if (idx + 1) % cols != 0 and idx + 1 < n_roads:
            net.add_edge(idx, idx + 1)
        if idx + cols < n_roads:
            net.add_edge(idx, idx + cols)
    # Thin the grid while preserving connectivity.
    edges = net.edges()
    order = rng.permutation(len(edges))
    removed = 0
    target = len(edges) // 4
    for ei in order:
        if removed >= target:
            break
        u, v = edges[ei]
        net.adjacency[u].discard(v)
        net.adjacency[v].discard(u)
        if net.is_connected():
            removed += 1
        else:
            net.adjacency[u].add(v)
            net.adjacency[v].add(u)
    return net


@dataclass(frozen=True)
class HazardConfig:
    """Planted accident process.

    The per-road, per-minute hazard is logistic in weather, light and speed
    conditions, each centered at a fixed reference point, so that zeroing
    every coefficient leaves exactly the base rate and growing any
    coefficient grows the accident count.  Defaults are tuned so the
    realized rate lands near one accident per road per two simulated days.
    """

    rain: float = 2.5
    inv_visibility: float = 2.0
    speed_ratio: float = 1.5
    night: float = 1.2
    neighbor_speed: float = 6.0
    base_rate: float = 7.5e-5  # hazard at the reference conditions

    # reference points the features are centered on
    REF = {
        "rain": 0.06,
        "inv_visibility": 0.06,
        "speed_ratio": 0.55,
        "night": 0.5,
        "neighbor_speed": 0.55,
    }

    @classmethod
    def from_json(cls, doc: dict) -> "HazardConfig":
        known = {"rain", "inv_visibility", "speed_ratio", "night", "neighbor_speed", "base_rate"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown hazard fields: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in doc.items()})


def _hazard_score(
    net: RoadNetwork,
    speed: np.ndarray,
    weather: np.ndarray,
    sun: np.ndarray,
    cfg: HazardConfig,
) -> np.ndarray:
    """Centered feature score per (road, minute)."""
    ids = net.road_ids
    limits = np.array([net.roads[r].speed_limit for r in ids])
    ratio = speed / limits[:, None]
    # row-normalized adjacency for the neighbor mean
    n = len(ids)
    index = {r: i for i, r in enumerate(ids)}
    adj = np.zeros((n, n))
    for u in ids:
        for v in net.adjacency[u]:
            adj[index[u], index[v]] = 1.0
    deg = adj.sum(axis=1)
    deg[deg == 0] = 1.0
    neighbor_ratio = (adj / deg[:, None]) @ ratio

    rain01 = weather[:, 0] / RANGES["rain"][1]
    inv_vis = (1.0 / weather[:, 3] - 1.0 / 5000.0) / (1.0 / 33.0 - 1.0 / 5000.0)
    night = (sun[:, 0] <= 0.0).astype(float)

    ref = cfg.REF
    score = (
        cfg.rain * (rain01 - ref["rain"])[None, :]
        + cfg.inv_visibility * (inv_vis - ref["inv_visibility"])[None, :]
        + cfg.night * (night - ref["night"])[None, :]
        + cfg.speed_ratio * (ratio - ref["speed_ratio"])
        + cfg.neighbor_speed * (neighbor_ratio - ref["neighbor_speed"])
    )
    return score


def generate_planted_streams(
    seed: int, net: RoadNetwork, days: int, hazard: HazardConfig | None = None
) -> DynamicStreams:
    """Weather, sun, speed and accident streams for `days` simulated days."""
    if days < 1:
        raise ValueError(f"days must be >= 1, got {days}")
    hazard = hazard if hazard is not None else HazardConfig()
    rng = np.random.default_rng(seed)
    minutes = days * MINUTES_PER_DAY
    hours = days * 24

    # Weather on hourly blocks, expanded to minutes.
    rain_h = np.zeros(hours)
    block = 3  # storm systems last three hours
    for b in range(0, hours, block):
        if rng.random() < 0.25:
            intensity = rng.uniform(3.0, 35.0)
            for h in range(b, min(b + block, hours)):
                rain_h[h] = intensity * rng.uniform(0.6, 1.0)
    hour_of_day = np.arange(hours) % 24
    temp_h = 12.0 + 8.0 * np.sin(2 * np.pi * (hour_of_day - 8.0) / 24.0)
    temp_h += rng.normal(0.0, 1.5, hours)
    temp_h = np.clip(temp_h, *RANGES["temperature"])
    humid_h = np.clip(55.0 + 30.0 * (rain_h > 0) + rng.normal(0, 8, hours), *RANGES["humidity"])
    vis_h = np.clip(4600.0 - 70.0 * rain_h + rng.normal(0, 250, hours), *RANGES["visibility"])
    dew_h = np.clip(temp_h - (100.0 - humid_h) / 5.0, *RANGES["dew_point"])
    cloud_h = np.clip(rng.uniform(0, 6, hours) + 4.0 * (rain_h > 0), *RANGES["cloud"])
    vap_h = np.clip(6.0 + 0.4 * temp_h + rng.normal(0, 1, hours), *RANGES["vapor_pressure"])
    ground_h = np.clip(temp_h + rng.uniform(0, 6, hours), *RANGES["ground_temp"])
    weather = np.repeat(
        np.column_stack([rain_h, temp_h, humid_h, vis_h, dew_h, cloud_h, vap_h, ground_h]),
        60,
        axis=0,
    )[:minutes]

    # Analytic solar path: up between 06:00 and 18:00, azimuth sweeps the day.
    m_of_day = np.arange(minutes) % MINUTES_PER_DAY
    altitude = np.where(
        (m_of_day > 360) & (m_of_day < 1080),
        RANGES["sun_altitude"][1] * np.sin(np.pi * (m_of_day - 360) / 720.0),
        0.0,
    )
    altitude = np.clip(altitude, *RANGES["sun_altitude"])
    azimuth = m_of_day / MINUTES_PER_DAY * 360.0
    sun = np.column_stack([altitude, azimuth])

    # Speed: free-flow level per road, twice-daily congestion dips, AR(1)
    # noise per 5-minute bin, expanded to minutes.
    ids = net.road_ids
    n_roads = len(ids)
    limits = np.array([net.roads[r].speed_limit for r in ids])
    free = limits * rng.uniform(0.55, 0.95, n_roads)
    n_bins = math.ceil(minutes / 5)
    bin_minute = (np.arange(n_bins) * 5) % MINUTES_PER_DAY
    congestion = (
        1.0
        - 0.30 * np.exp(-(((bin_minute - 480) / 75.0) ** 2))
        - 0.30 * np.exp(-(((bin_minute - 1080) / 75.0) ** 2))
    )
    noise = np.empty((n_roads, n_bins))
    noise[:, 0] = rng.normal(0, 1, n_roads)
    eps = rng.normal(0, 1, (n_roads, n_bins))
    phi = 0.9
    for b in range(1, n_bins):
        noise[:, b] = phi * noise[:, b - 1] + math.sqrt(1 - phi * phi) * eps[:, b]
    speed_bins = free[:, None] * congestion[None, :] + 0.06 * free[:, None] * noise
    speed = np.repeat(speed_bins, 5, axis=1)[:, :minutes]
    speed = np.clip(speed, *RANGES["traffic_speed"])

    # Planted accidents: logistic hazard around the base rate.
    score = _hazard_score(net, speed, weather, sun, hazard)
    logit_base = math.log(hazard.base_rate / (1.0 - hazard.base_rate))
    p = 1.0 / (1.0 + np.exp(-(logit_base + score)))
    hits = rng.random((n_roads, minutes)) < p
    rows, cols = np.nonzero(hits)
    accidents = sorted((int(ids[r]), int(m)) for r, m in zip(rows, cols))

    return DynamicStreams(
        minutes=minutes,
        road_ids=list(ids),
        speed=speed,
        weather=weather,
        sun=sun,
        accidents=accidents,
    )


# --- dataset assembly --------------------------------------------------------


def assemble_dataset(
    net: RoadNetwork,
    streams: DynamicStreams,
    n: int,
    k: int,
    khop: int,
    filter_kind: str,
    seed: int,
) -> SampleSet:
    """One positive sample per usable accident plus as many clean negatives."""
    t_min = (n - 1) * k
    t_max = streams.minutes - 1 - k
    if t_max < t_min:
        raise EmptyDatasetError(
            f"streams too short for n={n}, k={k}: need at least {t_min + k + 1} minutes"
        )
    if not streams.accidents:
        raise EmptyDatasetError("streams contain no accidents")

    subgraphs: dict[int, Subgraph] = {}

    def sub_for(road: int) -> Subgraph:
        if road not in subgraphs:
            subgraphs[road] = roadgraph.build_subgraph(net, road, khop, filter_kind)
        return subgraphs[road]

    samples = []
    for road, minute in streams.accidents:
        t = minute - k
        if t < t_min or t > t_max:
            continue
        samples.append(
            build_sample(net, streams, road, t, n, k, khop, filter_kind, subgraph=sub_for(road))
        )
    if not samples:
        raise EmptyDatasetError("no accident leaves room for a full sample window")

    rng = np.random.default_rng(seed)
    ids = streams.road_ids
    used: set[tuple[int, int]] = set()
    negatives = []
    attempts = 0
    while len(negatives) < len(samples):
        attempts += 1
        if attempts > 10000 * len(samples):
            raise EmptyDatasetError("could not find enough accident-free windows")
        road = int(ids[rng.integers(0, len(ids))])
        t = int(rng.integers(t_min, t_max + 1))
        if (road, t) in used or streams.has_accident_in(road, t, t + k):
            continue
        used.add((road, t))
        negatives.append(
            build_sample(net, streams, road, t, n, k, khop, filter_kind, subgraph=sub_for(road))
        )
    return SampleSet(samples + negatives, n=n, k=k, khop=khop, filter_kind=filter_kind)


def split_dataset(sset: SampleSet, seed: int) -> tuple[SampleSet, SampleSet, SampleSet]:
    """Stratified 8:1:1 split; each split keeps the class balance within one."""
    if len(sset) < 10:
        raise ValueError(f"need at least 10 samples to split, got {len(sset)}")
    rng = np.random.default_rng(seed)
    pos = [s for s in sset if s.label == 1]
    neg = [s for s in sset if s.label == 0]
    parts = ([], [], [])
    for group in (pos, neg):
        order = rng.permutation(len(group))
        n_train = int(len(group) * 0.8)
        n_val = int(len(group) * 0.1)
        for rank, idx in enumerate(order):
            bucket = 0 if rank < n_train else (1 if rank < n_train + n_val else 2)
            parts[bucket].append(group[idx])
    meta = dict(n=sset.n, k=sset.k, khop=sset.khop, filter_kind=sset.filter_kind)
    return tuple(SampleSet(p, **meta) for p in parts)


# --- persistence -------------------------------------------------------------


def save_dataset(sset: SampleSet, path) -> None:
    """JSON-Lines: a version header line, then one sample per line."""
    header = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "n": sset.n,
        "k": sset.k,
        "khop": sset.khop,
        "filter": sset.filter_kind,
        "count": len(sset),
    }
    with open(path, "w") as f:
        f.write(json.dumps(header) + "\n")
        for s in sset:
            f.write(json.dumps(s.to_json_dict()) + "\n")


def load_dataset(path) -> SampleSet:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise ParseError("line 1: missing dataset header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise ParseError(f"line 1: {e}") from e
    if not isinstance(header, dict) or header.get("format") != DATASET_FORMAT:
        raise ParseError("line 1: not a dataset file (bad format field)")
    if header.get("version") != DATASET_VERSION:
        raise ParseError(f"line 1: unsupported dataset version {header.get('version')!r}")
    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            samples.append(Sample.from_json_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise ParseError(f"line {lineno}: {e}") from e
    if len(samples) != header.get("count"):
        raise ParseError(
            f"line 1: header count {header.get('count')} != {len(samples)} samples"
        )
    return SampleSet(
        samples,
        n=int(header["n"]),
        k=int(header["k"]),
        khop=int(header["khop"]),
        filter_kind=str(header["filter"]),
    )


def save_streams(streams: DynamicStreams, path) -> None:
    """Deterministic npz (fixed zip timestamps, so same seed -> same bytes)."""
    arrays = {
        "minutes": np.array([streams.minutes]),
        "road_ids": np.array(streams.road_ids),
        "speed": streams.speed,
        "weather": streams.weather,
        "sun": streams.sun,
        "accident_roads": np.array([r for r, _ in streams.accidents], dtype=np.int64),
        "accident_minutes": np.array([m for _, m in streams.accidents], dtype=np.int64),
    }
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        for name, arr in arrays.items():
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            with zf.open(info, "w") as f:
                np.lib.format.write_array(f, np.ascontiguousarray(arr))


def load_streams(path) -> DynamicStreams:
    with np.load(path) as z:
        return DynamicStreams(
            minutes=int(z["minutes"][0]),
            road_ids=[int(r) for r in z["road_ids"]],
            speed=z["speed"],
            weather=z["weather"],
            sun=z["sun"],
            accidents=list(
                zip((int(r) for r in z["accident_roads"]), (int(m) for m in z["accident_minutes"]))
            ),
        )


# --- generator config --------------------------------------------------------


@dataclass(frozen=True)
class GeneratorConfig:
    """Synthetic world plus assembly parameters, loadable from JSON."""

    seed: int = 0
    n_roads: int = 100
    days: int = 20
    hazard: HazardConfig = field(default_factory=HazardConfig)
    n: int = 3
    k: int = 5
    khop: int = 2
    filter_kind: str = "dist-lap"

    def __post_init__(self):
        if self.n_roads < 2:
            raise ValueError("n_roads must be >= 2")
        if self.days < 1:
            raise ValueError("days must be >= 1")
        if self.n < 1 or self.k < 1 or self.khop < 1:
            raise ValueError("n, k and khop must be >= 1")
        if self.filter_kind not in FILTER_KINDS:
            raise ValueError(f"filter_kind must be one of {FILTER_KINDS}")

    @classmethod
    def from_json(cls, doc: dict) -> "GeneratorConfig":
        if not isinstance(doc, dict):
            raise ValueError("generator config must be a JSON object")
        known = {"seed", "n_roads", "days", "hazard", "n", "k", "khop", "filter_kind"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown generator config fields: {sorted(unknown)}")
        kwargs = dict(doc)
        if "hazard" in kwargs:
            kwargs["hazard"] = HazardConfig.from_json(kwargs["hazard"])
        return cls(**kwargs)

    def with_assembly(self, n=None, k=None, khop=None, filter_kind=None) -> "GeneratorConfig":
        return replace(
            self,
            n=self.n if n is None else n,
            k=self.k if k is None else k,
            khop=self.khop if khop is None else khop,
            filter_kind=self.filter_kind if filter_kind is None else filter_kind,
        )


def generate_world(cfg: GeneratorConfig) -> tuple[RoadNetwork, DynamicStreams]:
    net = generate_synthetic_network(cfg.seed, cfg.n_roads)
    streams = generate_planted_streams(cfg.seed + 1, net, cfg.days, cfg.hazard)
    return net, streams


def generate_dataset(cfg: GeneratorConfig) -> tuple[RoadNetwork, DynamicStreams, SampleSet]:
    net, streams = generate_world(cfg)
    sset = assemble_dataset(net, streams, cfg.n, cfg.k, cfg.khop, cfg.filter_kind, cfg.seed + 2)
    return net, streams, sset
