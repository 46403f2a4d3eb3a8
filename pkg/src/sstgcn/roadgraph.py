"""Road-network graphs and the preprocessing that turns them into GCN inputs.

Roads are nodes; an edge joins two roads that share an intersection.  From
a center road we extract the K-hop subgraph, compute all-pairs shortest
metric distances inside it, turn those into a distance-weight matrix, and
apply one of two spectral filters: the symmetric degree normalization
D^{-1/2}·A·D^{-1/2} ("gcn") or identity minus it ("lap").
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

FILTER_KINDS = ("adj-gcn", "adj-lap", "dist-gcn", "dist-lap")

# Attribute bounds of the road schema (also the fixed normalization ranges).
LANES_RANGE = (1, 7)
SPEED_LIMIT_RANGE = (10, 110)
POI_RANGE = (0, 10)
POI_COUNT = 10


class DegenerateGraphError(ValueError):
    """A weight matrix with a zero row sum cannot be normalized."""


@dataclass
class Road:
    id: int
    lanes: int
    speed_limit: float
    length_m: float
    bump: int
    camera: int
    poi: list[int]
    heading_deg: float

    def validate(self):
        if not LANES_RANGE[0] <= self.lanes <= LANES_RANGE[1]:
            raise ValueError(f"road {self.id}: lanes {self.lanes} outside {LANES_RANGE}")
        if not SPEED_LIMIT_RANGE[0] <= self.speed_limit <= SPEED_LIMIT_RANGE[1]:
            raise ValueError(
                f"road {self.id}: speed limit {self.speed_limit} outside {SPEED_LIMIT_RANGE}"
            )
        if not self.length_m > 0:
            raise ValueError(f"road {self.id}: length must be positive, got {self.length_m}")
        if self.bump not in (0, 1) or self.camera not in (0, 1):
            raise ValueError(f"road {self.id}: bump/camera must be 0 or 1")
        if len(self.poi) != POI_COUNT or any(
            not POI_RANGE[0] <= p <= POI_RANGE[1] for p in self.poi
        ):
            raise ValueError(f"road {self.id}: poi must be {POI_COUNT} counts in {POI_RANGE}")
        if not 0.0 <= self.heading_deg < 360.0:
            raise ValueError(f"road {self.id}: heading {self.heading_deg} outside [0, 360)")


@dataclass
class RoadNetwork:
    """Static road graph; adjacency is kept symmetric and irreflexive."""

    roads: dict[int, Road] = field(default_factory=dict)
    adjacency: dict[int, set[int]] = field(default_factory=dict)

    @property
    def road_ids(self) -> list[int]:
        return sorted(self.roads)

    def add_road(self, road: Road):
        road.validate()
        if road.id in self.roads:
            raise ValueError(f"duplicate road id {road.id}")
        self.roads[road.id] = road
        self.adjacency[road.id] = set()

    def add_edge(self, u: int, v: int):
        if u == v:
            raise ValueError(f"self-edge on road {u}")
        for r in (u, v):
            if r not in self.roads:
                raise KeyError(f"unknown road id {r}")
        self.adjacency[u].add(v)
        self.adjacency[v].add(u)

    def neighbors(self, road_id: int) -> list[int]:
        if road_id not in self.adjacency:
            raise KeyError(f"unknown road id {road_id}")
        return sorted(self.adjacency[road_id])

    def edges(self) -> list[tuple[int, int]]:
        return sorted(
            (u, v) for u, nbrs in self.adjacency.items() for v in nbrs if u < v
        )

    def is_connected(self) -> bool:
        ids = self.road_ids
        if not ids:
            return True
        seen = {ids[0]}
        queue = deque([ids[0]])
        while queue:
            u = queue.popleft()
            for v in self.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == len(ids)

    # JSON document: {"roads": [{id, lanes, speed_limit, length_m, bump,
    # camera, poi, heading_deg}], "edges": [[id, id]]}
    def to_json(self) -> dict:
        return {
            "roads": [
                {
                    "id": r.id,
                    "lanes": r.lanes,
                    "speed_limit": r.speed_limit,
                    "length_m": r.length_m,
                    "bump": r.bump,
                    "camera": r.camera,
                    "poi": list(r.poi),
                    "heading_deg": r.heading_deg,
                }
                for r in (self.roads[i] for i in self.road_ids)
            ],
            "edges": [list(e) for e in self.edges()],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RoadNetwork":
        net = cls()
        for r in doc["roads"]:
            net.add_road(
                Road(
                    id=int(r["id"]),
                    lanes=int(r["lanes"]),
                    speed_limit=float(r["speed_limit"]),
                    length_m=float(r["length_m"]),
                    bump=int(r["bump"]),
                    camera=int(r["camera"]),
                    poi=[int(p) for p in r["poi"]],
                    heading_deg=float(r["heading_deg"]),
                )
            )
        for u, v in doc["edges"]:
            net.add_edge(int(u), int(v))
        return net

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json(), f)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "RoadNetwork":
        with open(path) as f:
            return cls.from_json(json.load(f))


@dataclass
class Subgraph:
    """K-hop neighborhood of a center road, ready for graph convolution.

    nodes is ordered center-first; laplacian is the filtered graph operator
    actually fed to the model (a normalized Laplacian for the "lap" filters,
    the degree-normalized weight matrix for the "gcn" ones); distances keeps
    the raw shortest-path matrix for diagnostics.
    """

    nodes: list[int]
    center_index: int
    laplacian: np.ndarray
    distances: np.ndarray


def khop_subgraph(net: RoadNetwork, center: int, k_hops: int) -> list[int]:
    """Roads within k_hops of center: center first, then by (hop, id)."""
    if center not in net.roads:
        raise KeyError(f"unknown road id {center}")
    if k_hops < 1:
        raise ValueError(f"k_hops must be >= 1, got {k_hops}")
    hop = {center: 0}
    queue = deque([center])
    while queue:
        u = queue.popleft()
        if hop[u] == k_hops:
            continue
        for v in net.adjacency[u]:
            if v not in hop:
                hop[v] = hop[u] + 1
                queue.append(v)
    rest = sorted((h, r) for r, h in hop.items() if r != center)
    return [center] + [r for _, r in rest]


def floyd_warshall(nodes: list[int], edge_length) -> np.ndarray:
    """All-pairs shortest metric distances over the given nodes.

    edge_length(u, v) returns the metric length of the direct edge or None
    when the roads are not adjacent.  Disconnected pairs come back as inf.
    """
    n = len(nodes)
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for i in range(n):
        for j in range(i + 1, n):
            w = edge_length(nodes[i], nodes[j])
            if w is None:
                continue
            if w <= 0 or not math.isfinite(w):
                raise ValueError(
                    f"edge length between {nodes[i]} and {nodes[j]} must be positive, got {w}"
                )
            d[i, j] = d[j, i] = w
    for k in range(n):
        np.minimum(d, d[:, k, None] + d[None, k, :], out=d)
    return d


def road_midpoint_metric(net: RoadNetwork):
    """Edge metric for floyd_warshall: midpoint-to-midpoint road length."""

    def edge_length(u, v):
        if v not in net.adjacency[u]:
            return None
        return (net.roads[u].length_m + net.roads[v].length_m) / 2.0

    return edge_length


def distance_weight_matrix(d: np.ndarray) -> np.ndarray:
    """Gaussian-kernel weights from shortest-path distances, plus self-loops.

    w[i][j] = exp(-(d[i][j]/sigma)^2) with sigma the mean finite off-diagonal
    distance (1 if there is none); disconnected pairs get weight 0; the
    identity is added so every node keeps its own features.
    """
    n = d.shape[0]
    off = ~np.eye(n, dtype=bool)
    finite = off & np.isfinite(d)
    sigma = d[finite].mean() if finite.any() else 1.0
    if sigma <= 0:
        sigma = 1.0
    w = np.zeros_like(d)
    w[finite] = np.exp(-((d[finite] / sigma) ** 2))
    w += np.eye(n)
    return w


def adjacency_weight_matrix(net: RoadNetwork, nodes: list[int]) -> np.ndarray:
    """Plain 0/1 adjacency over the given nodes, plus self-loops."""
    n = len(nodes)
    a = np.eye(n)
    index = {r: i for i, r in enumerate(nodes)}
    for i, u in enumerate(nodes):
        for v in net.adjacency[u]:
            j = index.get(v)
            if j is not None:
                a[i, j] = a[j, i] = 1.0
    return a


def gcn_filter(a: np.ndarray) -> np.ndarray:
    """Symmetric degree normalization D^{-1/2}·A·D^{-1/2}."""
    deg = a.sum(axis=1)
    if np.any(deg <= 0):
        raise DegenerateGraphError(f"zero row sum at node index {int(np.argmin(deg))}")
    dinv = 1.0 / np.sqrt(deg)
    # Outer product keeps the result exactly symmetric entry-by-entry.
    return a * np.outer(dinv, dinv)


def normalized_laplacian(a: np.ndarray) -> np.ndarray:
    """Identity minus the degree-normalized weight matrix."""
    return np.eye(a.shape[0]) - gcn_filter(a)


def build_subgraph(
    net: RoadNetwork, center: int, k_hops: int, filter_kind: str = "dist-lap"
) -> Subgraph:
    """Extract the K-hop subgraph around center and filter its weights."""
    if filter_kind not in FILTER_KINDS:
        raise ValueError(f"filter_kind must be one of {FILTER_KINDS}, got {filter_kind!r}")
    nodes = khop_subgraph(net, center, k_hops)
    d = floyd_warshall(nodes, road_midpoint_metric(net))
    if filter_kind.startswith("dist"):
        a = distance_weight_matrix(d)
    else:
        a = adjacency_weight_matrix(net, nodes)
    op = gcn_filter(a) if filter_kind.endswith("gcn") else normalized_laplacian(a)
    return Subgraph(nodes=nodes, center_index=0, laplacian=op, distances=d)
