"""Ant colony search over the layered context graph used by PredictiveAnts.

Layers: Start, motion intensity (Low/Medium/High), frame type (P/I), frame
size (Small/Medium/Large), predicted error class (NE..ME).  Arc lengths grow
with the severity of the target node, so long tours call for more
redundancy.  The observed context pins each layer to its class; nodes one
severity step away stay reachable with a longer effective length.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping

import numpy as np

from .channel import ErrorClass
from .motion import IntensityClass
from .video import FrameType

LAYERS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("Start", ("Start",)),
    ("Motion", ("Low", "Medium", "High")),
    ("FrameType", ("P", "I")),
    ("FrameSize", ("Small", "Medium", "Large")),
    ("Error", ("NE", "SSE", "SE", "SME", "ME")),
)
RATIO_LO, RATIO_HI = 0.55, 1.0


def node_id(layer: int, index: int) -> str:
    name, labels = LAYERS[layer]
    return f"{name}.{labels[index]}"


def heuristic_info(d: float) -> float:
    if not d > 0:
        raise ValueError(f"arc length must be > 0, got {d}")
    return 1.0 / d


@dataclass(frozen=True)
class ConstructionGraph:
    """Nodes are (layer, index) pairs; ``lengths`` maps arcs to d_ij."""

    lengths: Mapping[tuple[tuple[int, int], tuple[int, int]], float]

    def __post_init__(self):
        for (a, b), d in self.lengths.items():
            if b[0] != a[0] + 1:
                raise ValueError(f"arc {a}->{b} does not join adjacent layers")
            heuristic_info(d)
        for layer in range(len(LAYERS) - 1):
            for i in range(len(LAYERS[layer][1])):
                if not any(a == (layer, i) for a, _ in self.lengths):
                    raise ValueError(f"node {node_id(layer, i)} has no outgoing arc")

    @property
    def nodes(self) -> list[tuple[int, int]]:
        return [(l, i) for l, (_, labels) in enumerate(LAYERS) for i in range(len(labels))]

    @cached_property
    def heuristic(self) -> dict:
        return {arc: heuristic_info(d) for arc, d in self.lengths.items()}

    def tour_length(self, tour) -> float:
        return sum(self.lengths[(a, b)] for a, b in zip(tour, tour[1:]))

    @cached_property
    def length_range(self) -> tuple[float, float]:
        lengths = [self.tour_length(t) for t in enumerate_tours(self)]
        return min(lengths), max(lengths)


# severity of each node inside its layer; P is milder than I
_SEVERITY = {1: (0, 1, 2), 2: (0, 1), 3: (0, 1, 2), 4: (0, 1, 2, 3, 4)}


def default_graph(layer_weights=(1.0, 1.0, 1.0, 1.0)) -> ConstructionGraph:
    """d_ij = weight(layer of j) * (1 + severity(j)) on every forward arc."""
    lengths = {}
    for layer in range(len(LAYERS) - 1):
        for i in range(len(LAYERS[layer][1])):
            for j, sev in enumerate(_SEVERITY[layer + 1]):
                lengths[((layer, i), (layer + 1, j))] = layer_weights[layer] * (1.0 + sev)
    return ConstructionGraph(lengths)


def candidate_list(graph: ConstructionGraph, node: tuple[int, int]) -> list[tuple[tuple[int, int], float]]:
    """Forward arcs out of ``node`` with positive heuristic value, in node order."""
    if node[0] >= len(LAYERS) - 1:
        return []
    out = {}
    for (a, b), d in graph.lengths.items():
        if a == node and graph.heuristic[(a, b)] > 0:
            out[b] = d
    return sorted(out.items())


def enumerate_tours(graph: ConstructionGraph) -> list[tuple[tuple[int, int], ...]]:
    tours = []
    for combo in itertools.product(*[range(len(labels)) for _, labels in LAYERS[1:]]):
        tour = ((0, 0),) + tuple((l + 1, i) for l, i in enumerate(combo))
        if all((a, b) in graph.lengths for a, b in zip(tour, tour[1:])):
            tours.append(tour)
    return tours


def length_to_ratio(graph: ConstructionGraph, length: float) -> float:
    lo, hi = graph.length_range
    frac = 0.0 if hi == lo else (length - lo) / (hi - lo)
    return min(1.0, max(0.0, RATIO_LO + (RATIO_HI - RATIO_LO) * frac))


@dataclass(frozen=True)
class AcoParams:
    ants: int = 10
    iterations: int = 10
    rho: float = 0.5
    alpha: float = 1.0
    beta: float = 2.0
    tau_min: float = 0.01
    tau_max: float = 10.0
    tau0: float = 1.0
    neighbor_steps: int = 1
    attenuation: float = 0.25

    def __post_init__(self):
        if self.ants < 1 or self.iterations < 1:
            raise ValueError("ants and iterations must be >= 1")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if not 0.0 < self.tau_min <= self.tau0 <= self.tau_max:
            raise ValueError("need 0 < tau_min <= tau0 <= tau_max")
        if not 0.0 < self.attenuation <= 1.0:
            raise ValueError("attenuation must lie in (0, 1]")
        if self.neighbor_steps < 0:
            raise ValueError("neighbor_steps must be >= 0")


@dataclass(frozen=True)
class AcoContext:
    motion: IntensityClass
    frame_type: FrameType
    size_class: int
    error: ErrorClass

    def __post_init__(self):
        object.__setattr__(self, "motion", IntensityClass.parse(self.motion))
        object.__setattr__(self, "frame_type", FrameType(self.frame_type))
        object.__setattr__(self, "error", ErrorClass.parse(self.error))
        if self.frame_type is FrameType.B:
            raise ValueError("B-frames are not part of the construction graph")
        size = self.size_class
        if isinstance(size, str):
            size = LAYERS[3][1].index(size.capitalize())
        if size not in (0, 1, 2):
            raise ValueError(f"size class {self.size_class!r} out of range")
        object.__setattr__(self, "size_class", size)

    def observed(self) -> tuple[int, int, int, int]:
        return (self.motion.value, 0 if self.frame_type is FrameType.P else 1, self.size_class, int(self.error))


@dataclass
class PheromoneState:
    tau: dict
    params: AcoParams

    @classmethod
    def initial(cls, graph: ConstructionGraph, params: AcoParams) -> "PheromoneState":
        return cls({arc: params.tau0 for arc in graph.lengths}, params)

    def evaporate(self) -> None:
        keep = 1.0 - self.params.rho
        for arc in self.tau:
            self.tau[arc] = max(self.params.tau_min, self.tau[arc] * keep)

    def deposit(self, tour, amount: float) -> None:
        for arc in zip(tour, tour[1:]):
            self.tau[arc] = min(self.params.tau_max, max(self.params.tau_min, self.tau[arc] + amount))


@dataclass(frozen=True)
class AcoResult:
    ratio: float
    tour: tuple
    length: float
    effective_length: float
    tours_sampled: list = field(default_factory=list, repr=False, compare=False)


def effective_lengths(graph: ConstructionGraph, context: AcoContext, params: AcoParams) -> dict:
    """Arc lengths restricted to admissible nodes, stretched for non-observed ones."""
    obs = context.observed()
    out = {}
    for (a, b), d in graph.lengths.items():
        dist = abs(b[1] - obs[b[0] - 1])
        if dist > params.neighbor_steps:
            continue
        out[(a, b)] = d if dist == 0 else d / params.attenuation
    return out


def aco_search(graph: ConstructionGraph, context: AcoContext, params: AcoParams,
               rng: np.random.Generator, keep_tours: bool = False) -> AcoResult:
    eff = effective_lengths(graph, context, params)
    eta = {arc: heuristic_info(d) ** params.beta for arc, d in eff.items()}
    nexts: dict = {}
    for a, b in eff:
        nexts.setdefault(a, []).append(b)
    for a in nexts:
        nexts[a].sort()
    pher = PheromoneState.initial(graph, params)
    best, best_cost = None, float("inf")
    sampled = []
    last = len(LAYERS) - 1
    for _ in range(params.iterations):
        for _ in range(params.ants):
            node, tour, cost = (0, 0), [(0, 0)], 0.0
            while node[0] < last:
                cands = nexts.get(node)
                if not cands:
                    raise RuntimeError(f"no admissible successor for {node_id(*node)}")
                w = np.array([pher.tau[(node, c)] ** params.alpha * eta[(node, c)] for c in cands])
                u = rng.random() * w.sum()
                idx = min(int(np.searchsorted(np.cumsum(w), u, side="right")), len(cands) - 1)
                nxt = cands[idx]
                cost += eff[(node, nxt)]
                tour.append(nxt)
                node = nxt
            t = tuple(tour)
            if keep_tours:
                sampled.append(t)
            if cost < best_cost:
                best, best_cost = t, cost
        pher.evaporate()
        pher.deposit(best, 1.0 / best_cost)
    raw = graph.tour_length(best)
    return AcoResult(length_to_ratio(graph, raw), best, raw, best_cost, sampled)


def aco_run(graph: ConstructionGraph, context: AcoContext, params: AcoParams | None,
            rng: np.random.Generator) -> float:
    """Redundancy ratio in [0, 1] for the context; deterministic for a seeded ``rng``."""
    return aco_search(graph, context, params or AcoParams(), rng).ratio


def optimal_tour(graph: ConstructionGraph, context: AcoContext, params: AcoParams | None = None):
    """Exhaustive optimum of the effective length (the colony's target)."""
    params = params or AcoParams()
    eff = effective_lengths(graph, context, params)
    best = None
    for tour in enumerate_tours(graph):
        arcs = list(zip(tour, tour[1:]))
        if all(a in eff for a in arcs):
            c = sum(eff[a] for a in arcs)
            if best is None or c < best[1]:
                best = (tour, c)
    return best


def load_length_table(path, base: ConstructionGraph | None = None) -> ConstructionGraph:
    """Override arc lengths from a YAML mapping ``"Motion.High -> FrameType.I": 2.5``."""
    import yaml

    data = yaml.safe_load(Path(path).read_text()) or {}
    ids = {node_id(l, i): (l, i) for l, (_, labels) in enumerate(LAYERS) for i in range(len(labels))}
    lengths = dict((base or default_graph()).lengths)
    for key, value in data.items():
        try:
            a, b = (ids[s.strip()] for s in str(key).split("->"))
        except (KeyError, ValueError):
            raise ValueError(f"bad arc id {key!r}") from None
        if (a, b) not in lengths:
            raise ValueError(f"arc {key!r} is not part of the graph")
        lengths[(a, b)] = float(value)
    return ConstructionGraph(lengths)
