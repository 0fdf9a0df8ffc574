"""Two-state Markov (Gilbert-Elliott) loss channels, gap statistics and error-class prediction.

All randomness comes from a ``numpy.random.Generator`` supplied by the caller
(``numpy.random.default_rng(seed)``, i.e. PCG64).  Each packet consumes two
uniforms: the first decides loss in the current state, the second the state
transition.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class State(enum.IntEnum):
    G = 0
    B = 1


@dataclass(frozen=True)
class GeParams:
    """``pg``/``pb`` are per-packet loss probabilities in the good/bad state;
    ``k`` is P(G -> B) and ``r`` is P(B -> G)."""

    pg: float
    pb: float
    k: float
    r: float

    def __post_init__(self):
        for name in ("pg", "pb", "k", "r"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")


@dataclass(frozen=True)
class SimplifiedGeParams:
    """Lossless good state, always-lossy bad state."""

    p_gb: float
    p_bg: float

    def __post_init__(self):
        for name in ("p_gb", "p_bg"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name}={v} outside (0, 1)")

    def to_full(self) -> GeParams:
        return GeParams(0.0, 1.0, self.p_gb, self.p_bg)

    @classmethod
    def for_loss(cls, target: float, mean_burst: float = 2.0) -> "SimplifiedGeParams":
        """Parameters whose long-run loss rate is ``target`` with mean bad run ``mean_burst``."""
        if not 0.0 < target < 1.0:
            raise ValueError("target loss must lie in (0, 1)")
        if mean_burst <= 1.0:
            raise ValueError("mean_burst must exceed 1 packet")
        p_bg = 1.0 / mean_burst
        p_gb = target * p_bg / (1.0 - target)
        return cls(p_gb, p_bg)


def ge_steady_state(params: GeParams) -> tuple[float, float]:
    if not (0.0 < params.k < 1.0 and 0.0 < params.r < 1.0):
        raise ValueError("steady state needs 0 < k, r < 1")
    s = params.r + params.k
    return params.r / s, params.k / s


def ge_avg_loss(params: GeParams) -> float:
    phi_g, phi_b = ge_steady_state(params)
    return params.pg * phi_g + params.pb * phi_b


def simplified_plr(params: SimplifiedGeParams) -> float:
    """The closed form p_bg / (p_bg + p_gb) as commonly printed for this model.

    This is the good-state occupancy, not the loss rate; see
    ``bad_state_occupancy`` for the long-run fraction of lost packets.
    """
    return params.p_bg / (params.p_bg + params.p_gb)


def bad_state_occupancy(params: SimplifiedGeParams) -> float:
    return params.p_gb / (params.p_gb + params.p_bg)


def _as_full(params) -> GeParams:
    return params.to_full() if isinstance(params, SimplifiedGeParams) else params


def _step(state: int, p: GeParams, u_loss: float, u_move: float) -> tuple[bool, int]:
    if state == State.G:
        lost = u_loss < p.pg
        nxt = State.B if u_move < p.k else State.G
    else:
        lost = u_loss < p.pb
        nxt = State.G if u_move < p.r else State.B
    return not lost, int(nxt)


def channel_step(state, params, rng: np.random.Generator) -> tuple[bool, State]:
    u = rng.random(2)
    delivered, nxt = _step(int(state), _as_full(params), float(u[0]), float(u[1]))
    return delivered, State(nxt)


class GilbertElliottChannel:
    """Stateful channel; ``simulate(n)`` draws the same uniforms as n ``step`` calls."""

    def __init__(self, params, rng: np.random.Generator, state: State = State.G):
        self.params = _as_full(params)
        self.rng = rng
        self.state = State(state)

    def step(self) -> bool:
        delivered, self.state = channel_step(self.state, self.params, self.rng)
        return delivered

    def simulate(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Delivered flags and the state each packet was sent in."""
        u = self.rng.random((n, 2))
        p = self.params
        # each step maps the state through one of: constant G/B, identity, swap
        go_bad = u[:, 1] < p.k
        go_good = u[:, 1] < p.r
        reset = go_bad != go_good
        swaps = np.cumsum(go_bad & go_good)
        idx = np.arange(n)
        last = np.maximum.accumulate(np.where(reset, idx, -1))
        safe = np.maximum(last, 0)
        after = np.where(last >= 0, go_bad[safe].astype(np.int64) ^ ((swaps - swaps[safe]) & 1),
                         int(self.state) ^ (swaps & 1))
        states = np.empty(n, dtype=np.uint8)
        if n:
            states[0] = int(self.state)
            states[1:] = after[:-1]
            self.state = State(int(after[-1]))
        loss_p = np.where(states == 0, p.pg, p.pb)
        delivered = u[:, 0] >= loss_p
        return delivered, states


class ReplayChannel:
    """Plays back a recorded loss trace, wrapping around at the end."""

    def __init__(self, flags: Sequence[bool]):
        if len(flags) == 0:
            raise ValueError("replay trace is empty")
        self.flags = [bool(f) for f in flags]
        self.pos = 0

    def step(self) -> bool:
        f = self.flags[self.pos % len(self.flags)]
        self.pos += 1
        return f

    def simulate(self, n: int) -> np.ndarray:
        return np.array([self.step() for _ in range(n)], dtype=bool)


# ---- loss-trace files -------------------------------------------------------

def dumps_loss_trace(flags: Sequence[bool]) -> str:
    s = "".join("1" if f else "0" for f in flags)
    return "".join(s[i:i + 80] + "\n" for i in range(0, len(s), 80))


def loads_loss_trace(text: str) -> list[bool]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        for ch in line.strip():
            if ch not in "01":
                raise ValueError(f"line {lineno}: unexpected character {ch!r} in loss trace")
            out.append(ch == "1")
    return out


def write_loss_trace(flags, path) -> None:
    Path(path).write_text(dumps_loss_trace(flags), encoding="ascii", newline="\n")


def read_loss_trace(path) -> list[bool]:
    return loads_loss_trace(Path(path).read_text(encoding="ascii"))


# ---- gaps and prediction ----------------------------------------------------

@dataclass(frozen=True)
class GapStats:
    good_gaps: tuple[int, ...]
    bad_gaps: tuple[int, ...]
    total_packets: int
    starts_delivered: bool = True

    @property
    def mean_good(self) -> float:
        return math.fsum(self.good_gaps) / len(self.good_gaps) if self.good_gaps else 0.0

    @property
    def mean_bad(self) -> float:
        return math.fsum(self.bad_gaps) / len(self.bad_gaps) if self.bad_gaps else 0.0


def gap_stats(flags: Sequence[bool]) -> GapStats:
    if len(flags) == 0:
        raise ValueError("gap_stats needs a non-empty trace")
    good, bad = [], []
    cur, run = bool(flags[0]), 0
    for f in flags:
        if bool(f) == cur:
            run += 1
        else:
            (good if cur else bad).append(run)
            cur, run = bool(f), 1
    (good if cur else bad).append(run)
    return GapStats(tuple(good), tuple(bad), len(flags), bool(flags[0]))


def reconstruct_flags(stats: GapStats) -> list[bool]:
    """Inverse of ``gap_stats``: runs alternate starting with ``starts_delivered``."""
    first, second = (stats.good_gaps, stats.bad_gaps) if stats.starts_delivered else (stats.bad_gaps, stats.good_gaps)
    out: list[bool] = []
    flag = stats.starts_delivered
    for i in range(max(len(first), len(second))):
        if i < len(first):
            out.extend([flag] * first[i])
        if i < len(second):
            out.extend([not flag] * second[i])
    return out


class ErrorClass(enum.IntEnum):
    """Predicted loss pattern for the next block, ordered by severity.

    NE: no error; SSE: a single gap straddling into the next block;
    SE: a single gap inside the block; SME: several gaps, the last one
    straddling; ME: several gaps inside the block.
    """

    NE = 0
    SSE = 1
    SE = 2
    SME = 3
    ME = 4

    @classmethod
    def parse(cls, value) -> "ErrorClass":
        if isinstance(value, cls):
            return value
        if isinstance(value, int):
            return cls(value)
        return cls[str(value).upper()]


def expected_onsets(stats: GapStats, block_size: int = 10) -> float:
    """Expected number of bad-gap starts in a block of ``block_size`` packets."""
    if not stats.bad_gaps:
        return 0.0
    return block_size / (stats.mean_good + stats.mean_bad)


def predict_error_class(stats: GapStats, block_size: int = 10) -> ErrorClass:
    """Classify the next block from the mean good and bad gap lengths.

    With cycle length g + b, e = block_size / (g + b) bad gaps start per
    block.  e < 0.5 predicts no error, 0.5 <= e < 1.5 a single gap and
    e >= 1.5 several.  After floor(e) whole cycles, r = block_size -
    floor(e) * (g + b) packets remain; a gap of mean length b >= r runs past
    the block end (straddles).  The full table is in docs/error-classes.md.
    """
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    if stats.total_packets < 1:
        raise ValueError("stats cover no packets")
    if not stats.bad_gaps:
        return ErrorClass.NE
    if not stats.good_gaps:
        return ErrorClass.ME
    g, b = stats.mean_good, stats.mean_bad
    e = block_size / (g + b)
    if e < 0.5:
        return ErrorClass.NE
    residual = block_size - math.floor(e) * (g + b)
    straddle = b >= residual
    if e < 1.5:
        return ErrorClass.SSE if straddle else ErrorClass.SE
    return ErrorClass.SME if straddle else ErrorClass.ME


class ErrorPredictor:
    """Feedback loop: accumulates receiver loss reports and predicts the next block.

    Only the most recent ``history`` packets are kept.
    """

    def __init__(self, block_size: int = 10, history: int = 200):
        self.block_size = block_size
        self.history = history
        self.flags: list[bool] = []

    def observe(self, flags: Sequence[bool]) -> None:
        self.flags.extend(bool(f) for f in flags)
        if len(self.flags) > self.history:
            del self.flags[: len(self.flags) - self.history]

    def predict(self) -> ErrorClass:
        if not self.flags:
            return ErrorClass.NE
        return predict_error_class(gap_stats(self.flags), self.block_size)
