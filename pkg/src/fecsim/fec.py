"""Systematic Reed-Solomon erasure code over GF(256) and FEC block bookkeeping.

The field uses the reduction polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11D).
The generator matrix is a Vandermonde matrix on the points 0..n-1 made
systematic by right-multiplying with the inverse of its top k x k block, so
any k rows stay invertible and the first k output shards equal the input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

POLY = 0x11D
MAX_SHARDS = 255


def _tables():
    exp = np.zeros(512, dtype=np.int64)
    log = np.zeros(256, dtype=np.int64)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= POLY
    exp[255:510] = exp[0:255]
    mul = exp[(log[:, None] + log[None, :]) % 255]
    mul[0, :] = 0
    mul[:, 0] = 0
    inv = np.zeros(256, dtype=np.int64)
    inv[1:] = exp[(255 - log[1:]) % 255]
    return exp, log, mul.astype(np.uint8), inv.astype(np.uint8)


GF_EXP, GF_LOG, GF_MUL, GF_INV = _tables()
GF_MUL.flags.writeable = False
GF_INV.flags.writeable = False


def gf_mul(a: int, b: int) -> int:
    return int(GF_MUL[a, b])


def gf_pow(a: int, e: int) -> int:
    if e == 0:
        return 1
    if a == 0:
        return 0
    return int(GF_EXP[(GF_LOG[a] * e) % 255])


def gf_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product over GF(256); ``b`` may hold shard payloads as rows."""
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], b.shape[1]), dtype=np.uint8)
    return np.bitwise_xor.reduce(GF_MUL[a[:, :, None], b[None, :, :]], axis=1)


def gf_invert(m: np.ndarray) -> np.ndarray:
    """Gauss-Jordan inverse of a square matrix over GF(256)."""
    m = np.array(m, dtype=np.uint8)
    n = m.shape[0]
    aug = np.concatenate([m, np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        nz = np.nonzero(aug[col:, col])[0]
        if len(nz) == 0:
            raise ValueError("matrix is singular over GF(256)")
        piv = col + nz[0]
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] = GF_MUL[GF_INV[aug[col, col]], aug[col]]
        for row in np.nonzero(aug[:, col])[0]:
            if row != col:
                aug[row] ^= GF_MUL[aug[row, col], aug[col]]
    return aug[:, n:]


@lru_cache(maxsize=None)
def encoding_matrix(n: int, k: int) -> np.ndarray:
    vand = np.array([[gf_pow(x, j) for j in range(k)] for x in range(n)], dtype=np.uint8)
    out = gf_matmul(vand, gf_invert(vand[:k]))
    out.flags.writeable = False
    return out


# ---- parameters and blocks ----------------------------------------------------

@dataclass(frozen=True)
class RsParams:
    n: int
    k: int

    def __post_init__(self):
        if not 1 <= self.k <= self.n <= MAX_SHARDS:
            raise ValueError(f"need 1 <= k <= n <= {MAX_SHARDS}, got n={self.n}, k={self.k}")

    @property
    def h(self) -> int:
        return self.n - self.k

    @classmethod
    def from_kh(cls, k: int, h: int) -> "RsParams":
        if h < 0:
            raise ValueError("h must be >= 0")
        return cls(k + h, k)


def recovery_rate(params: RsParams) -> float:
    return params.h / params.n


class Unrecoverable(Exception):
    """Fewer than k shards arrived; the block cannot be decoded."""

    def __init__(self, present: int, k: int):
        super().__init__(f"only {present} of the {k} required shards present")
        self.present = present
        self.k = k


@dataclass(frozen=True)
class FecBlock:
    """``shards[i]`` is ``None`` when shard ``i`` was erased."""

    params: RsParams
    shards: tuple
    frame_ref: int = -1

    def __post_init__(self):
        object.__setattr__(self, "shards", tuple(self.shards))
        if len(self.shards) != self.params.n:
            raise ValueError(f"block needs {self.params.n} shard slots, got {len(self.shards)}")
        lengths = {len(s) for s in self.shards if s is not None}
        if len(lengths) > 1:
            raise ValueError("present shards differ in length")

    @property
    def present(self) -> tuple[bool, ...]:
        return tuple(s is not None for s in self.shards)

    @property
    def present_count(self) -> int:
        return sum(self.present)

    def erase(self, indices) -> "FecBlock":
        drop = set(indices)
        return FecBlock(self.params, tuple(None if i in drop else s for i, s in enumerate(self.shards)),
                        self.frame_ref)

    def to_packets(self) -> list[bytes]:
        """Wire form of the present shards: one index byte followed by the payload."""
        return [bytes([i]) + s for i, s in enumerate(self.shards) if s is not None]

    @classmethod
    def from_packets(cls, params: RsParams, packets: Sequence[bytes], frame_ref: int = -1) -> "FecBlock":
        slots: list = [None] * params.n
        for p in packets:
            if not p:
                raise ValueError("empty packet")
            i = p[0]
            if i >= params.n:
                raise ValueError(f"shard index {i} out of range for n={params.n}")
            slots[i] = bytes(p[1:])
        return cls(params, tuple(slots), frame_ref)


def _as_matrix(shards: Sequence[bytes]) -> np.ndarray:
    lengths = {len(s) for s in shards}
    if len(lengths) > 1:
        raise ValueError("source shards must have equal length")
    return np.array([np.frombuffer(bytes(s), dtype=np.uint8) for s in shards], dtype=np.uint8).reshape(
        len(shards), lengths.pop() if lengths else 0
    )


def rs_encode(source: Sequence[bytes], h: int) -> list[bytes]:
    """Return the n = k + h shards; the first k are ``source`` unchanged."""
    k = len(source)
    params = RsParams.from_kh(k, h)
    data = _as_matrix(source)
    if h == 0:
        return [bytes(s) for s in source]
    parity = gf_matmul(encoding_matrix(params.n, k)[k:], data)
    return [bytes(s) for s in source] + [row.tobytes() for row in parity]


def rs_decode(block: FecBlock) -> list[bytes]:
    """Recover the k source shards or raise ``Unrecoverable``."""
    k = block.params.k
    rows = [i for i, s in enumerate(block.shards) if s is not None]
    if len(rows) < k:
        raise Unrecoverable(len(rows), k)
    if all(block.shards[i] is not None for i in range(k)):
        return [bytes(block.shards[i]) for i in range(k)]
    rows = rows[:k]
    sub = encoding_matrix(block.params.n, k)[rows]
    data = _as_matrix([block.shards[i] for i in rows])
    return [row.tobytes() for row in gf_matmul(gf_invert(sub), data)]


def build_ffblocks(packet_count: int, block_source_size: int, ratio: float,
                   rounding: str = "ceil") -> list[RsParams]:
    """Split a frame's packets into blocks of ``block_source_size`` source packets.

    Each block gets h = ceil(ratio * k) parity shards, or the nearest
    integer (halves rounded up) with ``rounding="nearest"``.
    """
    if packet_count < 1 or block_source_size < 1:
        raise ValueError("packet_count and block_source_size must be >= 1")
    if not 0.0 <= ratio <= 1.0:
        raise ValueError("ratio must lie in [0, 1]")
    if rounding not in ("ceil", "nearest"):
        raise ValueError(f"unknown rounding {rounding!r}")
    blocks = []
    for start in range(0, packet_count, block_source_size):
        k = min(block_source_size, packet_count - start)
        # round first so 0.3 * 10 = 3.0000000000000004 does not tip the ceiling
        exact = round(ratio * k, 9)
        h = math.ceil(exact) if rounding == "ceil" else math.floor(exact + 0.5)
        blocks.append(RsParams.from_kh(k, h))
    return blocks


@dataclass(frozen=True)
class ProtectionDecision:
    frame_index: int
    ratio: float
    protect: bool

    def __post_init__(self):
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"ratio {self.ratio} outside [0, 1]")
        if not self.protect and self.ratio != 0.0:
            raise ValueError("unprotected frames must have ratio 0")

    @classmethod
    def of(cls, frame_index: int, ratio: float) -> "ProtectionDecision":
        ratio = min(1.0, max(0.0, float(ratio)))
        return cls(frame_index, ratio, ratio > 0.0)
