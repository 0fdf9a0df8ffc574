"""Protection decisions for every mechanism behind one ``decide`` call."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import fuzzy
from .aco import AcoContext, AcoParams, ConstructionGraph, aco_run, default_graph
from .channel import ErrorClass
from .fec import ProtectionDecision
from .motion import IntensityClass, NormalizedSizes
from .rnn import RnnModel, frame_inputs, rnn_eval, score_to_class, score_to_ratio
from .video import FrameRecord, FrameType, GopLayout, packetize, relative_position


class Kind(str, enum.Enum):
    NoFec = "NoFec"
    VaEEP = "VaEEP"
    VaUEP = "VaUEP"
    ViewFec = "ViewFec"
    NeuralFec = "NeuralFec"
    PredictiveAnts = "PredictiveAnts"
    UavFec = "UavFec"
    MintFec = "MintFec"
    Corvette = "Corvette"
    Shield = "Shield"


@dataclass(frozen=True)
class ViewFecParams:
    """``gamma`` gates I/P/B frames; ``weights`` is the motion/complexity factor per class."""

    gamma: tuple[float, float, float] = (1.0, 1.0, 0.0)
    weights: tuple[tuple[IntensityClass, float], ...] = (
        (IntensityClass.Low, 0.5), (IntensityClass.Medium, 1.0), (IntensityClass.High, 1.0),
    )

    def __post_init__(self):
        if len(self.gamma) != 3 or any(g < 0 for g in self.gamma):
            raise ValueError("gamma needs three non-negative gates")
        for _, c in self.weights:
            if not 0.0 < c <= 1.0:
                raise ValueError("complexity weights must lie in (0, 1]")

    def gate(self, kind: FrameType) -> float:
        return self.gamma[{FrameType.I: 0, FrameType.P: 1, FrameType.B: 2}[kind]]

    def weight(self, cls: IntensityClass) -> float:
        return dict(self.weights)[cls]


@dataclass(frozen=True)
class MechanismKind:
    kind: Kind
    ratio: float = 0.38
    ratio_i: float = 0.38
    ratio_p: float = 0.25
    viewfec: ViewFecParams = ViewFecParams()

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        for r in (self.ratio, self.ratio_i, self.ratio_p):
            if not 0.0 <= r <= 1.0:
                raise ValueError("baseline ratios must lie in [0, 1]")

    @property
    def label(self) -> str:
        if self.kind is Kind.VaEEP:
            return f"VaEEP({self.ratio:g})"
        if self.kind is Kind.VaUEP:
            return f"VaUEP({self.ratio_i:g},{self.ratio_p:g})"
        return self.kind.value


_SPEC = re.compile(r"^\s*(\w+)\s*(?:\(([^)]*)\))?\s*$")


def parse_mechanism(text: str) -> MechanismKind:
    """Parse names such as ``NoFec``, ``VaEEP(0.38)``, ``VaUEP(0.38, 0.25)``."""
    m = _SPEC.match(text)
    if not m:
        raise ValueError(f"cannot parse mechanism {text!r}")
    name, args = m.group(1), m.group(2)
    lookup = {k.value.lower(): k for k in Kind}
    if name.lower() not in lookup:
        raise ValueError(f"unknown mechanism {name!r}")
    kind = lookup[name.lower()]
    vals = [float(a) for a in args.split(",")] if args and args.strip() else []
    if kind is Kind.VaEEP and vals:
        if len(vals) != 1:
            raise ValueError("VaEEP takes one ratio")
        return MechanismKind(kind, ratio=vals[0])
    if kind is Kind.VaUEP and vals:
        if len(vals) != 2:
            raise ValueError("VaUEP takes two ratios (I, P)")
        return MechanismKind(kind, ratio_i=vals[0], ratio_p=vals[1])
    if vals:
        raise ValueError(f"{kind.value} takes no arguments")
    return MechanismKind(kind)


class IncompleteContextError(ValueError):
    pass


class MissingEngineError(RuntimeError):
    pass


@dataclass(frozen=True)
class MechanismContext:
    """Everything a decision may look at.  Fields a mechanism does not use may stay ``None``.

    ``plr_pct`` is on the 0..100 scale; ``motion_level`` is the sequence's
    mean motion-vector distance per predicted frame; ``temporal_intensity``
    the sequence's mean per-frame temporal intensity.
    """

    frame: FrameRecord
    gop: GopLayout
    intensity: IntensityClass | None = None
    sizes: NormalizedSizes | None = None
    temporal_intensity: float | None = None
    motion_level: float | None = None
    plr_pct: float | None = None
    density: float | None = None
    distance: float | None = None
    snr_db: float | None = None
    error_class: ErrorClass | None = None

    def __post_init__(self):
        if self.plr_pct is not None and not 0.0 <= self.plr_pct <= 100.0:
            raise ValueError("plr_pct must lie in [0, 100]")

    def require(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise IncompleteContextError(f"context lacks {', '.join(missing)}")

    @property
    def size_fraction(self) -> float:
        """Frame size relative to the sum of the per-type mean sizes."""
        self.require("sizes")
        s = self.sizes
        return self.frame.size_bytes / (s.mu_i + s.mu_p + s.mu_b)


@dataclass
class Engines:
    rnn3: RnnModel | None = None
    rnn4: RnnModel | None = None
    aco_graph: ConstructionGraph | None = None
    aco_params: AcoParams = field(default_factory=AcoParams)
    fuzzy: dict = field(default_factory=dict)
    density_fallback: float = 2e-4

    @classmethod
    def default(cls) -> "Engines":
        from .rnn import default_model

        return cls(default_model(3), default_model(4), default_graph())

    def fuzzy_engine(self, kind: Kind):
        if kind.value not in self.fuzzy:
            self.fuzzy[kind.value] = fuzzy.builtin_engine(kind.value)
        return self.fuzzy[kind.value]


# ---- ViewFEC ----------------------------------------------------------------

def viewfec_frame_ratio(frame: FrameRecord, layout: GopLayout, params: ViewFecParams, c_gop: float) -> float:
    gate = params.gate(frame.kind)
    if gate == 0:
        return 0.0
    return gate * c_gop * (1.0 / relative_position(frame.index, layout))


def viewfec_gop_redundancy(frames: Sequence[FrameRecord], layout: GopLayout, params: ViewFecParams,
                           c_gop: float, payload_bytes: int = 1000) -> float:
    """Redundant packets for one GoP: sum of FS_i * gate_i * C_GoP / RP_i, FS in packets."""
    if not 0.0 < c_gop <= 1.0:
        raise ValueError("c_gop must lie in (0, 1]")
    total = 0.0
    for f in frames:
        if params.gate(f.kind) == 0:
            continue
        total += packetize(f, payload_bytes) * viewfec_frame_ratio(f, layout, params, c_gop)
    return total


def average_redundancy(per_gop: Sequence[float]) -> float:
    if len(per_gop) == 0:
        raise ValueError("average_redundancy needs at least one GoP")
    return math.fsum(per_gop) / len(per_gop)


# ---- fuzzy inputs -------------------------------------------------------------

PLR_FLOOR, PLR_CEIL = 0.01, 99.99


def fuzzy_plr(plr_pct: float) -> float:
    """Keep loss rates off the exact 0 / 100 end points, where no PLR term fires."""
    return min(PLR_CEIL, max(PLR_FLOOR, plr_pct))


def size_class(kind: FrameType, fraction: float) -> int:
    return fuzzy.frame_size_variable(kind.value).best_term(fraction)


def hfs_inputs(ctx: MechanismContext, kind: Kind, density_fallback: float) -> dict:
    ctx.require("temporal_intensity", "sizes", "plr_pct", "distance")
    ext = {
        "plr": fuzzy_plr(ctx.plr_pct),
        "density": ctx.density if ctx.density is not None else density_fallback,
        "distance": ctx.distance,
        "temporal_intensity": ctx.temporal_intensity,
        "spatial_grade": fuzzy.spatial_grade(ctx.frame.kind.value, ctx.size_fraction),
        "frame_type": 0.0 if ctx.frame.kind is FrameType.I else 1.0,
    }
    if kind is Kind.Shield:
        ctx.require("snr_db")
        ext["snr"] = ctx.snr_db
    return ext


# ---- decide -------------------------------------------------------------------

def decide(mech: MechanismKind, ctx: MechanismContext, engines: Engines | None = None,
           rng: np.random.Generator | None = None) -> ProtectionDecision:
    frame = ctx.frame
    kind = mech.kind
    if frame.kind is FrameType.B or kind is Kind.NoFec:
        return ProtectionDecision(frame.index, 0.0, False)
    if kind is Kind.VaEEP:
        return ProtectionDecision.of(frame.index, mech.ratio)
    if kind is Kind.VaUEP:
        return ProtectionDecision.of(frame.index, mech.ratio_i if frame.kind is FrameType.I else mech.ratio_p)
    if kind is Kind.ViewFec:
        ctx.require("intensity")
        c = mech.viewfec.weight(ctx.intensity)
        return ProtectionDecision.of(frame.index, viewfec_frame_ratio(frame, ctx.gop, mech.viewfec, c))

    if engines is None:
        raise MissingEngineError(f"{kind.value} needs decision engines")
    if kind is Kind.NeuralFec:
        if engines.rnn3 is None:
            raise MissingEngineError("NeuralFec needs a 3-input network")
        score = rnn_eval(engines.rnn3, frame_inputs(frame, 3))
        return ProtectionDecision.of(frame.index, score_to_ratio(score))
    if kind is Kind.PredictiveAnts:
        if engines.aco_graph is None:
            raise MissingEngineError("PredictiveAnts needs a construction graph")
        if rng is None:
            raise MissingEngineError("PredictiveAnts needs a random generator")
        ctx.require("error_class", "sizes")
        if engines.rnn4 is not None:
            motion = score_to_class(rnn_eval(engines.rnn4, frame_inputs(frame, 4)))
        else:
            ctx.require("intensity")
            motion = ctx.intensity
        aco_ctx = AcoContext(motion, frame.kind, size_class(frame.kind, ctx.size_fraction), ctx.error_class)
        return ProtectionDecision.of(frame.index, aco_run(engines.aco_graph, aco_ctx, engines.aco_params, rng))
    if kind is Kind.UavFec:
        ctx.require("motion_level", "plr_pct")
        eng = engines.fuzzy_engine(kind)
        out = eng.infer({"Motion": ctx.motion_level, "PacketLossRate": fuzzy_plr(ctx.plr_pct)})
        return ProtectionDecision.of(frame.index, out)
    if kind is Kind.MintFec:
        ctx.require("sizes", "temporal_intensity", "plr_pct")
        eng = engines.fuzzy_engine(kind)
        s = ctx.sizes
        sizes = {"ISize": s.nhat_i, "PSize": s.nhat_p, "BSize": s.nhat_b}
        sizes[f"{frame.kind.value}Size"] = ctx.size_fraction
        out = eng.infer({
            "FrameType": 0.0 if frame.kind is FrameType.I else 1.0,
            **sizes,
            "TemporalIntensity": ctx.temporal_intensity,
            "PacketLossRate": fuzzy_plr(ctx.plr_pct),
        })
        return ProtectionDecision.of(frame.index, out)
    if kind in (Kind.Corvette, Kind.Shield):
        graph = engines.fuzzy_engine(kind)
        out = fuzzy.hfs_infer(graph, hfs_inputs(ctx, kind, engines.density_fallback))
        return ProtectionDecision.of(frame.index, out)
    raise ValueError(f"unhandled mechanism {kind}")


# ---- hop-by-hop header --------------------------------------------------------

HEADER_VERSION = 1
HEADER_SIZE = 5
_FT_CODE = {FrameType.I: 0, FrameType.P: 1, FrameType.B: 2}


class HeaderError(ValueError):
    pass


@dataclass(frozen=True)
class HopHeader:
    frame_type: FrameType
    motion_class: int
    spatial_class: int
    temporal_class: int
    nhat_i: float
    nhat_p: float
    nhat_b: float
    version: int = HEADER_VERSION

    def __post_init__(self):
        object.__setattr__(self, "frame_type", FrameType(self.frame_type))
        for name in ("motion_class", "spatial_class", "temporal_class"):
            if not 0 <= getattr(self, name) <= 3:
                raise HeaderError(f"{name} must fit in 2 bits")
        for name in ("nhat_i", "nhat_p", "nhat_b"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise HeaderError(f"{name} must lie in [0, 1]")
        if not 0 <= self.version <= 255:
            raise HeaderError("version must fit in one byte")


def _q(x: float) -> int:
    return int(math.floor(x * 255 + 0.5))


def encode_header(h: HopHeader) -> bytes:
    packed = (_FT_CODE[h.frame_type] << 6) | (h.motion_class << 4) | (h.spatial_class << 2) | h.temporal_class
    return bytes([h.version, packed, _q(h.nhat_i), _q(h.nhat_p), _q(h.nhat_b)])


def decode_header(buf: bytes) -> HopHeader:
    if len(buf) < HEADER_SIZE:
        raise HeaderError(f"truncated header: {len(buf)} of {HEADER_SIZE} bytes")
    if len(buf) > HEADER_SIZE:
        raise HeaderError(f"header has {len(buf) - HEADER_SIZE} trailing bytes")
    if buf[0] != HEADER_VERSION:
        raise HeaderError(f"unsupported header version {buf[0]}")
    ft = (buf[1] >> 6) & 3
    if ft == 3:
        raise HeaderError("invalid frame-type code 3")
    kind = {v: k for k, v in _FT_CODE.items()}[ft]
    return HopHeader(kind, (buf[1] >> 4) & 3, (buf[1] >> 2) & 3, buf[1] & 3,
                     buf[2] / 255, buf[3] / 255, buf[4] / 255, buf[0])


def header_for(ctx: MechanismContext, kind: Kind = Kind.Corvette) -> HopHeader:
    """Classes the origin server embeds for the relays."""
    graph = fuzzy.builtin_engine(kind.value)
    ctx.require("temporal_intensity", "sizes")
    spatial = fuzzy.spatial_grade(ctx.frame.kind.value, ctx.size_fraction)
    motion_grade = graph.layer("motion_activity").engine.infer(
        {"TemporalIntensity": ctx.temporal_intensity, "SpatialComplexity": spatial})
    s = ctx.sizes
    return HopHeader(
        ctx.frame.kind,
        fuzzy.grade_input("MotionActivity").best_term(motion_grade),
        fuzzy.grade_input("SpatialComplexity").best_term(spatial),
        fuzzy.temporal_intensity_variable().best_term(ctx.temporal_intensity),
        s.nhat_i, s.nhat_p, s.nhat_b,
    )


def per_hop_adjust(kind, header, net: Mapping[str, float], frame_index: int = 0,
                   engines: Engines | None = None) -> ProtectionDecision:
    """Re-evaluate the network part of a hierarchy at a relay.

    ``header`` may be a ``HopHeader`` or its wire bytes.  The motion-activity
    layer is pinned to the core of the carried class; ``net`` supplies
    ``plr`` (percent), ``density``, ``distance`` and, for Shield, ``snr``.
    """
    kind = Kind(kind)
    if kind not in (Kind.Corvette, Kind.Shield):
        raise ValueError("per-hop adjustment applies to hierarchical mechanisms only")
    if isinstance(header, (bytes, bytearray)):
        header = decode_header(bytes(header))
    if header.frame_type is FrameType.B:
        return ProtectionDecision(frame_index, 0.0, False)
    if header.motion_class > 2:
        raise HeaderError("motion class 3 is unused")
    engines = engines or Engines()
    graph = engines.fuzzy_engine(kind)
    ext = {
        "plr": fuzzy_plr(net["plr"]),
        "density": net.get("density") if net.get("density") is not None else engines.density_fallback,
        "distance": net["distance"],
        "frame_type": 0.0 if header.frame_type is FrameType.I else 1.0,
    }
    if kind is Kind.Shield:
        ext["snr"] = net["snr"]
    pinned = {"motion_activity": fuzzy.GRADE_CORES[header.motion_class]}
    return ProtectionDecision.of(frame_index, fuzzy.hfs_infer(graph, ext, pinned))

