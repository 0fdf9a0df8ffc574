"""Seeded scenario runner: trace -> decisions -> RS blocks -> channel -> decode -> QoE.

Loss pairing: every FEC block of k source packets owns 2k consecutive
channel slots, source packet j in slot j and parity shard i in slot k + i.
The slot layout depends only on the trace and the block size, so all
mechanisms see the same source-packet losses, and parity packets fall into
the same slots whenever they exist.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from . import channel as ch
from .fec import FecBlock, Unrecoverable, build_ffblocks, rs_decode, rs_encode
from .mechanisms import (Engines, Kind, MechanismContext, MechanismKind, ViewFecParams, decide,
                         parse_mechanism)
from .motion import FuzzyMotionClassifier, IntensityClass, normalize_frame_sizes
from .motion import video_motion_level, video_temporal_intensity
from .netstate import NetworkSnapshot, read_snapshot, snapshot_density, synthesize_snapshot, windowed_plr
from .qoe import QoeReport, damage_map, decodable_frame_ratio, frame_copy_conceal, overhead_pct, quality_summary
from .qoe import reports_to_csv
from .video import FrameType, GopLayout, VideoTrace, packetize, read_trace, synthesize_pixels, synthesize_video

log = logging.getLogger("fecsim")

LOG_ENV = "FECSIM_LOG_LEVEL"


def configure_logging() -> None:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


class ConfigError(ValueError):
    """Invalid scenario configuration; ``problems`` lists ``path: message`` entries."""

    def __init__(self, problems: Sequence[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


# ---- configuration --------------------------------------------------------------

@dataclass(frozen=True)
class TraceSource:
    file: str | None = None
    n_ratio: int = 19
    m_ratio: int = 3
    gops: int = 5
    motion: str = "medium"
    width: int = 352
    height: int = 288
    seed: int | None = None  # defaults to the scenario seed


@dataclass(frozen=True)
class ChannelSource:
    kind: str = "simplified_ge"  # simplified_ge | ge | replay
    target_loss: float | None = 0.2
    mean_burst: float = 2.0
    p_gb: float | None = None
    p_bg: float | None = None
    pg: float | None = None
    pb: float | None = None
    k: float | None = None
    r: float | None = None
    file: str | None = None

    def model(self):
        if self.kind == "simplified_ge":
            if self.p_gb is not None:
                return ch.SimplifiedGeParams(self.p_gb, self.p_bg)
            return ch.SimplifiedGeParams.for_loss(self.target_loss, self.mean_burst)
        if self.kind == "ge":
            return ch.GeParams(self.pg, self.pb, self.k, self.r)
        return None

    def nominal_loss(self) -> float:
        m = self.model()
        if isinstance(m, ch.SimplifiedGeParams):
            return ch.bad_state_occupancy(m)
        if isinstance(m, ch.GeParams):
            return ch.ge_avg_loss(m)
        flags = ch.read_loss_trace(self.file)
        return sum(1 for f in flags if not f) / len(flags)


@dataclass(frozen=True)
class NetworkSource:
    snapshot: str | None = None
    nodes: int = 120
    area_length: float = 1000.0
    area_width: float = 200.0
    distance: float = 100.0
    snr_db: float = 15.0
    hull: str = "quick"
    strips: int = 64
    plr_window: int = 200
    initial_plr: float | None = None  # defaults to the channel's nominal loss


@dataclass(frozen=True)
class FecSettings:
    payload_bytes: int = 1000
    block_size: int = 10
    rounding: str = "ceil"


@dataclass(frozen=True)
class ScenarioConfig:
    mechanism: MechanismKind
    trace: TraceSource = TraceSource()
    channel: ChannelSource = ChannelSource()
    network: NetworkSource = NetworkSource()
    fec: FecSettings = FecSettings()
    seed: int = 1
    repetitions: int = 1
    name: str = "scenario"

    def with_mechanism(self, mech) -> "ScenarioConfig":
        if isinstance(mech, str):
            mech = parse_mechanism(mech)
        return replace(self, mechanism=mech)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)

    def pairing_key(self):
        """Everything except the mechanism; configs compared side by side must agree on it."""
        return (self.trace, self.channel, self.network, self.fec, self.seed, self.repetitions)


_SECTIONS = {"trace": TraceSource, "channel": ChannelSource, "network": NetworkSource, "fec": FecSettings}
_TOP = {"mechanism", "seed", "repetitions", "name", *_SECTIONS}


def _section(cls, data, path, problems):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        problems.append(f"{path}: expected a mapping")
        return cls()
    fields = cls.__dataclass_fields__
    kwargs = {}
    for key, value in data.items():
        if key not in fields:
            problems.append(f"{path}.{key}: unknown key")
            continue
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        problems.append(f"{path}: {exc}")
        return cls()


def _mechanism(data, problems) -> MechanismKind | None:
    try:
        if isinstance(data, str):
            return parse_mechanism(data)
        if isinstance(data, dict):
            d = dict(data)
            kind = d.pop("kind", None)
            if kind is None:
                problems.append("mechanism.kind: missing")
                return None
            base = parse_mechanism(kind)
            vf = d.pop("viewfec", None)
            if vf is not None:
                weights = tuple((IntensityClass.parse(k), float(v)) for k, v in vf.get("weights", {}).items())
                d["viewfec"] = ViewFecParams(tuple(vf.get("gamma", (1.0, 1.0, 0.0))),
                                             weights or ViewFecParams().weights)
            return replace(base, **d)
        problems.append("mechanism: expected a name or a mapping")
    except (ValueError, TypeError) as exc:
        problems.append(f"mechanism: {exc}")
    return None


def config_from_dict(data: dict) -> ScenarioConfig:
    problems: list[str] = []
    if not isinstance(data, dict):
        raise ConfigError(["<root>: expected a mapping"])
    for key in data:
        if key not in _TOP:
            problems.append(f"{key}: unknown key")
    mech = _mechanism(data.get("mechanism"), problems) if "mechanism" in data else None
    if "mechanism" not in data:
        problems.append("mechanism: missing")
    sections = {name: _section(cls, data.get(name), name, problems) for name, cls in _SECTIONS.items()}
    seed = data.get("seed", 1)
    reps = data.get("repetitions", 1)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        problems.append("seed: must be a non-negative integer")
    if not isinstance(reps, int) or isinstance(reps, bool) or reps < 1:
        problems.append("repetitions: must be a positive integer")
    if problems:
        raise ConfigError(problems)
    cfg = ScenarioConfig(mech, seed=seed, repetitions=reps, name=str(data.get("name", "scenario")), **sections)
    validate(cfg)
    return cfg


def validate(cfg: ScenarioConfig) -> None:
    p: list[str] = []
    t, c, n, f = cfg.trace, cfg.channel, cfg.network, cfg.fec
    if t.file is None:
        if t.gops < 1:
            p.append("trace.gops: must be >= 1")
        if not (1 <= t.m_ratio <= t.n_ratio):
            p.append("trace: need 1 <= m_ratio <= n_ratio")
        if str(t.motion).capitalize() not in ("Low", "Medium", "High"):
            p.append("trace.motion: expected low, medium or high")
        if t.width < 8 or t.height < 8:
            p.append("trace: frames must be at least 8x8")
    if c.kind not in ("simplified_ge", "ge", "replay"):
        p.append("channel.kind: expected simplified_ge, ge or replay")
    elif c.kind == "simplified_ge":
        if c.p_gb is None and c.p_bg is None:
            if c.target_loss is None or not 0 < c.target_loss < 1:
                p.append("channel.target_loss: must lie in (0, 1)")
            if c.mean_burst <= 1:
                p.append("channel.mean_burst: must exceed 1")
        elif c.p_gb is None or c.p_bg is None or not (0 < c.p_gb < 1 and 0 < c.p_bg < 1):
            p.append("channel: p_gb and p_bg must both lie in (0, 1)")
    elif c.kind == "ge":
        for name in ("pg", "pb", "k", "r"):
            v = getattr(c, name)
            if v is None or not 0 <= v <= 1:
                p.append(f"channel.{name}: must lie in [0, 1]")
    elif c.file is None:
        p.append("channel.file: replay needs a loss-trace file")
    if n.hull not in ("quick", "bfp"):
        p.append("network.hull: expected quick or bfp")
    if n.plr_window < 1 or n.strips < 1:
        p.append("network: plr_window and strips must be >= 1")
    if n.nodes < 1:
        p.append("network.nodes: must be >= 1")
    if f.payload_bytes < 1 or f.block_size < 1:
        p.append("fec: payload_bytes and block_size must be >= 1")
    if f.block_size * 2 > 255:
        p.append("fec.block_size: at most 127 so parity fits in one code")
    if f.rounding not in ("ceil", "nearest"):
        p.append("fec.rounding: expected ceil or nearest")
    if p:
        raise ConfigError(p)


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError:
        raise
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: not valid YAML ({exc})"]) from None
    cfg = config_from_dict(data)
    base = Path(path).parent
    # relative file references resolve against the config's directory
    fixes = {}
    for section, attr in (("trace", "file"), ("channel", "file"), ("network", "snapshot")):
        obj = getattr(cfg, section)
        ref = getattr(obj, attr)
        if ref is not None and not Path(ref).is_absolute():
            fixes[section] = replace(obj, **{attr: str(base / ref)})
    return replace(cfg, **fixes)


# ---- simulation -----------------------------------------------------------------

@dataclass
class RunResult:
    report: QoeReport
    slot_flags: np.ndarray
    lost_frames: list[int]
    ratios: list[float]
    source_bytes: int
    parity_bytes: int
    protected_bytes: int
    damage: list[bool] = field(repr=False, default_factory=list)


def _stream(seed: int, rep: int, name: str) -> np.random.Generator:
    tag = int.from_bytes(hashlib.sha256(name.encode()).digest()[:4], "big")
    return np.random.default_rng([seed + rep, tag])


def _load_video(cfg: ScenarioConfig, rep: int):
    t = cfg.trace
    seed = (cfg.seed if t.seed is None else t.seed) + rep
    if t.file is not None:
        trace = read_trace(t.file)
        profile = FuzzyMotionClassifier().classify(video_motion_level(trace))
        return trace, synthesize_pixels(trace, profile, seed)
    return synthesize_video(GopLayout(t.n_ratio, t.m_ratio), t.gops, t.motion, seed, t.width, t.height)


def _loss_realization(cfg: ScenarioConfig, rep: int, slots: int) -> np.ndarray:
    c = cfg.channel
    if c.kind == "replay":
        return ch.ReplayChannel(ch.read_loss_trace(c.file)).simulate(slots)
    chan = ch.GilbertElliottChannel(c.model(), _stream(cfg.seed, rep, "channel"))
    delivered, _ = chan.simulate(slots)
    return delivered


def _snapshot(cfg: ScenarioConfig, rep: int) -> NetworkSnapshot:
    n = cfg.network
    if n.snapshot is not None:
        return read_snapshot(n.snapshot)
    return synthesize_snapshot(n.nodes, _stream(cfg.seed, rep, "network"), n.area_length, n.area_width, n.snr_db)


def _payload(rng: np.random.Generator, size: int, payload_bytes: int) -> list[bytes]:
    data = rng.bytes(size)
    return [data[i:i + payload_bytes] for i in range(0, size, payload_bytes)]


def simulate(cfg: ScenarioConfig, rep: int = 0, engines: Engines | None = None, video=None) -> RunResult:
    """One repetition of a scenario."""
    trace, pixels = video if video is not None else _load_video(cfg, rep)
    f = cfg.fec
    payload = f.payload_bytes

    packets = [packetize(fr, payload) for fr in trace.frames]
    block_ks = [[min(f.block_size, n - s) for s in range(0, n, f.block_size)] for n in packets]
    slots = sum(2 * k for ks in block_ks for k in ks)
    flags = _loss_realization(cfg, rep, slots)

    sizes = normalize_frame_sizes(trace)
    ti = video_temporal_intensity(trace)
    motion = video_motion_level(trace)
    intensity = FuzzyMotionClassifier().classify(motion)
    snap = _snapshot(cfg, rep)
    dens = snapshot_density(snap, cfg.network.hull, cfg.network.strips, fallback=None)
    snr = snap.snr_db if snap.snr_db is not None else cfg.network.snr_db

    mech = cfg.mechanism
    if engines is None and mech.kind not in (Kind.NoFec, Kind.VaEEP, Kind.VaUEP, Kind.ViewFec):
        engines = Engines.default()
    decision_rng = _stream(cfg.seed, rep, "decisions")
    payload_rng = _stream(cfg.seed, rep, "payload")
    predictor = ch.ErrorPredictor(f.block_size, cfg.network.plr_window)
    initial_plr = cfg.network.initial_plr
    if initial_plr is None:
        initial_plr = cfg.channel.nominal_loss()

    slot = 0
    lost_frames, ratios = [], []
    source_bytes = parity_bytes = protected_bytes = 0
    packets_sent = packets_lost = 0
    for fr, ks in zip(trace.frames, block_ks):
        if predictor.flags:
            plr = windowed_plr(predictor.flags, cfg.network.plr_window).value
        else:
            plr = initial_plr
        ctx = MechanismContext(
            frame=fr, gop=trace.gop, intensity=intensity, sizes=sizes, temporal_intensity=ti,
            motion_level=motion, plr_pct=100.0 * plr, density=dens, distance=cfg.network.distance,
            snr_db=snr, error_class=predictor.predict(),
        )
        decision = decide(mech, ctx, engines, decision_rng)
        ratios.append(decision.ratio)
        blocks = build_ffblocks(sum(ks), f.block_size, decision.ratio, f.rounding)
        shards = _payload(payload_rng, fr.size_bytes, payload)
        source_bytes += fr.size_bytes
        if fr.kind is not FrameType.B:
            protected_bytes += fr.size_bytes
        frame_ok = True
        pos = 0
        for params in blocks:
            src = shards[pos:pos + params.k]
            pos += params.k
            padded = [s.ljust(payload, b"\0") for s in src]
            encoded = rs_encode(padded, params.h)
            parity_bytes += params.h * payload
            seen = flags[slot:slot + params.n]
            observed = [bool(x) for x in seen]
            slot += 2 * params.k
            packets_sent += params.n
            packets_lost += observed.count(False)
            predictor.observe(observed)
            block = FecBlock(params, tuple(s if ok else None for s, ok in zip(encoded, observed)), fr.index)
            if all(observed[:params.k]):
                continue
            try:
                recovered = rs_decode(block)
            except Unrecoverable:
                frame_ok = False
                continue
            if recovered != padded:
                raise AssertionError(f"frame {fr.index}: decoded payload differs from the source")
        if not frame_ok:
            lost_frames.append(fr.index)

    damage = damage_map(lost_frames, trace.gop, len(trace))
    shown = frame_copy_conceal(pixels, damage)
    mean_mse, mean_psnr, mean_ssim = quality_summary(pixels, shown)
    overhead = overhead_pct(protected_bytes + parity_bytes, protected_bytes) if protected_bytes else 0.0
    report = QoeReport(
        mechanism=mech.label, seed=cfg.seed + rep, plr_setting=round(cfg.channel.nominal_loss(), 6),
        decodable_ratio=decodable_frame_ratio(damage), mean_mse=mean_mse, mean_psnr_db=mean_psnr,
        mean_ssim=mean_ssim, overhead_pct=overhead, frames=len(trace), frames_lost=len(lost_frames),
        packets_sent=packets_sent, packets_lost=packets_lost,
    )
    log.info("%s rep %d: decodable %.3f overhead %.3f", mech.label, rep, report.decodable_ratio, overhead)
    return RunResult(report, flags, lost_frames, ratios, source_bytes, parity_bytes, protected_bytes, damage)


def run_scenario(cfg: ScenarioConfig, engines: Engines | None = None) -> list[QoeReport]:
    """One report per repetition, in repetition order (seed of rep i is seed + i)."""
    return [simulate(cfg, rep, engines).report for rep in range(cfg.repetitions)]


def compare_mechanisms(configs: Sequence[ScenarioConfig], engines: Engines | None = None) -> list[QoeReport]:
    """Paired comparison: every config must share trace, channel, network, FEC and seed."""
    if not configs:
        raise ConfigError(["compare: no configurations given"])
    key = configs[0].pairing_key()
    bad = [i for i, c in enumerate(configs) if c.pairing_key() != key]
    if bad:
        raise ConfigError([f"configs[{i}]: differs from configs[0] in more than the mechanism" for i in bad])
    needs_engines = any(c.mechanism.kind not in (Kind.NoFec, Kind.VaEEP, Kind.VaUEP, Kind.ViewFec)
                        for c in configs)
    if engines is None and needs_engines:
        engines = Engines.default()
    rows = []
    for rep in range(configs[0].repetitions):
        video = _load_video(configs[0], rep)
        reference = None
        for cfg in configs:
            res = simulate(cfg, rep, engines, video)
            if reference is None:
                reference = res.slot_flags
            elif not np.array_equal(reference, res.slot_flags):
                raise AssertionError("loss realizations differ between paired rows")
            rows.append(res.report)
    return rows


def write_outputs(reports: Sequence[QoeReport], out_dir, stem: str = "report") -> tuple[Path, Path]:
    """CSV report plus a whitespace-separated data file for plotting tools."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    csv_path.write_text(reports_to_csv(reports), newline="")
    dat_path = out / f"{stem}.dat"
    lines = ["# mechanism seed plr_setting decodable_ratio mean_psnr_db mean_ssim overhead_pct"]
    for r in reports:
        psnr = "inf" if math.isinf(r.mean_psnr_db) else f"{r.mean_psnr_db:.6f}"
        lines.append(f'"{r.mechanism}" {r.seed} {r.plr_setting:.6f} {r.decodable_ratio:.6f} {psnr} '
                     f"{r.mean_ssim:.6f} {r.overhead_pct:.6f}")
    dat_path.write_text("\n".join(lines) + "\n")
    return csv_path, dat_path


def default_config(mechanism: str = "NoFec", **overrides: Any) -> ScenarioConfig:
    cfg = ScenarioConfig(parse_mechanism(mechanism))
    return replace(cfg, **overrides)
