"""Mamdani fuzzy inference, hierarchical composition and the built-in rule bases.

Operators: min for AND, max for OR and for rule aggregation, consequents
clipped at the rule strength, centroid defuzzification on a uniform
1000-point grid over the output universe.  When no rule fires the engine
returns the universe midpoint and reports ``no_activation``.

Two-parameter triangles ``Triangular(a, b)`` peak at ``(a + b) / 2``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Mapping

import numpy as np

RESOLUTION = 1000

TRIANGULAR = "triangular"
SHOULDER_LEFT = "shoulder_left"
SHOULDER_RIGHT = "shoulder_right"
_SHAPES = (TRIANGULAR, SHOULDER_LEFT, SHOULDER_RIGHT)


class FuzzyError(ValueError):
    pass


@dataclass(frozen=True)
class FuzzyTerm:
    label: str
    shape: str
    a: float
    b: float

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise FuzzyError(f"unknown term shape {self.shape!r}")
        if not self.a < self.b:
            raise FuzzyError(f"term {self.label}: need a < b, got {self.a}, {self.b}")

    def membership(self, x):
        """Degree of membership; accepts scalars or arrays."""
        a, b = self.a, self.b
        xs = np.asarray(x, dtype=float)
        if self.shape == TRIANGULAR:
            m = (a + b) / 2.0
            up = (xs - a) / (m - a)
            down = (b - xs) / (b - m)
            out = np.where(xs <= m, up, down)
            out = np.where((xs <= a) | (xs >= b), 0.0, out)
        elif self.shape == SHOULDER_LEFT:
            out = np.clip((b - xs) / (b - a), 0.0, 1.0)
        else:
            out = np.clip((xs - a) / (b - a), 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    @property
    def core(self) -> float:
        """Representative point where the membership is 1."""
        if self.shape == TRIANGULAR:
            return (self.a + self.b) / 2.0
        return self.a if self.shape == SHOULDER_LEFT else self.b

    def __str__(self):
        return f"{self.label} {self.shape} {self.a!r} {self.b!r}"


def Triangular(label: str, a: float, b: float) -> FuzzyTerm:
    return FuzzyTerm(label, TRIANGULAR, a, b)


def ShoulderLeft(label: str, a: float, b: float) -> FuzzyTerm:
    return FuzzyTerm(label, SHOULDER_LEFT, a, b)


def ShoulderRight(label: str, a: float, b: float) -> FuzzyTerm:
    return FuzzyTerm(label, SHOULDER_RIGHT, a, b)


def membership(term: FuzzyTerm, x):
    return term.membership(x)


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    lo: float
    hi: float
    terms: tuple[FuzzyTerm, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.lo < self.hi:
            raise FuzzyError(f"variable {self.name}: empty universe")
        if not self.terms:
            raise FuzzyError(f"variable {self.name}: needs at least one term")
        labels = [t.label for t in self.terms]
        if len(set(labels)) != len(labels):
            raise FuzzyError(f"variable {self.name}: duplicate term labels")
        for t in self.terms:
            if t.a < self.lo - 1e-12 or t.b > self.hi + 1e-12:
                raise FuzzyError(f"variable {self.name}: term {t.label} leaves the universe")

    def term(self, label: str) -> FuzzyTerm:
        for t in self.terms:
            if t.label == label:
                return t
        raise FuzzyError(f"variable {self.name} has no term {label!r}")

    def index(self, label: str) -> int:
        return [t.label for t in self.terms].index(label)

    def best_term(self, x: float) -> int:
        """Index of the term with the highest membership (first on ties)."""
        return int(np.argmax([t.membership(x) for t in self.terms]))

    def grid(self, n: int = RESOLUTION) -> np.ndarray:
        return np.linspace(self.lo, self.hi, n)


# ---- rules -----------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    variable: str
    term: str

    def strength(self, degrees):
        return degrees[self.variable][self.term]

    def atoms(self):
        yield self

    def __str__(self):
        return f"{self.variable} is {self.term}"


@dataclass(frozen=True)
class And:
    parts: tuple

    def strength(self, degrees):
        return min(p.strength(degrees) for p in self.parts)

    def atoms(self):
        for p in self.parts:
            yield from p.atoms()

    def __str__(self):
        return " and ".join(_wrap(p) for p in self.parts)


@dataclass(frozen=True)
class Or:
    parts: tuple

    def strength(self, degrees):
        return max(p.strength(degrees) for p in self.parts)

    def atoms(self):
        for p in self.parts:
            yield from p.atoms()

    def __str__(self):
        return " or ".join(str(p) for p in self.parts)


def _wrap(node):
    # only an Or nested inside an And needs parentheses
    return f"({node})" if isinstance(node, Or) else str(node)


@dataclass(frozen=True)
class MamdaniRule:
    antecedent: object
    consequent: tuple[str, str]

    def __str__(self):
        return f"if {self.antecedent} then {self.consequent[0]} is {self.consequent[1]}"


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_rule(text: str) -> MamdaniRule:
    """Parse ``if <expr> then <Var> is <Term>``; ``and`` binds tighter than ``or``."""
    toks = _TOKEN.findall(text)
    if not toks or toks[0].lower() != "if":
        raise FuzzyError(f"rule must start with 'if': {text!r}")
    try:
        then = [t.lower() for t in toks].index("then")
    except ValueError:
        raise FuzzyError(f"rule has no 'then': {text!r}") from None
    cons = toks[then + 1:]
    if len(cons) != 3 or cons[1].lower() != "is":
        raise FuzzyError(f"bad consequent in {text!r}")
    body = toks[1:then]
    expr, pos = _parse_or(body, 0)
    if pos != len(body):
        raise FuzzyError(f"trailing tokens in antecedent of {text!r}")
    return MamdaniRule(expr, (cons[0], cons[2]))


def _parse_or(toks, i):
    left, i = _parse_and(toks, i)
    parts = [left]
    while i < len(toks) and toks[i].lower() == "or":
        nxt, i = _parse_and(toks, i + 1)
        parts.append(nxt)
    return (parts[0] if len(parts) == 1 else Or(tuple(parts))), i


def _parse_and(toks, i):
    left, i = _parse_atom(toks, i)
    parts = [left]
    while i < len(toks) and toks[i].lower() == "and":
        nxt, i = _parse_atom(toks, i + 1)
        parts.append(nxt)
    return (parts[0] if len(parts) == 1 else And(tuple(parts))), i


def _parse_atom(toks, i):
    if i >= len(toks):
        raise FuzzyError("unexpected end of rule")
    if toks[i] == "(":
        expr, i = _parse_or(toks, i + 1)
        if i >= len(toks) or toks[i] != ")":
            raise FuzzyError("unbalanced parentheses")
        return expr, i + 1
    if i + 2 >= len(toks) or toks[i + 1].lower() != "is":
        raise FuzzyError(f"expected '<Var> is <Term>' near {' '.join(toks[i:i + 3])!r}")
    return Atom(toks[i], toks[i + 2]), i + 3


# ---- engine ----------------------------------------------------------------

@dataclass(frozen=True)
class Inference:
    value: float
    no_activation: bool
    strengths: tuple[float, ...]


@dataclass(frozen=True)
class FuzzyEngine:
    name: str
    inputs: tuple[LinguisticVariable, ...]
    output: LinguisticVariable
    rules: tuple[MamdaniRule, ...]
    resolution: int = RESOLUTION
    _grid: np.ndarray = field(init=False, repr=False, compare=False)
    _consequent_mf: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "rules", tuple(self.rules))
        names = [v.name for v in self.inputs]
        if len(set(names)) != len(names) or self.output.name in names:
            raise FuzzyError(f"engine {self.name}: duplicate variable names")
        by_name = {v.name: v for v in self.inputs}
        for rule in self.rules:
            for atom in rule.antecedent.atoms():
                if atom.variable not in by_name:
                    raise FuzzyError(f"rule '{rule}': unknown input variable {atom.variable}")
                by_name[atom.variable].term(atom.term)
            var, label = rule.consequent
            if var != self.output.name:
                raise FuzzyError(f"rule '{rule}': consequent must target {self.output.name}")
            self.output.term(label)
        grid = self.output.grid(self.resolution)
        object.__setattr__(self, "_grid", grid)
        object.__setattr__(
            self, "_consequent_mf",
            tuple(self.output.term(r.consequent[1]).membership(grid) for r in self.rules),
        )

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.inputs)

    def variable(self, name: str) -> LinguisticVariable:
        for v in self.inputs + (self.output,):
            if v.name == name:
                return v
        raise FuzzyError(f"engine {self.name} has no variable {name!r}")

    def evaluate(self, inputs: Mapping[str, float]) -> Inference:
        unknown = set(inputs) - set(self.input_names)
        if unknown:
            raise FuzzyError(f"engine {self.name}: unknown variables {sorted(unknown)}")
        missing = [n for n in self.input_names if n not in inputs]
        if missing:
            raise FuzzyError(f"engine {self.name}: missing inputs {missing}")
        degrees = {}
        for v in self.inputs:
            x = float(inputs[v.name])
            if not np.isfinite(x):
                raise FuzzyError(f"input {v.name} is not finite")
            degrees[v.name] = {t.label: t.membership(x) for t in v.terms}
        strengths = tuple(float(r.antecedent.strength(degrees)) for r in self.rules)
        agg = np.zeros_like(self._grid)
        for s, mf in zip(strengths, self._consequent_mf):
            if s > 0.0:
                np.maximum(agg, np.minimum(s, mf), out=agg)
        area = agg.sum()
        if area <= 0.0:
            return Inference((self.output.lo + self.output.hi) / 2.0, True, strengths)
        return Inference(float((self._grid * agg).sum() / area), False, strengths)

    def infer(self, inputs: Mapping[str, float]) -> float:
        return self.evaluate(inputs).value


def infer(engine: FuzzyEngine, inputs: Mapping[str, float]) -> float:
    return engine.infer(inputs)


# ---- hierarchical composition ----------------------------------------------

@dataclass(frozen=True)
class HfsLayer:
    """One engine in a hierarchy.

    ``wiring`` maps each engine input to its source: ``"@name"`` is the
    crisp output of layer ``name``, anything else is an external input key.
    """

    name: str
    engine: FuzzyEngine
    wiring: Mapping[str, str]


@dataclass(frozen=True)
class HfsGraph:
    layers: tuple[HfsLayer, ...]
    output: str

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        names = [l.name for l in self.layers]
        if len(set(names)) != len(names):
            raise FuzzyError("duplicate layer names")
        if self.output not in names:
            raise FuzzyError(f"output layer {self.output!r} not in graph")
        for layer in self.layers:
            if set(layer.wiring) != set(layer.engine.input_names):
                raise FuzzyError(f"layer {layer.name}: wiring must cover exactly the engine inputs")
            for src in layer.wiring.values():
                if src.startswith("@") and src[1:] not in names:
                    raise FuzzyError(f"layer {layer.name}: unknown source layer {src}")
        self.order()  # raises on cycles

    def layer(self, name: str) -> HfsLayer:
        for l in self.layers:
            if l.name == name:
                return l
        raise FuzzyError(f"no layer {name!r}")

    def order(self) -> list[str]:
        ts = TopologicalSorter()
        for l in self.layers:
            ts.add(l.name, *[s[1:] for s in l.wiring.values() if s.startswith("@")])
        try:
            return list(ts.static_order())
        except CycleError as exc:
            raise FuzzyError(f"hierarchy has a cycle: {exc.args[1]}") from None

    def external_inputs(self, pinned=()) -> set[str]:
        need = set()
        for name in self._needed(set(pinned)):
            need.update(s for s in self.layer(name).wiring.values() if not s.startswith("@"))
        return need

    def _needed(self, pinned: set[str]) -> list[str]:
        needed, stack = set(), [self.output]
        while stack:
            name = stack.pop()
            if name in needed or name in pinned:
                continue
            needed.add(name)
            stack.extend(s[1:] for s in self.layer(name).wiring.values() if s.startswith("@"))
        return [n for n in self.order() if n in needed]


def hfs_evaluate(graph: HfsGraph, external: Mapping[str, float],
                 pinned: Mapping[str, float] | None = None) -> dict[str, float]:
    """Crisp output of every evaluated layer; ``pinned`` layers are held at the given values."""
    values = dict(pinned or {})
    for name in graph._needed(set(values)):
        layer = graph.layer(name)
        args = {}
        for var, src in layer.wiring.items():
            if src.startswith("@"):
                args[var] = values[src[1:]]
            elif src in external:
                args[var] = external[src]
            else:
                raise FuzzyError(f"layer {name}: external input {src!r} not provided")
        values[name] = layer.engine.infer(args)
    return values


def hfs_infer(graph: HfsGraph, external: Mapping[str, float],
              pinned: Mapping[str, float] | None = None) -> float:
    return hfs_evaluate(graph, external, pinned)[graph.output]


# ---- declarative definitions -------------------------------------------------

_SECTION = re.compile(r"^\[(input|output)\s+(\S+)\s+(\S+)\s+(\S+)\s*\]$")


def loads_engine(text: str, name: str = "engine") -> FuzzyEngine:
    """Parse the block format documented in ``docs/fuzzy-format.md``."""
    inputs, output, rules = [], None, []
    section, current, terms = None, None, []

    def close():
        nonlocal output
        if section in ("input", "output"):
            var = LinguisticVariable(current[0], current[1], current[2], tuple(terms))
            if section == "input":
                inputs.append(var)
            else:
                if output is not None:
                    raise FuzzyError("only one [output] section is allowed")
                output = var

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("["):
                close()
                terms = []
                if line.lower() == "[rules]":
                    section = "rules"
                    continue
                m = re.match(r"^\[engine\s+(\S+)\s*\]$", line)
                if m:
                    name, section = m.group(1), None
                    continue
                m = _SECTION.match(line)
                if not m:
                    raise FuzzyError(f"bad section header {line!r}")
                section = m.group(1)
                current = (m.group(2), float(m.group(3)), float(m.group(4)))
            elif section in ("input", "output"):
                parts = line.split()
                if len(parts) != 4:
                    raise FuzzyError("term lines are '<LABEL> <shape> <a> <b>'")
                terms.append(FuzzyTerm(parts[0], parts[1], float(parts[2]), float(parts[3])))
            elif section == "rules":
                rules.append(parse_rule(line))
            else:
                raise FuzzyError(f"content outside a section: {line!r}")
        except FuzzyError as exc:
            raise FuzzyError(f"line {lineno}: {exc}") from None
    close()
    if output is None:
        raise FuzzyError("definition has no [output] section")
    return FuzzyEngine(name, tuple(inputs), output, tuple(rules))


def dumps_engine(engine: FuzzyEngine) -> str:
    out = [f"[engine {engine.name}]"]
    for kind, var in [("input", v) for v in engine.inputs] + [("output", engine.output)]:
        out.append("")
        out.append(f"[{kind} {var.name} {var.lo!r} {var.hi!r}]")
        out.extend(str(t) for t in var.terms)
    out.append("")
    out.append("[rules]")
    out.extend(str(r) for r in engine.rules)
    return "\n".join(out) + "\n"


def load_engine(path) -> FuzzyEngine:
    from pathlib import Path

    p = Path(path)
    return loads_engine(p.read_text(), name=p.stem)


# ---- built-in variables and rule bases ----------------------------------------

SEVERITY3 = ("LOW", "MEDIUM", "HIGH")
REDUNDANCY_TERMS = ("SMALL", "MEDIUM", "LARGE")

_UAVFEC = """
[engine uavFEC]

[input Motion 0 130000]
LOW shoulder_left 10000 30000
MEDIUM triangular 21000 80000
HIGH shoulder_right 60000 130000

[input PacketLossRate 0 100]
LOW triangular 0 15
MEDIUM triangular 5 30
HIGH triangular 20 100

[output RedundancyAmount 0.55 1.0]
SMALL shoulder_left 0.55 0.70
MEDIUM triangular 0.60 0.80
LARGE triangular 0.75 1.0

[rules]
if Motion is LOW and PacketLossRate is LOW then RedundancyAmount is SMALL
if Motion is LOW and PacketLossRate is MEDIUM then RedundancyAmount is MEDIUM
if Motion is LOW and PacketLossRate is HIGH then RedundancyAmount is MEDIUM
if Motion is MEDIUM and PacketLossRate is LOW then RedundancyAmount is MEDIUM
if Motion is MEDIUM and PacketLossRate is MEDIUM then RedundancyAmount is MEDIUM
if Motion is MEDIUM and PacketLossRate is HIGH then RedundancyAmount is LARGE
if Motion is HIGH and PacketLossRate is LOW then RedundancyAmount is MEDIUM
if Motion is HIGH and PacketLossRate is MEDIUM then RedundancyAmount is LARGE
if Motion is HIGH and PacketLossRate is HIGH then RedundancyAmount is LARGE
"""


def _plr(lo_b, mid_a, mid_b, hi_a):
    return LinguisticVariable(
        "PacketLossRate", 0.0, 100.0,
        (Triangular("LOW", 0, lo_b), Triangular("MEDIUM", mid_a, mid_b), Triangular("HIGH", hi_a, 100)),
    )


def uavfec_plr_variable() -> LinguisticVariable:
    return _plr(15, 5, 30, 20)


def mint_plr_variable() -> LinguisticVariable:
    return _plr(10, 5, 20, 15)


def corvette_plr_variable() -> LinguisticVariable:
    return _plr(11, 5, 22, 17)


def shield_plr_variable() -> LinguisticVariable:
    return _plr(12, 5, 23, 19)


def uavfec_motion_variable() -> LinguisticVariable:
    return LinguisticVariable(
        "Motion", 0.0, 130000.0,
        (ShoulderLeft("LOW", 10000, 30000), Triangular("MEDIUM", 21000, 80000),
         ShoulderRight("HIGH", 60000, 130000)),
    )


def redundancy_variable() -> LinguisticVariable:
    return LinguisticVariable(
        "RedundancyAmount", 0.55, 1.0,
        (ShoulderLeft("SMALL", 0.55, 0.70), Triangular("MEDIUM", 0.60, 0.80), Triangular("LARGE", 0.75, 1.0)),
    )


def frame_size_variable(kind: str) -> LinguisticVariable:
    """Normalised frame-size sets for ``kind`` in {"I", "P", "B"}."""
    bounds = {
        "I": ((0.274, 0.459), (0.274, 0.651), (0.502, 0.757)),
        "P": ((0.162, 0.219), (0.162, 0.325), (0.288, 0.333)),
        "B": ((0.081, 0.13), (0.081, 0.219), (0.205, 0.252)),
    }[kind]
    s, m, l = bounds
    return LinguisticVariable(
        f"{kind}Size", 0.0, 1.0,
        (ShoulderLeft("SMALL", *s), Triangular("MEDIUM", *m), ShoulderRight("LARGE", *l)),
    )


# Reconstructed: temporal-intensity sets are the uavFEC motion bounds
# converted to per-macroblock area x length units for a CIF frame of
# 16x16 macroblocks (396 macroblocks of 256 px^2).
TI_SCALE = 256.0 / 396.0


def temporal_intensity_variable() -> LinguisticVariable:
    k = TI_SCALE
    return LinguisticVariable(
        "TemporalIntensity", 0.0, 130000.0 * k,
        (ShoulderLeft("LOW", 10000 * k, 30000 * k), Triangular("MEDIUM", 21000 * k, 80000 * k),
         ShoulderRight("HIGH", 60000 * k, 130000 * k)),
    )


def frame_type_variable() -> LinguisticVariable:
    """Crisp frame type: 0 for I, 1 for P."""
    return LinguisticVariable("FrameType", 0.0, 1.0, (ShoulderLeft("I", 0, 1), ShoulderRight("P", 0, 1)))


# Reconstructed VANET sets (not published).
def density_variable() -> LinguisticVariable:
    return LinguisticVariable(
        "Density", 0.0, 0.002,
        (ShoulderLeft("LOW", 2e-4, 6e-4), Triangular("MEDIUM", 2e-4, 1.4e-3), ShoulderRight("HIGH", 1e-3, 1.6e-3)),
    )


def distance_variable() -> LinguisticVariable:
    return LinguisticVariable(
        "Distance", 0.0, 300.0,
        (ShoulderLeft("NEAR", 50, 150), Triangular("MEDIUM", 50, 250), ShoulderRight("FAR", 150, 250)),
    )


def snr_variable() -> LinguisticVariable:
    return LinguisticVariable(
        "SNR", -5.0, 25.0,
        (ShoulderLeft("POOR", -5, 10), Triangular("FAIR", -5, 25), ShoulderRight("GOOD", 10, 25)),
    )


# Intermediate grades in [0, 1] chaining hierarchy layers.  Output terms put
# the pure-class centroids at 1/6, 1/2, 5/6; the matching input terms have
# their cores exactly there so a pure class propagates unchanged.
GRADE_CORES = (1.0 / 6.0, 0.5, 5.0 / 6.0)


def grade_output(name: str) -> LinguisticVariable:
    return LinguisticVariable(
        name, 0.0, 1.0, (ShoulderLeft("LOW", 0, 0.5), Triangular("MEDIUM", 0, 1), ShoulderRight("HIGH", 0.5, 1)),
    )


def grade_input(name: str) -> LinguisticVariable:
    lo, mid, hi = GRADE_CORES
    return LinguisticVariable(
        name, 0.0, 1.0, (ShoulderLeft("LOW", lo, mid), Triangular("MEDIUM", lo, hi), ShoulderRight("HIGH", mid, hi)),
    )


def spatial_grade(kind: str, fraction: float) -> float:
    """Collapse a normalised frame size onto the grade scale via its type's sets."""
    var = frame_size_variable(kind)
    mu = np.array([t.membership(fraction) for t in var.terms])
    if mu.sum() == 0:
        return GRADE_CORES[1]
    return float((mu * np.array(GRADE_CORES)).sum() / mu.sum())


def severity(indices, n_out: int = 3) -> int:
    """Round-half-up mean of term indices, clipped to the output range."""
    mean = sum(indices) / len(indices)
    return min(n_out - 1, int(np.floor(mean + 0.5)))


def cartesian_rules(inputs, output: LinguisticVariable, reverse=(), offset=None, extra=None):
    """Complete rule table: each antecedent combination maps to its severity.

    ``reverse`` names inputs whose term order runs from most to least severe.
    ``offset(combo)`` may add severity steps; ``extra`` is a list of
    (variable, label) atoms ANDed onto every rule.
    """
    rules = []
    for combo in itertools.product(*[range(len(v.terms)) for v in inputs]):
        idx = [len(v.terms) - 1 - c if v.name in reverse else c for v, c in zip(inputs, combo)]
        sev = severity(idx, len(output.terms))
        if offset is not None:
            sev = min(len(output.terms) - 1, sev + offset(combo))
        atoms = [Atom(v.name, v.terms[c].label) for v, c in zip(inputs, combo)]
        if extra:
            atoms.extend(Atom(*e) for e in extra)
        rules.append(MamdaniRule(And(tuple(atoms)), (output.name, output.terms[sev].label)))
    return rules


def _uavfec() -> FuzzyEngine:
    return loads_engine(_UAVFEC, name="uavFEC")


def _mintfec() -> FuzzyEngine:
    ft = frame_type_variable()
    isz, psz, bsz = (frame_size_variable(k) for k in "IPB")
    ti = temporal_intensity_variable()
    plr = mint_plr_variable()
    out = redundancy_variable()
    rules = cartesian_rules([isz, ti, plr], out, offset=lambda c: 1, extra=[("FrameType", "I")])
    rules += cartesian_rules([psz, ti, plr], out, extra=[("FrameType", "P")])
    return FuzzyEngine("MINT-FEC", (ft, isz, psz, bsz, ti, plr), out, tuple(rules))


def _two_input(name, a, b, out, reverse=()):
    return FuzzyEngine(name, (a, b), out, tuple(cartesian_rules([a, b], out, reverse=reverse)))


def _video_layers():
    motion = _two_input(
        "motion_activity", temporal_intensity_variable(), grade_input("SpatialComplexity"),
        grade_output("MotionActivity"),
    )
    ft = frame_type_variable()
    ma = grade_input("MotionActivity")
    vout = grade_output("VideoDetails")
    # I-frames sit one severity step above P-frames.
    video = FuzzyEngine(
        "video", (ma, ft), vout,
        tuple(cartesian_rules([ma], vout, offset=lambda c: 1, extra=[("FrameType", "I")])
              + cartesian_rules([ma], vout, extra=[("FrameType", "P")])),
    )
    return [
        HfsLayer("motion_activity", motion,
                 {"TemporalIntensity": "temporal_intensity", "SpatialComplexity": "spatial_grade"}),
        HfsLayer("video", video, {"MotionActivity": "@motion_activity", "FrameType": "frame_type"}),
    ]


def _top_layer():
    top = _two_input("redundancy", grade_input("Network"), grade_input("Video"), redundancy_variable())
    return HfsLayer("redundancy", top, {"Network": "@network", "Video": "@video"})


def _corvette() -> HfsGraph:
    status = _two_input("network_status", corvette_plr_variable(), density_variable(), grade_output("NetworkStatus"))
    network = _two_input("network", grade_input("NetworkStatus"), distance_variable(), grade_output("Network"))
    layers = [
        HfsLayer("network_status", status, {"PacketLossRate": "plr", "Density": "density"}),
        HfsLayer("network", network, {"NetworkStatus": "@network_status", "Distance": "distance"}),
        *_video_layers(),
        _top_layer(),
    ]
    return HfsGraph(tuple(layers), "redundancy")


def _shield() -> HfsGraph:
    status = _two_input("network_status", snr_variable(), shield_plr_variable(), grade_output("NetworkStatus"),
                        reverse=("SNR",))
    surround = _two_input("surroundings", density_variable(), distance_variable(), grade_output("Surroundings"))
    network = _two_input("network", grade_input("NetworkStatus"), grade_input("Surroundings"),
                         grade_output("Network"))
    layers = [
        HfsLayer("network_status", status, {"SNR": "snr", "PacketLossRate": "plr"}),
        HfsLayer("surroundings", surround, {"Density": "density", "Distance": "distance"}),
        HfsLayer("network", network, {"NetworkStatus": "@network_status", "Surroundings": "@surroundings"}),
        *_video_layers(),
        _top_layer(),
    ]
    return HfsGraph(tuple(layers), "redundancy")


# Layers a relay re-evaluates per hop; the rest is computed once at the server.
NETWORK_LAYERS = {
    "Corvette": ("network_status", "network", "redundancy"),
    "Shield": ("network_status", "surroundings", "network", "redundancy"),
}

_BUILDERS = {"UavFec": _uavfec, "MintFec": _mintfec, "Corvette": _corvette, "Shield": _shield}
_CACHE: dict[str, object] = {}


def builtin_engine(kind: str):
    """Engine (or hierarchy) preloaded with the published sets.

    ``kind`` is one of "UavFec", "MintFec", "Corvette", "Shield".  Instances
    are immutable and cached.
    """
    if kind not in _BUILDERS:
        raise FuzzyError(f"unknown built-in engine {kind!r}")
    if kind not in _CACHE:
        _CACHE[kind] = _BUILDERS[kind]()
    return _CACHE[kind]
