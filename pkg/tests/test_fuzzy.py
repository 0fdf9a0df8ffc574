import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fecsim import fuzzy as fz
from fecsim.fuzzy import (And, Atom, FuzzyEngine, FuzzyError, HfsGraph, HfsLayer, LinguisticVariable, MamdaniRule,
                          Or, ShoulderLeft, ShoulderRight, Triangular, builtin_engine, dumps_engine, hfs_evaluate,
                          hfs_infer, load_engine, loads_engine, parse_rule)


def test_membership_examples():
    assert ShoulderLeft("LOW", 10000, 30000).membership(5000) == 1.0
    assert Triangular("LOW", 0, 15).membership(7.5) == 1.0
    assert ShoulderLeft("LOW", 10000, 30000).membership(20000) == 0.5


def test_membership_shapes():
    t = Triangular("T", 2, 6)
    assert [t.membership(x) for x in (1, 2, 3, 4, 5, 6, 7)] == [0, 0, 0.5, 1, 0.5, 0, 0]
    r = ShoulderRight("R", 2, 6)
    assert [r.membership(x) for x in (0, 2, 4, 6, 9)] == [0, 0, 0.5, 1, 1]
    assert np.allclose(t.membership(np.array([3.0, 4.0])), [0.5, 1.0])


def test_term_validation():
    with pytest.raises(FuzzyError):
        Triangular("X", 3, 3)
    with pytest.raises(FuzzyError):
        fz.FuzzyTerm("X", "gaussian", 0, 1)
    with pytest.raises(FuzzyError):
        LinguisticVariable("V", 0, 1, (Triangular("A", 0, 2),))
    with pytest.raises(FuzzyError):
        LinguisticVariable("V", 0, 1, (Triangular("A", 0, 1), Triangular("A", 0, 0.5)))


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.floats(0.1, 1e5), st.sampled_from(fz._SHAPES))
def test_membership_bounded(x, a, width, shape):
    t = fz.FuzzyTerm("T", shape, a, a + width)
    assert 0.0 <= t.membership(x) <= 1.0


def test_rule_parse_and_print():
    r = parse_rule("if A is x and (B is y or C is z) then O is w")
    assert r.antecedent == And((Atom("A", "x"), Or((Atom("B", "y"), Atom("C", "z")))))
    assert parse_rule(str(r)) == r
    r2 = parse_rule("if A is x and B is y or C is z then O is w")
    assert isinstance(r2.antecedent, Or)
    for bad in ["A is x then O is w", "if A is x", "if A is x then O w", "if (A is x then O is w",
                "if A is x B then O is w"]:
        with pytest.raises(FuzzyError):
            parse_rule(bad)


def _engine(rules):
    a = LinguisticVariable("A", 0, 10, (ShoulderLeft("LOW", 2, 5), ShoulderRight("HIGH", 5, 8)))
    b = LinguisticVariable("B", 0, 10, (ShoulderLeft("LOW", 2, 5), ShoulderRight("HIGH", 5, 8)))
    return FuzzyEngine("t", (a, b), fz.redundancy_variable(), tuple(parse_rule(r) for r in rules))


def test_single_rule_centroid():
    e = _engine(["if A is LOW and B is LOW then RedundancyAmount is SMALL"])
    res = e.evaluate({"A": 1, "B": 0})
    assert not res.no_activation
    # centroid of a unit ramp over [a, b] is a + (b - a) / 3
    assert res.value == pytest.approx(0.60, abs=1e-3)


def test_high_rule_lands_in_large():
    e = _engine(["if A is HIGH and B is HIGH then RedundancyAmount is LARGE"])
    assert 0.75 <= e.infer({"A": 9, "B": 10}) <= 1.0


def test_no_activation_midpoint():
    a = LinguisticVariable("A", 0, 10, (Triangular("MID", 4, 6),))
    e = FuzzyEngine("t", (a,), fz.redundancy_variable(), (parse_rule("if A is MID then RedundancyAmount is LARGE"),))
    res = e.evaluate({"A": 0})
    assert res.no_activation and res.value == pytest.approx(0.775, abs=1e-15)


def test_or_uses_max():
    e = _engine(["if A is LOW or B is LOW then RedundancyAmount is SMALL"])
    res = e.evaluate({"A": 10, "B": 3.5})
    assert res.strengths == (0.5,)


def test_engine_input_errors():
    e = _engine(["if A is LOW then RedundancyAmount is SMALL"])
    with pytest.raises(FuzzyError):
        e.infer({"A": 1})
    with pytest.raises(FuzzyError):
        e.infer({"A": 1, "B": 1, "C": 2})
    with pytest.raises(FuzzyError):
        _engine(["if Z is LOW then RedundancyAmount is SMALL"])
    with pytest.raises(FuzzyError):
        _engine(["if A is HUGE then RedundancyAmount is SMALL"])


@settings(max_examples=50)
@given(st.floats(0, 130000), st.floats(0, 100))
def test_output_within_universe(m, p):
    v = builtin_engine("UavFec").infer({"Motion": m, "PacketLossRate": p})
    assert 0.55 <= v <= 1.0


# published bounds, term by term
PUBLISHED = {
    "uavfec_motion": [("LOW", "shoulder_left", 10000, 30000), ("MEDIUM", "triangular", 21000, 80000),
                      ("HIGH", "shoulder_right", 60000, 130000)],
    "uavfec_plr": [("LOW", "triangular", 0, 15), ("MEDIUM", "triangular", 5, 30), ("HIGH", "triangular", 20, 100)],
    "redundancy": [("SMALL", "shoulder_left", 0.55, 0.70), ("MEDIUM", "triangular", 0.60, 0.80),
                   ("LARGE", "triangular", 0.75, 1.0)],
    "mint_plr": [("LOW", "triangular", 0, 10), ("MEDIUM", "triangular", 5, 20), ("HIGH", "triangular", 15, 100)],
    "corvette_plr": [("LOW", "triangular", 0, 11), ("MEDIUM", "triangular", 5, 22),
                     ("HIGH", "triangular", 17, 100)],
    "shield_plr": [("LOW", "triangular", 0, 12), ("MEDIUM", "triangular", 5, 23), ("HIGH", "triangular", 19, 100)],
    "I": [("SMALL", "shoulder_left", 0.274, 0.459), ("MEDIUM", "triangular", 0.274, 0.651),
          ("LARGE", "shoulder_right", 0.502, 0.757)],
    "P": [("SMALL", "shoulder_left", 0.162, 0.219), ("MEDIUM", "triangular", 0.162, 0.325),
          ("LARGE", "shoulder_right", 0.288, 0.333)],
    "B": [("SMALL", "shoulder_left", 0.081, 0.13), ("MEDIUM", "triangular", 0.081, 0.219),
          ("LARGE", "shoulder_right", 0.205, 0.252)],
}


def builtin_variables():
    u = builtin_engine("UavFec")
    m = builtin_engine("MintFec")
    c = builtin_engine("Corvette").layer("network_status").engine
    s = builtin_engine("Shield").layer("network_status").engine
    return {
        "uavfec_motion": u.variable("Motion"),
        "uavfec_plr": u.variable("PacketLossRate"),
        "redundancy": u.output,
        "mint_plr": m.variable("PacketLossRate"),
        "corvette_plr": c.variable("PacketLossRate"),
        "shield_plr": s.variable("PacketLossRate"),
        "I": m.variable("ISize"),
        "P": m.variable("PSize"),
        "B": m.variable("BSize"),
    }


@pytest.mark.parametrize("key", sorted(PUBLISHED))
def test_builtin_terms_exact(key):
    var = builtin_variables()[key]
    assert [(t.label, t.shape, t.a, t.b) for t in var.terms] == PUBLISHED[key]


def test_builtin_examples():
    v = builtin_variables()
    assert v["shield_plr"].term("LOW") == Triangular("LOW", 0, 12)
    assert v["mint_plr"].term("HIGH") == Triangular("HIGH", 15, 100)
    assert v["corvette_plr"].term("MEDIUM") == Triangular("MEDIUM", 5, 22)


@pytest.mark.parametrize("key", sorted(PUBLISHED))
def test_coverage_on_operating_range(key):
    var = builtin_variables()[key]
    lo = min(t.a for t in var.terms)
    hi = max(t.b for t in var.terms)
    xs = np.linspace(lo, hi, 2001)[1:-1]
    assert np.all(np.max([t.membership(xs) for t in var.terms], axis=0) > 0)


def test_unknown_builtin():
    with pytest.raises(FuzzyError):
        builtin_engine("Nope")


def test_uavfec_monotone_in_plr():
    e = builtin_engine("UavFec")
    motion = e.variable("Motion")
    plr = e.variable("PacketLossRate")
    xs = np.linspace(plr.term("LOW").core, plr.term("HIGH").core, 120)
    for t in motion.terms:
        ys = [e.infer({"Motion": t.core, "PacketLossRate": x}) for x in xs]
        assert all(b >= a - 1e-12 for a, b in zip(ys, ys[1:]))


def test_text_format_roundtrip(tmp_path):
    e = builtin_engine("UavFec")
    text = dumps_engine(e)
    again = loads_engine(text)
    assert dumps_engine(again) == text
    assert again.infer({"Motion": 40000, "PacketLossRate": 12}) == e.infer({"Motion": 40000, "PacketLossRate": 12})
    path = tmp_path / "mine.fuzzy"
    path.write_text(text)
    assert load_engine(path).name == "uavFEC"
    # without an [engine] header the file stem names the engine
    path.write_text(text.split("\n", 1)[1])
    assert load_engine(path).name == "mine"


def test_text_format_errors():
    for bad in ["[input X 0 1]\nLOW triangular 0\n[output Y 0 1]\nA triangular 0 1\n",
                "[input X 0 1]\nLOW triangular 0 1\n",
                "stray line\n",
                "[bogus]\n"]:
        with pytest.raises(FuzzyError):
            loads_engine(bad)


# ---- hierarchies --------------------------------------------------------------

def identity_engine(name, src_var="G"):
    # a grade-in/grade-out rule base that maps each class onto itself
    inp = fz.grade_input(src_var)
    out = fz.grade_output(name)
    rules = [MamdaniRule(Atom(src_var, t.label), (name, t.label)) for t in inp.terms]
    return FuzzyEngine(name, (inp,), out, tuple(rules))


def test_single_layer_graph_equals_engine():
    e = builtin_engine("UavFec")
    g = HfsGraph((HfsLayer("only", e, {"Motion": "m", "PacketLossRate": "p"}),), "only")
    for m, p in [(5000, 3), (50000, 25), (120000, 70)]:
        assert hfs_infer(g, {"m": m, "p": p}) == e.infer({"Motion": m, "PacketLossRate": p})


@pytest.mark.parametrize("x", fz.GRADE_CORES)
def test_identity_layer_reproduces_input(x):
    base = identity_engine("L1")
    direct = base.infer({"G": x})
    g = HfsGraph((HfsLayer("L1", base, {"G": "g"}), HfsLayer("L2", identity_engine("L2"), {"G": "@L1"})), "L2")
    # pure classes pass through a chain unchanged up to the grid step
    assert direct == pytest.approx(x, abs=1e-3)
    assert hfs_infer(g, {"g": x}) == pytest.approx(direct, abs=1e-3)


def test_hfs_errors():
    e = identity_engine("A")
    with pytest.raises(FuzzyError):
        HfsGraph((HfsLayer("A", e, {"G": "@B"}), HfsLayer("B", identity_engine("B"), {"G": "@A"})), "A")
    with pytest.raises(FuzzyError):
        HfsGraph((HfsLayer("A", e, {}),), "A")
    with pytest.raises(FuzzyError):
        HfsGraph((HfsLayer("A", e, {"G": "@Z"}),), "A")
    g = HfsGraph((HfsLayer("A", e, {"G": "g"}),), "A")
    with pytest.raises(FuzzyError):
        hfs_infer(g, {})


CORES = {"density": 8e-4, "distance": 150.0, "temporal_intensity": fz.temporal_intensity_variable().terms[1].core,
         "spatial_grade": 0.5, "frame_type": 1.0, "snr": 10.0}


@pytest.mark.parametrize("kind", ["Corvette", "Shield"])
def test_network_portion_alone(kind):
    g = builtin_engine(kind)
    ext = {k: v for k, v in CORES.items() if k in g.external_inputs()}
    ext["plr"] = 12.0
    video = hfs_evaluate(g, ext)["video"]
    # a relay with only the network inputs and the pinned video grade
    needed = g.external_inputs(pinned={"video"})
    assert needed <= {"plr", "density", "distance", "snr"}
    out = hfs_infer(g, {k: ext[k] for k in needed}, pinned={"video": video})
    assert out == hfs_infer(g, ext)
    assert 0.55 <= out <= 1.0


def plr_variable(kind):
    if kind in ("UavFec", "MintFec"):
        return builtin_engine(kind).variable("PacketLossRate")
    return builtin_engine(kind).layer("network_status").engine.variable("PacketLossRate")


def plr_sweep(kind, fixed, steps=100):
    """Crisp outputs as PLR rises from the LOW core to the HIGH core."""
    var = plr_variable(kind)
    xs = np.linspace(var.term("LOW").core, var.term("HIGH").core, steps)
    if kind in ("UavFec", "MintFec"):
        e = builtin_engine(kind)
        return [e.infer({**fixed, "PacketLossRate": x}) for x in xs]
    g = builtin_engine(kind)
    return [hfs_infer(g, {**fixed, "plr": x}) for x in xs]


def sweep_cases():
    mint = builtin_engine("MintFec")
    sizes = {f"{k}Size": mint.variable(f"{k}Size").terms[1].core for k in "IPB"}
    ti = fz.temporal_intensity_variable()
    cases = []
    for t in builtin_engine("UavFec").variable("Motion").terms:
        cases.append(("UavFec", {"Motion": t.core}))
    for ft in (0.0, 1.0):
        for term in ti.terms:
            cases.append(("MintFec", {"FrameType": ft, "TemporalIntensity": term.core, **sizes}))
    for kind in ("Corvette", "Shield"):
        for ft in (0.0, 1.0):
            ext = {k: v for k, v in CORES.items() if k in builtin_engine(kind).external_inputs()}
            cases.append((kind, {**ext, "frame_type": ft}))
    return cases


@pytest.mark.parametrize("kind,fixed", sweep_cases())
def test_plr_sweep_monotone(kind, fixed):
    ys = plr_sweep(kind, fixed)
    assert all(b >= a - 1e-9 for a, b in zip(ys, ys[1:]))


@pytest.mark.parametrize("kind", ["UavFec", "MintFec", "Corvette", "Shield"])
def test_plr_sweep_not_flat(kind):
    assert any(plr_sweep(kind, f, 20)[-1] > plr_sweep(kind, f, 20)[0] for k, f in sweep_cases() if k == kind)


def test_severity_and_cartesian():
    assert fz.severity([0, 1]) == 1  # 0.5 rounds up
    assert fz.severity([0, 0, 1]) == 0
    assert fz.severity([2, 2], n_out=3) == 2
    a = fz.grade_input("A")
    rules = fz.cartesian_rules([a], fz.grade_output("O"), reverse=("A",))
    assert [r.consequent[1] for r in rules] == ["HIGH", "MEDIUM", "LOW"]


def test_spatial_grade():
    assert fz.spatial_grade("I", 0.2) == pytest.approx(1 / 6)
    assert fz.spatial_grade("I", 0.9) == pytest.approx(5 / 6)
    assert fz.spatial_grade("P", 0.9) == pytest.approx(5 / 6)
