import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from reference import brute_distance_1d_2d
from stlf.stl import Predicate, PredicateSet
from stlf.trace import (
    BOOLEAN,
    EUCLIDEAN,
    ChannelError,
    SignalSpace,
    Trace,
    TraceError,
    TraceFormatError,
    complement,
    read_trace,
    signed_distance,
    signed_distance_series,
    validate_trace,
    write_trace,
)


def P(coeffs, rel, bound):
    return Predicate(tuple(coeffs.items()), rel, bound)


def S(*clauses):
    return PredicateSet(tuple(tuple(c) for c in clauses))


# -- validation -------------------------------------------------------------------


def test_valid_trace():
    tr = Trace.from_arrays([0, 0.5, 1.0], {"y": [1, 2, 3]}, duration=1.0)
    assert validate_trace(tr) == []


def test_monotonicity_violation_index():
    tr = Trace.from_arrays([0, 0.5, 0.5], {"y": [1, 2, 3]})
    assert "monotonicity violation at index 2" in validate_trace(tr)


def test_duration_mismatch():
    tr = Trace.from_arrays([0, 0.5, 0.9], {"y": [1, 2, 3]}, duration=1.0)
    assert any(p.startswith("duration mismatch") for p in validate_trace(tr))


def test_missing_and_undeclared_channels():
    space = SignalSpace(("y", "z"))
    tr = Trace(space, [0, 1], {"y": [0, 1], "w": [0, 0]})
    report = validate_trace(tr)
    assert "missing channel z" in report
    assert "undeclared channel w" in report


def test_duplicate_names_rejected():
    with pytest.raises(TraceError):
        SignalSpace(("y",), ("y",))


def test_trace_arrays_are_frozen():
    tr = Trace.from_arrays([0, 1], {"y": [0, 1]})
    with pytest.raises(ValueError):
        tr.values["y"][0] = 5


# -- signed distance ------------------------------------------------------------


def test_distance_inside_box():
    s = S([P({"y": 1}, ">=", 0), P({"y": 1}, "<=", 10)])
    assert signed_distance({"y": 5}, s) == 5


def test_distance_outside_halfspace():
    assert signed_distance({"y": -3}, S([P({"y": 1}, ">=", 0)])) == -3


def test_distance_union_example_closed_form():
    s = S([P({"y1": 1}, "<=", -10)], [P({"y1": 1, "y2": 1}, ">=", 10)])
    assert signed_distance({"y1": 0, "y2": 0}, s) == pytest.approx(-10 / math.sqrt(2), abs=1e-12)
    assert signed_distance({"y1": 0, "y2": 0}, S([P({"y1": 1}, "<=", -10)])) == -10


def test_distance_union_example_brute_force():
    s = S([P({"y1": 1}, "<=", -10)], [P({"y1": 1, "y2": 1}, ">=", 10)])
    brute = brute_distance_1d_2d({"y1": 0, "y2": 0}, s, ["y1", "y2"], span=12.0, step=0.01)
    assert brute == pytest.approx(-7.0711, abs=0.01)
    assert signed_distance({"y1": 0, "y2": 0}, s) == pytest.approx(brute, abs=0.01)


@given(
    st.floats(-6, 6),
    st.floats(-6, 6),
    st.sampled_from(["box", "wedge", "union"]),
)
@settings(max_examples=40, deadline=None)
def test_distance_matches_grid_oracle(x, y, shape):
    sets = {
        "box": S([P({"u": 1}, ">=", -1), P({"u": 1}, "<=", 2), P({"v": 1}, ">=", 0), P({"v": 1}, "<=", 1)]),
        "wedge": S([P({"u": 1, "v": 1}, ">=", 1), P({"u": 1, "v": -2}, "<=", 0)]),
        "union": S([P({"u": 1}, ">=", 2)], [P({"v": 1}, "<=", -1), P({"u": 1}, "<=", 0)]),
    }
    s = sets[shape]
    pt = {"u": x, "v": y}
    brute = brute_distance_1d_2d(pt, s, ["u", "v"], span=9.0, step=0.02)
    assert signed_distance(pt, s) == pytest.approx(brute, abs=0.03)


def test_full_and_empty_sets():
    assert signed_distance({"y": 1}, PredicateSet(())) == -math.inf
    assert signed_distance({"y": 1}, PredicateSet(((),))) == math.inf


def test_boundary_is_zero():
    assert signed_distance({"y": 0}, S([P({"y": 1}, ">", 0)])) == 0
    assert signed_distance({"y": 0}, S([P({"y": 1}, ">=", 0)])) == 0


def test_missing_channel():
    with pytest.raises(ChannelError):
        signed_distance({"y": 0}, S([P({"z": 1}, ">", 0)]))


def test_boolean_channel_distance_is_value():
    s = PredicateSet(((Predicate(channel="B"),),))
    assert signed_distance({"B": 1.0}, s) == 1.0
    assert signed_distance({"B": -1.0}, s) == -1.0


finite = st.floats(-50, 50, allow_nan=False)
relations = st.sampled_from([">=", ">", "<=", "<"])
coeff = st.sampled_from([-2.0, -1.0, -0.5, 0.5, 1.0, 3.0])


@st.composite
def predicate_sets(draw):
    n_clauses = draw(st.integers(1, 3))
    clauses = []
    for _ in range(n_clauses):
        lits = []
        for _ in range(draw(st.integers(1, 3))):
            chans = draw(st.lists(st.sampled_from(["u", "v", "w"]), min_size=1, max_size=2, unique=True))
            lits.append(P({c: draw(coeff) for c in chans}, draw(relations), draw(st.integers(-5, 5))))
        clauses.append(lits)
    return S(*clauses)


@given(predicate_sets(), finite, finite, finite)
@settings(max_examples=300, deadline=None)
def test_sign_consistency(s, u, v, w):
    pt = {"u": u, "v": v, "w": w}
    d = signed_distance(pt, s)
    if d > 0:
        assert any(all(p.holds(pt) for p in c) for c in s.clauses)
    elif d < 0:
        assert not any(all(p.holds(pt) for p in c) for c in s.clauses)


@given(st.sampled_from(["u", "v"]), coeff, relations, st.integers(-5, 5), finite, finite)
@settings(max_examples=200, deadline=None)
def test_negation_duality_single_halfspace(ch, c, rel, b, u, v):
    s = S([P({ch: c, "w": 1.0}, rel, b)])
    pt = {"u": u, "v": v, "w": 0.25}
    assert signed_distance(pt, complement(s)) == -signed_distance(pt, s)


@given(finite, finite, st.integers(-3, 3), st.integers(-3, 3))
@settings(max_examples=200, deadline=None)
def test_negation_duality_box(u, v, lo, width):
    assume(width > 0)
    s = S([P({"u": 1}, ">=", lo), P({"u": 1}, "<=", lo + width), P({"v": 1}, ">=", lo)])
    pt = {"u": u, "v": v}
    assert signed_distance(pt, complement(s)) == pytest.approx(-signed_distance(pt, s), abs=1e-9)


def test_metric_axioms_on_random_triples():
    rng = np.random.default_rng(7)
    pts = rng.normal(scale=10.0, size=(10_000, 3, 4))
    for a, b, c in pts:
        assert EUCLIDEAN(a, a) == 0
        assert EUCLIDEAN(a, b) > 0
        assert EUCLIDEAN(a, b) == EUCLIDEAN(b, a)
        assert EUCLIDEAN(a, c) <= EUCLIDEAN(a, b) + EUCLIDEAN(b, c) + 1e-12


def test_series_matches_pointwise():
    rng = np.random.default_rng(3)
    tr = Trace.from_arrays(np.arange(6.0), {"u": rng.normal(size=6), "v": rng.normal(size=6)})
    for s in (
        S([P({"u": 1, "v": -2}, "<", 0.3)]),
        S([P({"u": 1}, ">=", 0)], [P({"v": 1}, "<=", -0.5), P({"u": 1}, "<", 1)]),
    ):
        series = signed_distance_series(tr, s)
        expected = [signed_distance(tr.point(i), s) for i in range(len(tr))]
        assert np.allclose(series, expected, rtol=0, atol=1e-12)


# -- file format ---------------------------------------------------------------------


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=20))
@settings(max_examples=50, deadline=None)
def test_csv_round_trip_is_bit_exact(tmp_path_factory, values):
    n = len(values)
    times = np.cumsum(np.full(n, 0.1)) - 0.1
    tr = Trace.from_arrays(
        times, {"y": values}, inputs={"B": np.sign(values) + (np.array(values) == 0)}, params={"p": 1 / 3},
        kinds={"B": BOOLEAN},
    )
    path = tmp_path_factory.mktemp("rt") / "t.csv"
    write_trace(tr, path)
    back = read_trace(path)
    assert back.space == tr.space
    assert back.params == tr.params
    assert back.duration == tr.duration
    assert np.array_equal(back.times, tr.times)
    for k in tr.values:
        assert np.array_equal(back.values[k], tr.values[k])


def test_malformed_csv_reports_row(tmp_path):
    tr = Trace.from_arrays([0, 1, 2], {"y": [1, 2, 3]})
    path = tmp_path / "t.csv"
    write_trace(tr, path)
    lines = path.read_text().splitlines()
    lines[2] = "1,not-a-number"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TraceFormatError) as exc:
        read_trace(path)
    assert exc.value.row == 3
