import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustlp.lpcore import (
    EQ,
    GE,
    LE,
    MAX,
    MIN,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    STATUS_UNBOUNDED,
    DeterministicLP,
    DimensionMismatch,
    LinearConstraint,
    MalformedModel,
    VariableDef,
    check_feasible,
    from_rc_json,
    lp_dual,
    make_lp,
    rc_json_dumps,
    rc_json_loads,
    solve_lp,
    to_rc_json,
)
from robustlp.pinned import REFERENCE_X_STAR, reference_instance
from robustlp.reformulate import reformulate

from oracles import brute_force_lp


def test_bound_active_identity():
    lp = make_lp(MIN, [1.0], [("x", 1.0, math.inf)], [])
    sol = solve_lp(lp)
    assert sol.status == STATUS_OPTIMAL
    assert sol.x == (1.0,)
    assert sol.objective_value == 1.0


def test_single_tight_constraint():
    lp = make_lp(MIN, [1, 1], [("x1", 0, 10), ("x2", 0, 10)], [([1, 1], GE, 2)])
    sol = solve_lp(lp)
    assert sol.status == STATUS_OPTIMAL
    assert sol.objective_value == pytest.approx(2.0, abs=1e-9)


def test_infeasible_and_unbounded_are_distinct():
    infeasible = make_lp(MIN, [1], [("x", -math.inf, math.inf)], [([1], LE, 1), ([1], GE, 3)])
    assert solve_lp(infeasible).status == STATUS_INFEASIBLE
    unbounded = make_lp(MIN, [-1], [("x", 0, math.inf)], [])
    assert solve_lp(unbounded).status == STATUS_UNBOUNDED


def test_equality_with_free_variable():
    lp = make_lp(MIN, [0, 1], [("x", 0, 2), ("y", -math.inf, math.inf)], [([1, 1], EQ, 5)])
    sol = solve_lp(lp)
    assert sol.status == STATUS_OPTIMAL
    assert sol.x == pytest.approx((2.0, 3.0))


def test_malformed_model_rejected():
    lp = DeterministicLP(
        MIN,
        (1.0, 2.0),
        (VariableDef("x", 0.0, 1.0),),
        (),
    )
    with pytest.raises(MalformedModel):
        solve_lp(lp)
    bad_bounds = make_lp(MIN, [1], [("x", 2.0, 1.0)], [])
    with pytest.raises(MalformedModel):
        solve_lp(bad_bounds)


def _random_lp(rng, n=None, m=None):
    n = n or int(rng.integers(2, 6))
    m = m or int(rng.integers(1, 9))
    sense = MIN if rng.random() < 0.5 else MAX
    obj = np.round(rng.uniform(-5, 5, n), 1)
    variables = []
    for j in range(n):
        lo = round(float(rng.uniform(-4, 0)), 1)
        hi = round(float(rng.uniform(0.1, 5)), 1)
        variables.append((f"x{j}", lo, hi))
    cons = []
    for _ in range(m):
        a = np.round(rng.uniform(-3, 3, n), 1)
        if np.all(np.abs(a) < 0.05):
            a[0] = 1.0
        sense_row = EQ if rng.random() < 0.1 else (LE if rng.random() < 0.5 else GE)
        cons.append((a, sense_row, round(float(rng.uniform(-6, 6)), 1)))
    return make_lp(sense, obj, variables, cons)


def test_random_lp_matches_vertex_enumeration():
    """4-var LPs against the brute-force basic-point oracle."""
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(60):
        lp = _random_lp(rng, n=4, m=4)
        sol = solve_lp(lp)
        expected = brute_force_lp(lp)
        if sol.status == STATUS_OPTIMAL:
            checked += 1
            assert expected is not None
            assert sol.objective_value == pytest.approx(expected, abs=1e-7)
        else:
            assert expected is None
    assert checked >= 10


def test_vertex_oracle_equivalence_suite():
    """Solver value equals enumeration value on LPs up to 5 vars / 8 rows."""
    rng = np.random.default_rng(7)
    solved = 0
    for _ in range(120):
        lp = _random_lp(rng)
        sol = solve_lp(lp)
        expected = brute_force_lp(lp)
        if sol.status != STATUS_OPTIMAL:
            assert expected is None
            continue
        solved += 1
        assert abs(sol.objective_value - expected) <= 1e-8 * max(1.0, abs(expected))
        ok, violated = check_feasible(lp, sol.x, tol=1e-7)
        assert ok, violated
    assert solved >= 30


def test_strong_duality_self_check():
    rng = np.random.default_rng(99)
    solved = 0
    for _ in range(80):
        lp = _random_lp(rng)
        sol = solve_lp(lp)
        if sol.status != STATUS_OPTIMAL:
            continue
        solved += 1
        dual = solve_lp(lp_dual(lp))
        assert dual.status == STATUS_OPTIMAL
        assert abs(dual.objective_value - sol.objective_value) <= 1e-6 * max(
            1.0, abs(sol.objective_value)
        )
    assert solved >= 20


def test_determinism_bit_identical():
    rng = np.random.default_rng(5)
    lp = _random_lp(rng)
    first = solve_lp(lp)
    for _ in range(3):
        again = solve_lp(lp)
        assert again == first  # tuple equality is bitwise for floats


def test_check_feasible_reports_rows():
    lp = make_lp(MIN, [1], [("x", -math.inf, math.inf)], [([1], GE, 1)])
    ok, violated = check_feasible(lp, [1.0], tol=1e-9)
    assert ok and violated == []
    ok, violated = check_feasible(lp, [0.999], tol=1e-9)
    assert not ok
    assert violated == ["con0"]


def test_check_feasible_reports_bounds_and_dimension():
    lp = make_lp(MIN, [1, 1], [("a", 0, 1), ("b", 0, 1)], [])
    ok, violated = check_feasible(lp, [2.0, -1.0])
    assert not ok
    assert set(violated) == {"ub:a", "lb:b"}
    with pytest.raises(DimensionMismatch):
        check_feasible(lp, [1.0])


def test_reference_solution_feasible_for_its_counterpart():
    """The known optimum, with auxiliaries set by the solver, satisfies the RC."""
    rc = reformulate(reference_instance())
    sol = solve_lp(rc)
    assert sol.status == STATUS_OPTIMAL
    ok, violated = check_feasible(rc, sol.x, tol=1e-7)
    assert ok, violated
    assert sol.x[:5] == pytest.approx(REFERENCE_X_STAR, abs=1e-3)


def test_rc_json_round_trip():
    lp = make_lp(
        MAX,
        [3, 2],
        [("x", 0, math.inf), ("y", -math.inf, math.inf)],
        [([1, 1], LE, 4), ([1, 3], GE, -2), ([1, -1], EQ, 0.5)],
    )
    data = to_rc_json(lp)
    assert data["vars"][0]["ub"] is None
    assert data["vars"][1]["lb"] is None
    assert from_rc_json(data) == lp
    assert rc_json_loads(rc_json_dumps(lp)) == lp


def test_rc_json_rejects_bad_shapes():
    with pytest.raises(MalformedModel):
        rc_json_loads("not json")
    with pytest.raises(MalformedModel):
        rc_json_loads("[1, 2]")
    with pytest.raises(MalformedModel):
        rc_json_loads('{"sense": "min", "vars": [], "obj": [1], "cons": []}')


def test_dual_of_maximization():
    lp = make_lp(MAX, [3, 2], [("x", 0, math.inf), ("y", 0, math.inf)],
                 [([1, 1], LE, 4), ([1, 3], LE, 6)])
    primal = solve_lp(lp)
    dual = solve_lp(lp_dual(lp))
    assert dual.status == STATUS_OPTIMAL
    assert dual.objective_value == pytest.approx(primal.objective_value, abs=1e-8)


_coef = st.floats(-100, 100, allow_nan=False).map(lambda v: round(v, 3))
_bound = st.one_of(st.none(), _coef)


@st.composite
def _rc_json_lps(draw):
    n = draw(st.integers(1, 5))
    m = draw(st.integers(0, 4))
    variables = []
    for j in range(n):
        lo = draw(_bound)
        hi = draw(_bound)
        if lo is not None and hi is not None and lo > hi:
            lo, hi = hi, lo
        variables.append(
            VariableDef(f"v{j}", -math.inf if lo is None else lo, math.inf if hi is None else hi)
        )
    cons = tuple(
        LinearConstraint(
            tuple(draw(_coef) for _ in range(n)),
            draw(st.sampled_from([LE, GE, EQ])),
            draw(_coef),
        )
        for _ in range(m)
    )
    objective = tuple(draw(_coef) for _ in range(n))
    sense = draw(st.sampled_from([MIN, MAX]))
    return DeterministicLP(sense, objective, tuple(variables), cons)


@given(_rc_json_lps())
@settings(max_examples=60, deadline=None)
def test_rc_json_round_trip_property(lp):
    assert rc_json_loads(rc_json_dumps(lp)) == lp
