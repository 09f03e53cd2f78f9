import math
from dataclasses import replace

import numpy as np
import pytest

from robustlp.generate import GenConfig, generate_dataset
from robustlp.lpcore import GE, LE, MAX, MIN, STATUS_OPTIMAL, solve_lp
from robustlp.model import (
    Box,
    Budget,
    Deterministic,
    Polyhedral,
    RobustInstance,
    RowSpec,
)
from robustlp.pinned import (
    REFERENCE_F_STAR,
    REFERENCE_X_STAR,
    reference_instance,
)
from robustlp.reformulate import (
    InfeasibleRobust,
    NoConvergence,
    UnsupportedSpec,
    deviation_extremum,
    nominal_lp,
    reformulate,
    robust_value_oracle,
    solve_robust,
    worst_case_row_value,
)

from oracles import box_vertices, budget_vertices


def test_reference_instance_value_and_solution():
    sol = solve_robust(reference_instance())
    assert sol.status == STATUS_OPTIMAL
    assert abs(sol.objective_value - REFERENCE_F_STAR) <= 1e-3
    assert sol.x == pytest.approx(REFERENCE_X_STAR, abs=1e-3)


def test_reference_instance_oracle_agrees():
    value = robust_value_oracle(reference_instance())
    assert abs(value - REFERENCE_F_STAR) <= 1e-3


def test_zero_perturbation_reduces_to_nominal():
    """Deviations of zero and a {0} polyhedral set leave the nominal value."""
    base = generate_dataset(GenConfig(n=3, count=1, seed=21), render=False)[0]
    rows = []
    for row in base.rows:
        if isinstance(row.uncertainty, Deterministic):
            rows.append(row)
            continue
        support = row.uncertainty.support
        spec = Polyhedral(
            support=support,
            F=(),
            g=(),
            lower=0.0,
            upper=0.0,
            zero_eq=tuple(j for j in range(base.n) if j not in set(support)),
        )
        rows.append(replace(row, uncertainty=spec))
    obj_spec = base.objective_uncertainty
    if not isinstance(obj_spec, Deterministic):
        obj_spec = Box(support=obj_spec.support, delta=tuple(0.0 for _ in obj_spec.support))
    inst = replace(base, rows=tuple(rows), objective_uncertainty=obj_spec)
    robust = solve_robust(inst)
    nominal = solve_lp(nominal_lp(inst))
    assert robust.objective_value == pytest.approx(nominal.objective_value, abs=1e-9)


def test_box_worst_case_pure_deviation():
    row = RowSpec(
        a_nom=(0.0, 0.0),
        sense=LE,
        b=0.0,
        uncertainty=Box(support=(0, 1), delta=(1.0, 1.0)),
    )
    assert worst_case_row_value(row, [1.0, -2.0]) == pytest.approx(3.0)


def test_budget_full_gamma_recovers_box():
    rng = np.random.default_rng(17)
    for _ in range(20):
        delta = tuple(rng.uniform(0.1, 2.0, 3))
        x = rng.uniform(-3, 3, 3)
        a = rng.uniform(-2, 2, 3)
        box_row = RowSpec(tuple(a), LE, 0.0, Box(support=(0, 1, 2), delta=delta))
        bud_row = RowSpec(tuple(a), LE, 0.0, Budget(support=(0, 1, 2), delta=delta, gamma=3.0))
        assert worst_case_row_value(bud_row, x) == pytest.approx(
            worst_case_row_value(box_row, x), abs=1e-9
        )


def test_budget_one_unit_of_budget():
    row = RowSpec(
        a_nom=(0.0, 0.0),
        sense=LE,
        b=0.0,
        uncertainty=Budget(support=(0, 1), delta=(1.0, 1.0), gamma=1.0),
    )
    assert worst_case_row_value(row, [1.0, 1.0]) == pytest.approx(1.0)


def test_budget_inner_lp_matches_vertex_enumeration():
    rng = np.random.default_rng(4)
    for _ in range(15):
        d = int(rng.integers(2, 5))
        delta = tuple(float(v) for v in rng.uniform(0.1, 2.0, d))
        gamma = float(np.round(rng.uniform(0.0, d), 1))
        x = rng.uniform(-3, 3, d)
        spec = Budget(support=tuple(range(d)), delta=delta, gamma=gamma)
        dev, _ = deviation_extremum(spec, x, "max")
        best = max(float(z @ x) for z in budget_vertices(delta, gamma))
        assert dev == pytest.approx(best, abs=1e-8)


def test_box_rc_by_vertex_enumeration():
    """min x1+x2 with an uncertain >= row; worst case enumerated by hand."""
    inst = RobustInstance(
        id="hand",
        n=2,
        sense=MIN,
        c_nom=(1.0, 1.0),
        objective_uncertainty=Deterministic(),
        rows=(
            RowSpec(
                a_nom=(1.0, 1.0),
                sense=GE,
                b=2.0,
                uncertainty=Box(support=(0,), delta=(0.5,)),
            ),
        ),
        bounds=(0.0, 10.0),
    )
    sol = solve_robust(inst)
    assert sol.objective_value == pytest.approx(2.0, abs=1e-9)
    # worst row over zeta in {-0.5, +0.5} at the reported optimum holds
    x = np.asarray(sol.x)
    worst = min((1.0 + z) * x[0] + x[1] for z in (-0.5, 0.5))
    assert worst >= 2.0 - 1e-9


def test_uncertain_equality_rejected():
    inst = RobustInstance(
        id="bad",
        n=2,
        sense=MIN,
        c_nom=(1.0, 1.0),
        objective_uncertainty=Deterministic(),
        rows=(
            RowSpec((1.0, 1.0), "=", 2.0, Box(support=(0, 1), delta=(0.1, 0.1))),
        ),
        bounds=(0.0, 10.0),
    )
    with pytest.raises(UnsupportedSpec):
        reformulate(inst)


def test_auxiliary_naming_scheme():
    rc = reformulate(reference_instance())
    names = {v.name for v in rc.variables}
    assert {"x1", "x2", "x3", "x4", "x5", "obj_t"} <= names
    assert "obj_z0" in names and "obj_z_3" in names  # budget duals on the objective
    assert "con1_t_2" in names and "con1_t_4" in names  # box duals on row 1
    assert any(n.startswith("con3_lam_") for n in names)
    assert "con3_mu_1" in names  # pinned component duals


def _seeded_instances(counts=((2, 8), (3, 8), (4, 6), (5, 4)), seed=500):
    out = []
    for n, count in counts:
        out.extend(generate_dataset(GenConfig(n=n, count=count, seed=seed + n), render=False))
    return out


def test_duality_equivalence_on_seeded_instances():
    for inst in _seeded_instances():
        rc_value = solve_robust(inst).objective_value
        oracle = robust_value_oracle(inst)
        assert abs(rc_value - oracle) <= 1e-6 * max(1.0, abs(oracle)), inst.id


def test_budget_box_collapse_property():
    data = generate_dataset(
        GenConfig(n=3, count=10, seed=314, uncertainty_types=("budget",)), render=False
    )
    for inst in data:
        full, boxed = _collapse_pair(inst)
        v_full = solve_robust(full).objective_value
        v_box = solve_robust(boxed).objective_value
        assert abs(v_full - v_box) <= 1e-9, inst.id


def _collapse_pair(inst):
    rows_full, rows_box = [], []
    for row in inst.rows:
        if isinstance(row.uncertainty, Budget):
            u = row.uncertainty
            rows_full.append(replace(row, uncertainty=replace(u, gamma=float(len(u.support)))))
            rows_box.append(replace(row, uncertainty=Box(u.support, u.delta)))
        else:
            rows_full.append(row)
            rows_box.append(row)
    obj_full = inst.objective_uncertainty
    obj_box = inst.objective_uncertainty
    if isinstance(obj_full, Budget):
        obj_box = Box(obj_full.support, obj_full.delta)
        obj_full = replace(obj_full, gamma=float(len(obj_full.support)))
    full = replace(inst, rows=tuple(rows_full), objective_uncertainty=obj_full)
    boxed = replace(inst, rows=tuple(rows_box), objective_uncertainty=obj_box)
    return full, boxed


def _scale_uncertainty(inst, factor):
    def scale(spec):
        if isinstance(spec, Box):
            return Box(spec.support, tuple(d * factor for d in spec.delta))
        if isinstance(spec, Budget):
            return Budget(
                spec.support,
                tuple(d * factor for d in spec.delta),
                min(spec.gamma * factor, len(spec.support)),
            )
        return spec

    rows = tuple(
        replace(r, uncertainty=scale(r.uncertainty))
        if not isinstance(r.uncertainty, (Deterministic, Polyhedral))
        else r
        for r in inst.rows
    )
    return replace(inst, rows=rows, objective_uncertainty=scale(inst.objective_uncertainty))


def test_monotonicity_larger_sets_never_improve():
    data = generate_dataset(
        GenConfig(n=3, count=12, seed=2718, uncertainty_types=("box", "budget")), render=False
    )
    for inst in data:
        base = solve_robust(inst)
        wider = solve_robust(_scale_uncertainty(inst, 1.5))
        if wider.status != STATUS_OPTIMAL:
            continue  # enlarging can make the robust model infeasible
        if inst.sense == MIN:
            assert wider.objective_value >= base.objective_value - 1e-9
        else:
            assert wider.objective_value <= base.objective_value + 1e-9


def test_feasibility_transfer_to_original_rows():
    for inst in _seeded_instances(counts=((3, 6), (4, 4)), seed=41):
        sol = solve_robust(inst)
        assert sol.status == STATUS_OPTIMAL
        for row in inst.rows:
            if isinstance(row.uncertainty, Deterministic):
                continue
            wc = worst_case_row_value(row, sol.x)
            if row.sense == LE:
                assert wc <= row.b + 1e-7
            else:
                assert wc >= row.b - 1e-7


def test_oracle_no_convergence_guard():
    inst = reference_instance()
    with pytest.raises(NoConvergence):
        robust_value_oracle(inst, max_iters=1)


def test_oracle_detects_robust_infeasibility():
    inst = RobustInstance(
        id="squeeze",
        n=2,
        sense=MIN,
        c_nom=(1.0, 1.0),
        objective_uncertainty=Deterministic(),
        rows=(
            RowSpec((1.0, 1.0), GE, 1.9, Box(support=(0, 1), delta=(1.0, 1.0))),
            RowSpec((1.0, 1.0), LE, 2.1, Box(support=(0, 1), delta=(1.0, 1.0))),
        ),
        bounds=(-10.0, 10.0),
    )
    with pytest.raises(InfeasibleRobust):
        robust_value_oracle(inst)
    assert solve_lp(reformulate(inst)).status != STATUS_OPTIMAL
