"""Acceptance suite: one test per exit criterion, each printing PASS or FAIL.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings.
"""

import time
from contextlib import contextmanager
from dataclasses import replace

import numpy as np
import pytest

from robustlp.generate import (
    GenConfig,
    generate_dataset,
    generate_mixed,
    hard_conditions,
    is_degenerate,
)
from robustlp.harness import (
    NominalReformulator,
    OracleReformulator,
    PassthroughCoder,
    run_pipeline,
)
from robustlp.lpcore import LE, STATUS_OPTIMAL, solve_lp
from robustlp.memory import AdaptConfig, memory_from_json, run_offline_adaptation
from robustlp.model import (
    Box,
    Budget,
    Deterministic,
    HeavyTail,
    literature_to_polyhedral,
    validate_instance,
)
from robustlp.pinned import (
    REFERENCE_F_STAR,
    REFERENCE_X_STAR,
    reference_instance,
)
from robustlp.reformulate import (
    deviation_extremum,
    nominal_lp,
    reformulate,
    robust_value_oracle,
    solve_robust,
    worst_case_row_value,
)

from scripted_world import ScriptedReflector, ScriptedReformulator, training_stream, validation_set


@contextmanager
def criterion(name: str):
    start = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"FAIL {name} ({time.monotonic() - start:.1f}s)")
        raise
    print(f"PASS {name} ({time.monotonic() - start:.1f}s)")


def test_pinned_paper_instance():
    with criterion("pinned-paper-instance"):
        start = time.monotonic()
        inst = reference_instance()
        validate_instance(inst)
        sol = solve_robust(inst)
        elapsed = time.monotonic() - start
        assert sol.status == STATUS_OPTIMAL
        assert abs(sol.objective_value - REFERENCE_F_STAR) <= 1e-3
        for got, want in zip(sol.x, REFERENCE_X_STAR):
            assert abs(got - want) <= 1e-3
        assert elapsed < 1.0, f"took {elapsed:.2f}s"


def test_duality_equivalence_suite():
    with criterion("duality-equivalence-suite"):
        start = time.monotonic()
        for n in (2, 3, 4, 5):
            data = generate_dataset(GenConfig(n=n, count=100, seed=1000 + n), render=False)
            assert len(data) == 100
            for inst in data:
                rc_value = solve_robust(inst).objective_value
                oracle = robust_value_oracle(inst)
                assert abs(rc_value - oracle) <= 1e-6 * max(1.0, abs(oracle)), inst.id
        elapsed = time.monotonic() - start
        assert elapsed < 120.0, f"took {elapsed:.1f}s"


def test_budget_box_collapse():
    with criterion("budget-box-collapse"):
        data = []
        for n in (2, 3, 4, 5):
            data.extend(
                generate_dataset(
                    GenConfig(n=n, count=25, seed=4000 + n, uncertainty_types=("budget",)),
                    render=False,
                )
            )
        assert len(data) == 100
        for inst in data:
            rows_full, rows_box = [], []
            for row in inst.rows:
                if isinstance(row.uncertainty, Budget):
                    u = row.uncertainty
                    rows_full.append(
                        replace(row, uncertainty=replace(u, gamma=float(len(u.support))))
                    )
                    rows_box.append(replace(row, uncertainty=Box(u.support, u.delta)))
                else:
                    rows_full.append(row)
                    rows_box.append(row)
            obj_full = obj_box = inst.objective_uncertainty
            if isinstance(obj_full, Budget):
                obj_box = Box(obj_full.support, obj_full.delta)
                obj_full = replace(obj_full, gamma=float(len(obj_full.support)))
            v_full = solve_robust(
                replace(inst, rows=tuple(rows_full), objective_uncertainty=obj_full)
            ).objective_value
            v_box = solve_robust(
                replace(inst, rows=tuple(rows_box), objective_uncertainty=obj_box)
            ).objective_value
            assert abs(v_full - v_box) <= 1e-9, inst.id


@pytest.fixture(scope="module")
def random64():
    return generate_mixed([2, 3, 4, 5], 64, seed=303)


def test_generator_shape(random64):
    with criterion("generator-shape"):
        start = time.monotonic()
        data = generate_mixed([2, 3, 4, 5], 64, seed=303)
        elapsed = time.monotonic() - start
        assert elapsed < 60.0, f"took {elapsed:.1f}s"
        assert len(data) == 64
        for inst in data:
            # independent re-application of the three acceptance filters
            specs = [inst.objective_uncertainty] + [r.uncertainty for r in inst.rows]
            uncertain = [s for s in specs if not isinstance(s, Deterministic)]
            deterministic = [s for s in specs if isinstance(s, Deterministic)]
            assert uncertain, "all-deterministic instance emitted"
            assert len(deterministic) == 1, "exactly-one-deterministic-row rule"
            sol = solve_lp(reformulate(inst))
            assert sol.status == STATUS_OPTIMAL, "feasible-and-bounded filter"
            x_star = sol.x[: inst.n]
            assert not is_degenerate(x_star, inst.bounds), "non-degenerate filter"
            assert abs(sol.objective_value - inst.ground_truth.f_star) <= 1e-9
            validate_instance(inst)

        hard = generate_mixed([2, 3, 4, 5], 32, seed=909, hard_mode=True)
        assert len(hard) == 32
        for inst in hard:
            conditions = hard_conditions(inst)
            assert all(conditions.values()), (inst.id, conditions)


def test_literature_formulas():
    with criterion("literature-formulas"):
        spec = literature_to_polyhedral(HeavyTail(mu=-0.8139, m=2, alpha=1.5, gamma=2.0))
        halfwidth = (spec.upper - spec.lower) / 2.0
        assert abs(halfwidth - 2 * 2 ** (-1.0 / 3.0)) <= 1e-9
        assert abs(halfwidth - 1.5874010519682) <= 1e-9
        center = (spec.upper + spec.lower) / 2.0
        assert abs(center - (-0.8139)) <= 1e-12


def test_adaptation_scenario_replay():
    with criterion("adaptation-scenario-replay"):
        start = time.monotonic()
        config = AdaptConfig(epochs=10, steps_per_epoch=8, dc_batch=4, inner_iters=3)
        result = run_offline_adaptation(
            config,
            training_stream(),
            validation_set(),
            ScriptedReformulator(),
            ScriptedReflector(),
            PassthroughCoder(),
        )
        elapsed = time.monotonic() - start
        assert elapsed < 10.0, f"took {elapsed:.1f}s"

        def outcomes(epoch, step):
            return [
                ev["outcome"]
                for ev in result.trace
                if ev.get("epoch") == epoch and ev.get("step") == step and "outcome" in ev
            ]

        assert outcomes(1, 1) == ["training fail", "DC fail", "DC pass"]
        assert outcomes(4, 2) == ["DC fail", "DC pass"]
        assert outcomes(7, 2) == ["DC pass"]
        commits = [
            (ev["epoch"], ev["step"], ev["iteration"])
            for ev in result.trace
            if ev["event"] == "commit"
        ]
        assert commits == [(1, 1, 3), (4, 2, 2), (7, 2, 1)]
        rollbacks = [ev for ev in result.trace if ev["event"] == "rollback"]
        assert [ev["epoch"] for ev in rollbacks] == [7]
        snapshot6 = [
            ev for ev in result.trace if ev["event"] == "snapshot" and ev["epoch"] == 6
        ][0]
        assert rollbacks[0]["memory"] == snapshot6["memory"]  # bitwise restoration
        restored = memory_from_json(rollbacks[0]["memory"])
        assert [(e.experience_id, e.content) for e in restored.entries] == [
            (1, "alpha-ok"),
            (2, "beta-ok"),
        ]


def _uncertainty_bites_nominal(inst) -> bool:
    """True when the nominal optimum is robust-infeasible or its worst-case
    objective deviates; on such instances a nominal-only answer must fail."""
    sol = solve_lp(nominal_lp(inst))
    x = sol.x
    for row in inst.rows:
        if isinstance(row.uncertainty, Deterministic):
            continue
        wc = worst_case_row_value(row, x)
        if row.sense == LE and wc > row.b + 1e-9:
            return True
        if row.sense != LE and wc < row.b - 1e-9:
            return True
    if not isinstance(inst.objective_uncertainty, Deterministic):
        inner = "max" if inst.sense == "min" else "min"
        dev, _ = deviation_extremum(inst.objective_uncertainty, x, inner)
        if abs(dev) > 1e-9:
            return True
    return False


def test_pipeline_sanity(random64, tmp_path):
    with criterion("pipeline-sanity"):
        data = random64
        records, summary = run_pipeline(
            data,
            OracleReformulator(),
            PassthroughCoder(),
            transcripts_dir=str(tmp_path / "transcripts"),
        )
        assert summary["accuracy"] == 1.0
        assert summary["correct_count"] == 64

        nominal_records, nominal_summary = run_pipeline(
            data, NominalReformulator(), PassthroughCoder()
        )
        bitten = [_uncertainty_bites_nominal(inst) for inst in data]
        assert sum(bitten) >= 60  # the uncertainty is live on nearly every instance
        wrong_on_bitten = [
            rec.correct for rec, bites in zip(nominal_records, bitten) if bites
        ]
        assert wrong_on_bitten and not any(wrong_on_bitten)  # accuracy exactly 0%

        from robustlp.harness import TranscriptReplayAgent

        replay_records, replay_summary = run_pipeline(
            data,
            TranscriptReplayAgent(str(tmp_path / "transcripts"), "reformulator"),
            TranscriptReplayAgent(str(tmp_path / "transcripts"), "coder"),
        )
        assert replay_records == records
        assert replay_summary == summary
