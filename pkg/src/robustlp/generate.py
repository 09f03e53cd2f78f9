"""Seeded generation of verified robust-LP benchmark instances.

The pipeline samples a nominal LP around a guaranteed interior point,
assigns exactly one deterministic row among the objective and the n
constraints, samples uncertainty parameters per row, solves the robust
counterpart for ground truth, and filters out unusable candidates.

RNG discipline: one child stream per candidate, derived as
SeedSequence(entropy=seed, spawn_key=(n, candidate_index)), so rejecting
one candidate can never shift the draws of another. Identical configs
produce byte-identical datasets.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .lpcore import EQ, GE, LE, MAX, MIN, STATUS_OPTIMAL, solve_lp
from .model import (
    Box,
    Budget,
    Deterministic,
    GroundTruth,
    Polyhedral,
    RobustInstance,
    RowSpec,
    validate_instance,
)
from .reformulate import reformulate

BOX = "box"
BUDGET = "budget"
POLYHEDRAL = "polyhedral"
ALL_TYPES = (BOX, BUDGET, POLYHEDRAL)

ALL_TEMPLATES = tuple(f"T{b0}{b1}{b2}" for b0 in (0, 1) for b1 in (0, 1) for b2 in (0, 1))

DEGENERACY_TOL = 1e-6
COEF_DECIMALS = 1
RHS_DECIMALS = 2


class RetryExhausted(RuntimeError):
    """Row resampling could not restore strict feasibility after rounding."""


class UnsampleableRow(ValueError):
    """A row with fewer than two nonzero coefficients cannot carry uncertainty."""


class GenerationStalled(RuntimeError):
    """The candidate acceptance rate fell below the configured floor."""


@dataclass(frozen=True)
class GenConfig:
    n: int
    count: int
    seed: int
    uncertainty_types: tuple[str, ...] = ALL_TYPES
    templates: tuple[str, ...] = ALL_TEMPLATES
    hard_mode: bool = False
    max_attempts_per_instance: int = 200

    def __post_init__(self):
        if not 2 <= self.n <= 9:
            raise ValueError("n must be in [2, 9]")
        if self.count < 1:
            raise ValueError("count must be positive")
        if not self.uncertainty_types:
            raise ValueError("at least one uncertainty type required")
        if not self.templates:
            raise ValueError("at least one template required")
        bad = set(self.uncertainty_types) - set(ALL_TYPES)
        if bad:
            raise ValueError(f"unknown uncertainty types {bad}")
        bad = set(self.templates) - set(ALL_TEMPLATES)
        if bad:
            raise ValueError(f"unknown templates {bad}")


def child_rng(seed: int, n: int, candidate: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(n, candidate)))


def _round(v: float, decimals: int) -> float:
    return float(np.round(v, decimals))


def feasible_polytope(d, v0, coef_range, m_rows, rng, max_retries: int = 50):
    """Random inequality system with v0 strictly inside every row.

    Per row: coefficients uniform in coef_range, clipped to |a| >= 0.1 and
    rounded to 1 decimal; for d > 2 a random mask keeps >= 2 nonzeros; the
    rhs is sampled inside the slack interval and rounded to 2 decimals.
    Because rounding can break strictness, each row is re-checked after
    rounding and resampled if needed.

    Returns (A, b, senses) with senses a list of LE / GE.
    """
    lo, hi = float(coef_range[0]), float(coef_range[1])
    if lo >= hi:
        raise ValueError("coefficient range must have lo < hi")
    v0 = np.asarray(v0, dtype=float)
    A = np.zeros((m_rows, d))
    b = np.zeros(m_rows)
    senses: list[str] = []
    for i in range(m_rows):
        for attempt in range(max_retries + 1):
            a = rng.uniform(lo, hi, size=d)
            small = np.abs(a) < 0.1
            a[small] = np.where(a[small] >= 0, 0.1, -0.1)
            a = np.round(a, COEF_DECIMALS)
            if d > 2:
                while True:
                    mask = rng.integers(0, 2, size=d)
                    if mask.sum() >= 2:
                        break
                a = a * mask
            sense = LE if rng.random() < 0.5 else GE
            vi = float(a @ v0)
            slack = float(np.abs(a).sum() * abs(hi))
            if sense == LE:
                bi = _round(rng.uniform(vi, vi + slack), RHS_DECIMALS)
                strict = vi < bi
            else:
                bi = _round(rng.uniform(vi - slack, vi), RHS_DECIMALS)
                strict = vi > bi
            if strict:
                A[i] = a
                b[i] = bi
                senses.append(sense)
                break
        else:
            raise RetryExhausted(f"row {i}: no strictly feasible rounding in {max_retries} tries")
    return A, b, senses


def generate_nominal(config: GenConfig, rng: np.random.Generator):
    """Sample the nominal LP skeleton: objective, rows, bounds, interior point.

    Returns a dict with keys c, sense, rows [(a, sense, b)], bounds, x0, r,
    eq_row (index of the equality row or None).
    """
    n = config.n
    r = _round(rng.uniform(1.0, 10.0), 1)
    tau_x = "a" if config.hard_mode else ("a", "b", "c")[rng.integers(0, 3)]
    if tau_x == "a":
        bounds = (-r, r)
    elif tau_x == "b":
        bounds = (0.0, r)
    else:
        bounds = (-r, 0.0)
    sense = MAX if config.hard_mode else (MIN, MAX)[rng.integers(0, 2)]
    c = np.round(rng.uniform(-10.0, 10.0, size=n), 1)
    x0 = np.round(rng.uniform(bounds[0], bounds[1], size=n), 1)
    A, b, senses = feasible_polytope(n, x0, (-r, r), n, rng)

    eq_row = None
    if n >= 3 and rng.random() < 0.5:
        eq_row = int(rng.integers(0, n))
        senses[eq_row] = EQ
        b[eq_row] = float(A[eq_row] @ x0)  # exact, so x0 stays feasible

    rows = [(A[i].copy(), senses[i], float(b[i])) for i in range(n)]
    return {
        "c": c,
        "sense": sense,
        "rows": rows,
        "bounds": bounds,
        "x0": x0,
        "r": r,
        "eq_row": eq_row,
    }


def assign_uncertainty(n, eq_row, rng, types, hard_mode: bool):
    """Pick the single deterministic row and a type tag for every other row.

    Row 0 is the objective; rows 1..n the constraints. An equality row is
    always the deterministic one; otherwise the choice is uniform over all
    n+1 rows. Hard mode forces polyhedral tags everywhere.
    """
    if eq_row is not None:
        det = eq_row + 1
    else:
        det = int(rng.integers(0, n + 1))  # uniform over {0..n}
    tags = []
    for pos in range(n + 1):
        if pos == det:
            tags.append(None)
        elif hard_mode:
            tags.append(POLYHEDRAL)
        else:
            tags.append(types[rng.integers(0, len(types))])
    return det, tags


def sample_support(a_nom: np.ndarray, rng) -> list[int]:
    nonzero = [j for j, v in enumerate(a_nom) if v != 0.0]
    if len(nonzero) < 2:
        raise UnsampleableRow("row has fewer than 2 nonzero coefficients")
    size = int(rng.integers(2, len(nonzero) + 1))
    picked = rng.choice(len(nonzero), size=size, replace=False)
    return sorted(nonzero[k] for k in picked)


def sample_box_delta(a_nom, support, rng) -> tuple[float, ...]:
    deltas = []
    for j in support:
        delta_rel = rng.uniform(0.05, 0.20)
        deltas.append(max(0.1, _round(delta_rel * abs(a_nom[j]), 1)))
    return tuple(deltas)


def sample_uncertainty_params(a_nom, tag, rng, n, p_r, p_bounds):
    """Sample one row's uncertainty parameters for the given type tag.

    Polyhedral sets come from feasible_polytope around an (unrounded)
    interior point, keeping the first |S|-1 inequality rows; >= rows are
    normalized into <= form. Off-support components are pinned to zero.
    """
    a_nom = np.asarray(a_nom, dtype=float)
    support = sample_support(a_nom, rng)
    if tag == BOX:
        return Box(support=tuple(support), delta=sample_box_delta(a_nom, support, rng))
    if tag == BUDGET:
        delta = sample_box_delta(a_nom, support, rng)
        gamma = _round(rng.uniform(0.0, len(support)), 1)
        return Budget(support=tuple(support), delta=delta, gamma=gamma)
    if tag == POLYHEDRAL:
        d = len(support)
        p_l, p_u = p_bounds
        zeta0 = rng.uniform(p_l, p_u, size=d)  # full precision: must stay strictly interior
        A, b, senses = feasible_polytope(d, zeta0, (-p_r, p_r), d, rng)
        keep = d - 1
        F: list[tuple[float, ...]] = []
        g: list[float] = []
        for i in range(keep):
            if senses[i] == LE:
                F.append(tuple(A[i]))
                g.append(float(b[i]))
            else:
                F.append(tuple(-A[i]))
                g.append(float(-b[i]))
        return Polyhedral(
            support=tuple(support),
            F=tuple(F),
            g=tuple(g),
            lower=p_l,
            upper=p_u,
            zero_eq=tuple(j for j in range(n) if j not in set(support)),
            interior=tuple(zeta0),
        )
    raise ValueError(f"unknown tag {tag!r}")


def _hard_structure_ok(inst: RobustInstance) -> bool:
    senses = [r.sense for r in inst.rows if not isinstance(r.uncertainty, Deterministic)]
    return LE in senses and GE in senses


def hard_conditions(inst: RobustInstance) -> dict[str, bool]:
    """The four structural conditions a hard-configuration instance satisfies."""
    uncertain = [r for r in inst.rows if not isinstance(r.uncertainty, Deterministic)]
    all_poly = all(isinstance(r.uncertainty, Polyhedral) for r in uncertain) and (
        isinstance(inst.objective_uncertainty, (Polyhedral, Deterministic))
    )
    return {
        "all_polyhedral": all_poly,
        "maximize": inst.sense == MAX,
        "mixed_senses": _hard_structure_ok(inst),
        "signed_variables": inst.bounds[0] < 0.0 < inst.bounds[1],
    }


def build_candidate(config: GenConfig, rng, candidate: int) -> RobustInstance | None:
    """Run steps 1-3 for one candidate; None if it fails a structural rule."""
    n = config.n
    nominal = generate_nominal(config, rng)
    det, tags = assign_uncertainty(
        n, nominal["eq_row"], rng, config.uncertainty_types, config.hard_mode
    )
    if all(tag is None for tag in tags):  # pragma: no cover - det row rule forbids it
        return None

    r = nominal["r"]
    p_r = _round(0.1 * r, 1)
    tau_p = ("a", "b", "c")[rng.integers(0, 3)]
    if tau_p == "a":
        p_bounds = (-p_r, p_r)
    elif tau_p == "b":
        p_bounds = (0.0, p_r)
    else:
        p_bounds = (-p_r, 0.0)

    try:
        if tags[0] is None:
            obj_spec: object = Deterministic()
        else:
            obj_spec = sample_uncertainty_params(nominal["c"], tags[0], rng, n, p_r, p_bounds)

        rows = []
        for i, (a, sense, b) in enumerate(nominal["rows"]):
            tag = tags[i + 1]
            if tag is None:
                spec: object = Deterministic()
            else:
                spec = sample_uncertainty_params(a, tag, rng, n, p_r, p_bounds)
            rows.append(RowSpec(a_nom=tuple(a), sense=sense, b=b, uncertainty=spec))
    except UnsampleableRow:
        return None  # e.g. an uncertain objective with < 2 nonzero coefficients

    template = config.templates[rng.integers(0, len(config.templates))]
    inst = RobustInstance(
        id=f"{n}_{candidate}_{template}",
        n=n,
        sense=nominal["sense"],
        c_nom=tuple(nominal["c"]),
        objective_uncertainty=obj_spec,
        rows=tuple(rows),
        bounds=nominal["bounds"],
    )
    if config.hard_mode and not _hard_structure_ok(inst):
        return None
    return inst


def is_degenerate(x_star, bounds, tol: float = DEGENERACY_TOL) -> bool:
    """Every component sits on a bound: a boundary solution with no content."""
    x_l, x_u = bounds
    return all(min(abs(v - x_l), abs(v - x_u)) <= tol for v in x_star)


def solve_and_filter(inst: RobustInstance):
    """Apply the three acceptance checks; returns the ground truth or None.

    Checks: at least one uncertain row, robust counterpart solves to
    optimality, and the solution is not a degenerate boundary point.
    """
    if not inst.uncertain_rows() and not inst.has_uncertain_objective():
        return None
    sol = solve_lp(reformulate(inst))
    if sol.status != STATUS_OPTIMAL:
        return None
    x_star = sol.x[: inst.n]
    if is_degenerate(x_star, inst.bounds):
        return None
    return GroundTruth(x_star=x_star, f_star=sol.objective_value)


def generate_dataset(config: GenConfig, render: bool = True) -> list[RobustInstance]:
    """Produce exactly config.count verified instances for one n."""
    from .render import render_latex, render_robust_extension, template_from_id

    accepted: list[RobustInstance] = []
    candidate = 0
    budget = config.max_attempts_per_instance * config.count
    while len(accepted) < config.count:
        if candidate >= budget:
            raise GenerationStalled(
                f"{len(accepted)}/{config.count} accepted after {candidate} candidates"
            )
        rng = child_rng(config.seed, config.n, candidate)
        inst = build_candidate(config, rng, candidate)
        candidate += 1
        if inst is None:
            continue
        truth = solve_and_filter(inst)
        if truth is None:
            continue
        inst = replace(inst, ground_truth=truth)
        validate_instance(inst)
        if render:
            tid = template_from_id(inst.id.split("_")[-1])
            inst = replace(
                inst,
                latex=render_latex(inst, tid),
                nl_extension=render_robust_extension(inst),
            )
        accepted.append(inst)
    return accepted


def generate_mixed(ns, count, seed, **kwargs) -> list[RobustInstance]:
    """Spread count across several n values (round-robin remainder first)."""
    ns = list(ns)
    base, extra = divmod(count, len(ns))
    out: list[RobustInstance] = []
    for k, n in enumerate(ns):
        c = base + (1 if k < extra else 0)
        if c:
            out.extend(generate_dataset(GenConfig(n=n, count=c, seed=seed, **kwargs)))
    return out
