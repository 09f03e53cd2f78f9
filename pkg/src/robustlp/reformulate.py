"""Exact robust counterparts via LP duality, plus an independent oracle.

Each uncertain row's inner worst-case problem is replaced by its LP dual,
producing a flat deterministic LP over the original variables plus per-row
auxiliaries. Sign conventions: the worst case of a <= row is an inner max
(penalty added, stationarity F't = x); of a >= row an inner min (penalty
subtracted, stationarity F't = -x). An uncertain objective is handled by an
epigraph variable for maximization and by direct penalty addition for
minimization.

robust_value_oracle re-derives the robust optimum by delayed constraint
generation over the uncertainty polytopes, giving an independent check on
the reformulation.
"""

from __future__ import annotations

import math

import numpy as np

from .lpcore import (
    EQ,
    GE,
    LE,
    MAX,
    MIN,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    STATUS_UNBOUNDED,
    DeterministicLP,
    LinearConstraint,
    LpSolution,
    VariableDef,
    solve_lp,
)
from .model import Box, Budget, Deterministic, Polyhedral, RobustInstance, RowSpec


class UnsupportedSpec(ValueError):
    """Row shape the reformulator does not accept (uncertain equality)."""


class NoConvergence(RuntimeError):
    """The cutting-plane loop hit its iteration cap before converging."""


class InfeasibleRobust(RuntimeError):
    """The robust feasible set is empty."""


class _LpBuilder:
    def __init__(self, sense: str):
        self.sense = sense
        self.names: list[str] = []
        self.index: dict[str, int] = {}
        self.lo: list[float] = []
        self.hi: list[float] = []
        self.obj: dict[str, float] = {}
        self.cons: list[tuple[dict[str, float], str, float]] = []

    def var(self, name: str, lo: float, hi: float) -> str:
        self.index[name] = len(self.names)
        self.names.append(name)
        self.lo.append(lo)
        self.hi.append(hi)
        return name

    def con(self, coeffs: dict[str, float], sense: str, rhs: float) -> None:
        self.cons.append((coeffs, sense, rhs))

    def build(self) -> DeterministicLP:
        n = len(self.names)
        variables = tuple(
            VariableDef(self.names[j], self.lo[j], self.hi[j]) for j in range(n)
        )
        objective = [0.0] * n
        for name, coef in self.obj.items():
            objective[self.index[name]] = coef
        constraints = []
        for coeffs, sense, rhs in self.cons:
            row = [0.0] * n
            for name, coef in coeffs.items():
                row[self.index[name]] += coef
            constraints.append(LinearConstraint(tuple(row), sense, float(rhs)))
        return DeterministicLP(self.sense, tuple(objective), variables, tuple(constraints))


def assemble_poly_system(spec: Polyhedral) -> tuple[np.ndarray, np.ndarray]:
    """Stack F with the per-component bound rows into one <= system.

    Row order: the k rows of F, then for each support component (in support
    order) its upper-bound row followed by its lower-bound row, skipping
    infinite sides. This is the row order the auxiliary duals are named by.
    """
    d = len(spec.support)
    rows = [list(r) for r in spec.F]
    rhs = list(spec.g)
    for s in range(d):
        if spec.upper is not None:
            e = [0.0] * d
            e[s] = 1.0
            rows.append(e)
            rhs.append(spec.upper)
        if spec.lower is not None:
            e = [0.0] * d
            e[s] = -1.0
            rows.append(e)
            rhs.append(-spec.lower)
    return np.array(rows, dtype=float), np.array(rhs, dtype=float)


def _add_box_budget_support_rows(b: "_LpBuilder", label, spec, x_names, z0=None):
    """Rows z0 + t_j >= +-delta_j x_j shared by the box and budget duals."""
    for s, j in enumerate(spec.support):
        tj = f"{label}_t_{j}" if z0 is None else f"{label}_z_{j}"
        base = {tj: 1.0} if z0 is None else {tj: 1.0, z0: 1.0}
        b.con({**base, x_names[j]: -spec.delta[s]}, GE, 0.0)
        b.con({**base, x_names[j]: spec.delta[s]}, GE, 0.0)


def _penalty_terms(b: "_LpBuilder", label: str, spec, x_names, sign: float) -> dict[str, float]:
    """Create the auxiliaries for one uncertain row; return its penalty terms.

    The returned dict maps auxiliary names to coefficients such that adding
    sign * penalty to the nominal row expression yields the robust
    counterpart row. Stationarity uses F't lambda (+ mu) = sign * x.
    """
    if isinstance(spec, Box):
        terms = {}
        for j in spec.support:
            b.var(f"{label}_t_{j}", 0.0, math.inf)
            terms[f"{label}_t_{j}"] = 1.0
        _add_box_budget_support_rows(b, label, spec, x_names)
        return terms
    if isinstance(spec, Budget):
        z0 = b.var(f"{label}_z0", 0.0, math.inf)
        terms = {z0: spec.gamma}
        for j in spec.support:
            b.var(f"{label}_z_{j}", 0.0, math.inf)
            terms[f"{label}_z_{j}"] = 1.0
        _add_box_budget_support_rows(b, label, spec, x_names, z0=z0)
        return terms
    if isinstance(spec, Polyhedral):
        F, g = assemble_poly_system(spec)
        lams = [b.var(f"{label}_lam_{r}", 0.0, math.inf) for r in range(len(g))]
        terms = {lam: float(gr) for lam, gr in zip(lams, g)}
        for s, j in enumerate(spec.support):
            row = {lam: float(F[r, s]) for r, lam in enumerate(lams) if F[r, s] != 0.0}
            row[x_names[j]] = -sign
            b.con(row, EQ, 0.0)
        for p in spec.zero_eq:
            mu = b.var(f"{label}_mu_{p}", -math.inf, math.inf)
            b.con({mu: 1.0, x_names[p]: -sign}, EQ, 0.0)
        return terms
    raise UnsupportedSpec(f"cannot dualize {type(spec).__name__}")


def reformulate(inst: RobustInstance) -> DeterministicLP:
    """Derive the deterministic robust counterpart of an instance.

    The result contains the original variables first (so a solution's
    leading n components are the decision vector), then per-row auxiliaries
    named "{row}_{kind}_{index}" with row labels "obj" and "con1".."conm".
    """
    b = _LpBuilder(inst.sense)
    x_l, x_u = inst.bounds
    x_names = [b.var(f"x{j + 1}", x_l, x_u) for j in range(inst.n)]

    obj_spec = inst.objective_uncertainty
    nominal_obj = {x_names[j]: c for j, c in enumerate(inst.c_nom) if c != 0.0}
    if isinstance(obj_spec, Deterministic):
        b.obj = dict(nominal_obj)
    elif inst.sense == MIN:
        terms = _penalty_terms(b, "obj", obj_spec, x_names, sign=1.0)
        b.obj = dict(nominal_obj)
        for name, coef in terms.items():
            b.obj[name] = b.obj.get(name, 0.0) + coef
    else:
        epi = b.var("obj_t", -math.inf, math.inf)
        b.obj = {epi: 1.0}
        terms = _penalty_terms(b, "obj", obj_spec, x_names, sign=-1.0)
        row = {epi: 1.0}
        for name, coef in nominal_obj.items():
            row[name] = row.get(name, 0.0) - coef
        for name, coef in terms.items():
            row[name] = row.get(name, 0.0) + coef
        b.con(row, LE, 0.0)

    for i, row in enumerate(inst.rows):
        label = f"con{i + 1}"
        nominal = {x_names[j]: a for j, a in enumerate(row.a_nom) if a != 0.0}
        if isinstance(row.uncertainty, Deterministic):
            b.con(nominal, row.sense, row.b)
            continue
        if row.sense == EQ:
            raise UnsupportedSpec(f"row {i}: uncertain equality row")
        sign = 1.0 if row.sense == LE else -1.0
        terms = _penalty_terms(b, label, row.uncertainty, x_names, sign=sign)
        combined = dict(nominal)
        for name, coef in terms.items():
            combined[name] = combined.get(name, 0.0) + sign * coef
        b.con(combined, row.sense, row.b)

    return b.build()


def nominal_lp(inst: RobustInstance) -> DeterministicLP:
    """The instance with all uncertainty stripped."""
    b = _LpBuilder(inst.sense)
    x_l, x_u = inst.bounds
    x_names = [b.var(f"x{j + 1}", x_l, x_u) for j in range(inst.n)]
    b.obj = {x_names[j]: c for j, c in enumerate(inst.c_nom) if c != 0.0}
    for row in inst.rows:
        b.con({x_names[j]: a for j, a in enumerate(row.a_nom) if a != 0.0}, row.sense, row.b)
    return b.build()


def deviation_extremum(spec, x, inner: str) -> tuple[float, np.ndarray]:
    """Extremal value of sum_j zeta_j x_j over the uncertainty set.

    Returns (value, zeta) with zeta over the support coordinates. Box is
    analytic; budget and polyhedral sets are solved as inner LPs.
    """
    xs = np.asarray([x[j] for j in spec.support], dtype=float)
    d = len(xs)
    sgn = 1.0 if inner == "max" else -1.0
    if isinstance(spec, Box):
        delta = np.asarray(spec.delta)
        zeta = sgn * delta * np.sign(xs)
        return float(zeta @ xs), zeta
    if isinstance(spec, Budget):
        delta = np.asarray(spec.delta)
        variables = [(f"u{s}", -1.0, 1.0) for s in range(d)]
        variables += [(f"w{s}", 0.0, 1.0) for s in range(d)]
        cons = []
        for s in range(d):
            row = [0.0] * (2 * d)
            row[d + s] = 1.0
            row[s] = -1.0
            cons.append((tuple(row), GE, 0.0))
            row2 = [0.0] * (2 * d)
            row2[d + s] = 1.0
            row2[s] = 1.0
            cons.append((tuple(row2), GE, 0.0))
        budget_row = [0.0] * d + [1.0] * d
        cons.append((tuple(budget_row), LE, spec.gamma))
        obj = list(delta * xs) + [0.0] * d
        from .lpcore import make_lp

        lp = make_lp(MAX if inner == "max" else MIN, obj, variables, cons)
        sol = solve_lp(lp)
        if sol.status != STATUS_OPTIMAL:  # pragma: no cover - compact polytope
            raise RuntimeError(f"budget inner LP returned {sol.status}")
        u = np.asarray(sol.x[:d])
        zeta = delta * u
        return float(sol.objective_value), zeta
    if isinstance(spec, Polyhedral):
        from .lpcore import make_lp

        lo = -math.inf if spec.lower is None else spec.lower
        hi = math.inf if spec.upper is None else spec.upper
        variables = [(f"z{s}", lo, hi) for s in range(d)]
        cons = [(tuple(row), LE, g) for row, g in zip(spec.F, spec.g)]
        lp = make_lp(MAX if inner == "max" else MIN, list(xs), variables, cons)
        sol = solve_lp(lp)
        if sol.status == STATUS_INFEASIBLE:
            raise InfeasibleRobust("empty polyhedral uncertainty set")
        if sol.status == STATUS_UNBOUNDED:
            raise InfeasibleRobust("unbounded worst case over polyhedral set")
        zeta = np.asarray(sol.x)
        return float(sol.objective_value), zeta
    raise UnsupportedSpec(f"no inner problem for {type(spec).__name__}")


def worst_case_row_value(row: RowSpec, x) -> float:
    """Worst-case left-hand side of an uncertain row at a fixed point.

    Inner max for <= rows, inner min for >= rows.
    """
    if isinstance(row.uncertainty, Deterministic):
        raise UnsupportedSpec("row is deterministic")
    if row.sense == EQ:
        raise UnsupportedSpec("uncertain equality row")
    inner = "max" if row.sense == LE else "min"
    dev, _ = deviation_extremum(row.uncertainty, x, inner)
    return float(np.dot(row.a_nom, x)) + dev


def _zeta_full(spec, zeta_support, n: int) -> np.ndarray:
    full = np.zeros(n)
    for s, j in enumerate(spec.support):
        full[j] = zeta_support[s]
    return full


def center_scenario(spec, n: int) -> np.ndarray:
    """A realization inside the uncertainty set, used to seed the oracle."""
    if isinstance(spec, (Box, Budget)):
        return np.zeros(n)
    if isinstance(spec, Polyhedral):
        if spec.interior is not None:
            return _zeta_full(spec, np.asarray(spec.interior), n)
        _, zeta = deviation_extremum(spec, np.zeros(n), "max")
        return _zeta_full(spec, zeta, n)
    raise UnsupportedSpec(f"no scenario for {type(spec).__name__}")


def robust_value_oracle(
    inst: RobustInstance, max_iters: int = 200, tol: float = 1e-7
) -> float:
    """Robust optimum by delayed constraint generation, independent of duality.

    Solves a master relaxation, separates each uncertain row by its inner
    LP at the current point, adds violated scenario rows, and repeats until
    every violation is below tol.
    """
    n = inst.n
    x_l, x_u = inst.bounds
    uncertain_obj = inst.has_uncertain_objective()
    variables = [(f"x{j + 1}", x_l, x_u) for j in range(n)]
    if uncertain_obj:
        variables.append(("t", -math.inf, math.inf))
    width = n + (1 if uncertain_obj else 0)

    cons: list[tuple[tuple, str, float]] = []

    def x_row(coefs, sense, rhs):
        row = list(coefs) + ([0.0] if uncertain_obj else [])
        cons.append((tuple(row), sense, rhs))

    def obj_cut(zeta):
        # t >= (c + zeta) . x for MIN;  t <= ... for MAX
        row = [-(c + z) for c, z in zip(inst.c_nom, zeta)] + [1.0]
        cons.append((tuple(row), GE if inst.sense == MIN else LE, 0.0))

    for row in inst.rows:
        if isinstance(row.uncertainty, Deterministic):
            x_row(row.a_nom, row.sense, row.b)

    if uncertain_obj:
        obj_cut(center_scenario(inst.objective_uncertainty, n))
        objective = [0.0] * n + [1.0]
    else:
        objective = list(inst.c_nom)

    from .lpcore import make_lp

    for _ in range(max_iters):
        lp = make_lp(inst.sense, objective, variables, cons)
        sol = solve_lp(lp)
        if sol.status == STATUS_INFEASIBLE:
            raise InfeasibleRobust("master problem infeasible")
        if sol.status == STATUS_UNBOUNDED:  # pragma: no cover - box bounds
            raise NoConvergence("master problem unbounded")
        xh = np.asarray(sol.x[:n])
        violated = False

        for row in inst.rows:
            spec = row.uncertainty
            if isinstance(spec, Deterministic):
                continue
            inner = "max" if row.sense == LE else "min"
            dev, zeta = deviation_extremum(spec, xh, inner)
            wc = float(np.dot(row.a_nom, xh)) + dev
            gap = wc - row.b if row.sense == LE else row.b - wc
            if gap > tol:
                violated = True
                full = _zeta_full(spec, zeta, n)
                x_row(tuple(np.asarray(row.a_nom) + full), row.sense, row.b)

        if uncertain_obj:
            inner = "max" if inst.sense == MIN else "min"
            dev, zeta = deviation_extremum(inst.objective_uncertainty, xh, inner)
            wc_obj = float(np.dot(inst.c_nom, xh)) + dev
            t_hat = float(sol.x[n])
            gap = wc_obj - t_hat if inst.sense == MIN else t_hat - wc_obj
            if gap > tol:
                violated = True
                obj_cut(_zeta_full(inst.objective_uncertainty, zeta, n))

        if not violated:
            return float(sol.objective_value)

    raise NoConvergence(f"no convergence within {max_iters} iterations")


def solve_robust(inst: RobustInstance) -> LpSolution:
    """Reformulate and solve; the solution x is truncated to the decision vars."""
    sol = solve_lp(reformulate(inst))
    if sol.status != STATUS_OPTIMAL:
        return sol
    return LpSolution(
        status=sol.status, x=sol.x[: inst.n], objective_value=sol.objective_value
    )
