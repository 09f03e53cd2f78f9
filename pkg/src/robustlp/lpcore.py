"""Dense LP representation and a two-phase simplex solver.

The solver works directly on general variable bounds (finite, one-sided or
free) instead of splitting variables, so reported solutions are exact in the
original coordinates. Bland's rule is used for both the entering and leaving
choices, which rules out cycling. Everything here is pure and deterministic:
the same model always produces the bit-identical solution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MIN = "min"
MAX = "max"
LE = "<="
GE = ">="
EQ = "="

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"

FEAS_TOL = 1e-9

_RC_TOL = 1e-9  # reduced-cost zero tolerance
_PIV_TOL = 1e-11  # smallest usable pivot / direction entry
_PHASE1_TOL = 1e-8  # declare infeasible above this artificial mass


class MalformedModel(ValueError):
    """The model violates a structural invariant (dimensions, bounds, NaNs)."""


class NumericalFailure(RuntimeError):
    """The pivoting loop exceeded its iteration guard."""


class DimensionMismatch(ValueError):
    """A candidate point has the wrong number of components."""


@dataclass(frozen=True)
class VariableDef:
    name: str
    lower: float  # may be -inf
    upper: float  # may be +inf


@dataclass(frozen=True)
class LinearConstraint:
    coefficients: tuple[float, ...]
    sense: str  # one of LE, GE, EQ
    rhs: float


@dataclass(frozen=True)
class DeterministicLP:
    sense: str  # MIN or MAX
    objective: tuple[float, ...]
    variables: tuple[VariableDef, ...]
    constraints: tuple[LinearConstraint, ...]


@dataclass(frozen=True)
class LpSolution:
    status: str
    x: tuple[float, ...] | None = None
    objective_value: float | None = None


def make_lp(sense, objective, variables, constraints) -> DeterministicLP:
    """Build a DeterministicLP from plain lists, normalizing to tuples."""
    vs = tuple(
        v if isinstance(v, VariableDef) else VariableDef(str(v[0]), float(v[1]), float(v[2]))
        for v in variables
    )
    cons = tuple(
        c
        if isinstance(c, LinearConstraint)
        else LinearConstraint(tuple(float(a) for a in c[0]), c[1], float(c[2]))
        for c in constraints
    )
    return DeterministicLP(sense, tuple(float(a) for a in objective), vs, cons)


def validate_lp(lp: DeterministicLP) -> None:
    n = len(lp.variables)
    if lp.sense not in (MIN, MAX):
        raise MalformedModel(f"unknown sense {lp.sense!r}")
    if len(lp.objective) != n:
        raise MalformedModel(f"objective has {len(lp.objective)} coefficients for {n} variables")
    if any(not math.isfinite(a) for a in lp.objective):
        raise MalformedModel("non-finite objective coefficient")
    names = [v.name for v in lp.variables]
    if len(set(names)) != n:
        raise MalformedModel("duplicate variable names")
    for v in lp.variables:
        if math.isnan(v.lower) or math.isnan(v.upper):
            raise MalformedModel(f"NaN bound on {v.name}")
        if v.lower > v.upper:
            raise MalformedModel(f"empty bound interval on {v.name}")
        if v.lower == math.inf or v.upper == -math.inf:
            raise MalformedModel(f"variable {v.name} pinned at infinity")
    for i, con in enumerate(lp.constraints):
        if len(con.coefficients) != n:
            raise MalformedModel(f"constraint {i} has {len(con.coefficients)} coefficients")
        if con.sense not in (LE, GE, EQ):
            raise MalformedModel(f"constraint {i} has unknown sense {con.sense!r}")
        if not math.isfinite(con.rhs):
            raise MalformedModel(f"constraint {i} has non-finite rhs")
        if any(not math.isfinite(a) for a in con.coefficients):
            raise MalformedModel(f"constraint {i} has non-finite coefficient")


# nonbasic variable states
_AT_LO = 0
_AT_UP = 1
_FREE = 2


def _initial_value(lo: float, hi: float) -> tuple[float, int]:
    if math.isfinite(lo):
        return lo, _AT_LO
    if math.isfinite(hi):
        return hi, _AT_UP
    return 0.0, _FREE


def _simplex_phase(A, b, c, lo, hi, basis, x, state, max_iters):
    """Run Bland-rule simplex on equality form with bounded variables.

    Mutates basis, x and state in place. Returns STATUS_OPTIMAL or
    STATUS_UNBOUNDED.
    """
    m, total = A.shape
    basic_mask = np.zeros(total, dtype=bool)
    basic_mask[basis] = True

    for _ in range(max_iters):
        if m:
            B = A[:, basis]
            xs = x.copy()
            xs[basis] = 0.0
            resid = b - A @ xs
            try:
                xB = np.linalg.solve(B, resid)
                y = np.linalg.solve(B.T, c[basis])
            except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded pivots
                raise NumericalFailure(f"singular basis: {exc}") from exc
            x[basis] = xB
            d = c - A.T @ y
        else:
            d = c.copy()

        entering = -1
        sigma = 0.0
        for j in range(total):
            if basic_mask[j]:
                continue
            dj = d[j]
            st = state[j]
            if st == _AT_LO and dj < -_RC_TOL and hi[j] > lo[j]:
                entering, sigma = j, 1.0
                break
            if st == _AT_UP and dj > _RC_TOL and hi[j] > lo[j]:
                entering, sigma = j, -1.0
                break
            if st == _FREE and abs(dj) > _RC_TOL:
                entering, sigma = j, (1.0 if dj < 0 else -1.0)
                break
        if entering < 0:
            return STATUS_OPTIMAL

        if m:
            w = np.linalg.solve(A[:, basis], A[:, entering])
        else:
            w = np.zeros(0)

        t_best = math.inf
        leave_row = -1
        for i in range(m):
            delta = sigma * w[i]
            bi = basis[i]
            if delta > _PIV_TOL and math.isfinite(lo[bi]):
                t = (x[bi] - lo[bi]) / delta
            elif delta < -_PIV_TOL and math.isfinite(hi[bi]):
                t = (hi[bi] - x[bi]) / (-delta)
            else:
                continue
            if t < 0.0:
                t = 0.0
            if t < t_best - 1e-12:
                t_best, leave_row = t, i
            elif t <= t_best + 1e-12 and leave_row >= 0 and bi < basis[leave_row]:
                leave_row = i

        own = hi[entering] - lo[entering]  # entering may run to its other bound
        if leave_row < 0 and not math.isfinite(own):
            return STATUS_UNBOUNDED
        if math.isfinite(own) and own < t_best - 1e-12:
            x[entering] += sigma * own
            state[entering] = _AT_UP if sigma > 0 else _AT_LO
            continue

        t = t_best
        leaving = basis[leave_row]
        x[entering] += sigma * t
        for i in range(m):
            x[basis[i]] -= sigma * t * w[i]
        delta = sigma * w[leave_row]
        state[leaving] = _AT_LO if delta > 0 else _AT_UP
        x[leaving] = lo[leaving] if delta > 0 else hi[leaving]
        basic_mask[leaving] = False
        basic_mask[entering] = True
        basis[leave_row] = entering

    raise NumericalFailure("simplex iteration guard exceeded")


def solve_lp(lp: DeterministicLP, max_iters: int | None = None) -> LpSolution:
    """Solve an LP, returning status plus the optimal point and value.

    Optimal solutions satisfy every row and bound within FEAS_TOL and
    objective_value equals objective . x exactly as evaluated on the
    returned point.
    """
    validate_lp(lp)
    n = len(lp.variables)
    m = len(lp.constraints)
    total = n + 2 * m  # structural + slacks + artificials

    c_obj = np.array(lp.objective, dtype=float)
    c_int = -c_obj if lp.sense == MAX else c_obj.copy()

    A = np.zeros((m, total))
    b = np.zeros(m)
    lo = np.full(total, -math.inf)
    hi = np.full(total, math.inf)
    for j, v in enumerate(lp.variables):
        lo[j], hi[j] = v.lower, v.upper
    for i, con in enumerate(lp.constraints):
        A[i, :n] = con.coefficients
        b[i] = con.rhs
        s = n + i
        A[i, s] = 1.0
        if con.sense == LE:
            lo[s], hi[s] = 0.0, math.inf
        elif con.sense == GE:
            lo[s], hi[s] = -math.inf, 0.0
        else:
            lo[s], hi[s] = 0.0, 0.0

    x = np.zeros(total)
    state = np.zeros(total, dtype=int)
    for j in range(n + m):
        x[j], state[j] = _initial_value(lo[j], hi[j])

    art = [n + m + i for i in range(m)]
    resid = b - A[:, : n + m] @ x[: n + m]
    for i in range(m):
        A[i, art[i]] = 1.0 if resid[i] >= 0 else -1.0
        x[art[i]] = abs(resid[i])
        lo[art[i]], hi[art[i]] = 0.0, math.inf
        state[art[i]] = _AT_LO

    if max_iters is None:
        max_iters = max(20_000, 200 * (m + total))

    basis = list(art)
    c1 = np.zeros(total)
    c1[art] = 1.0
    status = _simplex_phase(A, b, c1, lo, hi, basis, x, state, max_iters)
    if status != STATUS_OPTIMAL:  # pragma: no cover - phase 1 is bounded below
        raise NumericalFailure("phase 1 reported unbounded")
    if float(x[art].sum()) > _PHASE1_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
        return LpSolution(status=STATUS_INFEASIBLE)

    # drive artificials out of the basis; fix them at zero either way
    art_set = set(art)
    for row in range(m):
        if basis[row] not in art_set:
            continue
        B = A[:, basis]
        swapped = False
        for j in range(n + m):
            if j in basis:
                continue
            w = np.linalg.solve(B, A[:, j])
            if abs(w[row]) > 1e-7:
                basis[row] = j
                swapped = True
                break
        if not swapped:
            pass  # redundant row: artificial stays basic, pinned at zero below
    for a in art:
        lo[a] = hi[a] = 0.0
        if a not in basis:
            x[a] = 0.0
            state[a] = _AT_LO

    c2 = np.zeros(total)
    c2[:n] = c_int
    status = _simplex_phase(A, b, c2, lo, hi, basis, x, state, max_iters)
    if status == STATUS_UNBOUNDED:
        return LpSolution(status=STATUS_UNBOUNDED)

    xs = tuple(float(v) for v in x[:n])
    value = float(np.dot(c_obj, x[:n]))
    return LpSolution(status=STATUS_OPTIMAL, x=xs, objective_value=value)


def check_feasible(
    lp: DeterministicLP, x: Sequence[float], tol: float = FEAS_TOL
) -> tuple[bool, list[str]]:
    """Check a point against every constraint and bound.

    Returns (ok, violations); violations are labelled "con{i}" for
    constraint rows and "lb:{name}" / "ub:{name}" for bounds.
    """
    n = len(lp.variables)
    if len(x) != n:
        raise DimensionMismatch(f"point has {len(x)} components, model has {n}")
    xv = np.asarray(x, dtype=float)
    violated: list[str] = []
    for i, con in enumerate(lp.constraints):
        lhs = float(np.dot(con.coefficients, xv))
        if con.sense == LE and lhs > con.rhs + tol:
            violated.append(f"con{i}")
        elif con.sense == GE and lhs < con.rhs - tol:
            violated.append(f"con{i}")
        elif con.sense == EQ and abs(lhs - con.rhs) > tol:
            violated.append(f"con{i}")
    for j, v in enumerate(lp.variables):
        if xv[j] < v.lower - tol:
            violated.append(f"lb:{v.name}")
        if xv[j] > v.upper + tol:
            violated.append(f"ub:{v.name}")
    return (not violated, violated)


def lp_dual(lp: DeterministicLP) -> DeterministicLP:
    """Build the LP dual; its optimal value equals the primal's.

    Rows and finite bounds are normalized to a >= system with nonnegative
    multipliers (equality rows get free multipliers); the dual constraints
    are the stationarity equations, one per primal variable.
    """
    validate_lp(lp)
    n = len(lp.variables)
    flip = lp.sense == MAX
    c = [-a for a in lp.objective] if flip else list(lp.objective)

    rows: list[tuple[list[float], float, bool]] = []  # (g, h, free_mult)
    for con in lp.constraints:
        coef = list(con.coefficients)
        if con.sense == LE:
            rows.append(([-a for a in coef], -con.rhs, False))
        elif con.sense == GE:
            rows.append((coef, con.rhs, False))
        else:
            rows.append((coef, con.rhs, True))
    for j, v in enumerate(lp.variables):
        if math.isfinite(v.lower):
            g = [0.0] * n
            g[j] = 1.0
            rows.append((g, v.lower, False))
        if math.isfinite(v.upper):
            g = [0.0] * n
            g[j] = -1.0
            rows.append((g, -v.upper, False))

    k = len(rows)
    dual_vars = [
        VariableDef(f"y{r}", -math.inf if rows[r][2] else 0.0, math.inf) for r in range(k)
    ]
    dual_obj = [rows[r][1] for r in range(k)]
    dual_cons = []
    for j in range(n):
        coef = tuple(rows[r][0][j] for r in range(k))
        dual_cons.append(LinearConstraint(coef, EQ, c[j]))
    if flip:
        return DeterministicLP(MIN, tuple(-h for h in dual_obj), tuple(dual_vars), tuple(dual_cons))
    return DeterministicLP(MAX, tuple(dual_obj), tuple(dual_vars), tuple(dual_cons))


def to_rc_json(lp: DeterministicLP) -> dict:
    """Serialize to the RC-JSON wire format (null for infinite bounds)."""
    return {
        "sense": lp.sense,
        "vars": [
            {
                "name": v.name,
                "lb": None if v.lower == -math.inf else v.lower,
                "ub": None if v.upper == math.inf else v.upper,
            }
            for v in lp.variables
        ],
        "obj": list(lp.objective),
        "cons": [
            {"coef": list(c.coefficients), "sense": c.sense, "rhs": c.rhs}
            for c in lp.constraints
        ],
    }


def from_rc_json(data: dict) -> DeterministicLP:
    """Parse the RC-JSON wire format; raises MalformedModel on bad shape."""
    try:
        sense = data["sense"]
        variables = tuple(
            VariableDef(
                str(v["name"]),
                -math.inf if v["lb"] is None else float(v["lb"]),
                math.inf if v["ub"] is None else float(v["ub"]),
            )
            for v in data["vars"]
        )
        objective = tuple(float(a) for a in data["obj"])
        constraints = tuple(
            LinearConstraint(tuple(float(a) for a in c["coef"]), c["sense"], float(c["rhs"]))
            for c in data["cons"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedModel(f"bad RC-JSON: {exc}") from exc
    lp = DeterministicLP(sense, objective, variables, constraints)
    validate_lp(lp)
    return lp


def rc_json_dumps(lp: DeterministicLP) -> str:
    return json.dumps(to_rc_json(lp))


def rc_json_loads(text: str) -> DeterministicLP:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedModel(f"bad RC-JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise MalformedModel("RC-JSON must be a single object")
    return from_rc_json(data)
