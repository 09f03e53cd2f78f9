"""Typed representation of robust LP benchmark instances.

A RobustInstance is a nominal LP plus one uncertainty specification per row
(the objective counts as a row). Uncertainty comes in three flavours: box
(per-component deviation bounds), budget (box plus a cap on the sum of
normalized deviations) and polyhedral (a halfspace system over the uncertain
support, with off-support components pinned to zero).

Also hosts the literature-motivated uncertainty sets: percentage box/budget
deviations and four distribution-derived polyhedral sets (CLT, heavy-tail,
and the typical sets of exponential and uniform samples), each reducible to
a Polyhedral spec via two sum constraints plus per-component bounds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Iterable, Union

import numpy as np

from .lpcore import EQ, GE, LE, MAX, MIN


class InvalidInstance(ValueError):
    """A robust instance violates one of its structural invariants."""


class InvalidParams(ValueError):
    """Literature uncertainty parameters are out of range."""


@dataclass(frozen=True)
class Deterministic:
    """No uncertainty on this row."""


@dataclass(frozen=True)
class Box:
    support: tuple[int, ...]
    delta: tuple[float, ...]  # one deviation half-width per support index


@dataclass(frozen=True)
class Budget:
    support: tuple[int, ...]
    delta: tuple[float, ...]
    gamma: float  # cap on sum of |zeta_j| / delta_j


@dataclass(frozen=True)
class Polyhedral:
    support: tuple[int, ...]
    F: tuple[tuple[float, ...], ...]  # k x |support| inequality rows, F zeta <= g
    g: tuple[float, ...]
    lower: float | None  # shared per-component bound, None = unbounded side
    upper: float | None
    zero_eq: tuple[int, ...] = ()  # components pinned to zero outside the support
    interior: tuple[float, ...] | None = None  # strictly feasible point, when known


UncertaintySpec = Union[Deterministic, Box, Budget, Polyhedral]


@dataclass(frozen=True)
class RowSpec:
    a_nom: tuple[float, ...]
    sense: str  # LE, GE or EQ
    b: float
    uncertainty: UncertaintySpec


@dataclass(frozen=True)
class GroundTruth:
    x_star: tuple[float, ...]
    f_star: float


@dataclass(frozen=True)
class RobustInstance:
    id: str
    n: int
    sense: str  # MIN or MAX
    c_nom: tuple[float, ...]
    objective_uncertainty: UncertaintySpec
    rows: tuple[RowSpec, ...]
    bounds: tuple[float, float]  # shared (x_l, x_u) box for every variable
    ground_truth: GroundTruth | None = None
    latex: str | None = None
    nl_extension: str | None = None

    def uncertain_rows(self) -> list[int]:
        return [
            i for i, r in enumerate(self.rows) if not isinstance(r.uncertainty, Deterministic)
        ]

    def has_uncertain_objective(self) -> bool:
        return not isinstance(self.objective_uncertainty, Deterministic)


def _check_spec(spec: UncertaintySpec, nonzero: set[int], where: str) -> None:
    if isinstance(spec, Deterministic):
        return
    support = spec.support
    if len(support) < 2:
        raise InvalidInstance(f"{where}: support smaller than 2")
    if len(set(support)) != len(support):
        raise InvalidInstance(f"{where}: duplicate support indices")
    if not set(support) <= nonzero:
        raise InvalidInstance(f"{where}: support outside nonzero positions")
    if isinstance(spec, (Box, Budget)):
        if len(spec.delta) != len(support):
            raise InvalidInstance(f"{where}: delta length != support size")
        if any(d <= 0 for d in spec.delta):
            raise InvalidInstance(f"{where}: nonpositive deviation")
        if isinstance(spec, Budget) and not 0.0 <= spec.gamma <= len(support):
            raise InvalidInstance(f"{where}: gamma outside [0, |support|]")
    else:
        k = len(spec.F)
        if len(spec.g) != k:
            raise InvalidInstance(f"{where}: g length != F row count")
        if any(len(row) != len(support) for row in spec.F):
            raise InvalidInstance(f"{where}: F row width != support size")
        if spec.lower is not None and spec.upper is not None and spec.lower > spec.upper:
            raise InvalidInstance(f"{where}: empty component bound interval")
        if set(spec.zero_eq) & set(support):
            raise InvalidInstance(f"{where}: zero_eq overlaps support")
        if spec.interior is not None:
            z = np.asarray(spec.interior)
            if len(z) != len(support):
                raise InvalidInstance(f"{where}: interior point length != support size")
            if k and not np.all(np.asarray(spec.F) @ z < np.asarray(spec.g)):
                raise InvalidInstance(f"{where}: interior point not strictly inside F zeta < g")
            if spec.lower is not None and not np.all(z > spec.lower):
                raise InvalidInstance(f"{where}: interior point touches lower bound")
            if spec.upper is not None and not np.all(z < spec.upper):
                raise InvalidInstance(f"{where}: interior point touches upper bound")


def validate_instance(inst: RobustInstance) -> None:
    """Check every structural invariant; raises InvalidInstance on failure."""
    n = inst.n
    if n < 1:
        raise InvalidInstance("n must be positive")
    if inst.sense not in (MIN, MAX):
        raise InvalidInstance(f"unknown sense {inst.sense!r}")
    if len(inst.c_nom) != n:
        raise InvalidInstance("objective length != n")
    x_l, x_u = inst.bounds
    if not (math.isfinite(x_l) and math.isfinite(x_u) and x_l <= x_u):
        raise InvalidInstance("bounds must be a finite ordered pair")

    det_count = 1 if isinstance(inst.objective_uncertainty, Deterministic) else 0
    _check_spec(
        inst.objective_uncertainty,
        {j for j, c in enumerate(inst.c_nom) if c != 0.0},
        "objective",
    )
    for i, row in enumerate(inst.rows):
        if len(row.a_nom) != n:
            raise InvalidInstance(f"row {i}: coefficient length != n")
        if row.sense not in (LE, GE, EQ):
            raise InvalidInstance(f"row {i}: unknown sense {row.sense!r}")
        if not math.isfinite(row.b):
            raise InvalidInstance(f"row {i}: non-finite rhs")
        nonzero = {j for j, a in enumerate(row.a_nom) if a != 0.0}
        if n > 2 and len(nonzero) < 2:
            raise InvalidInstance(f"row {i}: fewer than 2 nonzero coefficients")
        det = isinstance(row.uncertainty, Deterministic)
        det_count += 1 if det else 0
        if row.sense == EQ and not det:
            raise InvalidInstance(f"row {i}: equality row must be deterministic")
        _check_spec(row.uncertainty, nonzero, f"row {i}")
    if det_count != 1:
        raise InvalidInstance(f"expected exactly one deterministic row, found {det_count}")


# ---------------------------------------------------------------------------
# literature-motivated uncertainty sets


@dataclass(frozen=True)
class BoxPct:
    p: float  # relative deviation, e.g. 0.001 for 0.1%


@dataclass(frozen=True)
class BudgetPct:
    p: float
    gamma_b: float  # budget threshold, a fraction of m resolved to a value


@dataclass(frozen=True)
class CLT:
    mu: float
    sigma: float
    m: int
    gamma: float = 2.0


@dataclass(frozen=True)
class HeavyTail:
    mu: float
    m: int
    alpha: float = 1.5
    gamma: float = 2.0


@dataclass(frozen=True)
class TypicalExp:
    lam: float
    m: int
    gamma: float = 2.0


@dataclass(frozen=True)
class TypicalUniform:
    a: float
    b: float
    m: int
    gamma: float = 2.0


LiteratureUncertainty = Union[BoxPct, BudgetPct, CLT, HeavyTail, TypicalExp, TypicalUniform]


def qualifying_support(coefficients: Iterable[float]) -> list[int]:
    """Positions eligible for literature uncertainty: nonzero and not +-1."""
    return [j for j, a in enumerate(coefficients) if a != 0.0 and abs(a) != 1.0]


def scale_baseline(coefficients: Iterable[float], support: Iterable[int]) -> float:
    """Mean absolute nominal coefficient over the uncertain support."""
    coeffs = list(coefficients)
    idx = list(support)
    if not idx:
        raise InvalidParams("empty support")
    return sum(abs(coeffs[j]) for j in idx) / len(idx)


def _sum_band(m: int, center: float, halfwidth: float) -> tuple[tuple, tuple]:
    ones = tuple(1.0 for _ in range(m))
    neg = tuple(-1.0 for _ in range(m))
    return (ones, neg), (center + halfwidth, -(center - halfwidth))


def literature_to_polyhedral(u: LiteratureUncertainty) -> Polyhedral:
    """Encode a distribution-derived set as two sum constraints plus bounds.

    Symbolic factors (sqrt(m), m**(1/alpha)) are evaluated at full float
    precision, never rounded. The stored interior point is the natural
    center of the set.
    """
    if isinstance(u, (BoxPct, BudgetPct)):
        raise InvalidParams("percentage box/budget sets attach via literature_box/budget")
    m = u.m
    if m < 2:
        raise InvalidParams("m must be at least 2")
    if u.gamma <= 0:
        raise InvalidParams("gamma must be positive")
    if isinstance(u, CLT):
        if u.sigma <= 0:
            raise InvalidParams("sigma must be positive")
        sum_hw = u.gamma * u.sigma * math.sqrt(m)
        comp_hw = sum_hw / m
        F, g = _sum_band(m, m * u.mu, sum_hw)
        lower, upper = u.mu - comp_hw, u.mu + comp_hw
        center = u.mu
    elif isinstance(u, HeavyTail):
        if not 1.0 < u.alpha <= 2.0:
            raise InvalidParams("alpha must be in (1, 2]")
        sum_hw = u.gamma * m ** (1.0 / u.alpha)
        comp_hw = u.gamma * m ** (1.0 / u.alpha - 1.0)
        F, g = _sum_band(m, m * u.mu, sum_hw)
        lower, upper = u.mu - comp_hw, u.mu + comp_hw
        center = u.mu
    elif isinstance(u, TypicalExp):
        if u.lam <= 0:
            raise InvalidParams("lambda must be positive")
        sum_hw = u.gamma * math.sqrt(m) / u.lam
        F, g = _sum_band(m, m / u.lam, sum_hw)
        lower, upper = 0.0, None
        center = 1.0 / u.lam
    elif isinstance(u, TypicalUniform):
        if u.a >= u.b:
            raise InvalidParams("requires a < b")
        sum_hw = u.gamma * math.sqrt(m)
        F, g = _sum_band(m, m * (u.a + u.b) / 2.0, sum_hw)
        lower, upper = u.a, u.b
        center = (u.a + u.b) / 2.0
    else:  # pragma: no cover
        raise InvalidParams(f"unknown literature set {type(u).__name__}")
    return Polyhedral(
        support=tuple(range(m)),
        F=F,
        g=g,
        lower=lower,
        upper=upper,
        zero_eq=(),
        interior=tuple(center for _ in range(m)),
    )


def literature_box(coefficients, support, p: float) -> Box:
    """Percentage box deviations: delta_j = p * |a_j| over the support."""
    coeffs = list(coefficients)
    if p <= 0:
        raise InvalidParams("p must be positive")
    delta = tuple(p * abs(coeffs[j]) for j in support)
    if any(d == 0 for d in delta):
        raise InvalidParams("support contains a zero coefficient")
    return Box(support=tuple(support), delta=delta)


def literature_budget(coefficients, support, p: float, gamma_fraction: float) -> Budget:
    """Percentage budget set: box deviations plus Gamma_b = fraction * m."""
    box = literature_box(coefficients, support, p)
    if not 0 < gamma_fraction <= 1:
        raise InvalidParams("gamma_fraction must be in (0, 1]")
    return Budget(support=box.support, delta=box.delta, gamma=gamma_fraction * len(box.support))


def sample_literature_params(coefficients, rng: np.random.Generator):
    """Draw one literature uncertainty for a row, or None if it cannot qualify.

    A row qualifies when more than two coefficients are nonzero and not +-1.
    Box percentages come from {0.01%, 0.1%, 1%}; budget thresholds from
    {40%, 60%, 80%} of m; the four polyhedral types share Gamma = 2.0 with
    distribution parameters scaled by the row's mean |a_j|.
    """
    coefficients = list(coefficients)
    support = qualifying_support(coefficients)
    if len(support) <= 2:
        return None
    m = len(support)
    s = scale_baseline(coefficients, support)
    kind = rng.integers(0, 6)
    if kind == 0:
        p = [0.0001, 0.001, 0.01][rng.integers(0, 3)]
        return support, literature_box(coefficients, support, p)
    if kind == 1:
        p = [0.0001, 0.001, 0.01][rng.integers(0, 3)]
        frac = [0.4, 0.6, 0.8][rng.integers(0, 3)]
        return support, literature_budget(coefficients, support, p, frac)
    if kind == 2:
        u = CLT(mu=rng.uniform(-0.1 * s, 0.1 * s), sigma=rng.uniform(0.05 * s, 0.2 * s), m=m)
    elif kind == 3:
        u = HeavyTail(mu=rng.uniform(-0.1 * s, 0.1 * s), m=m)
    elif kind == 4:
        u = TypicalExp(lam=rng.uniform(1.0 / (0.2 * s), 1.0 / (0.05 * s)), m=m)
    else:
        a, b = rng.uniform(-0.2 * s, 0.2 * s), rng.uniform(-0.2 * s, 0.2 * s)
        if a > b:
            a, b = b, a
        elif a == b:  # pragma: no cover - measure zero
            b = a + 0.05 * s
        u = TypicalUniform(a=a, b=b, m=m)
    poly = literature_to_polyhedral(u)
    remapped = replace(
        poly,
        support=tuple(support),
        zero_eq=tuple(j for j in range(len(coefficients)) if j not in set(support)),
    )
    return support, remapped


# ---------------------------------------------------------------------------
# serialization


def _spec_to_dict(spec: UncertaintySpec) -> dict:
    if isinstance(spec, Deterministic):
        return {"type": "deterministic"}
    if isinstance(spec, Box):
        return {"type": "box", "support": list(spec.support), "delta": list(spec.delta)}
    if isinstance(spec, Budget):
        return {
            "type": "budget",
            "support": list(spec.support),
            "delta": list(spec.delta),
            "gamma": spec.gamma,
        }
    return {
        "type": "polyhedral",
        "support": list(spec.support),
        "F": [list(row) for row in spec.F],
        "g": list(spec.g),
        "lower": spec.lower,
        "upper": spec.upper,
        "zero_eq": list(spec.zero_eq),
        "interior": None if spec.interior is None else list(spec.interior),
    }


def _spec_from_dict(d: dict) -> UncertaintySpec:
    kind = d["type"]
    if kind == "deterministic":
        return Deterministic()
    if kind == "box":
        return Box(tuple(d["support"]), tuple(d["delta"]))
    if kind == "budget":
        return Budget(tuple(d["support"]), tuple(d["delta"]), float(d["gamma"]))
    if kind == "polyhedral":
        return Polyhedral(
            support=tuple(d["support"]),
            F=tuple(tuple(row) for row in d["F"]),
            g=tuple(d["g"]),
            lower=d.get("lower"),
            upper=d.get("upper"),
            zero_eq=tuple(d.get("zero_eq", ())),
            interior=None if d.get("interior") is None else tuple(d["interior"]),
        )
    raise InvalidInstance(f"unknown uncertainty type {kind!r}")


def instance_to_dict(inst: RobustInstance) -> dict:
    d = {
        "id": inst.id,
        "n": inst.n,
        "sense": inst.sense,
        "c_nom": list(inst.c_nom),
        "objective_uncertainty": _spec_to_dict(inst.objective_uncertainty),
        "rows": [
            {
                "a_nom": list(r.a_nom),
                "sense": r.sense,
                "b": r.b,
                "uncertainty": _spec_to_dict(r.uncertainty),
            }
            for r in inst.rows
        ],
        "bounds": [inst.bounds[0], inst.bounds[1]],
        "ground_truth": None
        if inst.ground_truth is None
        else {"x_star": list(inst.ground_truth.x_star), "f_star": inst.ground_truth.f_star},
    }
    if inst.latex is not None:
        d["latex"] = inst.latex
    if inst.nl_extension is not None:
        d["nl_extension"] = inst.nl_extension
    return d


def instance_from_dict(d: dict) -> RobustInstance:
    gt = d.get("ground_truth")
    return RobustInstance(
        id=str(d["id"]),
        n=int(d["n"]),
        sense=d["sense"],
        c_nom=tuple(float(c) for c in d["c_nom"]),
        objective_uncertainty=_spec_from_dict(d["objective_uncertainty"]),
        rows=tuple(
            RowSpec(
                a_nom=tuple(float(a) for a in r["a_nom"]),
                sense=r["sense"],
                b=float(r["b"]),
                uncertainty=_spec_from_dict(r["uncertainty"]),
            )
            for r in d["rows"]
        ),
        bounds=(float(d["bounds"][0]), float(d["bounds"][1])),
        ground_truth=None
        if gt is None
        else GroundTruth(tuple(float(v) for v in gt["x_star"]), float(gt["f_star"])),
        latex=d.get("latex"),
        nl_extension=d.get("nl_extension"),
    )


def write_jsonl(path, instances: Iterable[RobustInstance]) -> None:
    with open(path, "w") as fh:
        for inst in instances:
            fh.write(json.dumps(instance_to_dict(inst)) + "\n")


def read_jsonl(path) -> list[RobustInstance]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(instance_from_dict(json.loads(line)))
    return out
