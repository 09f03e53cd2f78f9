"""LaTeX problem statements and natural-language robust extensions.

Eight presentation templates T{b0}{b1}{b2} vary three binary surface
dimensions of the math body: b0 switches the worst-case presentation
between a universal quantifier and a nested min/max operator, b1 between
element-wise scalar terms and compact inner-product notation, b2 toggles
named uncertainty labels. All numeric data lives in a canonical where-block
shared by every template, so the multiset of numeric literals in a
rendering is template-independent and equals the instance's stored values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .lpcore import EQ, GE, LE, MAX
from .model import Box, Budget, Deterministic, Polyhedral, RobustInstance
from .reformulate import assemble_poly_system


@dataclass(frozen=True)
class TemplateId:
    b0: int  # 1 = nested min/max operator, 0 = universal quantifier
    b1: int  # 1 = vector notation, 0 = element-wise scalar notation
    b2: int  # 1 = named uncertainty labels

    def __post_init__(self):
        if any(b not in (0, 1) for b in (self.b0, self.b1, self.b2)):
            raise ValueError("template bits must be 0 or 1")

    @property
    def name(self) -> str:
        return f"T{self.b0}{self.b1}{self.b2}"


def template_from_id(name: str) -> TemplateId:
    m = re.fullmatch(r"T([01])([01])([01])", name)
    if not m:
        raise ValueError(f"bad template id {name!r}")
    return TemplateId(int(m.group(1)), int(m.group(2)), int(m.group(3)))


def fmt(value: float, decimals: int) -> str:
    """Fixed decimals with trailing zeros (and a bare trailing dot) trimmed."""
    s = f"{value:.{decimals}f}"
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    if s in ("-0", ""):
        s = "0"
    return s


_COEF_DP = 1
_RHS_DP = 2
_DATA_DP = 6  # uncertainty data is 1-2 dp by construction; 6 is a safe ceiling


def _vec(values, dp) -> str:
    return "[" + ", ".join(fmt(v, dp) for v in values) + "]"


def _sub(label: str) -> str:
    """Subscript a symbol label: single characters stay unbraced."""
    return label if len(label) == 1 else "{" + label + "}"


def _sense_tex(sense: str) -> str:
    return {LE: r"\le", GE: r"\ge", EQ: "="}[sense]


def _kind(spec) -> str:
    if isinstance(spec, Box):
        return "Box"
    if isinstance(spec, Budget):
        return "Budgeted"
    return "Polyhedral"


def _full_diag(spec, n: int) -> list[float]:
    d = [0.0] * n
    for s, j in enumerate(spec.support):
        d[j] = spec.delta[s]
    return d


def expand_poly_full(spec: Polyhedral, n: int):
    """Full-width M zeta <= q plus pinning rows E zeta = e (with e = 0)."""
    F, g = assemble_poly_system(spec)
    M = np.zeros((F.shape[0], n))
    for s, j in enumerate(spec.support):
        M[:, j] = F[:, s]
    E = np.zeros((len(spec.zero_eq), n))
    for p, j in enumerate(spec.zero_eq):
        E[p, j] = 1.0
    return M, np.asarray(g), E, np.zeros(len(spec.zero_eq))


def _bmatrix(M: np.ndarray, dp: int) -> str:
    rows = [" & ".join(fmt(v, dp) for v in row) for row in M]
    return r"\begin{bmatrix} " + r" \\ ".join(rows) + r" \end{bmatrix}"


def _set_symbol(row_label: str, spec) -> str:
    suffix = {"Box": "Box", "Budgeted": "Bud", "Polyhedral": "P"}[_kind(spec)]
    return rf"\mathcal{{U}}_{{{row_label},{suffix}}}"


def _row_symbol(i: int, nominal: bool = False) -> str:
    base = r"\mathbf{c}" if i == 0 else rf"\mathbf{{a}}_{_sub(str(i))}"
    return base + ("^{nom}" if nominal else "")


def _delta_symbol(i: int) -> str:
    return r"\boldsymbol{\delta}_c" if i == 0 else rf"\boldsymbol{{\delta}}_{_sub('a' + str(i))}"


def _scalar_terms(i: int, coeffs, perturbed: set[int]) -> str:
    """Element-wise body like a_{1,1} x_{1} + (a_{1,3}^{nom} + zeta_{1,3}) x_{3}."""
    parts = []
    symbol = "c" if i == 0 else "a"
    for j, a in enumerate(coeffs):
        if a == 0.0 and j not in perturbed:
            continue
        sub = f"{{{i},{j + 1}}}" if i else f"{{{j + 1}}}"
        if j in perturbed:
            parts.append(rf"({symbol}_{sub}^{{nom}} + \zeta_{sub}) x_{{{j + 1}}}")
        else:
            parts.append(rf"{symbol}_{sub} x_{{{j + 1}}}")
    return " + ".join(parts) if parts else "0"


def _body_expr(i: int, coeffs, spec, t: TemplateId) -> str:
    """Left-hand expression of row i (0 = objective) under the b1 bit."""
    uncertain = not isinstance(spec, Deterministic)
    if t.b1 == 0:
        perturbed = set(spec.support) if uncertain else set()
        return _scalar_terms(i, coeffs, perturbed)
    if uncertain and isinstance(spec, Polyhedral):
        return rf"({_row_symbol(i, nominal=True)} + {_delta_symbol(i)})^\top \mathbf{{x}}"
    return rf"{_row_symbol(i)}^\top \mathbf{{x}}"


def _quantified_var(i: int, spec) -> str:
    return _delta_symbol(i) if isinstance(spec, Polyhedral) else _row_symbol(i)


def render_latex(inst: RobustInstance, t: TemplateId) -> str:
    """Emit one align* block presenting the robust model under template t."""
    n = inst.n
    lines: list[str] = []

    def line(expr: str, clause: str | None, label: str | None) -> None:
        out = expr + " && " + (clause or "")
        if t.b2 == 1 and label:
            out += rf" && \text{{({label})}}"
        lines.append(out)

    direction = "Maximize" if inst.sense == MAX else "Minimize"
    obj_spec = inst.objective_uncertainty
    obj_expr = _body_expr(0, inst.c_nom, obj_spec, t)
    if isinstance(obj_spec, Deterministic):
        line(rf"\text{{{direction}}} \quad & {obj_expr}", None, "Deterministic Objective")
    else:
        sym = _set_symbol("c", obj_spec)
        qv = _quantified_var(0, obj_spec)
        label = f"{_kind(obj_spec)} Uncertainty Objective"
        if t.b0 == 1:
            inner = r"\min" if inst.sense == MAX else r"\max"
            line(
                rf"\text{{{direction}}} \quad & {inner}_{{{qv} \in {sym}}} {obj_expr}",
                None,
                label,
            )
        else:
            line(
                rf"\text{{{direction}}} \quad & {obj_expr}",
                rf"\forall {qv} \in {sym}",
                label,
            )

    for i, row in enumerate(inst.rows, start=1):
        prefix = r"\text{subject to} \quad & " if i == 1 else "& "
        expr = _body_expr(i, row.a_nom, row.uncertainty, t)
        rel = _sense_tex(row.sense)
        rhs = f"b_{{{i}}}"
        if isinstance(row.uncertainty, Deterministic):
            line(f"{prefix}{expr} {rel} {rhs}", None, "Deterministic Constraint")
            continue
        sym = _set_symbol(f"a{i}", row.uncertainty)
        qv = _quantified_var(i, row.uncertainty)
        label = f"{_kind(row.uncertainty)} Uncertainty Constraint"
        if t.b0 == 1:
            inner = r"\max" if row.sense == LE else r"\min"
            line(f"{prefix}{inner}_{{{qv} \\in {sym}}} {expr} {rel} {rhs}", None, label)
        else:
            line(f"{prefix}{expr} {rel} {rhs}", rf"\forall {qv} \in {sym}", label)

    where: list[str] = []
    where.append(r"\mathbf{x} = [" + ", ".join(f"x_{{{j + 1}}}" for j in range(n)) + r"]^\top")
    where.append(rf"\mathbf{{c}}^{{nom}} = {_vec(inst.c_nom, _COEF_DP)}^\top")
    for i, row in enumerate(inst.rows, start=1):
        nominal = not isinstance(row.uncertainty, Deterministic)
        where.append(rf"{_row_symbol(i, nominal=nominal)} = {_vec(row.a_nom, _COEF_DP)}^\top")
        where.append(rf"b_{{{i}}} = {fmt(row.b, _RHS_DP)}")

    def diag(values) -> str:
        return r"\mathrm{diag}(" + ", ".join(fmt(v, _DATA_DP) for v in values) + ")"

    def spec_lines(row_label: str, i: int, spec) -> None:
        sym = _set_symbol(row_label, spec)
        vec_sym = _row_symbol(i)
        dim = rf"\mathbb{{R}}^{{{n}}}"
        if isinstance(spec, (Box, Budget)):
            budget_part = (
                rf", \|\boldsymbol{{\xi}}\|_1 \le \Gamma_{_sub(row_label)}"
                if isinstance(spec, Budget)
                else ""
            )
            where.append(
                rf"{sym} = \{{ {vec_sym} \in {dim} : {vec_sym} = {_row_symbol(i, nominal=True)} "
                rf"+ \mathbf{{D}}_{_sub(row_label)} \boldsymbol{{\xi}}, "
                rf"\|\boldsymbol{{\xi}}\|_{{\infty}} \le 1{budget_part} \}}"
            )
            where.append(rf"\mathbf{{D}}_{_sub(row_label)} = {diag(_full_diag(spec, n))}")
            if isinstance(spec, Budget):
                where.append(rf"\Gamma_{_sub(row_label)} = {fmt(spec.gamma, _DATA_DP)}")
        else:
            M, q, E, e = expand_poly_full(spec, n)
            where.append(
                rf"{sym} = \{{ {_delta_symbol(i)} \in {dim} : "
                rf"\mathbf{{M}}_{_sub(row_label)} {_delta_symbol(i)} \le \mathbf{{q}}_{_sub(row_label)}, "
                rf"\quad \mathbf{{E}}_{_sub(row_label)} {_delta_symbol(i)} = \mathbf{{e}}_{_sub(row_label)} \}}"
            )
            where.append(rf"\mathbf{{M}}_{_sub(row_label)} = {_bmatrix(M, _DATA_DP)}")
            where.append(rf"\mathbf{{q}}_{_sub(row_label)} = {_vec(q, _DATA_DP)}^\top")
            where.append(rf"\mathbf{{E}}_{_sub(row_label)} = {_bmatrix(E, 0)}")
            where.append(rf"\mathbf{{e}}_{_sub(row_label)} = {_vec(e, 0)}^\top")

    if not isinstance(inst.objective_uncertainty, Deterministic):
        spec_lines("c", 0, inst.objective_uncertainty)
    for i, row in enumerate(inst.rows, start=1):
        if not isinstance(row.uncertainty, Deterministic):
            spec_lines(f"a{i}", i, row.uncertainty)

    x_l, x_u = inst.bounds
    bounds_line = rf"{fmt(x_l, _COEF_DP)} \le x_{{j}} \le {fmt(x_u, _COEF_DP)}, \quad \forall j"
    if t.b2 == 1:
        bounds_line += r" && && \text{(Variable Bounds)}"
    where.append(bounds_line)

    return (
        "\\begin{align*}\n"
        + " \\\\\n".join(lines)
        + " \\\\\n\\text{where:} \\quad & "
        + " \\\\\n& ".join(where)
        + "\n\\end{align*}"
    )


_SUBSCRIPT = re.compile(r"_\{[^{}]*\}|_[A-Za-z0-9]")
_SUPERSCRIPT = re.compile(r"\^\{[^{}]*\}|\^\\top|\^[A-Za-z0-9]")
_NUMBER = re.compile(r"-?\d+(?:\.\d+)?")


def extract_numeric_tokens(latex: str) -> list[str]:
    """All numeric literals in data position (sub/superscripts dropped)."""
    cleaned = _SUBSCRIPT.sub("", latex)
    cleaned = _SUPERSCRIPT.sub("", cleaned)
    return _NUMBER.findall(cleaned)


def instance_numeric_values(inst: RobustInstance) -> list[str]:
    """The canonical multiset of data literals a rendering must contain."""
    n = inst.n
    out: list[str] = []
    out.extend(fmt(c, _COEF_DP) for c in inst.c_nom)
    for row in inst.rows:
        out.extend(fmt(a, _COEF_DP) for a in row.a_nom)
        out.append(fmt(row.b, _RHS_DP))

    def spec_values(spec) -> None:
        if isinstance(spec, (Box, Budget)):
            out.extend(fmt(v, _DATA_DP) for v in _full_diag(spec, n))
            out.append("1")  # unit infinity-norm radius in the set definition
            if isinstance(spec, Budget):
                out.append(fmt(spec.gamma, _DATA_DP))
        else:
            M, q, E, e = expand_poly_full(spec, n)
            out.extend(fmt(v, _DATA_DP) for v in M.ravel())
            out.extend(fmt(v, _DATA_DP) for v in q)
            out.extend(fmt(v, 0) for v in E.ravel())
            out.extend(fmt(v, 0) for v in e)

    if not isinstance(inst.objective_uncertainty, Deterministic):
        spec_values(inst.objective_uncertainty)
    for row in inst.rows:
        if not isinstance(row.uncertainty, Deterministic):
            spec_values(row.uncertainty)
    out.append(fmt(inst.bounds[0], _COEF_DP))
    out.append(fmt(inst.bounds[1], _COEF_DP))
    return out


# ---------------------------------------------------------------------------
# natural-language robust extension

_PREAMBLE = (
    "Robust Extension:\n\n"
    "In this robust version, certain parameters of the problem are treated as "
    "uncertain rather than fixed at their nominal values. Each uncertain "
    "parameter is modeled as its nominal value plus a perturbation, and the "
    "perturbations are confined to the uncertainty sets described below. The "
    "goal is a decision that stays feasible and near-optimal under every "
    "admissible realization (the worst-case guarantee).\n\n"
    "The following parameters are subject to uncertainty:\n"
)


def _row_name(i: int) -> str:
    return "Objective coefficients" if i == 0 else f"Constraint {i} coefficients"


def _bullet(i: int, spec) -> str:
    name = _row_name(i)
    if isinstance(spec, Box):
        return (
            f"* {name}: each coefficient may deviate by at most "
            f"\u00b1{_vec(spec.delta, _DATA_DP)} from its nominal value."
        )
    if isinstance(spec, Budget):
        m = len(spec.support)
        return (
            f"* {name}: each coefficient may deviate by at most "
            f"\u00b1{_vec(spec.delta, _DATA_DP)} from its nominal value. In addition, "
            f"the sum of normalized deviations (\u03a3|\u03be_j|/\u0394_j) across all {m} "
            f"uncertain coefficients must not exceed \u0393_b = {fmt(spec.gamma, _DATA_DP)}."
        )
    k = len(spec.F)
    lo = "-\u221e" if spec.lower is None else fmt(spec.lower, _DATA_DP)
    hi = "+\u221e" if spec.upper is None else fmt(spec.upper, _DATA_DP)
    rows = []
    for row, g in zip(spec.F, spec.g):
        terms = " + ".join(
            f"{fmt(c, _DATA_DP)}\u00b7\u03be_{spec.support[s] + 1}"
            for s, c in enumerate(row)
            if c != 0.0
        )
        rows.append(f"{terms} \u2264 {fmt(g, _DATA_DP)}")
    listing = "; ".join(rows) if rows else "(none)"
    return (
        f"* {name}: the perturbations \u03be are confined to a polyhedral uncertainty "
        f"set with each \u03be_i bounded within [{lo}, {hi}], and satisfying the "
        f"following {k} linear constraint(s): {listing}."
    )


def render_robust_extension(inst: RobustInstance) -> str:
    """Preamble, one bullet per uncertain row, and a closing statement."""
    bullets = []
    if not isinstance(inst.objective_uncertainty, Deterministic):
        bullets.append(_bullet(0, inst.objective_uncertainty))
    for i, row in enumerate(inst.rows, start=1):
        if not isinstance(row.uncertainty, Deterministic):
            bullets.append(_bullet(i, row.uncertainty))
    if not bullets:
        raise ValueError("instance has no uncertain rows")
    direction = "maximizing" if inst.sense == MAX else "minimizing"
    closing = (
        f"\nThe robust model seeks a decision that guarantees {direction} the "
        "objective value under all worst-case realizations within the "
        "uncertainty sets above."
    )
    return _PREAMBLE + "\n".join(bullets) + "\n" + closing
