"""Backend-neutral mixed-integer optimization model representation.

A :class:`Model` collects variables, linear constraints and a linear or
convex-quadratic objective.  Solver backends (see :mod:`mgdispatch.backends`)
consume the assembled model; backends that cannot handle quadratic
objectives natively rely on :func:`linearize_quadratic`, which reformulates
each squared term as a piecewise-linear epigraph.

Every constraint carries a ``tag`` so that constraint families can be
retrieved and re-evaluated against a solution (:meth:`Model.check_solution`);
residual verification of returned dispatch schedules is built on this.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import MgdispatchError


class ModelBuildError(MgdispatchError):
    """Raised for structurally invalid model construction calls."""


class BoundsError(ModelBuildError):
    """Variable bounds are inverted or otherwise invalid."""


class ModelMismatchError(ModelBuildError):
    """An expression references a variable owned by a different model."""


class UnsupportedQuadraticError(ModelBuildError):
    """The quadratic objective is not a sum of squares of model variables."""


class VarKind(enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class Sense(enum.Enum):
    LE = "<="
    GE = ">="
    EQ = "=="


class ObjSense(enum.Enum):
    MIN = "min"
    MAX = "max"


class Status(enum.Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ERROR = "error"


@dataclass(frozen=True, eq=False)
class Var:
    """Handle for a decision variable.  Identity-hashed; owned by one model."""

    index: int
    kind: VarKind
    lb: float
    ub: float
    name: str

    def __repr__(self):
        return f"Var({self.index}:{self.name})"

    # Arithmetic builds LinExpr so model code reads like algebra.
    def __add__(self, other):
        return LinExpr.of(self) + other

    def __radd__(self, other):
        return LinExpr.of(self) + other

    def __sub__(self, other):
        return LinExpr.of(self) - other

    def __rsub__(self, other):
        return (-1.0) * LinExpr.of(self) + other

    def __mul__(self, c):
        return LinExpr.of(self) * c

    def __rmul__(self, c):
        return LinExpr.of(self) * c

    def __neg__(self):
        return LinExpr.of(self) * -1.0


class LinExpr:
    """Linear expression ``sum(coef * var) + constant``.

    Terms are canonical: one entry per variable, merged on construction.
    """

    __slots__ = ("_coeffs", "constant")

    def __init__(self, coeffs: dict | None = None, constant: float = 0.0):
        self._coeffs = coeffs if coeffs is not None else {}
        self.constant = float(constant)

    @staticmethod
    def of(var: Var) -> "LinExpr":
        return LinExpr({var: 1.0})

    @staticmethod
    def from_terms(terms: Iterable[tuple[Var, float]], constant: float = 0.0) -> "LinExpr":
        coeffs: dict[Var, float] = {}
        for v, c in terms:
            if c == 0.0:
                continue
            coeffs[v] = coeffs.get(v, 0.0) + float(c)
        return LinExpr(coeffs, constant)

    @staticmethod
    def sum(items: Iterable["LinExpr | Var | float"]) -> "LinExpr":
        coeffs: dict[Var, float] = {}
        constant = 0.0
        for item in items:
            if isinstance(item, Var):
                coeffs[item] = coeffs.get(item, 0.0) + 1.0
            elif isinstance(item, LinExpr):
                for v, c in item._coeffs.items():
                    coeffs[v] = coeffs.get(v, 0.0) + c
                constant += item.constant
            else:
                constant += float(item)
        return LinExpr(coeffs, constant)

    @property
    def terms(self) -> list[tuple[Var, float]]:
        return list(self._coeffs.items())

    def coefficient(self, var: Var) -> float:
        return self._coeffs.get(var, 0.0)

    def copy(self) -> "LinExpr":
        return LinExpr(dict(self._coeffs), self.constant)

    def __add__(self, other):
        out = self.copy()
        if isinstance(other, Var):
            out._coeffs[other] = out._coeffs.get(other, 0.0) + 1.0
        elif isinstance(other, LinExpr):
            for v, c in other._coeffs.items():
                out._coeffs[v] = out._coeffs.get(v, 0.0) + c
            out.constant += other.constant
        else:
            out.constant += float(other)
        return out

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Var):
            other = LinExpr.of(other)
        if isinstance(other, LinExpr):
            return self + (other * -1.0)
        return self + (-float(other))

    def __rsub__(self, other):
        return (self * -1.0) + other

    def __mul__(self, c):
        c = float(c)
        return LinExpr({v: coef * c for v, coef in self._coeffs.items()}, self.constant * c)

    __rmul__ = __mul__

    def value(self, values: Mapping[Var, float]) -> float:
        return sum(c * values[v] for v, c in self._coeffs.items()) + self.constant

    def __repr__(self):
        parts = [f"{c:+g}*{v.name}" for v, c in self._coeffs.items()]
        if self.constant or not parts:
            parts.append(f"{self.constant:+g}")
        return " ".join(parts)


@dataclass(frozen=True, eq=False)
class Constraint:
    """A tagged linear constraint ``expr (sense) rhs``."""

    index: int
    expr: LinExpr
    sense: Sense
    rhs: float
    tag: str

    def violation(self, values: Mapping[Var, float]) -> float:
        """Nonnegative violation magnitude of this row at ``values``."""
        lhs = self.expr.value(values)
        if self.sense is Sense.LE:
            return max(0.0, lhs - self.rhs)
        if self.sense is Sense.GE:
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass
class Objective:
    """Linear-or-quadratic objective.  Quadratic terms are (var, var, coef)."""

    sense: ObjSense = ObjSense.MIN
    linear: LinExpr = field(default_factory=LinExpr)
    quadratic: list[tuple[Var, Var, float]] = field(default_factory=list)

    def value(self, values: Mapping[Var, float]) -> float:
        total = self.linear.value(values)
        for u, v, c in self.quadratic:
            total += c * values[u] * values[v]
        return total

    def is_quadratic(self) -> bool:
        return bool(self.quadratic)


@dataclass(frozen=True)
class BackendCapabilities:
    supports_quadratic_objective: bool = False
    supports_indicator: bool = False


@dataclass
class SolveResult:
    """Immutable outcome of one solve.

    ``values`` is present iff status is OPTIMAL or FEASIBLE.
    ``objective_value`` is the model's own objective (including quadratic
    terms) evaluated at ``values``.
    """

    status: Status
    objective_value: float = math.nan
    values: dict[Var, float] | None = None
    solve_time: float = 0.0
    timed_out: bool = False
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in (Status.OPTIMAL, Status.FEASIBLE)

    def value(self, item: Var | LinExpr) -> float:
        if self.values is None:
            raise MgdispatchError(f"no solution values (status={self.status.value})")
        if isinstance(item, Var):
            return self.values[item]
        return item.value(self.values)


@dataclass
class SolutionCheck:
    """Result of re-evaluating a solution against all stored rows and bounds."""

    max_violation: float
    by_tag: dict[str, float]
    bound_violation: float

    def ok(self, tol: float = 1e-6) -> bool:
        return self.max_violation <= tol and self.bound_violation <= tol


_INF = math.inf


class Model:
    """Single-owner mutable builder for a mixed-integer program."""

    def __init__(self, name: str = "model"):
        self.name = name
        self._vars: list[Var] = []
        self._cons: list[Constraint] = []
        self._by_tag: dict[str, list[Constraint]] = {}
        self.objective = Objective()

    # ---------------------------------------------------------------- vars

    def add_variable(
        self,
        kind: VarKind = VarKind.CONTINUOUS,
        lb: float = -_INF,
        ub: float = _INF,
        name: str = "",
    ) -> Var:
        lb, ub = float(lb), float(ub)
        if math.isnan(lb) or math.isnan(ub) or lb > ub:
            raise BoundsError(f"invalid bounds [{lb}, {ub}] for variable {name!r}")
        if kind is VarKind.BINARY:
            if lb < 0.0 or ub > 1.0:
                raise BoundsError(f"binary variable {name!r} bounds must lie in [0, 1]")
            if lb not in (0.0, 1.0) or ub not in (0.0, 1.0):
                raise BoundsError(f"binary variable {name!r} bounds must be integral")
        var = Var(len(self._vars), kind, lb, ub, name or f"x{len(self._vars)}")
        self._vars.append(var)
        return var

    def add_continuous(self, lb: float = -_INF, ub: float = _INF, name: str = "") -> Var:
        return self.add_variable(VarKind.CONTINUOUS, lb, ub, name)

    def add_binary(self, name: str = "", lb: float = 0.0, ub: float = 1.0) -> Var:
        return self.add_variable(VarKind.BINARY, lb, ub, name)

    def owns(self, var: Var) -> bool:
        return 0 <= var.index < len(self._vars) and self._vars[var.index] is var

    @property
    def variables(self) -> Sequence[Var]:
        return self._vars

    @property
    def num_variables(self) -> int:
        return len(self._vars)

    # --------------------------------------------------------- constraints

    def add_constraint(
        self, expr: LinExpr | Var, sense: Sense, rhs: float, tag: str
    ) -> Constraint:
        if isinstance(expr, Var):
            expr = LinExpr.of(expr)
        if not tag:
            raise ModelBuildError("constraint tag must be nonempty")
        for v in expr._coeffs:
            if not self.owns(v):
                raise ModelMismatchError(
                    f"variable {v.name!r} does not belong to model {self.name!r}"
                )
            if not math.isfinite(expr._coeffs[v]):
                raise ModelBuildError(f"non-finite coefficient on {v.name!r} in {tag!r}")
        con = Constraint(len(self._cons), expr, sense, float(rhs), tag)
        self._cons.append(con)
        self._by_tag.setdefault(tag, []).append(con)
        return con

    def add_leq(self, expr, rhs: float, tag: str) -> Constraint:
        return self.add_constraint(expr, Sense.LE, rhs, tag)

    def add_geq(self, expr, rhs: float, tag: str) -> Constraint:
        return self.add_constraint(expr, Sense.GE, rhs, tag)

    def add_eq(self, expr, rhs: float, tag: str) -> Constraint:
        return self.add_constraint(expr, Sense.EQ, rhs, tag)

    @property
    def constraints(self) -> Sequence[Constraint]:
        return self._cons

    @property
    def num_constraints(self) -> int:
        return len(self._cons)

    def constraints_by_tag(self, tag: str) -> list[Constraint]:
        return list(self._by_tag.get(tag, []))

    def tags(self) -> list[str]:
        return list(self._by_tag)

    # ----------------------------------------------------------- objective

    def set_objective(
        self,
        sense: ObjSense,
        linear: LinExpr | Var | float,
        quadratic: Iterable[tuple[Var, Var, float]] | None = None,
    ) -> None:
        if isinstance(linear, Var):
            linear = LinExpr.of(linear)
        elif not isinstance(linear, LinExpr):
            linear = LinExpr(constant=float(linear))
        quad = [(u, v, float(c)) for u, v, c in (quadratic or []) if c != 0.0]
        for u, v, c in quad:
            if not (self.owns(u) and self.owns(v)):
                raise ModelMismatchError("quadratic objective references a foreign variable")
            if u is v:
                convex = c >= 0.0 if sense is ObjSense.MIN else c <= 0.0
                if not convex:
                    raise UnsupportedQuadraticError(
                        f"square of {u.name!r} has the wrong sign for a convex objective"
                    )
        for v in linear._coeffs:
            if not self.owns(v):
                raise ModelMismatchError("objective references a foreign variable")
        self.objective = Objective(sense, linear, quad)

    def minimize(self, linear, quadratic=None) -> None:
        self.set_objective(ObjSense.MIN, linear, quadratic)

    def maximize(self, linear, quadratic=None) -> None:
        self.set_objective(ObjSense.MAX, linear, quadratic)

    # ------------------------------------------------------------- utility

    def clone(self) -> "Model":
        """Shallow-structural copy sharing Var/Constraint objects.

        Variables and constraints added to the clone do not affect the
        original; used by the solver layer to linearize quadratic objectives
        without mutating the caller's model.
        """
        out = Model(self.name)
        out._vars = list(self._vars)
        out._cons = list(self._cons)
        out._by_tag = {tag: list(cons) for tag, cons in self._by_tag.items()}
        out.objective = Objective(
            self.objective.sense, self.objective.linear.copy(), list(self.objective.quadratic)
        )
        return out

    def check_solution(self, values: Mapping[Var, float], tol: float = 1e-6) -> SolutionCheck:
        """Re-evaluate every stored constraint and variable bound at ``values``."""
        by_tag: dict[str, float] = {}
        worst = 0.0
        for con in self._cons:
            v = con.violation(values)
            tag_worst = by_tag.get(con.tag, 0.0)
            if v > tag_worst:
                by_tag[con.tag] = v
            if v > worst:
                worst = v
        bound_worst = 0.0
        for var in self._vars:
            x = values.get(var)
            if x is None:
                continue
            bound_worst = max(bound_worst, var.lb - x, x - var.ub)
        return SolutionCheck(worst, by_tag, max(0.0, bound_worst))

    # ------------------------------------------------------------- LP dump

    def to_lp_string(self) -> str:
        """Render the model in LP text format (debugging aid)."""

        def vname(v: Var) -> str:
            base = re.sub(r"[^A-Za-z0-9_.]", "_", v.name) or "x"
            return f"{base}_{v.index}"

        def expr_str(expr: LinExpr) -> str:
            parts = []
            for v, c in sorted(expr._coeffs.items(), key=lambda t: t[0].index):
                parts.append(f"{'+' if c >= 0 else '-'} {abs(c):.12g} {vname(v)}")
            return " ".join(parts) if parts else "0 " + (vname(self._vars[0]) if self._vars else "x0")

        lines = [f"\\ {self.name}"]
        obj = self.objective
        lines.append("Minimize" if obj.sense is ObjSense.MIN else "Maximize")
        obj_line = f" obj: {expr_str(obj.linear)}"
        if obj.quadratic:
            quad_parts = []
            for u, v, c in obj.quadratic:
                c2 = 2.0 * c  # LP quadratic section is [ ... ] / 2
                if u is v:
                    quad_parts.append(f"{'+' if c2 >= 0 else '-'} {abs(c2):.12g} {vname(u)} ^ 2")
                else:
                    quad_parts.append(f"{'+' if c2 >= 0 else '-'} {abs(c2):.12g} {vname(u)} * {vname(v)}")
            obj_line += " + [ " + " ".join(quad_parts) + " ] / 2"
        lines.append(obj_line)
        lines.append("Subject To")
        op = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}
        for con in self._cons:
            tag = re.sub(r"[^A-Za-z0-9_.]", "_", con.tag)
            rhs = con.rhs - con.expr.constant
            lines.append(f" c{con.index}_{tag}: {expr_str(con.expr)} {op[con.sense]} {rhs:.12g}")
        lines.append("Bounds")
        for v in self._vars:
            lo = f"{v.lb:.12g}" if math.isfinite(v.lb) else "-inf"
            hi = f"{v.ub:.12g}" if math.isfinite(v.ub) else "+inf"
            lines.append(f" {lo} <= {vname(v)} <= {hi}")
        binaries = [vname(v) for v in self._vars if v.kind is VarKind.BINARY]
        if binaries:
            lines.append("Binaries")
            lines.append(" " + " ".join(binaries))
        lines.append("End")
        return "\n".join(lines) + "\n"

    def dump_lp(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_lp_string())

    def __repr__(self):
        return (
            f"Model({self.name!r}, vars={self.num_variables}, "
            f"cons={self.num_constraints})"
        )


# ---------------------------------------------------------------------------
# Piecewise-linear reformulation of diagonal quadratic objectives
# ---------------------------------------------------------------------------


def pwl_breakpoints(lb: float, ub: float, segments: int) -> list[float]:
    """Breakpoint grid over [lb, ub] with ``segments`` pieces.

    Zero is always included as a breakpoint when it lies strictly inside the
    range, so that a residual sitting exactly at zero incurs no
    approximation error.
    """
    if segments < 1:
        raise ModelBuildError("segments must be >= 1")
    if not (math.isfinite(lb) and math.isfinite(ub)):
        raise ModelBuildError("piecewise linearization requires finite bounds")
    if ub <= lb:
        return [lb, ub] if ub == lb else [lb, ub]
    if lb < 0.0 < ub and segments >= 2:
        n_neg = max(1, min(segments - 1, round(segments * (-lb) / (ub - lb))))
        n_pos = segments - n_neg
        pts = [lb + (0.0 - lb) * i / n_neg for i in range(n_neg)]
        pts += [0.0 + (ub - 0.0) * i / n_pos for i in range(n_pos)]
        pts.append(ub)
        return pts
    return [lb + (ub - lb) * i / segments for i in range(segments)] + [ub]


def pwl_gap_bound(lb: float, ub: float, segments: int) -> float:
    """Max over-approximation of x^2 by its secants on the breakpoint grid.

    Each secant over a piece of width w exceeds x^2 by at most w^2/4
    (attained at the piece midpoint).
    """
    pts = pwl_breakpoints(lb, ub, segments)
    return max(((b - a) ** 2) / 4.0 for a, b in zip(pts, pts[1:])) if len(pts) > 1 else 0.0


def linearize_quadratic(model: Model, segments: int = 8) -> Objective:
    """Replace the model's quadratic objective with a secant epigraph.

    Each diagonal term ``c * v**2`` gains an auxiliary variable ``t`` with
    ``t >= secant_m(v)`` for every piece m (tag ``pwl:<name>``); the linear
    objective gains ``c * t``.  Both minimization of convex and maximization
    of concave squares push ``t`` down onto the secant envelope, so the same
    rows serve either sense.  Terms must be diagonal and their variables must
    have finite bounds.  A purely linear objective is returned unchanged.
    """
    obj = model.objective
    if not obj.quadratic:
        return obj
    linear = obj.linear.copy()
    for u, v, c in obj.quadratic:
        if u is not v:
            raise UnsupportedQuadraticError(
                f"cross term {u.name!r}*{v.name!r} is not supported by the "
                "piecewise-linear fallback"
            )
        pts = pwl_breakpoints(u.lb, u.ub, segments)
        if len(pts) < 2:  # variable fixed: square is a constant
            linear = linear + c * (u.lb * u.lb)
            continue
        fvals = [p * p for p in pts]
        t_lb = 0.0 if pts[0] <= 0.0 <= pts[-1] else min(fvals)
        t = model.add_continuous(t_lb, max(fvals), name=f"sq({u.name})")
        for a, b in zip(pts, pts[1:]):
            slope = a + b
            intercept = -a * b
            # t >= slope*u + intercept
            model.add_geq(t - slope * LinExpr.of(u), intercept, tag=f"pwl:{u.name}")
        linear = linear + c * LinExpr.of(t)
    new_obj = Objective(obj.sense, linear, [])
    model.objective = new_obj
    return new_obj
