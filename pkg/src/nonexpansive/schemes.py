"""Fixed-point iteration schemes with full trace recording.

``noor`` is the three-step scheme

    z = (1 - c) x + c Tx,  y = (1 - b) x + b Tz,  x' = (1 - a) x + a Ty

and ``thakur`` (labelled "Sahu" in some comparison tables) is

    z = (1 - c) x + c Tx,  y = (1 - b) z + b Tz,  x' = (1 - a) Tz + a Ty.

``picard`` (x' = Tx) and ``mann`` (x' = (1 - a) x + a Tx) are baselines.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from typing import Callable

from .exprmap import Expr
from .mappings import MappingSpec, evaluate
from .space import NormKind, Point, as_point, convex_combine, distance

SCHEMES = ("picard", "mann", "noor", "thakur")
SCHEME_ALIASES = {"sahu": "thakur", "ishikawa_noor": "noor", "krasnoselskii_mann": "mann"}


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Rule:
    """A parameter sequence ``n -> value``: a constant or an expression in ``n``."""

    source: str
    _fn: Callable[[int], float] = field(repr=False, compare=False)

    @classmethod
    def of(cls, value: "float | str | Rule") -> "Rule":
        if isinstance(value, Rule):
            return value
        if isinstance(value, (int, float)):
            v = float(value)
            return cls(repr(v), lambda n, _v=v: _v)
        text = str(value).strip()
        try:
            v = float(text)
        except ValueError:
            return cls(text, Expr(text, "n"))
        return cls(repr(v), lambda n, _v=v: _v)

    def __call__(self, n: int) -> float:
        return self._fn(n)


@dataclass(frozen=True)
class ParamSchedule:
    a: Rule
    b: Rule
    c: Rule

    @classmethod
    def constant(cls, a: float, b: float, c: float) -> "ParamSchedule":
        return cls(Rule.of(a), Rule.of(b), Rule.of(c))

    @classmethod
    def of(cls, a, b=0.5, c=0.5) -> "ParamSchedule":
        return cls(Rule.of(a), Rule.of(b), Rule.of(c))

    def at(self, n: int) -> tuple[float, float, float]:
        return self.a(n), self.b(n), self.c(n)

    def validate(self, horizon: int) -> None:
        """Every ``a(n), b(n), c(n)`` for ``1 <= n <= horizon`` must lie in (0, 1)."""
        for n in range(1, horizon + 1):
            for name, rule in (("a", self.a), ("b", self.b), ("c", self.c)):
                try:
                    v = rule(n)
                except ArithmeticError as exc:
                    raise ScheduleError(f"{name}({n}) failed to evaluate: {exc}") from exc
                if not 0.0 < v < 1.0:
                    raise ScheduleError(
                        f"schedule {name} = {rule.source} gives {name}({n}) = {v!r}, "
                        "outside the open interval (0, 1)"
                    )

    def satisfies_equal_parameter_constraint(self, horizon: int) -> bool:
        """Whether ``1/2 < lo <= a_n = b_n = c_n <= hi < 1`` holds over the horizon."""
        values = [self.at(n) for n in range(1, horizon + 1)]
        if any(not (a == b == c) for a, b, c in values):
            return False
        flat = [a for a, _, _ in values]
        return min(flat) > 0.5 and max(flat) < 1.0

    def describe(self) -> str:
        return f"a={self.a.source}, b={self.b.source}, c={self.c.source}"


class StopReason(str, enum.Enum):
    MAX_ITERATIONS = "max_iterations"
    RESIDUAL_BELOW_TOL = "residual_below_tol"
    ERROR_BELOW_TOL = "error_below_tol"


@dataclass(frozen=True)
class StopCriteria:
    """``max_iterations`` is the index ``N`` of the last recorded iterate ``x_N``."""

    max_iterations: int
    residual_tol: float | None = None
    error_tol: float | None = None


@dataclass
class IterationTrace:
    scheme_id: str
    mapping_id: str
    schedule: str
    x: list[Point]
    aux_y: list[Point]
    aux_z: list[Point]
    residuals: list[float]
    errors: list[float] | None
    stop_reason: StopReason
    norm: NormKind = NormKind.EUCLIDEAN
    reference_p: Point | None = None

    def __len__(self) -> int:
        return len(self.x)

    @property
    def final(self) -> Point:
        return self.x[-1]

    def to_csv(self) -> str:
        return trace_csv(self)


def _resolve_scheme(scheme_id: str) -> str:
    s = SCHEME_ALIASES.get(scheme_id.lower(), scheme_id.lower())
    if s not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme_id!r}; choose from {', '.join(SCHEMES)}")
    return s


def noor_step(T: MappingSpec, x, a: float, b: float, c: float) -> tuple[Point, Point, Point]:
    Tx = evaluate(T, x)
    z = convex_combine(c, x, Tx)
    Tz = evaluate(T, z)
    y = convex_combine(b, x, Tz)
    Ty = evaluate(T, y)
    return convex_combine(a, x, Ty), y, z


def thakur_step(T: MappingSpec, x, a: float, b: float, c: float) -> tuple[Point, Point, Point]:
    Tx = evaluate(T, x)
    z = convex_combine(c, x, Tx)
    Tz = evaluate(T, z)
    y = convex_combine(b, z, Tz)
    Ty = evaluate(T, y)
    return convex_combine(a, Tz, Ty), y, z


def mann_step(T: MappingSpec, x, a: float) -> Point:
    return convex_combine(a, x, evaluate(T, x))


def picard_step(T: MappingSpec, x) -> Point:
    return evaluate(T, x)


def run_scheme(
    scheme_id: str,
    T: MappingSpec,
    x1,
    schedule: ParamSchedule | None = None,
    stop: StopCriteria | int = 20,
    reference_p=None,
    k: NormKind | str = NormKind.EUCLIDEAN,
) -> IterationTrace:
    """Iterate from ``x1`` and record ``x_1 ... x_N``.

    ``stop`` may be an integer, meaning ``StopCriteria(max_iterations=stop)``.
    """
    scheme = _resolve_scheme(scheme_id)
    k = NormKind.parse(k)
    if isinstance(stop, int):
        stop = StopCriteria(stop)
    if stop.max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    if stop.error_tol is not None and reference_p is None:
        raise ValueError("error_tol requires a reference fixed point")
    if schedule is None:
        if scheme != "picard":
            raise ScheduleError(f"scheme {scheme!r} needs a parameter schedule")
        schedule = ParamSchedule.constant(0.5, 0.5, 0.5)
    if scheme != "picard":
        # steps use indices 1..N-1; validate the whole horizon up front
        schedule.validate(max(stop.max_iterations - 1, 1))

    x = as_point(x1)
    Tx = evaluate(T, x)  # also checks membership of x1
    p = None if reference_p is None else as_point(reference_p)

    xs, ys, zs, res = [x], [], [], [distance(Tx, x, k)]
    errs = None if p is None else [distance(x, p, k)]
    reason = StopReason.MAX_ITERATIONS

    n = 1
    while True:
        if stop.residual_tol is not None and res[-1] <= stop.residual_tol:
            reason = StopReason.RESIDUAL_BELOW_TOL
            break
        if stop.error_tol is not None and errs[-1] <= stop.error_tol:
            reason = StopReason.ERROR_BELOW_TOL
            break
        if n >= stop.max_iterations:
            break
        if scheme == "picard":
            x = picard_step(T, x)
        elif scheme == "mann":
            x = mann_step(T, x, schedule.a(n))
        else:
            a, b, c = schedule.at(n)
            step = noor_step if scheme == "noor" else thakur_step
            x, y, z = step(T, x, a, b, c)
            ys.append(y)
            zs.append(z)
        n += 1
        xs.append(x)
        res.append(distance(evaluate(T, x), x, k))
        if errs is not None:
            errs.append(distance(x, p, k))

    return IterationTrace(
        scheme_id=scheme,
        mapping_id=T.id,
        schedule="none" if scheme == "picard" else schedule.describe(),
        x=xs,
        aux_y=ys,
        aux_z=zs,
        residuals=res,
        errors=errs,
        stop_reason=reason,
        norm=k,
        reference_p=p,
    )


def fmt17(v: float) -> str:
    return f"{v:.17g}"


def trace_csv(trace: IterationTrace) -> str:
    """``n,x,residual,error`` (``x0,x1,...`` when d > 1), 17 significant digits."""
    d = len(trace.x[0])
    coords = ["x"] if d == 1 else [f"x{i}" for i in range(d)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", *coords, "residual", "error"])
    for i, (x, r) in enumerate(zip(trace.x, trace.residuals)):
        e = "" if trace.errors is None else fmt17(trace.errors[i])
        w.writerow([i + 1, *(fmt17(c) for c in x), fmt17(r), e])
    return buf.getvalue()


def read_trace_csv(text: str) -> list[dict[str, float]]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append({k: (float(v) if v != "" else None) for k, v in row.items()})
    return rows
