"""Trace analysis and cross-scheme comparison."""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mappings import MappingSpec
from .schemes import IterationTrace, ParamSchedule, StopCriteria, fmt17, run_scheme
from .space import NormKind, as_point, distance

RATE_FLOOR = 1e-300

# Values as printed in the published comparison (Noor column, Sahu/Thakur column),
# for T(x) = x/2 (x != 1), T(1) = 5/8 with a = 0.85, b = 0.65, c = 0.45, x_1 = 0.9.
TABLE1_GOLDEN: tuple[tuple[str, str], ...] = (
    ("0.9", "0.9"),
    ("0.365217", "0.252408"),
    ("0.148204", "0.0707886"),
    ("0.0601407", "0.0198529"),
    ("0.0244049", "0.0055678"),
    ("0.00990344", "0.00156151"),
    ("0.00401878", "0.00043793"),
    ("0.00163081", "0.000122819"),
    ("0.000661778", "0.0000344449"),
    ("0.000268547", "9.66018×10^{-6}"),
    ("0.000108976", "2.70923×10^{-6}"),
    ("0.000044222", "7.59811×10^{-7}"),
    ("0.0000179451", "2.13091×10^{-7}"),
    ("7.28208×10^{-6}", "5.97621×10^{-8}"),
    ("2.95505×10^{-6}", "1.67605×10^{-8}"),
    ("1.19915×10^{-6}", "4.70053×10^{-9}"),
    ("4.86611×10^{-7}", "1.31828×10^{-9}"),
    ("1.97465×10^{-7}", "3.69715×10^{-10}"),
    ("8.01307×10^{-8}", "1.03688×10^{-10}"),
    ("3.25168×10^{-8}", "2.90796×10^{-11}"),
)
TABLE1_SCHEMES = ("noor", "thakur")
TABLE1_SETUP = {"a": 0.85, "b": 0.65, "c": 0.45, "x1": 0.9, "iterations": 20}


def sig6(v: float) -> str:
    """Six significant figures, trailing zeros dropped.

    Magnitudes of at least 1e-5 print positionally, smaller ones as
    ``m e-k`` (``9.66018e-6``), mirroring the published table layout.
    """
    if v == 0:
        return "0"
    mant, exp = f"{v:.5e}".split("e")
    exp = int(exp)
    mant = mant.rstrip("0").rstrip(".")
    if abs(v) >= 1e-5 or exp >= -5:
        digits = mant.replace("-", "").replace(".", "")
        sign = "-" if v < 0 else ""
        if exp >= 0:
            whole, frac = digits[: exp + 1].ljust(exp + 1, "0"), digits[exp + 1 :]
            return sign + whole + ("." + frac if frac else "")
        return sign + "0." + "0" * (-exp - 1) + digits
    return f"{mant}e{exp}"


_PAPER_SCI = re.compile(r"^\s*([-\d.]+)\s*×\s*10\^\{(-?\d+)\}\s*$")


def normalize_cell(text: str) -> str:
    """Rewrite ``9.66018×10^{-6}`` as ``9.66018e-6``; other strings are unchanged."""
    m = _PAPER_SCI.match(text)
    return f"{m.group(1)}e{int(m.group(2))}" if m else text.strip()


@dataclass
class ComparisonTable:
    schemes: list[str]
    rows: list[int]
    values: dict[str, list[float]]
    traces: dict[str, IterationTrace] = field(repr=False, default_factory=dict)
    quantity: str = "x"

    def cell(self, scheme: str, n: int) -> float:
        return self.values[scheme][n - 1]

    def rendered(self) -> list[list[str]]:
        return [[sig6(self.values[s][n - 1]) for s in self.schemes] for n in self.rows]

    def to_text(self) -> str:
        widths = [max(len(s), 16) for s in self.schemes]
        out = io.StringIO()
        out.write("n".rjust(3) + "  " + "  ".join(s.ljust(w) for s, w in zip(self.schemes, widths)) + "\n")
        for n, cells in zip(self.rows, self.rendered()):
            out.write(f"{n:>3}  " + "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip() + "\n")
        return out.getvalue()

    def to_csv(self) -> str:
        lines = ["n," + ",".join(self.schemes)]
        for n in self.rows:
            lines.append(f"{n}," + ",".join(fmt17(self.values[s][n - 1]) for s in self.schemes))
        return "\n".join(lines) + "\n"

    def plot_data(self, scheme: str) -> str:
        """Two-column ``n value`` text readable by gnuplot."""
        lines = [f"# n {self.quantity} ({scheme})"]
        lines += [f"{n} {fmt17(self.values[scheme][n - 1])}" for n in self.rows]
        return "\n".join(lines) + "\n"


def compare_schemes(
    T: MappingSpec,
    scheme_ids: Sequence[str],
    x1,
    schedule: ParamSchedule,
    N: int,
    reference_p,
    k: NormKind | str = NormKind.EUCLIDEAN,
) -> ComparisonTable:
    """Run every scheme ``N`` iterates from ``x1``; tabulate ``x_n`` (d = 1) or ``||x_n - p||``."""
    p = as_point(reference_p)
    if T.known_fixed_points is not None and not T.all_fixed and p not in T.known_fixed_points:
        raise ValueError(f"reference point {p} is not a declared fixed point of {T.id}")
    traces = {s: run_scheme(s, T, x1, schedule, StopCriteria(N), p, k) for s in scheme_ids}
    one_d = T.dim == 1
    values = {
        s: [t.x[i][0] if one_d else t.errors[i] for i in range(len(t.x))] for s, t in traces.items()
    }
    return ComparisonTable(
        schemes=[t.scheme_id for t in traces.values()],
        rows=list(range(1, N + 1)),
        values={traces[s].scheme_id: v for s, v in values.items()},
        traces={traces[s].scheme_id: t for s, t in traces.items()},
        quantity="x_n" if one_d else "||x_n - p||",
    )


def golden_mismatches(table: ComparisonTable) -> list[tuple[int, str, str, str]]:
    """``(n, scheme, expected, got)`` for every rendered cell that differs from the golden table."""
    bad = []
    for n in table.rows[: len(TABLE1_GOLDEN)]:
        for j, s in enumerate(TABLE1_SCHEMES):
            want = normalize_cell(TABLE1_GOLDEN[n - 1][j])
            got = sig6(table.values[s][n - 1])
            if got != want:
                bad.append((n, s, want, got))
    return bad


@dataclass
class FejerReport:
    passed: bool
    first_violation: int | None
    distances: list[float]


def fejer_check(trace: IterationTrace, p, k: NormKind | str = NormKind.EUCLIDEAN, tol: float = 1e-12) -> FejerReport:
    """``||x_{n+1} - p|| <= ||x_n - p|| + tol`` along the trace; indices are 1-based ``n``."""
    p = as_point(p)
    d = [distance(x, p, k) for x in trace.x]
    for n in range(len(d) - 1):
        if d[n + 1] > d[n] + tol:
            return FejerReport(False, n + 1, d)
    return FejerReport(True, None, d)


@dataclass
class DecayReport:
    passed: bool
    residual_at_horizon: float
    first_quarter_max: float
    last_quarter_max: float


def residual_decay_check(trace: IterationTrace, horizon: int, tol: float) -> DecayReport:
    """Residual at ``n = horizon`` is at most ``tol`` and the last quarter does not
    exceed the first quarter."""
    r = trace.residuals
    if len(r) < horizon:
        raise ValueError(f"trace has {len(r)} iterates, horizon is {horizon}")
    q = max(len(r) // 4, 1)
    first, last = max(r[:q]), max(r[-q:])
    at = r[horizon - 1]
    return DecayReport(at <= tol and last <= first, at, first, last)


def estimate_rate(errors: Sequence[float]) -> float:
    """Geometric ratio from a least-squares fit of ``log(error_n)`` against ``n``.

    Entries at or below 1e-300 are dropped before taking logs.
    """
    e = np.asarray(errors, dtype=float)
    n = np.arange(1, len(e) + 1)
    keep = e > RATE_FLOOR
    if keep.sum() < 4:
        raise ValueError(f"need at least 4 positive errors, got {int(keep.sum())}")
    slope = np.polyfit(n[keep], np.log(e[keep]), 1)[0]
    return float(math.exp(slope))


def iterations_to(errors: Sequence[float], tol: float) -> int | None:
    """First 1-based ``n`` with ``errors[n] <= tol``, or ``None``."""
    for i, e in enumerate(errors):
        if e <= tol:
            return i + 1
    return None


@dataclass
class ConvergenceSummary:
    scheme_id: str
    final_error: float | None
    final_residual: float
    iterations_to: int | None
    empirical_rate: float | None
    fejer_violations: int


def summarize(trace: IterationTrace, error_tol: float = 1e-10, fejer_tol: float = 1e-12) -> ConvergenceSummary:
    errs = trace.errors
    rate = None
    violations = 0
    if errs is not None:
        try:
            rate = estimate_rate(errs)
        except ValueError:
            rate = None
        violations = sum(1 for a, b in zip(errs, errs[1:]) if b > a + fejer_tol)
    return ConvergenceSummary(
        scheme_id=trace.scheme_id,
        final_error=None if errs is None else errs[-1],
        final_residual=trace.residuals[-1],
        iterations_to=None if errs is None else iterations_to(errs, error_tol),
        empirical_rate=rate,
        fejer_violations=violations,
    )


def dominance(table: ComparisonTable, faster: str, slower: str, start: int = 2) -> list[int]:
    """Rows ``n >= start`` where ``|faster| < |slower|`` fails."""
    return [
        n
        for n in table.rows
        if n >= start and not abs(table.cell(faster, n)) < abs(table.cell(slower, n))
    ]
