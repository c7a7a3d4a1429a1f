"""Sampled falsification checkers for generalized nonexpansiveness.

Every checker walks a deterministic, prefix-extensible sample stream and
returns the first violation in stream order. A ``no_counterexample_found``
verdict only means nothing was found within the budget.

Premises are tested with exact ``<=``; conclusions count as violated only when
they fail by more than ``tol``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import exprmap
from .mappings import (
    MappingSpec,
    evaluate,
    evaluate_rows,
    fixed_point_distance_rows,
    require_fixed_points,
    residual,
    residual_rows,
)
from .space import (
    NormKind,
    Point,
    SampleStrategy,
    anchor_points,
    as_point,
    convex_combine,
    distance,
    distances,
    sample_pairs,
    sample_points,
)

DEFAULT_TOL = 1e-9
DEFAULT_BUDGET = 10_000
DEFAULT_PAIR_BUDGET = 100_000
DEFAULT_C_SET_BUDGET = 100
DEFAULT_ALPHA_GRID = 16
C_SET_ATTEMPT_FACTOR = 20
LOW_COVERAGE = 0.1
CHUNK = 8192

# sub-stream tags so that different checkers never share random draws
_TAG_POINTS, _TAG_PAIRS, _TAG_C_SET = 0, 1, 2


class Verdict(str, enum.Enum):
    NO_COUNTEREXAMPLE = "no_counterexample_found"
    COUNTEREXAMPLE = "counterexample"


@dataclass
class ConditionReport:
    condition_id: str
    mapping_id: str
    parameters: dict[str, Any]
    verdict: Verdict
    samples_tested: int
    witness: dict[str, Any] | None
    tolerance: float
    rng_seed: int
    notes: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.NO_COUNTEREXAMPLE

    def to_text(self) -> str:
        return serialize_report(self)


def _pt(row) -> Point:
    return tuple(float(v) for v in row)


def _report(cid, T, params, tol, seed, tested, witness=None, notes=None) -> ConditionReport:
    return ConditionReport(
        condition_id=cid,
        mapping_id=T.id,
        parameters=params,
        verdict=Verdict.COUNTEREXAMPLE if witness else Verdict.NO_COUNTEREXAMPLE,
        samples_tested=tested,
        witness=witness,
        tolerance=tol,
        rng_seed=seed,
        notes=notes or {},
    )


def _points(T: MappingSpec, seed: int, n: int) -> np.ndarray:
    return sample_points(
        T.domain, [seed, _TAG_POINTS], n, SampleStrategy.ENRICHED, T.special_points
    )


# -- Definition: quasi-nonexpansive ----------------------------------------------


def check_quasi_nonexpansive(
    T: MappingSpec,
    k: NormKind | str = NormKind.EUCLIDEAN,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
) -> ConditionReport:
    """Search for ``||Tx - p|| > ||x - p|| + tol`` over sampled x and declared p."""
    k = NormKind.parse(k)
    P = require_fixed_points(T)
    X = _points(T, seed, budget)
    TX = evaluate_rows(T, X)
    params = {"norm": k.value, "budget": budget}
    # stream order: x-major, then fixed points in declaration order
    lhs = np.column_stack([distances(TX, np.array(p), k) for p in P])
    rhs = np.column_stack([distances(X, np.array(p), k) for p in P])
    bad = (lhs - rhs) > tol
    if not bad.any():
        return _report("quasi", T, params, tol, seed, bad.size)
    flat = int(np.argmax(bad.ravel()))
    i, j = divmod(flat, len(P))
    witness = {
        "x": _pt(X[i]),
        "p": P[j],
        "Tx": _pt(TX[i]),
        "lhs": float(lhs[i, j]),
        "rhs": float(rhs[i, j]),
    }
    return _report("quasi", T, params, tol, seed, flat + 1, witness)


# -- Definition: condition (C) ---------------------------------------------


def check_condition_C(
    T: MappingSpec,
    k: NormKind | str = NormKind.EUCLIDEAN,
    budget: int = DEFAULT_PAIR_BUDGET,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
) -> ConditionReport:
    """Search for pairs with ``||x - Tx||/2 <= ||x - y||`` but ``||Tx - Ty|| > ||x - y|| + tol``."""
    k = NormKind.parse(k)
    X, Y = sample_pairs(T.domain, [seed, _TAG_PAIRS], budget, T.special_points)
    params = {"norm": k.value, "budget": budget}
    tested = 0
    for s in range(0, len(X), CHUNK):
        Xc, Yc = X[s : s + CHUNK], Y[s : s + CHUNK]
        TX, rX = residual_rows(T, Xc, k)
        TY = evaluate_rows(T, Yc)
        dxy = distances(Xc, Yc, k)
        lhs = distances(TX, TY, k)
        bad = (0.5 * rX <= dxy) & ((lhs - dxy) > tol)
        if bad.any():
            i = int(np.argmax(bad))
            witness = {
                "x": _pt(Xc[i]),
                "y": _pt(Yc[i]),
                "Tx": _pt(TX[i]),
                "Ty": _pt(TY[i]),
                "premise_lhs": float(0.5 * rX[i]),
                "lhs": float(lhs[i]),
                "rhs": float(dxy[i]),
            }
            return _report("C", T, params, tol, seed, tested + i + 1, witness)
        tested += len(Xc)
    return _report("C", T, params, tol, seed, tested)


# -- Definition: condition (D_a) ---------------------------------------------


@dataclass
class _Candidates:
    P: np.ndarray
    Q: np.ndarray
    TQ: np.ndarray
    rP: np.ndarray
    rQ: np.ndarray


class _CandidateStream:
    """Candidate (p, q) pairs for the admissible set, with ``T`` cached on anchors."""

    def __init__(self, T: MappingSpec, k: NormKind, budget: int, seed: int):
        self.T, self.k, self.seed = T, k, seed
        self.attempts = max(C_SET_ATTEMPT_FACTOR * budget, 1)
        anchors = np.array(anchor_points(T.domain, T.special_points), dtype=float)
        TA, rA = residual_rows(T, anchors, k)
        A = len(anchors)
        n = min(self.attempts, A * A)
        idx = np.arange(n)
        self.head = _Candidates(
            anchors[idx // A], anchors[idx % A], TA[idx % A], rA[idx // A], rA[idx % A]
        )

    def get(self, stream: int) -> _Candidates:
        n = self.attempts
        if n <= len(self.head.P):
            return self.head
        P, Q = sample_pairs(
            self.T.domain, [self.seed, _TAG_C_SET, stream], n, self.T.special_points
        )
        h = len(self.head.P)
        TP, rP = residual_rows(self.T, P[h:], self.k)
        TQ, rQ = residual_rows(self.T, Q[h:], self.k)
        return _Candidates(
            P,
            Q,
            np.vstack([self.head.TQ, TQ]),
            np.concatenate([self.head.rP, rP]),
            np.concatenate([self.head.rQ, rQ]),
        )


def _admissible(cands: _Candidates, rx: float, budget: int, tol: float):
    ok = (cands.rP <= rx + tol) & (cands.rQ <= rx + tol)
    idx = np.flatnonzero(ok)[:budget]
    return cands.P[idx], cands.Q[idx], cands.TQ[idx]


def sample_C_set(
    T: MappingSpec,
    x,
    alpha: float,
    budget: int = DEFAULT_C_SET_BUDGET,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    k: NormKind | str = NormKind.EUCLIDEAN,
    stream: int = 0,
) -> list[tuple[Point, Point, Point]]:
    """Up to ``budget`` triples ``(y, p, q)`` with ``y = (1 - alpha) p + alpha Tq``
    and ``p``, ``q`` no more displaced by ``T`` than ``x`` (up to ``tol``).

    Candidates are examined in stream order; at most
    ``C_SET_ATTEMPT_FACTOR * budget`` of them are tried.
    """
    if not 0.5 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (1/2, 1], got {alpha}")
    k = NormKind.parse(k)
    x = as_point(x)
    rx = residual(T, x, k)
    cands = _CandidateStream(T, k, budget, seed).get(stream)
    P, Q, TQ = _admissible(cands, rx, budget, tol)
    return [
        (convex_combine(alpha, _pt(p), _pt(tq)), _pt(p), _pt(q)) for p, q, tq in zip(P, Q, TQ)
    ]


def alpha_grid(a: float, size: int) -> np.ndarray:
    """``size`` evenly spaced values from ``a`` to 1, both endpoints exact."""
    if size < 2:
        raise ValueError("alpha grid needs at least 2 points")
    return np.linspace(a, 1.0, size)


def check_condition_Da(
    T: MappingSpec,
    a: float,
    alpha_grid_size: int = DEFAULT_ALPHA_GRID,
    k: NormKind | str = NormKind.EUCLIDEAN,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    c_set_budget: int = DEFAULT_C_SET_BUDGET,
) -> ConditionReport:
    """Search for ``||Tx - Ty|| > ||x - y|| + tol`` with ``y`` in the admissible set of ``x``.

    Stream order is x first, then alpha ascending from ``a``, then (p, q).
    """
    if not 0.5 < a < 1.0:
        raise ValueError(f"a must lie in (1/2, 1), got {a}")
    k = NormKind.parse(k)
    alphas = alpha_grid(a, alpha_grid_size)
    params = {
        "a": a,
        "alpha_grid_size": alpha_grid_size,
        "norm": k.value,
        "budget": budget,
        "c_set_budget": c_set_budget,
    }
    X = _points(T, seed, budget)
    TX, rX = residual_rows(T, X, k)
    stream = _CandidateStream(T, k, c_set_budget, seed)
    col = alphas[:, None, None]
    tested = accepted = 0
    for i in range(len(X)):
        P, Q, TQ = _admissible(stream.get(i), float(rX[i]), c_set_budget, tol)
        accepted += len(P)
        if not len(P):
            continue
        Y = ((1.0 - col) * P[None] + col * TQ[None]).reshape(-1, T.dim)
        TY = evaluate_rows(T, Y)
        lhs = distances(TY, TX[i], k)
        rhs = distances(Y, X[i], k)
        bad = (lhs - rhs) > tol
        if bad.any():
            j = int(np.argmax(bad))
            ai, pi = divmod(j, len(P))
            witness = {
                "x": _pt(X[i]),
                "alpha": float(alphas[ai]),
                "p": _pt(P[pi]),
                "q": _pt(Q[pi]),
                "y": _pt(Y[j]),
                "Tx": _pt(TX[i]),
                "Ty": _pt(TY[j]),
                "lhs": float(lhs[j]),
                "rhs": float(rhs[j]),
            }
            return _report("Da", T, params, tol, seed, tested + j + 1, witness, _coverage(accepted, i + 1, c_set_budget))
        tested += bad.size
    return _report("Da", T, params, tol, seed, tested, None, _coverage(accepted, len(X), c_set_budget))


def _coverage(accepted: int, n_x: int, c_set_budget: int) -> dict[str, Any]:
    rate = accepted / max(n_x * c_set_budget, 1)
    return {"c_set_acceptance": rate, "low_coverage": rate < LOW_COVERAGE}


# -- Lemma: displacement bound ------------------------------------------------


def check_lemma1(
    T: MappingSpec,
    k: NormKind | str = NormKind.EUCLIDEAN,
    budget: int = DEFAULT_PAIR_BUDGET,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
) -> ConditionReport:
    """Search for ``||Tx - x|| <= ||Ty - y||`` with ``||x - Ty|| > 3||Tx - x|| + ||x - y|| + tol``."""
    k = NormKind.parse(k)
    X, Y = sample_pairs(T.domain, [seed, _TAG_PAIRS], budget, T.special_points)
    params = {"norm": k.value, "budget": budget}
    tested = 0
    for s in range(0, len(X), CHUNK):
        Xc, Yc = X[s : s + CHUNK], Y[s : s + CHUNK]
        TX, rX = residual_rows(T, Xc, k)
        TY, rY = residual_rows(T, Yc, k)
        lhs = distances(Xc, TY, k)
        rhs = 3.0 * rX + distances(Xc, Yc, k)
        bad = (rX <= rY) & ((lhs - rhs) > tol)
        if bad.any():
            i = int(np.argmax(bad))
            witness = {
                "x": _pt(Xc[i]),
                "y": _pt(Yc[i]),
                "Tx": _pt(TX[i]),
                "Ty": _pt(TY[i]),
                "lhs": float(lhs[i]),
                "rhs": float(rhs[i]),
            }
            return _report("lemma1", T, params, tol, seed, tested + i + 1, witness)
        tested += len(Xc)
    return _report("lemma1", T, params, tol, seed, tested)


# -- Definition: condition (I) --------------------------------------------------

H_GRID = 1001


class RateFunctionError(ValueError):
    pass


def _validate_rate(h: exprmap.Expr, upper: float) -> None:
    try:
        h0 = h(0.0)
        grid = np.linspace(0.0, max(upper, 1.0), H_GRID)
        values = exprmap.eval_node_rows(h.node, grid[:, None])
    except ArithmeticError as exc:
        raise RateFunctionError(f"h(r) = {h.src} failed to evaluate: {exc}") from exc
    if h0 != 0.0:
        raise RateFunctionError(f"h(0) must be 0, got {h0!r}")
    if np.any(np.diff(values) < 0):
        r = float(grid[int(np.argmax(np.diff(values) < 0)) + 1])
        raise RateFunctionError(f"h(r) = {h.src} decreases near r = {r!r}")
    if np.any(values[1:] <= 0):
        r = float(grid[1 + int(np.argmax(values[1:] <= 0))])
        raise RateFunctionError(f"h(r) = {h.src} is not positive at r = {r!r}")


def check_condition_I(
    T: MappingSpec,
    h: "str | exprmap.Expr",
    k: NormKind | str = NormKind.EUCLIDEAN,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
) -> ConditionReport:
    """Search for ``||x - Tx|| < h(d(x, F(T))) - tol``."""
    k = NormKind.parse(k)
    if not T.all_fixed:
        require_fixed_points(T)
    h = h if isinstance(h, exprmap.Expr) else exprmap.Expr(h, "r")
    _validate_rate(h, distance(T.domain.lower, T.domain.upper, k))
    params = {"h": h.src, "norm": k.value, "budget": budget}
    X = _points(T, seed, budget)
    TX, rX = residual_rows(T, X, k)
    dF = fixed_point_distance_rows(T, X, k)
    hv = exprmap.eval_node_rows(h.node, dF[:, None])
    bad = (hv - rX) > tol
    if not bad.any():
        return _report("I", T, params, tol, seed, len(X))
    i = int(np.argmax(bad))
    witness = {
        "x": _pt(X[i]),
        "Tx": _pt(TX[i]),
        "dist_to_fixed": float(dF[i]),
        "lhs": float(rX[i]),
        "rhs": float(hv[i]),
    }
    return _report("I", T, params, tol, seed, i + 1, witness)


# -- witness re-check ----------------------------------------------------------


def witness_excess(T: MappingSpec, report: ConditionReport) -> float:
    """Recompute the violated inequality at the witness, without sampling.

    Returns by how much the conclusion fails (positive means violated), or
    ``-inf`` when a premise no longer holds.
    """
    w = report.witness
    if w is None:
        raise ValueError("report has no witness")
    k = NormKind.parse(report.parameters.get("norm", "euclidean"))
    cid = report.condition_id
    x = w["x"]
    Tx = evaluate(T, x)
    if cid == "quasi":
        return distance(Tx, w["p"], k) - distance(x, w["p"], k)
    if cid == "C":
        y = w["y"]
        d = distance(x, y, k)
        if not 0.5 * distance(x, Tx, k) <= d:
            return -math.inf
        return distance(Tx, evaluate(T, y), k) - d
    if cid == "Da":
        rx = distance(Tx, x, k)
        p, q, alpha = w["p"], w["q"], w["alpha"]
        tol = report.tolerance
        if not (residual(T, p, k) <= rx + tol and residual(T, q, k) <= rx + tol):
            return -math.inf
        if not report.parameters["a"] <= alpha <= 1.0:
            return -math.inf
        y = convex_combine(alpha, p, evaluate(T, q))
        return distance(Tx, evaluate(T, y), k) - distance(x, y, k)
    if cid == "lemma1":
        y = w["y"]
        Ty = evaluate(T, y)
        rx = distance(Tx, x, k)
        if not rx <= distance(Ty, y, k):
            return -math.inf
        return distance(x, Ty, k) - (3.0 * rx + distance(x, y, k))
    if cid == "I":
        h = exprmap.Expr(report.parameters["h"], "r")
        dF = float(fixed_point_distance_rows(T, np.array([x]), k)[0])
        return h(dF) - distance(x, Tx, k)
    raise ValueError(f"unknown condition {cid!r}")


# -- serialization ------------------------------------------------------------


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, tuple):
        return "(" + ", ".join(f"{c:.17g}" for c in v) + ")"
    return str(v)


def _unfmt(s: str) -> Any:
    if s.startswith("(") and s.endswith(")"):
        return tuple(float(c) for c in s[1:-1].split(","))
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def serialize_report(r: ConditionReport) -> str:
    """Flat ``key = value`` block; points in parentheses with 17 significant digits."""
    lines = [
        f"condition_id = {r.condition_id}",
        f"mapping_id = {r.mapping_id}",
        f"verdict = {r.verdict.value}",
        f"samples_tested = {r.samples_tested}",
        f"tolerance = {_fmt(float(r.tolerance))}",
        f"rng_seed = {r.rng_seed}",
    ]
    lines += [f"param.{k} = {_fmt(v)}" for k, v in r.parameters.items()]
    for k, v in (r.witness or {}).items():
        lines.append(f"witness.{k} = {_fmt(v)}")
    lines += [f"note.{k} = {_fmt(v)}" for k, v in r.notes.items()]
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> ConditionReport:
    top: dict[str, str] = {}
    groups: dict[str, dict[str, Any]] = {"param": {}, "witness": {}, "note": {}}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        prefix, dot, rest = key.partition(".")
        if dot and prefix in groups:
            groups[prefix][rest] = _unfmt(value)
        else:
            top[key] = value
    params = groups["param"]
    if "h" in params:
        params["h"] = str(params["h"]) if not isinstance(params["h"], str) else params["h"]
    return ConditionReport(
        condition_id=top["condition_id"],
        mapping_id=top["mapping_id"],
        parameters=params,
        verdict=Verdict(top["verdict"]),
        samples_tested=int(top["samples_tested"]),
        witness=groups["witness"] or None,
        tolerance=float(top["tolerance"]),
        rng_seed=int(top["rng_seed"]),
        notes=groups["note"],
    )
