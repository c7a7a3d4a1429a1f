"""Finite-dimensional normed-space primitives.

Points are plain tuples of Python floats. Batch operations work on
``(m, d)`` float64 arrays; the scalar helpers delegate to the batch ones so
that both paths round identically.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

Point = tuple[float, ...]

MEMBERSHIP_TOL = 1e-12


class DimensionError(ValueError):
    """Raised when points of different dimension are combined."""


class NormKind(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    MAX = "max"
    SUM = "sum"

    @classmethod
    def parse(cls, value: "str | NormKind") -> "NormKind":
        if isinstance(value, NormKind):
            return value
        aliases = {"l2": "euclidean", "linf": "max", "inf": "max", "l1": "sum"}
        try:
            return cls(aliases.get(value.lower(), value.lower()))
        except ValueError:
            raise ValueError(
                f"unknown norm {value!r}; expected one of euclidean, max, sum"
            ) from None


def as_point(value) -> Point:
    """Coerce a scalar, sequence or 1-d array into a validated :data:`Point`."""
    if isinstance(value, (int, float, np.floating, np.integer)):
        coords = (float(value),)
    else:
        coords = tuple(float(v) for v in np.asarray(value, dtype=float).ravel())
    if not coords:
        raise ValueError("a point needs at least one coordinate")
    if not all(math.isfinite(c) for c in coords):
        raise ValueError(f"point has non-finite coordinates: {coords}")
    return coords


def _check_dims(a: Sequence[float], b: Sequence[float]) -> None:
    if len(a) != len(b):
        raise DimensionError(f"dimension mismatch: {len(a)} vs {len(b)}")


def norm_rows(diff: np.ndarray, kind: NormKind = NormKind.EUCLIDEAN) -> np.ndarray:
    """Row-wise norm of an ``(m, d)`` array."""
    kind = NormKind.parse(kind)
    diff = np.asarray(diff, dtype=float)
    if diff.shape[1] == 1:
        return np.abs(diff[:, 0])
    if kind is NormKind.EUCLIDEAN:
        return np.hypot.reduce(diff, axis=1)
    if kind is NormKind.MAX:
        return np.max(np.abs(diff), axis=1)
    return np.sum(np.abs(diff), axis=1)


def distances(a: np.ndarray, b: np.ndarray, kind: NormKind = NormKind.EUCLIDEAN) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return norm_rows(np.atleast_2d(a - b), kind)


def distance(a: Sequence[float], b: Sequence[float], kind: NormKind = NormKind.EUCLIDEAN) -> float:
    """``||a - b||`` under the chosen norm."""
    _check_dims(a, b)
    diff = np.array([[x - y for x, y in zip(a, b)]], dtype=float)
    return float(norm_rows(diff, kind)[0])


def convex_combine(alpha: float, a: Sequence[float], b: Sequence[float]) -> Point:
    """``(1 - alpha) * a + alpha * b``, computed literally per coordinate."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    _check_dims(a, b)
    return tuple((1.0 - alpha) * u + alpha * v for u, v in zip(a, b))


def convex_combine_rows(alpha, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batch form of :func:`convex_combine`; ``alpha`` may be a column array."""
    return (1.0 - alpha) * a + alpha * b


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``[l_1, u_1] x ... x [l_d, u_d]``."""

    lower: Point
    upper: Point

    def __post_init__(self):
        lo, hi = as_point(self.lower), as_point(self.upper)
        _check_dims(lo, hi)
        for i, (l, u) in enumerate(zip(lo, hi)):
            if l > u:
                raise ValueError(f"domain bound {i}: lower {l} exceeds upper {u}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def interval(cls, lo: float, hi: float) -> "Domain":
        return cls((lo,), (hi,))

    @classmethod
    def cube(cls, lo: float, hi: float, dim: int) -> "Domain":
        return cls((lo,) * dim, (hi,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def corners(self) -> list[Point]:
        pairs = [(l,) if l == u else (l, u) for l, u in zip(self.lower, self.upper)]
        return [tuple(c) for c in itertools.product(*pairs)]

    def center(self) -> Point:
        return tuple(0.5 * (l + u) for l, u in zip(self.lower, self.upper))

    def violation(self, x: Sequence[float], tol: float = MEMBERSHIP_TOL) -> str | None:
        """Describe the first violated bound, or ``None`` if ``x`` is inside."""
        if len(x) != self.dim:
            return f"point has dimension {len(x)}, domain has dimension {self.dim}"
        for i, (v, l, u) in enumerate(zip(x, self.lower, self.upper)):
            if not v >= l - tol:
                return f"coordinate {i} = {v!r} below lower bound {l!r}"
            if not v <= u + tol:
                return f"coordinate {i} = {v!r} above upper bound {u!r}"
        return None

    def contains(self, x: Sequence[float], tol: float = MEMBERSHIP_TOL) -> bool:
        return self.violation(x, tol) is None

    def contains_rows(self, X: np.ndarray, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        lo = np.asarray(self.lower) - tol
        hi = np.asarray(self.upper) + tol
        return np.all((X >= lo) & (X <= hi), axis=1)

    def scale_unit(self, U: np.ndarray) -> np.ndarray:
        """Map rows of ``[0, 1)^d`` onto the box."""
        lo = np.asarray(self.lower)
        return lo + U * (np.asarray(self.upper) - lo)

    def grid(self, max_points: int = 1024, max_per_axis: int = 11) -> list[Point]:
        """Regular grid with ``lower + (upper - lower) * i / m`` nodes per axis."""
        per_axis = max_per_axis
        while per_axis > 2 and per_axis**self.dim > max_points:
            per_axis -= 1
        m = per_axis - 1
        axes = []
        for l, u in zip(self.lower, self.upper):
            if l == u:
                axes.append((l,))
            else:
                axes.append(tuple(l + (u - l) * i / m for i in range(m + 1)))
        return [tuple(c) for c in itertools.product(*axes)]

    def __str__(self) -> str:
        return " x ".join(f"[{l!r}, {u!r}]" for l, u in zip(self.lower, self.upper))


class SampleStrategy(str, enum.Enum):
    UNIFORM = "uniform"
    ENRICHED = "enriched"


def make_rng(seed: int | Sequence[int]) -> np.random.Generator:
    """PCG64 generator seeded through ``SeedSequence``.

    The generator is pinned explicitly rather than taken from
    ``default_rng`` so that the bit stream cannot change under us.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def anchor_points(domain: Domain, special_points: Iterable[Sequence[float]] = ()) -> list[Point]:
    """Corners, then in-domain special points, then the coarse grid; no repeats."""
    seen: set[Point] = set()
    out: list[Point] = []
    candidates = itertools.chain(
        domain.corners(), (as_point(p) for p in special_points), domain.grid()
    )
    for p in candidates:
        if len(p) == domain.dim and domain.contains(p, 0.0) and p not in seen:
            seen.add(p)
            out.append(p)
    return out


def sample_points(
    domain: Domain,
    seed: int | Sequence[int],
    n: int,
    strategy: SampleStrategy | str = SampleStrategy.ENRICHED,
    special_points: Iterable[Sequence[float]] = (),
) -> np.ndarray:
    """First ``n`` points of the deterministic sample stream, as ``(n, d)``.

    The stream is prefix-extensible: ``sample_points(..., n)`` is a prefix of
    ``sample_points(..., n + k)``.
    """
    strategy = SampleStrategy(strategy)
    anchors = anchor_points(domain, special_points) if strategy is SampleStrategy.ENRICHED else []
    head = np.array(anchors[:n], dtype=float).reshape(-1, domain.dim)
    rest = n - len(head)
    if rest <= 0:
        return head
    U = make_rng(seed).random((rest, domain.dim))
    return np.vstack([head, domain.scale_unit(U)])


def sample(
    domain: Domain,
    rng_seed: int,
    strategy: SampleStrategy | str = SampleStrategy.UNIFORM,
    index: int = 0,
    special_points: Iterable[Sequence[float]] = (),
) -> Point:
    """The ``index``-th draw of the stream defined by ``(domain, seed, strategy)``."""
    X = sample_points(domain, rng_seed, index + 1, strategy, special_points)
    return tuple(float(v) for v in X[index])


def sample_pairs(
    domain: Domain,
    seed: int | Sequence[int],
    n: int,
    special_points: Iterable[Sequence[float]] = (),
) -> tuple[np.ndarray, np.ndarray]:
    """First ``n`` pairs of the enriched pair stream.

    All anchor x anchor pairs come first. After that, pairs cycle through
    (anchor, uniform), (uniform, anchor) and (uniform, uniform); each such
    pair consumes exactly two uniform draws so the stream stays
    prefix-extensible.
    """
    anchors = np.array(anchor_points(domain, special_points), dtype=float)
    A = len(anchors)
    k = min(n, A * A)
    idx = np.arange(k)
    X_head, Y_head = anchors[idx // A], anchors[idx % A]
    rest = n - k
    if rest <= 0:
        return X_head, Y_head
    U = domain.scale_unit(make_rng(seed).random((2 * rest, domain.dim)))
    U1, U2 = U[0::2], U[1::2]
    t = np.arange(rest)
    pattern = (t % 3)[:, None]
    anchor = anchors[(t // 3) % A]
    X = np.where(pattern == 0, anchor, U1)
    Y = np.where(pattern == 1, anchor, U2)
    return np.vstack([X_head, X]), np.vstack([Y_head, Y])
