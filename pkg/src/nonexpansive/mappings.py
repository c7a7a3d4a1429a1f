"""Self-maps of box domains and the built-in catalog."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import exprmap
from .space import (
    MEMBERSHIP_TOL,
    Domain,
    NormKind,
    Point,
    SampleStrategy,
    as_point,
    distance,
    distances,
    sample_points,
)

FIXED_POINT_TOL = 1e-12
VALIDATION_SAMPLES = 2048

RowsFn = Callable[[np.ndarray], np.ndarray]


class DomainError(ValueError):
    """A point lies outside the mapping's domain."""


class RegistrationError(ValueError):
    """A mapping failed validation or its id is already taken."""


@dataclass(frozen=True)
class MappingSpec:
    """A self-map ``T`` of ``domain``.

    ``body`` acts on ``(m, d)`` float64 arrays row by row. ``exprs`` keeps the
    parsed source when the mapping came from the expression language.
    ``all_fixed`` marks mappings whose fixed-point set is the whole domain
    (``known_fixed_points`` then holds representatives only).
    """

    id: str
    domain: Domain
    body: RowsFn = field(repr=False, compare=False)
    known_fixed_points: tuple[Point, ...] | None = None
    special_points: tuple[Point, ...] = ()
    exprs: tuple[exprmap.Node, ...] | None = field(default=None, repr=False)
    source: str | None = None
    all_fixed: bool = False
    description: str = ""

    @property
    def dim(self) -> int:
        return self.domain.dim

    def __call__(self, x) -> Point:
        return evaluate(self, x)


def evaluate(T: MappingSpec, x) -> Point:
    """``Tx`` for a single point inside ``T.domain``."""
    x = as_point(x)
    problem = T.domain.violation(x)
    if problem is not None:
        raise DomainError(f"{T.id}: {problem}; domain is {T.domain}")
    out = T.body(np.array([x], dtype=float))
    return tuple(float(v) for v in out[0])


def evaluate_rows(T: MappingSpec, X: np.ndarray, check: bool = True) -> np.ndarray:
    """Apply ``T`` to every row of ``X``. Bitwise equal to repeated :func:`evaluate`."""
    X = np.asarray(X, dtype=float).reshape(-1, T.dim)
    if check:
        inside = T.domain.contains_rows(X)
        if not inside.all():
            bad = tuple(float(v) for v in X[int(np.argmin(inside))])
            raise DomainError(f"{T.id}: {T.domain.violation(bad)}; domain is {T.domain}")
    return np.asarray(T.body(X), dtype=float).reshape(X.shape)


def residual(T: MappingSpec, x, k: NormKind | str = NormKind.EUCLIDEAN) -> float:
    """``||Tx - x||``."""
    x = as_point(x)
    return distance(evaluate(T, x), x, k)


def residual_rows(T: MappingSpec, X: np.ndarray, k: NormKind | str = NormKind.EUCLIDEAN):
    """Return ``(TX, residuals)`` for the rows of ``X``."""
    TX = evaluate_rows(T, X)
    return TX, distances(TX, X, k)


def require_fixed_points(T: MappingSpec) -> tuple[Point, ...]:
    if not T.known_fixed_points:
        raise ValueError(f"mapping {T.id!r} declares no fixed points; this check needs F(T)")
    return T.known_fixed_points


def fixed_point_distance_rows(T: MappingSpec, X: np.ndarray, k: NormKind | str) -> np.ndarray:
    """``d(x, F(T))`` over the declared fixed points (0 when every point is fixed)."""
    if T.all_fixed:
        return np.zeros(len(X))
    P = require_fixed_points(T)
    return np.min(np.column_stack([distances(X, np.array(p), k) for p in P]), axis=1)


def from_expression(
    id: str,
    src: str,
    domain: Domain,
    fixed_points: Iterable | None = None,
    special_points: Iterable = (),
    description: str = "",
) -> MappingSpec:
    """Build a mapping from expression source. Comparison thresholds of 1-d
    expressions are added to the special points automatically."""
    asts = exprmap.parse(src, domain.dim)
    if len(asts) != domain.dim:
        raise ValueError(
            f"expression has {len(asts)} outputs but domain has dimension {domain.dim}"
        )
    specials = [as_point(p) for p in special_points]
    if domain.dim == 1:
        for _, value in exprmap.comparison_constants(asts):
            if domain.contains((value,), 0.0) and (value,) not in specials:
                specials.append((value,))
    return MappingSpec(
        id=id,
        domain=domain,
        body=lambda X, _asts=asts: exprmap.evaluate_rows(_asts, X),
        known_fixed_points=None if fixed_points is None else tuple(as_point(p) for p in fixed_points),
        special_points=tuple(specials),
        exprs=asts,
        source=src,
        description=description,
    )


def validate(T: MappingSpec, n: int = VALIDATION_SAMPLES, seed: int = 0) -> None:
    """Sampled self-map check plus exact check of the declared fixed points."""
    X = sample_points(T.domain, seed, n, SampleStrategy.ENRICHED, T.special_points)
    try:
        TX = evaluate_rows(T, X)
    except exprmap.ExprEvalError as exc:
        raise RegistrationError(f"{T.id}: evaluation failed during validation: {exc}") from exc
    inside = T.domain.contains_rows(TX, MEMBERSHIP_TOL)
    if not inside.all():
        i = int(np.argmin(inside))
        x, tx = tuple(X[i].tolist()), tuple(TX[i].tolist())
        raise RegistrationError(
            f"{T.id} is not a self-map: x={x} maps to Tx={tx}, "
            f"{T.domain.violation(tx)}; domain is {T.domain}"
        )
    for p in T.known_fixed_points or ():
        if not T.domain.contains(p):
            raise RegistrationError(f"{T.id}: declared fixed point {p} is outside {T.domain}")
        r = residual(T, p)
        if r > FIXED_POINT_TOL:
            raise RegistrationError(
                f"{T.id}: declared fixed point {p} has residual {r!r} > {FIXED_POINT_TOL}"
            )


class Catalog:
    """Registry of validated mappings. Lookup is lock-free; registration is serialized."""

    def __init__(self, specs: Iterable[MappingSpec] = ()):
        self._specs: dict[str, MappingSpec] = {}
        self._lock = threading.Lock()
        for spec in specs:
            self.register(spec)

    def register(self, spec: MappingSpec) -> str:
        with self._lock:
            if spec.id in self._specs:
                raise RegistrationError(f"duplicate mapping id {spec.id!r}")
            validate(spec)
            self._specs[spec.id] = spec
        return spec.id

    def lookup(self, id: str) -> MappingSpec:
        try:
            return self._specs[id]
        except KeyError:
            pass
        name, _, arg = id.partition(":")
        if arg and name in PARAMETRIC:
            spec = PARAMETRIC[name](float(arg))
            validate(spec)
            return spec
        known = ", ".join(sorted(self._specs))
        raise KeyError(f"unknown mapping {id!r}; known: {known}") from None

    def __contains__(self, id: str) -> bool:
        return id in self._specs

    def ids(self) -> list[str]:
        return list(self._specs)

    def copy(self) -> "Catalog":
        other = Catalog()
        other._specs = dict(self._specs)
        return other


# -- built-in mappings -------------------------------------------------------

UNIT = Domain.interval(0.0, 1.0)


def _paper_example_rows(X: np.ndarray) -> np.ndarray:
    return np.where(X == 1.0, 0.625, X / 2.0)


def paper_example() -> MappingSpec:
    return MappingSpec(
        id="paper_example",
        domain=UNIT,
        body=_paper_example_rows,
        known_fixed_points=((0.0,),),
        special_points=((1.0,),),
        description="T(x) = x/2 for x != 1, T(1) = 5/8 on [0, 1]",
    )


def identity(domain: Domain = UNIT) -> MappingSpec:
    return MappingSpec(
        id="identity",
        domain=domain,
        body=lambda X: X.copy(),
        known_fixed_points=(domain.lower, domain.center(), domain.upper),
        all_fixed=True,
        description="T(x) = x",
    )


def constant(c: float = 0.5) -> MappingSpec:
    return MappingSpec(
        id="constant" if c == 0.5 else f"constant:{c!r}",
        domain=UNIT,
        body=lambda X: np.full_like(X, c),
        known_fixed_points=((c,),),
        special_points=((c,),),
        description=f"T(x) = {c!r} on [0, 1]",
    )


def contraction(lam: float = 0.5) -> MappingSpec:
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"contraction factor must lie in [0, 1), got {lam}")
    return MappingSpec(
        id="contraction" if lam == 0.5 else f"contraction:{lam!r}",
        domain=UNIT,
        body=lambda X: lam * X,
        known_fixed_points=((0.0,),),
        description=f"T(x) = {lam!r} x on [0, 1]",
    )


def reflection() -> MappingSpec:
    return MappingSpec(
        id="reflection",
        domain=UNIT,
        body=lambda X: 1.0 - X,
        known_fixed_points=((0.5,),),
        special_points=((0.5,),),
        description="T(x) = 1 - x on [0, 1]",
    )


def _quarter_turn_rows(X: np.ndarray) -> np.ndarray:
    # (u, v) -> (c - (v - c), c + (u - c)) with c = 0.5, written without rounding
    return np.column_stack([1.0 - X[:, 1], X[:, 0]])


def rotation() -> MappingSpec:
    square = Domain.cube(0.0, 1.0, 2)
    return MappingSpec(
        id="rotation",
        domain=square,
        body=_quarter_turn_rows,
        known_fixed_points=((0.5, 0.5),),
        special_points=((0.5, 0.5),),
        description="quarter turn of [0, 1]^2 about its center",
    )


def quadratic() -> MappingSpec:
    return MappingSpec(
        id="quadratic",
        domain=UNIT,
        body=lambda X: X * X,
        known_fixed_points=((0.0,), (1.0,)),
        special_points=((0.5,),),
        description="T(x) = x^2 on [0, 1]; not quasi-nonexpansive at p = 1",
    )


PARAMETRIC = {"constant": constant, "contraction": contraction}


def default_catalog() -> Catalog:
    return Catalog(
        [paper_example(), identity(), constant(), contraction(), reflection(), rotation(), quadratic()]
    )


# -- config files ------------------------------------------------------------


def parse_stanzas(text: str) -> list[tuple[str, dict[str, str]]]:
    """Split ``[name]`` / ``key = value`` text into ``(name, entries)`` stanzas."""
    stanzas: list[tuple[str, dict[str, str]]] = []
    current: dict[str, str] | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = {}
            stanzas.append((line[1:-1].strip(), current))
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if current is None:
            current = {}
            stanzas.append(("mapping", current))
        current[key.strip()] = value.strip()
    return stanzas


def parse_domain(text: str, dim: int | None = None) -> Domain:
    """``"lo,hi; lo,hi; ..."`` with one ``lo,hi`` pair per coordinate.

    A single pair is broadcast when ``dim`` is larger than 1.
    """
    bounds = []
    for part in text.split(";"):
        lo_hi = [s for s in part.replace(" ", "").split(",") if s]
        if len(lo_hi) != 2:
            raise ValueError(f"domain bounds must be 'lo,hi' pairs, got {part!r}")
        bounds.append((float(lo_hi[0]), float(lo_hi[1])))
    if dim is not None and len(bounds) == 1 and dim > 1:
        bounds *= dim
    if dim is not None and len(bounds) != dim:
        raise ValueError(f"domain has {len(bounds)} coordinates, expected {dim}")
    return Domain(tuple(b[0] for b in bounds), tuple(b[1] for b in bounds))


def parse_points(text: str) -> list[Point]:
    """``"x0,x1; x0,x1"``: points separated by ``;``, coordinates by ``,``."""
    return [as_point([float(c) for c in part.split(",")]) for part in text.split(";") if part.strip()]


def format_domain(domain: Domain) -> str:
    return "; ".join(f"{l!r},{u!r}" for l, u in zip(domain.lower, domain.upper))


def format_points(points: Sequence[Sequence[float]]) -> str:
    return "; ".join(",".join(repr(float(c)) for c in p) for p in points)


def mapping_from_stanza(entries: dict[str, str]) -> MappingSpec:
    for key in ("id", "expr", "domain"):
        if key not in entries:
            raise ValueError(f"mapping stanza is missing {key!r}")
    dim = int(entries.get("dim", "0")) or None
    domain = parse_domain(entries["domain"], dim)
    fixed = parse_points(entries["fixed_points"]) if entries.get("fixed_points") else None
    special = parse_points(entries.get("special_points", ""))
    return from_expression(entries["id"], entries["expr"], domain, fixed, special)


def mapping_to_stanza(T: MappingSpec) -> str:
    if T.source is None:
        raise ValueError(f"mapping {T.id!r} is a catalog builtin and has no expression source")
    lines = [
        "[mapping]",
        f"id = {T.id}",
        f"dim = {T.dim}",
        f"domain = {format_domain(T.domain)}",
        f"expr = {T.source}",
    ]
    if T.known_fixed_points:
        lines.append(f"fixed_points = {format_points(T.known_fixed_points)}")
    if T.special_points:
        lines.append(f"special_points = {format_points(T.special_points)}")
    return "\n".join(lines) + "\n"


def load_mappings(text: str, catalog: Catalog) -> list[str]:
    """Register every ``[mapping]`` stanza of a config text into ``catalog``."""
    ids = []
    for name, entries in parse_stanzas(text):
        if name == "mapping":
            ids.append(catalog.register(mapping_from_stanza(entries)))
    return ids
