from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonexpansive.space import (
    DimensionError,
    Domain,
    NormKind,
    anchor_points,
    convex_combine,
    distance,
    sample,
    sample_pairs,
    sample_points,
)

NORMS = list(NormKind)
coord = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def test_distance_examples():
    assert distance((1.0,), (0.8,), "euclidean") == pytest.approx(0.2, abs=1e-15)
    for k in NORMS:
        assert distance((0.37,), (0.37,), k) == 0.0
    assert distance((3.0, 4.0), (0.0, 0.0), "euclidean") == 5.0
    assert distance((3.0, 4.0), (0.0, 0.0), "max") == 4.0
    assert distance((3.0, 4.0), (0.0, 0.0), "sum") == 7.0


def test_distance_dimension_mismatch():
    with pytest.raises(DimensionError):
        distance((1.0,), (1.0, 2.0))


def test_convex_combine_examples():
    # exact: 0.55 * 9/10 + 0.45 * 9/20
    exact = Fraction(55, 100) * Fraction(9, 10) + Fraction(45, 100) * Fraction(9, 20)
    assert exact == Fraction("0.6975")
    (z,) = convex_combine(0.45, (0.9,), (0.45,))
    assert abs(Fraction(z) - exact) <= Fraction(1, 10**15)
    a, b = (0.1, 0.7), (0.3, -2.0)
    assert convex_combine(0.0, a, b) == a
    assert convex_combine(1.0, a, b) == b


@pytest.mark.parametrize("alpha", [-0.1, 1.5])
def test_convex_combine_rejects_alpha(alpha):
    with pytest.raises(ValueError):
        convex_combine(alpha, (0.0,), (1.0,))


def test_convex_combine_dimension_mismatch():
    with pytest.raises(DimensionError):
        convex_combine(0.5, (0.0,), (1.0, 2.0))


def test_domain_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        Domain((1.0,), (0.0,))


def test_enriched_sampling_starts_with_corners():
    unit = Domain.interval(0.0, 1.0)
    X = sample_points(unit, 3, 5, "enriched")
    assert X[0, 0] == 0.0 and X[1, 0] == 1.0
    assert sample(unit, 3, "enriched", index=0) == (0.0,)
    assert sample(unit, 3, "enriched", index=1) == (1.0,)


def test_special_points_follow_corners():
    unit = Domain.interval(0.0, 1.0)
    anchors = anchor_points(unit, [(0.37,), (1.0,), (5.0,)])
    assert anchors[:3] == [(0.0,), (1.0,), (0.37,)]
    assert (5.0,) not in anchors


def test_degenerate_domain_sampling():
    single = Domain.interval(0.5, 0.5)
    X = sample_points(single, 11, 50, "uniform")
    assert np.all(X == 0.5)
    X = sample_points(single, 11, 50, "enriched")
    assert np.all(X == 0.5)


def test_uniform_mean():
    X = sample_points(Domain.interval(0.0, 1.0), 2024, 10_000, "uniform")
    assert abs(X.mean() - 0.5) < 0.02


def test_sampling_is_reproducible_and_prefix_extensible():
    box = Domain((0.0, -1.0), (1.0, 2.0))
    A = sample_points(box, 9, 300, "enriched", [(0.5, 0.5)])
    B = sample_points(box, 9, 300, "enriched", [(0.5, 0.5)])
    C = sample_points(box, 9, 777, "enriched", [(0.5, 0.5)])
    assert A.tobytes() == B.tobytes()
    assert C[:300].tobytes() == A.tobytes()
    X1, Y1 = sample_pairs(box, 4, 500)
    X2, Y2 = sample_pairs(box, 4, 1500)
    assert X2[:500].tobytes() == X1.tobytes() and Y2[:500].tobytes() == Y1.tobytes()


def test_pcg64_stream_is_pinned():
    # First uniform draw of the documented generator for seed 0; guards against
    # an accidental switch of bit generator.
    X = sample_points(Domain.interval(0.0, 1.0), 0, 1, "uniform")
    expected = np.random.Generator(np.random.PCG64(np.random.SeedSequence(0))).random()
    assert X[0, 0] == expected


def test_samples_stay_in_domain():
    box = Domain((-3.0, 0.0, 1.0), (-1.0, 0.0, 4.0))
    X = sample_points(box, 1, 2000, "enriched")
    assert box.contains_rows(X, 0.0).all()


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.tuples(coord, coord, coord), min_size=3, max_size=3), st.sampled_from(NORMS))
def test_triangle_inequality(pts, k):
    x, y, z = pts
    assert distance(x, z, k) <= distance(x, y, k) + distance(y, z, k) + 1e-12 * (
        1 + distance(x, y, k) + distance(y, z, k)
    )
    assert distance(x, y, k) == distance(y, x, k)


@settings(max_examples=300, deadline=None)
@given(st.tuples(coord, coord), st.floats(-1e3, 1e3), st.sampled_from(NORMS))
def test_norm_homogeneity(x, s, k):
    sx = tuple(s * c for c in x)
    assert distance(sx, (0.0, 0.0), k) == pytest.approx(abs(s) * distance(x, (0.0, 0.0), k), rel=1e-12, abs=1e-300)


@settings(max_examples=1000, deadline=None)
@given(st.floats(0, 1), st.integers(0, 2**32))
def test_convex_combine_stays_in_box(alpha, seed):
    box = Domain((-2.0, 0.0), (3.0, 1e-3))
    a, b = sample_points(box, seed, 2, "uniform")
    c = convex_combine(alpha, tuple(a), tuple(b))
    assert box.contains(c, 1e-12)


@settings(max_examples=1000, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_collinear_distance(alpha, a, b):
    c = convex_combine(alpha, (a,), (b,))
    assert abs(distance(c, (a,)) - alpha * distance((b,), (a,))) <= 1e-12
