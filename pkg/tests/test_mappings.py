from fractions import Fraction

import numpy as np
import pytest

from nonexpansive.mappings import (
    Catalog,
    DomainError,
    RegistrationError,
    evaluate,
    from_expression,
    identity,
    load_mappings,
    mapping_from_stanza,
    mapping_to_stanza,
    parse_domain,
    parse_points,
    parse_stanzas,
    residual,
)
from nonexpansive.space import Domain, sample_points

UNIT = Domain.interval(0.0, 1.0)


def test_paper_example_values(paper):
    assert evaluate(paper, 1.0) == (0.625,)
    assert evaluate(paper, 0.0) == (0.0,)
    assert evaluate(paper, 0.8) == (0.4,)
    # ||T1 - T0.8|| = 9/40 forces T(0.8) = 0.4
    assert Fraction(5, 8) - Fraction(9, 40) == Fraction(2, 5)


def test_residual_values(paper):
    assert residual(paper, 1.0) == 0.375
    assert residual(paper, 0.0) == 0.0
    assert residual(paper, 0.9) == float(abs(Fraction(0.9) / 2 - Fraction(0.9)))
    assert residual(paper, 0.9) == 0.45


def test_evaluate_outside_domain_names_bound(paper):
    with pytest.raises(DomainError, match="above upper bound"):
        evaluate(paper, 1.5)
    with pytest.raises(DomainError, match="below lower bound"):
        evaluate(paper, -0.1)
    # membership tolerance admits a few ulps
    evaluate(paper, 1.0 + 1e-13)


def test_lookup_paper_example(catalog):
    T = catalog.lookup("paper_example")
    assert T.known_fixed_points == ((0.0,),)
    assert T.special_points == ((1.0,),)
    assert T.domain == UNIT


def test_register_identity_and_reject_doubling():
    cat = Catalog()
    assert cat.register(from_expression("id", "x", UNIT, [(0.0,)])) == "id"
    with pytest.raises(RegistrationError) as info:
        cat.register(from_expression("double", "2*x", UNIT))
    msg = str(info.value)
    assert "x=(1.0,)" in msg and "Tx=(2.0,)" in msg


def test_duplicate_id_rejected():
    cat = Catalog([identity()])
    with pytest.raises(RegistrationError, match="duplicate"):
        cat.register(identity())


def test_bad_fixed_point_rejected():
    with pytest.raises(RegistrationError, match="residual"):
        Catalog([from_expression("half", "x/2", UNIT, [(0.5,)])])


def test_expression_registers_comparison_thresholds():
    T = from_expression("pe", "x == 1 ? 5/8 : x/2", UNIT, [(0.0,)])
    assert (1.0,) in T.special_points


def test_parametric_lookup(catalog):
    T = catalog.lookup("contraction:0.25")
    assert evaluate(T, 1.0) == (0.25,)
    with pytest.raises(KeyError):
        catalog.lookup("nope")


def test_catalog_fixed_points(catalog):
    for id in catalog.ids():
        T = catalog.lookup(id)
        for p in T.known_fixed_points:
            assert residual(T, p) <= 1e-12
            assert residual(T, p, "max") <= 1e-12


def test_catalog_self_maps(catalog):
    for id in catalog.ids():
        T = catalog.lookup(id)
        X = sample_points(T.domain, 1, 5000, "enriched", T.special_points)
        TX = T.body(X)
        assert T.domain.contains_rows(TX, 1e-12).all(), id


def test_paper_example_quasi_nonexpansive_at_zero(paper):
    X = sample_points(UNIT, 0, 10_000, "enriched", paper.special_points)
    TX = paper.body(X)
    assert np.all(np.abs(TX) <= np.abs(X))


def test_quadratic_negative_control(catalog):
    Q = catalog.lookup("quadratic")
    lhs = abs(evaluate(Q, 0.5)[0] - 1.0)
    rhs = abs(0.5 - 1.0)
    assert (lhs, rhs) == (0.75, 0.5)
    assert lhs > rhs


def test_rotation_is_nonexpansive(catalog):
    R = catalog.lookup("rotation")
    assert evaluate(R, (1.0, 0.0)) == (1.0, 1.0)
    X = sample_points(R.domain, 3, 500, "uniform")
    Y = sample_points(R.domain, 4, 500, "uniform")
    d_before = np.hypot.reduce(X - Y, axis=1)
    d_after = np.hypot.reduce(R.body(X) - R.body(Y), axis=1)
    assert np.all(d_after <= d_before + 1e-15)


CONFIG = """
# the published example
[mapping]
id = pe
dim = 1
domain = 0,1
expr = x == 1 ? 5/8 : x/2
fixed_points = 0
special_points = 1

[mapping]
id = swap
dim = 2
domain = 0,1; 0,2
expr = x[1] / 2; x[0] * 2   # maps the box into itself
fixed_points = 0,0; 0.5,1
"""


def test_config_file_round_trip():
    cat = Catalog()
    assert load_mappings(CONFIG, cat) == ["pe", "swap"]
    pe = cat.lookup("pe")
    assert evaluate(pe, 1.0) == (0.625,)
    swap = cat.lookup("swap")
    assert swap.domain == Domain((0.0, 0.0), (1.0, 2.0))
    assert swap.known_fixed_points == ((0.0, 0.0), (0.5, 1.0))
    again = mapping_from_stanza(parse_stanzas(mapping_to_stanza(swap))[0][1])
    assert again.domain == swap.domain and again.source == swap.source
    assert again.known_fixed_points == swap.known_fixed_points


def test_config_parsing_errors():
    with pytest.raises(ValueError):
        parse_stanzas("[mapping]\nthis line has no equals\n")
    with pytest.raises(ValueError):
        parse_domain("0,1,2")
    with pytest.raises(ValueError):
        mapping_from_stanza({"id": "a", "expr": "x"})
    assert parse_points("0.5, 1; 2,3") == [(0.5, 1.0), (2.0, 3.0)]
    assert parse_domain("0,1", 3) == Domain.cube(0.0, 1.0, 3)
