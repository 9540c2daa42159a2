import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import rationals
from ipslab.duality import (
    DualityBasisElement, DualRules, UnsupportedPair, build_duality_vector, classify_action,
    collapse_consistency, coordinate_hecke_operators, dual_generator_action,
    duality_identity_check, family_supported, find_factorized_eigenvectors,
    preferred_eigenvector, single_bond_action, staircase_boundary_identity,
    staircase_relation_check,
)
from ipslab.models import (
    FAMILIES, ModelSpec, build_model, check_braid, family_parameter_grid, kernel_dimension,
)
from ipslab.tensor import exact_array, index_bits

HALF = Fraction(1, 2)
THIRD = Fraction(1, 3)


def vec(family, w, anchors, n):
    return build_duality_vector(DualityBasisElement(family, w, anchors, n))


# Factorized eigenvectors

def test_eigenvectors_examples():
    assert find_factorized_eigenvectors(build_model("ARW", r=Fraction(3, 5))).vectors == ((-1, 1),)
    theta = Fraction(2, 7)
    assert (-theta, 1) in find_factorized_eigenvectors(build_model("ACSRW", theta=theta)).vectors
    savm = find_factorized_eigenvectors(build_model("SAVM"))
    assert savm.vectors == () and not savm.every_w
    assert find_factorized_eigenvectors(build_model("SEP")).every_w


@pytest.mark.parametrize("name", FAMILIES)
def test_eigenvectors_are_eigenvectors(name):
    for params in family_parameter_grid(name, 6)[::3]:
        g = build_model(name, **params)
        for a, b in find_factorized_eigenvectors(g).vectors:
            ww = np.outer([a, b], [a, b]).reshape(-1)
            assert np.all(g.sigma @ exact_array(list(ww)) == exact_array(list(ww)))


def test_preferred_eigenvectors_are_eigenvectors():
    for name in ("SEP", "BVM", "ACSRW", "ACRW", "ARW", "CSRWB", "ASRWPI", "SCAM", "DM"):
        spec = ModelSpec(name, family_parameter_grid(name, 5)[2] if name != "SEP" else {})
        g = build_model(spec)
        a, b = preferred_eigenvector(spec)
        ww = exact_array([a * a, a * b, b * a, b * b])
        assert np.all(g.sigma @ ww == ww), spec


# Local action

def test_classify_action_examples():
    r, l = Fraction(2, 3), THIRD
    form = classify_action(build_model("ARW", r=r, l=l), (-1, 1))
    assert form.kind == "interval" and form.coefficients[0] == (l, r, 0)
    form = classify_action(build_model("SEP"), (0, 1))
    assert form.kind == "exchange" and form.coefficients[:2] == (HALF, HALF)
    theta = Fraction(1, 5)
    form = classify_action(build_model("ASRWPI", theta=theta), (-1, 1))
    assert form.kind == "interval" and form.coefficients[0][:2] == (theta, theta)


def test_scam_mixed_action_is_neither():
    theta = Fraction(1, 4)
    form = classify_action(build_model("SCAM", theta=theta), (2 * theta - 1, 1))
    assert form.kind == "neither"


def test_braid_models_act_by_interval_or_exchange():
    # Braid-satisfying models with a factorized eigenvector and a two-dimensional
    # fixed space act by an interval or an exchange rule.
    checked = 0
    for name in FAMILIES:
        for params in family_parameter_grid(name, 6):
            g = build_model(name, **params)
            if kernel_dimension(g) != 2 or not check_braid(g).holds:
                continue
            for w in find_factorized_eigenvectors(g).vectors:
                if w == (1, 0):
                    continue
                assert classify_action(g, w).kind in ("interval", "exchange"), (name, params, w)
                checked += 1
    assert checked > 20


# Basis vectors

def test_empty_alternating_interval_is_vacuum():
    assert np.all(vec("alternating_interval", (-1, 1), (), 4) == exact_array([1] * 16))


def test_alternating_interval_spin_function():
    v = vec("alternating_interval", (-1, 1), (1, 3), 4)
    for i in range(16):
        eta = index_bits(i, 4)
        assert v[i] == (-1) ** (eta[1] + eta[2])


def test_product_moment_indicator():
    v = vec("product_moment", (1, 0), (1, 2), 3)
    for i in range(8):
        eta = index_bits(i, 3)
        assert v[i] == eta[0] * eta[1]


def test_anchor_out_of_range():
    with pytest.raises(ValueError):
        vec("alternating_interval", (-1, 1), (1, 6), 4)
    with pytest.raises(ValueError):
        DualityBasisElement("alternating_interval", (-1, 1), (1,), 4)
    with pytest.raises(ValueError):
        DualityBasisElement("product_moment", (1, 0), (3, 1), 4)


@given(st.integers(2, 7), st.data())
def test_collapse_rule(n, data):
    anchors = sorted(data.draw(st.lists(st.integers(0, n), min_size=2, max_size=4)))
    if len(anchors) % 2:
        anchors = anchors[:-1]
    i = data.draw(st.integers(0, len(anchors) - 2))
    anchors[i + 1] = anchors[i]
    anchors = sorted(anchors)
    full = vec("alternating_interval", (-1, 1), anchors, n)
    j = next(k for k in range(len(anchors) - 1) if anchors[k] == anchors[k + 1])
    reduced = anchors[:j] + anchors[j + 2:]
    assert np.all(full == vec("alternating_interval", (-1, 1), reduced, n))


def test_collapse_consistency_lattice():
    assert collapse_consistency((-1, 1), 6)


# Dual actions

def test_arw_two_anchor_action():
    r, l = Fraction(3, 5), Fraction(2, 5)
    spec = ModelSpec("ARW", {"r": r, "l": l})
    e = DualityBasisElement("alternating_interval", (-1, 1), (3, 7), 10)
    action = dual_generator_action(spec, e).as_dict()
    # Both ends perform the same walk, left at rate r and right at rate l.
    assert action == {(2, 7): r, (4, 7): l, (3, 6): r, (3, 8): l, (3, 7): -2}


def test_arw_single_bond_example():
    r, l = Fraction(3, 5), Fraction(2, 5)
    spec = ModelSpec("ARW", {"r": r, "l": l})
    e = DualityBasisElement("alternating_interval", (-1, 1), (1, 3, 4, 6), 8)
    action = single_bond_action(spec, e, 3).as_dict()
    assert action == {(1, 2, 4, 6): r, (1, 6): l}


def test_asrwpi_action_form():
    theta = Fraction(1, 5)
    spec = ModelSpec("ASRWPI", {"theta": theta})
    e = DualityBasisElement("alternating_interval", (-1, 1), (2, 5, 9, 12), 14)
    action = dual_generator_action(spec, e).as_dict()
    n = 2
    for anchors, c in action.items():
        if anchors == e.anchors:
            assert c == -2 * n * theta * 2 - (1 - 2 * theta) * 2 * n
        else:
            assert c == theta


def test_string_route_equals_anchor_route():
    cases = [(ModelSpec("ARW", {"r": THIRD}), (-1, 1)),
             (ModelSpec("SCAM", {"theta": Fraction(1, 4)}), (1, 0)),
             (ModelSpec("CSRWB", {"theta": Fraction(1, 5)}), (0, 1)),
             (ModelSpec("ASRWPI", {"theta": Fraction(2, 7)}), (-1, 1)),
             (ModelSpec("ACRW", {"r": THIRD, "theta": Fraction(1, 4)}), (-Fraction(1, 4), 1))]
    for spec, w in cases:
        rules = DualRules(spec, "alternating_interval", w)
        for anchors in itertools.combinations(range(0, 12), 4):
            assert rules.action(anchors) == rules.anchor_action(anchors), (spec, anchors)


def test_unsupported_pairs():
    assert not family_supported(build_model("SAVM"), "alternating_interval", (-1, 1))
    with pytest.raises(UnsupportedPair):
        DualRules(build_model("SCAM", theta=Fraction(1, 4)), "alternating_interval", (-HALF, 1))


# Brute-force identities

IDENTITY_CASES = [
    (ModelSpec("ARW", {"r": THIRD}), "alternating_interval", None, 4),
    (ModelSpec("ACRW", {"r": Fraction(2, 5), "theta": Fraction(1, 3)}), "alternating_interval", None, 4),
    (ModelSpec("SEP"), "product_moment", (1, 0), 3),
    (ModelSpec("AVM", {"r": Fraction(1, 4)}), "product_moment", (1, 0), 3),
    (ModelSpec("CSRWB", {"theta": Fraction(1, 5)}), "alternating_interval", (0, 1), 4),
    (ModelSpec("ASRWPI", {"theta": Fraction(3, 10)}), "alternating_interval", (-1, 1), 4),
    (ModelSpec("SCAM", {"theta": Fraction(1, 4)}), "alternating_interval", (1, 0), 4),
    (ModelSpec("ASEP", {"r": Fraction(3, 4)}), "staircase", (Fraction(1, 3), 1), 2),
]


@pytest.mark.parametrize("spec,family,w,order", IDENTITY_CASES, ids=lambda x: str(x)[:30])
def test_duality_identity(spec, family, w, order):
    result = duality_identity_check(spec, family, 8, order, w)
    assert result.max_residual == 0 and result.failures == []
    assert result.checked > 0


def test_symmetric_exclusion_product_moment_any_w():
    result = duality_identity_check(ModelSpec("SEP"), "product_moment", 6, 2, (1, 2))
    assert result.max_residual == 0


def test_asymmetric_exclusion_rejects_product_moment():
    with pytest.raises(UnsupportedPair):
        duality_identity_check(ModelSpec("ASEP", {"r": THIRD}), "product_moment", 6, 2, (1, 0))


@given(rationals(Fraction(10, 19), Fraction(18, 19)))
def test_staircase_duality_over_rates(r):
    spec = ModelSpec("ASEP", {"r": r})
    w = ((1 - r) / r, Fraction(1))
    assert duality_identity_check(spec, "staircase", 6, 2, w).max_residual == 0


# Staircase relations

def test_staircase_relations():
    assert staircase_relation_check(Fraction(3, 4), Fraction(1, 4), 4, 5)
    assert staircase_relation_check(Fraction(2, 3), THIRD, 3, 3)
    with pytest.raises(ValueError):
        staircase_relation_check(THIRD, Fraction(2, 3), 2, 2)


def test_staircase_mixed_power_coefficients():
    r, l = Fraction(3, 4), Fraction(1, 4)
    q = l / r
    g = build_model("ASEP", r=r, l=l)
    w = (q, Fraction(1))

    def wk(k):
        return exact_array([w[0] ** k, w[1] ** k])

    lhs = g.sigma @ np.kron(wk(2), wk(5))
    a, b = (q * q - q ** 3) / (q * q - 1), (q ** 3 - 1) / (q * q - 1)
    assert np.all(lhs == a * np.kron(wk(2), wk(2)) + b * np.kron(wk(3), wk(3)))


@pytest.mark.parametrize("n", [4, 6, 8])
def test_staircase_boundary_identity(n):
    assert staircase_boundary_identity(Fraction(3, 4), Fraction(1, 4), n)


# Coordinate Hecke representation

@pytest.fixture(scope="module")
def one_particle():
    return coordinate_hecke_operators(10, Fraction(2, 3), THIRD, 1)


@pytest.fixture(scope="module")
def two_particles():
    return coordinate_hecke_operators(10, Fraction(2, 3), THIRD, 2)


def test_one_particle_temperley_lieb(one_particle):
    assert one_particle.quadratic_residual() == 0
    assert one_particle.temperley_lieb_residual() == 0
    assert one_particle.commutation_residual() == 0


def test_two_particle_hecke(two_particles):
    assert two_particles.quadratic_residual() == 0
    assert two_particles.hecke_residual() == 0
    assert two_particles.commutation_residual() == 0
    assert two_particles.temperley_lieb_residual() > 0


def test_window_too_small():
    with pytest.raises(ValueError):
        coordinate_hecke_operators(2, HALF, HALF, 1)
