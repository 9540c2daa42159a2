import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import rationals
from ipslab.models import (
    CONJUGATIONS, FAMILIES, FAMILY_Q_VALUES, ModelSpec, ParameterError, Q_from_q, TwoSiteGenerator,
    build_model, check_braid, check_idempotent, check_stochastic, check_temperley_lieb, conjugate,
    family_parameter_grid, kernel_dimension, presentation_convert, q_from_Q,
)
from ipslab.tensor import exact_array, identity

HALF = Fraction(1, 2)


def random_points(name, count=25, seed=0):
    grid = family_parameter_grid(name, 20)
    rng = random.Random(f"{name}-{seed}")
    return [rng.choice(grid) for _ in range(count)]


def test_sep_matrix():
    sigma = build_model("SEP").sigma
    assert [list(r) for r in sigma] == [[1, 0, 0, 0], [0, HALF, HALF, 0], [0, HALF, HALF, 0], [0, 0, 0, 1]]


def test_asrwpi_at_half():
    sigma = build_model("ASRWPI", theta=HALF).sigma
    assert list(sigma[0]) == [0, 0, 0, 1]
    assert list(sigma[3]) == [0, 0, 0, 1]
    assert list(sigma[1]) == [0, HALF, HALF, 0]


def test_rm_corner_tau_conjugate():
    g = build_model(ModelSpec("RM", {"theta1": 0, "theta2": 0, "theta3": 1}, "tau"))
    assert all(list(row) == [1, 0, 0, 0] for row in g.sigma)


def test_unknown_model_and_range_errors():
    with pytest.raises(ParameterError):
        build_model("XYZ")
    with pytest.raises(ParameterError):
        build_model("CSRWB", theta=Fraction(3, 4))
    with pytest.raises(ParameterError):
        build_model("ASEP", r=Fraction(1, 2), l=Fraction(1, 3))
    with pytest.raises(ValueError):
        ModelSpec("SEP", {}, "sideways")


@pytest.mark.parametrize("name", FAMILIES)
def test_every_family_is_stochastic_idempotent(name):
    for params in random_points(name):
        g = build_model(name, **params)
        assert check_stochastic(g), (name, params)
        assert check_idempotent(g), (name, params)


def test_stochastic_and_idempotent_negative_controls():
    assert check_stochastic(identity(4))
    bad = exact_array([[2, -1, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
    assert not check_stochastic(bad)
    assert not check_idempotent(identity(4) * HALF)
    arw = build_model("ARW", r=Fraction(3, 5), l=Fraction(2, 5))
    assert check_idempotent(arw)


@pytest.mark.parametrize("name", sorted(FAMILY_Q_VALUES))
def test_family_q_values(name):
    for params in random_points(name):
        g = build_model(name, **params)
        report = check_braid(g)
        assert report.holds and report.Q == FAMILY_Q_VALUES[name](g.params), (name, params)


def test_braid_examples():
    assert check_braid(build_model("SEP")).Q == Fraction(1, 4)
    report = check_braid(build_model("ASRWPI", theta=Fraction(3, 10)))
    assert report.holds and report.Q == Fraction(9, 100)
    report = check_braid(build_model("SCAM", theta=Fraction(1, 4)))
    assert not report.holds and report.residual_norm > 0


def test_dm_braid_only_at_half():
    for params in family_parameter_grid("DM", 20):
        report = check_braid(build_model("DM", **params))
        if params["theta"] == HALF:
            assert report.holds and report.Q == Fraction(1, 4)
        else:
            assert not report.holds, params


def test_rm_braid_only_on_curve():
    for params in family_parameter_grid("RM", 12):
        t = params["theta1"] + params["theta2"]
        on_curve = params["theta1"] == t * t and params["theta2"] == t * (1 - t)
        report = check_braid(build_model("RM", **params))
        assert report.holds == on_curve, params
        if on_curve:
            assert report.Q == 0


def test_scam_braid_fails_on_grid():
    # No exceptional theta was found on the grid; the checker result is recorded as is.
    holds = [p["theta"] for p in family_parameter_grid("SCAM", 40)
             if check_braid(build_model("SCAM", **p)).holds]
    assert holds == []


def test_temperley_lieb():
    r, l = Fraction(2, 3), Fraction(1, 3)
    asep = build_model("ASEP", r=r, l=l)
    assert check_temperley_lieb(asep, r * l, "complement")
    assert not check_temperley_lieb(asep, r * l)
    assert not check_temperley_lieb(build_model("SEP"), Fraction(1, 4))
    assert check_temperley_lieb(build_model("SEP"), Fraction(1, 4), "complement")
    assert not check_temperley_lieb(build_model("ARW", r=HALF, l=HALF), Fraction(1, 4))
    assert check_braid(build_model("ARW", r=HALF, l=HALF)).holds
    assert not check_temperley_lieb(identity(4), Fraction(1, 3))


@given(st.sampled_from(FAMILIES), st.sampled_from(CONJUGATIONS), st.integers(0, 10**6))
def test_conjugations_are_involutions(name, which, seed):
    params = random.Random(seed).choice(family_parameter_grid(name, 10))
    g = build_model(name, **params)
    assert conjugate(conjugate(g, which), which) == TwoSiteGenerator(g.sigma)


@given(st.sampled_from(FAMILIES), st.integers(0, 10**6))
def test_rho_and_tau_commute(name, seed):
    params = random.Random(seed).choice(family_parameter_grid(name, 10))
    g = build_model(name, **params)
    assert conjugate(conjugate(g, "rho"), "tau") == conjugate(conjugate(g, "tau"), "rho")
    assert conjugate(g, "rhotau") == conjugate(conjugate(g, "rho"), "tau")


@given(rationals())
def test_bvm_particle_hole(theta):
    assert conjugate(build_model("BVM", theta=theta), "tau").sigma.tolist() == \
        build_model("BVM", theta=1 - theta).sigma.tolist()


@given(rationals(), rationals())
def test_acrw_left_right(r, theta):
    a = conjugate(build_model("ACRW", r=r, theta=theta), "rho")
    b = build_model("ACRW", r=1 - r, theta=theta)
    assert a.sigma.tolist() == b.sigma.tolist()


def test_presentation_convert_examples():
    sep = build_model("SEP").sigma
    forms = presentation_convert(identity(4) - 2 * sep, "s", 1)
    assert np.all(forms["sigma"] == sep)
    g = build_model("CSRWB", theta=Fraction(1, 5)).sigma
    qh = HALF
    s = presentation_convert(g, "sigma", qh)["s"]
    assert np.all(s @ s == identity(4) + (qh - 1 / qh) * s)
    with pytest.raises(ValueError):
        presentation_convert(g, "sigma", 0)


@given(st.sampled_from(["SEP", "CSRWB", "ASEP", "DM"]), rationals(Fraction(1, 10), 3))
def test_presentation_round_trip(name, qh):
    g = build_model(name, **family_parameter_grid(name, 10)[1 if name != "SEP" else 0]).sigma
    forms = presentation_convert(g, "sigma", qh)
    for form in ("s", "q"):
        assert np.all(presentation_convert(forms[form], form, qh)["sigma"] == g)


def test_q_from_Q_examples():
    assert q_from_Q(Fraction(1, 4)) == 1
    assert q_from_Q(Fraction(9, 100)) == Fraction(1, 3)
    # For ASEP the Hecke parameter squared is the asymmetry ratio l / r.
    value = q_from_Q(Fraction(3, 4) * Fraction(1, 4))
    assert abs(value ** 2 - 1 / 3) < 1e-14
    assert q_from_Q(Fraction(4, 5) * Fraction(1, 5)) == Fraction(1, 2)
    value = q_from_Q(Fraction(1, 5))
    assert isinstance(value, float) and abs(1 / (value + 1 / value) ** 2 - 0.2) < 1e-14
    with pytest.raises(ValueError):
        q_from_Q(Fraction(1, 3))


@given(rationals(Fraction(1, 20), 1))
def test_q_round_trip(qh):
    assert q_from_Q(Q_from_q(qh)) == qh


def test_kernel_dimensions():
    assert kernel_dimension(build_model("SEP")) == 3
    assert kernel_dimension(build_model("ARW", r=HALF)) == 2
    assert kernel_dimension(identity(4)) == 4


def test_reshuffle_density_parameters():
    g = build_model("RM", alpha1=Fraction(1, 16), rho=Fraction(1, 4))
    assert list(g.sigma[0]) == [Fraction(1, 16), Fraction(3, 16), Fraction(3, 16), Fraction(9, 16)]
    with pytest.raises(ParameterError):
        build_model("RM", rho=Fraction(1, 4), theta1=0)
    with pytest.raises(ParameterError):
        build_model("RM", density=Fraction(1, 4))
