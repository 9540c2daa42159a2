from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import rationals
from ipslab.models import (
    FAMILIES, TwoSiteGenerator, build_model, check_braid, family_parameter_grid,
)
from ipslab.tensor import identity
from ipslab.yangbaxter import (
    RMatrixFamily, baxterise, baxterise_auto, baxterise_degenerate, fixture_report,
    three_parameter_residual, ybe_residual, ybe_residual_matrix, ybe_residual_swapped,
)

X, Y = Fraction(3, 7), Fraction(5, 4)


def rational_braid_points(name, grid=20, limit=6):
    out = []
    for params in family_parameter_grid(name, grid):
        g = build_model(name, **params)
        if not check_braid(g).holds:
            continue
        if isinstance(baxterise_auto(g).q, float):
            continue
        out.append(g)
    step = max(1, len(out) // limit)
    return out[::step]


BRAID_FAMILIES = [name for name in FAMILIES if name != "SCAM"]


@pytest.mark.parametrize("name", BRAID_FAMILIES)
def test_ybe_exact_for_braid_families(name):
    points = rational_braid_points(name)
    assert points
    for g in points:
        roots = ("small",) if check_braid(g).Q == 0 else ("small", "large")
        for root in roots:
            fam = baxterise_auto(g, root)
            assert ybe_residual(fam, X, Y) == 0
            assert ybe_residual_swapped(fam, X, Y) == 0


def test_quarter_gives_unit_q():
    fam = baxterise(build_model("SEP"))
    assert fam.q == 1
    sigma = fam.base.sigma
    for x in (Fraction(0), Fraction(2, 9), Fraction(3)):
        assert np.all(fam(x) == (1 - x) * (identity(4) - 2 * sigma))


def test_asep_rational_q():
    fam = baxterise(build_model("ASEP", r=Fraction(4, 5)))
    assert fam.q == Fraction(1, 2)
    assert ybe_residual(fam, X, Y) == 0


def test_asep_irrational_q_float():
    fam = baxterise(build_model("ASEP", r=Fraction(2, 3)))
    assert isinstance(fam.q, float)
    assert ybe_residual(fam, 0.43, 1.7) < 1e-12


def test_degenerate_rm_curve():
    fam = baxterise_degenerate(build_model("RM", t=Fraction(2, 5)))
    assert fam.degenerate and fam.Q == 0
    assert ybe_residual(fam, X, Y) == 0


def test_identity_generator_solves_ybe():
    fam = RMatrixFamily(TwoSiteGenerator(identity(4)), Fraction(1, 2), Fraction(4, 25))
    assert ybe_residual(fam, X, Y) == 0


def test_perturbed_generator_fails():
    sigma = build_model("ASEP", r=Fraction(4, 5)).sigma.copy()
    sigma[0, 0] -= Fraction(1, 10)
    sigma[0, 3] += Fraction(1, 10)
    fam = RMatrixFamily(TwoSiteGenerator(sigma), Fraction(1, 2), Fraction(4, 25))
    assert ybe_residual(fam, X, Y) > 0


def test_baxterise_errors():
    with pytest.raises(ValueError):
        baxterise(build_model("SCAM", theta=Fraction(1, 4)))
    with pytest.raises(ValueError):
        baxterise(build_model("RM", t=Fraction(2, 5)))
    with pytest.raises(ValueError):
        baxterise_degenerate(build_model("SEP"))
    with pytest.raises(ValueError):
        baxterise(build_model("SEP"), root="middle")


@given(rationals(Fraction(1, 10), Fraction(9, 10), 10), st.fractions(Fraction(1, 9), 5, max_denominator=9),
       st.fractions(Fraction(1, 9), 5, max_denominator=9))
def test_acsrw_ybe_property(theta, x, y):
    fam = baxterise(build_model("ACSRW", theta=theta))
    assert not isinstance(fam.q, float)
    assert ybe_residual(fam, x, y) == 0


@given(st.sampled_from(rational_braid_points("ACRW")), st.fractions(Fraction(1, 5), 3, max_denominator=7),
       st.fractions(Fraction(1, 5), 3, max_denominator=7), st.fractions(Fraction(1, 5), 3, max_denominator=7))
def test_three_parameter_form(g, u, v, z):
    assert three_parameter_residual(baxterise_auto(g), u, v, z) == 0


@given(st.fractions(-3, 3, max_denominator=11))
def test_r_matrix_affine_in_x(x):
    fam = baxterise(build_model("ASEP", r=Fraction(4, 5)))
    r0, r1 = fam(Fraction(0)), fam(Fraction(1))
    assert np.all(fam(x) == (1 - x) * r0 + x * r1)


def test_generic_residual_matches():
    fam = baxterise(build_model("ASEP", r=Fraction(4, 5)))
    assert ybe_residual_matrix(fam, X, Y) == ybe_residual_swapped(fam, X, Y) == 0


def test_fixture_report():
    report = {c.name: c for c in fixture_report()}
    assert report["branching (large root)"].residual == 0
    assert report["branching (small root)"].residual > 0
    # The pure branching matrix does not match the theta = 0 degenerate form;
    # it matches the same formula continued to theta = 1.
    assert report["pure branching"].residual > 0
    assert report["pure branching (formula at theta = 1)"].residual == 0
    for name in ("immigration (small root)", "immigration (large root)"):
        assert report[name].residual == 0 and report[name].conjugation == "tau"
    assert report["pure immigration"].residual == 0
    for c in report.values():
        if c.residual == 0:
            assert c.scalar not in (None, 0)
