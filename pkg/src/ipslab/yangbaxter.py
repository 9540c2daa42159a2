"""Baxterisation of idempotent generators and Yang-Baxter checks.

For a generator sigma obeying the deformed braid relation with Q > 0 and
q + 1/q = 1/sqrt(Q),

    R(x) = q - x/q - (1 - x)(q + 1/q) sigma

solves the Yang-Baxter equation. When Q = 0 the rescaled limit
R(x) = -x - (1 - x) sigma is used instead. Both roots q and 1/q of the
quadratic give solutions; ``root`` selects between them.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .models import CONJUGATIONS, TwoSiteGenerator, build_model, check_braid, q_from_Q
from .tensor import exact_array, frac, identity, kron

ROOTS = ("small", "large")


@dataclass(frozen=True)
class RMatrixFamily:
    """x -> R(x); ``q`` is None for the degenerate Q = 0 form."""

    base: TwoSiteGenerator
    q: object
    Q: Fraction

    @property
    def degenerate(self) -> bool:
        return self.q is None

    def _sigma(self, exact: bool) -> np.ndarray:
        return self.base.sigma if exact else np.array(self.base.sigma, dtype=float)

    def __call__(self, x) -> np.ndarray:
        exact = not isinstance(x, float) and not isinstance(self.q, float)
        if exact:
            x = frac(x)
        sigma = self._sigma(exact)
        eye = identity(4, exact)
        if self.degenerate:
            return -x * eye - (1 - x) * sigma
        q = self.q if exact else float(self.q)
        return (q - x / q) * eye - (1 - x) * (q + 1 / q) * sigma


def baxterise(g: TwoSiteGenerator, Q=None, root: str = "small") -> RMatrixFamily:
    """R-matrix family for a generator satisfying the braid relation with Q > 0."""
    if root not in ROOTS:
        raise ValueError(f"root must be one of {ROOTS}")
    if Q is None:
        report = check_braid(g)
        if not report.holds:
            raise ValueError(f"{g.label or 'generator'} does not satisfy the braid relation")
        Q = report.Q
    Q = frac(Q) if not isinstance(Q, float) else Q
    if Q <= 0:
        raise ValueError("Q must be positive; use baxterise_degenerate for Q = 0")
    q = q_from_Q(Q)
    if root == "large":
        q = 1 / q
    return RMatrixFamily(g, q, Q)


def baxterise_degenerate(g: TwoSiteGenerator) -> RMatrixFamily:
    report = check_braid(g)
    if not report.holds or report.Q != 0:
        raise ValueError("the degenerate form needs the braid relation with Q = 0")
    return RMatrixFamily(g, None, Fraction(0))


def baxterise_auto(g: TwoSiteGenerator, root: str = "small") -> RMatrixFamily:
    report = check_braid(g)
    if not report.holds:
        raise ValueError(f"{g.label or 'generator'} does not satisfy the braid relation")
    return baxterise_degenerate(g) if report.Q == 0 else baxterise(g, report.Q, root)


def _product(*mats):
    out = mats[0]
    for m in mats[1:]:
        out = out @ m
    return out


def ybe_residual(fam: RMatrixFamily, x, y):
    """Max entry of R1(x) R2(xy) R1(y) - R2(y) R1(xy) R2(x) with R1 = R (x) I, R2 = I (x) R."""
    exact = not any(isinstance(v, float) for v in (x, y, fam.q))
    if exact:
        x, y = frac(x), frac(y)
    eye = identity(2, exact)

    def r1(z):
        return kron(fam(z), eye)

    def r2(z):
        return kron(eye, fam(z))

    diff = _product(r1(x), r2(x * y), r1(y)) - _product(r2(y), r1(x * y), r2(x))
    return max(abs(v) for v in diff.flat)


def ybe_residual_swapped(fam: RMatrixFamily, x, y):
    """The same equation with the roles of the two bonds exchanged."""
    exact = not any(isinstance(v, float) for v in (x, y, fam.q))
    if exact:
        x, y = frac(x), frac(y)
    eye = identity(2, exact)
    diff = (_product(kron(eye, fam(x)), kron(fam(x * y), eye), kron(eye, fam(y)))
            - _product(kron(fam(y), eye), kron(eye, fam(x * y)), kron(fam(x), eye)))
    return max(abs(v) for v in diff.flat)


def three_parameter_residual(fam: RMatrixFamily, u, v, z):
    """Yang-Baxter equation for R(u, v) = R(u / v)."""
    u, v, z = frac(u), frac(v), frac(z)
    return ybe_residual_swapped(fam, u / v, v / z)


def ybe_residual_matrix(r_of_x, x, y):
    """Yang-Baxter residual for an arbitrary callable x -> 4x4 matrix."""
    exact = not any(isinstance(v, float) for v in (x, y))
    eye = identity(2, exact)
    diff = (_product(kron(r_of_x(x), eye), kron(eye, r_of_x(x * y)), kron(r_of_x(y), eye))
            - _product(kron(eye, r_of_x(y)), kron(r_of_x(x * y), eye), kron(eye, r_of_x(x))))
    return max(abs(v) for v in diff.flat)


# Explicit matrices for branching and immigration models

def fixture_branching(q, x) -> np.ndarray:
    """R(x) for coalescing-branching walks with Q > 0, written in q."""
    q, x = frac(q), frac(x)
    a, b = 1 / q, q - 1 / q
    return exact_array([
        [a + x * (q - 2 * a), -(1 - x) * a, -(1 - x) * a, 0],
        [-(1 - x) * b, b, -(1 - x) * a, 0],
        [-(1 - x) * b, -(1 - x) * a, b, 0],
        [0, 0, 0, -a + q * x],
    ])


def fixture_pure_branching(x) -> np.ndarray:
    x = frac(x)
    return exact_array([
        [1 - 2 * x, -(1 - x), -(1 - x), 0],
        [1 - x, -1, -(1 - x), 0],
        [1 - x, -(1 - x), -1, 0],
        [0, 0, 0, -1],
    ])


def fixture_immigration(q, x) -> np.ndarray:
    """R(x) for annihilating walks with pairwise immigration, Q > 0."""
    q, x = frac(q), frac(x)
    d, s = (q - 1 / q) / 2, (q + 1 / q) / 2
    return exact_array([
        [-(1 - x) + (1 + x) * d, 0, 0, (1 - x) * (1 - s)],
        [0, (1 + x) * d, -(1 - x) * s, 0],
        [0, -(1 - x) * s, (1 + x) * d, 0],
        [-(1 - x) * (1 + s), 0, 0, (1 - x) + (1 + x) * d],
    ])


def fixture_pure_immigration(x) -> np.ndarray:
    x = frac(x)
    h, k = -(1 + x) / 2, -(1 - x) / 2
    return exact_array([[h, 0, 0, k], [0, h, k, 0], [0, k, h, 0], [k, 0, 0, h]])


def branching_formula(theta) -> TwoSiteGenerator:
    """The branching matrix formula evaluated without the stochasticity range check.

    At theta = 1 it has negative off-diagonal entries, so it is not a
    generator of a particle system, but it still satisfies the braid
    relation with Q = theta (1 - theta) = 0.
    """
    t = frac(theta)
    row = [1 - 2 * t, t, t, 0]
    return TwoSiteGenerator(exact_array([row, row, row, [0, 0, 0, 1]]))


@dataclass(frozen=True)
class FixtureComparison:
    name: str
    scalar: Fraction | None
    conjugation: str | None
    residual: Fraction


def proportionality(ours: np.ndarray, target: np.ndarray):
    """(c, residual) with ours ~ c * target, c from the largest target entry."""
    idx = max(np.ndindex(target.shape), key=lambda i: abs(target[i]))
    if target[idx] == 0:
        return None, max(abs(v) for v in ours.flat)
    c = ours[idx] / target[idx]
    return c, max(abs(v) for v in (ours - c * target).flat)


def compare_with_fixture(name: str, ours: np.ndarray, target: np.ndarray) -> FixtureComparison:
    """Match ours against the fixture up to a scalar, trying the symmetry conjugations in turn."""
    from .models import CONJUGATION_PERMUTATIONS

    best = None
    for conj in CONJUGATIONS:
        perm = list(CONJUGATION_PERMUTATIONS[conj])
        c, res = proportionality(ours[np.ix_(perm, perm)], target)
        if res == 0 and c not in (None, 0):
            return FixtureComparison(name, c, conj, Fraction(0))
        if best is None or res < best.residual:
            best = FixtureComparison(name, c, None, res)
    return best


def fixture_report(theta_branching=Fraction(1, 5), theta_immigration=Fraction(3, 10),
                   x=Fraction(3, 7)) -> list[FixtureComparison]:
    """Compare Baxterised catalog generators with the four explicit matrices."""
    out = []
    g = build_model("CSRWB", theta=theta_branching)
    for root in ROOTS:
        fam = baxterise(g, root=root)
        out.append(compare_with_fixture(f"branching ({root} root)", fam(x),
                                        fixture_branching(fam.q, x)))
    fam = baxterise_degenerate(build_model("CSRWB", theta=0))
    out.append(compare_with_fixture("pure branching", fam(x), fixture_pure_branching(x)))
    fam = RMatrixFamily(branching_formula(1), None, Fraction(0))
    out.append(compare_with_fixture("pure branching (formula at theta = 1)", fam(x),
                                    fixture_pure_branching(x)))
    g = build_model("ASRWPI", theta=theta_immigration)
    for root in ROOTS:
        fam = baxterise(g, root=root)
        out.append(compare_with_fixture(f"immigration ({root} root)", fam(x),
                                        fixture_immigration(fam.q, x)))
    fam = baxterise_degenerate(build_model("ASRWPI", theta=0))
    out.append(compare_with_fixture("pure immigration", fam(x), fixture_pure_immigration(x)))
    return out
