"""Duality functions built from factorized eigenvectors.

Three families of lattice vectors are supported, each written in terms of
the vacuum v = (1, 1) and a second site vector w:

* ``alternating_interval``: w on the runs (x1, x2], (x3, x4], ... and v
  elsewhere; coinciding anchors make a run empty, which is how a pair of
  anchors collapses.
* ``product_moment``: w at the anchor sites and v elsewhere.
* ``staircase``: the Hadamard product of the tails h_x = v...v w w w...,
  so site j carries w to the power #{k : x_k <= j}.

For the first two families the generator action is obtained by expanding
sigma on every local pattern in the basis {v(x)v, w(x)w, v(x)w, w(x)v}; the
staircase action uses the expansion of sigma on w^a (x) w^b. Actions are
computed on the infinite line and compared with brute-force lattice
generators on segments away from the edges.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Sequence

import numpy as np

from .models import ModelSpec, TwoSiteGenerator, build_model
from .tensor import (
    apply_two_site,
    exact_array,
    exact_solve,
    frac,
    identity,
    kron,
    kron_all,
    nullspace_dimension,
)

FAMILY_NAMES = ("alternating_interval", "product_moment", "staircase")
VV, WW, VW, WV = "vv", "ww", "vw", "wv"
PATTERNS = (VV, WW, VW, WV)


class UnsupportedPair(ValueError):
    """The requested duality family is not closed under the model's generator."""


def _generator(model) -> TwoSiteGenerator:
    if isinstance(model, TwoSiteGenerator):
        return model
    if isinstance(model, ModelSpec):
        return build_model(model)
    return TwoSiteGenerator(model)


def site_vector(w) -> tuple[Fraction, Fraction]:
    a, b = (frac(x) for x in w)
    return a, b


# Factorized eigenvectors

@dataclass(frozen=True)
class EigenvectorReport:
    vectors: tuple[tuple[Fraction, Fraction], ...]
    every_w: bool = False
    irrational: tuple[tuple[float, float], ...] = ()


PREFERRED_W = {
    "SEP": lambda p: (0, 1),
    "BVM": lambda p: (1 - p["theta"], p["theta"]),
    "ACSRW": lambda p: (-p["theta"], 1),
    "ACRW": lambda p: (-p["theta"], 1),
    "ARW": lambda p: (-1, 1),
    "CSRWB": lambda p: (0, 1),
    "ASRWPI": lambda p: (-1, 1),
    "SCAM": lambda p: (2 * p["theta"] - 1, 1),
    "DM": lambda p: (1, -1),
}
"""Scalings of the second factorized eigenvector for which the actions take their simplest form."""


def _poly_trim(p: list[Fraction]) -> list[Fraction]:
    while p and p[-1] == 0:
        p = p[:-1]
    return p


def _poly_mod(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    a = list(a)
    while len(a) >= len(b) and a:
        factor = a[-1] / b[-1]
        shift = len(a) - len(b)
        for i, c in enumerate(b):
            a[i + shift] -= factor * c
        a = _poly_trim(a)
    return a


def _poly_gcd(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    a, b = _poly_trim(a), _poly_trim(b)
    while b:
        a, b = b, _poly_mod(a, b)
    if not a:
        return a
    return [c / a[-1] for c in a]


def find_factorized_eigenvectors(g) -> EigenvectorReport:
    """All w independent of v with sigma (w (x) w) = w (x) w, last nonzero entry 1."""
    from .models import exact_sqrt

    g = _generator(g)
    q = g.sigma - identity(4)
    # w = (a, 1): (sigma - I)(a^2, a, a, 1) is a vector of quadratics in a
    polys = [[q[i, 3], q[i, 1] + q[i, 2], q[i, 0]] for i in range(4)]
    common: list[Fraction] = []
    for p in polys:
        common = _poly_gcd(common, p) if common else _poly_trim(list(p))
    found: list[tuple[Fraction, Fraction]] = []
    irrational: list[tuple[float, float]] = []
    every = not any(_poly_trim(list(p)) for p in polys)
    if not every and len(common) == 2:
        found.append((-common[0] / common[1], Fraction(1)))
    elif not every and len(common) == 3:
        c0, c1, c2 = common
        disc = c1 * c1 - 4 * c2 * c0
        root = exact_sqrt(disc)
        if root is not None:
            for sgn in (-1, 1):
                found.append(((-c1 + sgn * root) / (2 * c2), Fraction(1)))
        elif disc > 0:
            for sgn in (-1, 1):
                irrational.append(((-float(c1) + sgn * float(disc) ** 0.5) / (2 * float(c2)), 1.0))
    if all(x == 0 for x in q[:, 0]):
        found.append((Fraction(1), Fraction(0)))
    found = [w for w in dict.fromkeys(found) if w != (1, 1)]
    return EigenvectorReport(tuple(found), every_w=every, irrational=tuple(irrational))


def preferred_eigenvector(spec: ModelSpec) -> tuple[Fraction, Fraction] | None:
    g = build_model(spec)
    maker = PREFERRED_W.get(spec.name)
    if maker is None or spec.conjugation != "none":
        return None
    w = site_vector(maker(g.params))
    return w


# Action of sigma on two-site patterns

def pattern_basis(w) -> np.ndarray:
    """Columns v(x)v, w(x)w, v(x)w, w(x)v."""
    v = exact_array([1, 1])
    wv = exact_array(list(site_vector(w)))
    cols = [kron(v, v), kron(wv, wv), kron(v, wv), kron(wv, v)]
    return np.stack(cols, axis=1)


def local_expansion(g, w) -> dict[str, dict[str, Fraction]]:
    """sigma applied to each pattern, expanded in the pattern basis."""
    g = _generator(g)
    basis = pattern_basis(w)
    if nullspace_dimension(basis) != 0:
        raise ValueError(f"w={w} is not independent of the vacuum")
    images = g.sigma @ basis
    coeffs = exact_solve(basis, images)
    out = {}
    for j, src in enumerate(PATTERNS):
        out[src] = {dst: coeffs[i, j] for i, dst in enumerate(PATTERNS) if coeffs[i, j] != 0}
    return out


@dataclass(frozen=True)
class ActionForm:
    kind: str
    coefficients: tuple
    expansion: dict = field(compare=False)
    ww_eigenvalue: Fraction | None = None


def classify_action(g, w) -> ActionForm:
    """Classify the action of sigma on v(x)w and w(x)v as interval, exchange or neither.

    Interval coefficients are (alpha, beta, gamma) with
    sigma(v(x)w) = alpha vv + beta ww + gamma vw and (alpha~, beta~, gamma~)
    with sigma(w(x)v) = alpha~ vv + beta~ ww + gamma~ wv. Exchange
    coefficients are (gamma, delta, gamma~, delta~) with
    sigma(v(x)w) = gamma vw + delta wv and sigma(w(x)v) = gamma~ wv + delta~ vw.
    """
    exp = local_expansion(g, w)
    zero = Fraction(0)
    ww_image = exp[WW]
    lam = ww_image.get(WW, zero) if set(ww_image) <= {WW} else None
    vw, wv = exp[VW], exp[WV]
    interval = vw.get(WV, zero) == 0 and wv.get(VW, zero) == 0
    exchange = all(vw.get(p, zero) == 0 for p in (VV, WW)) and all(
        wv.get(p, zero) == 0 for p in (VV, WW))
    if exchange and not interval:
        coeffs = (vw.get(VW, zero), vw.get(WV, zero), wv.get(WV, zero), wv.get(VW, zero))
        return ActionForm("exchange", coeffs, exp, lam)
    if interval:
        coeffs = ((vw.get(VV, zero), vw.get(WW, zero), vw.get(VW, zero)),
                  (wv.get(VV, zero), wv.get(WW, zero), wv.get(WV, zero)))
        return ActionForm("interval", coeffs, exp, lam)
    return ActionForm("neither", (), exp, lam)


# Duality basis elements and their lattice vectors

@dataclass(frozen=True)
class DualityBasisElement:
    family: str
    w: tuple
    anchors: tuple
    n_sites: int

    def __post_init__(self):
        if self.family not in FAMILY_NAMES:
            raise ValueError(f"unknown duality family {self.family!r}")
        object.__setattr__(self, "w", site_vector(self.w))
        object.__setattr__(self, "anchors", tuple(int(x) for x in self.anchors))
        a = self.anchors
        if self.family == "alternating_interval" and len(a) % 2:
            raise ValueError("alternating interval elements need an even number of anchors")
        if any(x > y for x, y in zip(a, a[1:])):
            raise ValueError(f"anchors must be nondecreasing: {a}")

    def site_powers(self) -> list[int]:
        """Power of w carried by each site 1..N."""
        n, a = self.n_sites, self.anchors
        if self.family == "alternating_interval":
            powers = [0] * n
            for lo, hi in zip(a[0::2], a[1::2]):
                for j in range(lo + 1, hi + 1):
                    powers[j - 1] ^= 1
            return powers
        if self.family == "product_moment":
            powers = [0] * n
            for x in a:
                powers[x - 1] = 1
            return powers
        return [sum(1 for x in a if x <= j) for j in range(1, n + 1)]


def _check_range(e: DualityBasisElement):
    n, a = e.n_sites, e.anchors
    if e.family == "alternating_interval":
        ok = all(0 <= x <= n for x in a)
    elif e.family == "product_moment":
        ok = all(1 <= x <= n for x in a) and len(set(a)) == len(a)
    else:
        ok = all(1 <= x <= n + 1 for x in a)
    if not ok:
        raise ValueError(f"anchors {a} out of range for {e.family} on {n} sites")


def build_duality_vector(e: DualityBasisElement) -> np.ndarray:
    """Exact 2^N vector of a duality basis element."""
    _check_range(e)
    w = e.w
    factors = []
    for p in e.site_powers():
        factors.append(exact_array([w[0] ** p, w[1] ** p]))
    return kron_all(factors)


# Dual generator actions on the infinite line

@dataclass(frozen=True)
class DualAction:
    family: str
    w: tuple
    terms: tuple

    def as_dict(self) -> dict[tuple, Fraction]:
        return dict(self.terms)

    def vector(self, n_sites: int) -> np.ndarray:
        out = None
        for anchors, coeff in self.terms:
            vec = build_duality_vector(DualityBasisElement(self.family, self.w, anchors, n_sites))
            out = coeff * vec if out is None else out + coeff * vec
        if out is None:
            return exact_array([0] * 2**n_sites)
        return out


def _strings_to_anchors(family: str, wsites: frozenset) -> tuple:
    if family == "product_moment":
        return tuple(sorted(wsites))
    anchors = []
    for j in sorted(wsites):
        if j - 1 not in wsites:
            anchors.append(j - 1)
        if j + 1 not in wsites:
            anchors.append(j)
    return tuple(anchors)


def _pattern_of(a: bool, b: bool) -> str:
    return {(False, False): VV, (True, True): WW, (False, True): VW, (True, False): WV}[(a, b)]


def _w_sites(family: str, anchors: Sequence[int]) -> frozenset:
    if family == "product_moment":
        return frozenset(anchors)
    sites: set[int] = set()
    for lo, hi in zip(anchors[0::2], anchors[1::2]):
        for j in range(lo + 1, hi + 1):
            sites ^= {j}
    return frozenset(sites)


def _string_action(exp, family: str, anchors: Sequence[int]) -> dict[tuple, Fraction]:
    wsites = _w_sites(family, anchors)
    bonds = sorted({j - 1 for j in wsites} | set(wsites))
    terms: dict[frozenset, Fraction] = {}
    for j in bonds:
        pat = _pattern_of(j in wsites, j + 1 in wsites)
        if pat == VV:
            continue
        rest = wsites - {j, j + 1}
        for dst, coeff in exp[pat].items():
            new = set(rest)
            if dst in (WW, WV):
                new.add(j)
            if dst in (WW, VW):
                new.add(j + 1)
            key = frozenset(new)
            terms[key] = terms.get(key, Fraction(0)) + coeff
        terms[wsites] = terms.get(wsites, Fraction(0)) - 1
    out: dict[tuple, Fraction] = {}
    for key, coeff in terms.items():
        if coeff != 0:
            anchors_out = _strings_to_anchors(family, key)
            out[anchors_out] = out.get(anchors_out, Fraction(0)) + coeff
    return {k: v for k, v in out.items() if v != 0}


def _staircase_expansion(g: TwoSiteGenerator, w, max_gap: int) -> dict[tuple[int, int], tuple]:
    """Coefficients (A, B) with sigma(w^a (x) w^(a+m)) = A w^a(x)w^a + B w^(a+1)(x)w^(a+1).

    The coefficients only depend on the gap m; they are solved exactly for a = 0
    and verified for a = 1, 2.
    """
    out = {}
    for m in range(1, max_gap + 1):
        coeffs = None
        for a in range(3):
            lhs = g.sigma @ kron(_power(w, a), _power(w, a + m))
            basis = np.stack([kron(_power(w, a), _power(w, a)),
                              kron(_power(w, a + 1), _power(w, a + 1))], axis=1)
            sol = _exact_least_squares(basis, lhs)
            if sol is None or (coeffs is not None and sol != coeffs):
                raise UnsupportedPair(f"staircase expansion fails at powers ({a}, {a + m})")
            coeffs = sol
        out[m] = coeffs
    return out


def _power(w, k: int) -> np.ndarray:
    return exact_array([w[0] ** k, w[1] ** k])


def _exact_least_squares(basis: np.ndarray, rhs: np.ndarray):
    gram = basis.T @ basis
    try:
        sol = exact_solve(gram, basis.T @ rhs)
    except ValueError:
        return None
    if np.any(basis @ sol != rhs):
        return None
    return tuple(sol)


def _staircase_action(expansion, anchors: Sequence[int]) -> dict[tuple, Fraction]:
    """String route for staircases; ``expansion(m)`` returns the coefficients for gap m."""
    n = len(anchors)
    if n == 0:
        return {}
    lo, hi = anchors[0] - 2, anchors[-1] + 2

    def power(j, seq):
        return seq.get(j, 0 if j < lo else n)

    base = {j: sum(1 for x in anchors if x <= j) for j in range(lo, hi + 1)}
    terms: dict[tuple, Fraction] = {}

    def anchors_of(seq):
        out = []
        for j in range(lo, hi + 1):
            out.extend([j] * (power(j, seq) - power(j - 1, seq)))
        return tuple(out)

    for j in range(lo, hi):
        a, b = power(j, base), power(j + 1, base)
        if a == b:
            continue
        coeff_a, coeff_b = expansion(b - a)
        first = dict(base)
        first[j + 1] = a
        second = dict(base)
        second[j] = a + 1
        second[j + 1] = a + 1
        for seq, c in ((first, coeff_a), (second, coeff_b), (base, Fraction(-1))):
            key = anchors_of(seq)
            terms[key] = terms.get(key, Fraction(0)) + c
    return {k: v for k, v in terms.items() if v != 0}


def family_supported(g, family: str, w) -> bool:
    try:
        _check_supported(_generator(g), family, site_vector(w))
    except UnsupportedPair:
        return False
    return True


def _check_supported(g: TwoSiteGenerator, family: str, w):
    if family == "staircase":
        _staircase_expansion(g, w, 3)
        return
    exp = local_expansion(g, w)
    if family == "alternating_interval":
        form = classify_action(g, w)
        if form.kind != "interval" or form.ww_eigenvalue is None:
            raise UnsupportedPair("alternating intervals need an interval-type action "
                                  "with w(x)w an eigenvector")
    elif family == "product_moment":
        if any(WW in exp[p] for p in (VW, WV)):
            raise UnsupportedPair("product moments need sigma(v(x)w), sigma(w(x)v) free of w(x)w")


class DualRules:
    """Cached local rules for one (generator, family, w) triple."""

    def __init__(self, model, family: str, w):
        self.generator = _generator(model)
        self.family = family
        self.w = site_vector(w)
        _check_supported(self.generator, family, self.w)
        self._stair: dict[int, tuple] = {}
        if family != "staircase":
            self.expansion = local_expansion(self.generator, self.w)
            self.form = classify_action(self.generator, self.w)

    def staircase_coefficients(self, gap: int) -> tuple:
        if gap not in self._stair:
            self._stair.update(_staircase_expansion(self.generator, self.w, max(gap, 4)))
        return self._stair[gap]

    def action(self, anchors: Sequence[int]) -> dict[tuple, Fraction]:
        """String route: expand sigma bond by bond on the w/v string."""
        if self.family == "staircase":
            return _staircase_action(self.staircase_coefficients, anchors)
        return _string_action(self.expansion, self.family, anchors)

    def anchor_action(self, anchors: Sequence[int]) -> dict[tuple, Fraction]:
        """Anchor route for alternating intervals: each anchor moves by one site.

        A left end x of a run sees the pattern v(x)w on (x, x+1); the vv part
        of its image moves x to x+1 and the ww part moves it to x-1. A right
        end y sees w(x)v on (y, y+1), where vv moves y to y-1 and ww to y+1.
        Interior bonds of a run each contribute (lambda - 1). Coinciding
        anchors are removed in pairs. Other families use the string route.
        """
        if self.family != "alternating_interval":
            return self.action(anchors)
        exp, lam = self.expansion, self.form.ww_eigenvalue
        out: dict[tuple, Fraction] = {}

        def add(key, c):
            key = _collapse(key)
            out[key] = out.get(key, Fraction(0)) + c

        anchors = _collapse(tuple(anchors))
        diag = Fraction(0)
        for i, x in enumerate(anchors):
            left_end = i % 2 == 0
            image = exp[VW] if left_end else exp[WV]
            stay = image.get(VW if left_end else WV, Fraction(0))
            to_v = image.get(VV, Fraction(0))
            to_w = image.get(WW, Fraction(0))
            shrink, grow = (x + 1, x - 1) if left_end else (x - 1, x + 1)
            if to_v:
                add(anchors[:i] + (shrink,) + anchors[i + 1:], to_v)
            if to_w:
                add(anchors[:i] + (grow,) + anchors[i + 1:], to_w)
            diag += stay - 1
        for lo, hi in zip(anchors[0::2], anchors[1::2]):
            diag += (lam - 1) * (hi - lo - 1)
        if diag:
            add(anchors, diag)
        return {k: v for k, v in out.items() if v != 0}


def _collapse(anchors: tuple) -> tuple:
    out: list[int] = []
    for x in anchors:
        if out and out[-1] == x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def dual_generator_action(model, e: DualityBasisElement) -> DualAction:
    """Expansion of L applied to a duality element on the infinite line."""
    rules = DualRules(model, e.family, e.w)
    ordered = tuple(sorted(rules.action(e.anchors).items()))
    return DualAction(e.family, e.w, ordered)


def single_bond_action(model, e: DualityBasisElement, bond: int) -> DualAction:
    """Expansion of sigma applied on the bond (bond, bond + 1) only."""
    g = _generator(model)
    if e.family == "staircase":
        raise UnsupportedPair("single-bond actions are provided for string families")
    exp = local_expansion(g, e.w)
    wsites = _w_sites(e.family, e.anchors)
    pat = _pattern_of(bond in wsites, bond + 1 in wsites)
    rest = wsites - {bond, bond + 1}
    out: dict[tuple, Fraction] = {}
    for dst, coeff in exp[pat].items():
        new = set(rest)
        if dst in (WW, WV):
            new.add(bond)
        if dst in (WW, VW):
            new.add(bond + 1)
        key = _strings_to_anchors(e.family, frozenset(new))
        out[key] = out.get(key, Fraction(0)) + coeff
    return DualAction(e.family, e.w, tuple(sorted((k, v) for k, v in out.items() if v != 0)))


# Brute-force identity checks

def interior_anchor_range(family: str, n_sites: int) -> range:
    """Anchor positions whose infinite-line action is unaffected by the segment edges."""
    if family == "alternating_interval":
        return range(1, n_sites)
    if family == "product_moment":
        return range(2, n_sites)
    return range(2, n_sites + 1)


def anchor_tuples(family: str, n_sites: int, max_order: int):
    sites = list(interior_anchor_range(family, n_sites))
    if family == "alternating_interval":
        for k in range(2, max_order + 1, 2):
            yield from itertools.combinations(sites, k)
    elif family == "product_moment":
        for k in range(1, max_order + 1):
            yield from itertools.combinations(sites, k)
    else:
        for k in range(1, max_order + 1):
            yield from itertools.combinations_with_replacement(sites, k)


class _IntegerLattice:
    """Exact lattice vectors kept as Python-int arrays with a per-power scale."""

    def __init__(self, g: TwoSiteGenerator, w, n_sites: int):
        self.n_sites = n_sites
        self.scale = lcm(w[0].denominator, w[1].denominator)
        self.w_int = (int(w[0] * self.scale), int(w[1] * self.scale))
        q = g.sigma - identity(4)
        self.den = lcm(*(x.denominator for x in q.flat))
        self.q_int = np.array([[int(x * self.den) for x in row] for row in q], dtype=object)

    def vector(self, powers: Sequence[int]) -> tuple[np.ndarray, int]:
        """Integer vector and the power of ``scale`` it must be divided by."""
        factors = [np.array([self.w_int[0] ** p, self.w_int[1] ** p], dtype=object)
                   for p in powers]
        return kron_all(factors), sum(powers)

    def generator_apply(self, vec: np.ndarray) -> np.ndarray:
        out = np.zeros_like(vec)
        out[:] = 0
        for n in range(1, self.n_sites):
            out = out + apply_two_site(self.q_int, vec, n, n + 1, self.n_sites)
        return out


@dataclass
class IdentityCheck:
    max_residual: Fraction
    checked: int
    failures: list = field(default_factory=list)


def duality_identity_check(model, family: str, n_sites: int, max_order: int, w=None) -> IdentityCheck:
    """Compare brute-force L f with the dual action for every interior anchor tuple."""
    if n_sites > 12:
        raise ValueError("brute-force checks are limited to N <= 12")
    g = _generator(model)
    if w is None:
        spec = model if isinstance(model, ModelSpec) else None
        w = preferred_eigenvector(spec) if spec is not None else None
        if w is None:
            raise ValueError("a site vector w is required for this model")
    w = site_vector(w)
    rules = DualRules(g, family, w)
    lat = _IntegerLattice(g, w, n_sites)
    worst = Fraction(0)
    failures = []
    count = 0
    for anchors in anchor_tuples(family, n_sites, max_order):
        e = DualityBasisElement(family, w, anchors, n_sites)
        action = rules.action(anchors)
        lhs_vec, lhs_pow = lat.vector(e.site_powers())
        lhs = lat.generator_apply(lhs_vec)
        rhs_parts = []
        for t_anchors, coeff in action.items():
            t = DualityBasisElement(family, w, t_anchors, n_sites)
            _check_range(t)
            vec, pw = lat.vector(t.site_powers())
            rhs_parts.append((coeff, vec, pw))
        top = max([lhs_pow] + [pw for _, _, pw in rhs_parts])
        coeff_den = lcm(1, *((c * lat.den).denominator for c, _, _ in rhs_parts))
        left = lhs * (lat.scale ** (top - lhs_pow)) * coeff_den
        right = np.zeros_like(left)
        right[:] = 0
        for c, vec, pw in rhs_parts:
            right = right + vec * (int(c * lat.den * coeff_den) * lat.scale ** (top - pw))
        diff = left - right
        if any(x != 0 for x in diff):
            denom = lat.den * coeff_den * lat.scale ** top
            resid = max(abs(Fraction(int(x), denom)) for x in diff)
            worst = max(worst, resid)
            failures.append(anchors)
        count += 1
    return IdentityCheck(worst, count, failures)


def collapse_consistency(w, n_sites: int) -> bool:
    """Coinciding alternating-interval anchors equal the element with that pair deleted."""
    for k in (2, 4):
        for anchors in itertools.combinations_with_replacement(range(n_sites + 1), k):
            for i in range(k - 1):
                if anchors[i] != anchors[i + 1]:
                    continue
                full = build_duality_vector(
                    DualityBasisElement("alternating_interval", w, anchors, n_sites))
                reduced = anchors[:i] + anchors[i + 2:]
                small = build_duality_vector(
                    DualityBasisElement("alternating_interval", w, reduced, n_sites))
                if np.any(full != small):
                    return False
    return True


def staircase_boundary_identity(r, l, n_sites: int, order: int = 2) -> bool:
    """r h|_(x,x) + l h|_(x+1,x+1) - h|_(x,x+1) = 0 for neighbouring anchor pairs."""
    r, l = frac(r), frac(l)
    w = (l / r, Fraction(1))
    sites = range(1, n_sites + 1)
    for rest in itertools.combinations_with_replacement(sites, order - 2):
        for x in sites:
            def vec(pair):
                anchors = tuple(sorted(rest + pair))
                return build_duality_vector(DualityBasisElement("staircase", w, anchors, n_sites))
            total = r * vec((x, x)) + l * vec((x + 1, x + 1)) - vec((x, x + 1))
            if any(v != 0 for v in total):
                return False
    return True


def staircase_relation_check(r, l, n_max: int, m_max: int) -> bool:
    """Exact check of the powers-of-w relations behind the staircase duality."""
    r, l = frac(r), frac(l)
    if r + l != 1 or not r > l > 0:
        raise ValueError("staircase relations need r + l = 1 and r > l > 0")
    g = build_model("ASEP", r=r, l=l)
    q = l / r
    w = (q, Fraction(1))

    def wk(k):
        return _power(w, k)

    for n in range(n_max + 1):
        lhs = g.sigma @ kron(wk(n), wk(n + 1))
        if np.any(lhs != l * kron(wk(n), wk(n)) + r * kron(wk(n + 1), wk(n + 1))):
            return False
        if np.any(r * wk(n + 2) - wk(n + 1) + l * wk(n) != 0):
            return False
        for m in range(m_max + 1):
            lhs = g.sigma @ kron(wk(n), wk(n + m))
            a = (q * q - q ** m) / (q * q - 1)
            b = (q ** m - 1) / (q * q - 1)
            if np.any(lhs != a * kron(wk(n), wk(n)) + b * kron(wk(n + 1), wk(n + 1))):
                return False
    return True


# Coordinate representation

class SparseExact:
    """Minimal exact sparse matrix: row -> {col: Fraction}."""

    def __init__(self, rows=None):
        self.rows: dict = {k: dict(v) for k, v in (rows or {}).items() if v}

    def __matmul__(self, other: "SparseExact") -> "SparseExact":
        out = {}
        for i, row in self.rows.items():
            acc: dict = {}
            for k, a in row.items():
                for j, b in other.rows.get(k, {}).items():
                    acc[j] = acc.get(j, 0) + a * b
            acc = {j: v for j, v in acc.items() if v != 0}
            if acc:
                out[i] = acc
        return SparseExact(out)

    def __add__(self, other: "SparseExact") -> "SparseExact":
        out = {i: dict(r) for i, r in self.rows.items()}
        for i, row in other.rows.items():
            acc = out.setdefault(i, {})
            for j, v in row.items():
                acc[j] = acc.get(j, 0) + v
        return SparseExact({i: {j: v for j, v in r.items() if v != 0} for i, r in out.items()})

    def scale(self, c) -> "SparseExact":
        return SparseExact({i: {j: c * v for j, v in r.items()} for i, r in self.rows.items()})

    def __sub__(self, other: "SparseExact") -> "SparseExact":
        return self + other.scale(-1)

    def restricted_max(self, keep) -> Fraction:
        vals = [abs(v) for i, r in self.rows.items() if keep(i) for v in r.values()]
        return max(vals, default=Fraction(0))


@dataclass
class CoordinateHecke:
    """Operators q_x = sum_k 1_x(y_k) Delta_k on ordered coordinates in a window.

    States are strictly increasing tuples of length n, n - 2, ...; a move
    creating a coincidence y_k = y_(k+1) lands on the tuple with that pair
    removed, which realizes the boundary condition that f on the diagonal
    does not depend on the common value.
    """

    window: int
    r: Fraction
    l: Fraction
    particles: int
    operators: dict

    @property
    def Q(self) -> Fraction:
        return self.r * self.l

    def interior_sites(self) -> range:
        return range(-self.window + 4, self.window - 3)

    def interior_state(self, state) -> bool:
        return all(-self.window + 3 <= y <= self.window - 3 for y in state)

    def residual(self, expr: SparseExact) -> Fraction:
        return expr.restricted_max(self.interior_state)

    def quadratic_residual(self) -> Fraction:
        ops = self.operators
        return max(self.residual(ops[x] @ ops[x] + ops[x]) for x in self.interior_sites())

    def commutation_residual(self) -> Fraction:
        ops = self.operators
        sites = list(self.interior_sites())
        return max(self.residual(ops[x] @ ops[y] - ops[y] @ ops[x])
                   for x in sites for y in sites if abs(x - y) >= 2)

    def ternary_defect(self, x: int) -> SparseExact:
        ops, q = self.operators, self.Q
        return ops[x] @ ops[x + 1] @ ops[x] - ops[x].scale(q)

    def temperley_lieb_residual(self) -> Fraction:
        ops, q = self.operators, self.Q
        worst = Fraction(0)
        for x in self.interior_sites():
            for y in (x - 1, x + 1):
                if y in ops:
                    worst = max(worst, self.residual(ops[x] @ ops[y] @ ops[x] - ops[x].scale(q)))
        return worst

    def hecke_residual(self) -> Fraction:
        worst = Fraction(0)
        for x in self.interior_sites():
            if x + 1 not in self.operators:
                continue
            left = self.ternary_defect(x)
            ops, q = self.operators, self.Q
            right = ops[x + 1] @ ops[x] @ ops[x + 1] - ops[x + 1].scale(q)
            worst = max(worst, self.residual(left - right))
        return worst


def coordinate_hecke_operators(window: int, r, l, particles: int) -> CoordinateHecke:
    r, l = frac(r), frac(l)
    if window < 3:
        raise ValueError("window too small")
    if r + l != 1:
        raise ValueError("r + l must equal 1")
    sites = range(-window, window + 1)
    states = []
    for k in range(particles, -1, -2):
        states.extend(itertools.combinations(sites, k))
    state_set = set(states)

    def normalize(coords: list[int]):
        coords = list(coords)
        changed = True
        while changed:
            changed = False
            for i in range(len(coords) - 1):
                if coords[i] == coords[i + 1]:
                    del coords[i:i + 2]
                    changed = True
                    break
        return tuple(coords)

    operators = {}
    for x in sites:
        rows = {}
        for state in states:
            if x not in state:
                continue
            k = state.index(x)
            row: dict = {}
            for step, rate in ((1, r), (-1, l)):
                moved = list(state)
                moved[k] += step
                target = normalize(moved)
                if target in state_set:
                    row[target] = row.get(target, 0) + rate
            row[state] = row.get(state, 0) - 1
            rows[state] = {j: v for j, v in row.items() if v != 0}
        operators[x] = SparseExact(rows)
    return CoordinateHecke(window, r, l, particles, operators)
