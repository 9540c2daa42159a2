"""Closed-form and series solutions, and an integrator for dual equations.

Covered here:

* SCAM started fully occupied: pair probabilities, the gap factor F_t, the
  correlation functions and the renewal (Janossi) measure.
* The reshuffle model: stationary run probabilities, the determinantal
  kernel obtained by series inversion, kernel determinants and a sampler
  for the thinned descent process.
* The dimer model: the alternating invariant product measures and the
  quasi-particle map to an inhomogeneous exclusion process.
* A uniformization solver for the closed linear systems obtained from
  dual generator actions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, sparse, stats

from .duality import DualRules, UnsupportedPair, preferred_eigenvector, site_vector
from .models import ModelSpec, build_model, exact_sqrt
from .series import TruncatedSeries
from .tensor import exact_array, frac, identity, kron

INFINITY = math.inf


def _time(t) -> float:
    if isinstance(t, str) and t.strip().lower() in ("inf", "infinity", "oo"):
        return INFINITY
    t = float(t)
    if t < 0:
        raise ValueError("time must be nonnegative")
    return t


# Bernoulli numbers

def bernoulli_numbers(n_max: int) -> list[Fraction]:
    """B_0..B_n_max for x / (e^x - 1), so B_1 = -1/2."""
    out: list[Fraction] = []
    for n in range(n_max + 1):
        if n == 0:
            out.append(Fraction(1))
            continue
        acc = sum(comb(n + 1, k) * out[k] for k in range(n))
        out.append(-acc / (n + 1))
    return out


def descent_kernel(a, n: int, bernoulli: Sequence[Fraction] | None = None):
    """Translation-invariant kernel of the descent process with scale a."""
    if n <= -2:
        return 0 * a
    b = bernoulli if bernoulli is not None else bernoulli_numbers(n + 1)
    return -b[n + 1] * a ** n / factorial(n + 1)


def scaled_descent_kernel(a, n: int, bernoulli: Sequence[Fraction] | None = None):
    """a K_desc(a; n) = -B_(n+1) a^(n+1) / (n+1)!, which stays finite at a = 0."""
    if n <= -2:
        return 0 * a
    b = bernoulli if bernoulli is not None else bernoulli_numbers(n + 1)
    return -b[n + 1] * a ** (n + 1) / factorial(n + 1)


# SCAM from the fully occupied state

def _scam_gamma(theta) -> Fraction:
    theta = frac(theta)
    if not 0 <= theta <= Fraction(1, 2):
        raise ValueError("SCAM needs 0 <= theta <= 1/2")
    return 2 * (1 - theta)


def scam_tau(theta, t) -> float:
    t = _time(t)
    gamma = float(_scam_gamma(theta))
    return gamma if t == INFINITY else gamma * -math.expm1(-t)


def scam_density(theta, t) -> float:
    return math.exp(-scam_tau(theta, t))


def scam_pair_probability(theta, t, x: int, y: int) -> float:
    """Probability that every site of (x, y] is occupied at time t."""
    if x > y:
        raise ValueError("need x <= y")
    t = _time(t)
    if x == y:
        return 1.0
    if t == INFINITY:
        return 0.0 if y - x > 1 else scam_density(theta, t)
    return math.exp(-(y - x - 1) * t) * scam_density(theta, t)


def scam_gap_factor(theta, t, x: int) -> float:
    """F_t(x) = e^tau (E_x(-tau) + (-tau)^(x+1) / (gamma (x+1)!))."""
    if x < 0:
        raise ValueError("gap must be nonnegative")
    gamma = float(_scam_gamma(theta))
    tau = scam_tau(theta, t)
    partial = sum((-tau) ** k / factorial(k) for k in range(x + 1))
    return math.exp(tau) * (partial + (-tau) ** (x + 1) / (gamma * factorial(x + 1)))


def scam_correlation(theta, t, sites: Sequence[int]) -> float:
    """Probability that all the given (strictly increasing) sites are occupied."""
    sites = list(sites)
    if any(b <= a for a, b in zip(sites, sites[1:])):
        raise ValueError("sites must be strictly increasing")
    if not sites:
        return 1.0
    value = scam_density(theta, t) ** len(sites)
    for a, b in zip(sites, sites[1:]):
        value *= scam_gap_factor(theta, t, b - a - 1)
    return value


@dataclass
class RenewalSolution:
    theta: Fraction
    gamma: Fraction
    t: float
    density: float
    janossi: list
    exact: bool

    def __getitem__(self, n: int):
        if n < 1:
            raise IndexError("Janossi densities start at n = 1")
        return self.janossi[n - 1]


def _scam_pair_transform(theta, t, order: int) -> tuple[TruncatedSeries, bool]:
    """Two-point transform divided by the density."""
    t = _time(t)
    gamma = _scam_gamma(theta)
    exact = t == INFINITY
    if exact:
        tau = gamma
        g = gamma
    else:
        tau = scam_tau(theta, t)
        g = float(gamma)
    decay = TruncatedSeries.exponential(-tau, order)
    geometric = TruncatedSeries.geometric(order)
    if not exact:
        geometric = TruncatedSeries([float(c) for c in geometric.coefficients])
    first = (decay * geometric).times_z()
    second = (decay - 1) / g
    return first + second, exact


def scam_renewal_measure(theta, t, n_max: int) -> RenewalSolution:
    """Janossi densities J_t(1..n_max) from the renewal equation in transform space.

    The density cancels from J = rho2 / (rho + rho2), so with t = inf and
    rational theta every coefficient is an exact rational.
    """
    t = _time(t)
    if t == 0:
        raise ValueError("the renewal measure is defined for t > 0")
    order = n_max + 10
    pair, exact = _scam_pair_transform(theta, t, order)
    one = TruncatedSeries([Fraction(1) if exact else 1.0], order=order)
    janossi_series = pair / (one + pair)
    values = janossi_series.coefficients[1:n_max + 1]
    return RenewalSolution(frac(theta), _scam_gamma(theta), t, scam_density(theta, t),
                           values, exact)


def scam_renewal_by_recursion(theta, t, n_max: int) -> list[float]:
    """J(n) = (rho2(0, n) - sum_k J(k) rho2(0, n - k)) / rho, from the correlations."""
    rho = scam_density(theta, t)
    pair = [None] + [scam_correlation(theta, t, [0, n]) for n in range(1, n_max + 1)]
    out: list[float] = []
    for n in range(1, n_max + 1):
        acc = pair[n] - sum(out[k - 1] * pair[n - k] for k in range(1, n))
        out.append(acc / rho)
    return out


@dataclass(frozen=True)
class AnnihilationRoot:
    root: float
    residual: float
    amplitude: float


def scam_annihilation_root(tol: float = 1e-12) -> AnnihilationRoot:
    """Smallest positive root of z tanh z = 1, by bisection."""
    root = optimize.bisect(lambda z: z * math.tanh(z) - 1.0, 0.5, 2.0, xtol=tol)
    amplitude = (root - 1 / root) / root ** 2
    return AnnihilationRoot(root, abs(root * math.tanh(root) - 1.0), amplitude)


# Reshuffle model

def _reshuffle_check(alpha1, rho) -> tuple[Fraction, Fraction]:
    alpha1, rho = frac(alpha1), frac(rho)
    if not 0 <= rho <= 1:
        raise ValueError("rho must lie in [0, 1]")
    if not 0 <= alpha1 <= min(2 * rho, Fraction(1)):
        raise ValueError("need 0 <= alpha1 <= min(2 rho, 1)")
    return alpha1, rho


def reshuffle_parameters(alpha) -> tuple[Fraction, Fraction]:
    """(alpha1, rho) from the four reshuffle probabilities (alpha1 is the 11 weight)."""
    a1, a2, a3, a4 = (frac(a) for a in alpha)
    if a1 + a2 + a3 + a4 != 1 or min(a1, a2, a3, a4) < 0:
        raise ValueError("reshuffle probabilities must be a probability vector")
    return a1, (2 * a1 + a2 + a3) / 2


def reshuffle_generating_function(alpha1, rho, order: int) -> TruncatedSeries:
    """Series of z G(z) = (sinh(s z)/s) / (cosh(s z) - rho sinh(s z)/s), s^2 = rho^2 - alpha1.

    Both series are even or odd in s, so every coefficient is a rational
    function of s^2 and stays real when the roots of h^2 + 2 rho h + alpha1
    are complex.
    """
    alpha1, rho = _reshuffle_check(alpha1, rho)
    s2 = rho * rho - alpha1
    sinh_over_s = [Fraction(0)] * (order + 1)
    cosh = [Fraction(0)] * (order + 1)
    for k in range(order + 1):
        if 2 * k + 1 <= order:
            sinh_over_s[2 * k + 1] = s2 ** k / factorial(2 * k + 1)
        if 2 * k <= order:
            cosh[2 * k] = s2 ** k / factorial(2 * k)
    numerator = TruncatedSeries(sinh_over_s)
    denominator = TruncatedSeries(cosh) - numerator * rho
    return numerator / denominator


def reshuffle_run_probabilities(alpha1, rho, n_max: int) -> list[Fraction]:
    """Stationary P(n) = probability that n given consecutive sites are occupied."""
    alpha1, rho = _reshuffle_check(alpha1, rho)
    if alpha1 == 0:
        return [(2 * rho) ** n / factorial(n + 1) for n in range(n_max + 1)]
    zg = reshuffle_generating_function(alpha1, rho, n_max + 1)
    return zg.coefficients[1:n_max + 2]


def reshuffle_runs_by_recursion(alpha1, rho, n_max: int) -> list[Fraction]:
    """Coefficients of the stationary Riccati equation solved term by term."""
    alpha1, rho = _reshuffle_check(alpha1, rho)
    p: list[Fraction] = []
    for n in range(n_max + 1):
        acc = Fraction(1 if n == 0 else 0)
        if n >= 1:
            acc += 2 * rho * p[n - 1]
        acc += alpha1 * sum(p[k - 1] * p[n - k - 1] for k in range(1, n))
        p.append(acc / (n + 1))
    return p


@dataclass
class DeterminantalKernel:
    values: dict
    rho: Fraction
    alpha1: Fraction
    decomposition: dict = field(default_factory=dict)

    def __call__(self, n: int):
        if n <= -2:
            return Fraction(0)
        return self.values[n]

    @property
    def n_max(self) -> int:
        return max(self.values)


def reshuffle_kernel(alpha1, rho, n_max: int) -> DeterminantalKernel:
    """K(n), n >= -1, as the coefficients of -1 / (z G(z)).

    For alpha1 = 0 the kernel is compared exactly with 2 rho times the
    descent kernel at scale 2 rho. For 0 < alpha1 <= rho^2 it is compared
    with p 1(n = 0) + 2 s K_desc(2 s; n), s = sqrt(rho^2 - alpha1),
    entrywise (exactly when s is rational), and with the scale-2 rho form
    through determinants, which do not see the scale.
    """
    alpha1, rho = _reshuffle_check(alpha1, rho)
    if rho == 0:
        raise ValueError("the kernel needs rho > 0")
    zg = reshuffle_generating_function(alpha1, rho, n_max + 2)
    reciprocal = zg.shift_down().reciprocal()
    values = {n: -reciprocal[n + 1] for n in range(-1, n_max + 1)}
    kernel = DeterminantalKernel(values, rho, alpha1)
    b = bernoulli_numbers(n_max + 2)
    if alpha1 == 0:
        target = {n: scaled_descent_kernel(2 * rho, n, b) for n in values}
        kernel.decomposition = {"p": Fraction(0), "gamma": 2 * rho,
                                "entrywise_residual": max(abs(values[n] - target[n]) for n in values)}
    elif alpha1 <= rho * rho:
        s = exact_sqrt(rho * rho - alpha1)
        s = s if s is not None else math.sqrt(rho * rho - alpha1)
        p = rho - s
        gamma = 2 * s / (1 - p)
        entry = {n: (p if n == 0 else 0) + scaled_descent_kernel(2 * s, n, b) for n in values}
        residual = max(abs(float(values[n] - entry[n])) for n in values)
        scale_2rho_form = {n: (p if n == 0 else 0) + (1 - p) * gamma * descent_kernel(2 * rho, n, b)
                      for n in values}
        det_residual = 0.0
        for m in range(1, min(6, n_max + 2)):
            sites = list(range(m))
            det_residual = max(det_residual, abs(
                _determinant([[float(kernel(y - x)) for y in sites] for x in sites])
                - _determinant([[float(scale_2rho_form.get(y - x, 0)) for y in sites] for x in sites])))
        kernel.decomposition = {"p": p, "gamma": gamma, "entrywise_residual": residual,
                                "scale_2rho_determinant_residual": det_residual}
    return kernel


def _determinant(matrix):
    """Exact determinant for Fraction entries, float otherwise."""
    if any(isinstance(x, float) for row in matrix for x in row):
        return float(np.linalg.det(np.array(matrix, dtype=float))) if matrix else 1.0
    rows = [list(map(Fraction, row)) for row in matrix]
    n, det = len(rows), Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if rows[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            rows[col], rows[pivot] = rows[pivot], rows[col]
            det = -det
        det *= rows[col][col]
        for r in range(col + 1, n):
            factor = rows[r][col] / rows[col][col]
            rows[r] = [a - factor * b for a, b in zip(rows[r], rows[col])]
    return det


def reshuffle_correlation(kernel: DeterminantalKernel, sites: Sequence[int]):
    """det[K(x_k - x_j)] for strictly increasing sites."""
    sites = list(sites)
    if any(b <= a for a, b in zip(sites, sites[1:])):
        raise ValueError("sites must be strictly increasing")
    if sites and sites[-1] - sites[0] > kernel.n_max:
        raise ValueError("kernel too short for these sites")
    return _determinant([[kernel(xk - xj) for xk in sites] for xj in sites])


def sample_thinned_descent(rho, n_sites: int, seed: int, samples: int = 1) -> np.ndarray:
    """eta_k = Z_k 1(U_k > U_(k+1)), Z_k Bernoulli(2 rho), shape (samples, N)."""
    rho = float(frac(rho))
    if not 0 <= 2 * rho <= 1:
        raise ValueError("need 0 <= 2 rho <= 1")
    rng = np.random.default_rng(seed)
    u = rng.random((samples, n_sites + 1))
    z = rng.random((samples, n_sites)) < 2 * rho
    return (z & (u[:, :-1] > u[:, 1:])).astype(np.int8)


# Dimer model

@dataclass(frozen=True)
class DimerMeasure:
    theta: Fraction
    p: Fraction
    phi: Fraction
    involution: bool
    residual_forward: Fraction
    residual_backward: Fraction
    fixed_point: float


def dimer_phi(theta, p) -> Fraction:
    theta, p = frac(theta), frac(p)
    denominator = theta * p + (1 - theta) * (1 - p)
    if denominator == 0:
        raise ValueError("degenerate denominator")
    return (1 - theta) * (1 - p) / denominator


def dimer_forward_generator(theta) -> np.ndarray:
    """Generator acting on two-site measures: the transpose of sigma - I."""
    g = build_model("DM", theta=theta)
    return (g.sigma - identity(4)).T


def dimer_invariant_measure(theta, p) -> DimerMeasure:
    theta, p = frac(theta), frac(p)
    if not 0 < theta <= Fraction(1, 2) or not 0 <= p <= 1:
        raise ValueError("need 0 < theta <= 1/2 and 0 <= p <= 1")
    phi = dimer_phi(theta, p)
    forward = dimer_forward_generator(theta)
    mu0, mu1 = exact_array([p, 1 - p]), exact_array([phi, 1 - phi])
    res_f = max(abs(x) for x in forward @ kron(mu0, mu1))
    res_b = max(abs(x) for x in forward @ kron(mu1, mu0))
    fixed = math.sqrt(1 - theta) / (math.sqrt(theta) + math.sqrt(1 - theta))
    return DimerMeasure(theta, p, phi, dimer_phi(theta, phi) == p, res_f, res_b, fixed)


def dimer_quasiparticle_map(eta: Sequence[int], first_site: int = 1) -> tuple[int, ...]:
    """xi_k = eta_k on even sites and 1 - eta_k on odd sites."""
    return tuple(b if (first_site + i) % 2 == 0 else 1 - b for i, b in enumerate(eta))


_FLIP_SECOND = (1, 0, 3, 2)
_FLIP_FIRST = (2, 3, 0, 1)


def dimer_exclusion_generators(theta) -> tuple[np.ndarray, np.ndarray]:
    """Two-site dimer generator conjugated by the quasi-particle map.

    On a bond (2k, 2k+1) the odd site is the second one, on (2k+1, 2k+2)
    it is the first one; the results are the even- and odd-bond exclusion
    generators.
    """
    q = build_model("DM", theta=theta).sigma - identity(4)
    even = q[np.ix_(_FLIP_SECOND, _FLIP_SECOND)]
    odd = q[np.ix_(_FLIP_FIRST, _FLIP_FIRST)]
    return even, odd


def dimer_lattice_conjugation_residual(theta, n_sites: int) -> Fraction:
    """Max entry of P L_DM P - L_excl on a segment of sites 1..N."""
    from .tensor import config_index, generator, index_bits, LatticeOperator

    theta = frac(theta)
    dm = generator(build_model("DM", theta=theta).sigma, n_sites).dense()
    even, odd = dimer_exclusion_generators(theta)
    terms = [((even if n % 2 == 0 else odd), (n, n + 1)) for n in range(1, n_sites)]
    excl = LatticeOperator(n_sites, terms).dense()
    perm = [config_index(dimer_quasiparticle_map(index_bits(i, n_sites))) for i in range(2**n_sites)]
    conj = dm[np.ix_(perm, perm)]
    return max(abs(x) for x in (conj - excl).flat)


# Uniformization and dual equations

def uniformize(matrix, vector: np.ndarray, t: float, tol: float = 1e-12,
               step_rate: float = 40.0) -> np.ndarray:
    """exp(t A) v for a sparse or dense real A by uniformization.

    With lam >= max |A_ii| and P = I + A / lam, exp(tA) = e^(-lam t) sum_k
    (lam t)^k / k! P^k. The series is truncated where the Poisson tail,
    weighted by the norm bound |P|^k, drops below tol; long times are split
    into steps with lam dt <= step_rate.
    """
    a = sparse.csr_matrix(matrix, dtype=float)
    v = np.asarray(vector, dtype=float).copy()
    if t == 0 or a.nnz == 0:
        return v
    lam = max(float(np.max(np.abs(a.diagonal()))), 1e-300)
    p = a / lam + sparse.identity(a.shape[0], format="csr")
    norm = max(float(abs(p).sum(axis=1).max()), 1.0)
    n_steps = max(1, math.ceil(lam * t / step_rate))
    dt = t / n_steps
    mean = lam * dt * norm
    growth = math.exp(lam * dt * (norm - 1))
    k_max = int(stats.poisson.isf(tol / (n_steps * growth + 1e-300), mean)) + 2
    weights = stats.poisson.pmf(np.arange(k_max + 1), lam * dt)
    for _ in range(n_steps):
        term = v
        acc = weights[0] * term
        for k in range(1, k_max + 1):
            term = p @ term
            acc = acc + weights[k] * term
        v = acc
    return v


def initial_configuration(spec) -> Callable[[int], int]:
    """Occupation function on Z from a name or a periodic bit pattern."""
    if callable(spec):
        return spec
    if spec == "all_ones":
        return lambda x: 1
    if spec == "all_zeros":
        return lambda x: 0
    if spec == "alternating":
        return lambda x: x % 2
    bits = tuple(int(b) for b in spec)
    if not bits or any(b not in (0, 1) for b in bits):
        raise ValueError(f"unknown initial configuration {spec!r}")
    return lambda x: bits[x % len(bits)]


def _initial_value(family: str, w, anchors: Sequence[int], eta) -> float:
    from .duality import _w_sites

    value = 1.0
    for x in _w_sites(family, anchors):
        value *= float(w[0] if eta(x) else w[1])
    return value


@dataclass
class DualODESolution:
    family: str
    t: float
    window: int
    values: dict
    boundary_error: float
    margin: int

    def interior(self) -> dict:
        lo, hi = self.margin, self.window - self.margin
        return {k: v for k, v in self.values.items() if all(lo <= x <= hi for x in k)}


MAX_WINDOW = {1: 400, 2: 60}


def _dual_states(family: str, order: int, window: int):
    import itertools

    sites = range(0, window + 1)
    if family == "alternating_interval":
        for k in range(order, -1, -1):
            yield from itertools.combinations(sites, 2 * k)
    else:
        for k in range(order, -1, -1):
            yield from itertools.combinations(sites, k)


def solve_dual_ode(model, family: str, order: int, window: int, t, initial="all_ones",
                   w=None, tol: float = 1e-10, margin: int | None = None) -> DualODESolution:
    """Integrate d/dt Phi = A Phi for expectations of duality functions.

    ``order`` counts runs for alternating intervals and marked sites for
    product moments. Anchors live in [0, window]; terms that leave the
    window are evaluated twice (set to zero and frozen at their initial
    value) and the difference is reported as ``boundary_error``, with a
    warning above 1e-8.
    """
    if family == "staircase":
        raise UnsupportedPair("staircase tails are infinite products; use the string checks instead")
    if order not in MAX_WINDOW:
        raise ValueError("order must be 1 or 2")
    if window > MAX_WINDOW[order]:
        raise ValueError(f"window {window} too large for order {order} (max {MAX_WINDOW[order]})")
    t = _time(t)
    if t == INFINITY:
        raise ValueError("the dual integrator needs a finite time")
    spec = model if isinstance(model, ModelSpec) else None
    if w is None:
        w = preferred_eigenvector(spec) if spec is not None else None
        if w is None:
            raise ValueError("a site vector w is required for this model")
    w = site_vector(w)
    rules = DualRules(model, family, w)
    eta = initial_configuration(initial)
    states = list(_dual_states(family, order, window))
    index = {s: i for i, s in enumerate(states)}
    rows, cols, vals = [], [], []
    source = np.zeros(len(states))
    for i, s in enumerate(states):
        for target, coeff in rules.anchor_action(s).items():
            c = float(coeff)
            j = index.get(target)
            if j is None:
                source[i] += c * _initial_value(family, w, target, eta)
            else:
                rows.append(i)
                cols.append(j)
                vals.append(c)
    n = len(states)
    initial_values = np.array([_initial_value(family, w, s, eta) for s in states])
    base = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    frozen_matrix = sparse.bmat([[base, sparse.csr_matrix(source.reshape(-1, 1))],
                                 [None, sparse.csr_matrix((1, 1))]], format="csr")
    frozen = uniformize(frozen_matrix, np.append(initial_values, 1.0), t, tol)[:n]
    zeroed = uniformize(base, initial_values, t, tol)
    if margin is None:
        margin = max(3, min(window // 4, int(4 * t + 10)))
    lo, hi = margin, window - margin
    interior = [i for i, s in enumerate(states) if all(lo <= x <= hi for x in s)]
    err = float(np.max(np.abs(frozen[interior] - zeroed[interior]))) if interior else 0.0
    if err > 1e-8:
        warnings.warn(f"dual ODE boundary error {err:.2e} exceeds 1e-8; enlarge the window",
                      RuntimeWarning, stacklevel=2)
    values = {s: float(frozen[i]) for i, s in enumerate(states)}
    return DualODESolution(family, t, window, values, err, margin)
