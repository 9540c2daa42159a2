"""Catalog of two-site generators and the relations they satisfy.

Every generator is a 4x4 matrix in the basis (11, 10, 01, 00). The Markov
generator on a lattice is the sum over bonds of (sigma - I), so row xi of
sigma lists the probabilities of the pair states a bond in state xi jumps
to when its unit-rate clock rings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .tensor import exact_array, frac, identity, is_exact, kron, max_abs

FAMILIES = (
    "SEP", "ASEP", "BVM", "AVM", "SAVM", "AAVM", "ACSRW", "ACRW", "CSRWB",
    "ASRWPI", "SCAM", "DM", "RM", "EM1", "EM2", "ARW",
)

SYMMETRIC_FAMILIES = ("SEP", "BVM", "SAVM", "ACSRW", "CSRWB", "ASRWPI", "SCAM", "DM", "RM")
BRAID_ANSATZ_FAMILIES = ("ASEP", "BVM", "AVM", "AAVM", "ACRW", "CSRWB", "ASRWPI", "DM", "RM",
                         "EM1", "EM2")

CONJUGATIONS = ("none", "rho", "tau", "rhotau")

CONJUGATION_PERMUTATIONS = {
    "none": (0, 1, 2, 3),
    "rho": (0, 2, 1, 3),
    "tau": (3, 2, 1, 0),
    "rhotau": (3, 1, 2, 0),
}

HALF = Fraction(1, 2)


@dataclass(frozen=True)
class ModelSpec:
    """A named family, its parameters and an optional conjugation."""

    name: str
    params: Mapping[str, Fraction] = field(default_factory=dict)
    conjugation: str = "none"

    def __post_init__(self):
        name = self.name.upper()
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "params", {k: frac(v) for k, v in dict(self.params).items()})
        if self.conjugation not in CONJUGATIONS:
            raise ValueError(f"unknown conjugation {self.conjugation!r}")

    def __hash__(self):
        return hash((self.name, tuple(sorted(self.params.items())), self.conjugation))

    def describe(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        tag = "" if self.conjugation == "none" else f" [{self.conjugation}]"
        return f"{self.name}({inner}){tag}"


@dataclass(frozen=True)
class TwoSiteGenerator:
    """An exact 4x4 two-site operator with an optional catalog label."""

    sigma: np.ndarray
    label: str | None = None
    params: Mapping[str, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        mat = np.array(self.sigma, dtype=object)
        if mat.shape != (4, 4):
            raise ValueError(f"two-site operator must be 4x4, got {mat.shape}")
        mat = exact_array(mat)
        mat.setflags(write=False)
        object.__setattr__(self, "sigma", mat)

    def __eq__(self, other):
        return isinstance(other, TwoSiteGenerator) and bool(np.all(self.sigma == other.sigma))

    def __hash__(self):
        return hash(tuple(self.sigma.flat))

    @property
    def q_matrix(self) -> np.ndarray:
        return self.sigma - identity(4)

    def key(self) -> tuple:
        return tuple(self.sigma.flat)


@dataclass(frozen=True)
class BraidReport:
    holds: bool
    Q: Fraction | None
    residual_norm: Fraction
    degenerate: bool = False


class ParameterError(ValueError):
    pass


def _require(cond: bool, message: str):
    if not cond:
        raise ParameterError(message)


def _in_unit(name: str, value: Fraction, upper=Fraction(1)):
    _require(0 <= value <= upper, f"{name}={value} outside [0, {upper}]")


def _rates(params: Mapping[str, Fraction]) -> tuple[Fraction, Fraction]:
    """Resolve (r, l) with r + l = 1 from whichever of the two is given."""
    if "r" in params and "l" in params:
        r, l = params["r"], params["l"]
        _require(r + l == 1, f"r + l must equal 1, got {r} + {l}")
    elif "r" in params:
        r = params["r"]
        l = 1 - r
    elif "l" in params:
        l = params["l"]
        r = 1 - l
    else:
        raise ParameterError("missing hopping rates r, l")
    _in_unit("r", r)
    _in_unit("l", l)
    return r, l


def _theta(params: Mapping[str, Fraction], upper=Fraction(1)) -> Fraction:
    _require("theta" in params, "missing parameter theta")
    theta = params["theta"]
    _in_unit("theta", theta, upper)
    return theta


def _raw_matrix(name: str, params: Mapping[str, Fraction]) -> tuple[list, dict]:
    p = dict(params)
    if name == "SEP":
        return [[1, 0, 0, 0], [0, HALF, HALF, 0], [0, HALF, HALF, 0], [0, 0, 0, 1]], {}
    if name == "ASEP":
        r, l = _rates(p)
        return [[1, 0, 0, 0], [0, l, r, 0], [0, l, r, 0], [0, 0, 0, 1]], {"r": r, "l": l}
    if name == "BVM":
        t = _theta(p)
        return [[1, 0, 0, 0], [t, 0, 0, 1 - t], [t, 0, 0, 1 - t], [0, 0, 0, 1]], {"theta": t}
    if name == "AVM":
        r, l = _rates(p)
        return [[1, 0, 0, 0], [r, 0, 0, l], [l, 0, 0, r], [0, 0, 0, 1]], {"r": r, "l": l}
    if name == "SAVM":
        return [[0, HALF, HALF, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, HALF, HALF, 0]], {}
    if name == "AAVM":
        r, l = _rates(p)
        return [[0, l, r, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, r, l, 0]], {"r": r, "l": l}
    if name == "ACSRW":
        t = _theta(p)
        a = (1 - t) / 2
        return [[0, a, a, t], [0, HALF, HALF, 0], [0, HALF, HALF, 0], [0, 0, 0, 1]], {"theta": t}
    if name == "ACRW":
        r, l = _rates(p)
        t = _theta(p)
        return ([[0, l * (1 - t), r * (1 - t), t], [0, l, r, 0], [0, l, r, 0], [0, 0, 0, 1]],
                {"r": r, "l": l, "theta": t})
    if name == "ARW":
        r, l = _rates(p)
        return [[0, 0, 0, 1], [0, l, r, 0], [0, l, r, 0], [0, 0, 0, 1]], {"r": r, "l": l}
    if name == "CSRWB":
        t = _theta(p, HALF)
        row = [1 - 2 * t, t, t, 0]
        return [row, row, row, [0, 0, 0, 1]], {"theta": t}
    if name == "ASRWPI":
        t = _theta(p, HALF)
        return ([[HALF - t, 0, 0, HALF + t], [0, HALF, HALF, 0], [0, HALF, HALF, 0],
                 [HALF - t, 0, 0, HALF + t]], {"theta": t})
    if name == "SCAM":
        t = _theta(p, HALF)
        return [[0, t, t, 1 - 2 * t], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]], {"theta": t}
    if name == "DM":
        t = _theta(p) if "theta" in p else HALF
        return [[1 - t, 0, 0, t], [0, 1, 0, 0], [0, 0, 1, 0], [1 - t, 0, 0, t]], {"theta": t}
    if name == "RM":
        return _reshuffle_row(p)
    if name == "EM1":
        return [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 0, 1]], {}
    if name == "EM2":
        return [[0, 1, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 0, 1]], {}
    raise ParameterError(f"unknown model name {name!r}")


RESHUFFLE_KEYS = {"t", "rho", "theta1", "theta2", "theta3", "alpha1", "alpha2", "alpha3", "alpha4"}


def _reshuffle_row(p: dict) -> tuple[list, dict]:
    """Rank-one reshuffle rows, from (theta1, theta2, theta3), (alpha1..alpha4), (alpha1, rho) or t.

    With rho the two mixed weights are equal: alpha2 = alpha3 = rho - alpha1.
    """
    unknown = set(p) - RESHUFFLE_KEYS
    _require(not unknown, f"unknown reshuffle parameters: {sorted(unknown)}")
    if "rho" in p:
        _require(set(p) <= {"rho", "alpha1"}, "rho combines only with alpha1")
        a1, rho = p.get("alpha1", Fraction(0)), p["rho"]
        a2 = rho - a1
        p = {"alpha1": a1, "alpha2": a2, "alpha3": a2, "alpha4": 1 - a1 - 2 * a2}
    if "t" in p:
        t = p["t"]
        _in_unit("t", t)
        row = [t * t, t * (1 - t), t * (1 - t), (1 - t) ** 2]
        return [row] * 4, {"theta1": row[0], "theta2": row[1], "theta3": row[3]}
    if any(k.startswith("alpha") for k in p):
        row = [p.get(f"alpha{i}", Fraction(0)) for i in range(1, 5)]
        if "alpha4" not in p:
            row[3] = 1 - sum(row[:3])
        _require(all(a >= 0 for a in row), f"reshuffle weights must be nonnegative: {row}")
        _require(sum(row) == 1, f"reshuffle weights must sum to 1: {row}")
        return [row] * 4, {f"alpha{i + 1}": row[i] for i in range(4)}
    if not p:
        p = {"theta1": Fraction(1), "theta2": Fraction(0), "theta3": Fraction(0)}
    t1 = p.get("theta1", Fraction(0))
    t2 = p.get("theta2", Fraction(0))
    t3 = p.get("theta3", 1 - t1 - 2 * t2)
    _require(min(t1, t2, t3) >= 0, "reshuffle parameters must be nonnegative")
    _require(t1 + 2 * t2 + t3 == 1, "reshuffle parameters must satisfy theta1 + 2 theta2 + theta3 = 1")
    row = [t1, t2, t2, t3]
    return [row] * 4, {"theta1": t1, "theta2": t2, "theta3": t3}


def build_model(spec: ModelSpec | str, **params) -> TwoSiteGenerator:
    """Catalog matrix for a named family, conjugated as requested."""
    if isinstance(spec, str):
        spec = ModelSpec(spec, params)
    name = spec.name
    if name not in FAMILIES:
        raise ParameterError(f"unknown model name {spec.name!r}")
    rows, resolved = _raw_matrix(name, spec.params)
    g = TwoSiteGenerator(exact_array(rows), label=name, params=resolved)
    if spec.conjugation != "none":
        g = conjugate(g, spec.conjugation)
    return g


def conjugate(g: TwoSiteGenerator | np.ndarray, which: str) -> TwoSiteGenerator:
    """Conjugate by site reflection (rho), particle-hole swap (tau) or both."""
    if which not in CONJUGATION_PERMUTATIONS:
        raise ValueError(f"unknown conjugation {which!r}")
    sigma = g.sigma if isinstance(g, TwoSiteGenerator) else np.asarray(g, dtype=object)
    perm = list(CONJUGATION_PERMUTATIONS[which])
    out = sigma[np.ix_(perm, perm)]
    if isinstance(g, TwoSiteGenerator):
        return TwoSiteGenerator(out, label=g.label, params=g.params)
    return TwoSiteGenerator(out)


def _as_matrix(g) -> np.ndarray:
    return g.sigma if isinstance(g, TwoSiteGenerator) else np.asarray(g, dtype=object)


def check_stochastic(g) -> bool:
    sigma = _as_matrix(g)
    for i in range(4):
        if sum(sigma[i]) != 1:
            return False
        for j in range(4):
            if i != j and sigma[i, j] < 0:
                return False
    return True


def check_idempotent(g) -> bool:
    sigma = _as_matrix(g)
    return bool(np.all(sigma @ sigma == sigma))


def braid_sides(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (s1 s2 s1 - s2 s1 s2, s1 - s2) on three sites."""
    eye = identity(2, is_exact(sigma))
    s1 = kron(sigma, eye)
    s2 = kron(eye, sigma)
    return s1 @ s2 @ s1 - s2 @ s1 @ s2, s1 - s2


def check_braid(g) -> BraidReport:
    """Test s1 s2 s1 - Q s1 = s2 s1 s2 - Q s2 and extract Q exactly."""
    ternary, diff = braid_sides(_as_matrix(g))
    pivot = next((i for i, d in enumerate(diff.flat) if d != 0), None)
    if pivot is None:
        zero = all(t == 0 for t in ternary.flat)
        return BraidReport(zero, None, max_abs(ternary), degenerate=True)
    q_value = ternary.flat[pivot] / diff.flat[pivot]
    if all(t == q_value * d for t, d in zip(ternary.flat, diff.flat)):
        return BraidReport(True, q_value, Fraction(0))
    # exact least squares over Q, reported as the failure residual
    num = sum(t * d for t, d in zip(ternary.flat, diff.flat))
    den = sum(d * d for d in diff.flat)
    best = num / den
    residual = max(abs(t - best * d) for t, d in zip(ternary.flat, diff.flat))
    return BraidReport(False, best, residual)


def braid_defect(g, q_value) -> np.ndarray:
    """The 8x8 matrix (s1 s2 s1 - Q s1) - (s2 s1 s2 - Q s2)."""
    ternary, diff = braid_sides(_as_matrix(g))
    return ternary - q_value * diff


TL_FORMS = ("sigma", "complement")


def check_temperley_lieb(g, q_value, form: str = "sigma") -> bool:
    """e1 e2 e1 = Q e1 and e2 e1 e2 = Q e2 for e = sigma or e = I - sigma.

    Both choices are idempotent; the exclusion processes satisfy the
    relations in the complement form and never in the sigma form.
    """
    if form not in TL_FORMS:
        raise ValueError(f"form must be one of {TL_FORMS}")
    sigma = _as_matrix(g)
    if form == "complement":
        sigma = identity(4) - sigma
    q_value = frac(q_value)
    eye = identity(2)
    s1 = kron(sigma, eye)
    s2 = kron(eye, sigma)
    return bool(np.all(s1 @ s2 @ s1 == q_value * s1) and np.all(s2 @ s1 @ s2 == q_value * s2))


def presentation_convert(matrix, form: str, q_param) -> dict[str, np.ndarray]:
    """Convert between the s, sigma and q = sigma - 1 presentations.

    The Hecke generator s and the idempotent sigma are related by
    sigma = (qh - s) / (qh + 1/qh) where qh is the Hecke parameter.
    """
    if q_param == 0:
        raise ValueError("Hecke parameter must be nonzero")
    mat = np.asarray(matrix, dtype=object if _exact_param(q_param) else float)
    exact = is_exact(mat) and _exact_param(q_param)
    if exact:
        qh = frac(q_param)
        mat = exact_array(mat)
    else:
        qh = float(q_param)
        mat = np.array(mat, dtype=float)
    eye = identity(4, exact)
    scale = qh + 1 / qh
    if form == "sigma":
        sigma = mat
    elif form == "s":
        sigma = (qh * eye - mat) / scale
    elif form == "q":
        sigma = mat + eye
    else:
        raise ValueError(f"unknown presentation {form!r}")
    s = qh * eye - scale * sigma
    return {"s": s, "sigma": sigma, "q": sigma - eye}


def _exact_param(value) -> bool:
    return isinstance(value, (Fraction, int, str)) and not isinstance(value, bool)


def exact_sqrt(value: Fraction) -> Fraction | None:
    """Square root of a nonnegative rational if it is rational, else None."""
    if value < 0:
        return None
    num, den = value.numerator, value.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(rn, rd)
    return None


def q_from_Q(Q) -> Fraction | float:
    """Hecke parameter qh in (0, 1] with Q = 1/(qh + 1/qh)^2.

    Returns an exact Fraction when qh is rational, otherwise a float that is
    checked against the defining relation to 1e-14.
    """
    Q = frac(Q)
    if not 0 < Q <= Fraction(1, 4):
        raise ValueError(f"Q={Q} outside (0, 1/4]")
    root_q = exact_sqrt(Q)
    if root_q is not None:
        disc = exact_sqrt(1 / Q - 4)
        if disc is not None:
            return (1 / root_q - disc) / 2
    qf = float(Q)
    qh = (1 / math.sqrt(qf) - math.sqrt(max(1 / qf - 4, 0.0))) / 2
    if abs(1 / (qh + 1 / qh) ** 2 - qf) > 1e-14:
        raise ArithmeticError(f"Hecke parameter for Q={Q} failed verification")
    return qh


def Q_from_q(qh) -> Fraction | float:
    return 1 / (qh + 1 / qh) ** 2


def kernel_dimension(g) -> int:
    """dim ker(sigma - I), computed by exact rank."""
    from .tensor import nullspace_dimension

    return nullspace_dimension(_as_matrix(g) - identity(4))


# Parameter grids used by relation suites and searches.

def family_parameter_grid(name: str, denominator: int = 20) -> list[dict[str, Fraction]]:
    """Rational parameter points for a family, endpoints included."""
    grid = [Fraction(k, denominator) for k in range(denominator + 1)]
    half = [x for x in grid if x <= HALF]
    if name in ("SEP", "SAVM", "EM1", "EM2"):
        return [{}]
    if name in ("ASEP", "AVM", "AAVM", "ARW"):
        return [{"r": r} for r in grid]
    if name in ("BVM", "ACSRW"):
        return [{"theta": t} for t in grid]
    if name == "DM":
        return [{"theta": t} for t in grid]
    if name in ("CSRWB", "ASRWPI", "SCAM"):
        return [{"theta": t} for t in half]
    if name == "ACRW":
        coarse = [Fraction(k, 5) for k in range(6)]
        return [{"r": r, "theta": t} for r in coarse for t in coarse]
    if name == "RM":
        pts = []
        for i in range(denominator + 1):
            for j in range((denominator - i) // 2 + 1):
                t1, t2 = Fraction(i, denominator), Fraction(j, denominator)
                pts.append({"theta1": t1, "theta2": t2, "theta3": 1 - t1 - 2 * t2})
        return pts
    raise ParameterError(f"unknown model name {name!r}")


FAMILY_Q_VALUES = {
    "SEP": lambda p: Fraction(1, 4),
    "SAVM": lambda p: Fraction(1, 4),
    "ACSRW": lambda p: Fraction(1, 4),
    "BVM": lambda p: p["theta"] * (1 - p["theta"]),
    "CSRWB": lambda p: p["theta"] * (1 - p["theta"]),
    "ASRWPI": lambda p: p["theta"] ** 2,
    "ASEP": lambda p: p["r"] * p["l"],
    "ARW": lambda p: p["r"] * p["l"],
}
"""Expected deformation parameter for families that satisfy the braid relation everywhere."""
