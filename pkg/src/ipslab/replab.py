"""Jump-vector spans for annihilating walks on a segment.

With v = (1, 1) and w = (-1, 1), the spin vector (-1)^eta in the
(occupied, empty) ordering, every v/w string is a product vector and
the 2^N strings form a basis (the Walsh basis). A string is encoded as a
bit mask with bit N - i set when site i carries w, so Hadamard products of
strings are XORs of masks. ``f[x1, x2]`` is the string with w exactly on
(x1, x2]; ``g[x1, x2]`` is its complement.

U^(k) is spanned by Hadamard products of f's with nondecreasing anchors
and W^(k) by their v <-> w images (``generating_masks``). The image is
taken of the whole product: a Hadamard product of an even number of g's
equals the product of the corresponding f's, since w * w = v. The quotients
P^(k) and Q^(k) by U^(k-1) + W^(k-1) are represented by strings with
exactly k jumps starting with v and w respectively.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

from .models import build_model
from .tensor import exact_rank, frac, integer_scaled

V_SITE = (1, 1)
W_SITE = (-1, 1)
_PRIME = 2_147_483_647


def run_mask(lo: int, hi: int, n_sites: int) -> int:
    """Mask of the string with w on sites lo+1..hi."""
    mask = 0
    for i in range(lo + 1, hi + 1):
        mask |= 1 << (n_sites - i)
    return mask


def mask_vector(mask: int, n_sites: int) -> np.ndarray:
    out = np.ones(1, dtype=np.int64)
    for i in range(1, n_sites + 1):
        site = W_SITE if (mask >> (n_sites - i)) & 1 else V_SITE
        out = np.kron(out, np.array(site, dtype=np.int64))
    return out


def jump_count(mask: int, n_sites: int) -> int:
    return bin((mask ^ (mask >> 1)) & ((1 << (n_sites - 1)) - 1)).count("1")


def starts_with_w(mask: int, n_sites: int) -> bool:
    return bool((mask >> (n_sites - 1)) & 1)


def build_jump_vectors(n_sites: int) -> tuple[dict, dict]:
    """f[x1, x2] and g[x1, x2] for 0 <= x1 <= x2 <= N as integer vectors."""
    if n_sites < 2:
        raise ValueError("need N >= 2")
    full = (1 << n_sites) - 1
    f, g = {}, {}
    for x1 in range(n_sites + 1):
        for x2 in range(x1, n_sites + 1):
            m = run_mask(x1, x2, n_sites)
            f[x1, x2] = mask_vector(m, n_sites)
            g[x1, x2] = mask_vector(full ^ m, n_sites)
    return f, g


def generating_masks(kind: str, k: int, n_sites: int) -> set[int]:
    """Masks of the Hadamard products spanning U^(k) (kind "U") or W^(k) (kind "W")."""
    if kind not in ("U", "W"):
        raise ValueError("kind must be 'U' or 'W'")
    if not 0 <= k <= n_sites - 1:
        raise ValueError("k out of range")
    full = (1 << n_sites) - 1
    out = set()
    for anchors in itertools.combinations_with_replacement(range(n_sites + 1), k):
        pairs = list(zip(anchors[0::2], anchors[1::2]))
        if k % 2:
            pairs.append((anchors[-1], n_sites))
        mask = 0
        for lo, hi in pairs:
            mask ^= run_mask(lo, hi, n_sites)
        out.add(mask if kind == "U" else full ^ mask)
    return out


def modular_rank(rows: np.ndarray, prime: int = _PRIME) -> int:
    """Rank modulo a prime by vectorized elimination; a lower bound for the rank over Q."""
    a = np.array(rows, dtype=np.int64) % prime
    n_rows, n_cols = a.shape
    rank = 0
    for col in range(n_cols):
        if rank == n_rows:
            break
        nz = np.nonzero(a[rank:, col])[0]
        if nz.size == 0:
            continue
        piv = rank + nz[0]
        a[[rank, piv]] = a[[piv, rank]]
        inv = pow(int(a[rank, col]), prime - 2, prime)
        a[rank] = (a[rank] * inv) % prime
        others = np.nonzero(a[:, col])[0]
        others = others[others != rank]
        if others.size:
            factors = a[others, col].reshape(-1, 1)
            a[others] = (a[others] - factors * a[rank]) % prime
        rank += 1
    return rank


def certified_rank(masks: set[int], n_sites: int) -> int:
    """Exact rank of a set of strings.

    The count of distinct strings bounds the rank above and the rank modulo a
    prime bounds it below; the function raises if the two disagree.
    """
    if not masks:
        return 0
    rows = np.stack([mask_vector(m, n_sites) for m in sorted(masks)])
    lower = modular_rank(rows)
    if lower != len(masks):
        raise ArithmeticError("rank certificate failed")
    return lower


def walsh_coefficients(vectors: np.ndarray, n_sites: int) -> np.ndarray:
    """Coefficients in the v/w string basis, times 2^N (exact integers).

    ``vectors`` has shape (M, 2^N); column j of the output is indexed by mask
    j where bit N - i is set for w at site i.
    """
    out = np.array(vectors, dtype=np.int64).reshape((-1,) + (2,) * n_sites)
    for axis in range(1, n_sites + 1):
        a = np.take(out, 0, axis=axis)
        b = np.take(out, 1, axis=axis)
        out = np.stack([a + b, b - a], axis=axis)
    return out.reshape(out.shape[0], -1)


def _apply_bond(matrix: np.ndarray, vectors: np.ndarray, bond: int, n_sites: int) -> np.ndarray:
    m = vectors.shape[0]
    t = vectors.reshape((m,) + (2,) * n_sites)
    t = np.moveaxis(t, (bond, bond + 1), (1, 2))
    shape = t.shape
    flat = t.reshape(m, 4, -1)
    out = np.einsum("ij,mjk->mik", matrix, flat).reshape(shape)
    return np.moveaxis(out, (1, 2), (bond, bond + 1)).reshape(m, -1)


@dataclass
class SpanBasis:
    kind: str
    k: int
    n_sites: int
    vectors: list
    quotient_context: set

    @property
    def representative_count(self) -> int:
        ctx = certified_rank(self.quotient_context, self.n_sites)
        return certified_rank(set(self.vectors) | self.quotient_context, self.n_sites) - ctx


def quotient_context(k: int, n_sites: int) -> set[int]:
    if k == 0:
        return set()
    return generating_masks("U", k - 1, n_sites) | generating_masks("W", k - 1, n_sites)


def span_basis(kind: str, k: int, n_sites: int) -> SpanBasis:
    """Representatives of P^(k) (kind "P") or Q^(k) (kind "Q")."""
    if kind not in ("P", "Q"):
        raise ValueError("kind must be 'P' or 'Q'")
    reps = [m for m in range(1 << n_sites)
            if jump_count(m, n_sites) == k and starts_with_w(m, n_sites) == (kind == "Q")]
    return SpanBasis(kind, k, n_sites, sorted(reps), quotient_context(k, n_sites))


def span_dimensions(n_sites: int) -> list[tuple[int, int, int]]:
    """(k, dim P^(k), dim Q^(k)) from exact ranks of the U, W spans."""
    if not 2 <= n_sites <= 10:
        raise ValueError("need 2 <= N <= 10")
    rows = []
    for k in range(n_sites):
        ctx = quotient_context(k, n_sites)
        ctx_rank = certified_rank(ctx, n_sites)
        u = generating_masks("U", k, n_sites)
        w = generating_masks("W", k, n_sites)
        dim_p = certified_rank(u | ctx, n_sites) - ctx_rank
        dim_q = certified_rank(w | ctx, n_sites) - ctx_rank
        rows.append((k, dim_p, dim_q))
    total = sum(p + q for _, p, q in rows)
    if total != 2 ** n_sites:
        raise AssertionError(f"dimensions sum to {total}, expected {2 ** n_sites}")
    return rows


def inclusions_hold(n_sites: int) -> bool:
    """U^(k-1), W^(k-1) lie in U^(k) and W^(k), by exact rank."""
    for k in range(1, n_sites):
        ctx = quotient_context(k, n_sites)
        for kind in ("U", "W"):
            span = generating_masks(kind, k, n_sites)
            if certified_rank(span | ctx, n_sites) != certified_rank(span, n_sites):
                return False
    return True


@dataclass
class InvarianceReport:
    max_residual: Fraction
    checked: int
    quotient_residual: Fraction
    orientation: dict = field(default_factory=dict)


def _arw_integer_sigma(r, l):
    sigma = build_model("ARW", r=r, l=l).sigma
    return integer_scaled(sigma)


def invariance_check(n_sites: int, r, l) -> InvarianceReport:
    """Every sigma_j maps each spanning vector of U^(k), W^(k) into the same span.

    Membership is tested through exact Walsh coefficients: a vector lies in
    the span of a set of strings exactly when its coefficients vanish off
    that set. The quotient action on the exactly-k-jump representatives is
    compared with the coordinate Laplacian form, with the rate for a jump
    moving right reported in ``orientation``.
    """
    r, l = frac(r), frac(l)
    if r + l != 1 or not (r > 0 and l > 0):
        raise ValueError("need r + l = 1 with r, l > 0")
    if not 2 <= n_sites <= 10:
        raise ValueError("need 2 <= N <= 10")
    sigma_int, den = _arw_integer_sigma(r, l)
    sigma_int = np.array(sigma_int, dtype=np.int64)
    scale = den * (1 << n_sites)
    worst = Fraction(0)
    checked = 0
    for kind in ("U", "W"):
        for k in range(n_sites):
            masks = sorted(generating_masks(kind, k, n_sites))
            allowed = np.zeros(1 << n_sites, dtype=bool)
            allowed[masks] = True
            vectors = np.stack([mask_vector(m, n_sites) for m in masks])
            for bond in range(1, n_sites):
                images = _apply_bond(sigma_int, vectors, bond, n_sites)
                coeffs = walsh_coefficients(images, n_sites)
                outside = np.abs(coeffs[:, ~allowed])
                if outside.size:
                    worst = max(worst, Fraction(int(outside.max()), scale))
                checked += len(masks)
    quotient_worst, orientation = _quotient_action_check(n_sites, r, l)
    return InvarianceReport(worst, checked, quotient_worst, orientation)


def quotient_matrices(kind: str, k: int, n_sites: int, r, l) -> tuple[list[int], dict]:
    """Exact matrices of q_x = sigma_x - I on the quotient, columns = images of representatives."""
    r, l = frac(r), frac(l)
    basis = span_basis(kind, k, n_sites)
    reps = basis.vectors
    sigma_int, den = _arw_integer_sigma(r, l)
    sigma_int = np.array(sigma_int, dtype=np.int64)
    scale = den * (1 << n_sites)
    position = {m: i for i, m in enumerate(reps)}
    mats = {}
    if not reps:
        return reps, mats
    vectors = np.stack([mask_vector(m, n_sites) for m in reps])
    for bond in range(1, n_sites):
        coeffs = walsh_coefficients(_apply_bond(sigma_int, vectors, bond, n_sites), n_sites)
        mat = np.full((len(reps), len(reps)), Fraction(0), dtype=object)
        for j, m in enumerate(reps):
            for target, i in position.items():
                mat[i, j] = Fraction(int(coeffs[j, target]), scale)
            mat[j, j] -= 1
        mats[bond] = mat
    return reps, mats


def _jump_positions(mask: int, n_sites: int) -> tuple[int, ...]:
    diff = mask ^ (mask >> 1)
    return tuple(x for x in range(1, n_sites) if (diff >> (n_sites - 1 - x)) & 1)


def _coordinate_matrix(reps: list[int], n_sites: int, bond: int, right, left) -> np.ndarray:
    coords = [_jump_positions(m, n_sites) for m in reps]
    index = {c: i for i, c in enumerate(coords)}
    mat = np.full((len(reps), len(reps)), Fraction(0), dtype=object)
    for j, c in enumerate(coords):
        if bond not in c:
            continue
        kpos = c.index(bond)
        mat[j, j] -= 1
        for step, rate in ((1, right), (-1, left)):
            moved = c[:kpos] + (bond + step,) + c[kpos + 1:]
            if moved in index:
                mat[index[moved], j] += rate
    return mat


def _quotient_action_check(n_sites: int, r: Fraction, l: Fraction):
    orientation = {}
    worst = Fraction(0)
    for kind in ("P", "Q"):
        best = None
        for right, left, label in ((l, r, "l"), (r, l, "r")):
            res = Fraction(0)
            for k in range(1, n_sites):
                reps, mats = quotient_matrices(kind, k, n_sites, r, l)
                for bond, mat in mats.items():
                    diff = mat - _coordinate_matrix(reps, n_sites, bond, right, left)
                    res = max([res] + [abs(x) for x in diff.flat])
            if best is None or res < best[0]:
                best = (res, label)
        worst = max(worst, best[0])
        orientation[kind] = best[1]
    return worst, orientation


def augmented_rank_residual(n_sites: int, r, l) -> int:
    """Count of (kind, k, bond, vector) with rank(span + image) > rank(span), by Fraction elimination.

    Independent of the Walsh coefficients; intended for N <= 6.
    """
    if n_sites > 6:
        raise ValueError("the elimination oracle is limited to N <= 6")
    sigma = build_model("ARW", r=r, l=l).sigma
    from .tensor import apply_two_site

    failures = 0
    for kind in ("U", "W"):
        for k in range(n_sites):
            masks = sorted(generating_masks(kind, k, n_sites))
            span = np.stack([mask_vector(m, n_sites) for m in masks]).astype(object)
            base = exact_rank(span)
            for m in masks:
                vec = mask_vector(m, n_sites).astype(object)
                for bond in range(1, n_sites):
                    image = apply_two_site(sigma, vec, bond, bond + 1, n_sites)
                    if exact_rank(np.vstack([span, image])) != base:
                        failures += 1
    return failures


def cyclic_span_probe(kind: str, k: int, n_sites: int, r, l, trials: int = 3,
                      seed: int = 0) -> int:
    """Smallest dimension of the cyclic span of random vectors under the quotient action."""
    reps, mats = quotient_matrices(kind, k, n_sites, r, l)
    dim = len(reps)
    rng = random.Random(seed)
    smallest = dim
    for _ in range(trials):
        vec = np.array([Fraction(rng.randint(-9, 9), rng.randint(1, 9)) for _ in range(dim)],
                       dtype=object)
        span = [vec]
        frontier = [vec]
        while frontier:
            new_frontier = []
            for u in frontier:
                for mat in mats.values():
                    cand = mat @ u
                    if exact_rank(np.stack(span + [cand])) > len(span):
                        span.append(cand)
                        new_frontier.append(cand)
            frontier = new_frontier
        smallest = min(smallest, len(span))
    return smallest


def expected_dimension(n_sites: int, k: int) -> int:
    return comb(n_sites - 1, k)
