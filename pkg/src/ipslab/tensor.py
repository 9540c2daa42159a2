"""Small exact linear algebra, tensor products and the configuration basis.

Configurations of N two-state sites are encoded as basis indices of the
2^N dimensional space. Site 1 is the most significant position and an
occupied site corresponds to the first basis vector of its factor, so the
two-site ordering is (11, 10, 01, 00). With that convention the index of a
configuration is sum_i (1 - b_i) 2^(N - i).

Exact matrices are numpy object arrays of ``Fraction``; float matrices are
ordinary float64 arrays. Every helper works in either mode and never mixes
them silently.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np

VACUUM = (Fraction(1), Fraction(1))
OCCUPIED = (Fraction(1), Fraction(0))
EMPTY = (Fraction(0), Fraction(1))


def frac(value) -> Fraction:
    """Convert ints, Fractions, decimal strings and "p/q" strings exactly."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        return Fraction(value)
    raise TypeError(f"cannot convert {value!r} to an exact rational")


def exact_array(rows) -> np.ndarray:
    """Object array of Fractions from nested sequences."""
    arr = np.array(rows, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx, val in np.ndenumerate(arr):
        out[idx] = frac(val)
    return out


def is_exact(arr: np.ndarray) -> bool:
    return arr.dtype == object


def identity(n: int, exact: bool = True) -> np.ndarray:
    if not exact:
        return np.eye(n)
    out = np.full((n, n), Fraction(0), dtype=object)
    for i in range(n):
        out[i, i] = Fraction(1)
    return out


def zeros(shape, exact: bool = True) -> np.ndarray:
    if not exact:
        return np.zeros(shape)
    return np.full(shape, Fraction(0), dtype=object)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; exact when both factors are exact."""
    return np.kron(a, b)


def kron_all(factors: Sequence[np.ndarray]) -> np.ndarray:
    out = factors[0]
    for f in factors[1:]:
        out = np.kron(out, f)
    return out


def max_abs(arr: np.ndarray):
    """Largest absolute entry; exact for object arrays, zero for empty input."""
    if arr.size == 0:
        return Fraction(0) if is_exact(arr) else 0.0
    if is_exact(arr):
        return max(abs(v) for v in arr.flat)
    return float(np.max(np.abs(arr)))


def to_float(arr: np.ndarray) -> np.ndarray:
    return np.array(arr, dtype=float)


def config_index(bits: Sequence[int]) -> int:
    """Basis index of an occupation sequence (site 1 most significant)."""
    index = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError(f"occupation values must be 0 or 1, got {b!r}")
        index = 2 * index + (1 - b)
    return index


def index_bits(index: int, n_sites: int) -> tuple[int, ...]:
    """Inverse of :func:`config_index`."""
    if not 0 <= index < 2**n_sites:
        raise ValueError(f"index {index} out of range for {n_sites} sites")
    return tuple(1 - ((index >> (n_sites - 1 - i)) & 1) for i in range(n_sites))


def occupation_table(n_sites: int) -> np.ndarray:
    """Array of shape (2^N, N) whose row i holds the occupations of basis state i."""
    idx = np.arange(2**n_sites)
    shifts = np.arange(n_sites - 1, -1, -1)
    return (1 - ((idx[:, None] >> shifts) & 1)).astype(np.int8)


def product_vector(site_vectors: Sequence[Sequence]) -> np.ndarray:
    """Tensor product of per-site two-component vectors."""
    factors = [np.array(list(v), dtype=object if _any_exact(v) else float) for v in site_vectors]
    return kron_all(factors)


def _any_exact(v) -> bool:
    return any(isinstance(x, (Fraction, int)) and not isinstance(x, bool) for x in v)


def hadamard(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Componentwise product of two lattice vectors (multiplication of test functions)."""
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return u * v


def apply_two_site(matrix: np.ndarray, vector: np.ndarray, site_a: int, site_b: int,
                   n_sites: int) -> np.ndarray:
    """Apply a 4x4 matrix to the ordered site pair (site_a, site_b), 1-based.

    The vector is reshaped into an N-fold tensor so the cost is O(4 * 2^N)
    regardless of how far apart the two sites are.
    """
    a, b = site_a - 1, site_b - 1
    tensor = vector.reshape((2,) * n_sites)
    moved = np.moveaxis(tensor, (a, b), (0, 1))
    shape = moved.shape
    flat = moved.reshape(4, -1)
    out = (matrix @ flat).reshape(shape)
    return np.moveaxis(out, (0, 1), (a, b)).reshape(-1)


def lattice_bonds(n_sites: int, boundary: str = "segment") -> list[tuple[int, int]]:
    """Ordered site pairs (n, n+1) of a segment or ring, 1-based."""
    if boundary == "segment":
        return [(n, n + 1) for n in range(1, n_sites)]
    if boundary == "ring":
        return [(n, n % n_sites + 1) for n in range(1, n_sites + 1)]
    raise ValueError(f"unknown boundary {boundary!r}")


class LatticeOperator:
    """Sum of two-site terms on N sites, stored as (4x4 matrix, site pair) terms.

    The identity part is kept as a separate scalar so that generators
    sum_n (sigma_n - I) stay sparse.
    """

    def __init__(self, n_sites: int, terms: Iterable[tuple[np.ndarray, tuple[int, int]]],
                 identity_coefficient=0):
        self.n_sites = n_sites
        self.terms = [(m, (int(a), int(b))) for m, (a, b) in terms]
        self.identity_coefficient = identity_coefficient

    def apply(self, vector: np.ndarray) -> np.ndarray:
        out = vector * self.identity_coefficient
        for matrix, (a, b) in self.terms:
            out = out + apply_two_site(matrix, vector, a, b, self.n_sites)
        return out

    def _entries(self, float_values: bool):
        """(rows, cols, values) of every term, by index arithmetic on basis states."""
        dim = 2**self.n_sites
        states = np.arange(dim)
        bits = occupation_table(self.n_sites)
        for matrix, (a, b) in self.terms:
            local = to_float(matrix) if float_values else matrix
            local_in = (1 - bits[:, a - 1]) * 2 + (1 - bits[:, b - 1])
            pa, pb = self.n_sites - a, self.n_sites - b
            base = states & ~((1 << pa) | (1 << pb))
            for local_out in range(4):
                coeff = local[local_in, local_out]
                mask = coeff != 0
                target = base | ((local_out >> 1) << pa) | ((local_out & 1) << pb)
                yield states[mask], target[mask], coeff[mask]

    def dense(self) -> np.ndarray:
        dim = 2**self.n_sites
        exact = any(is_exact(m) for m, _ in self.terms)
        out = identity(dim, exact) * self.identity_coefficient
        for rows, cols, vals in self._entries(float_values=not exact):
            for i, j, v in zip(rows, cols, vals):
                out[i, j] += v
        return out

    def sparse(self):
        """Float scipy CSR matrix of the operator."""
        from scipy import sparse

        dim = 2**self.n_sites
        total = sparse.identity(dim, format="csr") * float(self.identity_coefficient)
        parts = list(self._entries(float_values=True))
        if parts:
            rows, cols, vals = (np.concatenate(x) for x in zip(*parts))
            total = total + sparse.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
        return total.tocsr()


def embed_two_site(sigma: np.ndarray, n: int, n_sites: int,
                   boundary: str = "segment") -> LatticeOperator:
    """Operator acting as sigma on sites (n, n+1) and as the identity elsewhere.

    On a ring the pair for n = N is (N, 1).
    """
    upper = n_sites - 1 if boundary == "segment" else n_sites
    if boundary not in ("segment", "ring"):
        raise ValueError(f"unknown boundary {boundary!r}")
    if not 1 <= n <= upper:
        raise ValueError(f"bond {n} out of range 1..{upper} for {boundary} of {n_sites} sites")
    pair = (n, n % n_sites + 1)
    return LatticeOperator(n_sites, [(sigma, pair)])


def generator(sigma: np.ndarray, n_sites: int, boundary: str = "segment") -> LatticeOperator:
    """Markov generator sum over bonds of (sigma_n - I)."""
    exact = is_exact(sigma)
    local = sigma - identity(4, exact)
    return LatticeOperator(n_sites, [(local, pair) for pair in lattice_bonds(n_sites, boundary)])


def cyclic_shift_permutation(n_sites: int) -> np.ndarray:
    """Permutation matrix moving the occupation of site i to site i+1 (mod N)."""
    dim = 2**n_sites
    perm = np.zeros((dim, dim), dtype=object)
    perm[:] = Fraction(0)
    for i in range(dim):
        bits = index_bits(i, n_sites)
        shifted = (bits[-1],) + bits[:-1]
        perm[config_index(shifted), i] = Fraction(1)
    return perm


def exact_rank(matrix: np.ndarray) -> int:
    """Rank by fraction-exact Gaussian elimination."""
    rows = [[frac(x) for x in row] for row in np.asarray(matrix, dtype=object)]
    return _row_reduce(rows)[1]


def _row_reduce(rows: list[list[Fraction]]) -> tuple[list[list[Fraction]], int]:
    if not rows:
        return rows, 0
    n_cols = len(rows[0])
    rank = 0
    for col in range(n_cols):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        lead = rows[rank][col]
        rows[rank] = [x / lead for x in rows[rank]]
        for r in range(len(rows)):
            if r != rank and rows[r][col] != 0:
                factor = rows[r][col]
                rows[r] = [x - factor * y for x, y in zip(rows[r], rows[rank])]
        rank += 1
        if rank == len(rows):
            break
    return rows, rank


def exact_solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a square nonsingular system exactly."""
    n = matrix.shape[0]
    rhs2 = rhs.reshape(n, -1)
    rows = [[frac(x) for x in matrix[i]] + [frac(x) for x in rhs2[i]] for i in range(n)]
    reduced, rank = _row_reduce(rows)
    if rank < n or any(reduced[i][i] != 1 for i in range(n)):
        raise ValueError("matrix is singular")
    sol = np.array([row[n:] for row in reduced], dtype=object)
    return sol.reshape(rhs.shape)


def exact_inverse(matrix: np.ndarray) -> np.ndarray:
    n = matrix.shape[0]
    return exact_solve(matrix, identity(n))


def nullspace_dimension(matrix: np.ndarray) -> int:
    return matrix.shape[1] - exact_rank(matrix)


def lcm_denominator(values: Iterable) -> int:
    from math import lcm

    out = 1
    for v in values:
        out = lcm(out, frac(v).denominator)
    return out


def integer_scaled(matrix: np.ndarray) -> tuple[np.ndarray, int]:
    """Return (integer object array, d) with matrix = array / d."""
    d = lcm_denominator(matrix.flat)
    out = np.empty(matrix.shape, dtype=object)
    for idx, v in np.ndenumerate(matrix):
        out[idx] = int(frac(v) * d)
    return out, d
