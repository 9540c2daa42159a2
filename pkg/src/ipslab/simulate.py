"""Continuous-time Monte Carlo for two-site models on a ring or segment.

Each ordered bond (n, n+1) in pair state s jumps to s' != s at rate
sigma[s, s']. Events are drawn by the direct (Gillespie) method with a
segment tree of bond rates, so an update costs O(log N).

Replicas are processed in fixed blocks of ``BLOCK`` replicas. Every block
seeds numba's generator with a word drawn from
``SeedSequence(base_seed, spawn_key=(block,))``, so replica i's stream
depends only on (base_seed, i) and not on the number of threads.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .models import ModelSpec, build_model
from .tensor import config_index, generator, index_bits

BLOCK = 256
TOPOLOGIES = ("ring", "segment")

# The bundled TBB is often too old for numba and only produces a warning;
# try OpenMP first unless the user picked a layer.
if "NUMBA_THREADING_LAYER" not in os.environ and "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]


@dataclass(frozen=True)
class SimParams:
    spec: ModelSpec
    n_sites: int
    t_end: float
    replicas: int = 1000
    base_seed: int = 0
    topology: str = "ring"
    initial: object = "all_ones"
    snapshots: tuple = ()

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.t_end < 0:
            raise ValueError("t_end must be >= 0")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}")
        if self.n_sites < 2:
            raise ValueError("need at least two sites")
        if any(not 0 <= s <= self.t_end for s in self.snapshots):
            raise ValueError("snapshot times must lie in [0, t_end]")


@dataclass
class Ensemble:
    params: SimParams
    configurations: np.ndarray
    snapshots: np.ndarray = field(default=None)

    @property
    def replicas(self) -> int:
        return self.configurations.shape[0]


@dataclass(frozen=True)
class ObservableEstimate:
    name: str
    value: float
    stderr: float
    replicas: int


def rate_table(spec: ModelSpec) -> np.ndarray:
    """Off-diagonal jump rates sigma[s, s'] as floats; raises on negative rates."""
    sigma = np.array(build_model(spec).sigma, dtype=float)
    rates = sigma.copy()
    np.fill_diagonal(rates, 0.0)
    if np.any(rates < 0):
        raise ValueError(f"{spec.describe()} has a negative jump rate")
    return rates


def _initial_code(initial) -> tuple[int, float, np.ndarray]:
    if isinstance(initial, str):
        if initial == "all_ones":
            return 0, 0.0, np.zeros(1, dtype=np.int8)
        if initial == "all_zeros":
            return 1, 0.0, np.zeros(1, dtype=np.int8)
        if initial.startswith("bernoulli"):
            p = float(initial.split(":", 1)[1])
            return 2, p, np.zeros(1, dtype=np.int8)
        raise ValueError(f"unknown initial condition {initial!r}")
    if isinstance(initial, tuple) and len(initial) == 2 and initial[0] == "bernoulli":
        return 2, float(initial[1]), np.zeros(1, dtype=np.int8)
    bits = np.asarray(initial, dtype=np.int8)
    if bits.ndim != 1 or np.any((bits != 0) & (bits != 1)):
        raise ValueError("explicit initial configurations are 0/1 sequences")
    return 3, 0.0, bits


@numba.njit(cache=True)
def _pair_index(a, b):
    return (1 - a) * 2 + (1 - b)


@numba.njit(cache=True)
def _tree_set(tree, size, pos, value):
    i = pos + size
    tree[i] = value
    i //= 2
    while i >= 1:
        tree[i] = tree[2 * i] + tree[2 * i + 1]
        i //= 2


@numba.njit(cache=True)
def _tree_find(tree, size, target):
    i = 1
    while i < size:
        left = tree[2 * i]
        if target < left:
            i = 2 * i
        else:
            target -= left
            i = 2 * i + 1
    return i - size


@numba.njit(cache=True)
def _run_replica(eta, rates, totals, n, ring, t_end, snap_times, snaps_out):
    n_bonds = n if ring else n - 1
    size = 1
    while size < n_bonds:
        size *= 2
    tree = np.zeros(2 * size)
    for b in range(n_bonds):
        s = _pair_index(eta[b], eta[(b + 1) % n])
        _tree_set(tree, size, b, totals[s])
    t = 0.0
    k = 0
    n_snaps = snap_times.shape[0]
    while True:
        total = tree[1]
        if total <= 0.0:
            dt = np.inf
        else:
            dt = -math.log(1.0 - np.random.random()) / total
        while k < n_snaps and snap_times[k] < t + dt:
            snaps_out[k, :] = eta
            k += 1
        if t + dt > t_end:
            break
        t += dt
        b = _tree_find(tree, size, np.random.random() * total)
        if b >= n_bonds:
            b = n_bonds - 1
        a_site = b
        b_site = (b + 1) % n
        s = _pair_index(eta[a_site], eta[b_site])
        u = np.random.random() * totals[s]
        target = 0
        acc = 0.0
        for j in range(4):
            acc += rates[s, j]
            if u < acc:
                target = j
                break
            target = j
        eta[a_site] = 1 - target // 2
        eta[b_site] = 1 - target % 2
        for nb in (b - 1, b, b + 1):
            if ring:
                nb = nb % n
            elif nb < 0 or nb >= n_bonds:
                continue
            s2 = _pair_index(eta[nb], eta[(nb + 1) % n])
            _tree_set(tree, size, nb, totals[s2])


@numba.njit(parallel=True, cache=True)
def _simulate_blocks(rates, n, ring, t_end, replicas, block_seeds, block, init_code, init_p,
                     init_bits, snap_times, out, snaps):
    totals = rates.sum(axis=1)
    n_blocks = block_seeds.shape[0]
    for blk in numba.prange(n_blocks):
        np.random.seed(block_seeds[blk])
        start = blk * block
        stop = min(start + block, replicas)
        for r in range(start, stop):
            eta = np.empty(n, dtype=np.int8)
            for i in range(n):
                if init_code == 0:
                    eta[i] = 1
                elif init_code == 1:
                    eta[i] = 0
                elif init_code == 2:
                    eta[i] = 1 if np.random.random() < init_p else 0
                else:
                    eta[i] = init_bits[i]
            _run_replica(eta, rates, totals, n, ring, t_end, snap_times, snaps[r])
            out[r, :] = eta


def replica_block_seeds(base_seed: int, replicas: int) -> np.ndarray:
    n_blocks = (replicas + BLOCK - 1) // BLOCK
    return np.array([np.random.SeedSequence(base_seed, spawn_key=(b,)).generate_state(1)[0]
                     for b in range(n_blocks)], dtype=np.uint32)


def simulate(params: SimParams) -> Ensemble:
    rates = rate_table(params.spec)
    code, p, bits = _initial_code(params.initial)
    if code == 3 and bits.shape[0] != params.n_sites:
        raise ValueError("explicit initial configuration has the wrong length")
    seeds = replica_block_seeds(params.base_seed, params.replicas)
    out = np.empty((params.replicas, params.n_sites), dtype=np.int8)
    snap_times = np.array(sorted(params.snapshots), dtype=float)
    snaps = np.empty((params.replicas, len(snap_times), params.n_sites), dtype=np.int8)
    _simulate_blocks(rates, params.n_sites, params.topology == "ring", float(params.t_end),
                     params.replicas, seeds, BLOCK, code, p, bits, snap_times, out, snaps)
    return Ensemble(params, out, snaps if len(snap_times) else None)


# Observables

def _summary(name: str, per_replica: np.ndarray) -> ObservableEstimate:
    r = per_replica.shape[0]
    mean = float(per_replica.mean())
    stderr = float(per_replica.std(ddof=1) / math.sqrt(r)) if r > 1 else float("nan")
    return ObservableEstimate(name, mean, stderr, r)


def _translates(config: np.ndarray, offsets: Sequence[int], ring: bool) -> np.ndarray:
    """Stack of config[:, x + offset] over admissible base sites x."""
    n = config.shape[1]
    offsets = np.asarray(offsets)
    if ring:
        base = np.arange(n)
    else:
        base = np.arange(0, n - int(offsets.max()) + min(0, int(offsets.min())))
    idx = (base[:, None] + offsets[None, :]) % n
    return config[:, idx]


def observable_values(ensemble: Ensemble, observable: str, configurations=None, **kw) -> np.ndarray:
    """Per-replica values, averaged over translations of the observable."""
    config = ensemble.configurations if configurations is None else configurations
    ring = ensemble.params.topology == "ring"
    if observable == "density":
        return config.mean(axis=1)
    if observable == "pair":
        gap = int(kw.get("gap", int(kw.get("distance", 1)) - 1))
        vals = _translates(config, [0, gap + 1], ring)
        return vals.prod(axis=2).mean(axis=1)
    if observable == "run":
        n = int(kw["n"])
        return _translates(config, list(range(n)), ring).prod(axis=2).mean(axis=1)
    if observable == "sites":
        sites = list(kw["sites"])
        offsets = [s - sites[0] for s in sites]
        return _translates(config, offsets, ring).prod(axis=2).mean(axis=1)
    if observable == "empty_interval":
        a, b = int(kw["a"]), int(kw["b"])
        vals = _translates(config, list(range(a + 1, b + 1)), ring)
        return (1 - vals).prod(axis=2).mean(axis=1)
    if observable == "duality":
        from .duality import _w_sites

        w = [float(x) for x in kw["w"]]
        anchors = list(kw["anchors"])
        sites = sorted(_w_sites(kw.get("family", "alternating_interval"), anchors))
        if not sites:
            return np.ones(config.shape[0])
        vals = _translates(config, sites, ring).astype(float)
        factors = np.where(vals == 1, w[0], w[1])
        return factors.prod(axis=2).mean(axis=1)
    raise ValueError(f"unknown observable {observable!r}")


def estimate(ensemble: Ensemble, observable: str, name: str | None = None, **kw) -> ObservableEstimate:
    values = observable_values(ensemble, observable, **kw)
    label = name or observable + "".join(f"[{k}={v}]" for k, v in sorted(kw.items()))
    return _summary(label, values)


def state_distribution(ensemble: Ensemble) -> dict[int, ObservableEstimate]:
    """Empirical law of the final configuration (small N), indexed by basis index."""
    n = ensemble.configurations.shape[1]
    if n > 12:
        raise ValueError("state distributions are for N <= 12")
    weights = (1 - ensemble.configurations.astype(np.int64)) * (1 << np.arange(n - 1, -1, -1))
    idx = weights.sum(axis=1)
    out = {}
    for s in range(2 ** n):
        indicator = (idx == s).astype(float)
        out[s] = _summary(f"state[{''.join(map(str, index_bits(s, n)))}]", indicator)
    return out


def exact_state_distribution(spec: ModelSpec, n_sites: int, t: float, initial: Sequence[int],
                             topology: str = "ring") -> np.ndarray:
    """Row of exp(tL) at the initial configuration, by uniformization."""
    from .exact import uniformize

    lattice = generator(build_model(spec).sigma, n_sites, topology).sparse()
    start = np.zeros(2 ** n_sites)
    start[config_index(list(initial))] = 1.0
    return uniformize(lattice.T.tocsr(), start, t)


# Comparison harness

@dataclass(frozen=True)
class ComparisonEntry:
    key: object
    exact: float
    value: float
    stderr: float
    z: float


@dataclass
class ComparisonReport:
    entries: list
    passed: bool
    fraction_within: float
    max_abs_z: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "fraction_within_4": self.fraction_within,
            "max_abs_z": self.max_abs_z,
            "entries": [{"key": str(e.key), "exact": e.exact, "mc": e.value,
                         "stderr": e.stderr, "z": e.z} for e in self.entries],
        }


def z_score(exact: float, est: ObservableEstimate) -> float:
    if est.stderr == 0 or math.isnan(est.stderr):
        return 0.0 if math.isclose(est.value, exact, rel_tol=0, abs_tol=1e-15) else math.inf
    return (est.value - exact) / est.stderr


def compare(exact: dict, mc: dict, within: float = 4.0, fraction: float = 0.95,
            hard: float = 6.0) -> ComparisonReport:
    """PASS when |z| <= 4 for at least 95% of entries and no |z| exceeds 6."""
    if set(exact) != set(mc):
        raise KeyError(f"key mismatch: {sorted(map(str, set(exact) ^ set(mc)))}")
    entries = []
    for key in exact:
        est = mc[key]
        entries.append(ComparisonEntry(key, float(exact[key]), est.value, est.stderr,
                                       z_score(float(exact[key]), est)))
    zs = np.array([abs(e.z) for e in entries])
    frac_ok = float(np.mean(zs <= within)) if len(zs) else 1.0
    max_z = float(zs.max()) if len(zs) else 0.0
    return ComparisonReport(entries, frac_ok >= fraction and max_z <= hard, frac_ok, max_z)
