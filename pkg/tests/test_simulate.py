import math
from fractions import Fraction

import numpy as np
import pytest

from ipslab.exact import reshuffle_run_probabilities, scam_density, scam_pair_probability
from ipslab.models import ModelSpec
from ipslab.simulate import (
    ObservableEstimate, SimParams, compare, estimate, exact_state_distribution,
    observable_values, rate_table, replica_block_seeds, simulate, state_distribution, z_score,
)

SCAM = ModelSpec("SCAM", {"theta": Fraction(1, 2)})


def test_zero_time_keeps_initial():
    ens = simulate(SimParams(SCAM, 10, 0.0, replicas=50, initial=(1, 0, 1, 1, 0, 0, 1, 0, 1, 1)))
    assert np.all(ens.configurations == np.array([1, 0, 1, 1, 0, 0, 1, 0, 1, 1]))


def test_empty_state_is_absorbing():
    ens = simulate(SimParams(SCAM, 20, 5.0, replicas=300, initial="all_zeros"))
    est = estimate(ens, "density")
    assert est.value == 0 and est.stderr == 0


def test_single_site_decay():
    ens = simulate(SimParams(ModelSpec("EM2"), 20, 1.0, replicas=4000, base_seed=3))
    est = estimate(ens, "density")
    assert abs(z_score(math.exp(-1), est)) < 4


def test_scam_density_at_unit_time():
    theta = Fraction(1, 4)
    ens = simulate(SimParams(ModelSpec("SCAM", {"theta": theta}), 100, 1.0, replicas=4000, base_seed=5))
    assert abs(z_score(scam_density(theta, 1.0), estimate(ens, "density"))) < 4
    for gap in range(3):
        est = estimate(ens, "pair", gap=gap)
        exact = scam_pair_probability(theta, 1.0, 0, gap + 2) if gap == 0 else None
        if exact is not None:
            assert abs(z_score(exact, est)) < 4


def test_determinism_and_seed_dependence():
    params = SimParams(SCAM, 30, 0.7, replicas=600, base_seed=11)
    a, b = simulate(params), simulate(params)
    assert np.array_equal(a.configurations, b.configurations)
    c = simulate(SimParams(SCAM, 30, 0.7, replicas=600, base_seed=12))
    assert not np.array_equal(a.configurations, c.configurations)


def test_replica_streams_are_prefix_stable():
    small = simulate(SimParams(SCAM, 12, 0.5, replicas=300, base_seed=2))
    large = simulate(SimParams(SCAM, 12, 0.5, replicas=700, base_seed=2))
    assert np.array_equal(small.configurations, large.configurations[:300])
    assert replica_block_seeds(2, 700).shape == (3,)


@pytest.mark.parametrize("name,params,initial,t", [
    ("SEP", {}, (1, 0, 1, 1), 0.5),
    ("SCAM", {"theta": Fraction(1, 3)}, (1, 0, 1, 1), 0.5),
    ("RM", {"alpha1": 0, "rho": Fraction(1, 4)}, (1, 0, 1, 1), 0.5),
])
def test_four_site_law(name, params, initial, t):
    spec = ModelSpec(name, params)
    ens = simulate(SimParams(spec, 4, t, replicas=100_000, base_seed=9, initial=initial))
    law = exact_state_distribution(spec, 4, t, initial)
    assert law.sum() == pytest.approx(1.0, abs=1e-12)
    report = compare({s: law[s] for s in range(16)}, state_distribution(ens))
    assert report.passed, report.to_dict()


def test_segment_topology_conserves_exclusion_particles():
    init = (1, 1, 0, 0, 1, 0, 1, 0)
    for topology in ("ring", "segment"):
        ens = simulate(SimParams(ModelSpec("ASEP", {"r": Fraction(3, 4)}), 8, 2.0, replicas=500,
                                 topology=topology, initial=init))
        assert np.all(ens.configurations.sum(axis=1) == sum(init))


def test_segment_law_matches_uniformization():
    spec = ModelSpec("ASEP", {"r": Fraction(3, 4)})
    init = (1, 1, 0, 0)
    ens = simulate(SimParams(spec, 4, 0.8, replicas=50_000, topology="segment", initial=init, base_seed=4))
    law = exact_state_distribution(spec, 4, 0.8, init, topology="segment")
    assert compare({s: law[s] for s in range(16)}, state_distribution(ens)).passed


@pytest.mark.parametrize("name,params", [("SCAM", {"theta": Fraction(1, 4)}),
                                          ("ARW", {"r": Fraction(2, 3)}),
                                          ("ACRW", {"r": Fraction(1, 2), "theta": Fraction(1, 3)})])
def test_monotone_models_never_gain_particles(name, params):
    times = tuple(np.linspace(0, 3, 13))
    ens = simulate(SimParams(ModelSpec(name, params), 24, 3.0, replicas=200, snapshots=times))
    counts = ens.snapshots.sum(axis=2)
    assert np.all(np.diff(counts, axis=1) <= 0)
    assert np.array_equal(ens.snapshots[:, -1], ens.configurations)


def test_reshuffle_stationary_runs():
    rho = Fraction(1, 4)
    spec = ModelSpec("RM", {"alpha1": 0, "rho": rho})
    runs = reshuffle_run_probabilities(0, rho, 3)
    early = simulate(SimParams(spec, 8, 20.0, replicas=20_000, initial="all_zeros", base_seed=1))
    late = simulate(SimParams(spec, 8, 40.0, replicas=20_000, initial="all_zeros", base_seed=2))
    for ens in (early, late):
        exact = {n: float(runs[n]) for n in (1, 2, 3)}
        mc = {n: estimate(ens, "run", n=n) for n in (1, 2, 3)}
        assert compare(exact, mc).passed


def test_observables():
    ens = simulate(SimParams(SCAM, 6, 0.0, replicas=2, initial=(1, 1, 0, 1, 0, 0)))
    assert observable_values(ens, "density")[0] == pytest.approx(0.5)
    # Ring translations: pairs at distance one are (1,2), (2,3), ..., (6,1).
    assert observable_values(ens, "pair", gap=0)[0] == pytest.approx(1 / 6)
    assert observable_values(ens, "run", n=2)[0] == pytest.approx(1 / 6)
    assert observable_values(ens, "empty_interval", a=0, b=2)[0] == pytest.approx(1 / 6)
    assert observable_values(ens, "sites", sites=[0, 3])[0] == pytest.approx(1 / 3)
    assert observable_values(ens, "duality", w=(-1, 1), anchors=(0, 2))[0] == pytest.approx(
        np.mean([(-1) ** (a + b) for a, b in zip([1, 1, 0, 1, 0, 0], [1, 0, 1, 0, 0, 1])]))
    with pytest.raises(ValueError):
        observable_values(ens, "magnetisation")


def test_compare_gate():
    est = ObservableEstimate("x", 0.5, 0.01, 1000)
    assert z_score(0.5, est) == 0
    assert compare({"x": 0.5}, {"x": est}).passed
    assert not compare({"x": 0.4}, {"x": est}).passed
    exact_zero = ObservableEstimate("y", 0.0, 0.0, 10)
    assert z_score(0.0, exact_zero) == 0 and z_score(0.1, exact_zero) == math.inf
    with pytest.raises(KeyError):
        compare({"x": 0.5}, {"y": est})
    many = {k: ObservableEstimate(str(k), 0.5 + (0.045 if k == 0 else 0), 0.01, 1000) for k in range(30)}
    report = compare({k: 0.5 for k in range(30)}, many)
    assert report.fraction_within == pytest.approx(29 / 30) and report.passed


def test_parameter_errors():
    with pytest.raises(ValueError):
        SimParams(SCAM, 10, -1.0)
    with pytest.raises(ValueError):
        SimParams(SCAM, 10, 1.0, topology="torus")
    with pytest.raises(ValueError):
        SimParams(SCAM, 10, 1.0, snapshots=(2.0,))
    with pytest.raises(ValueError):
        simulate(SimParams(SCAM, 10, 1.0, initial=(1, 0)))
    assert rate_table(SCAM).shape == (4, 4)
