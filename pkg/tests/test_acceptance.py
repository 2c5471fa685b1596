"""End-to-end checks at full desk scale.

Covers the headline results in one module: structural attributes of the
cumulative layer prefixes, the epidemic threshold structure across lockdown
scenarios, outbreak time patterns, analytic SIR and graph-metric oracles,
byte-level determinism, and the direction of parameter sensitivities.

The three module fixtures below do the heavy lifting (a 20-realization
attribute table, a 100-realization scenario sweep, and a 30-realization
sensitivity sweep); expect roughly 30-45 minutes on one core:

    pytest tests/test_acceptance.py -v
"""
from collections import Counter

import numpy as np
import pytest
from scipy import stats

import oracles
from townnet import cli
from townnet.experiment import (
    DEFAULT_BETAS,
    DEFAULT_SCENARIOS,
    Perturbation,
    aggregate_attributes,
    run_attribute_table,
    run_scenario_sweep,
    run_sensitivity,
)
from townnet.metrics import (
    average_clustering,
    component_labels,
    core_numbers,
    distance_stats,
    select_seed,
)
from townnet.params import default_params
from townnet.sampling import rng_stream
from townnet.sir import simulate_sir

MASTER_SEED = 0
SENS_BETAS = (0.05, 0.075, 0.1)
TIME_CHAIN = ("Base", "Base+F", "Base+WF", "Base+WSF", "All")
FRIENDSHIP_SCENARIOS = ("Base+F", "Base+WF", "Base+SF", "Base+WSF", "All")


@pytest.fixture(scope="module")
def attr_means():
    rows = run_attribute_table(default_params(), realizations=20,
                               master_seed=MASTER_SEED, bfs_sources=1000)
    return aggregate_attributes(rows)


@pytest.fixture(scope="module")
def sweep():
    return run_scenario_sweep(default_params(), DEFAULT_SCENARIOS,
                              DEFAULT_BETAS, realizations=100,
                              master_seed=MASTER_SEED)


@pytest.fixture(scope="module")
def sens():
    perts = [Perturbation(t, f)
             for t in ("sigma0", "mu_l6_l7") for f in (1.5, 0.5)]
    return run_sensitivity(default_params(), perts, DEFAULT_SCENARIOS,
                           SENS_BETAS, realizations=30,
                           master_seed=MASTER_SEED)


# ----------------------------------------------------- network attributes --

def test_attr_household_only(attr_means):
    m = attr_means["L1"]
    assert m["lc_fraction"] < 0.005
    assert m["diameter"] == 1.0
    assert m["aspl"] == 1.0
    assert abs(m["clustering"] - 0.66) <= 0.03


def test_attr_work_prefix(attr_means):
    m = attr_means["L1-L2"]
    assert abs(m["lc_fraction"] - 0.47) <= 0.06
    assert abs(m["clustering"] - 0.65) <= 0.04
    assert abs(m["diameter"] - 38.4) <= 7.0
    assert abs(m["aspl"] - 16.65) <= 2.5


def test_attr_school_prefix(attr_means):
    m = attr_means["L1-L4"]
    assert abs(m["lc_fraction"] - 0.96) <= 0.03
    assert abs(m["clustering"] - 0.70) <= 0.04


def test_attr_friendship_prefix(attr_means):
    m = attr_means["L1-L5"]
    assert m["lc_fraction"] >= 0.995
    assert abs(m["diameter"] - 9.43) <= 1.5
    assert abs(m["aspl"] - 4.81) <= 0.5
    assert abs(m["clustering"] - 0.18) <= 0.04


def test_attr_full_network(attr_means):
    m = attr_means["L1-L7"]
    assert abs(m["diameter"] - 6.77) <= 1.0
    assert abs(m["aspl"] - 3.61) <= 0.4
    assert abs(m["clustering"] - 0.05) <= 0.02


# ----------------------------------------------------- threshold structure --

@pytest.mark.parametrize("beta", [0.025, 0.05, 0.075, 0.1])
def test_base_stays_subcritical_at_low_rates(sweep, beta):
    assert sweep.median_coverage("Base", beta) < 0.01


def test_base_takes_off_above_threshold(sweep):
    assert sweep.median_coverage("Base", 0.125) > 0.01


def test_friendship_lowers_threshold(sweep):
    assert sweep.median_coverage("Base+F", 0.05) > 0.01


@pytest.mark.parametrize("beta,spreads", [(0.025, False), (0.05, False),
                                          (0.075, True)])
def test_school_threshold_onset(sweep, beta, spreads):
    assert (sweep.median_coverage("Base+S", beta) > 0.01) == spreads


def test_full_network_spreads_at_lowest_rate(sweep):
    assert sweep.median_coverage("All", 0.025) > 0.01


@pytest.mark.parametrize("beta", [0.13, 0.17])
def test_partial_coverage_without_friendship(sweep, beta):
    assert 0.25 <= sweep.median_coverage("Base", beta) <= 0.55


@pytest.mark.parametrize("beta", [0.13, 0.17])
def test_outbreak_coverage_with_friendship(sweep, beta):
    for name in FRIENDSHIP_SCENARIOS:
        assert sweep.median_coverage(name, beta) > 0.8, name


def test_friendship_dominates_single_additions(sweep):
    for beta in [b for b in DEFAULT_BETAS if b >= 0.05]:
        f = sweep.median_coverage("Base+F", beta)
        assert f >= sweep.median_coverage("Base+W", beta), beta
        assert f >= sweep.median_coverage("Base+S", beta), beta


def test_school_friendship_pair_has_highest_coverage(sweep):
    for beta in [b for b in DEFAULT_BETAS if b >= 0.05]:
        sf = sweep.median_coverage("Base+SF", beta)
        assert sf >= sweep.median_coverage("Base+WS", beta), beta
        assert sf >= sweep.median_coverage("Base+WF", beta), beta


# ----------------------------------------------------------- time patterns --

@pytest.mark.parametrize("beta", [0.125, 0.13, 0.15, 0.17, 0.175])
def test_time_decreases_with_added_layers(sweep, beta):
    times = [sweep.median_time(name, beta) for name in TIME_CHAIN]
    inversions = sum(b > a for a, b in zip(times, times[1:]))
    assert inversions <= 1, times


def test_time_peaks_at_intermediate_rate(sweep):
    beta = 0.075
    spreading = [name for name in DEFAULT_SCENARIOS
                 if sweep.median_coverage(name, beta) > 0.20]
    assert spreading, "no scenario passed 20% coverage"
    assert sweep.median_time(spreading[0], beta) > sweep.median_time("Base", beta)


# ----------------------------------------------------------- metric oracles --

def test_metric_oracles_random_graphs():
    """Exact agreement with brute-force references on 200 graphs."""
    rng = np.random.default_rng(7)
    for _ in range(200):
        n, items = oracles.random_graph(rng)
        g = oracles.make_union(n, items)

        labels, sizes = component_labels(g)
        comps = oracles.brute_components(n, items)
        assert sizes.tolist() == [len(c) for c in comps]
        for cid, comp in enumerate(comps):
            assert {int(v) for v in np.flatnonzero(labels == cid)} == comp

        lc = sorted(comps[0])
        if len(lc) >= 2:
            d = oracles.floyd_warshall(n, items)
            sub = d[np.ix_(lc, lc)]
            ds = distance_stats(g, sources="all")
            assert ds.exact
            assert ds.diameter == float(sub.max())
            assert abs(ds.aspl - float(sub.sum() / (len(lc) * (len(lc) - 1)))) < 1e-9

        assert abs(average_clustering(g) - oracles.brute_clustering(n, items)) < 1e-9
        assert core_numbers(g).tolist() == oracles.brute_core_numbers(n, items)
        assert select_seed(g, 0.5) == oracles.brute_select_seed(n, items, 0.5)


def test_sir_two_vertex_transmission_probability():
    # edge weight 0.5 races a unit recovery clock: P(second infection) = 1/3
    g = oracles.make_union(2, [(0, 1, 1)])
    rng = rng_stream(42, 0)
    runs = 100_000
    hits = sum(simulate_sir(g, 0.5, 0, rng).infections == 2
               for _ in range(runs))
    assert abs(hits / runs - 1 / 3) < 0.005


def test_sir_triangle_final_size_distribution():
    items = [(0, 1, 1), (1, 2, 1), (0, 2, 1)]
    want = oracles.ctmc_final_size(3, items, beta=0.5, gamma=1.0, seed=0)
    assert abs(want[1] - 1 / 2) < 1e-12
    assert abs(want[2] - 2 / 9) < 1e-12
    assert abs(want[3] - 5 / 18) < 1e-12

    g = oracles.make_union(3, items)
    rng = rng_stream(43, 0)
    runs = 100_000
    counts = Counter(simulate_sir(g, 0.5, 0, rng).infections
                     for _ in range(runs))
    for size in (1, 2, 3):
        assert abs(counts[size] / runs - want[size]) < 0.01, size


# ------------------------------------------------------------- determinism --

def test_scenario_table_byte_identical(tmp_path):
    args = ["experiment", "--scenarios", "Base,Base+WSF",
            "--betas", "0.1,0.15", "--realizations", "3", "--seed", "7"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    assert (a / "scenario_table.csv").read_bytes() == \
        (b / "scenario_table.csv").read_bytes()
    assert (a / "runs.csv").read_bytes() == (b / "runs.csv").read_bytes()


def test_parallel_execution_matches_serial():
    kw = dict(scenarios=("Base", "Base+F"), betas=(0.075, 0.13),
              realizations=3, master_seed=5)
    serial = run_scenario_sweep(default_params(), **kw)
    parallel = run_scenario_sweep(default_params(), workers=2, **kw)
    assert parallel.runs == serial.runs


# -------------------------------------------------- sensitivity directions --

def _wrong_direction_pvalue(tables, label, wrong):
    """One-sided sign test that the perturbation moved coverage the WRONG way.

    Ties are dropped; with every cell tied there is no evidence either way.
    """
    base, pert = tables["baseline"], tables[label]
    k = n = 0
    for name in DEFAULT_SCENARIOS:
        for beta in SENS_BETAS:
            d = pert.median_coverage(name, beta) - base.median_coverage(name, beta)
            if d == 0.0:
                continue
            n += 1
            k += (d < 0.0) if wrong == "decrease" else (d > 0.0)
    if n == 0:
        return 1.0
    return stats.binomtest(k, n, 0.5, alternative="greater").pvalue


@pytest.mark.parametrize("label,wrong", [
    pytest.param("sigma0_x1.5", "decrease", id="wider-locality-not-reducing"),
    pytest.param("sigma0_x0.5", "increase", id="narrower-locality-not-boosting"),
    pytest.param("mu_l6_l7_x1.5", "decrease", id="more-weak-contacts-not-reducing"),
    pytest.param("mu_l6_l7_x0.5", "increase", id="fewer-weak-contacts-not-boosting"),
])
def test_sensitivity_direction(sens, label, wrong):
    assert _wrong_direction_pvalue(sens, label, wrong) >= 0.05
