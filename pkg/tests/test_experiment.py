import json

import pytest

from townnet.experiment import (
    DEFAULT_BETAS,
    DEFAULT_SCENARIOS,
    OUTBREAK_THRESHOLD,
    PERTURBATION_TARGETS,
    AttributeRow,
    Perturbation,
    aggregate_attributes,
    apply_perturbation,
    prefix_label,
    run_attribute_table,
    run_scenario_sweep,
    run_sensitivity,
    scenario_layers,
    write_meta,
    write_runs_csv,
    write_scenario_csv,
)
from townnet.params import LayerKind, ModelParams, default_params, load_params

L = LayerKind

TINY = ModelParams(n_households=80, layers=default_params().layers)


# --------------------------------------------------------------- grammar --

def test_scenario_layer_sets():
    assert scenario_layers("Base") == (L.HOUSEHOLD, L.BLUE_COLLAR, L.SERVICE)
    assert scenario_layers("Base+W") == (L.HOUSEHOLD, L.BLUE_COLLAR,
                                         L.WHITE_COLLAR, L.SERVICE)
    assert scenario_layers("Base+WF") == (L.HOUSEHOLD, L.BLUE_COLLAR,
                                          L.WHITE_COLLAR, L.FRIENDSHIP, L.SERVICE)
    assert scenario_layers("Base+WSF") == tuple(k for k in L if k != L.RANDOM)
    assert scenario_layers("All") == tuple(L)


@pytest.mark.parametrize("bad", ["base", "Base+X", "Base+", "Base+WW",
                                 "All+F", "", "L1"])
def test_scenario_grammar_rejects(bad):
    with pytest.raises(ValueError, match="scenario"):
        scenario_layers(bad)


def test_default_grid_shape():
    assert len(DEFAULT_SCENARIOS) == 9
    assert DEFAULT_BETAS == tuple(sorted(DEFAULT_BETAS))
    assert 0.13 in DEFAULT_BETAS and 0.17 in DEFAULT_BETAS
    assert OUTBREAK_THRESHOLD == 0.01


# ---------------------------------------------------------------- sweeps --

def test_single_run_sweep():
    table = run_scenario_sweep(TINY, ("Base",), (0.5,), realizations=1,
                               master_seed=9)
    assert len(table.runs) == 1
    run = table.runs[0]
    assert table.median_coverage("Base", 0.5) == run.coverage
    assert table.median_time("Base", 0.5) == run.time
    cells = table.cells()
    assert len(cells) == 1 and cells[0].realizations == 1
    assert 0.0 < run.coverage <= 1.0


def test_sweep_validates_arguments():
    with pytest.raises(ValueError, match="beta"):
        run_scenario_sweep(TINY, ("Base",), (0.0,), 1, 0)
    with pytest.raises(ValueError, match="beta"):
        run_scenario_sweep(TINY, ("Base",), (1.5,), 1, 0)
    with pytest.raises(ValueError, match="realizations"):
        run_scenario_sweep(TINY, ("Base",), (0.5,), 0, 0)
    with pytest.raises(ValueError, match="scenario"):
        run_scenario_sweep(TINY, ("Basel",), (0.5,), 1, 0)


def test_sweep_deterministic_and_parallel_agrees():
    kw = dict(scenarios=("Base", "Base+F"), betas=(0.3, 0.6),
              realizations=2, master_seed=5)
    serial = run_scenario_sweep(TINY, **kw)
    again = run_scenario_sweep(TINY, **kw)
    parallel = run_scenario_sweep(TINY, workers=2, **kw)
    assert serial.runs == again.runs == parallel.runs


def test_runs_are_paired_across_betas():
    # same realization index means the same network for every beta
    table = run_scenario_sweep(TINY, ("Base",), (0.2, 0.8), 3, master_seed=1)
    by_beta = {b: table.cell_runs("Base", b) for b in (0.2, 0.8)}
    assert [r.realization for r in by_beta[0.2]] == [r.realization
                                                     for r in by_beta[0.8]]


# ------------------------------------------------------------ attributes --

def test_attribute_table_shape_and_household_row():
    rows = run_attribute_table(TINY, realizations=2, master_seed=3,
                               bfs_sources="all")
    assert len(rows) == 14
    labels = [r.layers for r in rows[:7]]
    assert labels == ["L1", "L1-L2", "L1-L3", "L1-L4", "L1-L5", "L1-L6", "L1-L7"]
    for row in rows:
        if row.layers == "L1":
            assert row.diameter == 1.0 and row.aspl == 1.0
        assert 0.0 < row.lc_fraction <= 1.0
        assert row.exact  # tiny networks are below the source budget
    again = run_attribute_table(TINY, realizations=2, master_seed=3,
                                bfs_sources="all")
    assert again == rows


def test_prefix_label():
    assert prefix_label(1) == "L1"
    assert prefix_label(4) == "L1-L4"


def test_aggregate_attributes_means():
    def row(layers, clustering):
        return AttributeRow(layers=layers, seed=0, n=10, lc_fraction=0.5,
                            diameter=3.0, aspl=2.0, clustering=clustering,
                            exact=True, sources=10)
    agg = aggregate_attributes([row("L1", 0.2), row("L1", 0.4),
                                row("L1-L2", 1.0)])
    assert abs(agg["L1"]["clustering"] - 0.3) < 1e-12
    assert agg["L1-L2"]["diameter"] == 3.0
    assert list(agg) == ["L1", "L1-L2"]


# ---------------------------------------------------------- perturbation --

def test_perturbation_labels_and_targets():
    assert Perturbation("sigma0", 1.5).label == "sigma0_x1.5"
    assert Perturbation("mu_l6_l7", 0.5).label == "mu_l6_l7_x0.5"
    assert set(PERTURBATION_TARGETS) == {"mu_l6_l7", "sigma_l2_l5",
                                         "sigma_l6_l7", "sigma_l2_l7", "sigma0"}


@pytest.mark.parametrize("target", PERTURBATION_TARGETS)
def test_identity_perturbation_is_noop(target):
    p = default_params()
    q = apply_perturbation(p, Perturbation(target, 1.0))
    assert q.fingerprint() == p.fingerprint()


def test_mu_perturbation_scales_service_and_random():
    q = apply_perturbation(default_params(), Perturbation("mu_l6_l7", 1.5))
    assert q.layers[L.SERVICE].mu == 75.0
    assert q.layers[L.RANDOM].mu == 75.0
    assert q.layers[L.FRIENDSHIP].mu == 12.3


def test_sigma_group_perturbations():
    q = apply_perturbation(default_params(), Perturbation("sigma_l2_l5", 0.5))
    assert q.layers[L.BLUE_COLLAR].sigma == 1.5
    assert q.layers[L.FRIENDSHIP].sigma == 2.5
    assert q.layers[L.SERVICE].sigma == 20.0
    q = apply_perturbation(default_params(), Perturbation("sigma_l2_l7", 2.0))
    assert q.layers[L.SCHOOL].sigma == 6.0
    assert q.layers[L.RANDOM].sigma == 40.0


def test_sigma0_perturbation_covers_explicit_displacements():
    p = load_params({"layers": {"L5": {"sigma_d": 400.0}}})
    q = apply_perturbation(p, Perturbation("sigma0", 2.0))
    assert q.sigma0 == 2000.0
    assert q.layers[L.FRIENDSHIP].sigma_d == 800.0
    assert q.layers[L.SERVICE].sigma_d is None  # still inherits sigma0


def test_perturbation_errors():
    with pytest.raises(ValueError, match="unknown perturbation"):
        apply_perturbation(default_params(), Perturbation("beta", 1.5))
    with pytest.raises(ValueError, match="invalid"):
        apply_perturbation(default_params(), Perturbation("sigma_l2_l7", -1.0))


def test_sensitivity_identity_matches_baseline():
    tables = run_sensitivity(TINY, [Perturbation("sigma0", 1.0)],
                             scenarios=("Base",), betas=(0.4,),
                             realizations=2, master_seed=8)
    assert set(tables) == {"baseline", "sigma0_x1"}
    assert tables["baseline"].runs == tables["sigma0_x1"].runs


# ---------------------------------------------------------------- output --

def test_csv_writers_are_stable(tmp_path):
    table = run_scenario_sweep(TINY, ("Base",), (0.13,), 2, master_seed=2)
    spath, rpath = tmp_path / "scenario_table.csv", tmp_path / "runs.csv"
    write_scenario_csv(table, spath)
    write_runs_csv(table, rpath)

    slines = spath.read_text().splitlines()
    assert slines[0] == "scenario,beta,realizations,median_coverage,median_time"
    assert slines[1].startswith("Base,0.13,2,")
    rlines = rpath.read_text().splitlines()
    assert rlines[0] == "scenario,beta,realization,seed_vertex,coverage,time"
    assert len(rlines) == 1 + len(table.runs)

    before = spath.read_bytes()
    write_scenario_csv(table, spath)
    assert spath.read_bytes() == before


def test_write_meta(tmp_path):
    p = default_params()
    write_meta(tmp_path / "meta.json", p, 7, "experiment", realizations=3)
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["command"] == "experiment"
    assert meta["master_seed"] == 7
    assert meta["realizations"] == 3
    assert meta["params_fingerprint"] == p.fingerprint()
    assert meta["params"]["layers"]["L6"]["gamma_ratio"] == 0.15
