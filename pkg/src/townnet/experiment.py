"""Scenario sweeps, attribute tables, and sensitivity runs.

A scenario names the set of layers left open during a restriction regime:
"Base" keeps households, blue-collar work, and services running; suffix
letters re-open white-collar work (W), schools (S), or friendships (F);
"All" is the unrestricted town. Every (scenario, realization) pair maps to
its own derived seeds, so realizations can run in any order, or in
parallel, without changing a single result. Within one realization the
same network is reused across the whole beta grid (only the edge weights
change), which pairs the coverage samples across beta and cuts variance.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import multiprocessing
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .generator import ALL_LAYERS, generate, union_structure
from .metrics import (
    average_clustering,
    core_numbers,
    distance_stats,
    largest_component,
    select_seed,
)
from .params import LayerKind, ModelParams, validate
from .sampling import derive_seed, rng_stream
from .sir import simulate_sir

log = logging.getLogger(__name__)

SCENARIO_BASE_LAYERS = (LayerKind.HOUSEHOLD, LayerKind.BLUE_COLLAR, LayerKind.SERVICE)
_LETTER_LAYER = {
    "W": LayerKind.WHITE_COLLAR,
    "S": LayerKind.SCHOOL,
    "F": LayerKind.FRIENDSHIP,
}

DEFAULT_SCENARIOS = ("Base", "Base+W", "Base+S", "Base+F", "Base+WS",
                     "Base+WF", "Base+SF", "Base+WSF", "All")
# regular grid plus the two reported Covid-19 transmission rates
DEFAULT_BETAS = (0.025, 0.05, 0.075, 0.1, 0.125, 0.13, 0.15, 0.17, 0.175)
DEFAULT_REALIZATIONS = 300

OUTBREAK_THRESHOLD = 0.01  # median coverage above this counts as spread


def scenario_layers(name: str) -> tuple[LayerKind, ...]:
    """Layer set for a scenario name ("Base", "Base+WF", ..., "All")."""
    if name == "All":
        return ALL_LAYERS
    if name == "Base":
        return tuple(sorted(SCENARIO_BASE_LAYERS))
    if name.startswith("Base+") and len(name) > 5:
        chosen = list(SCENARIO_BASE_LAYERS)
        for letter in name[5:]:
            kind = _LETTER_LAYER.get(letter)
            if kind is None or kind in chosen:
                raise ValueError(f"unknown scenario {name!r}")
            chosen.append(kind)
        return tuple(sorted(chosen))
    raise ValueError(f"unknown scenario {name!r}")


@dataclass(frozen=True)
class RunRecord:
    scenario: str
    beta: float
    realization: int
    seed_vertex: int
    coverage: float
    time: float


@dataclass(frozen=True)
class CellStat:
    scenario: str
    beta: float
    realizations: int
    median_coverage: float
    median_time: float


@dataclass
class ScenarioTable:
    scenarios: tuple[str, ...]
    betas: tuple[float, ...]
    realizations: int
    master_seed: int
    runs: list[RunRecord]

    def cell_runs(self, scenario: str, beta: float) -> list[RunRecord]:
        return [r for r in self.runs if r.scenario == scenario and r.beta == beta]

    def cells(self) -> list[CellStat]:
        out = []
        for scenario in self.scenarios:
            for beta in self.betas:
                rs = self.cell_runs(scenario, beta)
                out.append(CellStat(
                    scenario, beta, len(rs),
                    float(np.median([r.coverage for r in rs])),
                    float(np.median([r.time for r in rs])),
                ))
        return out

    def median_coverage(self, scenario: str, beta: float) -> float:
        return float(np.median([r.coverage for r in self.cell_runs(scenario, beta)]))

    def median_time(self, scenario: str, beta: float) -> float:
        return float(np.median([r.time for r in self.cell_runs(scenario, beta)]))


def _realization_records(p: ModelParams, scenario: str, betas: tuple[float, ...],
                         r: int, master_seed: int) -> list[RunRecord]:
    """All runs of one (scenario, realization): one network, one run per beta."""
    net = generate(p, derive_seed(master_seed, "net", scenario, r),
                   scenario_layers(scenario))
    g = union_structure(net)
    lc = largest_component(g)
    cores = core_numbers(g)
    records = []
    for beta in betas:
        sv = select_seed(g, beta, lc=lc, cores=cores)
        rng = rng_stream(derive_seed(master_seed, "sir", scenario, repr(float(beta)), r), 0)
        out = simulate_sir(g, beta, sv, rng)
        records.append(RunRecord(scenario, float(beta), r, sv,
                                 out.coverage, out.duration))
    return records


def _sweep_task(args) -> list[RunRecord]:
    return _realization_records(*args)


def _check_sweep_args(p: ModelParams, betas, realizations: int) -> None:
    errs = validate(p)
    if errs:
        raise ValueError("invalid parameters:\n  " + "\n  ".join(errs))
    for b in betas:
        if not 0.0 < b <= 1.0:
            raise ValueError(f"beta must be in (0, 1], got {b}")
    if realizations < 1:
        raise ValueError(f"realizations must be >= 1, got {realizations}")


def run_scenario_sweep(p: ModelParams,
                       scenarios: tuple[str, ...] = DEFAULT_SCENARIOS,
                       betas: tuple[float, ...] = DEFAULT_BETAS,
                       realizations: int = DEFAULT_REALIZATIONS,
                       master_seed: int = 0,
                       workers: int = 1) -> ScenarioTable:
    """Median coverage and epidemic duration per (scenario, beta) cell.

    Results are independent of `workers`; the task list and every seed are
    derived from (master_seed, scenario, realization) alone.
    """
    _check_sweep_args(p, betas, realizations)
    scenarios = tuple(scenarios)
    betas = tuple(float(b) for b in betas)
    for name in scenarios:
        scenario_layers(name)  # fail fast on typos

    tasks = [(p, scenario, betas, r, master_seed)
             for scenario in scenarios for r in range(realizations)]
    if workers > 1:
        with multiprocessing.Pool(workers) as pool:
            chunks = pool.map(_sweep_task, tasks)
    else:
        chunks = []
        t0 = time.time()
        for i, task in enumerate(tasks):
            chunks.append(_sweep_task(task))
            if (i + 1) % realizations == 0:
                log.info("scenario %s done (%.1fs elapsed)",
                         task[1], time.time() - t0)
    runs = [rec for chunk in chunks for rec in chunk]
    return ScenarioTable(scenarios, betas, realizations, master_seed, runs)


@dataclass(frozen=True)
class AttributeRow:
    layers: str
    seed: int
    n: int
    lc_fraction: float
    diameter: float
    aspl: float
    clustering: float
    exact: bool
    sources: int


def prefix_label(k: int) -> str:
    return "L1" if k == 1 else f"L1-L{k}"


def run_attribute_table(p: ModelParams, realizations: int = DEFAULT_REALIZATIONS,
                        master_seed: int = 0, bfs_sources: int | str = 1000,
                        prefixes: tuple[int, ...] = tuple(range(1, 8))) -> list[AttributeRow]:
    """Structural attributes of every cumulative layer prefix [L1..Lk].

    One network per realization is generated with all layers and sliced into
    prefixes; the per-phase seed streams make each slice identical to a
    network generated with only those layers.
    """
    errs = validate(p)
    if errs:
        raise ValueError("invalid parameters:\n  " + "\n  ".join(errs))
    rows = []
    for r in range(realizations):
        net_seed = derive_seed(master_seed, "attr", r)
        net = generate(p, net_seed, ALL_LAYERS)
        for k in prefixes:
            layers = tuple(LayerKind(i) for i in range(1, k + 1))
            g = union_structure(net, layers)
            lc = largest_component(g)
            rng = rng_stream(derive_seed(master_seed, "attr-bfs", r, k), 0)
            ds = distance_stats(g, sources=bfs_sources, rng=rng, lc=lc)
            rows.append(AttributeRow(
                layers=prefix_label(k), seed=net_seed, n=net.n,
                lc_fraction=lc.size / net.n, diameter=ds.diameter,
                aspl=ds.aspl, clustering=average_clustering(g),
                exact=ds.exact, sources=ds.sources))
        log.info("attribute realization %d/%d done", r + 1, realizations)
    return rows


def aggregate_attributes(rows: list[AttributeRow]) -> dict[str, dict[str, float]]:
    """Mean of each statistic per prefix label, preserving row order."""
    out: dict[str, dict[str, float]] = {}
    labels = []
    for row in rows:
        if row.layers not in out:
            labels.append(row.layers)
            out[row.layers] = {"lc_fraction": [], "diameter": [], "aspl": [],
                               "clustering": []}
        for field in ("lc_fraction", "diameter", "aspl", "clustering"):
            out[row.layers][field].append(getattr(row, field))
    return {label: {field: float(np.mean(vals))
                    for field, vals in out[label].items()}
            for label in labels}


# sensitivity targets: which layer field is scaled, and on which layers
_SIGMA_GROUPS = {
    "sigma_l2_l5": (LayerKind.BLUE_COLLAR, LayerKind.WHITE_COLLAR,
                    LayerKind.SCHOOL, LayerKind.FRIENDSHIP),
    "sigma_l6_l7": (LayerKind.SERVICE, LayerKind.RANDOM),
    "sigma_l2_l7": (LayerKind.BLUE_COLLAR, LayerKind.WHITE_COLLAR,
                    LayerKind.SCHOOL, LayerKind.FRIENDSHIP,
                    LayerKind.SERVICE, LayerKind.RANDOM),
}
PERTURBATION_TARGETS = ("mu_l6_l7",) + tuple(_SIGMA_GROUPS) + ("sigma0",)


@dataclass(frozen=True)
class Perturbation:
    target: str
    factor: float

    @property
    def label(self) -> str:
        return f"{self.target}_x{self.factor:g}"


def apply_perturbation(p: ModelParams, pert: Perturbation) -> ModelParams:
    """Scaled copy of the parameter set; raises if the result is invalid."""
    if pert.target == "sigma0":
        layers = {
            kind: (lp if lp.sigma_d is None
                   else dataclasses.replace(lp, sigma_d=lp.sigma_d * pert.factor))
            for kind, lp in p.layers.items()
        }
        out = dataclasses.replace(p, sigma0=p.sigma0 * pert.factor, layers=layers)
    elif pert.target == "mu_l6_l7":
        kinds = (LayerKind.SERVICE, LayerKind.RANDOM)
        layers = dict(p.layers)
        for kind in kinds:
            layers[kind] = dataclasses.replace(layers[kind],
                                               mu=layers[kind].mu * pert.factor)
        out = dataclasses.replace(p, layers=layers)
    elif pert.target in _SIGMA_GROUPS:
        layers = dict(p.layers)
        for kind in _SIGMA_GROUPS[pert.target]:
            layers[kind] = dataclasses.replace(layers[kind],
                                               sigma=layers[kind].sigma * pert.factor)
        out = dataclasses.replace(p, layers=layers)
    else:
        raise ValueError(f"unknown perturbation target {pert.target!r}; "
                         f"known: {', '.join(PERTURBATION_TARGETS)}")
    errs = validate(out)
    if errs:
        raise ValueError(f"perturbation {pert.label} yields invalid parameters:\n  "
                         + "\n  ".join(errs))
    return out


def run_sensitivity(p: ModelParams, perturbations: list[Perturbation],
                    scenarios: tuple[str, ...] = DEFAULT_SCENARIOS,
                    betas: tuple[float, ...] = DEFAULT_BETAS,
                    realizations: int = DEFAULT_REALIZATIONS,
                    master_seed: int = 0,
                    workers: int = 1) -> dict[str, ScenarioTable]:
    """Baseline sweep plus one sweep per perturbation, all on shared seeds.

    Sharing master_seed pairs the realizations: a perturbed cell differs
    from its baseline cell only through the parameter change.
    """
    tables = {"baseline": run_scenario_sweep(p, scenarios, betas, realizations,
                                             master_seed, workers)}
    for pert in perturbations:
        pp = apply_perturbation(p, pert)
        log.info("sensitivity sweep %s", pert.label)
        tables[pert.label] = run_scenario_sweep(pp, scenarios, betas,
                                                realizations, master_seed, workers)
    return tables


# ---------------------------------------------------------------- output --

def _fmt(x: float) -> str:
    return f"{x:.6f}"


def write_scenario_csv(table: ScenarioTable, path: str | Path) -> None:
    """Aggregated medians; byte-identical across reruns with the same seed."""
    with Path(path).open("w") as fh:
        fh.write("scenario,beta,realizations,median_coverage,median_time\n")
        for c in table.cells():
            fh.write(f"{c.scenario},{c.beta:g},{c.realizations},"
                     f"{_fmt(c.median_coverage)},{_fmt(c.median_time)}\n")


def write_runs_csv(table: ScenarioTable, path: str | Path) -> None:
    with Path(path).open("w") as fh:
        fh.write("scenario,beta,realization,seed_vertex,coverage,time\n")
        for r in table.runs:
            fh.write(f"{r.scenario},{r.beta:g},{r.realization},{r.seed_vertex},"
                     f"{_fmt(r.coverage)},{_fmt(r.time)}\n")


def write_attributes_csv(rows: list[AttributeRow], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        fh.write("layers,seed,n,lc_fraction,diameter,aspl,clustering,exact,sources\n")
        for r in rows:
            fh.write(f"{r.layers},{r.seed},{r.n},{_fmt(r.lc_fraction)},"
                     f"{r.diameter:g},{_fmt(r.aspl)},{_fmt(r.clustering)},"
                     f"{str(r.exact).lower()},{r.sources}\n")


def params_payload(p: ModelParams) -> dict:
    payload = dataclasses.asdict(p)
    payload["layers"] = {k.label: v for k, v in sorted(payload["layers"].items())}
    return payload


def write_meta(path: str | Path, p: ModelParams, master_seed: int,
               command: str, **extra) -> None:
    meta = {
        "command": command,
        "version": __version__,
        "master_seed": master_seed,
        "params_fingerprint": p.fingerprint(),
        "params": params_payload(p),
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        **extra,
    }
    Path(path).write_text(json.dumps(meta, indent=2) + "\n")
