"""Command line front end.

Subcommands map onto the library entry points: `generate` emits an edge
list, `metrics` an attribute table, `sir` runs single epidemics, and
`experiment` / `sensitivity` produce the aggregated scenario tables. All
outputs are written under --out; scenario_table.csv depends only on the
parameters and master seed, never on wall time or worker count.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiment import (
    DEFAULT_BETAS,
    DEFAULT_REALIZATIONS,
    DEFAULT_SCENARIOS,
    PERTURBATION_TARGETS,
    Perturbation,
    run_attribute_table,
    run_scenario_sweep,
    run_sensitivity,
    scenario_layers,
    write_attributes_csv,
    write_meta,
    write_runs_csv,
    write_scenario_csv,
)
from .generator import ALL_LAYERS, generate, union_structure, write_edges_csv
from .metrics import core_numbers, largest_component, select_seed
from .params import LayerKind, load_params
from .sampling import derive_seed, rng_stream
from .sir import simulate_sir


def _parse_layers(text: str) -> tuple[LayerKind, ...]:
    return tuple(sorted({LayerKind.from_label(t) for t in text.split(",") if t.strip()}))


def _parse_betas(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _parse_scenarios(text: str) -> tuple[str, ...]:
    names = tuple(t.strip() for t in text.split(",") if t.strip())
    for name in names:
        scenario_layers(name)
    return names


def _parse_sources(text: str) -> int | str:
    return "all" if text.strip().lower() == "all" else int(text)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, default=None,
                     help="JSON parameter overrides")
    sub.add_argument("--seed", type=int, default=0, help="master seed")
    sub.add_argument("--out", type=Path, default=Path("out"),
                     help="output directory (created if missing)")
    sub.add_argument("--verbose", "-v", action="store_true",
                     help="progress logging to stderr")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="townnet",
        description="Layered town contact networks and SIR scenario experiments")
    sp = ap.add_subparsers(dest="command", required=True)

    g = sp.add_parser("generate", help="generate one network and write its edge list")
    _add_common(g)
    g.add_argument("--layers", type=_parse_layers, default=ALL_LAYERS,
                   help="comma separated layer labels, e.g. L1,L2,L6 (default: all)")

    m = sp.add_parser("metrics", help="attribute table over cumulative layer prefixes")
    _add_common(m)
    m.add_argument("--layers", type=_parse_layers, default=None,
                   help="restrict to one explicit layer set instead of prefixes")
    m.add_argument("--realizations", type=int, default=20)
    m.add_argument("--bfs-sources", type=_parse_sources, default=1000,
                   help="BFS sources per network, or 'all' for exact distances")

    s = sp.add_parser("sir", help="single epidemics on one network")
    _add_common(s)
    s.add_argument("--layers", type=_parse_layers, default=ALL_LAYERS)
    s.add_argument("--betas", type=_parse_betas, default=DEFAULT_BETAS)

    e = sp.add_parser("experiment", help="scenario x beta sweep of SIR medians")
    _add_common(e)
    e.add_argument("--scenarios", type=_parse_scenarios, default=DEFAULT_SCENARIOS)
    e.add_argument("--betas", type=_parse_betas, default=DEFAULT_BETAS)
    e.add_argument("--realizations", type=int, default=DEFAULT_REALIZATIONS)
    e.add_argument("--workers", type=int, default=1,
                   help="parallel realization workers (results identical)")

    x = sp.add_parser("sensitivity", help="experiment under scaled parameters")
    _add_common(x)
    x.add_argument("--scenarios", type=_parse_scenarios, default=DEFAULT_SCENARIOS)
    x.add_argument("--betas", type=_parse_betas, default=DEFAULT_BETAS)
    x.add_argument("--realizations", type=int, default=DEFAULT_REALIZATIONS)
    x.add_argument("--workers", type=int, default=1)
    x.add_argument("--targets", default=",".join(PERTURBATION_TARGETS),
                   help=f"comma separated targets from: {', '.join(PERTURBATION_TARGETS)}")
    x.add_argument("--factors", default="0.5,1.5",
                   help="comma separated scale factors applied to each target")
    return ap


def _cmd_generate(args) -> None:
    p = load_params(args.config)
    net = generate(p, args.seed, args.layers)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_edges_csv(net, out / "edges.csv")
    write_meta(out / "meta.json", p, args.seed, "generate",
               n=net.n, active_layers=[k.label for k in net.active],
               edge_counts=net.edge_counts())
    print(f"wrote {out / 'edges.csv'} (n={net.n}, "
          f"{sum(net.edge_counts().values())} edges)")


def _cmd_metrics(args) -> None:
    p = load_params(args.config)
    if args.layers is None:
        prefixes = tuple(range(1, 8))
    else:
        # an explicit layer set is reported as one row; prefixes collapse
        prefixes = (max(int(k) for k in args.layers),)
        missing = set(range(1, prefixes[0] + 1)) - {int(k) for k in args.layers}
        if missing:
            raise SystemExit(f"--layers must be a cumulative prefix L1..Lk for metrics; "
                             f"missing L{min(missing)}")
    rows = run_attribute_table(p, realizations=args.realizations,
                               master_seed=args.seed, bfs_sources=args.bfs_sources,
                               prefixes=prefixes)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_attributes_csv(rows, out / "attributes.csv")
    write_meta(out / "meta.json", p, args.seed, "metrics",
               realizations=args.realizations, bfs_sources=str(args.bfs_sources))
    print(f"wrote {out / 'attributes.csv'} ({len(rows)} rows)")


def _cmd_sir(args) -> None:
    p = load_params(args.config)
    net = generate(p, derive_seed(args.seed, "net", "cli-sir", 0), args.layers)
    g = union_structure(net)
    lc = largest_component(g)
    cores = core_numbers(g)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    lines = ["beta,seed_vertex,coverage,time\n"]
    for beta in args.betas:
        sv = select_seed(g, beta, lc=lc, cores=cores)
        rng = rng_stream(derive_seed(args.seed, "sir", "cli-sir", repr(float(beta)), 0), 0)
        o = simulate_sir(g, beta, sv, rng)
        lines.append(f"{beta:g},{sv},{o.coverage:.6f},{o.duration:.6f}\n")
        print(f"beta={beta:g} seed_vertex={sv} coverage={o.coverage:.4f} "
              f"time={o.duration:.3f}")
    (out / "runs.csv").write_text("".join(lines))
    write_meta(out / "meta.json", p, args.seed, "sir",
               layers=[k.label for k in args.layers], betas=list(args.betas))


def _cmd_experiment(args) -> None:
    p = load_params(args.config)
    table = run_scenario_sweep(p, args.scenarios, args.betas,
                               args.realizations, args.seed, args.workers)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_scenario_csv(table, out / "scenario_table.csv")
    write_runs_csv(table, out / "runs.csv")
    write_meta(out / "meta.json", p, args.seed, "experiment",
               scenarios=list(args.scenarios), betas=list(args.betas),
               realizations=args.realizations)
    print(f"wrote {out / 'scenario_table.csv'} "
          f"({len(args.scenarios)}x{len(args.betas)} cells, "
          f"{args.realizations} realizations)")


def _cmd_sensitivity(args) -> None:
    p = load_params(args.config)
    targets = [t.strip() for t in args.targets.split(",") if t.strip()]
    factors = [float(f) for f in args.factors.split(",") if f.strip()]
    perts = [Perturbation(t, f) for t in targets for f in factors]
    tables = run_sensitivity(p, perts, args.scenarios, args.betas,
                             args.realizations, args.seed, args.workers)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    for label, table in tables.items():
        write_scenario_csv(table, out / f"sensitivity_{label}.csv")
    write_meta(out / "meta.json", p, args.seed, "sensitivity",
               scenarios=list(args.scenarios), betas=list(args.betas),
               realizations=args.realizations,
               perturbations=[pt.label for pt in perts])
    print(f"wrote {len(tables)} tables under {out}")


_COMMANDS = {
    "generate": _cmd_generate,
    "metrics": _cmd_metrics,
    "sir": _cmd_sir,
    "experiment": _cmd_experiment,
    "sensitivity": _cmd_sensitivity,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    try:
        _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
