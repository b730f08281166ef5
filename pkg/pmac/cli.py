"""
Command-line entry point.

Subcommands:
    solve-pa       Power-allocation equilibrium of an instance
    enumerate-cs   Every channel-selection equilibrium (optionally the graph)
    classify-2x2   Closed-form regions of a 2x2 quad
    region-map     Region labels over a grid of gain ratios
    fractions      Large-system channel fractions
    sic            SIC rates at an equilibrium
    experiment     Monte-Carlo experiment from a JSON spec

Exit codes: 0 success, 1 usage or input error, 2 solver non-convergence,
3 enumeration cap exceeded.
"""
import argparse
import sys
from pathlib import Path

import msgspec
import numpy as np
import pandas as pd

from pmac.analytic import (
    braess_gap, ChannelQuad, classify_cs_2x2, classify_pa_2x2, high_snr_pa_region, PaRegion, region_map,
)
from pmac.asymptotics import fraction_kkt_residual, LargeSystemParams, solve_fractions
from pmac.config import ExitCode
from pmac.cs_enumerator import build_cs_graph, enumerate_cs_ne
from pmac.errors import ClassificationError
from pmac.experiments.runners import run_experiment
from pmac.experiments.sampling import trial_rng
from pmac.experiments.spec import load_spec
from pmac.pa_solver import DEFAULT_PARAMS, solve_pa_ne, WaterfillParams
from pmac.schema import (
    LargeSystemDoc, load_instance, ne_report_doc, ne_report_table, pa_solution_doc, pa_solution_table,
    QuadDoc, sic_report_doc, sic_report_table,
)
from pmac.sic import DecodingOrder, sic_capacity_at_ne
from pmac.sim_utils.io import atomic_write_json, render_table, write_table
from pmac.sim_utils.logging import configure_logging, graceful_cli


# =============================================================================
# Output helpers
# =============================================================================

def _emit_doc(doc, out: str | None) -> None:
    """Write a JSON document to `out`, or pretty-print it to stdout."""
    if out:
        atomic_write_json(Path(out), doc)
    else:
        print(msgspec.json.format(msgspec.json.encode(doc), indent=2).decode())


def _emit_table(df: pd.DataFrame, out: str | None, fmt: str | None) -> None:
    fmt = fmt or "csv"
    if out:
        write_table(df, out, fmt)
    else:
        sys.stdout.write(render_table(df, fmt).decode())


def _emit_report(doc, to_table, args) -> None:
    """JSON document by default; `--format csv` flattens it with `to_table`."""
    if args.format == "csv":
        _emit_table(to_table(doc), args.out, "csv")
    else:
        _emit_doc(doc, args.out)


def _read_doc(path: str, doc_type):
    return msgspec.json.decode(Path(path).read_bytes(), type=doc_type)


# =============================================================================
# Subcommands
# =============================================================================

@graceful_cli("solve-pa")
def cmd_solve_pa(args) -> ExitCode:
    config, gains = load_instance(args.instance)
    rng = trial_rng(args.seed, 0) if args.initial == "random" else None
    params = WaterfillParams(max_rounds=args.cap) if args.cap is not None else DEFAULT_PARAMS
    solution = solve_pa_ne(gains, config, params, initial=args.initial, rng=rng)
    _emit_report(pa_solution_doc(solution), pa_solution_table, args)
    if args.format == "csv":
        print(f"rounds={solution.rounds_used} residual={solution.residual:.3e} converged={solution.converged}",
              file=sys.stderr)
    return ExitCode.OK if solution.converged else ExitCode.NOT_CONVERGED


@graceful_cli("enumerate-cs")
def cmd_enumerate_cs(args) -> ExitCode:
    config, gains = load_instance(args.instance)
    report = enumerate_cs_ne(gains, config, tie_tolerance=args.tie_tolerance,
                             cap=args.cap, workers=args.workers)
    if args.graph_out:
        graph = build_cs_graph(gains, config)
        prefix = Path(args.graph_out)
        graph.write_edge_list(prefix.with_suffix(".edges"))
        graph.write_vertex_table(prefix.with_suffix(".vertices"))
    _emit_report(ne_report_doc(report), ne_report_table, args)
    return ExitCode.OK


@graceful_cli("classify-2x2")
def cmd_classify_2x2(args) -> ExitCode:
    doc = _read_doc(args.quad, QuadDoc)
    q = ChannelQuad(doc.g11, doc.g12, doc.g21, doc.g22, doc.p_max, doc.sigma2)
    pa = classify_pa_2x2(q)
    cs = classify_cs_2x2(q)
    result: dict = {
        "snr": q.snr,
        "pa_region": str(pa.region),
        "boundary": pa.boundary or cs.boundary,
        "cs_regions": [str(r) for r in cs.regions],
        "cs_equilibria": [list(p.labels) for p in cs.equilibria],
        "multiple": cs.multiple,
    }
    if pa.region is PaRegion.DEGENERATE:
        c = pa.continuum
        result["continuum"] = {"alpha": c.alpha, "slope": c.slope, "intercept": c.intercept,
                               "p22_interval": list(c.p22_interval)}
    else:
        result["p11"], result["p22"] = pa.p11, pa.p22
        result["gap_1"] = braess_gap(q, 1)
        result["gap_4"] = braess_gap(q, 4)
    if args.high_snr:
        try:
            result["high_snr_region"] = str(high_snr_pa_region(q).region)
        except ClassificationError:
            result["high_snr_region"] = None
    _emit_report(result, pd.json_normalize, args)
    return ExitCode.OK


@graceful_cli("region-map")
def cmd_region_map(args) -> ExitCode:
    ratios = np.geomspace(args.ratio_min, args.ratio_max, args.points)
    table = region_map(10.0 ** (args.snr_db / 10.0), ratios, reference_gain=args.reference_gain)
    _emit_table(table, args.out, args.format)
    return ExitCode.OK


@graceful_cli("fractions")
def cmd_fractions(args) -> ExitCode:
    doc = _read_doc(args.params, LargeSystemDoc)
    params = LargeSystemParams(mu=doc.mu, b=doc.b, omega=doc.omega, p_max=doc.p_max, n0=doc.N0)
    x = solve_fractions(params)
    table = pd.DataFrame({
        "channel": np.arange(1, params.num_channels + 1),
        "b_s": params.b,
        "omega": params.omega,
        "x": x.x,
    })
    _emit_table(table, args.out, args.format)
    print(f"kkt_residual={fraction_kkt_residual(x, params):.3e}", file=sys.stderr)
    return ExitCode.OK


@graceful_cli("sic")
def cmd_sic(args) -> ExitCode:
    config, gains = load_instance(args.instance)
    rng = trial_rng(args.seed, 0)
    order = DecodingOrder.random(config.num_players, rng) if args.order == "random" else None
    report = sic_capacity_at_ne(gains, config, args.game, order=order, cap=args.cap, rng=rng)
    _emit_report(sic_report_doc(report), sic_report_table, args)
    return ExitCode.OK


@graceful_cli("experiment")
def cmd_experiment(args) -> ExitCode:
    spec = load_spec(args.spec)
    overrides = {
        "seed": args.seed,
        "trials": args.trials,
        "output_path": args.out,
        "format": args.format,
        "cap": args.cap,
        "workers": args.workers,
        "resume": args.resume or None,
    }
    spec = msgspec.structs.replace(spec, **{k: v for k, v in overrides.items() if v is not None})
    table = run_experiment(spec)
    if not spec.output_path:
        sys.stdout.write(render_table(table, spec.format).decode())
    return ExitCode.OK


# =============================================================================
# Parser
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="Write the result here instead of stdout")
    common.add_argument("--verbose", action="store_true", help="Debug events on stderr")
    common.add_argument("--log-file", type=Path, help="JSON event log (default: data directory)")
    common.add_argument("--format", choices=["csv", "json"],
                        help="Output format (tables default to csv, reports to json)")

    parser = argparse.ArgumentParser(prog="pmac", description="Power allocation and channel selection games")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-pa", parents=[common], help="Power-allocation equilibrium")
    p.add_argument("instance", help="Instance JSON")
    p.add_argument("--initial", choices=["uniform", "random"], default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, help="Most best-response rounds (profiles visited)")
    p.set_defaults(handler=cmd_solve_pa)

    p = sub.add_parser("enumerate-cs", parents=[common], help="Channel-selection equilibria")
    p.add_argument("instance", help="Instance JSON")
    p.add_argument("--cap", type=int, help="Largest S^K to enumerate")
    p.add_argument("--workers", type=int, help="Threads scanning profile ranges")
    p.add_argument("--tie-tolerance", type=float, default=0.0)
    p.add_argument("--graph-out", help="Prefix for .edges and .vertices graph files")
    p.set_defaults(handler=cmd_enumerate_cs)

    p = sub.add_parser("classify-2x2", parents=[common], help="Closed-form 2x2 regions")
    p.add_argument("quad", help="Quad JSON {g11, g12, g21, g22, p_max, sigma2}")
    p.add_argument("--high-snr", action="store_true", help="Also report the high-SNR region")
    p.set_defaults(handler=cmd_classify_2x2)

    p = sub.add_parser("region-map", parents=[common], help="Region labels over gain ratios")
    p.add_argument("--snr-db", type=float, default=20.0)
    p.add_argument("--ratio-min", type=float, default=0.1)
    p.add_argument("--ratio-max", type=float, default=10.0)
    p.add_argument("--points", type=int, default=41)
    p.add_argument("--reference-gain", type=float, default=1.0)
    p.set_defaults(handler=cmd_region_map)

    p = sub.add_parser("fractions", parents=[common], help="Large-system channel fractions")
    p.add_argument("params", help="JSON {b, omega, mu, p_max, N0}")
    p.set_defaults(handler=cmd_fractions)

    p = sub.add_parser("sic", parents=[common], help="SIC rates at an equilibrium")
    p.add_argument("instance", help="Instance JSON")
    p.add_argument("--game", choices=["a", "b"], default="a")
    p.add_argument("--order", choices=["identity", "random"], default="identity")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int)
    p.set_defaults(handler=cmd_sic)

    p = sub.add_parser("experiment", parents=[common], help="Monte-Carlo experiment")
    p.add_argument("spec", help="Experiment spec JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--cap", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--resume", action="store_true", help="Reuse cached per-trial results")
    p.set_defaults(handler=cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(ExitCode.OK if e.code in (0, None) else ExitCode.USAGE)
    configure_logging(log_file=args.log_file, verbose=args.verbose)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
