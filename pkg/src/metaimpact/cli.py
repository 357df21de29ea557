"""Command-line entry point wiring ingestion -> reconstruction -> analytics,
plus model evaluation and synthetic-corpus generation.

Every emitted file starts with a provenance comment line
(``# metaimpact <version> <subcommand>``) followed by a column header row.
Exit codes: 0 success, 1 fatal input error, 2 internal invariant failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from typing import Callable, TextIO

from . import __version__
from .impact import (
    fair_pricing_check,
    fit_power_law,
    impact_dynamics,
    permanent_impact,
    square_root_analysis,
    temporary_impact,
    write_curve,
    write_fair_pricing_points,
    write_sqrt_scatter,
)
from .model import ModelConsistencyError, ModelParams, write_model_curves
from .orderlog import FormatError, parse_market_tape, parse_order_log
from .records import DEFAULT_EXCHANGE_TZ, ImpactCurve, ValidationError
from .reconstruct import (
    enrich_all,
    filter_min_length,
    reconstruct_metaorders,
    write_metaorder_summaries,
)
from .synth import GeneratorConfig, generate_corpus
from .tails import empirical_histogram, estimate_beta, write_histogram

OUT_DIR_ENV = "METAIMPACT_OUT"


class _Emitter:
    """Opens output files with the provenance comment line prepended."""

    def __init__(self, out_dir: str, subcommand: str):
        self.out_dir = out_dir
        self.subcommand = subcommand
        os.makedirs(out_dir, exist_ok=True)

    def write(self, filename: str, writer: Callable[[TextIO], None]) -> str:
        path = os.path.join(self.out_dir, filename)
        with open(path, "w", encoding="utf-8", newline="") as stream:
            stream.write(f"# metaimpact {__version__} {self.subcommand}\n")
            writer(stream)
        return path


def _load_config_defaults(argv: list[str]) -> dict:
    """Read key=value defaults from a --config file; flags override them."""
    path = None
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif arg.startswith("--config="):
            path = arg.split("=", 1)[1]
    if path is None:
        return {}
    defaults = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"config line is not key=value: {line!r}")
            key, value = line.split("=", 1)
            defaults[key.strip().replace("-", "_")] = value.strip()
    return defaults


def _add_io_args(p: argparse.ArgumentParser, tape_required: bool) -> None:
    p.add_argument("--orders", required=True, help="order-log file")
    p.add_argument("--tape", required=tape_required, help="market-tape file")
    p.add_argument("--min-length", type=int, default=2, help="keep metaorders with N >= this")
    p.add_argument("--gap-split", type=float, default=None,
                   help="optional intra-metaorder idle-gap split threshold (seconds)")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out-dir", default=None, help=f"output directory (default ${OUT_DIR_ENV} or .)")
    p.add_argument("--timezone", default=DEFAULT_EXCHANGE_TZ)
    p.add_argument("--config", default=None, help="key=value defaults file; flags override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metaimpact")
    parser.add_argument("--version", action="version", version=f"metaimpact {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("reconstruct", help="group fills into metaorders")
    _add_io_args(p, tape_required=False)
    _common(p)

    p = sub.add_parser("analyze", help="impact curves, distributions and tail fits")
    _add_io_args(p, tape_required=True)
    p.add_argument("--buckets", type=int, default=100)
    p.add_argument("--exec-grid", type=int, default=100)
    p.add_argument("--relax-grid", type=int, default=50)
    p.add_argument("--exec-sampling", choices=("grid", "per_fill"), default="grid")
    _common(p)

    p = sub.add_parser("simulate", help="generate a synthetic corpus with ground truth")
    p.add_argument("--beta", type=float, default=1.5)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=1000)
    p.add_argument("--mode", choices=("model", "planted"), default="model")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--relax-noise", type=float, default=0.0)
    p.add_argument("--lot-sigma", type=float, default=0.75)
    p.add_argument("--mean-gap", type=float, default=3.0)
    p.add_argument("--volume-multiplier-min", type=float, default=10.0)
    p.add_argument("--volume-multiplier-max", type=float, default=10.0)
    p.add_argument("--gap-scale-min", type=float, default=None)
    p.add_argument("--gap-scale-max", type=float, default=None)
    p.add_argument("--duration-exponent", type=float, default=0.0,
                   help="planted mode: duration exponent of the planted impact")
    p.add_argument("--prefix", default="corpus")
    _common(p)

    p = sub.add_parser("model-curves", help="exact impact schedule table")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--horizon", type=int, default=1000)
    p.add_argument("--first-jump", type=float, default=1.0)
    p.add_argument("--increment-scale", type=float, default=1.0)
    _common(p)

    p = sub.add_parser("fair-pricing", help="VWAP vs post-relaxation price per metaorder")
    _add_io_args(p, tape_required=True)
    _common(p)

    p = sub.add_parser("sqrt-law", help="impact vs participation scatter and fits")
    _add_io_args(p, tape_required=True)
    _common(p)
    return parser


def _out_dir(args) -> str:
    return args.out_dir or os.environ.get(OUT_DIR_ENV) or "."


def _load_inputs(args, need_tape: bool):
    fills, order_report = parse_order_log(args.orders)
    tapes, tape_report = ({}, None)
    if args.tape:
        tapes, tape_report = parse_market_tape(args.tape, tz=args.timezone)
    elif need_tape:
        raise FormatError("a market tape is required")
    metaorders = reconstruct_metaorders(fills, tz=args.timezone, gap_split_s=args.gap_split)
    metaorders = filter_min_length(metaorders, args.min_length)
    return fills, metaorders, tapes, order_report, tape_report


def _write_reports(emitter: _Emitter, order_report, tape_report) -> None:
    if order_report:
        emitter.write("rejected_orders.csv", order_report.write)
    if tape_report:
        emitter.write("rejected_tape.csv", tape_report.write)


def _cmd_reconstruct(args) -> int:
    emitter = _Emitter(_out_dir(args), "reconstruct")
    fills, metaorders, tapes, order_report, tape_report = _load_inputs(args, need_tape=False)
    if tapes:
        metaorders, _ = enrich_all(metaorders, tapes)
    emitter.write("metaorders.csv", lambda s: write_metaorder_summaries(metaorders, s))
    _write_reports(emitter, order_report, tape_report)
    print(f"reconstructed {len(metaorders)} metaorders from {len(fills)} fills "
          f"({len(order_report)} rejected lines)")
    return 0


def _execution_fit(curve: ImpactCurve):
    body = [
        p for p in curve.execution_points()
        if not p.artifact and p.rescaled_time > 0 and p.mean_signed_impact > 0
    ]
    if len(body) < 3:
        return None
    return fit_power_law(
        [p.rescaled_time for p in body], [p.mean_signed_impact for p in body]
    )


def _cmd_analyze(args) -> int:
    emitter = _Emitter(_out_dir(args), "analyze")
    _, metaorders, tapes, order_report, tape_report = _load_inputs(args, need_tape=True)
    metaorders, skipped = enrich_all(metaorders, tapes)
    if not metaorders:
        raise ValueError("no metaorders with matching tapes to analyze")
    result = impact_dynamics(
        metaorders,
        tapes,
        n_buckets=args.buckets,
        exec_sampling=args.exec_sampling,
        exec_grid=args.exec_grid,
        relax_grid=args.relax_grid,
    )
    curve = result.curve
    exec_only = ImpactCurve(points=curve.execution_points(),
                            proxy_relaxation_share=0.0,
                            truncated_metaorders=curve.truncated_metaorders)
    emitter.write("dynamics_execution.csv", lambda s: write_curve(exec_only, s))
    emitter.write("dynamics_full.csv", lambda s: write_curve(curve, s))

    lengths = [m.length for m in metaorders]
    centers, freqs = empirical_histogram(lengths, kind="integer")
    emitter.write("length_distribution.csv", lambda s: write_histogram(centers, freqs, s))
    durations = [m.duration_s for m in metaorders]
    centers, freqs = empirical_histogram(durations, kind="log", n_bins=40)
    emitter.write("duration_distribution.csv", lambda s: write_histogram(centers, freqs, s))
    participations = [m.participation for m in metaorders]
    centers, freqs = empirical_histogram(participations, kind="log", n_bins=40)
    emitter.write("participation_distribution.csv", lambda s: write_histogram(centers, freqs, s))

    def write_beta(stream):
        stream.write("method,beta,stderr,n_samples\n")
        for method in ("mle", "loglog_regression"):
            try:
                est = estimate_beta(lengths, method=method, n_min=args.min_length,
                                    n_max=max(lengths))
                stream.write(f"{est.method},{est.beta:.12g},{est.stderr:.12g},{est.n_samples}\n")
            except ValueError as err:
                print(f"beta estimate ({method}) skipped: {err}", file=sys.stderr)

    emitter.write("beta_estimates.csv", write_beta)

    def write_fits(stream):
        stream.write("name,value\n")
        fit = _execution_fit(curve)
        if fit is not None:
            stream.write(f"execution_fit_prefactor,{fit.prefactor:.12g}\n")
            stream.write(f"execution_fit_exponent,{fit.exponent:.12g}\n")
            stream.write(f"execution_fit_residual,{fit.residual:.12g}\n")
        stream.write(f"temporary_impact,{temporary_impact(curve):.12g}\n")
        if curve.relaxation_points():
            stream.write(f"permanent_impact,{permanent_impact(curve):.12g}\n")
        stream.write(f"n_metaorders,{result.n_metaorders}\n")
        stream.write(f"n_truncated,{result.n_truncated}\n")
        stream.write(f"n_missing_tape,{result.n_missing_tape + len(skipped)}\n")

    emitter.write("impact_summary.csv", write_fits)
    _write_reports(emitter, order_report, tape_report)
    print(f"analyzed {result.n_metaorders} metaorders "
          f"({result.n_truncated} truncated relaxations)")
    return 0


def _cmd_simulate(args) -> int:
    config = GeneratorConfig(
        n_metaorders=args.count,
        beta=args.beta,
        horizon=args.horizon,
        seed=args.seed,
        mode=args.mode,
        noise_scale=args.noise,
        relax_noise_scale=args.relax_noise,
        lot_sigma=args.lot_sigma,
        mean_gap_s=args.mean_gap,
        volume_multiplier_min=args.volume_multiplier_min,
        volume_multiplier_max=args.volume_multiplier_max,
        gap_scale_min_s=args.gap_scale_min,
        gap_scale_max_s=args.gap_scale_max,
        planted_duration_exponent=args.duration_exponent,
        timezone=args.timezone,
    )
    files = generate_corpus(config, _out_dir(args), prefix=args.prefix)
    print(f"wrote {files.orders_path}, {files.tape_path}, {files.truth_path}")
    return 0


def _cmd_model_curves(args) -> int:
    emitter = _Emitter(_out_dir(args), "model-curves")
    params = ModelParams(args.beta, args.horizon, args.first_jump, args.increment_scale)
    path = emitter.write("model_curves.csv", lambda s: write_model_curves(params, s))
    print(f"wrote {path}")
    return 0


def _cmd_fair_pricing(args) -> int:
    emitter = _Emitter(_out_dir(args), "fair-pricing")
    _, metaorders, tapes, order_report, tape_report = _load_inputs(args, need_tape=True)
    metaorders, _ = enrich_all(metaorders, tapes)
    result = fair_pricing_check(metaorders, tapes)
    emitter.write("fair_pricing_points.csv", lambda s: write_fair_pricing_points(result, s))

    def write_fit(stream):
        stream.write("name,value\n")
        stream.write(f"slope,{result.slope:.12g}\n")
        stream.write(f"intercept,{result.intercept:.12g}\n")
        stream.write(f"rms_identity,{result.rms_identity:.12g}\n")
        stream.write(f"n_points,{len(result.points)}\n")
        stream.write(f"n_excluded_truncated,{result.n_excluded_truncated}\n")

    emitter.write("fair_pricing_fit.csv", write_fit)
    _write_reports(emitter, order_report, tape_report)
    print(f"fair pricing: slope {result.slope:.6g}, rms from identity {result.rms_identity:.6g}")
    return 0


def _cmd_sqrt_law(args) -> int:
    emitter = _Emitter(_out_dir(args), "sqrt-law")
    _, metaorders, tapes, order_report, tape_report = _load_inputs(args, need_tape=True)
    metaorders, _ = enrich_all(metaorders, tapes)
    result = square_root_analysis(metaorders, tapes)
    emitter.write("sqrt_scatter.csv", lambda s: write_sqrt_scatter(result, s))

    def write_fit(stream):
        stream.write("name,value\n")
        stream.write(f"prefactor,{result.fit.prefactor:.12g}\n")
        stream.write(f"participation_exponent,{result.fit.exponent:.12g}\n")
        stream.write(f"fit_residual,{result.fit.residual:.12g}\n")
        stream.write(f"duration_coefficient,{result.duration_coefficient:.12g}\n")
        stream.write(f"duration_coefficient_stderr,{result.duration_coefficient_stderr:.12g}\n")
        stream.write(f"n_points,{len(result.participation)}\n")
        stream.write(f"n_dropped_nonpositive,{result.n_dropped_nonpositive}\n")

    emitter.write("sqrt_fit.csv", write_fit)
    _write_reports(emitter, order_report, tape_report)
    print(f"sqrt law: participation exponent {result.fit.exponent:.4f}, "
          f"duration coefficient {result.duration_coefficient:.4f}")
    return 0


_COMMANDS = {
    "reconstruct": _cmd_reconstruct,
    "analyze": _cmd_analyze,
    "simulate": _cmd_simulate,
    "model-curves": _cmd_model_curves,
    "fair-pricing": _cmd_fair_pricing,
    "sqrt-law": _cmd_sqrt_law,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        defaults = _load_config_defaults(argv)
        args = parser.parse_args(argv)
        for key, value in defaults.items():
            if hasattr(args, key) and any(
                a == f"--{key.replace('_', '-')}" or a.startswith(f"--{key.replace('_', '-')}=")
                for a in argv
            ):
                continue
            if hasattr(args, key):
                current = getattr(args, key)
                caster = type(current) if current is not None else str
                setattr(args, key, caster(value))
        return _COMMANDS[args.subcommand](args)
    except (ValidationError, ModelConsistencyError) as err:
        print(f"internal invariant failure: {err}", file=sys.stderr)
        return 2
    except (FormatError, FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
