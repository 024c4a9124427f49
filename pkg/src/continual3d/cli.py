"""Command-line interface.

Exit status: 0 on success, 1 when a verification or transient check fails,
2 on usage or parse errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings
from contextlib import contextmanager
from dataclasses import asdict

from . import zoo
from .accounting import FlopConvention, grouped_state_table, memory_report, pool_fractions, residual_fraction
from .io import dumps_spec, load_spec, load_weights
from .network import NetworkSpec, analyze, convert_to_continual, init_parameters, padded_layers
from .verify import run_verification, synthetic_stream

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- shared helpers -----------------------------------------------------------------


def resolve_spec(spec: str, resolution: int | None = None) -> NetworkSpec:
    """Builtin name (x3d-s, x3d-m, x3d-l) or path to a network document."""
    if spec in zoo.BUILTINS:
        return zoo.BUILTINS[spec](resolution)
    if resolution is not None:
        raise UsageError("--resolution only applies to builtin networks")
    return load_spec(spec)


def _network(args) -> NetworkSpec:
    net = resolve_spec(args.spec, args.resolution)
    if getattr(args, "weights", None):
        load_weights(args.weights, net, seed=args.seed)
    elif hasattr(args, "weights"):
        init_parameters(net, args.seed)
    return net


def _warn_padding(net: NetworkSpec) -> None:
    layers = padded_layers(net)
    if layers:
        shown = ", ".join(layers[:6]) + (f", ... ({len(layers)} total)" if len(layers) > 6 else "")
        print(
            f"warning: temporal padding is not applied when streaming; outputs differ from the "
            f"padded clip model at layers: {shown}",
            file=sys.stderr,
        )


@contextmanager
def _output(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _default_clip_size(args) -> int:
    if args.clip_size is not None:
        return args.clip_size
    return zoo.clip_frames(args.spec) if args.spec in zoo.BUILTINS else 16


# -- subcommands -------------------------------------------------------------------


def cmd_analyze(args) -> int:
    net = resolve_spec(args.spec, args.resolution)
    s = analyze(net)
    with _output(args.out) as out:
        out.write(f"r_t: {s.r_t}\np_t: {s.p_t}\ntransient_len: {s.transient_len}\ntotal_delay: {s.total_delay}\n")
        padded = padded_layers(net)
        out.write(f"padded_layers: {len(padded)}\n")
    _warn_padding(net)
    return EXIT_OK


def cmd_convert(args) -> int:
    net = resolve_spec(args.spec, args.resolution)
    _warn_padding(net)
    co = convert_to_continual(net, args.global_pool_temporal)
    with _output(args.out) as out:
        out.write(dumps_spec(co))
    return EXIT_OK


def cmd_verify(args) -> int:
    net = convert_to_continual(_network(args))
    r_t = analyze(net).r_t
    if args.frames < r_t:
        raise UsageError(f"--frames {args.frames} is below the receptive field r_T = {r_t}")
    _warn_padding(net)
    frames = synthetic_stream(net.input_shape, args.frames, args.seed)
    report = run_verification(net, frames, args.init, args.tolerance)
    with _output(args.out) as out:
        out.write("step,max_abs_deviation\n")
        for rec in report.records:
            if rec.deviation is not None:
                out.write(f"{rec.step},{rec.deviation:.6e}\n")
        out.write(f"# valid_outputs: {sum(r.valid for r in report.records)}\n")
        out.write(f"# first_valid_step: {report.first_valid_step}\n")
        out.write(f"# max_abs_deviation: {report.max_deviation:.6e}\n")
        out.write(f"# tolerance: {args.tolerance:g}\n")
        for name, dev in report.divergence:
            out.write(f"# divergent_layer: {name} {dev:.6e}\n")
        if report.divergence:
            out.write(f"# first_divergent_layer: {report.divergence[0][0]}\n")
        out.write(f"# result: {'PASS' if report.passed else 'FAIL'}\n")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_transient(args) -> int:
    net = convert_to_continual(_network(args))
    s = analyze(net)
    frames_n = args.frames if args.frames is not None else s.transient_len + 5
    if frames_n <= s.transient_len:
        raise UsageError(f"--frames must exceed the transient length {s.transient_len}")
    frames = synthetic_stream(net.input_shape, frames_n, args.seed)
    report = run_verification(net, frames, args.init, args.tolerance)
    ok = report.passed and report.first_valid_step == report.expected_first_valid
    with _output(args.out) as out:
        out.write("step,valid,max_abs_deviation\n")
        for rec in report.records:
            dev = "" if rec.deviation is None else f"{rec.deviation:.6e}"
            out.write(f"{rec.step},{int(rec.valid)},{dev}\n")
        out.write(f"# transient_len: {s.transient_len}\n")
        out.write(f"# first_valid_step: {report.first_valid_step}\n")
        out.write(f"# expected_first_valid_step: {report.expected_first_valid}\n")
        out.write(f"# result: {'PASS' if ok else 'FAIL'}\n")
    if args.figure:
        from .plotting import plot_transient

        recs = report.records
        plot_transient(
            [r.step for r in recs], [r.valid for r in recs], [r.deviation for r in recs],
            s.transient_len if args.init == "zeros" else 0, args.figure,
        )
    return EXIT_OK if ok else EXIT_FAIL


COST_COLUMNS = (
    "name", "kind", "flops_per_frame", "flops_per_clip", "elementwise_per_frame",
    "elementwise_per_clip", "state_floats", "transient_floats", "delay_frames", "expression",
)


def _cost_summary(report) -> dict:
    summary = {
        "mode": report.mode,
        "clip_size": report.clip_size,
        "state_floats": report.state_floats,
        "max_transient_floats": report.max_transient_floats,
        "max_transient_layer": report.max_transient_layer,
        "frame_cache_floats": report.frame_cache_floats,
        "worst_case_floats": report.worst_case_floats,
        "flops_per_clip": report.flops_per_clip,
        "flops_per_frame": report.flops_per_frame,
        "flop_ratio": round(report.flop_ratio, 4),
        "delay_frames": report.total("delay_frames"),
    }
    if report.mode == "continual":
        summary["residual_fraction"] = round(residual_fraction(report), 6)
        summary.update({f"pool_{k}": (round(v, 6) if isinstance(v, float) else v)
                        for k, v in pool_fractions(report).items() if k != "pool_floats"})
    return summary


def cmd_cost(args) -> int:
    net = resolve_spec(args.spec, args.resolution)
    if args.mode == "continual":
        _warn_padding(net)
        net = convert_to_continual(net)
    convention = FlopConvention(args.mac_flops, not args.no_bias)
    report = memory_report(net, args.mode, _default_clip_size(args), convention)
    summary = _cost_summary(report)
    with _output(args.out) as out:
        if args.format == "json":
            rows = [{c: getattr(r, c) for c in COST_COLUMNS} for r in report.rows]
            json.dump({"summary": summary, "convention": asdict(convention), "rows": rows}, out, indent=2)
            out.write("\n")
        elif args.format == "csv":
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(COST_COLUMNS)
            for r in report.rows:
                writer.writerow([getattr(r, c) for c in COST_COLUMNS])
        else:
            out.write(_cost_table(report, summary))
    if args.figure:
        from .plotting import plot_cost

        plot_cost(report, args.figure)
    return EXIT_OK


def _cost_table(report, summary) -> str:
    buf = io.StringIO()
    if report.mode == "continual":
        rows = [(r.stage, r.layer, r.expression, f"{r.floats:,}") for r in grouped_state_table(report)]
        rows.append(("total", "", "", f"{report.state_floats:,}"))
        head = ("stage", "layer", "expression", "floats")
    else:
        rows = [(r.name, r.kind, "", f"{r.transient_floats:,}") for r in report.rows if r.transient_floats]
        rows.insert(0, ("input", "frame cache", "c x h x w x (m_T-1)", f"{report.frame_cache_floats:,}"))
        head = ("layer", "kind", "", "transient floats")
    widths = [max(len(str(x[i])) for x in rows + [head]) for i in range(4)]
    fmt = "{:<%d}  {:<%d}  {:<%d}  {:>%d}\n" % tuple(widths)
    buf.write(fmt.format(*head))
    buf.write(fmt.format(*("-" * w for w in widths)))
    for row in rows:
        buf.write(fmt.format(*row))
    buf.write("\n")
    for key, value in summary.items():
        buf.write(f"{key}: {value:,}\n" if isinstance(value, int) else f"{key}: {value}\n")
    return buf.getvalue()


def cmd_bench(args) -> int:
    from .bench import bench

    net = _network(args)
    modes = ("clip", "continual") if args.mode == "both" else (args.mode,)
    results = [
        bench(net, m, args.window, args.frames, args.streams, args.repetitions, args.warmup, args.threads, args.seed)
        for m in modes
    ]
    with _output(args.out) as out:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["mode", "predictions_per_s", "std", "repetitions", "warmup", "streams", "window", "frames", "threads"])
        for r in results:
            writer.writerow([r.mode, f"{r.mean:.4f}", f"{r.std:.4f}", r.repetitions, r.warmup, r.streams, r.window, r.frames, r.threads])
        if len(results) == 2:
            out.write(f"# continual_over_clip: {results[1].mean / results[0].mean:.3f}\n")
    if args.figure:
        from .plotting import plot_bench

        plot_bench(results, args.figure)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="continual3d",
        description="Continual 3D CNN streaming engine: verification, cost accounting, benchmarking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, weights=False):
        p.add_argument("--spec", required=True, help="network document path or builtin (x3d-s, x3d-m, x3d-l)")
        p.add_argument("--resolution", type=int, help="input height/width for builtin networks")
        p.add_argument("--out", help="write the report to this file instead of stdout")
        if weights:
            p.add_argument("--weights", help="weight file; random seeded weights if omitted")
            p.add_argument("--seed", type=int, default=0, help="seed for weights and the synthetic stream")

    p = sub.add_parser("analyze", help="print receptive field, padding, transient length and delay")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("convert", help="emit the continual network document")
    common(p)
    p.add_argument("--global-pool-temporal", type=int, help="temporal kernel of the final global pool")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser(
        "verify",
        help="compare streamed outputs against the sliding-window clip oracle",
        description="Output CSV columns: step (1-based), max_abs_deviation; '#' lines summarise.",
    )
    common(p, weights=True)
    p.add_argument("--frames", type=int, default=90)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--init", choices=("zeros", "replicate"), default="zeros")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser(
        "transient",
        help="per-step validity and oracle deviation through the transient",
        description="Output CSV columns: step (1-based), valid (0/1), max_abs_deviation (blank if invalid).",
    )
    common(p, weights=True)
    p.add_argument("--frames", type=int, help="stream length (default transient_len + 5)")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--init", choices=("zeros", "replicate"), default="zeros")
    p.add_argument("--figure", help="render the trace to this image file")
    p.set_defaults(func=cmd_transient)

    p = sub.add_parser(
        "cost",
        help="FLOP, state, transient and delay accounting",
        description=(
            "CSV/JSON row columns: " + ", ".join(COST_COLUMNS) + ". The table format groups "
            "continual state by stage (stage, layer, expression, floats)."
        ),
    )
    common(p)
    p.add_argument("--mode", choices=("clip", "continual"), default="continual")
    p.add_argument("--clip-size", type=int, help="clip length / final pool size (builtin default, else 16)")
    p.add_argument("--mac-flops", type=int, choices=(1, 2), default=1, help="FLOPs per multiply-accumulate")
    p.add_argument("--no-bias", action="store_true", help="exclude bias terms from FLOP counts")
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.add_argument("--figure", help="render a memory breakdown to this image file")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser(
        "bench",
        help="throughput of clip-wise versus continual inference on synthetic streams",
        description="Output CSV columns: mode, predictions_per_s, std, repetitions, warmup, streams, window, frames, threads.",
    )
    common(p, weights=True)
    p.add_argument("--mode", choices=("clip", "continual", "both"), default="both")
    p.add_argument("--window", type=int, default=16, help="clip length n_T")
    p.add_argument("--frames", type=int, default=16, help="timed predictions per stream per repetition")
    p.add_argument("--streams", type=int, default=1)
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--figure", help="render a throughput chart to this image file")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
