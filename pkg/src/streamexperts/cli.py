"""Command line entry point: ``streamexperts run|gen|frontier|reduce``."""

from __future__ import annotations

import argparse
import sys

from . import harness
from .core import write_instance, format_instance


def _parse_spec(text: str) -> dict:
    """``"iid n=16 T=100 best_accuracy=0.9"`` -> stream dict."""
    parts = text.split()
    if not parts:
        raise ValueError("empty stream spec")
    spec = {"kind": parts[0]}
    for tok in parts[1:]:
        if "=" not in tok:
            raise ValueError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        spec[k] = harness._scalar(v)
    return spec


def _summary(agg) -> str:
    cfg = agg.config
    lines = [
        f"algorithm={cfg.algorithm} trials={len(agg.results)} failed={sum(r.status != 'ok' for r in agg.results)}",
        f"mean_regret={harness.fmt(agg.mean_regret)} median={harness.fmt(agg.median_regret)} "
        f"q10={harness.fmt(agg.q10_regret)} q90={harness.fmt(agg.q90_regret)}",
        f"mean_rounds={harness.fmt(agg.mean_rounds)} max_peak_words={agg.max_peak_words} "
        f"in_premise={agg.in_premise}",
    ]
    if agg.frac_within_delta is not None:
        lines.append(f"frac_regret_le_delta={harness.fmt(agg.frac_within_delta)}")
    for r in agg.results:
        if r.status != "ok":
            lines.append(f"trial {r.index}: {r.status}")
    return "\n".join(lines)


def cmd_run(args) -> int:
    cfg = harness.load_config(args.config)
    if args.output:
        cfg.output = args.output
    agg = harness.run_experiment(cfg, workers=args.workers)
    if not cfg.output:
        sys.stdout.write(harness.results_table(agg))
    print(_summary(agg), file=sys.stderr)
    return 1 if agg.failed else 0


def cmd_gen(args) -> int:
    spec = _parse_spec(args.spec)
    seed = spec.pop("seed", args.seed)
    inst = harness.build_stream(spec, seed)
    if args.out:
        write_instance(inst, args.out)
    else:
        sys.stdout.write(format_instance(inst))
    return 0


def cmd_frontier(args) -> int:
    cfg = harness.load_config(args.config)
    deltas = [float(d) for d in args.deltas.split(",")]
    rows = harness.memory_frontier(cfg, deltas)
    text = harness.frontier_table(rows)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_reduce(args) -> int:
    rows = harness.run_reduction_experiment(args.case, args.delta, args.trials, args.seed,
                                            n=args.n, T=args.T, epsilon=args.epsilon)
    sys.stdout.write(harness.reduction_table(rows))
    acc = sum(r["correct"] for r in rows) / len(rows)
    print(f"case={args.case.upper()} trials={len(rows)} correct_fraction={harness.fmt(acc)}",
          file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="streamexperts",
                                description="Memory-bounded prediction with expert advice experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured experiment and emit a per-trial CSV")
    run.add_argument("--config", required=True)
    run.add_argument("--output", help="CSV path (overrides the config's output key)")
    run.add_argument("--workers", type=int, default=None)
    run.set_defaults(func=cmd_run)

    gen = sub.add_parser("gen", help="write a generated instance in the text format")
    gen.add_argument("--spec", required=True, help='e.g. "iid n=16 T=100 best_accuracy=0.9 seed=3"')
    gen.add_argument("--out")
    gen.add_argument("--seed", type=int, default=0)
    gen.set_defaults(func=cmd_gen)

    fr = sub.add_parser("frontier", help="peak memory and regret across a delta sweep")
    fr.add_argument("--config", required=True)
    fr.add_argument("--deltas", required=True, help="comma separated")
    fr.add_argument("--output")
    fr.set_defaults(func=cmd_frontier)

    red = sub.add_parser("reduce", help="masked reduction runs with a multiplicative-weights oracle")
    red.add_argument("--case", required=True, choices=["yes", "no", "YES", "NO"])
    red.add_argument("--delta", type=float, required=True)
    red.add_argument("--epsilon", type=float, default=None, help="oracle learning rate")
    red.add_argument("--trials", type=int, default=100)
    red.add_argument("--seed", type=int, default=0)
    red.add_argument("--n", type=int, default=32)
    red.add_argument("--T", type=int, default=2000)
    red.set_defaults(func=cmd_reduce)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
