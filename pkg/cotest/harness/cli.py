"""Command-line driver: run experiments, generate synthetic tasks, compare curves."""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from cotest.errors import ComparisonError, ConfigError, ContractError, DatasetError, TrainingError
from cotest.harness.config import load_config, load_model

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _points(value: str):
    if value in ("second-half", "all"):
        return value
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'second-half', 'all' or a comma list of indices, got '{value}'")


def cmd_run(args) -> int:
    from cotest.harness.experiment import run_experiment

    config = load_config(args.config)
    if args.output_dir:
        config = config.model_copy(update={"output_dir": args.output_dir})
    run_experiment(config, seed=args.seed, threads=args.threads)
    return EXIT_OK


def cmd_gen_class(args) -> int:
    from cotest.harness.synthetic import ClassificationSpec, generate_synthetic_classification

    spec = load_model(args.spec, ClassificationSpec)
    if args.seed is not None:
        spec = spec.model_copy(update={"seed": args.seed})
    dataset = generate_synthetic_classification(spec, args.outdir)
    positives = sum(1 for x in dataset.examples if x.label == 1)
    print(f"✅ Wrote {len(dataset)} examples ({positives} positive) to {args.outdir}")
    return EXIT_OK


def cmd_gen_wrapper(args) -> int:
    from cotest.harness.synthetic import WrapperSpec, generate_synthetic_wrapper

    spec = load_model(args.spec, WrapperSpec)
    if args.seed is not None:
        spec = spec.model_copy(update={"seed": args.seed})
    tasks = generate_synthetic_wrapper(spec, args.outdir)
    print(f"✅ Wrote {len(tasks)} wrapper tasks of {spec.size} documents to {args.outdir}")
    return EXIT_OK


def cmd_compare(args) -> int:
    from cotest.harness.stats import paired_t_test, read_curves

    report = paired_t_test(read_curves(args.curves_a), read_curves(args.curves_b), args.points, args.alpha)
    print(f"📊 {report.algorithm_a} vs {report.algorithm_b} over {report.folds} folds (alpha {report.alpha})")
    for p in report.points:
        t = "   n/a" if p.t_statistic is None else f"{p.t_statistic:+6.2f}"
        print(f"   {p.labeled_count:>5}  diff {p.mean_difference:+.4f}  t {t}  p {p.p_value:.4f}  {p.verdict.value}")
    print(f"   wins {report.wins}, ties {report.ties}, losses {report.losses}")
    if args.out:
        report.save(args.out)
        print(f"✅ Report saved to {args.out}")
    return EXIT_OK


def cmd_summarize(args) -> int:
    from cotest.harness.stats import ComparisonReport, summarize, summary_csv, summary_text

    reports = []
    for path in args.reports:
        try:
            reports.append(ComparisonReport.load(path))
        except FileNotFoundError:
            raise ConfigError(f"report not found: {path}") from None
        except ValueError as e:
            raise ConfigError(f"{path}: not a comparison report ({e})") from None
    rows = summarize(reports)
    print(summary_text(rows), end="")
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        Path(args.csv).write_text(summary_csv(rows), encoding="utf-8")
        print(f"✅ Summary saved to {args.csv}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cotest", description="Co-testing active learning experiments")
    parser.add_argument(
        "--seed",
        type=int,
        default=int(os.environ["COTEST_SEED"]) if os.getenv("COTEST_SEED") else None,
        help="Root seed overriding the config/spec seed (default: COTEST_SEED env var)",
    )
    # also accepted after the subcommand; SUPPRESS keeps the top-level value when omitted there
    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Root seed override")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[seeded], help="Run an experiment config")
    run.add_argument("config", help="Experiment config (JSON)")
    run.add_argument("--output-dir", default=os.getenv("COTEST_OUTPUT_DIR"), help="Override the config output_dir")
    run.add_argument("--threads", type=int, default=None, help="Worker threads (default: COTEST_THREADS, 0 = serial)")
    run.set_defaults(func=cmd_run)

    gen_class = sub.add_parser("gen-class", parents=[seeded], help="Generate a synthetic multi-view classification dataset")
    gen_class.add_argument("spec", help="Generator spec (JSON)")
    gen_class.add_argument("outdir", help="Directory for data.txt and views.txt")
    gen_class.set_defaults(func=cmd_gen_class)

    gen_wrapper = sub.add_parser("gen-wrapper", parents=[seeded], help="Generate synthetic wrapper-induction tasks")
    gen_wrapper.add_argument("spec", help="Generator spec (JSON)")
    gen_wrapper.add_argument("outdir", help="Directory for the task .tsv files")
    gen_wrapper.set_defaults(func=cmd_gen_wrapper)

    compare = sub.add_parser("compare", help="Paired t-test between two algorithms' curves")
    compare.add_argument("curves_a")
    compare.add_argument("curves_b")
    compare.add_argument("--alpha", type=float, default=0.05)
    compare.add_argument("--points", type=_points, default="second-half", help="second-half, all or indices like 0,5,9")
    compare.add_argument("--out", help="Write the report as JSON")
    compare.set_defaults(func=cmd_compare)

    summ = sub.add_parser("summarize", help="Sum win/tie/loss counts over comparison reports")
    summ.add_argument("reports", nargs="+")
    summ.add_argument("--csv", help="Also write the summary as CSV")
    summ.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetError, FileNotFoundError) as e:
        print(f"❌ Configuration error: {e}")
        return EXIT_CONFIG
    except ComparisonError as e:
        print(f"❌ Comparison failed: {e}")
        return EXIT_CONFIG
    except (ContractError, TrainingError) as e:
        print(f"❌ Run failed: {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
