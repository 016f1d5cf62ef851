"""Command-line entry point: ``lshlearn {train,predict,convergence,theorem-checks}``.

Exit codes: 0 success, 1 a check failed, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import classifier
from . import experiments as ex
from .missing_mass import EXPECTATION_CONSTANT
from .synthetic import DatasetError, read_csv

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(t)) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_family(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=["gaussian", "cauchy"], default="gaussian")
    p.add_argument("--c", type=float, default=None, help="separation factor (default 3 gaussian, 5 cauchy)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lshlearn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model on a labelled CSV")
    p.add_argument("dataset")
    _add_family(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model output path")
    p.add_argument("--keep-table", action="store_true", help="report bucket occupancy from the full table")

    p = sub.add_parser("predict", help="label the rows of a CSV with a saved model")
    p.add_argument("model")
    p.add_argument("queries")

    p = sub.add_parser("convergence", help="excess-risk experiment over sample sizes and seeds")
    p.add_argument("--task", default="smooth-sine", choices=["smooth-sine", "holder-power", "constant"])
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--eta", type=float, default=0.5, help="value for the constant task")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n-list", type=_int_list, default=[1000, 10_000, 100_000])
    p.add_argument("--seed", type=_int_list, dest="seeds", default=[0, 1, 2, 3, 4], help="seed or comma list")
    _add_family(p)
    p.add_argument("--test-size", type=int, default=20_000)
    p.add_argument("--no-baseline", dest="baseline", action="store_false")
    p.add_argument("--keep-table", dest="diagnostics", action="store_true", help="record bucket diagnostics")
    p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    p.add_argument("--out", default=None, help="append records here instead of stdout")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("theorem-checks", help="sensitivity and missing-mass bound checks")
    _add_family(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dists", type=int, default=500)
    p.add_argument("--max-support", type=int, default=50)
    p.add_argument("--n-max", type=int, default=200)
    p.add_argument("--configs", type=int, default=20)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--bound-constant", type=float, default=EXPECTATION_CONSTANT, help=argparse.SUPPRESS)
    p.add_argument("--out", default=None, help="write the JSON report here")
    return parser


def _flatten(record: dict, prefix: str = "") -> dict:
    flat = {}
    for key, val in record.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            flat.update(_flatten(val, name + "."))
        elif isinstance(val, list):
            flat[name] = ";".join(map(str, val))
        else:
            flat[name] = val
    return flat


def cmd_train(args) -> int:
    X, y = read_csv(args.dataset, labelled=True)
    model = classifier.train(X, y, kind=args.family, rng=args.seed, keep_table=args.keep_table, c=args.c)
    classifier.save_model(model, args.out)
    summary = {
        "n": model.n,
        "d": model.d,
        "m": model.m,
        "w": model.width,
        "family": model.kind.name.lower(),
        "c": model.params.separation_factor,
        "buckets": model.bucket_count,
    }
    if model.retained_table is not None:
        sizes = model.retained_table.sizes()
        summary["max_bucket"] = int(sizes.max())
        summary["mean_bucket"] = float(sizes.mean())
    print(json.dumps(summary))
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        model = classifier.load_model(args.model)
    except (OSError, ValueError, KeyError) as exc:
        raise DatasetError(f"cannot load model {args.model}: {exc}") from exc
    X, _ = read_csv(args.queries, labelled=None)
    if X.shape[1] != model.d:
        raise DatasetError(f"queries have {X.shape[1]} columns, model expects {model.d}")
    out = sys.stdout
    for label in model.predict_batch(X):
        out.write(f"{label}\n")
    return EXIT_OK


def cmd_convergence(args) -> int:
    config = ex.ExperimentConfig(
        task=args.task,
        d=args.d,
        alpha=args.alpha,
        value=args.eta,
        n_list=args.n_list,
        seeds=args.seeds,
        family=args.family,
        c=args.c,
        baseline=args.baseline,
        diagnostics=args.diagnostics,
        test_size=args.test_size,
        out=args.out,
    )
    fh = open(args.out, "a", newline="") if args.out else sys.stdout
    writer = None

    def sink(record: dict) -> None:
        nonlocal writer
        if args.format == "jsonl":
            fh.write(json.dumps(record) + "\n")
        else:
            flat = _flatten(record)
            if writer is None:
                writer = csv.DictWriter(fh, fieldnames=list(flat))
                writer.writeheader()
            writer.writerow(flat)
        fh.flush()

    try:
        ex.run_convergence(config, workers=args.workers, sink=sink)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_theorem_checks(args) -> int:
    results = [ex.check_sensitivity(args.family, args.c)]
    results += ex.check_radius_schedule()
    results.append(ex.expectation_sweep(args.dists, args.max_support, args.n_max, args.seed, args.bound_constant))
    if args.configs > 0 and args.trials > 0:
        results.append(ex.concentration_suite(args.configs, args.trials, args.seed))
    for r in results:
        print(r.line() if r.passed or "violations" not in r.detail else _violation_line(r))
    if args.out:
        Path(args.out).write_text(
            json.dumps([{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results], default=_jsonable)
        )
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


def _violation_line(r) -> str:
    v = r.detail["violations"][0]
    return (
        f"FAIL {r.name}: n={v['n']} k={v['k']} lhs={v['lhs']:.6g} rhs={v['rhs']:.6g} "
        f"probs={np.round(v['probs'], 6).tolist()}"
    )


def _jsonable(obj):
    if isinstance(obj, (np.integer, np.floating, np.bool_)):
        return obj.item()
    raise TypeError(type(obj).__name__)


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "convergence": cmd_convergence,
    "theorem-checks": cmd_theorem_checks,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"lshlearn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
