"""Command-line entry point: ``tti <command> ...``.

Commands that need data take ``--in tti.csv --weather weather.csv`` or
``--synthetic SEED`` (the generator over its default date range).
"""

import argparse
import csv
import json
import logging
import sys
import time
from datetime import date

import numpy as np

from . import describe as _describe
from . import experiment as _experiment
from .errors import TtiError
from .evaluate import Pipeline, r2_score, repeated_sampled_cv
from .features import assemble, normalize_case, standardize
from .ingest import (
    join_with_report,
    parse_tti_csv,
    parse_weather_csv,
    synthesize_dataset,
    write_tti_csv,
    write_weather_csv,
)
from .regress import ModelSpec
from .selection import rfe_sweep

SYNTH_START = date(2010, 1, 1)
SYNTH_END = date(2016, 6, 26)

log = logging.getLogger("ttiforecast")


def _date(text):
    return date.fromisoformat(text)


def _sizes(text):
    """``"1..24"``, ``"5"`` or ``"1,2,8"``."""
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",") if t.strip()]


def _add_data_args(p, case=True):
    p.add_argument("--in", dest="tti", help="hourly TTI CSV (timestamp,tti)")
    p.add_argument("--weather", help="daily weather CSV (date + 34 columns)")
    p.add_argument("--synthetic", type=int, metavar="SEED",
                   help="use generated data instead of --in/--weather")
    if case:
        p.add_argument("--case", default="short", help="short|long (default short)")
        p.add_argument("--dump-matrix", metavar="PATH",
                       help="also write the design matrix as CSV")


def _add_model_args(p):
    p.add_argument("--model", required=True, help="linear|ridge|lasso|svr|tree")
    p.add_argument("--alpha", type=float)
    p.add_argument("--C", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--kernel")
    p.add_argument("--gamma", type=float)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--min-leaf", type=int)
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--features", metavar="FILE",
                   help="column names to use: JSON list or one name per line")


def _spec(args):
    params = {k: getattr(args, a) for k, a in
              [("alpha", "alpha"), ("C", "C"), ("epsilon", "epsilon"), ("kernel", "kernel"),
               ("gamma", "gamma"), ("max_depth", "max_depth"), ("min_leaf", "min_leaf")]
              if getattr(args, a) is not None}
    return ModelSpec(args.model, params)


def _records(args):
    if args.synthetic is not None:
        obs, weather = synthesize_dataset(SYNTH_START, SYNTH_END, args.synthetic)
    else:
        if not (args.tti and args.weather):
            raise SystemExit("need --in and --weather (or --synthetic SEED)")
        with open(args.tti, newline="") as fh:
            obs = parse_tti_csv(fh)
        with open(args.weather, newline="") as fh:
            weather = parse_weather_csv(fh)
    records, dropped = join_with_report(obs, weather)
    if dropped:
        log.warning("%d hourly readings had no weather day and were dropped", dropped)
    return records


def _matrix(args):
    matrix = assemble(_records(args), normalize_case(args.case))
    if getattr(args, "dump_matrix", None):
        with open(args.dump_matrix, "w") as fh:
            matrix.to_csv(fh)
    return matrix


def _read_features(path, names):
    with open(path) as fh:
        text = fh.read()
    try:
        wanted = json.loads(text)
    except json.JSONDecodeError:
        wanted = [line.strip() for line in text.splitlines() if line.strip()]
    if isinstance(wanted, dict):
        wanted = wanted["features"]
    missing = [w for w in wanted if w not in names]
    if missing:
        raise SystemExit(f"unknown feature name(s): {', '.join(missing)}")
    return [names.index(w) for w in wanted]


def _columns(args, matrix):
    if args.features is None:
        return list(range(matrix.shape[1]))
    return _read_features(args.features, list(matrix.names))


# ---------------------------------------------------------------------------
# commands

def cmd_synth(args):
    obs, weather = synthesize_dataset(args.start, args.end, args.seed)
    with open(args.out_tti, "w", newline="") as fh:
        write_tti_csv(obs, fh)
    with open(args.out_weather, "w", newline="") as fh:
        write_weather_csv(weather, fh)
    print(f"wrote {len(obs)} hourly readings and {len(weather)} weather days")


def cmd_describe(args):
    written = _describe.emit_report(_describe.describe_all(_records(args)), args.out)
    for path in written:
        print(path)


def cmd_select(args):
    matrix = _matrix(args)
    Z, _ = standardize(matrix.X)
    results = rfe_sweep(Z, matrix.y, _sizes(args.sizes))
    names = matrix.names
    report = {
        "case": matrix.case,
        "elimination_order": [names[i] for i in results[0].elimination_order],
        "subsets": {str(r.target_size): [names[i] for i in r.selected] for r in results},
    }
    _emit_json(report, args.out)


def cmd_evaluate(args):
    matrix = _matrix(args)
    score = repeated_sampled_cv(matrix, _spec(args), args.sample_size, args.repeats, args.k,
                                args.seed, args.degree, _columns(args, matrix))
    report = {
        "mean": score.mean,
        "repeats": [{"mean": s.mean, "per_fold": list(s.per_fold),
                     "sample_seed": s.sample_seed, "n_sampled": s.n_sampled}
                    for s in score.per_repeat],
    }
    _emit_json(report, None)


def cmd_grid(args):
    matrix = _matrix(args)
    overrides = {"case": matrix.case}
    if args.config:
        with open(args.config) as fh:
            config = _experiment.GridConfig.from_json(fh.read(), **overrides)
    else:
        config = _experiment.GridConfig(**overrides)
    started = time.perf_counter()

    def progress(done, total):
        log.info("block %d/%d (%.0f s)", done, total, time.perf_counter() - started)

    results = _experiment.run_grid(matrix, config, workers=args.workers, progress=progress)
    with open(args.out, "w", newline="") as fh:
        _experiment.write_results_csv(results, fh)
    for cell in results.skipped:
        log.debug("skipped %s %s size=%d degree=%d: %s", cell.family, cell.params,
                  cell.n_features, cell.degree, cell.reason)
    print(f"{len(results)} cells scored, {len(results.skipped)} skipped, "
          f"{time.perf_counter() - started:.1f} s")


def cmd_report(args):
    md = []
    rows_all = []
    for path in args.results:
        with open(path, newline="") as fh:
            results = _experiment.read_results_csv(fh)
        cases = sorted({r.case for r in results})
        for case in cases:
            rows = _experiment.best_per_model([r for r in results if r.case == case],
                                              families=sorted({r.family for r in results}))
            rows_all.append((case, rows))
            md.append(_experiment.summary_markdown(rows, title=case.replace("_", "-")))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["Case"] + list(_experiment.SUMMARY_HEADER))
            for case, rows in rows_all:
                for row in rows:
                    writer.writerow([case] + _experiment.summary_cells(row))
    text = "\n".join(md)
    if args.markdown:
        with open(args.markdown, "w") as fh:
            fh.write(text)
    print(text, end="")


def cmd_train(args):
    matrix = _matrix(args)
    cols = _columns(args, matrix)
    pipe = Pipeline(_spec(args), args.degree).fit(matrix.X[:, cols], matrix.y)
    doc = {"case": matrix.case, "features": [matrix.names[c] for c in cols],
           "pipeline": pipe.to_dict()}
    with open(args.model_out, "w") as fh:
        json.dump(doc, fh)
    fitted = pipe.predict(matrix.X[:, cols])
    print(f"trained {pipe.spec.family} on {matrix.shape[0]} rows, "
          f"{len(cols)} features; in-sample R2 {r2_score(matrix.y, fitted):.4f}")


def cmd_predict(args):
    with open(args.model) as fh:
        doc = json.load(fh)
    args.case = doc["case"]
    matrix = _matrix(args)
    names = list(matrix.names)
    cols = [names.index(n) for n in doc["features"]]
    pipe = Pipeline.from_dict(doc["pipeline"])
    pred = pipe.predict(matrix.X[:, cols])
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        out.write("timestamp,tti,predicted\n")
        for ts, y, f in zip(matrix.timestamps, matrix.y, pred):
            out.write(f"{ts.isoformat()},{float(y)!r},{float(f)!r}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    if np.ptp(matrix.y) > 0:
        print(f"R2 {r2_score(matrix.y, pred):.4f}", file=sys.stderr)


def _emit_json(doc, path):
    text = json.dumps(doc, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def build_parser():
    parser = argparse.ArgumentParser(prog="tti", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--start", type=_date, default=SYNTH_START)
    p.add_argument("--end", type=_date, default=SYNTH_END)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out-tti", default="tti.csv")
    p.add_argument("--out-weather", default="weather.csv")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("describe", help="write descriptive plot-data CSVs")
    _add_data_args(p, case=False)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("select", help="recursive feature elimination report")
    _add_data_args(p)
    p.add_argument("--sizes", default="1..24")
    p.add_argument("--out", help="JSON file (default: stdout)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("evaluate", help="repeated sampled cross-validation of one model")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--sample-size", type=int, default=1000)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grid", help="run the model grid for one case")
    _add_data_args(p)
    p.add_argument("--config", help="grid JSON (default: built-in grid)")
    p.add_argument("--out", default="results.csv")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("report", help="best cell per model from results CSVs")
    p.add_argument("results", nargs="+")
    p.add_argument("--csv", help="summary CSV path")
    p.add_argument("--markdown", help="summary Markdown path")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("train", help="fit one model on all rows and save it")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--model-out", default="model.json")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score data with a saved model")
    _add_data_args(p, case=False)
    p.add_argument("--model", required=True, help="model JSON from train")
    p.add_argument("--out", help="predictions CSV (default: stdout)")
    p.set_defaults(func=cmd_predict, dump_matrix=None)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except TtiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
