"""Command-line interface: ``train``, ``sweep``, ``diagnose`` and ``predict``.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numerical
degeneracy.
"""

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, build_run_config, read_config_file
from .convergence import (
    DiagnosticsReport,
    distance_l1,
    distance_l2,
    iteration_diagnostics,
    summarize_detail,
)
from .convergence.trace import fmt, jsonable
from .dataio import Dataset, load_csv, one_hot, read_table, split
from .ensemble import TrainedEnsemble, accuracy, first_below, make_map, stacked_output, train
from .exceptions import DataError, NumericalDegeneracyError
from .plotting import plot_sweep, plot_trace

log = logging.getLogger("ncelm")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
SWEEP_THRESHOLD = 1e-6


def _label_column(text):
    if text is None:
        return None
    try:
        return int(text)
    except ValueError:
        return text


def _add_run_options(p):
    p.add_argument("--config", help="flat TOML file with run and model settings")
    p.add_argument("--data", dest="dataset", help="labelled CSV dataset")
    p.add_argument("--label-column", help="label column name or zero-based index (default: last)")
    p.add_argument("--test-fraction", type=float)
    p.add_argument("--output-dir", "-o")
    p.add_argument("--no-trace", action="store_true", help="skip trace CSV/JSON output")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    p.add_argument("--lambda", dest="lam", type=float, help="diversity strength")
    p.add_argument("--C", type=float, help="inverse ridge strength")
    p.add_argument("--hidden", type=int, help="hidden nodes per learner")
    p.add_argument("--learners", type=int, help="number of base learners")
    p.add_argument("--iterations", type=int, help="maximum fixed-point iterations")
    p.add_argument("--seed", type=int)
    p.add_argument("--tolerance", type=float, help="stop when squared L2 step <= this")
    p.add_argument("--activation", choices=("sigmoid", "tanh"))


def make_parser():
    parser = argparse.ArgumentParser(
        prog="ncelm", description="Negative correlation ELM ensembles and convergence diagnostics")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one ensemble and write model, trace and figure")
    _add_run_options(p)

    p = sub.add_parser("sweep", help="train once per lambda and compare convergence")
    _add_run_options(p)
    p.add_argument("--lambdas", type=float, nargs="*", required=True, metavar="LAMBDA")

    p = sub.add_parser("diagnose", help="apply the update map to a stored model")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--label-column")
    p.add_argument("--split", action="store_true",
                   help="re-apply the model's recorded train/test split and use the train part")

    p = sub.add_parser("predict", help="predict labels for a CSV")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--label-column",
                   help="column holding true labels; it is dropped and accuracy is reported")
    p.add_argument("--output", help="write labels here instead of stdout")
    return parser


def run_config_from_args(args):
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {
        "dataset": args.dataset,
        "label_column": _label_column(args.label_column),
        "test_fraction": args.test_fraction,
        "output_dir": args.output_dir,
        "lambda": args.lam,
        "C": args.C,
        "hidden": args.hidden,
        "learners": args.learners,
        "iterations": args.iterations,
        "seed": args.seed,
        "tolerance": args.tolerance,
        "activation": args.activation,
    }
    if args.no_trace:
        overrides["emit_trace"] = False
    return build_run_config(file_values, overrides)


def _prepare(run):
    data = load_csv(run.dataset_path, run.label_column)
    train_set, test_set = split(data, run.test_fraction, run.ncelm.seed)
    out = Path(run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return train_set, test_set, out


def cmd_train(run, plot=True):
    train_set, test_set, out = _prepare(run)
    model = train(train_set, run.ncelm)
    model.extra["split"] = {"test_fraction": run.test_fraction, "seed": run.ncelm.seed}
    model.save(out / "model.json")
    if run.emit_trace:
        model.trace.write_csv(out / "trace.csv")
        model.trace.write_json(out / "trace.json")
        if plot:
            plot_trace(model.trace, out / "trace.png")
    report = model.report()
    acc = accuracy(model, test_set)
    print(f"accuracy={acc:.6f} iterations={len(model.trace)} "
          f"final_d={fmt(report.final_distance)} converged={str(report.converged).lower()}")
    return EXIT_OK


def cmd_lambda_sweep(run, lambdas, plot=True):
    if not lambdas:
        raise ConfigError("sweep needs at least one lambda value")
    train_set, test_set, out = _prepare(run)
    curves = {}
    rows = []
    for lam in lambdas:
        cfg = replace(run.ncelm, lam=float(lam))
        model = train(train_set, cfg, diagnostics=run.emit_trace)
        r = model.trace.column("r")
        d1 = model.trace.column("d_l1")
        curves[lam] = (r, d1)
        rows.extend((lam, ri, di) for ri, di in zip(r, d1))
        if run.emit_trace:
            model.trace.write_csv(out / f"trace_lambda_{lam:g}.csv")
        hit = first_below(d1, SWEEP_THRESHOLD)
        print(f"lambda={lam:g} first_below_{SWEEP_THRESHOLD:g}={hit if hit else 'none'} "
              f"accuracy={accuracy(model, test_set):.6f}")
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "r", "d_l1"])
        for lam, r, d in rows:
            w.writerow([repr(float(lam)), r, fmt(d)])
    if plot:
        plot_sweep(curves, out / "sweep.png")
    return EXIT_OK


def _aligned_dataset(model, path, label_column):
    header, X, labels = read_table(path, -1 if label_column is None else label_column)
    if X.shape[1] != model.n_features:
        raise DataError(
            f"feature count mismatch: model K={model.n_features}, dataset K={X.shape[1]}")
    J_data = len(set(labels))
    if J_data != model.n_classes:
        raise DataError(
            f"class count mismatch: model J={model.n_classes}, dataset J={J_data}")
    Y, labels_ = one_hot(labels, model.class_labels)
    return Dataset(X, Y, labels_, Path(path).stem)


def diagnose_model(model, data):
    """One and two map applications from the stored weights, with bound quantities.

    With ``B`` the stored weights, ``U = T(B)`` is solved at ``F(B)`` and
    ``V = T(T(B))`` at ``F(T(B))``; the delta norms and eta compare these.
    """
    cfg = model.config
    state = model.state_for(data.features)
    T = make_map(state, data.targets, cfg)
    B = model.betas
    TB = T(B)
    TTB = T(TB)
    d_total, per = distance_l2(B, TB)
    d_next, _ = distance_l2(TB, TTB)
    H = state.hidden_outputs
    F_B, F_TB, F_TTB = (stacked_output(H, b) for b in (B, TB, TTB))
    detail = iteration_diagnostics(H, F_B, F_TB, F_TTB, cfg.C, cfg.lam)
    delta_V, lbp, etas, applicable = summarize_detail(detail)
    delta_U = max(c.delta_U_norm for c in detail[0])
    ratio = d_next / d_total if d_total > 0 else None
    within = cfg.lam < lbp
    report = DiagnosticsReport(
        converged=d_total <= cfg.tolerance,
        final_distance=d_total,
        max_contraction_ratio=ratio,
        lambda_within_bound_at=1 if within else None,
        summary_text=(f"d(B, T(B))={d_total:.6g}; lambda={cfg.lam:g} "
                      f"{'<' if within else '>='} lambda_bound'={lbp:.6g}"))
    return jsonable({
        "d_l2": d_total,
        "d_l1": distance_l1(B, TB),
        "per_learner_d": per,
        "eta": etas,
        "delta_U_norm": delta_U,
        "delta_V_norm": delta_V,
        "lambda": cfg.lam,
        "lambda_bound_prime": lbp,
        "lambda_below_bound": within,
        "bound_applicable": applicable,
        "report": report.to_dict(),
    })


def cmd_diagnose(model_path, dataset_path, label_column=None, use_split=False):
    model = TrainedEnsemble.load(model_path)
    data = _aligned_dataset(model, dataset_path, label_column)
    if use_split:
        info = model.extra.get("split")
        if not info:
            raise DataError(f"{model_path}: model records no split")
        data, _ = split(data, float(info["test_fraction"]), int(info["seed"]))
    print(json.dumps(diagnose_model(model, data), indent=1))
    return EXIT_OK


def cmd_predict(model_path, dataset_path, label_column=None, output=None):
    model = TrainedEnsemble.load(model_path)
    _, X, labels = read_table(dataset_path, label_column)
    pred = model.predict(X)
    text = "\n".join(pred) + "\n"
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if labels is not None:
        acc = float(np.mean([p == t for p, t in zip(pred, labels)]))
        print(f"accuracy={acc:.6f}", file=sys.stderr)
    return EXIT_OK


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "train":
            return cmd_train(run_config_from_args(args), plot=not args.no_plot)
        if args.command == "sweep":
            return cmd_lambda_sweep(run_config_from_args(args), args.lambdas,
                                    plot=not args.no_plot)
        if args.command == "diagnose":
            return cmd_diagnose(args.model, args.data, _label_column(args.label_column),
                                args.split)
        if args.command == "predict":
            return cmd_predict(args.model, args.data, _label_column(args.label_column),
                               args.output)
    except ConfigError as exc:
        print(f"ncelm: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"ncelm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalDegeneracyError as exc:
        print(f"ncelm: numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    parser.error(f"unknown command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
