"""Command-line interface: fit, predict, evaluate, sweep, optimize-partitions.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal error.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from fgrt import __version__
from fgrt.data import load_inputs, normalize_apply, normalize_fit, resolve_dataset
from fgrt.errors import ConfigError, DataError, FgrtError
from fgrt.evaluation import (
    SWEEP_AXES,
    cross_validate,
    report_text,
    sweep,
    write_manifest,
    write_timings,
)
from fgrt.inference import classify_batch, write_predictions
from fgrt.model_io import load_model, save_model
from fgrt.partition_builder import SearchConfig, dump_partitions, optimize_partition, quantile_partition
from fgrt.pipeline import fit_model
from fgrt.tree import AGGREGATIONS, PRIORITIES, TreeConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

_TREE_DEFAULTS = TreeConfig()
_SEARCH_DEFAULTS = SearchConfig()


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_data(p, required=True):
    p.add_argument("--data", required=required,
                   help="CSV file with a header row, or bundled:<name> (wine, australian, pima, ring, saheart, spambase)")
    p.add_argument("--label-column", default=None,
                   help="label column name or index (default: last column, or the manifest's choice)")
    p.add_argument("--manifest", default=None, help="optional JSON manifest naming label_column and class_names")


def _add_tree(p):
    d = _TREE_DEFAULTS
    g = p.add_argument_group("tree")
    g.add_argument("--max-rules", type=int, default=d.max_rules, help="maximum number of rules (leaves)")
    g.add_argument("--max-depth", type=int, default=d.max_depth, help="maximum conditions per rule")
    g.add_argument("--min-gain-theta", type=float, default=d.min_gain_theta,
                   help="an expansion needs impurity gain above this")
    g.add_argument("--coverage-threshold", type=float, default=d.coverage_threshold,
                   help="nodes holding less than this share of the root membership mass stay leaves")
    g.add_argument("--firing-threshold", type=float, default=d.firing_threshold,
                   help="below this best firing strength, inference falls back to ancestor distributions")
    g.add_argument("--tnorm", choices=["product", "minimum"], default=d.tnorm.value, help="fuzzy AND")
    g.add_argument("--aggregation", choices=AGGREGATIONS, default=d.aggregation,
                   help="combine rule scores per class by max or sum")
    g.add_argument("--priority", choices=PRIORITIES, default=d.priority,
                   help="rank expansions by coverage-weighted gain or by raw gain")


def _add_search(p):
    d = _SEARCH_DEFAULTS
    g = p.add_argument_group("partitions")
    g.add_argument("--terms", type=int, default=d.parameters_per_feature, help="linguistic terms per feature")
    g.add_argument("--optimize-partitions", action="store_true", default=False,
                   help="tune partitions for class separability before growing the tree")
    g.add_argument("--step-fractions", type=_floats, default=d.step_fractions,
                   help="search step sizes as fractions of the feature range, comma-separated")
    g.add_argument("--max-cycles", type=int, default=d.max_cycles, help="search cycles per step size")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="random seed for fold assignment")
    p.add_argument("--config", default=None,
                   help="JSON file of option values (keys as in --help, with underscores); explicit flags win")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="fgrt", description="Fuzzy greedy rule trees.", formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"fgrt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("fit", help="train on a dataset, write the model and print the rulebase", formatter_class=fmt)
    _add_data(p)
    p.add_argument("--model", required=True, help="where to write the model (JSON)")
    _add_tree(p)
    _add_search(p)
    _add_common(p)

    p = sub.add_parser("predict", help="classify rows with a saved model", formatter_class=fmt)
    p.add_argument("--model", required=True, help="model file written by fit")
    p.add_argument("--data", required=True, help="CSV with the model's feature columns (label column optional)")
    p.add_argument("--label-column", default=None, help="label column, if any, used to report accuracy")
    p.add_argument("--output", default=None, help="prediction CSV path (default: standard output)")
    p.add_argument("--explain", action="store_true", default=False, help="add explanation lines after each row")
    p.add_argument("--config", default=None, help="JSON file of option values; explicit flags win")

    p = sub.add_parser("evaluate", help="stratified k-fold cross-validation", formatter_class=fmt)
    _add_data(p)
    p.add_argument("--folds", type=int, default=5, help="number of folds")
    p.add_argument("--output", default=None, help="report CSV path (default: standard output)")
    p.add_argument("--timings", default=None, help="optional CSV of per-fold wall times")
    p.add_argument("--run-manifest", default=None,
                   help="run manifest path (default: <output>.manifest.json when --output is given)")
    p.add_argument("--threads", type=int, default=1, help="folds run in parallel on this many threads")
    _add_tree(p)
    _add_search(p)
    _add_common(p)

    p = sub.add_parser("sweep", help="cross-validate over hyperparameter values", formatter_class=fmt)
    _add_data(p)
    p.add_argument("--max-rules-values", type=_ints, default=None, help="e.g. 5,10,15")
    p.add_argument("--coverage-values", type=_floats, default=None, help="e.g. 0,0.05,0.1")
    p.add_argument("--theta-values", type=_floats, default=None, help="e.g. 0,0.01,0.05")
    p.add_argument("--max-depth-values", type=_ints, default=None, help="e.g. 2,3,5")
    p.add_argument("--grid", action="store_true", default=False,
                   help="Cartesian product of the axes instead of one axis at a time")
    p.add_argument("--folds", type=int, default=5, help="number of folds")
    p.add_argument("--output", default=None, help="report CSV path (default: standard output)")
    p.add_argument("--timings", default=None, help="optional CSV of per-fold wall times")
    p.add_argument("--run-manifest", default=None,
                   help="run manifest path (default: <output>.manifest.json when --output is given)")
    p.add_argument("--threads", type=int, default=1, help="sweep cells run in parallel on this many threads")
    _add_tree(p)
    _add_search(p)
    _add_common(p)

    p = sub.add_parser("optimize-partitions", help="print default and tuned partitions without growing a tree",
                       formatter_class=fmt)
    _add_data(p)
    p.add_argument("--output", default=None, help="partition table path (default: standard output)")
    _add_search(p)
    p.set_defaults(optimize_partitions=True)
    p.add_argument("--config", default=None, help="JSON file of option values; explicit flags win")
    return parser


def _subparser(parser, command):
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                overrides = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config} is not valid JSON: {exc}") from None
        if not isinstance(overrides, dict):
            raise ConfigError("config file must hold a JSON object")
        sub = _subparser(parser, args.command)
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigError(f"unknown keys in config file: {unknown}")
        for key in ("step_fractions",):
            if isinstance(overrides.get(key), list):
                overrides[key] = tuple(overrides[key])
        # config values replace defaults; flags given on the command line still win
        sub.set_defaults(**overrides)
        args = parser.parse_args(argv)
    return args


def _tree_config(args) -> TreeConfig:
    return TreeConfig(
        max_rules=args.max_rules, max_depth=args.max_depth, min_gain_theta=args.min_gain_theta,
        coverage_threshold=args.coverage_threshold, firing_threshold=args.firing_threshold,
        tnorm=args.tnorm, aggregation=args.aggregation, priority=args.priority,
    )


def _search_config(args) -> SearchConfig:
    return SearchConfig(step_fractions=args.step_fractions, max_cycles=args.max_cycles,
                        parameters_per_feature=args.terms)


def _write_or_print(text: str, path, out):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        out.write(text)


def _cmd_fit(args, out, err):
    config, search = _tree_config(args), _search_config(args)
    ds = resolve_dataset(args.data, args.label_column, args.manifest)
    model = fit_model(ds, config, optimize_partitions=args.optimize_partitions, search=search,
                      n_terms=args.terms, seed=args.seed)
    save_model(model, args.model)
    for w in model.metadata.get("warnings", []):
        err.write(f"warning: {w}\n")
    preds = np.array([p.predicted_class for p in classify_batch(model, ds.X)])
    prior = np.bincount(ds.y, minlength=ds.n_classes).max() / ds.n
    out.write(model.rulebase_text() + "\n")
    out.write(f"rules: {model.num_rules}  conditions/rule: {model.conditions_per_rule:.2f}\n")
    out.write(f"training accuracy: {np.mean(preds == ds.y):.4f}  (majority-class prior: {prior:.4f})\n")
    return EXIT_OK


def _cmd_predict(args, out, err):
    model = load_model(args.model)
    X, raw_labels = load_inputs(args.data, model.feature_names, args.label_column)
    text = write_predictions(model, X, explain=args.explain)
    _write_or_print(text, args.output, out)
    if raw_labels is not None and set(raw_labels) <= set(model.class_names):
        truth = np.array([model.class_names.index(lab) for lab in raw_labels])
        preds = np.array([p.predicted_class for p in classify_batch(model, X)])
        err.write(f"accuracy: {np.mean(preds == truth):.4f} on {len(truth)} rows\n")
    return EXIT_OK


def _manifest_path(args):
    if args.run_manifest:
        return args.run_manifest
    return f"{args.output}.manifest.json" if args.output else None


def _emit_reports(args, reports, command, config, search, out):
    _write_or_print(report_text(reports), args.output, out)
    if args.timings:
        write_timings(reports, args.timings)
    manifest = _manifest_path(args)
    if manifest:
        write_manifest(manifest, command=command, seed=args.seed, config=config, extra={
            "data": args.data,
            "folds": args.folds,
            "optimize_partitions": bool(args.optimize_partitions),
            "search": {"step_fractions": list(search.step_fractions), "max_cycles": search.max_cycles,
                       "terms": search.parameters_per_feature},
        })


def _cmd_evaluate(args, out, err):
    config, search = _tree_config(args), _search_config(args)
    ds = resolve_dataset(args.data, args.label_column, args.manifest)
    report = cross_validate(ds, config, args.optimize_partitions, args.seed, k=args.folds, search=search,
                            n_terms=args.terms, threads=args.threads)
    _emit_reports(args, [report], "evaluate", config, search, out)
    err.write(f"{ds.name}: mean accuracy {report.mean_accuracy:.4f} over {args.folds} folds; "
              f"rules {report.num_rules:.2f}, conditions/rule {report.conditions_per_rule:.2f}\n")
    return EXIT_OK


def _cmd_sweep(args, out, err):
    config, search = _tree_config(args), _search_config(args)
    axes = {}
    for flag, name in (("max_rules_values", "max_rules"), ("coverage_values", "coverage_threshold"),
                       ("theta_values", "min_gain_theta"), ("max_depth_values", "max_depth")):
        values = getattr(args, flag)
        if values:
            axes[name] = list(values)
    if not axes:
        raise UsageError("sweep needs at least one of --max-rules-values, --coverage-values, "
                         "--theta-values, --max-depth-values")
    assert set(axes) <= set(SWEEP_AXES)
    ds = resolve_dataset(args.data, args.label_column, args.manifest)
    reports = sweep(ds, axes, args.seed, base=config, grid=args.grid, optimize_partitions=args.optimize_partitions,
                    k=args.folds, search=search, threads=args.threads)
    _emit_reports(args, reports, "sweep", config, search, out)
    for r in reports:
        err.write(f"{r.cell}: mean accuracy {r.mean_accuracy:.4f}\n")
    return EXIT_OK


def _cmd_optimize(args, out, err):
    search = _search_config(args)
    ds = resolve_dataset(args.data, args.label_column, args.manifest)
    stats = normalize_fit(ds.X, ds.feature_names)
    for w in stats.warnings:
        err.write(f"warning: {w}\n")
    Z = normalize_apply(stats, ds.X)
    results = []
    for j, col in enumerate(stats.kept):
        initial = quantile_partition(Z[:, j], args.terms, ds.feature_names[col])
        results.append(optimize_partition(Z[:, j], ds.y, search, initial=initial, classes=np.arange(ds.n_classes)))
    _write_or_print(dump_partitions(results), args.output, out)
    return EXIT_OK


_COMMANDS = {
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "optimize-partitions": _cmd_optimize,
}


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = parse_args(argv)
        return _COMMANDS[args.command](args, out, err)
    except UsageError as exc:
        err.write(f"{exc}\n")
        return EXIT_USAGE
    except ConfigError as exc:
        err.write(f"configuration error: {exc}\n")
        return EXIT_USAGE
    except DataError as exc:
        err.write(f"data error: {exc}\n")
        return EXIT_DATA
    except FgrtError as exc:
        err.write(f"internal error: {exc}\n")
        return EXIT_INTERNAL
    except OSError as exc:
        err.write(f"data error: {exc}\n")
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - any other failure is a broken invariant
        err.write(f"internal error: {type(exc).__name__}: {exc}\n")
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
