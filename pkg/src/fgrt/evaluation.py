"""Cross-validation, hyperparameter sweeps, runtime scaling and report files."""
from __future__ import annotations

import csv
import io
import itertools
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from fgrt.data import Dataset, normalize_apply, normalize_fit, stratified_kfold
from fgrt.errors import ConfigError
from fgrt.inference import predict
from fgrt.partition_builder import SearchConfig, partitions_for
from fgrt.pipeline import fit_model
from fgrt.tree import TreeConfig, grow_tree

REPORT_FORMAT_VERSION = "1"


@dataclass(frozen=True)
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    correct: int
    num_rules: int
    conditions_per_rule: float
    train_seconds: float = field(default=0.0, compare=False)
    predict_seconds: float = field(default=0.0, compare=False)

    @property
    def accuracy(self) -> float:
        return self.correct / self.n_test

    @property
    def rulebase_size(self) -> float:
        return self.num_rules * self.conditions_per_rule


@dataclass
class EvalReport:
    """Per-fold results plus fold-averaged complexity metrics.

    ``rulebase_size`` multiplies the mean rule count by the mean rule length,
    so it can differ slightly from the mean of per-fold products.
    """

    dataset: str
    config: TreeConfig
    optimize_partitions: bool
    seed: int
    folds: list[FoldResult]
    cell: dict = field(default_factory=dict)

    @property
    def fold_accuracies(self) -> list[float]:
        return [f.accuracy for f in self.folds]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def num_rules(self) -> float:
        return float(np.mean([f.num_rules for f in self.folds]))

    @property
    def conditions_per_rule(self) -> float:
        return float(np.mean([f.conditions_per_rule for f in self.folds]))

    @property
    def rulebase_size(self) -> float:
        return self.num_rules * self.conditions_per_rule

    @property
    def train_seconds(self) -> float:
        return float(np.mean([f.train_seconds for f in self.folds]))

    @property
    def predict_seconds(self) -> float:
        return float(np.mean([f.predict_seconds for f in self.folds]))


def _run_fold(dataset, fold, train_idx, test_idx, config, optimize_partitions, search, n_terms, seed):
    train = dataset.subset(train_idx)
    test = dataset.subset(test_idx)
    start = time.perf_counter()
    model = fit_model(train, config, optimize_partitions=optimize_partitions, search=search,
                      n_terms=n_terms, seed=seed)
    train_seconds = time.perf_counter() - start
    start = time.perf_counter()
    pred = predict(model, test.X)
    predict_seconds = time.perf_counter() - start
    return FoldResult(fold, train.n, test.n, int(np.sum(pred == test.y)), model.num_rules,
                      model.conditions_per_rule, train_seconds, predict_seconds)


def cross_validate(
    dataset: Dataset,
    config: TreeConfig | None = None,
    optimize_partitions: bool = False,
    seed: int = 0,
    *,
    k: int = 5,
    search: SearchConfig | None = None,
    n_terms: int = 3,
    threads: int = 1,
) -> EvalReport:
    """Stratified k-fold evaluation; every fitted quantity sees only the training fold."""
    config = config or TreeConfig()
    plan = stratified_kfold(dataset.y, k, seed)
    jobs = [(dataset, fold, tr, te, config, optimize_partitions, search, n_terms, seed)
            for fold, (tr, te) in enumerate(plan.splits())]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            folds = list(pool.map(lambda job: _run_fold(*job), jobs))
    else:
        folds = [_run_fold(*job) for job in jobs]
    return EvalReport(dataset.name, config, optimize_partitions, seed, folds)


SWEEP_AXES = ("max_rules", "coverage_threshold", "min_gain_theta", "max_depth", "firing_threshold")


def sweep_cells(axes: Mapping[str, Sequence], base: TreeConfig | None = None, grid: bool = False) -> list[dict]:
    """Expand sweep axes into cells, validating every resulting config up front.

    Per-axis mode varies one axis at a time around ``base``; grid mode takes
    the Cartesian product.
    """
    base = base or TreeConfig()
    for name in axes:
        if name not in SWEEP_AXES:
            raise ConfigError(f"cannot sweep {name!r}; choose from {SWEEP_AXES}")
        if not len(axes[name]):
            raise ConfigError(f"sweep axis {name!r} has no values")
    if grid:
        names = sorted(axes)
        cells = [dict(zip(names, combo)) for combo in itertools.product(*(axes[n] for n in names))]
    else:
        cells = [{name: value} for name in sorted(axes) for value in axes[name]]
    for cell in cells:
        replace(base, **cell)
    return cells


def sweep(
    dataset: Dataset,
    axes: Mapping[str, Sequence],
    seed: int = 0,
    *,
    base: TreeConfig | None = None,
    grid: bool = False,
    optimize_partitions: bool = False,
    k: int = 5,
    search: SearchConfig | None = None,
    threads: int = 1,
) -> list[EvalReport]:
    base = base or TreeConfig()
    cells = sweep_cells(axes, base, grid)

    def run(cell):
        report = cross_validate(dataset, replace(base, **cell), optimize_partitions, seed, k=k, search=search)
        report.cell = dict(cell)
        return report

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, cells))
    return [run(cell) for cell in cells]


# ---------------------------------------------------------------------------
# synthetic data and runtime scaling

def make_gaussian_mixture(n: int, m: int, n_classes: int = 2, separation: float = 1.0,
                          seed: int = 0, name: str = "gaussian") -> Dataset:
    """Class-conditional isotropic Gaussians with unit variance.

    Class means are drawn on a sphere of radius ``separation`` so any two
    centres are about ``separation * sqrt(2)`` apart.
    """
    rng = np.random.default_rng(seed)
    centres = rng.normal(size=(n_classes, m))
    centres *= separation / np.linalg.norm(centres, axis=1, keepdims=True)
    y = np.arange(n) % n_classes
    rng.shuffle(y)
    X = centres[y] + rng.normal(size=(n, m))
    return Dataset(tuple(f"x{j}" for j in range(m)), X, y, tuple(str(c) for c in range(n_classes)), name)


def time_grow_tree(dataset: Dataset, config: TreeConfig | None = None, n_terms: int = 3, repeats: int = 3) -> float:
    """Best-of-``repeats`` wall time of tree growth on pre-built quantile partitions."""
    stats = normalize_fit(dataset.X)
    Z = normalize_apply(stats, dataset.X)
    parts = partitions_for(Z, [dataset.feature_names[j] for j in stats.kept], n_terms)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        grow_tree(Z, dataset.y, parts, config, n_classes=dataset.n_classes)
        best = min(best, time.perf_counter() - start)
    return best


@dataclass(frozen=True)
class TimingRow:
    n: int
    m: int
    seconds: float


def runtime_scaling(n_grid: Sequence[int], m_grid: Sequence[int], generator_seed: int = 0,
                    config: TreeConfig | None = None, n_terms: int = 3, repeats: int = 3) -> list[TimingRow]:
    rows = []
    for n in n_grid:
        for m in m_grid:
            ds = make_gaussian_mixture(n, m, seed=generator_seed)
            rows.append(TimingRow(n, m, time_grow_tree(ds, config, n_terms, repeats)))
    return rows


def loglog_slope(x: Sequence[float], t: Sequence[float]) -> float:
    """Least-squares slope of log(t) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(t, float)), 1)[0])


def write_timing_table(rows: Sequence[TimingRow], stream=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "m", "seconds"])
    for r in rows:
        writer.writerow([r.n, r.m, f"{r.seconds:.6f}"])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


# ---------------------------------------------------------------------------
# report files

REPORT_HEADER = [
    "dataset", "cell", "max_rules", "max_depth", "min_gain_theta", "coverage_threshold",
    "firing_threshold", "tnorm", "aggregation", "priority", "optimize_partitions", "seed",
    "fold", "n_train", "n_test", "correct", "accuracy", "num_rules", "conditions_per_rule", "rulebase_size",
]
TIMING_HEADER = ["dataset", "cell", "fold", "train_seconds", "predict_seconds"]


def cell_key(report: EvalReport) -> str:
    return ";".join(f"{k}={report.cell[k]!r}" for k in sorted(report.cell)) or "base"


def _ordered(reports):
    # reports are assembled in a fixed order whatever order the workers finished in
    return sorted(reports, key=lambda r: (r.dataset, cell_key(r)))


def report_rows(reports: Sequence[EvalReport]) -> list[list]:
    rows = []
    for r in _ordered(reports):
        c = r.config
        prefix = [r.dataset, cell_key(r), c.max_rules, c.max_depth, repr(c.min_gain_theta),
                  repr(c.coverage_threshold), repr(c.firing_threshold), c.tnorm.value, c.aggregation,
                  c.priority, int(r.optimize_partitions), r.seed]
        for f in r.folds:
            rows.append(prefix + [f.fold, f.n_train, f.n_test, f.correct, f"{f.accuracy:.6f}", f.num_rules,
                                  f"{f.conditions_per_rule:.6f}", f"{f.rulebase_size:.6f}"])
        n_test = sum(f.n_test for f in r.folds)
        rows.append(prefix + ["mean", f"{np.mean([f.n_train for f in r.folds]):.1f}", n_test,
                              sum(f.correct for f in r.folds), f"{r.mean_accuracy:.6f}", f"{r.num_rules:.6f}",
                              f"{r.conditions_per_rule:.6f}", f"{r.rulebase_size:.6f}"])
    return rows


def report_text(reports: Sequence[EvalReport]) -> str:
    """Deterministic results table: one row per fold plus one ``mean`` row per cell."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    writer.writerows(report_rows(reports))
    return buf.getvalue()


def write_report(reports: Sequence[EvalReport], path) -> None:
    Path(path).write_text(report_text(reports))


def write_timings(reports: Sequence[EvalReport], path) -> None:
    """Wall times live in their own file so the main report stays reproducible byte for byte."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TIMING_HEADER)
    for r in _ordered(reports):
        for f in r.folds:
            writer.writerow([r.dataset, cell_key(r), f.fold, f"{f.train_seconds:.6f}", f"{f.predict_seconds:.6f}"])
    Path(path).write_text(buf.getvalue())


def write_manifest(path, *, command: str, seed: int, config: TreeConfig, extra: dict | None = None) -> None:
    manifest = {
        "format_version": REPORT_FORMAT_VERSION,
        "command": command,
        "seed": seed,
        "config": config.to_dict(),
    }
    manifest.update(extra or {})
    Path(path).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
