import csv
import io
import json

import numpy as np
import pytest

from fgrt.data import load_bundled, normalize_fit, stratified_kfold
from fgrt.errors import ConfigError
from fgrt.evaluation import (
    REPORT_HEADER,
    cross_validate,
    loglog_slope,
    make_gaussian_mixture,
    report_text,
    runtime_scaling,
    sweep,
    sweep_cells,
    write_manifest,
    write_timing_table,
    write_timings,
)
from fgrt.inference import predict
from fgrt.partition_builder import quantile_partition
from fgrt.pipeline import fit_model
from fgrt.tree import TreeConfig


@pytest.fixture(scope="module")
def wine_like():
    # centres about 5.7 sigma apart
    return make_gaussian_mixture(178, 13, 3, separation=4.0, seed=0, name="wine_like")


def test_separated_gaussians_score_above_ninety(wine_like):
    assert cross_validate(wine_like, seed=0).mean_accuracy > 0.90


def test_permuted_labels_score_near_chance(wine_like):
    y = np.random.default_rng(0).permutation(wine_like.y)
    acc = cross_validate(wine_like.with_labels(y), seed=0).mean_accuracy
    assert abs(acc - 1 / 3) <= 0.10


def test_report_quantities_recount(wine_like):
    cfg = TreeConfig(max_rules=7)
    report = cross_validate(wine_like, cfg, seed=3)
    plan = stratified_kfold(wine_like.y, 5, 3)
    for f, (tr, te) in zip(report.folds, plan.splits()):
        model = fit_model(wine_like.subset(tr), cfg, seed=3)
        assert f.correct == int(np.sum(predict(model, wine_like.X[te]) == wine_like.y[te]))
        assert f.accuracy == f.correct / te.size
        assert f.num_rules <= 7
    assert report.rulebase_size == pytest.approx(report.num_rules * report.conditions_per_rule)


def test_no_test_fold_leakage():
    ds = load_bundled("saheart")
    tr, te = next(stratified_kfold(ds.y, 5, 0).splits())
    model = fit_model(ds.subset(tr), optimize_partitions=True)
    stats = normalize_fit(ds.X[tr])
    assert model.means == list(stats.mean) and model.stds == list(stats.std)
    Z = (ds.X[tr][:, model.feature_indices] - np.asarray(stats.mean)) / np.asarray(stats.std)
    for j, part in enumerate(model.partitions):
        q = quantile_partition(Z[:, j], 3, part.feature_name)
        assert (part.domain_min, part.domain_max) == (q.domain_min, q.domain_max)
    # perturbing test rows leaves the fold model untouched
    X2 = ds.X.copy()
    X2[te] *= 50
    other = fit_model(ds.__class__(ds.feature_names, X2, ds.y, ds.class_names).subset(tr), optimize_partitions=True)
    assert other.rules == model.rules


def test_threads_match_sequential(wine_like):
    a = cross_validate(wine_like, seed=1)
    b = cross_validate(wine_like, seed=1, threads=3)
    assert a.folds == b.folds


def test_sweep_cells():
    assert len(sweep_cells({"max_rules": [5, 10, 15]})) == 3
    assert len(sweep_cells({"max_rules": [5, 10], "coverage_threshold": [0, 0.1]}, grid=True)) == 4
    assert len(sweep_cells({"max_rules": [5, 10], "coverage_threshold": [0, 0.1]})) == 4
    for bad in [{"coverage_threshold": [0.5, 1.5]}, {"tnorm": ["product"]}, {"max_rules": []}]:
        with pytest.raises(ConfigError):
            sweep_cells(bad)


def test_sweep_rows_and_report_format(wine_like):
    reports = sweep(wine_like, {"max_rules": [5, 10, 15]}, seed=0, k=3)
    assert [r.cell for r in reports] == [{"max_rules": 5}, {"max_rules": 10}, {"max_rules": 15}]
    text = report_text(reports)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == REPORT_HEADER
    means = [r for r in rows[1:] if r[REPORT_HEADER.index("fold")] == "mean"]
    assert len(means) == 3 and len(rows) == 1 + 3 * 4
    assert text == report_text(list(reversed(reports)))
    for r in reports:
        assert max(f.num_rules for f in r.folds) <= r.config.max_rules


def test_timings_and_manifest_files(wine_like, tmp_path):
    report = cross_validate(wine_like, seed=0, k=3)
    write_timings([report], tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "dataset,cell,fold,train_seconds,predict_seconds" and len(lines) == 4
    write_manifest(tmp_path / "m.json", command="evaluate", seed=0, config=TreeConfig())
    m = json.loads((tmp_path / "m.json").read_text())
    assert m["format_version"] == "1" and m["config"]["max_rules"] == 15


def test_runtime_scaling_trivial():
    rows = runtime_scaling([10], [2], repeats=1)
    assert rows[0].n == 10 and rows[0].seconds > 0
    assert write_timing_table(rows).splitlines()[0] == "n,m,seconds"


def test_loglog_slope():
    n = np.array([1e2, 1e3, 1e4])
    assert loglog_slope(n, 3e-6 * n) == pytest.approx(1.0)
    assert loglog_slope(n, n ** 2) == pytest.approx(2.0)
