"""End-to-end training: normalize, partition, optionally optimize, grow."""
from __future__ import annotations

import time

import numpy as np

from fgrt.data import Dataset, normalize_apply, normalize_fit
from fgrt.errors import DegenerateFeatureError
from fgrt.partition_builder import SearchConfig, optimize_partition, quantile_partition
from fgrt.tree import FgrtModel, TreeConfig, grow_tree


def fit_model(
    dataset: Dataset,
    config: TreeConfig | None = None,
    *,
    optimize_partitions: bool = False,
    search: SearchConfig | None = None,
    n_terms: int = 3,
    seed: int | None = None,
) -> FgrtModel:
    """Train on every row of ``dataset``.

    Normalization statistics, quantiles and the partition search only ever
    see these rows, so calling this on a training fold keeps the test fold
    out of every fitted quantity.
    """
    config = config or TreeConfig()
    search = search or SearchConfig(parameters_per_feature=n_terms)
    start = time.perf_counter()
    stats = normalize_fit(dataset.X, dataset.feature_names)
    if not stats.kept:
        raise DegenerateFeatureError("every feature is constant on the training rows")
    Z = normalize_apply(stats, dataset.X)
    names = [dataset.feature_names[j] for j in stats.kept]
    partitions = []
    search_log = []
    for j, name in enumerate(names):
        part = quantile_partition(Z[:, j], n_terms, name)
        if optimize_partitions:
            res = optimize_partition(Z[:, j], dataset.y, search, initial=part,
                                     classes=np.arange(dataset.n_classes))
            part = res.partition
            search_log.append({"feature": name, "si_before": res.si_before, "si_after": res.si_after,
                               "evaluations": res.evaluations})
        partitions.append(part)
    partition_time = time.perf_counter() - start
    metadata = {
        "dataset": dataset.name,
        "n_train": dataset.n,
        "optimize_partitions": bool(optimize_partitions),
        "n_terms": n_terms,
        "warnings": list(stats.warnings),
    }
    if seed is not None:
        metadata["seed"] = seed
    if optimize_partitions:
        metadata["search"] = {"step_fractions": list(search.step_fractions), "max_cycles": search.max_cycles,
                              "features": search_log}
    model = grow_tree(
        Z, dataset.y, partitions, config,
        n_classes=dataset.n_classes, class_names=dataset.class_names, feature_names=dataset.feature_names,
        feature_indices=stats.kept, means=stats.mean, stds=stats.std, metadata=metadata,
    )
    model.metadata["timings"] = {"partitions": partition_time, "train": time.perf_counter() - start}
    return model
