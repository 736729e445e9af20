"""JSON model files.

Floats are written with ``repr`` precision so a saved model reloads to
bit-identical parameters. Keys are sorted and timings are left out, which
makes the file a deterministic function of the training inputs.
"""
from __future__ import annotations

import json
from pathlib import Path

from fgrt.errors import ModelFormatError
from fgrt.fuzzy_core import FeaturePartition, LinguisticTerm, Trapezoid
from fgrt.tree import FgrtModel, FuzzyRule, TreeConfig

FORMAT_VERSION = "1"


def _rule_to_dict(rule: FuzzyRule) -> dict:
    return {
        "conditions": [[f, t] for f, t in rule.conditions],
        "predicted_class": rule.predicted_class,
        "confidence": list(rule.confidence),
        "support": rule.support,
    }


def _rule_from_dict(d: dict) -> FuzzyRule:
    return FuzzyRule(tuple((str(f), str(t)) for f, t in d["conditions"]), int(d["predicted_class"]),
                     tuple(float(v) for v in d["confidence"]), float(d["support"]))


def model_to_dict(model: FgrtModel) -> dict:
    meta = {k: v for k, v in model.metadata.items() if k != "timings"}
    return {
        "format_version": FORMAT_VERSION,
        "feature_names": list(model.feature_names),
        "class_names": list(model.class_names),
        "partitions": [
            {
                "feature": p.feature_name,
                "input_column": col,
                "domain": [p.domain_min, p.domain_max],
                "terms": [{"label": t.label, "abcd": list(t.shape.params)} for t in p.terms],
            }
            for p, col in zip(model.partitions, model.feature_indices)
        ],
        "normalization": {"mean": list(model.means), "std": list(model.stds)},
        "rules": [_rule_to_dict(r) for r in model.rules],
        "fallback_nodes": [_rule_to_dict(r) for r in model.fallback_nodes],
        "default_distribution": list(model.default_distribution),
        "config": model.config.to_dict(),
        "metadata": meta,
    }


def model_from_dict(d: dict) -> FgrtModel:
    if not isinstance(d, dict) or d.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format_version {d.get('format_version') if isinstance(d, dict) else None!r}")
    try:
        partitions = [
            FeaturePartition(
                p["feature"],
                tuple(LinguisticTerm(t["label"], Trapezoid(*map(float, t["abcd"]))) for t in p["terms"]),
                float(p["domain"][0]), float(p["domain"][1]),
            )
            for p in d["partitions"]
        ]
        model = FgrtModel(
            feature_names=list(d["feature_names"]),
            feature_indices=[int(p["input_column"]) for p in d["partitions"]],
            partitions=partitions,
            means=[float(v) for v in d["normalization"]["mean"]],
            stds=[float(v) for v in d["normalization"]["std"]],
            class_names=list(d["class_names"]),
            rules=[_rule_from_dict(r) for r in d["rules"]],
            fallback_nodes=[_rule_from_dict(r) for r in d.get("fallback_nodes", [])],
            default_distribution=tuple(float(v) for v in d["default_distribution"]),
            config=TreeConfig.from_dict(d["config"]),
            metadata=dict(d.get("metadata", {})),
        )
        for rule in model.rules + model.fallback_nodes:
            model.condition_indices(rule)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from None
    return model


def dumps(model: FgrtModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, indent=2) + "\n"


def loads(text: str) -> FgrtModel:
    try:
        return model_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None


def save_model(model: FgrtModel, path) -> None:
    Path(path).write_text(dumps(model))


def load_model(path) -> FgrtModel:
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise ModelFormatError(f"model file not found: {path}") from None
    return loads(text)
