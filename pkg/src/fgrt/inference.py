"""Classification and explanations with a trained model."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from fgrt.errors import ArityMismatchError
from fgrt.fuzzy_core import conjoin
from fgrt.tree import FgrtModel, FuzzyRule


@dataclass(frozen=True)
class Prediction:
    predicted_class: int
    class_scores: tuple[float, ...]
    fired_rules: tuple[tuple[int, float], ...]
    fallback_used: bool
    winning_rule: int | None = None


def normalized_inputs(model: FgrtModel, X_raw) -> np.ndarray:
    X = np.asarray(X_raw, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != len(model.feature_names):
        raise ArityMismatchError(
            f"model expects {len(model.feature_names)} features, got {X.shape[-1] if X.ndim else 0}"
        )
    return (X[:, model.feature_indices] - np.asarray(model.means)) / np.asarray(model.stds)


def _firing(model: FgrtModel, Z: np.ndarray, rules: list[FuzzyRule]) -> np.ndarray:
    term_mu = [p.memberships(Z[:, j]) for j, p in enumerate(model.partitions)]
    out = np.empty((Z.shape[0], len(rules)))
    for r, rule in enumerate(rules):
        mu = np.ones(Z.shape[0])
        for feat, term in model.condition_indices(rule):
            mu = conjoin(mu, term_mu[feat][:, term], model.config.tnorm)
        out[:, r] = mu
    return out


def firing_strengths(model: FgrtModel, X_raw) -> np.ndarray:
    """(n, n_rules) firing strength of every rule on raw inputs."""
    return _firing(model, normalized_inputs(model, X_raw), model.rules)


def classify_batch(model: FgrtModel, X_raw) -> list[Prediction]:
    Z = normalized_inputs(model, X_raw)
    fire = _firing(model, Z, model.rules)
    fallback_fire = _firing(model, Z, model.fallback_nodes) if model.fallback_nodes else None
    conf = np.array([r.confidence for r in model.rules]).reshape(len(model.rules), model.n_classes)
    threshold = model.config.firing_threshold
    depths = np.array([len(r) for r in model.fallback_nodes])
    preds = []
    for i in range(Z.shape[0]):
        f = fire[i]
        order = sorted((r for r in range(f.size) if f[r] > 0), key=lambda r: -f[r])
        fired = tuple((r, float(f[r])) for r in order)
        if f.size and f.max() >= threshold:
            contrib = f[:, None] * conf
            scores = contrib.max(axis=0) if model.config.aggregation == "max" else contrib.sum(axis=0)
            cls = int(np.argmax(scores))
            winner = int(np.argmax(contrib[:, cls]))
            preds.append(Prediction(cls, tuple(float(s) for s in scores), fired, False, winner))
            continue
        dist = np.asarray(model.default_distribution)
        if fallback_fire is not None:
            ok = np.flatnonzero(fallback_fire[i] >= threshold)
            if ok.size:
                # deepest qualifying ancestor, then strongest, then first listed
                best = min(ok, key=lambda j: (-depths[j], -fallback_fire[i, j], j))
                dist = np.asarray(model.fallback_nodes[best].confidence)
        preds.append(Prediction(int(np.argmax(dist)), tuple(float(s) for s in dist), fired, True, None))
    return preds


def classify(model: FgrtModel, x_raw) -> Prediction:
    x = np.asarray(x_raw, dtype=float)
    if x.ndim != 1:
        raise ArityMismatchError("classify takes a single feature vector")
    return classify_batch(model, x)[0]


def predict(model: FgrtModel, X_raw) -> np.ndarray:
    return np.array([p.predicted_class for p in classify_batch(model, X_raw)], dtype=int)


def _explain_lines(model: FgrtModel, pred: Prediction) -> list[str]:
    names = model.class_names or None
    label = names[pred.predicted_class] if names else pred.predicted_class
    lines = [f"prediction: class={label}" + (" (fallback)" if pred.fallback_used else "")]
    for r, strength in pred.fired_rules:
        lines.append(f"  [{strength:.3f}] {model.rules[r].format(names)}")
    if pred.fallback_used:
        dist = ", ".join(f"{s:.3f}" for s in pred.class_scores)
        lines.append(f"  fallback to prior: no rule fired above {model.config.firing_threshold:g}; "
                     f"class distribution [{dist}]")
    return lines


def explain(model: FgrtModel, x_raw) -> str:
    """Fired rules, strongest first, plus a fallback note when no rule fired strongly enough."""
    return "\n".join(_explain_lines(model, classify(model, x_raw)))


def write_predictions(model: FgrtModel, X_raw, stream=None, explain: bool = False) -> str:
    """One CSV row per sample: predicted class, per-class scores, winning rule, fallback flag.

    With ``explain`` each row is followed by ``#``-prefixed explanation lines.
    """
    preds = classify_batch(model, X_raw)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row", "predicted_class"] + [f"score_{c}" for c in model.class_names]
                    + ["winning_rule", "fallback"])
    for i, p in enumerate(preds):
        writer.writerow([i, model.class_names[p.predicted_class], *map(repr, p.class_scores),
                         -1 if p.winning_rule is None else p.winning_rule, int(p.fallback_used)])
        if explain:
            for line in _explain_lines(model, p):
                buf.write(f"# {line}\n")
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text
