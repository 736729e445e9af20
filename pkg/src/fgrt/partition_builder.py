"""Default quantile partitions, the interleaved increment encoding, the
separability index and the coordinate-descent partition search."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from fgrt.errors import (
    ConfigError,
    DegenerateEncodingError,
    DegenerateFeatureError,
    EncodingOrderError,
)
from fgrt.fuzzy_core import FeaturePartition, LinguisticTerm, Trapezoid, membership

A, B, C, D = range(4)

_NAMED_LABELS = {
    1: ["All"],
    2: ["Low", "High"],
    3: ["Low", "Medium", "High"],
    4: ["Low", "MediumLow", "MediumHigh", "High"],
    5: ["VeryLow", "Low", "Medium", "High", "VeryHigh"],
}


def term_labels(k: int) -> list[str]:
    if k < 1:
        raise ConfigError("a partition needs at least one term")
    return list(_NAMED_LABELS.get(k, [f"T{i + 1}" for i in range(k)]))


def quantile_partition(values, k: int = 3, feature_name: str = "x", labels=None) -> FeaturePartition:
    """Quantile-anchored partition of one feature.

    The ``k + 2`` quantiles ``Q0..Q(k+1)`` are taken at evenly spaced
    percentages (0/25/50/75/100 for three terms). The outer terms are
    shoulders, ``(Q0, Q0, Q1, Q2)`` and ``(Q(k-1), Qk, Q(k+1), Q(k+1))``, and
    middle term ``j`` is ``(Q(j-1), (Q(j-1)+Qj)/2, (Qj+Q(j+1))/2, Q(j+1))``.
    """
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0 or np.all(arr == arr[0]):
        raise DegenerateFeatureError(f"feature {feature_name!r} is constant; cannot partition it")
    if k < 2:
        raise ConfigError("quantile partitions need at least two terms")
    labels = list(labels) if labels is not None else term_labels(k)
    q = np.quantile(arr, np.linspace(0.0, 1.0, k + 2))
    shapes = [(q[0], q[0], q[1], q[2])]
    for j in range(1, k - 1):
        shapes.append((q[j], (q[j] + q[j + 1]) / 2, (q[j + 1] + q[j + 2]) / 2, q[j + 2]))
    shapes.append((q[k - 1], q[k], q[k + 1], q[k + 1]))
    terms = [LinguisticTerm(lab, Trapezoid(*map(float, s))) for lab, s in zip(labels, shapes)]
    return FeaturePartition(feature_name, tuple(terms), float(q[0]), float(q[-1]))


# ---------------------------------------------------------------------------
# interleaved encoding

def interleaved_order(k: int) -> list[tuple[int, int]]:
    """(term, parameter) positions in interleaved order.

    For three terms: a1 b1 c1 a2 d1 b2 c2 a3 d2 b3 c3 d3.
    """
    order = [(0, A), (0, B), (0, C)]
    for i in range(1, k):
        order += [(i, A), (i - 1, D), (i, B), (i, C)]
    order.append((k - 1, D))
    return order


def value_order(partition: FeaturePartition) -> list[tuple[int, int]]:
    """Order the partition's parameters by value, ties broken by interleaved position.

    Unlike the fixed interleaved order this one always admits the partition
    it was derived from, which matters for quantile partitions: their Low
    term ends (at Q2) after the Medium plateau begins.
    """
    p = partition.params()
    base = interleaved_order(len(partition))
    rank = {pos: r for r, pos in enumerate(base)}
    return sorted(base, key=lambda pos: (p[pos], rank[pos]))


@dataclass(frozen=True)
class EncodedPartition:
    increments: tuple[float, ...]
    domain_min: float
    domain_max: float
    feature_name: str = "x"
    labels: tuple[str, ...] = ("Low", "Medium", "High")
    order: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "increments", tuple(float(v) for v in self.increments))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.increments) != 4 * len(self.labels):
            raise ValueError(f"{len(self.labels)} terms need {4 * len(self.labels)} increments")
        if self.order is not None:
            object.__setattr__(self, "order", tuple(tuple(p) for p in self.order))

    @property
    def k(self) -> int:
        return len(self.labels)

    def resolved_order(self):
        return list(self.order) if self.order is not None else interleaved_order(self.k)


def _check_order(order, k):
    if sorted(order) != sorted(interleaved_order(k)):
        raise EncodingOrderError("order must list every (term, parameter) pair exactly once")
    pos = {p: i for i, p in enumerate(order)}
    for i in range(k):
        if not pos[(i, A)] < pos[(i, B)] < pos[(i, C)] < pos[(i, D)]:
            raise EncodingOrderError(f"order breaks a <= b <= c <= d for term {i}")
        if i + 1 < k and (pos[(i, A)] > pos[(i + 1, A)] or pos[(i, D)] > pos[(i + 1, D)]):
            raise EncodingOrderError(f"order breaks term ordering between terms {i} and {i + 1}")
    if order[0] != (0, A) or order[-1] != (k - 1, D):
        raise EncodingOrderError("order must start at the first term's a and end at the last term's d")


def _increments(params: np.ndarray, domain_min: float, order, clamp: bool, name: str) -> np.ndarray:
    seq = np.array([params[pos] for pos in order])
    inc = np.diff(seq, prepend=domain_min)
    if np.any(inc < 0):
        if not clamp:
            bad = int(np.flatnonzero(inc < 0)[0])
            raise EncodingOrderError(f"partition {name!r} violates the encoding order at position {bad}")
        inc = np.maximum(inc, 0.0)
    return inc


def encode(partition: FeaturePartition, order=None, clamp: bool = False) -> EncodedPartition:
    """Encode a partition as non-negative increments along ``order``.

    The first entry is the offset of the first parameter from
    ``domain_min``; each later entry is the gap to the previous parameter.
    With ``clamp=True`` negative gaps are projected to zero instead of
    raising ``EncodingOrderError``.
    """
    k = len(partition)
    order = list(order) if order is not None else interleaved_order(k)
    _check_order(order, k)
    params = partition.params()
    if params[0, A] != partition.domain_min or params[k - 1, D] != partition.domain_max:
        raise EncodingOrderError(f"partition {partition.feature_name!r} does not span its domain")
    inc = _increments(params, partition.domain_min, order, clamp, partition.feature_name)
    return EncodedPartition(
        tuple(inc), partition.domain_min, partition.domain_max, partition.feature_name,
        tuple(partition.labels), None if order == interleaved_order(k) else tuple(order),
    )


def accumulate(e: EncodedPartition) -> np.ndarray:
    """Cumulative breakpoints rescaled onto ``[domain_min, domain_max]``."""
    inc = np.asarray(e.increments, dtype=float)
    if np.any(inc < 0):
        raise ValueError("increments must be non-negative")
    acc = np.cumsum(inc)
    span = acc[-1] - acc[0]
    width = e.domain_max - e.domain_min
    if span <= 0 or width <= 0:
        raise DegenerateEncodingError("encoding spans a zero-width domain")
    out = e.domain_min + (acc - acc[0]) * (width / span) if span != width else e.domain_min + (acc - acc[0])
    # rounding can push interior points a hair past the domain edges
    out = np.clip(out, e.domain_min, e.domain_max)
    out[0], out[-1] = e.domain_min, e.domain_max
    return out


def decode(e: EncodedPartition) -> FeaturePartition:
    """Rebuild a valid partition from any non-negative increment vector.

    Edge terms are always shoulders (the first term's ``b`` sits on its
    ``a``, the last term's ``c`` on its ``d``), and where a zero overlap
    would leave the meeting point of two ramps uncovered the left term's
    plateau is extended to that point.
    """
    k = e.k
    order = e.resolved_order()
    _check_order(order, k)
    acc = accumulate(e)
    p = np.empty((k, 4))
    for value, pos in zip(acc, order):
        p[pos] = value
    p[0, B] = p[0, A]
    p[k - 1, C] = p[k - 1, D]
    for i in range(k - 1):
        t = p[i, D]
        if t == p[i + 1, A] and p[i, C] < t < p[i + 1, B]:
            if max(membership(Trapezoid(*row), t) for row in p) == 0:
                p[i, C] = t
    terms = [LinguisticTerm(lab, Trapezoid(*map(float, row))) for lab, row in zip(e.labels, p)]
    return FeaturePartition(e.feature_name, tuple(terms), e.domain_min, e.domain_max)


# ---------------------------------------------------------------------------
# separability index

@dataclass(frozen=True)
class SeparabilityScore:
    value: float
    per_term_per_class: np.ndarray


def _class_indicator(labels, classes=None):
    labels = np.asarray(labels)
    if classes is None:
        classes, codes = np.unique(labels, return_inverse=True)
    else:
        classes = np.asarray(classes)
        lookup = {c: i for i, c in enumerate(classes.tolist())}
        codes = np.array([lookup[v] for v in labels.tolist()], dtype=int)
    onehot = np.zeros((labels.size, len(classes)))
    onehot[np.arange(labels.size), codes] = 1.0
    return onehot


def _si_from_memberships(mu: np.ndarray, onehot: np.ndarray) -> SeparabilityScore:
    num = mu.T @ onehot
    den = mu.sum(axis=0)
    contrib = np.zeros_like(num)
    live = den > 0
    contrib[live] = num[live] ** 2 / den[live, None]
    return SeparabilityScore(float(contrib.sum()), contrib)


def separability_index(partition: FeaturePartition, values, labels, classes=None) -> SeparabilityScore:
    """Sum over terms and classes of (class membership mass)^2 / term mass.

    Terms that no sample activates contribute zero.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0 or values.shape != np.shape(labels):
        raise ValueError("values and labels must be non-empty and of equal length")
    return _si_from_memberships(partition.memberships(values), _class_indicator(labels, classes))


# ---------------------------------------------------------------------------
# coordinate-descent search

@dataclass(frozen=True)
class SearchConfig:
    step_fractions: tuple[float, ...] = (0.10, 0.05, 0.02)
    max_cycles: int = 10
    parameters_per_feature: int = 3

    def __post_init__(self):
        object.__setattr__(self, "step_fractions", tuple(float(s) for s in self.step_fractions))
        steps = self.step_fractions
        if not steps or any(not 0 < s < 1 for s in steps):
            raise ConfigError("step fractions must lie in (0, 1)")
        if any(b >= a for a, b in zip(steps, steps[1:])):
            raise ConfigError("step fractions must be strictly decreasing")
        if self.max_cycles < 1:
            raise ConfigError("max_cycles must be at least 1")
        if self.parameters_per_feature < 1:
            raise ConfigError("parameters_per_feature must be at least 1")

    @property
    def max_evaluations(self) -> int:
        return self.parameters_per_feature * 2 * self.max_cycles * len(self.step_fractions)


@dataclass
class OptimizationResult:
    partition: FeaturePartition
    initial: FeaturePartition
    si_before: float
    si_after: float
    evaluations: int
    cycles: int
    converged: bool


class _Warp:
    """Regenerates a partition from its control points.

    Controls are the end of the first term's plateau, the centre of every
    middle plateau (moved rigidly) and the start of the last term's plateau.
    Every other parameter keeps its relative position between the two
    neighbouring knots it had in the initial partition.
    """

    def __init__(self, initial: FeaturePartition):
        self.initial = initial
        self.k = k = len(initial)
        self.lo, self.hi = initial.domain_min, initial.domain_max
        p = initial.params()
        self.half = np.array([(p[j, C] - p[j, B]) / 2 for j in range(1, k - 1)])
        self.controls = np.array([p[0, C]] + [(p[j, B] + p[j, C]) / 2 for j in range(1, k - 1)]
                                 + [p[k - 1, B]])
        knots = self.knots(self.controls)
        if np.any(np.diff(knots) < -1e-9 * (self.hi - self.lo)):
            raise EncodingOrderError(
                f"plateaus of partition {initial.feature_name!r} overlap; cannot search it"
            )
        self.anchor_knot = {(0, C): 1, (k - 1, B): len(knots) - 2}
        for j in range(1, k - 1):
            self.anchor_knot[(j, B)] = 2 * j
            self.anchor_knot[(j, C)] = 2 * j + 1
        self.placement = {}
        for i in range(k):
            for q in range(4):
                if (i, q) in self.anchor_knot:
                    continue
                v = p[i, q]
                for s in range(len(knots) - 1):
                    if knots[s] <= v <= knots[s + 1] and knots[s] < knots[s + 1]:
                        self.placement[(i, q)] = (s, (v - knots[s]) / (knots[s + 1] - knots[s]))
                        break
        self.order = value_order(initial)

    def knots(self, controls) -> np.ndarray:
        inner = [controls[0]]
        for j in range(1, self.k - 1):
            inner += [controls[j] - self.half[j - 1], controls[j] + self.half[j - 1]]
        inner.append(controls[-1])
        # touching plateaus can come back an ulp out of order
        return np.maximum.accumulate(np.array([self.lo] + inner + [self.hi]))

    def bounds(self, controls, j):
        """Feasible interval for control ``j`` with the others held fixed."""
        knots = self.knots(controls)
        if self.k == 2:
            first, last = 1 + j, 1 + j
        elif j == 0:
            first = last = 1
        elif j == self.k - 1:
            first = last = len(knots) - 2
        else:
            first, last = 2 * j, 2 * j + 1
        own = controls[j]
        return (knots[first - 1] + (own - knots[first]), knots[last + 1] - (knots[last] - own))

    def build(self, controls) -> FeaturePartition:
        knots = self.knots(controls)
        p = np.empty((self.k, 4))
        for pos, idx in self.anchor_knot.items():
            p[pos] = knots[idx]
        for pos, (s, frac) in self.placement.items():
            p[pos] = knots[s] + frac * (knots[s + 1] - knots[s])
        p = np.clip(p, self.lo, self.hi)
        inc = _increments(p, self.lo, self.order, True, self.initial.feature_name)
        return decode(EncodedPartition(inc, self.lo, self.hi, self.initial.feature_name,
                                       tuple(self.initial.labels), tuple(self.order)))


def optimize_partition(values, labels, config: SearchConfig | None = None,
                       initial: FeaturePartition | None = None, classes=None) -> OptimizationResult:
    """Cyclic ± coordinate search on the control points, maximising the separability index.

    Step sizes shrink through ``config.step_fractions`` (as fractions of the
    domain width); at each size, cycles repeat until one brings no
    improvement or ``max_cycles`` is hit. Probes pushing a control past a
    neighbour are clamped to the neighbour; probes that end up not moving are
    not evaluated.
    """
    config = config or SearchConfig()
    values = np.asarray(values, dtype=float)
    if initial is None:
        initial = quantile_partition(values, config.parameters_per_feature)
    if len(initial) != config.parameters_per_feature:
        raise ConfigError(
            f"parameters_per_feature={config.parameters_per_feature} but partition has {len(initial)} terms"
        )
    onehot = _class_indicator(labels, classes)

    def score(part):
        return _si_from_memberships(part.memberships(values), onehot).value

    si_before = best = score(initial)
    best_part = initial
    if len(initial) < 2 or initial.domain_max <= initial.domain_min:
        return OptimizationResult(initial, initial, si_before, si_before, 0, 0, True)
    warp = _Warp(initial)
    controls = warp.controls.copy()
    width = initial.domain_max - initial.domain_min
    evaluations = cycles = 0
    converged = False
    for step in config.step_fractions:
        delta = step * width
        converged = False
        for _ in range(config.max_cycles):
            cycles += 1
            improved = False
            for j in range(len(controls)):
                lower, upper = warp.bounds(controls, j)
                for sign in (1.0, -1.0):
                    moved = min(max(controls[j] + sign * delta, lower), upper)
                    if moved == controls[j]:
                        continue
                    candidate = controls.copy()
                    candidate[j] = moved
                    part = warp.build(candidate)
                    evaluations += 1
                    s = score(part)
                    if s > best + 1e-12 * abs(best):
                        best, best_part, controls = s, part, candidate
                        improved = True
                        break
            if not improved:
                converged = True
                break
    return OptimizationResult(best_part, initial, si_before, best, evaluations, cycles, converged)


# ---------------------------------------------------------------------------
# dump format

DUMP_HEADER = ["feature", "term", "a", "b", "c", "d", "si_before", "si_after", "evaluations"]


def dump_partitions(results: Iterable[OptimizationResult | FeaturePartition], stream=None) -> str:
    """Write the per-term partition table (CSV with header); returns the text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DUMP_HEADER)
    for res in results:
        if isinstance(res, FeaturePartition):
            part, before, after, evals = res, "", "", ""
        else:
            part, before, after, evals = res.partition, repr(res.si_before), repr(res.si_after), res.evaluations
        for term in part.terms:
            writer.writerow([part.feature_name, term.label, *map(repr, map(float, term.shape.params)),
                             before, after, evals])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def partitions_for(X, feature_names: Sequence[str], k: int = 3) -> list[FeaturePartition]:
    X = np.asarray(X, dtype=float)
    return [quantile_partition(X[:, j], k, name) for j, name in enumerate(feature_names)]
