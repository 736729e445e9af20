"""Greedy fuzzy rule-tree induction.

The tree is grown best-first: every open node contributes its candidate
conditions (unused feature, term) to one global heap, and each iteration
applies the single best expansion. A candidate qualifies when its fuzzy
Gini gain exceeds theta. By default the heap ranks qualifying candidates
by gain times the node's share of the root mass, so that a large gain on a
sliver of the data does not outrank a broad split elsewhere; ``priority=
"gain"`` ranks by raw gain instead. Leaves become the rulebase; internal
nodes are kept only as inference fallbacks.
"""
from __future__ import annotations

import heapq
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from fgrt.errors import ConfigError, DegenerateFeatureError, EmptyDataError
from fgrt.fuzzy_core import FeaturePartition, TNorm, membership_matrix

PURITY_TOLERANCE = 1e-6
AGGREGATIONS = ("max", "sum")
PRIORITIES = ("weighted", "gain")


@dataclass(frozen=True)
class TreeConfig:
    max_rules: int = 15
    max_depth: int = 5
    min_gain_theta: float = 0.01
    coverage_threshold: float = 0.05
    firing_threshold: float = 0.05
    tnorm: TNorm = TNorm.PRODUCT
    aggregation: str = "max"
    priority: str = "weighted"

    def __post_init__(self):
        try:
            object.__setattr__(self, "tnorm", TNorm(self.tnorm))
        except ValueError:
            raise ConfigError(f"unknown t-norm {self.tnorm!r}") from None
        if int(self.max_rules) != self.max_rules or self.max_rules < 1:
            raise ConfigError("max_rules must be an integer >= 1")
        if int(self.max_depth) != self.max_depth or self.max_depth < 1:
            raise ConfigError("max_depth must be an integer >= 1")
        if not self.min_gain_theta >= 0:
            raise ConfigError("min_gain_theta must be >= 0")
        for name in ("coverage_threshold", "firing_threshold"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"aggregation must be one of {AGGREGATIONS}")
        if self.priority not in PRIORITIES:
            raise ConfigError(f"priority must be one of {PRIORITIES}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tnorm"] = self.tnorm.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TreeConfig":
        return cls(**d)


def _class_masses(memberships: np.ndarray, onehot: np.ndarray) -> np.ndarray:
    return memberships @ onehot if memberships.ndim == 1 else memberships.T @ onehot


def _gini_from_masses(class_mass: np.ndarray) -> float | None:
    total = class_mass.sum()
    if total <= 0:
        return None
    p = class_mass / total
    return float(1.0 - np.sum(p * p))


def _onehot(labels, n_classes=None) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    n_classes = int(labels.max()) + 1 if n_classes is None else n_classes
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def fuzzy_gini(memberships, labels, n_classes=None) -> float | None:
    """Membership-weighted Gini impurity; ``None`` marks a dead node (zero total membership)."""
    mu = np.asarray(memberships, dtype=float)
    if mu.shape != np.shape(labels):
        raise ValueError("memberships and labels must have equal length")
    if mu.size == 0:
        return None
    return _gini_from_masses(_class_masses(mu, _onehot(labels, n_classes)))


def impurity_gain(parent_memberships, child_memberships, labels, n_classes=None) -> float:
    """Gini(parent) - Gini(child); ``-inf`` when either rule covers nothing."""
    parent = fuzzy_gini(parent_memberships, labels, n_classes)
    child = fuzzy_gini(child_memberships, labels, n_classes)
    if parent is None or child is None:
        return float("-inf")
    return parent - child


@dataclass(eq=False)
class TreeNode:
    node_id: int
    conditions: tuple[tuple[int, int], ...]
    memberships: np.ndarray
    class_distribution: np.ndarray
    gini: float | None
    mass: float
    parent: "TreeNode | None" = None
    children: list["TreeNode"] = field(default_factory=list)
    expandable: bool = False

    @property
    def depth(self) -> int:
        return len(self.conditions)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def used_features(self) -> set[int]:
        return {f for f, _ in self.conditions}


@dataclass(frozen=True)
class FuzzyRule:
    conditions: tuple[tuple[str, str], ...]
    predicted_class: int
    confidence: tuple[float, ...]
    support: float

    def __len__(self):
        return len(self.conditions)

    def format(self, class_names: Sequence[str] | None = None) -> str:
        lhs = " AND ".join(f"{feat} IS {term}" for feat, term in self.conditions) or "TRUE"
        cls = class_names[self.predicted_class] if class_names else self.predicted_class
        conf = self.confidence[self.predicted_class]
        return f"IF {lhs} THEN class={cls} (confidence={conf:.3f}, support={self.support:.2f})"


@dataclass
class FgrtModel:
    """A trained rulebase plus everything needed to apply it to raw inputs.

    ``feature_indices[j]`` is the raw input column that ``partitions[j]``
    describes; ``means``/``stds`` are aligned with ``partitions``.
    ``metadata["timings"]`` is kept in memory only and never serialized.
    """

    feature_names: list[str]
    feature_indices: list[int]
    partitions: list[FeaturePartition]
    means: list[float]
    stds: list[float]
    class_names: list[str]
    rules: list[FuzzyRule]
    fallback_nodes: list[FuzzyRule]
    default_distribution: tuple[float, ...]
    config: TreeConfig
    metadata: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return len(self.default_distribution)

    @property
    def num_rules(self) -> int:
        return len(self.rules)

    @property
    def conditions_per_rule(self) -> float:
        return float(np.mean([len(r) for r in self.rules])) if self.rules else 0.0

    def condition_indices(self, rule: FuzzyRule) -> list[tuple[int, int]]:
        lookup = {p.feature_name: j for j, p in enumerate(self.partitions)}
        return [(lookup[f], self.partitions[lookup[f]].term_index(t)) for f, t in rule.conditions]

    def rulebase_text(self) -> str:
        names = self.class_names or None
        return "\n".join(r.format(names) for r in self.rules)


def _distribution(class_mass: np.ndarray) -> np.ndarray:
    total = class_mass.sum()
    return class_mass / total if total > 0 else np.zeros_like(class_mass)


def _to_rule(node: TreeNode, partitions: Sequence[FeaturePartition]) -> FuzzyRule:
    conds = tuple((partitions[f].feature_name, partitions[f].terms[t].label) for f, t in node.conditions)
    dist = node.class_distribution
    return FuzzyRule(conds, int(np.argmax(dist)), tuple(float(v) for v in dist), float(node.mass))


def build_tree(data, labels, partitions: Sequence[FeaturePartition], config: TreeConfig | None = None,
               n_classes: int | None = None) -> TreeNode:
    """Run the best-first induction and return the root node."""
    config = config or TreeConfig()
    X = np.asarray(data, dtype=float)
    y = np.asarray(labels, dtype=int)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataError("cannot grow a tree on empty data")
    if y.shape != (X.shape[0],):
        raise ValueError("labels must have one entry per row")
    if not partitions:
        raise DegenerateFeatureError("no usable features: every feature is degenerate")
    if len(partitions) != X.shape[1]:
        raise ValueError(f"{len(partitions)} partitions for {X.shape[1]} feature columns")
    onehot = _onehot(y, n_classes)
    # Samples are visited grouped by class so each class is one column slice
    # and class masses are plain row sums. A BLAS product can round identical
    # rows differently, which would hide exact gain ties between candidates.
    perm = np.argsort(y, kind="stable")
    X, y, onehot = X[perm], y[perm], onehot[perm]
    bounds = np.searchsorted(y, np.arange(onehot.shape[1] + 1))
    slices = [slice(int(s), int(e)) for s, e in zip(bounds[:-1], bounds[1:])]

    def class_mass_rows(weighted):
        return np.stack([weighted[:, sl].sum(axis=1) for sl in slices], axis=1)

    # the t-norm applied elementwise; identical to conjoin() but without per-call dispatch
    tnorm = np.multiply if config.tnorm is TNorm.PRODUCT else np.minimum
    theta = config.min_gain_theta

    cand_feature = np.concatenate([np.full(len(p), j) for j, p in enumerate(partitions)])
    feature_of = cand_feature.tolist()
    term_of = np.concatenate([np.arange(len(p)) for p in partitions]).tolist()
    col_start = np.cumsum([0] + [len(p) for p in partitions]).tolist()
    lo = np.array([p.domain_min for p in partitions])
    hi = np.array([p.domain_max for p in partitions])
    # row col holds the membership of every sample in candidate term col
    term_mu = np.ascontiguousarray(membership_matrix(np.concatenate([p.params() for p in partitions]),
                                                     np.clip(X, lo, hi)[:, cand_feature]).T)

    nodes: list[TreeNode] = []

    def make_node(parent, conditions, mu, mass_by_class):
        node = TreeNode(len(nodes), conditions, mu, _distribution(mass_by_class),
                        _gini_from_masses(mass_by_class), float(mass_by_class.sum()), parent)
        nodes.append(node)
        return node

    root_mu = np.ones(X.shape[0])
    root = make_node(None, (), root_mu, root_mu @ onehot)
    root_mass = root.mass
    heap: list = []
    # Each opened node keeps its qualifying candidates pre-sorted; only its
    # current best sits in the global heap. Merging sorted streams this way
    # pops in exactly the order one heap holding every candidate would.
    pending: dict[int, tuple[list, list, np.ndarray]] = {}

    def push_next(node: TreeNode, i: int):
        prio, cols, _ = pending[node.node_id]
        if i < len(prio):
            col = cols[i]
            # ties: lower feature, lower term, then the deeper (existing child) node
            heapq.heappush(heap, (prio[i], feature_of[col], term_of[col], -node.depth, node.node_id, i))

    def open_node(node: TreeNode):
        if node.depth >= config.max_depth or node.gini is None or node.depth >= len(partitions):
            return
        if node.mass / root_mass < config.coverage_threshold:
            return
        if node.class_distribution.max() >= 1.0 - PURITY_TOLERANCE:
            return
        node.expandable = True
        # every term is scored; those of features already on the path are then struck out
        class_mass = class_mass_rows(tnorm(node.memberships, term_mu))
        p = class_mass / class_mass.sum(axis=1)[:, None]
        gains = node.gini - (1.0 - np.einsum("ij,ij->i", p, p))
        for f, _ in node.conditions:
            gains[col_start[f]:col_start[f + 1]] = np.nan
        # nan (dead child or used feature) never passes the test
        ok = np.flatnonzero(gains > theta)
        if not ok.size:
            return
        weight = node.mass / root_mass if config.priority == "weighted" else 1.0
        prio = gains[ok] * -weight
        # ok is ascending in (feature, term), so a stable sort keeps that tie order
        order = np.argsort(prio, kind="stable")
        sel = ok[order]
        pending[node.node_id] = (prio[order].tolist(), sel.tolist(), class_mass[sel])
        push_next(node, 0)

    grown = {frozenset()}
    n_rules = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        open_node(root)
        while heap and n_rules < config.max_rules:
            _, feat, term, _, node_id, i = heapq.heappop(heap)
            parent = nodes[node_id]
            push_next(parent, i + 1)
            key = frozenset(parent.conditions + ((feat, term),))
            # the same conjunction reached along another path would be a duplicate rule
            if key in grown:
                continue
            grown.add(key)
            _, cols, masses = pending[node_id]
            mu = tnorm(parent.memberships, term_mu[cols[i]])
            # deepening a non-root leaf swaps one rule for another
            if not (parent.is_leaf and parent is not root):
                n_rules += 1
            child = make_node(parent, parent.conditions + ((feat, term),), mu, masses[i])
            parent.children.append(child)
            open_node(child)
    inverse = np.empty_like(perm)
    inverse[perm] = np.arange(perm.size)
    for node in nodes:
        node.memberships = node.memberships[inverse]
    return root


def grow_tree(
    data,
    labels,
    partitions: Sequence[FeaturePartition],
    config: TreeConfig | None = None,
    *,
    n_classes: int | None = None,
    class_names: Sequence[str] | None = None,
    feature_names: Sequence[str] | None = None,
    feature_indices: Sequence[int] | None = None,
    means: Sequence[float] | None = None,
    stds: Sequence[float] | None = None,
    metadata: dict | None = None,
) -> FgrtModel:
    """Grow a fuzzy rule tree on already-normalized data.

    ``data`` is (n, m) with column ``j`` described by ``partitions[j]``;
    ``labels`` are dense class ids. The normalization and naming keyword
    arguments are only carried into the returned model.
    """
    config = config or TreeConfig()
    if n_classes is None:
        n_classes = len(class_names) if class_names is not None else int(np.max(labels)) + 1
    root = build_tree(data, labels, partitions, config, n_classes)
    nodes = sorted(iter_nodes(root), key=lambda nd: nd.node_id)
    leaves = [nd for nd in nodes if nd.is_leaf and nd is not root]
    internal = [nd for nd in nodes if not nd.is_leaf and nd is not root]
    names = list(feature_names) if feature_names is not None else [p.feature_name for p in partitions]
    return FgrtModel(
        feature_names=names,
        feature_indices=list(feature_indices) if feature_indices is not None else list(range(len(partitions))),
        partitions=list(partitions),
        means=[float(v) for v in means] if means is not None else [0.0] * len(partitions),
        stds=[float(v) for v in stds] if stds is not None else [1.0] * len(partitions),
        class_names=list(class_names) if class_names is not None else [str(c) for c in range(n_classes)],
        rules=[_to_rule(nd, partitions) for nd in leaves],
        fallback_nodes=[_to_rule(nd, partitions) for nd in internal],
        default_distribution=tuple(float(v) for v in root.class_distribution),
        config=config,
        metadata=dict(metadata or {}),
    )


def iter_nodes(root: TreeNode):
    yield root
    for child in root.children:
        yield from iter_nodes(child)
