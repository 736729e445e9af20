"""Trapezoidal linguistic terms, partitions and conjunction semantics."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from fgrt.errors import MalformedRuleError


class TNorm(str, Enum):
    PRODUCT = "product"
    MINIMUM = "minimum"


@dataclass(frozen=True)
class Trapezoid:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not (self.a <= self.b <= self.c <= self.d):
            raise ValueError(f"trapezoid requires a <= b <= c <= d, got {self.params}")

    @property
    def params(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    def __call__(self, x):
        return membership(self, x)


def membership(t: Trapezoid, x):
    """Membership degree of ``x`` (scalar or array) in trapezoid ``t``.

    Flat ramps (``a == b`` or ``c == d``) behave as crisp shoulders: the
    plateau extends to the ramp position and the value drops to 0 right
    outside it.
    """
    arr = np.asarray(x, dtype=float)
    out = np.zeros(arr.shape)
    if t.b > t.a:
        rising = (arr >= t.a) & (arr < t.b)
        out[rising] = (arr[rising] - t.a) / (t.b - t.a)
    out[(arr >= t.b) & (arr <= t.c)] = 1.0
    if t.d > t.c:
        falling = (arr > t.c) & (arr <= t.d)
        out[falling] = (t.d - arr[falling]) / (t.d - t.c)
    if out.ndim == 0:
        return float(out)
    return out


def membership_matrix(params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Memberships of ``x[:, j]`` in trapezoid ``params[j]`` for every column at once.

    Gives bit-for-bit the same values as calling ``membership`` per column.
    """
    x = np.asarray(x, dtype=float)
    a, b, c, d = (params[:, i] for i in range(4))
    out = np.zeros(x.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        rise = (x - a) / (b - a)
        fall = (d - x) / (d - c)
    np.copyto(out, rise, where=(b > a) & (x >= a) & (x < b))
    out[(x >= b) & (x <= c)] = 1.0
    np.copyto(out, fall, where=(d > c) & (x > c) & (x <= d))
    return out


def conjoin(mu1, mu2, tnorm: TNorm | str = TNorm.PRODUCT):
    """Fuzzy AND of two membership degrees (scalars or arrays)."""
    tnorm = TNorm(tnorm)
    if tnorm is TNorm.PRODUCT:
        return mu1 * mu2
    return np.minimum(mu1, mu2)


@dataclass(frozen=True)
class LinguisticTerm:
    label: str
    shape: Trapezoid

    def __post_init__(self):
        if not self.label:
            raise ValueError("linguistic term label must be non-empty")


@dataclass(frozen=True)
class FeaturePartition:
    feature_name: str
    terms: tuple[LinguisticTerm, ...]
    domain_min: float
    domain_max: float

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("a partition needs at least one term")
        labels = [t.label for t in self.terms]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate term labels in partition {self.feature_name!r}: {labels}")
        if not self.domain_min <= self.domain_max:
            raise ValueError("domain_min must not exceed domain_max")

    def __len__(self):
        return len(self.terms)

    @property
    def labels(self) -> list[str]:
        return [t.label for t in self.terms]

    def term_index(self, label: str) -> int:
        for i, term in enumerate(self.terms):
            if term.label == label:
                return i
        raise MalformedRuleError(f"feature {self.feature_name!r} has no term {label!r}")

    def params(self) -> np.ndarray:
        """(k, 4) array of trapezoid parameters."""
        return np.array([t.shape.params for t in self.terms], dtype=float)

    def memberships(self, x) -> np.ndarray:
        """Membership of each value in every term, shape ``x.shape + (k,)``.

        Values outside ``[domain_min, domain_max]`` are clipped to the domain
        first, so unseen extremes take the edge term's shoulder value.
        """
        arr = np.clip(np.asarray(x, dtype=float), self.domain_min, self.domain_max)
        return np.stack([membership(t.shape, arr) for t in self.terms], axis=-1)

    def breakpoints(self) -> np.ndarray:
        pts = self.params().ravel()
        pts = pts[(pts >= self.domain_min) & (pts <= self.domain_max)]
        return np.unique(np.concatenate([pts, [self.domain_min, self.domain_max]]))

    def violations(self) -> list[str]:
        """Names of broken partition invariants; empty when the partition is sound."""
        found = []
        p = self.params()
        for i in range(len(p) - 1):
            if p[i, 0] > p[i + 1, 0] or p[i, 3] > p[i + 1, 3]:
                found.append(f"ordering: {self.terms[i].label} vs {self.terms[i + 1].label}")
        # Max of piecewise-linear memberships is positive everywhere iff it is
        # positive at every breakpoint and at every midpoint between them.
        pts = self.breakpoints()
        probes = np.concatenate([pts, (pts[:-1] + pts[1:]) / 2])
        cover = self.memberships(probes).max(axis=-1)
        if np.any(cover <= 0):
            found.append(f"coverage: uncovered at {probes[cover <= 0].tolist()}")
        return found


def rule_membership(
    conditions: Sequence[tuple[int, int]],
    partitions: Sequence[FeaturePartition],
    x,
    tnorm: TNorm | str = TNorm.PRODUCT,
):
    """Firing strength of a conjunctive rule.

    ``x`` is a single feature vector or an (n, m) matrix; conditions are
    ``(feature_index, term_index)`` pairs applied in order.
    """
    arr = np.asarray(x, dtype=float)
    seen = set()
    result = 1.0 if arr.ndim == 1 else np.ones(arr.shape[0])
    for feature, term in conditions:
        if not 0 <= feature < len(partitions) or feature >= arr.shape[-1]:
            raise MalformedRuleError(f"condition references unknown feature {feature}")
        if not 0 <= term < len(partitions[feature]):
            raise MalformedRuleError(f"feature {feature} has no term {term}")
        if feature in seen:
            raise MalformedRuleError(f"feature {feature} appears twice in the rule")
        seen.add(feature)
        mu = membership(partitions[feature].terms[term].shape,
                        np.clip(arr[..., feature], partitions[feature].domain_min,
                                partitions[feature].domain_max))
        result = conjoin(result, mu, tnorm)
    return result
