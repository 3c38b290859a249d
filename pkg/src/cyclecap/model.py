"""Core domain types.

The central object is the constraint model (n, alpha, theta): permutations of
n elements, every cycle of length at most alpha, weighted by theta^(#cycles)
and normalized. alpha is either given explicitly or produced from n by a rule
alpha = floor(n^beta) with beta in (0,1), clamped to [1, n].

A cycle type is the vector (c_1, ..., c_n) of cycle-length multiplicities with
sum j*c_j = n; it is admissible for a model iff c_j = 0 for every j > alpha.
The total Ewens weight of a type t is

    theta^(sum c_j) * n! / prod_j (j^c_j * c_j!),

i.e. the number of permutations with that type times theta^(#cycles).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional

import numpy as np

from .errors import ConfigError, StructuralError
from .numerics import LogReal

# Cycle types store a dense counts vector up to this n, a sparse dict above.
DENSE_TYPE_MAX_N = 100_000

# Guard against floor(n^beta) landing one below an exact integer power due to
# float rounding (e.g. 1e5**0.6 = 999.999...).
_FLOOR_EPS = 1e-9


@dataclass(frozen=True)
class AlphaRule:
    """How alpha was produced from n: an exponent beta, or an explicit table."""

    beta: Optional[float] = None
    table: Optional[dict] = None

    def __post_init__(self):
        if (self.beta is None) == (self.table is None):
            raise ConfigError("AlphaRule needs exactly one of beta / table")
        if self.beta is not None and not (0.0 < self.beta < 1.0):
            raise ConfigError(f"alpha exponent beta must lie in (0,1), got {self.beta}")


def alpha_of(rule: AlphaRule, n: int) -> int:
    """alpha(n) under the rule: floor(n^beta) clamped to [1, n]; tables verbatim."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if rule.table is not None:
        if n not in rule.table:
            raise ConfigError(f"alpha table has no entry for n={n}")
        return int(rule.table[n])
    a = int(math.floor(n ** rule.beta + _FLOOR_EPS))
    return max(1, min(a, n))


@dataclass(frozen=True)
class ConstraintModel:
    """The triple (n, alpha, theta) plus the optional rule that produced alpha."""

    n: int
    alpha: int
    theta: float
    alpha_rule: Optional[AlphaRule] = None

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"n must be a positive integer, got {self.n}")
        if not (1 <= self.alpha <= self.n):
            raise ConfigError(f"alpha must satisfy 1 <= alpha <= n, got alpha={self.alpha}, n={self.n}")
        if not (self.theta > 0):
            raise ConfigError(f"theta must be positive, got {self.theta}")

    @classmethod
    def from_exponent(cls, n: int, beta: float, theta: float) -> "ConstraintModel":
        rule = AlphaRule(beta=beta)
        return cls(n=n, alpha=alpha_of(rule, n), theta=theta, alpha_rule=rule)

    @classmethod
    def from_json(cls, text) -> "ConstraintModel":
        """Schema: {"n": int, "beta": float|null, "alpha": int|null, "theta": float}."""
        obj = json.loads(text) if isinstance(text, str) else dict(text)
        unknown = set(obj) - {"n", "beta", "alpha", "theta"}
        if unknown:
            raise ConfigError(f"unknown model keys {sorted(unknown)}")
        try:
            n = int(obj["n"])
            theta = float(obj["theta"])
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"model JSON needs integer n and real theta: {e}")
        beta = obj.get("beta")
        alpha = obj.get("alpha")
        if (beta is None) == (alpha is None):
            raise ConfigError("exactly one of beta/alpha must be present")
        if beta is not None:
            return cls.from_exponent(n, float(beta), theta)
        return cls(n=n, alpha=int(alpha), theta=theta)

    def to_json(self) -> dict:
        if self.alpha_rule is not None and self.alpha_rule.beta is not None:
            return {"n": self.n, "beta": self.alpha_rule.beta, "theta": self.theta}
        return {"n": self.n, "alpha": self.alpha, "theta": self.theta}


@dataclass(frozen=True)
class WeightArray:
    """One row q_1..q_alpha of nonnegative cycle weights."""

    q: np.ndarray
    alpha: int = field(default=0)

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "alpha", len(q))
        if len(q) == 0:
            raise ConfigError("empty weight array")
        if np.any(q < 0):
            raise ConfigError("weights must be nonnegative")

    @classmethod
    def constant(cls, theta: float, alpha: int) -> "WeightArray":
        return cls(np.full(alpha, float(theta)))

    @classmethod
    def for_model(cls, model: ConstraintModel) -> "WeightArray":
        return cls.constant(model.theta, model.alpha)

    def replace(self, j: int, value: float) -> "WeightArray":
        """New array with q_j set to value (j is the cycle length, 1-based)."""
        q = self.q.copy()
        q[j - 1] = value
        return WeightArray(q)

    @property
    def is_degenerate(self) -> bool:
        return not np.any(self.q > 0)


class CycleType:
    """Multiplicity vector (c_1, ..., c_n) of cycle lengths, sum j*c_j = n.

    Dense numpy storage for n <= DENSE_TYPE_MAX_N, dict-backed sparse above.
    Hashable; the canonical key is the sorted tuple of (length, count) pairs.
    """

    __slots__ = ("n", "_dense", "_sparse", "_key")

    def __init__(self, n: int, counts=None, pairs=None, validate: bool = True):
        self.n = int(n)
        self._dense = None
        self._sparse = None
        if counts is not None:
            dense = np.asarray(counts, dtype=np.int64)
            if len(dense) != self.n:
                raise StructuralError(f"counts vector must have length n={self.n}")
            self._dense = dense
        elif pairs is not None:
            if isinstance(pairs, Mapping):
                pairs = pairs.items()
            self._sparse = {int(j): int(c) for j, c in pairs if c}
            if self.n <= DENSE_TYPE_MAX_N:
                dense = np.zeros(self.n, dtype=np.int64)
                for j, c in self._sparse.items():
                    dense[j - 1] = c
                self._dense = dense
                self._sparse = None
        else:
            raise StructuralError("CycleType needs counts or pairs")
        if validate:
            total = sum(j * c for j, c in self.items())
            if total != self.n:
                raise StructuralError(f"sum j*c_j = {total} != n = {self.n}")
            if any(c < 0 for _, c in self.items()) or any(j < 1 or j > self.n for j, _ in self.items()):
                raise StructuralError("cycle type entries out of range")
        self._key = tuple(sorted(self.items()))

    @classmethod
    def from_parts(cls, parts, n: Optional[int] = None) -> "CycleType":
        parts = list(parts)
        n = sum(parts) if n is None else n
        pairs = {}
        for j in parts:
            pairs[j] = pairs.get(j, 0) + 1
        return cls(n, pairs=pairs.items())

    @classmethod
    def from_lengths(cls, lengths: np.ndarray, n: Optional[int] = None) -> "CycleType":
        js, cs = np.unique(np.asarray(lengths, dtype=np.int64), return_counts=True)
        n = int(np.sum(lengths)) if n is None else n
        return cls(n, pairs=zip(js.tolist(), cs.tolist()))

    def count(self, j: int) -> int:
        if self._dense is not None:
            return int(self._dense[j - 1]) if 1 <= j <= self.n else 0
        return self._sparse.get(j, 0)

    def items(self) -> Iterator[tuple]:
        """Nonzero (length, count) pairs in increasing length order."""
        if self._dense is not None:
            idx = np.nonzero(self._dense)[0]
            return ((int(j + 1), int(self._dense[j])) for j in idx)
        return iter(sorted(self._sparse.items()))

    def lengths(self) -> np.ndarray:
        """Cycle lengths with multiplicity, ascending."""
        out = []
        for j, c in self.items():
            out.extend([j] * c)
        return np.asarray(out, dtype=np.int64)

    def to_dense(self) -> np.ndarray:
        if self._dense is not None:
            return self._dense.copy()
        dense = np.zeros(self.n, dtype=np.int64)
        for j, c in self._sparse.items():
            dense[j - 1] = c
        return dense

    @property
    def total_cycles(self) -> int:
        return sum(c for _, c in self.items())

    def is_admissible(self, alpha: int) -> bool:
        return all(j <= alpha for j, _ in self.items())

    def key(self) -> tuple:
        return self._key

    def __hash__(self):
        return hash((self.n, self._key))

    def __eq__(self, other):
        return isinstance(other, CycleType) and self.n == other.n and self._key == other._key

    def __repr__(self):
        body = ",".join(f"{j}^{c}" if c > 1 else f"{j}" for j, c in self.items())
        return f"CycleType({self.n}: {body})"


class Permutation:
    """A bijection on {1, ..., n} stored as a 0-based image array."""

    __slots__ = ("image",)

    def __init__(self, image, validate: bool = True):
        img = np.asarray(image, dtype=np.int64)
        if validate:
            n = len(img)
            seen = np.zeros(n, dtype=bool)
            if n and (img.min() < 0 or img.max() >= n):
                raise StructuralError("image entries out of range")
            seen[img] = True
            if not seen.all():
                raise StructuralError("mapping is not a bijection")
        self.image = img

    @classmethod
    def from_one_based(cls, image) -> "Permutation":
        return cls(np.asarray(image, dtype=np.int64) - 1)

    @property
    def n(self) -> int:
        return len(self.image)

    def __eq__(self, other):
        return isinstance(other, Permutation) and np.array_equal(self.image, other.image)

    def __hash__(self):
        return hash(self.image.tobytes())


def cycle_type_of(p: Permutation) -> CycleType:
    """Cycle-length multiplicities of the permutation."""
    n = p.n
    img = p.image
    seen = np.zeros(n, dtype=bool)
    pairs = {}
    for start in range(n):
        if seen[start]:
            continue
        length = 0
        i = start
        while not seen[i]:
            seen[i] = True
            i = img[i]
            length += 1
        pairs[length] = pairs.get(length, 0) + 1
    return CycleType(n, pairs=pairs.items())


def ewens_log_weight(t: CycleType, theta: float) -> LogReal:
    """log of theta^(#cycles) * n! / prod_j (j^c_j * c_j!).

    This is the total Ewens weight of all permutations with cycle type t.
    """
    if theta <= 0:
        raise ConfigError(f"theta must be positive, got {theta}")
    logw = math.lgamma(t.n + 1)
    for j, c in t.items():
        logw += c * math.log(theta) - c * math.log(j) - math.lgamma(c + 1)
    return LogReal(logw)


def bounded_partitions(n: int, max_part: int) -> Iterator[list]:
    """All partitions of n with parts <= max_part, as descending part lists."""
    def rec(remaining: int, cap: int, prefix: list):
        if remaining == 0:
            yield list(prefix)
            return
        for part in range(min(cap, remaining), 0, -1):
            prefix.append(part)
            yield from rec(remaining - part, part, prefix)
            prefix.pop()

    yield from rec(n, max_part, [])
