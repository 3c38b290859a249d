"""Exact log-domain dynamic programming.

Everything here rests on one recurrence. If h_k = [z^k] exp(sum_j (w_j/j) z^j)
then differentiating the exponential gives

    k * h_k = sum_{j <= min(alpha, k)} w_j * h_{k-j},     h_0 = 1.

Two instantiations are used:

  * generating-function coefficients: w_j = q_j * x^j gives the x-tilted
    coefficients h_k x^k of exp(sum (q_j/j) z^j); h_n is the normalizing
    constant Z for the constant row q_j = theta * 1{j <= alpha};
  * compound Poisson: w_j = j * mu_j gives e^M * p_k where
    p_k = P[sum_j j*Y_j = k] for independent Y_j ~ Poisson(mu_j) and
    M = sum mu_j (the same recurrence is known as Panjer's).

The inner loop runs in the *linear* domain: all terms are nonnegative so the
sliding dot product has no cancellation, and a rolling renormalization (the
active window is rescaled whenever the newest entry leaves [1e-250, 1e250],
with per-index log offsets recording the scale) keeps every intermediate
within double range. Per-step relative error is a few ulps and accumulates
additively, so even k = 10^5 stays comfortably inside the 1e-10 recurrence
contract. Exact zeros stay exact.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Mapping, Sequence, Tuple, Union

import numpy as np

from .errors import (
    ConstraintError,
    DegenerateWeightsError,
    DomainError,
    NumericalError,
    SizeGuardError,
)
from .model import (
    ConstraintModel,
    CycleType,
    WeightArray,
    bounded_partitions,
    ewens_log_weight,
)
from .numerics import NEG_INF, LogReal, log_sum_exp_value
from .saddle import solve_saddle

_W_LOG_CAP = 115.0  # keeps w_j * (window entry <= 1e250) below double overflow
_RESCALE_HI = 1e250
_RESCALE_LO = 1e-250
_BRUTE_FORCE_MAX_N = 12


def _log_linear_dp(logw: np.ndarray, N: int) -> np.ndarray:
    """log h_k, k = 0..N, for k*h_k = sum_j exp(logw[j-1])*h_{k-j}, h_0 = 1."""
    if np.max(logw) > _W_LOG_CAP:
        raise NumericalError(
            f"recurrence weight exp({np.max(logw):.1f}) too large for the linear-domain loop"
        )
    alpha = len(logw)
    with np.errstate(under="ignore"):
        wrev = np.exp(logw[::-1])
    G = np.zeros(N + 1)
    off = np.zeros(N + 1)
    G[0] = 1.0
    cur = 0.0
    for k in range(1, N + 1):
        m = alpha if alpha < k else k
        s = np.dot(G[k - m : k], wrev[alpha - m :]) / k
        G[k] = s
        off[k] = cur
        if s != 0.0 and not (_RESCALE_LO < s < _RESCALE_HI):
            shift = math.log(s)
            lo = k - alpha + 1
            if lo < 0:
                lo = 0
            with np.errstate(under="ignore"):
                G[lo : k + 1] *= math.exp(-shift)
            off[lo : k + 1] += shift
            cur += shift
    out = np.full(N + 1, NEG_INF)
    pos = G > 0.0
    out[pos] = np.log(G[pos]) + off[pos]
    return out


@dataclass(frozen=True)
class CoefficientTable:
    """Coefficients h_0..h_N of exp(sum_j (q_j/j) z^j), stored x-tilted.

    The array holds log(h_k * x^k) for the construction tilt x; untilted
    values are recovered as h_k = (tilted) * x^(-k). With x = the saddle tilt
    the stored values have tiny dynamic range, which is the whole point.
    """

    q: WeightArray
    tilt: float
    log_tilted_values: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return len(self.log_tilted_values) - 1

    def log_tilted(self, k: int) -> float:
        self._check_index(k)
        return float(self.log_tilted_values[k])

    def log_coefficient(self, k: int) -> float:
        """log h_k, untilted."""
        self._check_index(k)
        return float(self.log_tilted_values[k] - k * math.log(self.tilt))

    def coefficient(self, k: int) -> LogReal:
        return LogReal(self.log_coefficient(k))

    @cached_property
    def log_coefficients(self) -> np.ndarray:
        """Untilted log h_k for k = 0..N as one array."""
        k = np.arange(self.N + 1)
        return self.log_tilted_values - k * math.log(self.tilt)

    @cached_property
    def h(self) -> Tuple[LogReal, ...]:
        return tuple(LogReal(float(v)) for v in self.log_coefficients)

    def recurrence_rel_error(self, k: int) -> float:
        """|rhs/lhs - 1| for k*h_k = sum_j q_j*h_{k-j} at this k (0 if both vanish)."""
        self._check_index(k)
        if k == 0:
            return 0.0
        m = min(self.q.alpha, k)
        j = np.arange(1, m + 1)
        logw = np.full(m, NEG_INF)
        active = self.q.q[:m] > 0
        logw[active] = np.log(self.q.q[:m][active]) + j[active] * math.log(self.tilt)
        lhs = math.log(k) + self.log_tilted_values[k]
        rhs = log_sum_exp_value(logw + self.log_tilted_values[k - m : k][::-1])
        if lhs == NEG_INF and rhs == NEG_INF:
            return 0.0
        return abs(math.expm1(rhs - lhs))

    def _check_index(self, k: int) -> None:
        if not (0 <= k <= self.N):
            raise DomainError(f"coefficient index {k} outside 0..{self.N}")


def egf_coefficients(q: WeightArray, N: int, tilt: float = None) -> CoefficientTable:
    """Coefficients of exp(sum_j (q_j/j) z^j) up to order N, optionally x-tilted.

    O(N * alpha) time. When the requested tilt would push some weight
    q_j * x^j past the linear-loop cap, the loop runs at a reduced internal
    tilt and the difference is folded into the stored logs exactly.
    """
    if N < 0:
        raise DomainError(f"N must be >= 0, got {N}")
    if q.is_degenerate:
        raise DegenerateWeightsError("all weights are zero")
    x = 1.0 if tilt is None else float(tilt)
    if not (x > 0) or math.isinf(x):
        raise DomainError(f"tilt must be a positive real, got {tilt}")
    t_req = math.log(x)
    j = np.arange(1, q.alpha + 1, dtype=float)
    logq = np.full(q.alpha, NEG_INF)
    active = q.q > 0
    logq[active] = np.log(q.q[active])
    # Run the loop at a tilt keeping every active weight q_j * x^j inside
    # double range; the difference to the requested tilt folds into the
    # stored logs exactly (retilting scales h_k by x^k).
    t_up = float(np.min((_W_LOG_CAP - logq[active]) / j[active]))
    t_dn = float(np.max((-650.0 - logq[active]) / j[active]))
    if t_dn > t_up:
        raise NumericalError("weight row spans too many orders of magnitude for one tilt")
    t_int = min(max(t_req, t_dn), t_up)
    logh_int = _log_linear_dp(logq + j * t_int, N)
    k = np.arange(N + 1)
    log_tilted = logh_int + k * (t_req - t_int)
    return CoefficientTable(q=q, tilt=x, log_tilted_values=log_tilted)


def partition_function(model: ConstraintModel) -> LogReal:
    """log Z: the order-n coefficient of exp(theta * sum_{j<=alpha} z^j/j).

    Z * n! counts weighted permutations of n with all cycles <= alpha; the DP
    runs at the saddle tilt purely for dynamic-range control, and the result
    is tilt-invariant.
    """
    q = WeightArray.for_model(model)
    x = solve_saddle(q, float(model.n)).x
    table = egf_coefficients(q, model.n, tilt=x)
    return table.coefficient(model.n)


MeansLike = Union[Mapping[int, float], Sequence[float], np.ndarray]


def _means_to_dense(means: MeansLike, first_index: int) -> Tuple[np.ndarray, int, int]:
    """Normalize means input to (dense mu_1..mu_b2 vector, b1, b2)."""
    if isinstance(means, Mapping):
        if len(means) == 0:
            return np.zeros(0), 0, 0
        idx = sorted(means)
        if idx[0] < 1:
            raise DomainError(f"mean indices must be >= 1, got {idx[0]}")
        dense = np.zeros(idx[-1])
        for i in idx:
            dense[i - 1] = float(means[i])
        b2 = idx[-1]
        b1 = idx[0] - 1
    else:
        vec = np.asarray(means, dtype=float)
        if vec.ndim != 1:
            raise DomainError("means must be a one-dimensional vector")
        if first_index < 1:
            raise DomainError(f"first_index must be >= 1, got {first_index}")
        b1 = first_index - 1
        b2 = b1 + len(vec)
        dense = np.zeros(b2)
        dense[b1:b2] = vec
    if np.any(dense < 0) or not np.all(np.isfinite(dense)):
        raise DomainError("means must be finite and nonnegative")
    return dense, b1, b2


@dataclass(frozen=True)
class CompoundPoissonDist:
    """Exact law of T = sum_j j*Y_j, Y_j ~ Poisson(mu_j) independent, j in (b1, b2]."""

    log_pmf_values: np.ndarray = field(repr=False)
    means: np.ndarray
    range: Tuple[int, int]
    tail_mass: float

    @property
    def N(self) -> int:
        return len(self.log_pmf_values) - 1

    def log_p(self, k: int) -> float:
        if not (0 <= k <= self.N):
            raise DomainError(f"pmf index {k} outside 0..{self.N}")
        return float(self.log_pmf_values[k])

    def p(self, k: int) -> float:
        return math.exp(self.log_p(k))

    @cached_property
    def pmf(self) -> Tuple[LogReal, ...]:
        return tuple(LogReal(float(v)) for v in self.log_pmf_values)

    def panjer_rel_error(self, k: int) -> float:
        """|rhs/lhs - 1| for k*p_k = sum_j j*mu_j*p_{k-j} (0 if both vanish)."""
        if not (1 <= k <= self.N):
            raise DomainError(f"recurrence index {k} outside 1..{self.N}")
        b1, b2 = self.range
        m = min(b2, k)
        logw = np.full(m, NEG_INF)
        j = np.arange(1, m + 1)
        dense = np.zeros(b2)
        dense[b1:] = self.means
        active = dense[:m] > 0
        logw[active] = np.log(j[active] * dense[:m][active])
        lhs = math.log(k) + self.log_pmf_values[k]
        rhs = log_sum_exp_value(logw + self.log_pmf_values[k - m : k][::-1])
        if lhs == NEG_INF and rhs == NEG_INF:
            return 0.0
        return abs(math.expm1(rhs - lhs))


def compound_poisson_pmf(means: MeansLike, N: int, first_index: int = 1) -> CompoundPoissonDist:
    """Exact pmf of T = sum_j j*Y_j on {0..N} plus the truncated tail mass.

    `means` is either a mapping {j: mu_j} or a vector taken as
    mu_{first_index}, mu_{first_index+1}, ... All indices j >= 1.
    """
    if N < 0:
        raise DomainError(f"N must be >= 0, got {N}")
    dense, b1, b2 = _means_to_dense(means, first_index)
    M = float(np.sum(dense))
    if b2 == 0 or M == 0.0:
        log_pmf = np.full(N + 1, NEG_INF)
        log_pmf[0] = 0.0
        return CompoundPoissonDist(
            log_pmf_values=log_pmf, means=dense[b1:], range=(b1, b2), tail_mass=0.0
        )
    logw = np.full(b2, NEG_INF)
    active = dense > 0
    j = np.arange(1, b2 + 1)
    logw[active] = np.log(j[active] * dense[active])
    log_pmf = _log_linear_dp(logw, N) - M
    total = log_sum_exp_value(log_pmf)
    tail = -math.expm1(total) if total < 0 else 0.0
    return CompoundPoissonDist(
        log_pmf_values=log_pmf, means=dense[b1:], range=(b1, b2), tail_mass=max(tail, 0.0)
    )


def poisson_means(model: ConstraintModel) -> np.ndarray:
    """mu_j = theta * x^j / j for j = 1..alpha at the saddle tilt x."""
    x = solve_saddle(WeightArray.for_model(model), float(model.n)).x
    j = np.arange(1, model.alpha + 1, dtype=float)
    return model.theta * np.exp(j * math.log(x)) / j


def joint_cycle_count_logpmf(model: ConstraintModel, prefix: Sequence[int]) -> LogReal:
    """log P[(C_1,...,C_b) = prefix] under the constrained measure.

    Computed as prod_j Poisson(c_j; mu_j) * P[T_(b,alpha) = n-r] / P[T_(0,alpha) = n]
    with r = sum_j j*c_j and mu_j at the saddle tilt; the identity is exact,
    not an approximation. Returns log 0 when r > n.
    """
    c = np.asarray(prefix, dtype=float)
    b = len(c)
    if b > model.alpha:
        raise ConstraintError(f"prefix length {b} exceeds alpha={model.alpha}")
    if np.any(c < 0) or np.any(c != np.floor(c)):
        raise DomainError("prefix entries must be nonnegative integers")
    j = np.arange(1, b + 1)
    r = int(np.dot(j, c))
    if r > model.n:
        return LogReal.zero()
    mu = poisson_means(model)
    log_poisson = float(np.sum(-mu[:b] + c * np.log(mu[:b]) - [math.lgamma(ci + 1) for ci in c]))
    rest = compound_poisson_pmf(mu[b:], model.n - r, first_index=b + 1)
    full = compound_poisson_pmf(mu, model.n)
    return LogReal(log_poisson + rest.log_p(model.n - r) - full.log_p(model.n))


@dataclass(frozen=True)
class TVReport:
    """Exact total-variation distance between (C_1..C_b) and independent Poissons."""

    b: int
    tv: float
    terms_summed: int
    model: ConstraintModel
    mu_used: np.ndarray

    def to_json(self) -> dict:
        return {
            "n": self.model.n,
            "alpha": self.model.alpha,
            "theta": self.model.theta,
            "b": self.b,
            "tv": self.tv,
            "terms_summed": self.terms_summed,
        }


def exact_tv_distance(model: ConstraintModel, b: int) -> TVReport:
    """d_b = sum_r P[T_0b = r] * (1 - P[T_ba = n-r]/P[T_0a = n])_+ + P[T_0b > n].

    The sum runs over r = 0..n; mass of T_0b beyond n contributes with full
    clamp 1 (those r force an impossible remainder). b = 0 compares empty
    vectors and gives 0.
    """
    if not (0 <= b <= model.alpha):
        raise ConstraintError(f"need 0 <= b <= alpha={model.alpha}, got b={b}")
    mu = poisson_means(model)
    if b == 0:
        return TVReport(b=0, tv=0.0, terms_summed=0, model=model, mu_used=mu[:0])
    n = model.n
    head = compound_poisson_pmf(mu[:b], n)
    rest = compound_poisson_pmf(mu[b:], n, first_index=b + 1)
    full = compound_poisson_pmf(mu, n)
    log_ref = full.log_p(n)
    with np.errstate(over="ignore"):
        ratio = np.exp(rest.log_pmf_values[::-1] - log_ref)  # index r -> T_ba at n-r
    clamp = np.clip(1.0 - ratio, 0.0, 1.0)
    with np.errstate(under="ignore"):
        tv = float(np.dot(np.exp(head.log_pmf_values), clamp)) + head.tail_mass
    return TVReport(
        b=b,
        tv=min(max(tv, 0.0), 1.0),
        terms_summed=n + 1,
        model=model,
        mu_used=mu[:b],
    )


def chernoff_tail_bound(means: MeansLike, rho: float) -> LogReal:
    """log of exp(m*(rho - rho*log(rho))/b), an upper bound for P[T >= rho*m].

    Here m = sum_j j*mu_j and b is the largest index carrying a mean. The
    bound is vacuous (>= 1) for rho <= e and decays for rho > e.
    """
    if not rho > 1:
        raise DomainError(f"rho must be > 1, got {rho}")
    dense, _, b2 = _means_to_dense(means, 1)
    if b2 == 0 or np.sum(dense) == 0.0:
        return LogReal.one()  # T = 0 a.s.; exponent vanishes with m = 0
    m = float(np.dot(np.arange(1, b2 + 1), dense))
    return LogReal(m * (rho - rho * math.log(rho)) / b2)


def brute_force_distribution(model: ConstraintModel) -> Dict[CycleType, LogReal]:
    """Ground-truth law: enumerate all cycle types with parts <= alpha, weight, normalize.

    The weight of a type is n!/(prod j^c_j c_j!) * theta^(sum c_j), i.e. the
    total measure-weight of permutations of that type; guarded to n <= 12.
    """
    if model.n > _BRUTE_FORCE_MAX_N:
        raise SizeGuardError(f"brute force is guarded to n <= {_BRUTE_FORCE_MAX_N}, got {model.n}")
    types = [
        CycleType.from_lengths(parts)
        for parts in bounded_partitions(model.n, min(model.alpha, model.n))
    ]
    logw = np.array([ewens_log_weight(t, model.theta).logval for t in types])
    logz = log_sum_exp_value(logw)
    return {t: LogReal(float(lw - logz)) for t, lw in zip(types, logw)}


def cycle_count_distribution(model: ConstraintModel, m: int) -> np.ndarray:
    """Exact log P[C_m = k] for k = 0..floor(n/m), via two coefficient tables.

    Splitting off the z^m term of the exponential gives
    P[C_m = k] = (theta/m)^k / k! * g_(n-k*m) / h_n where g drops the m-th
    weight; one g-table serves every k.
    """
    if not (1 <= m <= model.alpha):
        raise ConstraintError(f"m must satisfy 1 <= m <= alpha={model.alpha}, got {m}")
    q = WeightArray.for_model(model)
    x = solve_saddle(q, float(model.n)).x
    h = egf_coefficients(q, model.n, tilt=x)
    g = egf_coefficients(q.replace(m, 0.0), model.n, tilt=x)
    kmax = model.n // m
    log_rate = math.log(model.theta / m)
    out = np.empty(kmax + 1)
    log_hn = h.log_coefficient(model.n)
    for k in range(kmax + 1):
        out[k] = (
            k * log_rate
            - math.lgamma(k + 1)
            + g.log_coefficient(model.n - k * m)
            - log_hn
        )
    return out


def expected_cycle_count(model: ConstraintModel, m: int) -> float:
    """Exact E[C_m] = (theta/m) * h_(n-m)/h_n."""
    if not (1 <= m <= model.alpha):
        raise ConstraintError(f"m must satisfy 1 <= m <= alpha={model.alpha}, got {m}")
    q = WeightArray.for_model(model)
    x = solve_saddle(q, float(model.n)).x
    table = egf_coefficients(q, model.n, tilt=x)
    return (model.theta / m) * math.exp(
        table.log_coefficient(model.n - m) - table.log_coefficient(model.n)
    )


def longest_cycle_cdf(model: ConstraintModel, m: int) -> float:
    """Exact P[longest cycle <= m] = h_n^(<=m) / h_n (both at the shared tilt)."""
    if not (0 <= m <= model.alpha):
        raise ConstraintError(f"m must satisfy 0 <= m <= alpha={model.alpha}, got {m}")
    if m == 0:
        return 0.0 if model.n > 0 else 1.0
    q = WeightArray.for_model(model)
    x = solve_saddle(q, float(model.n)).x
    h = egf_coefficients(q, model.n, tilt=x)
    capped = egf_coefficients(WeightArray.constant(model.theta, m), model.n, tilt=x)
    return math.exp(capped.log_coefficient(model.n) - h.log_coefficient(model.n))
