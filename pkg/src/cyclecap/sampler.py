"""Exact sampling of cycle types and permutations.

Sequential first-cycle decomposition: with r elements still unplaced, the
cycle through a fixed unplaced element has length j with probability

    P(j) = theta * h_(r-j) / (r * h_r),      j = 1..min(alpha, r),

where h_k are the generating-function coefficients (the falling factorials in
the count of ways to build the cycle cancel against the k! normalizations,
and sum_j P(j) = 1 is literally the coefficient recurrence). Drawing lengths
until r = 0 gives an exact draw of the cycle type; choosing cycle members by
an ordered Fisher-Yates selection makes the permutation uniform given its
type. Rejection from the unconstrained measure would instead accept with the
vanishing probability Z, so this O(n)-per-sample route is the only exact one
that scales.

Probability rows are built from the saddle-tilted table: with W_k
proportional to h_k * x^k and X_j = x^j,

    P(j) propto W_(r-j) * X_j,

and both factors stay within a few hundred orders of magnitude of 1, so rows
need no per-draw exponentials or rescaling.

RNG contract (identifier "splitmix64-counter-v1", persisted in artifacts):
sample i of seed s reads the counter-based stream

    base  = mix64(s + (i+1)*GAMMA)          (mod 2^64)
    u_t   = (mix64(base + (t+1)*GAMMA) >> 11) * 2^-53

with the splitmix64 finalizer mix64 and GAMMA = 0x9E3779B97F4A7C15. Cycle
length t consumes position t; member selection consumes positions 2^32, ...
so the cycle-type marginal of a permutation draw is bit-identical to the
plain cycle-type draw at the same (seed, counter). Batches are therefore
order-independent and partition-independent across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, List

import numpy as np

from .errors import DomainError, SizeGuardError
from .exact import CoefficientTable, egf_coefficients
from .model import ConstraintModel, CycleType, Permutation, WeightArray
from .saddle import solve_saddle

RNG_ID = "splitmix64-counter-v1"

_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1
_NP_GAMMA = np.uint64(_GAMMA)
_MIX_C1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_C2 = np.uint64(0x94D049BB133111EB)
_TO_UNIT = 2.0**-53

# Member-selection draws live at counter positions 2^32 + s; cycle-length
# draws at positions 0..n < 2^32, so the streams never collide.
_MEMBER_STREAM_OFFSET = 1 << 32

# Batches at or below this n with large counts run wave-vectorized over all
# samples at once (identical draws to the per-sample path, same stream).
_WAVE_MAX_N = 16
_WAVE_MIN_COUNT = 4096

_TYPE_ARRAY_BYTE_GUARD = 4_000_000_000


def mix64(z: int) -> int:
    """splitmix64 finalizer on 64-bit integers."""
    z &= _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = z.copy()
    z ^= z >> np.uint64(30)
    z *= _MIX_C1
    z ^= z >> np.uint64(27)
    z *= _MIX_C2
    z ^= z >> np.uint64(31)
    return z


def stream_base(seed: int, index: int) -> int:
    """Per-sample stream root for sample `index` of `seed`."""
    return mix64((seed + (index + 1) * _GAMMA) & _MASK64)


def _uniform(base: int, t: int) -> float:
    return (mix64((base + (t + 1) * _GAMMA) & _MASK64) >> 11) * _TO_UNIT


def _stream_bases_np(seed: int, start: int, count: int) -> np.ndarray:
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    return _mix64_np(np.uint64(seed & _MASK64) + idx * _NP_GAMMA)


def _uniforms_np(bases: np.ndarray, t: int) -> np.ndarray:
    step = np.uint64(((t + 1) * _GAMMA) & _MASK64)
    return (_mix64_np(bases + step) >> np.uint64(11)).astype(np.float64) * _TO_UNIT


@dataclass
class SamplerState:
    """Precomputed tables plus the (seed, counter) position of the next draw."""

    model: ConstraintModel
    table: CoefficientTable
    seed: int
    counter: int = 0
    _W: np.ndarray = field(init=False, repr=False)
    _WR: np.ndarray = field(init=False, repr=False)
    _X: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.seed, int) or self.seed < 0:
            raise DomainError(f"seed must be a nonnegative integer, got {self.seed}")
        logt = self.table.log_tilted_values
        if len(logt) < self.model.n + 1:
            raise DomainError("coefficient table must cover indices 0..n")
        self._W = np.exp(logt - np.max(logt))
        self._WR = self._W[::-1].copy()
        j = np.arange(1, self.model.alpha + 1, dtype=float)
        self._X = np.exp(j * math.log(self.table.tilt))

    @classmethod
    def for_model(cls, model: ConstraintModel, seed: int) -> "SamplerState":
        q = WeightArray.for_model(model)
        x = solve_saddle(q, float(model.n)).x
        table = egf_coefficients(q, model.n, tilt=x)
        return cls(model=model, table=table, seed=seed)

    def _row(self, remaining: int) -> np.ndarray:
        """Unnormalized P(j) for j = 1..min(alpha, remaining) (shared scale)."""
        m = min(self.model.alpha, remaining)
        base = len(self._W) - 1 - remaining  # _WR[base + j] = W[remaining - j]
        return self._WR[base + 1 : base + 1 + m] * self._X[:m]


def first_cycle_pmf(state: SamplerState, remaining: int) -> np.ndarray:
    """P(cycle through a fixed unplaced element has length j), j = 1..min(alpha, remaining).

    The unnormalized masses are theta*h_(r-j)/(r*h_r); their sum is 1 by the
    coefficient recurrence, which is asserted to 1e-10 before normalizing.
    """
    n = state.model.n
    if not (1 <= remaining <= n):
        raise DomainError(f"remaining must satisfy 1 <= remaining <= n={n}, got {remaining}")
    row = state._row(remaining)
    scale = state.model.theta / (remaining * state._W[remaining])
    total = float(np.sum(row)) * scale
    assert abs(total - 1.0) <= 1e-10, f"first-cycle masses sum to {total}, not 1"
    p = row * scale
    return p / total


def _draw_lengths(state: SamplerState, base: int) -> List[int]:
    """One exact cycle-type draw, returned as cycle lengths in draw order."""
    rem = state.model.n
    lengths: List[int] = []
    t = 0
    while rem > 0:
        row = state._row(rem)
        cdf = np.cumsum(row)
        m = len(cdf)
        k = int(np.searchsorted(cdf, _uniform(base, t) * cdf[-1], side="right"))
        if k >= m:
            k = m - 1
        j = k + 1
        lengths.append(j)
        rem -= j
        t += 1
    return lengths


def sample_cycle_type(state: SamplerState) -> CycleType:
    """Exact draw from the cycle-type marginal; advances the state counter."""
    base = stream_base(state.seed, state.counter)
    state.counter += 1
    lengths = _draw_lengths(state, base)
    return CycleType.from_lengths(np.asarray(lengths, dtype=np.int64))


def sample_permutation(state: SamplerState) -> Permutation:
    """Exact permutation draw; cycle-type marginal matches sample_cycle_type.

    At the same (seed, counter) the drawn type is bit-identical to
    sample_cycle_type's, because lengths read the same stream positions.
    Given the type, the permutation is uniform: each cycle takes the next
    pool element as anchor and an ordered uniform selection of the remaining
    members (the anchor rule is deterministic given the history, so it does
    not bias the law).
    """
    n = state.model.n
    base = stream_base(state.seed, state.counter)
    state.counter += 1
    lengths = _draw_lengths(state, base)
    pool = np.arange(n, dtype=np.int64)
    image = np.empty(n, dtype=np.int64)
    ptr = 0
    s = 0
    for j in lengths:
        r = n - ptr
        for step in range(1, j):
            k = r - step
            pick = int(_uniform(base, _MEMBER_STREAM_OFFSET + s) * k)
            s += 1
            if pick >= k:
                pick = k - 1
            a, b = ptr + step, ptr + step + pick
            pool[a], pool[b] = pool[b], pool[a]
        cyc = pool[ptr : ptr + j]
        for i in range(j - 1):
            image[cyc[i]] = cyc[i + 1]
        image[cyc[j - 1]] = cyc[0]
        ptr += j
    return Permutation(image)


def _sample_counts_wave(state: SamplerState, count: int, start_index: int) -> np.ndarray:
    """All samples advanced one cycle per wave; draw-identical to the scalar path."""
    n, alpha = state.model.n, state.model.alpha
    cdfs = [np.empty(0)] * (n + 1)
    for r in range(1, n + 1):
        cdfs[r] = np.cumsum(state._row(r))
    bases = _stream_bases_np(state.seed, start_index, count)
    rem = np.full(count, n, dtype=np.int64)
    counts = np.zeros((count, n), dtype=np.int32)
    t = 0
    active = np.nonzero(rem > 0)[0]
    while len(active):
        u = _uniforms_np(bases[active], t)
        rem_act = rem[active]
        for r in np.unique(rem_act):
            sel = rem_act == r
            rows = active[sel]
            cdf = cdfs[r]
            k = np.searchsorted(cdf, u[sel] * cdf[-1], side="right")
            k = np.minimum(k, len(cdf) - 1)
            rem[rows] -= k + 1
            np.add.at(counts, (rows, k), 1)
        active = active[rem[active] > 0]
        t += 1
    return counts


def sample_type_array(
    model: ConstraintModel, count: int, seed: int, start_index: int = 0
) -> np.ndarray:
    """count exact cycle-type draws as a (count, n) matrix of counts c_1..c_n.

    Row i is the draw at stream index start_index + i, so partitioning a
    batch across workers by index ranges reproduces the same samples.
    """
    if count < 0:
        raise DomainError(f"count must be >= 0, got {count}")
    if (count * model.n) * 4 > _TYPE_ARRAY_BYTE_GUARD:
        raise SizeGuardError(
            f"type matrix of {count} x {model.n} exceeds the size guard; "
            "use sample_lengths or sample_batch instead"
        )
    state = SamplerState.for_model(model, seed)
    if model.n <= _WAVE_MAX_N and count >= _WAVE_MIN_COUNT:
        return _sample_counts_wave(state, count, start_index)
    counts = np.zeros((count, model.n), dtype=np.int32)
    for i in range(count):
        base = stream_base(seed, start_index + i)
        for j in _draw_lengths(state, base):
            counts[i, j - 1] += 1
    return counts


def sample_lengths(
    model: ConstraintModel, count: int, seed: int, start_index: int = 0
) -> List[np.ndarray]:
    """count exact draws, each as its array of cycle lengths in draw order.

    The memory-light form for large n: no dense count vectors are built.
    """
    if count < 0:
        raise DomainError(f"count must be >= 0, got {count}")
    state = SamplerState.for_model(model, seed)
    out = []
    for i in range(count):
        base = stream_base(seed, start_index + i)
        out.append(np.asarray(_draw_lengths(state, base), dtype=np.int64))
    return out


def sample_batch(
    model: ConstraintModel, count: int, seed: int, start_index: int = 0
) -> Iterator[CycleType]:
    """Stream of count exact cycle-type draws, deterministic in (model, count, seed).

    Sample i depends only on (seed, start_index + i): disjoint index ranges
    drawn by different workers concatenate to the same batch.
    """
    if count < 0:
        raise DomainError(f"count must be >= 0, got {count}")
    if model.n <= _WAVE_MAX_N and count >= _WAVE_MIN_COUNT:
        counts = sample_type_array(model, count, seed, start_index)
        for row in counts:
            yield CycleType(model.n, counts=row, validate=False)
        return
    state = SamplerState.for_model(model, seed)
    for i in range(count):
        base = stream_base(seed, start_index + i)
        lengths = _draw_lengths(state, base)
        yield CycleType.from_lengths(np.asarray(lengths, dtype=np.int64))
