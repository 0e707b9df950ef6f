"""First-level bit-sequence tests (SP800-22 subset) as pure functions.

Each test maps a block of bits (uint8 0/1 array) and parameters to a
TestOutcome holding one or more p-values. Tests with a known defect carry
two variants:

* ``original``  - statistic and constants exactly as in sts-2.1.2, the
  implementation under audit (constants are transcribed and their source
  noted next to each table);
* ``modified``  - the published correction: exact class probabilities for
  the longest-run and overlapping-template tests (Hamano-Kaneko style,
  recomputed here by dynamic programming), d = 3.8 for the spectral test
  (Pareschi et al.), and series-exact constants for the universal test
  (Coron's refinement of Maurer's statistic).

Only the random-excursions family may legally return a discarded outcome
(cycle count below the configured minimum); every other test always
produces p-values, including on degenerate all-zero/all-one input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np
from scipy.fft import rfft
from scipy.special import ndtr

from . import _kernels
from .bitstream import ConfigError, InsufficientInputError
from .numerics import erfc, igamc

LN2 = math.log(2.0)


@dataclass(frozen=True)
class TestOutcome:
    """Result of one first-level test application.

    ``discarded`` is true iff no p-values were produced, which only the
    random-excursions family is allowed to do.
    """

    __test__ = False  # not a pytest class

    pvalues: tuple[float, ...]
    discarded: bool = False
    discard_reason: dict | None = None

    def __post_init__(self):
        if self.discarded != (len(self.pvalues) == 0):
            raise ValueError("discarded outcomes must carry no p-values (and vice versa)")


@dataclass(frozen=True)
class TestDescriptor:
    """Identity, sample size, variant and parameters of a first-level test."""

    __test__ = False  # not a pytest class

    test_id: str
    n: int
    variant: str = "original"
    params: Mapping = field(default_factory=dict)

    def param(self, key, default=None):
        return self.params.get(key, default)


def _check_block(bits: np.ndarray, minimum: int) -> int:
    n = int(bits.size)
    if n < minimum:
        raise InsufficientInputError(minimum, n)
    return n


# ---------------------------------------------------------------------------
# Frequency / runs family


def frequency_test(bits: np.ndarray) -> TestOutcome:
    """Monobit test: the +-1 partial sum should be O(sqrt(n))."""
    n = _check_block(bits, 1)
    s = 2 * int(np.count_nonzero(bits)) - n
    p = erfc(abs(s) / math.sqrt(n) / math.sqrt(2.0))
    return TestOutcome((p,))


def block_frequency_test(bits: np.ndarray, block: int = 128) -> TestOutcome:
    """Frequency of ones within disjoint ``block``-bit blocks."""
    if block < 2:
        raise ConfigError("block_frequency: block must be >= 2")
    n = _check_block(bits, block)
    nblocks = n // block
    props = bits[: nblocks * block].reshape(nblocks, block).mean(axis=1)
    chi2 = 4.0 * block * float(np.sum((props - 0.5) ** 2))
    return TestOutcome((igamc(nblocks / 2.0, chi2 / 2.0),))


def _cusum_pvalue(z: int, n: int) -> float:
    sqn = math.sqrt(n)
    k = np.arange(math.floor((-n / z + 1) / 4), math.floor((n / z - 1) / 4) + 1)
    s1 = float(np.sum(ndtr((4 * k + 1) * z / sqn) - ndtr((4 * k - 1) * z / sqn)))
    k = np.arange(math.floor((-n / z - 3) / 4), math.floor((n / z - 1) / 4) + 1)
    s2 = float(np.sum(ndtr((4 * k + 3) * z / sqn) - ndtr((4 * k + 1) * z / sqn)))
    return min(max(1.0 - s1 + s2, 0.0), 1.0)


def cumulative_sums_test(bits: np.ndarray) -> TestOutcome:
    """Maximum excursion of the +-1 random walk, forward and backward."""
    n = _check_block(bits, 2)
    steps = bits.astype(np.int64) * 2 - 1
    s = np.cumsum(steps)
    z_fwd = int(np.max(np.abs(s)))
    s_rev = np.cumsum(steps[::-1])
    z_bwd = int(np.max(np.abs(s_rev)))
    return TestOutcome((_cusum_pvalue(z_fwd, n), _cusum_pvalue(z_bwd, n)))


def runs_test(bits: np.ndarray) -> TestOutcome:
    """Total number of runs versus its expectation given the ones proportion."""
    n = _check_block(bits, 2)
    pi = float(np.count_nonzero(bits)) / n
    # sts-2.1.2 precondition: if the monobit deviation is too large the run
    # count is meaningless and the test reports p = 0.
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        return TestOutcome((0.0,))
    v = 1 + int(np.count_nonzero(bits[1:] != bits[:-1]))
    num = abs(v - 2.0 * n * pi * (1.0 - pi))
    den = 2.0 * math.sqrt(2.0 * n) * pi * (1.0 - pi)
    return TestOutcome((erfc(num / den),))


# ---------------------------------------------------------------------------
# Longest run of ones


@lru_cache(maxsize=None)
def _count_max_run_le(m: int, r: int) -> int:
    """Number of m-bit strings whose longest 1-run is at most r (exact int)."""
    if r < 0:
        return 0
    a = [0] * (m + 1)
    a[0] = 1
    window = 0  # sum of a[max(0, i-1-r) .. i-1]
    for i in range(1, m + 1):
        window += a[i - 1]
        if i - 2 - r >= 0:
            window -= a[i - 2 - r]
        a[i] = window + (1 if i <= r else 0)
    return a[m]


def longest_run_class_probs(block: int, classes) -> np.ndarray:
    """Exact class probabilities for the longest 1-run in a ``block``-bit string.

    ``classes`` lists the class anchors v_0..v_K; the first class means
    "longest run <= v_0", the last ">= v_K". Probabilities are computed from
    an exact integer recursion over 2**block strings and rounded only at the
    fifteenth decimal.
    """
    classes = list(classes)
    total = 1 << block
    probs = [_count_max_run_le(block, classes[0]) / total]
    for v in classes[1:-1]:
        probs.append((_count_max_run_le(block, v) - _count_max_run_le(block, v - 1)) / total)
    probs.append((total - _count_max_run_le(block, classes[-1] - 1)) / total)
    return np.array([round(p, 15) for p in probs])


# Constants of the implementation under audit (sts-2.1.2 longestRunOfOnes.c).
# The M=10000 row is only given to four decimals there, which is the defect
# the modified variant removes.
_LONGEST_RUN_CONFIG = (
    # (min n, block M, class anchors, original pi table)
    (750000, 10000, (10, 11, 12, 13, 14, 15, 16),
     (0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727)),
    (6272, 128, (4, 5, 6, 7, 8, 9),
     (0.1174035788, 0.242955959, 0.249363483, 0.17517706, 0.102701071, 0.112398847)),
    (128, 8, (1, 2, 3, 4),
     (0.21484375, 0.3671875, 0.23046875, 0.1875)),
)


def longest_run_test(bits: np.ndarray, variant: str = "original") -> TestOutcome:
    """Chi-square GOF on per-block longest 1-runs.

    variant="original" uses the audited constant table, "modified" the exact
    probabilities from `longest_run_class_probs`.
    """
    n = _check_block(bits, 128)
    for threshold, block, classes, pi_orig in _LONGEST_RUN_CONFIG:
        if n >= threshold:
            break
    nblocks = n // block
    if variant == "modified":
        pi = longest_run_class_probs(block, classes)
    elif variant == "original":
        pi = np.array(pi_orig)
    else:
        raise ConfigError(f"longest_run: unknown variant {variant!r}")
    runs = np.empty(nblocks, dtype=np.int64)
    _kernels.longest_one_runs(np.ascontiguousarray(bits[: nblocks * block]), block, runs)
    lo, hi = classes[0], classes[-1]
    nu = np.bincount(np.clip(runs, lo, hi) - lo, minlength=hi - lo + 1)
    expected = nblocks * pi
    chi2 = float(np.sum((nu - expected) ** 2 / expected))
    k = len(classes) - 1
    return TestOutcome((igamc(k / 2.0, chi2 / 2.0),))


# ---------------------------------------------------------------------------
# Binary matrix rank


@lru_cache(maxsize=None)
def _rank_probs(m: int = 32) -> tuple[float, float, float]:
    """P(rank = m), P(rank = m-1), P(rank <= m-2) for a random m x m GF(2) matrix."""

    def prob(r: int) -> float:
        log2p = r * (2 * m - r) - m * m
        p = 2.0 ** log2p
        for i in range(r):
            p *= (1.0 - 2.0 ** (i - m)) ** 2 / (1.0 - 2.0 ** (i - r))
        return p

    p_full, p_minus1 = prob(m), prob(m - 1)
    return p_full, p_minus1, 1.0 - p_full - p_minus1


def binary_matrix_rank_test(bits: np.ndarray) -> TestOutcome:
    """GF(2) rank distribution of disjoint 32x32 bit matrices."""
    n = _check_block(bits, 38 * 1024)
    nmat = n // 1024
    mats = bits[: nmat * 1024].reshape(nmat, 32, 32)
    rows = np.ascontiguousarray(np.packbits(mats, axis=2)).view(">u4")[:, :, 0].astype(np.uint32)
    ranks = np.empty(nmat, dtype=np.int64)
    _kernels.gf2_rank_32x32(np.ascontiguousarray(rows), ranks)
    p_full, p_minus1, p_rest = _rank_probs(32)
    nu = np.array(
        [np.count_nonzero(ranks == 32), np.count_nonzero(ranks == 31), np.count_nonzero(ranks <= 30)]
    )
    expected = nmat * np.array([p_full, p_minus1, p_rest])
    chi2 = float(np.sum((nu - expected) ** 2 / expected))
    return TestOutcome((igamc(1.0, chi2 / 2.0),))


# ---------------------------------------------------------------------------
# Spectral (DFT) test


def dft_statistic(bits: np.ndarray, d: float) -> float:
    """Normalized count of low DFT peaks; N(0,1) under the d-variance model."""
    n = _check_block(bits, 2)
    if n % 2:
        raise ConfigError("dft: n must be even")
    if d <= 0:
        raise ConfigError("dft: d must be positive")
    x = bits.astype(np.float64) * 2.0 - 1.0
    mags = np.abs(rfft(x)[: n // 2])
    threshold = math.sqrt(n * math.log(1.0 / 0.05))
    observed = int(np.count_nonzero(mags < threshold))
    return (observed - 0.95 * n / 2.0) / math.sqrt(n * 0.95 * 0.05 / d)


def dft_test(bits: np.ndarray, d: float = 4.0) -> TestOutcome:
    """Two-sided p-value for the spectral statistic.

    d=4 is the audited suite's variance divisor (Kim et al.); the modified
    variant uses d=3.8 as proposed by Pareschi et al. for n around 1e6.
    """
    stat = dft_statistic(bits, d)
    return TestOutcome((erfc(abs(stat) / math.sqrt(2.0)),))


# ---------------------------------------------------------------------------
# Template matching


def _window_values(bits: np.ndarray, m: int) -> np.ndarray:
    """Integer value of every length-m window (MSB-first), overlapping."""
    count = bits.size - m + 1
    v = np.zeros(count, dtype=np.int64)
    for b in range(m):
        v = (v << 1) | bits[b : b + count]
    return v


@lru_cache(maxsize=None)
def aperiodic_templates(m: int) -> tuple[int, ...]:
    """All m-bit templates that cannot overlap a shifted copy of themselves.

    A template is kept iff no proper prefix equals the same-length suffix,
    so two occurrences can never overlap and non-overlapping occurrence
    counting reduces to plain counting. Enumeration order is ascending
    integer value, matching the usual template tables.
    """
    out = []
    for t in range(1 << m):
        for size in range(1, m):
            if (t >> (m - size)) == (t & ((1 << size) - 1)):
                break
        else:
            out.append(t)
    return tuple(out)


def non_overlapping_templates_test(bits: np.ndarray, m: int = 9) -> TestOutcome:
    """One p-value per aperiodic m-bit template (148 templates for m=9)."""
    n = _check_block(bits, 8 * (m + 1))
    nblocks = 8
    block = n // nblocks
    templates = np.array(aperiodic_templates(m))
    v = _window_values(bits[: nblocks * block], m)
    counts = np.empty((nblocks, templates.size), dtype=np.int64)
    for j in range(nblocks):
        seg = v[j * block : j * block + block - m + 1]
        counts[j] = np.bincount(seg, minlength=1 << m)[templates]
    mean = (block - m + 1) / 2.0 ** m
    var = block * (2.0 ** -m - (2.0 * m - 1.0) * 2.0 ** (-2.0 * m))
    chi2 = ((counts - mean) ** 2 / var).sum(axis=0)
    pvalues = tuple(igamc(nblocks / 2.0, c / 2.0) for c in chi2)
    return TestOutcome(pvalues)


@lru_cache(maxsize=None)
def overlap_occurrence_probs(m: int, window: int, top: int = 5) -> tuple[float, ...]:
    """Exact distribution of overlapping all-ones-template counts in a window.

    Counts occurrences of the m-bit all-ones template across a ``window``-bit
    string, classes {0, 1, ..., top-1, >= top}, by integer dynamic
    programming over (trailing 1-run, capped count) states. Exact up to the
    final division by 2**window.
    """
    # state[t][c], t = trailing ones capped at m, c = occurrences capped at top
    state = [[0] * (top + 1) for _ in range(m + 1)]
    state[0][0] = 1
    for _ in range(window):
        nxt = [[0] * (top + 1) for _ in range(m + 1)]
        for t in range(m + 1):
            row = state[t]
            t1 = min(t + 1, m)
            bump = 1 if t + 1 >= m else 0
            for c in range(top + 1):
                cnt = row[c]
                if not cnt:
                    continue
                nxt[0][c] += cnt
                nxt[t1][min(c + bump, top)] += cnt
        state = nxt
    total = 1 << window
    sums = [sum(state[t][c] for t in range(m + 1)) for c in range(top + 1)]
    return tuple(s / total for s in sums)


def _otm_legacy_probs(m: int, window: int, k: int = 5) -> np.ndarray:
    """Occurrence-class probabilities from the audited suite's formula.

    Transcribed from sts-2.1.2 overlappingTemplateMatchings.c (Pr(u, eta)),
    which overwrites the accurate table with these values; the original
    variant reproduces that behaviour.
    """
    lam = (window - m + 1) / 2.0 ** m
    eta = lam / 2.0
    pi = np.empty(k + 1)
    pi[0] = math.exp(-eta)
    for u in range(1, k):
        s = 0.0
        for l in range(1, u + 1):
            s += math.exp(
                -eta
                - u * LN2
                + l * math.log(eta)
                - math.lgamma(l + 1)
                + math.lgamma(u)
                - math.lgamma(l)
                - math.lgamma(u - l + 1)
            )
        pi[u] = s
    pi[k] = 1.0 - pi[:k].sum()
    return pi


def overlapping_template_test(
    bits: np.ndarray, variant: str = "original", m: int = 9, window: int = 1032
) -> TestOutcome:
    """Chi-square GOF on overlapping all-ones-template counts per window."""
    n = _check_block(bits, window)
    nblocks = n // window
    k = 5
    if variant == "modified":
        pi = np.array(overlap_occurrence_probs(m, window, k))
    elif variant == "original":
        pi = _otm_legacy_probs(m, window, k)
    else:
        raise ConfigError(f"overlapping_template: unknown variant {variant!r}")
    used = bits[: nblocks * window]
    cs = np.concatenate([[0], np.cumsum(used, dtype=np.int64)])
    hits = (cs[m:] - cs[:-m]) == m  # window sum == m at each start
    cum = np.concatenate([[0], np.cumsum(hits, dtype=np.int64)])
    starts = np.arange(nblocks) * window
    counts = cum[starts + window - m + 1] - cum[starts]
    nu = np.bincount(np.clip(counts, 0, k), minlength=k + 1)
    expected = nblocks * pi
    chi2 = float(np.sum((nu - expected) ** 2 / expected))
    return TestOutcome((igamc(k / 2.0, chi2 / 2.0),))


# ---------------------------------------------------------------------------
# Maurer / Coron universal statistical test

# Tabulated mean and per-sample variance of log2(gap) used by the audited
# suite (sts-2.1.2 universal.c for L >= 6, Maurer 1992 Table 3 below that).
_UNIVERSAL_TABLE = {
    3: (2.4016068, 1.901), 4: (3.3112247, 2.358), 5: (4.2534266, 2.705),
    6: (5.2177052, 2.954), 7: (6.1962507, 3.125), 8: (7.1836656, 3.238),
    9: (8.1764248, 3.311), 10: (9.1723243, 3.356), 11: (10.170032, 3.384),
    12: (11.168765, 3.401), 13: (12.168070, 3.410), 14: (13.167693, 3.416),
    15: (14.167488, 3.419), 16: (15.167379, 3.421),
}


def universal_params(n: int) -> tuple[int, int, int]:
    """(L, Q, K) selection by sample size, the audited rule n >= 1010*2^L*L.

    The audited suite only tables L >= 6 (n >= 387840); the same threshold
    formula is extended down to L = 3 so reduced-scale runs stay possible.
    """
    L = 0
    for cand in range(16, 2, -1):
        if n >= 1010 * (1 << cand) * cand:
            L = cand
            break
    if L == 0:
        raise InsufficientInputError(1010 * 8 * 3, n)
    q = 10 * (1 << L)
    return L, q, n // L - q


@lru_cache(maxsize=None)
def universal_expected_stats(L: int) -> tuple[float, float]:
    """Mean and variance of log2(gap) for geometric gaps with p = 2^-L.

    E = sum_{i>=1} 2^-L (1-2^-L)^(i-1) log2 i, truncated once the remaining
    tail is below 1e-12 relative; the variance uses the same weights. These
    are the exact values the audited table approximates.
    """
    p = 2.0 ** -L
    imax = int(math.ceil((math.log(1e-14) - math.log(64.0)) / math.log1p(-p))) + 16
    i = np.arange(1, imax + 1, dtype=np.float64)
    w = p * np.exp(np.log1p(-p) * (i - 1.0))
    lg = np.log2(i)
    e = float(np.sum(w * lg))
    var = float(np.sum(w * lg * lg) - e * e)
    return e, var


def universal_statistic(bits: np.ndarray, L: int, q: int, k: int) -> float:
    """Mean log2 distance to the previous occurrence of each L-bit block.

    Blocks are numbered from one; the q initialization blocks seed the
    last-occurrence table and the statistic averages over the k test blocks,
    with never-seen blocks measured from position zero.
    """
    nblocks = q + k
    v = bits[: nblocks * L].reshape(nblocks, L) @ (1 << np.arange(L - 1, -1, -1))
    order = np.argsort(v, kind="stable")
    prev = np.full(nblocks, -1, dtype=np.int64)
    same = v[order][1:] == v[order][:-1]
    prev[order[1:]] = np.where(same, order[:-1], -1)
    idx = np.arange(q, nblocks)
    dist = (idx - prev[q:]).astype(np.float64)
    return float(np.sum(np.log2(dist))) / k


def universal_test(bits: np.ndarray, variant: str = "original") -> TestOutcome:
    """Two-sided normal p-value for the mean log2 block distance.

    The original variant uses the audited table constants; the modified one
    recomputes the exact expectation and variance from the geometric series
    (Coron's exact-expectation refinement). Both apply the finite-K
    correction factor c(L,K) = 0.7 - 0.8/L + (4 + 32/L) K^(-3/L) / 15 from
    the audited suite; Coron's sharper variance correction differs below the
    tabulated precision for these K.
    """
    n = int(bits.size)
    L, q, k = universal_params(n)
    if variant == "original":
        mean, var = _UNIVERSAL_TABLE[L]
    elif variant == "modified":
        mean, var = universal_expected_stats(L)
    else:
        raise ConfigError(f"universal: unknown variant {variant!r}")
    f = universal_statistic(bits, L, q, k)
    c = 0.7 - 0.8 / L + (4.0 + 32.0 / L) * k ** (-3.0 / L) / 15.0
    sigma = c * math.sqrt(var / k)
    return TestOutcome((erfc(abs(f - mean) / (math.sqrt(2.0) * sigma)),))


# ---------------------------------------------------------------------------
# Entropy / serial


def _phi(bits: np.ndarray, m: int) -> float:
    if m == 0:
        return 0.0
    n = bits.size
    ext = np.concatenate([bits, bits[: m - 1]]) if m > 1 else bits
    counts = np.bincount(_window_values(ext, m), minlength=1 << m)
    nz = counts[counts > 0].astype(np.float64)
    return float(np.sum(nz / n * np.log(nz / n)))


def approximate_entropy_test(bits: np.ndarray, m: int = 10) -> TestOutcome:
    """Compares m and (m+1)-block entropies against the i.i.d. limit ln 2."""
    n = _check_block(bits, 1 << (m + 2))
    apen = _phi(bits, m) - _phi(bits, m + 1)
    chi2 = 2.0 * n * (LN2 - apen)
    return TestOutcome((igamc(2.0 ** (m - 1), chi2 / 2.0),))


def _psi_sq(bits: np.ndarray, m: int) -> float:
    if m <= 0:
        return 0.0
    n = bits.size
    ext = np.concatenate([bits, bits[: m - 1]]) if m > 1 else bits
    counts = np.bincount(_window_values(ext, m), minlength=1 << m).astype(np.float64)
    return float(2.0 ** m / n * np.sum(counts ** 2) - n)


def serial_test(bits: np.ndarray, m: int = 16) -> TestOutcome:
    """First and second difference of psi^2 over m-bit patterns (two p-values)."""
    if m < 3:
        raise ConfigError("serial: m must be >= 3")
    n = _check_block(bits, 1 << (m + 2))
    psi_m = _psi_sq(bits, m)
    psi_1 = _psi_sq(bits, m - 1)
    psi_2 = _psi_sq(bits, m - 2)
    d1 = psi_m - psi_1
    d2 = psi_m - 2.0 * psi_1 + psi_2
    p1 = igamc(2.0 ** (m - 2), d1 / 2.0)
    p2 = igamc(2.0 ** (m - 3), d2 / 2.0)
    return TestOutcome((p1, p2))


# ---------------------------------------------------------------------------
# Linear complexity

# Limiting class probabilities for T: exact rationals 1/96 .. 1/48.
_LC_PI = np.array([1 / 96, 1 / 32, 1 / 8, 1 / 2, 1 / 4, 1 / 16, 1 / 48])
_LC_EDGES = np.array([-2.5, -1.5, -0.5, 0.5, 1.5, 2.5])


def linear_complexity_test(bits: np.ndarray, block: int = 500) -> TestOutcome:
    """Berlekamp-Massey linear complexity per block, 7-class chi-square."""
    n = _check_block(bits, block)
    nblocks = n // block
    lengths = np.empty(nblocks, dtype=np.int64)
    _kernels.berlekamp_massey_lengths(np.ascontiguousarray(bits[: nblocks * block]), block, lengths)
    sign = -1.0 if block % 2 else 1.0
    mu = block / 2.0 + (9.0 - sign) / 36.0 - (block / 3.0 + 2.0 / 9.0) / 2.0 ** block
    t = sign * (lengths - mu) + 2.0 / 9.0
    nu = np.bincount(np.searchsorted(_LC_EDGES, t, side="left"), minlength=7)
    expected = nblocks * _LC_PI
    chi2 = float(np.sum((nu - expected) ** 2 / expected))
    return TestOutcome((igamc(3.0, chi2 / 2.0),))


# ---------------------------------------------------------------------------
# Random excursions family

REX_STATES = (-4, -3, -2, -1, 1, 2, 3, 4)
REV_STATES = tuple(x for x in range(-9, 10) if x != 0)


@dataclass(frozen=True)
class WalkSummary:
    """Cycle structure of the cumulative +-1 walk over one block.

    ``nu[i, k]`` counts cycles visiting REX_STATES[i] exactly k times
    (k = 5 means five or more); ``xi[i]`` is the total number of visits to
    REV_STATES[i] across all cycles. sum_k nu[i, k] == cycles for every i.
    """

    cycles: int
    nu: np.ndarray  # (8, 6)
    xi: np.ndarray  # (18,)


def walk_summary(bits: np.ndarray) -> WalkSummary:
    _check_block(bits, 1)
    s = np.cumsum(bits.astype(np.int64) * 2 - 1)
    zero_mask = s == 0
    nzeros = int(np.count_nonzero(zero_mask))
    cycles = nzeros + 1
    # cycle of position i = number of zeros strictly before i
    cycle_id = np.zeros(s.size, dtype=np.int64)
    np.cumsum(zero_mask[:-1], dtype=np.int64, out=cycle_id[1:])
    # the walk spends only O(sqrt(n)) steps within +-9 of the origin
    near = np.abs(s) <= 9
    sv = s[near]
    cv = cycle_id[near]
    hist = np.bincount(sv + 9, minlength=19)
    xi = np.array([hist[x + 9] for x in REV_STATES], dtype=np.int64)
    nu = np.zeros((len(REX_STATES), 6), dtype=np.int64)
    for i, x in enumerate(REX_STATES):
        per_cycle = np.bincount(cv[sv == x], minlength=cycles)
        nu[i] = np.bincount(np.minimum(per_cycle, 5), minlength=6)
    return WalkSummary(cycles=cycles, nu=nu, xi=xi)


def excursion_visit_prob(x: int, k: int) -> float:
    """P(a cycle visits state x exactly k times), k = 5 meaning >= 5."""
    ax = abs(x)
    if not 1 <= ax <= 4 or not 0 <= k <= 5:
        raise ConfigError(f"excursion_visit_prob: bad (x={x}, k={k})")
    half = 1.0 - 1.0 / (2.0 * ax)
    if k == 0:
        return half
    if k == 5:
        return (1.0 / (2.0 * ax)) * half ** 4
    return 1.0 / (4.0 * ax * ax) * half ** (k - 1)


def random_excursions_test(summary: WalkSummary, j_min: int = 500) -> TestOutcome:
    """Per-state chi-square over visit-count classes; discards when J < j_min.

    j_min=500 is the audited default; 2000 is the recommended stronger
    constraint for n = 1e7.
    """
    if j_min < 1:
        raise ConfigError("random_excursions: j_min must be >= 1")
    j = summary.cycles
    if j < j_min:
        return TestOutcome((), discarded=True, discard_reason={"J": j, "J_min": j_min})
    pvalues = []
    for i, x in enumerate(REX_STATES):
        pi = np.array([excursion_visit_prob(x, k) for k in range(6)])
        expected = j * pi
        chi2 = float(np.sum((summary.nu[i] - expected) ** 2 / expected))
        pvalues.append(igamc(2.5, chi2 / 2.0))
    return TestOutcome(tuple(pvalues))


def random_excursions_variant_test(summary: WalkSummary, j_min: int = 500) -> TestOutcome:
    """Two-sided normal test of total visit counts; discards when J < j_min.

    j_min=500 is the audited default; 1000 is the recommended stronger
    constraint.
    """
    if j_min < 1:
        raise ConfigError("random_excursions_variant: j_min must be >= 1")
    j = summary.cycles
    if j < j_min:
        return TestOutcome((), discarded=True, discard_reason={"J": j, "J_min": j_min})
    pvalues = []
    for i, x in enumerate(REV_STATES):
        z = (float(summary.xi[i]) - j) / math.sqrt(j * (4.0 * abs(x) - 2.0))
        pvalues.append(erfc(abs(z) / math.sqrt(2.0)))
    return TestOutcome(tuple(pvalues))
