"""TestU01-derived tests with known fixes: SampleCorr, string runs, Savir2.

* sample_corr: lagged product correlation of uniforms. The original form
  standardizes (1/(n-k)) sum(X_j X_{j+k} - 1/4) by variance 1/(12(n-k));
  the modified form is Fishman's centered statistic
  (1/(n-k)) sum((X_j - 1/2)(X_{j+k} - 1/2)) with variance 1/(144(n-k)),
  which is the correct asymptotic law.
* string_run: bits are consumed until 2n runs are complete. The normal
  statistic divides Y - 4n by sqrt(8n) originally; since Var[Y] = 4n the
  modified statistic divides by sqrt(4n). The chi-square statistic
  originally weights each run-length cell by n*p*(1-p); the modified one
  uses the plain Pearson weight n*p.
* savir2: nested ceiling chain I_s = ceil(I_{s-1} * U_s) compared against
  its exact distribution, with configurable chain depth t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bitstream import BitSource, ConfigError
from .nist import TestOutcome
from .numerics import chi2_sf, erfc


# ---------------------------------------------------------------------------
# Sample correlation


def sample_corr_statistic(reals: np.ndarray, k: int, variant: str) -> tuple[float, float]:
    """(statistic, z) for the lag-k sample correlation of uniforms."""
    n = int(reals.size)
    if k < 1:
        raise ConfigError("sample_corr: k must be >= 1")
    if n <= k:
        raise ConfigError(f"sample_corr: need n > k, got n={n}, k={k}")
    m = n - k
    if variant == "original":
        stat = float(reals[:-k] @ reals[k:]) / m - 0.25
        z = stat * math.sqrt(12.0 * m)
    elif variant == "modified":
        centered = reals - 0.5
        stat = float(centered[:-k] @ centered[k:]) / m
        z = stat * math.sqrt(144.0 * m)
    else:
        raise ConfigError(f"sample_corr: unknown variant {variant!r}")
    return stat, z


def sample_corr_test(reals: np.ndarray, k: int = 1, variant: str = "original") -> TestOutcome:
    """Two-sided normal p-value for the lag-k correlation statistic."""
    _, z = sample_corr_statistic(reals, k, variant)
    return TestOutcome((erfc(abs(z) / math.sqrt(2.0)),))


def sample_corr_from_source(source: BitSource, n: int, k: int = 1, variant: str = "original") -> TestOutcome:
    return sample_corr_test(source.uniform01_array(n), k, variant)


# ---------------------------------------------------------------------------
# String runs


@dataclass(frozen=True)
class RunCounts:
    """Run-length tallies for n run pairs: counts per length class and Y bits.

    ``x0[i]`` / ``x1[i]`` count 0-runs / 1-runs of length i+1, with the last
    class holding every longer run. ``total_bits`` is Y, the number of bits
    consumed to complete the 2n runs.
    """

    x0: np.ndarray
    x1: np.ndarray
    total_bits: int
    pairs: int


def collect_runs(source: BitSource, pairs: int, classes: int) -> RunCounts:
    """Consume bits until 2*pairs runs are complete; exactly Y bits are taken.

    Bits read past the end of the 2n-th run are pushed back to the source,
    so source.bits_consumed advances by exactly Y.
    """
    if pairs < 1:
        raise ConfigError("string_run: pairs must be >= 1")
    need = 2 * pairs
    chunks = []
    boundaries = 0
    last_bit = -1
    chunk = 4 * pairs + 8 * int(math.isqrt(pairs)) + 64
    while True:
        bits = source.take_bits(chunk)
        if chunks and bits[0] != last_bit:
            boundaries += 1
        boundaries += int(np.count_nonzero(bits[1:] != bits[:-1]))
        last_bit = int(bits[-1])
        chunks.append(bits)
        if boundaries >= need:
            break
        chunk = 2 * (need - boundaries) + 64
    bits = np.concatenate(chunks) if len(chunks) > 1 else chunks[0]
    trans = np.flatnonzero(bits[1:] != bits[:-1])
    ends = trans[:need]
    y = int(ends[-1]) + 1
    source.push_back(bits[y:])
    lengths = np.diff(np.concatenate([[-1], ends]))
    first = int(bits[0])
    lengths_first = lengths[0::2]  # runs of the first bit's value
    lengths_other = lengths[1::2]
    l0, l1 = (lengths_first, lengths_other) if first == 0 else (lengths_other, lengths_first)
    x0 = np.bincount(np.minimum(l0, classes), minlength=classes + 1)[1:]
    x1 = np.bincount(np.minimum(l1, classes), minlength=classes + 1)[1:]
    return RunCounts(x0=x0, x1=x1, total_bits=y, pairs=pairs)


def run_length_classes(pairs: int, min_expect: float = 5.0) -> int:
    """Largest class count keeping the lumped-tail expectation >= min_expect."""
    k = int(math.floor(math.log2(pairs / min_expect))) + 1
    return max(k, 2)


def string_run_test(source: BitSource, pairs: int, variant: str = "original",
                    min_expect: float = 5.0) -> TestOutcome:
    """Normal and chi-square run statistics over 2*pairs runs (two p-values).

    Degrees of freedom are 2k - 2 for k retained length classes per side
    (two multinomial sum constraints), with the tail class lumped so every
    expected count stays above ``min_expect``.
    """
    classes = run_length_classes(pairs, min_expect)
    rc = collect_runs(source, pairs, classes)
    if variant == "original":
        z = (rc.total_bits - 4.0 * pairs) / math.sqrt(8.0 * pairs)
    elif variant == "modified":
        z = (rc.total_bits - 4.0 * pairs) / math.sqrt(4.0 * pairs)
    else:
        raise ConfigError(f"string_run: unknown variant {variant!r}")
    p_normal = erfc(abs(z) / math.sqrt(2.0))

    probs = 0.5 ** np.arange(1, classes + 1)
    probs[-1] = 0.5 ** (classes - 1)  # lumped tail: P(length >= classes)
    expected = pairs * probs
    denom = expected * (1.0 - probs) if variant == "original" else expected
    chi2 = float(np.sum((rc.x0 - expected) ** 2 / denom) + np.sum((rc.x1 - expected) ** 2 / denom))
    p_chi2 = chi2_sf(2 * classes - 2, chi2)
    return TestOutcome((p_normal, p_chi2))


# ---------------------------------------------------------------------------
# Savir2


@dataclass(frozen=True)
class SavirParams:
    """Parameters of the nested-ceiling chain test."""

    m: int = 1 << 20
    t: int = 9
    n: int = 100000
    merge_threshold: float = 5.0

    def __post_init__(self):
        if self.m < 2:
            raise ConfigError("savir2: m must be >= 2")
        if self.t < 1:
            raise ConfigError("savir2: t must be >= 1")
        if self.n < 1:
            raise ConfigError("savir2: n must be >= 1")


def savir2_cell_probs(m: int, t: int) -> np.ndarray:
    """Exact distribution of I_t over 1..m.

    I_1 is uniform on 1..m and P(I_s = k) = sum_{j >= k} P(I_{s-1} = j) / j,
    evaluated by reversed cumulative sums.
    """
    if m < 2 or t < 1:
        raise ConfigError("savir2_cell_probs: need m >= 2, t >= 1")
    probs = np.full(m, 1.0 / m)
    inv = 1.0 / np.arange(1, m + 1, dtype=np.float64)
    for _ in range(t - 1):
        w = probs * inv
        probs = np.cumsum(w[::-1])[::-1]
    return probs


def merge_tail_cells(probs: np.ndarray, n: int, threshold: float) -> np.ndarray:
    """Group boundaries (start indices) merging from the high-value tail.

    Cells are grouped from the last (smallest-probability) cell downward;
    a group closes once its expected count reaches ``threshold``. Any
    leftover head mass joins the lowest group.
    """
    starts = []
    acc = 0.0
    for idx in range(probs.size - 1, -1, -1):
        acc += n * probs[idx]
        if acc >= threshold:
            starts.append(idx)
            acc = 0.0
    if not starts:
        raise ConfigError("savir2: sample too small to form any cell group")
    starts[-1] = 0  # leftover head cells fold into the lowest group
    return np.array(starts[::-1])


def savir2_test(source: BitSource, params: SavirParams) -> TestOutcome:
    """Chi-square GOF of generated I_t values against the exact cell law."""
    m, t, n = params.m, params.t, params.n
    values = np.ceil(m * source.uniform01_array(n)).astype(np.int64)
    np.maximum(values, 1, out=values)
    for _ in range(t - 1):
        values = np.ceil(values * source.uniform01_array(n)).astype(np.int64)
        np.maximum(values, 1, out=values)
    counts = np.bincount(values, minlength=m + 1)[1:]
    probs = savir2_cell_probs(m, t)
    starts = merge_tail_cells(probs, n, params.merge_threshold)
    grouped_obs = np.add.reduceat(counts, starts)
    grouped_exp = n * np.add.reduceat(probs, starts)
    chi2 = float(np.sum((grouped_obs - grouped_exp) ** 2 / grouped_exp))
    return TestOutcome((chi2_sf(len(starts) - 1, chi2),))
