"""Two- and three-level meta-test machinery over the first-level tests.

The three-level pipeline applies a first-level test N * N' times, counts per
batch of N how many p-values are >= alpha (an error-free integer statistic),
and compares the N' counts against B(N, 1-alpha) with a chi-square GOF. A
sound first-level approximation therefore yields a uniform third-level
p-value, while approximation error in the first level accumulates into an
extreme one.

Reproducibility contract: the N*N' applications are partitioned by
(batch, slot); slot s of batch b draws from the independently derived
stream index b*N + s, so reports are bit-identical for any thread count.
Discarded applications (random-excursions family below the cycle minimum)
retry on fresh bits from the same stream until an outcome is produced.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import nist, tu01
from ._version import __version__
from .bitstream import (
    BitSource,
    ConfigError,
    GeneratorSpec,
    make_source,
    mt_first_word_batch,
    stream_seed32,
)
from .nist import TestDescriptor, TestOutcome
from .numerics import (
    binom_pmf_vector,
    chi2_sf,
    chi2_sf_log10_bound,
    clamp_pvalue,
    pvalue_repr,
)


class InapplicableTestError(RuntimeError):
    """Raised when nearly every first-level application is discarded."""


_MAX_CONSECUTIVE_DISCARDS = 200


# ---------------------------------------------------------------------------
# Categorization of second-level counts


@dataclass(frozen=True)
class Categorization:
    """Contiguous integer categories over 0..N with B(N, 1-alpha) masses."""

    lows: tuple[int, ...]
    highs: tuple[int, ...]
    probs: np.ndarray
    N: int
    alpha: float

    def __len__(self) -> int:
        return len(self.lows)

    def labels(self) -> list[str]:
        return [
            f"{lo}" if lo == hi else f"{lo}-{hi}"
            for lo, hi in zip(self.lows, self.highs)
        ]

    def index_of(self, t: np.ndarray) -> np.ndarray:
        return np.searchsorted(np.asarray(self.lows), t, side="right") - 1


def build_categories(N: int, alpha: float, Nprime: int, min_expect: float = 5.0) -> Categorization:
    """Categories for the count T ~ B(N, 1-alpha) at the third level.

    The reference configuration (N=1000, alpha=0.01, N'=1000) returns the
    canonical seventeen categories {0..981}, {982}, ..., {996}, {997..1000}.
    Any other configuration starts from singletons and greedily merges from
    both tails (then any remaining deficient cell) until every category has
    expected count N' * p >= min_expect.
    """
    if N < 10:
        raise ConfigError(f"build_categories: N must be >= 10, got {N}")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"build_categories: alpha must be in (0,1), got {alpha}")
    if min_expect < 1.0:
        raise ConfigError(f"build_categories: min_expect must be >= 1, got {min_expect}")
    pmf = binom_pmf_vector(N, 1.0 - alpha)
    if (N, alpha, Nprime) == (1000, 0.01, 1000):
        lows = [0] + list(range(982, 997)) + [997]
        highs = [981] + list(range(982, 997)) + [1000]
        probs = np.array([pmf[lo : hi + 1].sum() for lo, hi in zip(lows, highs)])
        return Categorization(tuple(lows), tuple(highs), probs, N, alpha)

    lows = list(range(N + 1))
    highs = list(range(N + 1))
    probs = list(pmf)

    def merge(i: int, j: int) -> None:
        # absorb cell j into cell i (adjacent)
        lo, hi = min(lows[i], lows[j]), max(highs[i], highs[j])
        probs[i] += probs[j]
        lows[i], highs[i] = lo, hi
        del lows[j], highs[j], probs[j]

    while len(probs) > 2 and Nprime * probs[0] < min_expect:
        merge(0, 1)
    while len(probs) > 2 and Nprime * probs[-1] < min_expect:
        merge(len(probs) - 1, len(probs) - 2)
    i = 0
    while i < len(probs):
        if Nprime * probs[i] < min_expect and len(probs) > 2:
            merge(i, i + 1 if i + 1 < len(probs) else i - 1)
            i = 0
        else:
            i += 1
    if len(probs) < 2 or any(Nprime * p < min_expect for p in probs):
        raise ConfigError(
            f"build_categories: cannot form >= 2 categories with expected counts >= {min_expect}"
        )
    return Categorization(tuple(lows), tuple(highs), np.array(probs), N, alpha)


def level2_count(pvalues, alpha: float) -> int:
    """Number of p-values >= alpha; exact integer arithmetic, ties count."""
    p = np.asarray(pvalues, dtype=np.float64)
    if p.size < 1:
        raise ConfigError("level2_count: empty p-value list")
    if np.any(p < 0.0) or np.any(p > 1.0) or np.any(np.isnan(p)):
        raise ValueError("level2_count: p-value outside [0,1] (level-1 bug)")
    return int(np.count_nonzero(p >= alpha))


def level3_gof(T, cat: Categorization) -> tuple[float, float, np.ndarray]:
    """(h, third-level p-value, category counts Y) for counts T."""
    t = np.asarray(T, dtype=np.int64)
    if np.any(t < 0) or np.any(t > cat.N):
        raise ValueError(f"level3_gof: count outside [0, {cat.N}]")
    idx = cat.index_of(t)
    y = np.bincount(idx, minlength=len(cat))
    expected = t.size * cat.probs
    h = float(np.sum((y - expected) ** 2 / expected))
    return h, chi2_sf(len(cat) - 1, h), y


def uniformity_gof(pvalues, bins: int = 10) -> tuple[float, float]:
    """Chi-square GOF of p-values against U[0,1] over equal-width bins."""
    p = np.asarray(pvalues, dtype=np.float64)
    counts = np.bincount(np.minimum((p * bins).astype(np.int64), bins - 1), minlength=bins)
    expected = p.size / bins
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    return chi2, chi2_sf(bins - 1, chi2)


# ---------------------------------------------------------------------------
# First-level test registry


@dataclass(frozen=True)
class TestDef:
    """Registry entry binding a test id to its runner and metadata."""

    __test__ = False  # not a pytest class

    test_id: str
    run: Callable[[TestDescriptor, BitSource], TestOutcome]
    arity: Callable[[TestDescriptor], int]
    stat_labels: Callable[[TestDescriptor], tuple[str, ...]]
    variants: tuple[str, ...] = ("original",)
    unit: str = "bits"  # what desc.n counts
    supports_jmin: bool = False
    can_discard: bool = False
    # default parameters the runner applies, for the config echo
    defaults: Callable[[TestDescriptor], dict] | None = None
    # optional fast path: p-values for a whole batch of MT streams at once
    mt_batch: Callable[[np.ndarray, TestDescriptor], np.ndarray] | None = None

    def resolved_params(self, desc: TestDescriptor) -> dict:
        out = self.defaults(desc) if self.defaults else {}
        out.update(desc.params)
        return out


def _single(label: str = "p"):
    return lambda desc: (label,)


def _serial_default_m(n: int) -> int:
    return min(16, max(3, n.bit_length() - 4))


def _apen_default_m(n: int) -> int:
    return min(10, max(2, n.bit_length() - 7))


def _identity_run(desc: TestDescriptor, src: BitSource) -> TestOutcome:
    return TestOutcome((src.uniform01(),))

def _identity_mt_batch(seeds: np.ndarray, desc: TestDescriptor) -> np.ndarray:
    return (mt_first_word_batch(seeds).astype(np.float64) / 4294967296.0).reshape(-1, 1)


def _frequency(desc, src):
    return nist.frequency_test(src.take_bits(desc.n))

def _block_frequency(desc, src):
    return nist.block_frequency_test(src.take_bits(desc.n), desc.param("block", 128))

def _cusum(desc, src):
    return nist.cumulative_sums_test(src.take_bits(desc.n))

def _runs(desc, src):
    return nist.runs_test(src.take_bits(desc.n))

def _longest_run(desc, src):
    return nist.longest_run_test(src.take_bits(desc.n), desc.variant)

def _rank(desc, src):
    return nist.binary_matrix_rank_test(src.take_bits(desc.n))

def _dft(desc, src):
    d = desc.param("d", 3.8 if desc.variant == "modified" else 4.0)
    return nist.dft_test(src.take_bits(desc.n), d)

def _notm(desc, src):
    return nist.non_overlapping_templates_test(src.take_bits(desc.n), desc.param("m", 9))

def _otm(desc, src):
    return nist.overlapping_template_test(
        src.take_bits(desc.n), desc.variant, desc.param("m", 9), desc.param("window", 1032)
    )

def _universal(desc, src):
    return nist.universal_test(src.take_bits(desc.n), desc.variant)

def _apen(desc, src):
    return nist.approximate_entropy_test(src.take_bits(desc.n), desc.param("m", _apen_default_m(desc.n)))

def _serial(desc, src):
    return nist.serial_test(src.take_bits(desc.n), desc.param("m", _serial_default_m(desc.n)))

def _linear_complexity(desc, src):
    return nist.linear_complexity_test(src.take_bits(desc.n), desc.param("block", 500))

def _excursions(desc, src):
    summary = nist.walk_summary(src.take_bits(desc.n))
    return nist.random_excursions_test(summary, desc.param("J_min", 500))

def _excursions_variant(desc, src):
    summary = nist.walk_summary(src.take_bits(desc.n))
    return nist.random_excursions_variant_test(summary, desc.param("J_min", 500))

def _sample_corr(desc, src):
    return tu01.sample_corr_from_source(src, desc.n, desc.param("k", 1), desc.variant)

def _string_run(desc, src):
    return tu01.string_run_test(src, desc.n, desc.variant, desc.param("min_expect", 5.0))

def _savir2(desc, src):
    params = tu01.SavirParams(
        m=desc.param("m", 1 << 20),
        t=desc.param("t", 9),
        n=desc.n,
        merge_threshold=desc.param("merge_threshold", 5.0),
    )
    return tu01.savir2_test(src, params)


def _notm_labels(desc):
    m = desc.param("m", 9)
    return tuple(format(t, f"0{m}b") for t in nist.aperiodic_templates(m))


TESTS: dict[str, TestDef] = {
    td.test_id: td
    for td in [
        TestDef("identity", _identity_run, lambda d: 1, _single(),
                mt_batch=_identity_mt_batch),
        TestDef("frequency", _frequency, lambda d: 1, _single()),
        TestDef("block_frequency", _block_frequency, lambda d: 1, _single(),
                defaults=lambda d: {"block": 128}),
        TestDef("cumulative_sums", _cusum, lambda d: 2,
                lambda d: ("forward", "backward")),
        TestDef("runs", _runs, lambda d: 1, _single()),
        TestDef("longest_run", _longest_run, lambda d: 1, _single(),
                variants=("original", "modified")),
        TestDef("binary_matrix_rank", _rank, lambda d: 1, _single()),
        TestDef("dft", _dft, lambda d: 1, _single(),
                variants=("original", "modified"),
                defaults=lambda d: {"d": 3.8 if d.variant == "modified" else 4.0}),
        TestDef("non_overlapping_templates", _notm,
                lambda d: len(nist.aperiodic_templates(d.param("m", 9))), _notm_labels,
                defaults=lambda d: {"m": 9}),
        TestDef("overlapping_template", _otm, lambda d: 1, _single(),
                variants=("original", "modified"),
                defaults=lambda d: {"m": 9, "window": 1032}),
        TestDef("universal", _universal, lambda d: 1, _single(),
                variants=("original", "modified")),
        TestDef("approximate_entropy", _apen, lambda d: 1, _single(),
                defaults=lambda d: {"m": _apen_default_m(d.n)}),
        TestDef("serial", _serial, lambda d: 2,
                lambda d: ("delta_psi2", "delta2_psi2"),
                defaults=lambda d: {"m": _serial_default_m(d.n)}),
        TestDef("linear_complexity", _linear_complexity, lambda d: 1, _single(),
                defaults=lambda d: {"block": 500}),
        TestDef("random_excursions", _excursions, lambda d: 8,
                lambda d: tuple(str(x) for x in nist.REX_STATES),
                supports_jmin=True, can_discard=True,
                defaults=lambda d: {"J_min": 500}),
        TestDef("random_excursions_variant", _excursions_variant, lambda d: 18,
                lambda d: tuple(str(x) for x in nist.REV_STATES),
                supports_jmin=True, can_discard=True,
                defaults=lambda d: {"J_min": 500}),
        TestDef("sample_corr", _sample_corr, lambda d: 1, _single(),
                variants=("original", "modified"), unit="reals",
                defaults=lambda d: {"k": 1}),
        TestDef("string_run", _string_run, lambda d: 2,
                lambda d: ("normal", "chi2"),
                variants=("original", "modified"), unit="run-pairs",
                defaults=lambda d: {"min_expect": 5.0}),
        TestDef("savir2", _savir2, lambda d: 1, _single(), unit="draws",
                defaults=lambda d: {"m": 1 << 20, "t": 9, "merge_threshold": 5.0}),
    ]
}


def get_test(test_id: str) -> TestDef:
    if test_id not in TESTS:
        raise ConfigError(f"unknown test {test_id!r} (known: {', '.join(sorted(TESTS))})")
    return TESTS[test_id]


def validate_descriptor(desc: TestDescriptor) -> TestDef:
    tdef = get_test(desc.test_id)
    if desc.variant not in tdef.variants:
        raise ConfigError(
            f"{desc.test_id}: variant {desc.variant!r} not available (has: {', '.join(tdef.variants)})"
        )
    if desc.n < 1:
        raise ConfigError(f"{desc.test_id}: n must be positive")
    if "J_min" in desc.params and not tdef.supports_jmin:
        raise ConfigError(f"{desc.test_id}: J_min only applies to the random-excursions family")
    return tdef


# ---------------------------------------------------------------------------
# Reports


@dataclass
class HarnessReport:
    """Flattened result of one three-level run for one statistic index."""

    test_id: str
    stat_index: int
    stat_label: str
    variant: str
    generator: str
    master_seed: str
    n: int
    N: int
    Nprime: int
    alpha: float
    params: dict
    categories: list[str]
    df: int
    T: list[int]
    Y: list[int]
    h: float
    pvalue3: float
    pvalue3_str: str
    pvalue3_log10_bound: float | None
    discard_count: int
    version: str = __version__
    elapsed_s: float = field(default=0.0, compare=False)

    def to_record(self) -> dict:
        # timing is intentionally excluded: records must be byte-identical
        # across runs and thread counts.
        return {
            "test_id": self.test_id,
            "stat_index": self.stat_index,
            "stat_label": self.stat_label,
            "variant": self.variant,
            "generator": self.generator,
            "master_seed": self.master_seed,
            "n": self.n,
            "N": self.N,
            "Nprime": self.Nprime,
            "alpha": self.alpha,
            "params": dict(sorted(self.params.items())),
            "categories": self.categories,
            "df": self.df,
            "T": self.T,
            "Y": self.Y,
            "h": self.h,
            "pvalue3": self.pvalue3,
            "pvalue3_str": self.pvalue3_str,
            "pvalue3_log10_bound": self.pvalue3_log10_bound,
            "discard_count": self.discard_count,
            "version": self.version,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), separators=(",", ":"))


@dataclass
class TwoLevelResult:
    """Second-level uniformity GOF over N first-level p-values."""

    test_id: str
    stat_index: int
    stat_label: str
    variant: str
    generator: str
    chi2: float
    pvalue: float
    discard_count: int


# ---------------------------------------------------------------------------
# Runners


def _collect_outcome(tdef: TestDef, desc: TestDescriptor, src: BitSource) -> tuple[TestOutcome, int]:
    discards = 0
    while True:
        outcome = tdef.run(desc, src)
        if not outcome.discarded:
            return outcome, discards
        discards += 1
        if discards >= _MAX_CONSECUTIVE_DISCARDS:
            raise InapplicableTestError(
                f"{desc.test_id}: test inapplicable at this n "
                f"({discards} consecutive discards, last reason {outcome.discard_reason})"
            )


def _batch_pvalues_generic(
    tdef: TestDef,
    desc: TestDescriptor,
    gen: GeneratorSpec,
    master_seed: bytes,
    batch: int,
    N: int,
    arity: int,
    shared_source: BitSource | None,
) -> tuple[np.ndarray, int]:
    pv = np.empty((N, arity), dtype=np.float64)
    discards = 0
    for slot in range(N):
        src = shared_source if shared_source is not None else make_source(
            gen, master_seed, batch * N + slot
        )
        outcome, d = _collect_outcome(tdef, desc, src)
        discards += d
        if len(outcome.pvalues) != arity:
            raise ValueError(
                f"{desc.test_id}: expected {arity} p-values, got {len(outcome.pvalues)}"
            )
        pv[slot] = outcome.pvalues
    return pv, discards


def _batch_pvalues_mt_fast(
    tdef: TestDef, desc: TestDescriptor, master_seed: bytes, batch: int, N: int
) -> tuple[np.ndarray, int]:
    seeds = np.fromiter(
        (stream_seed32(master_seed, batch * N + s) for s in range(N)),
        dtype=np.uint32,
        count=N,
    )
    return tdef.mt_batch(seeds, desc), 0


def run_three_level(
    desc: TestDescriptor,
    gen: GeneratorSpec,
    *,
    N: int,
    Nprime: int,
    alpha: float = 0.01,
    master_seed: bytes,
    categories: Categorization | None = None,
    min_expect: float = 5.0,
    threads: int = 1,
) -> list[HarnessReport]:
    """Full three-level run; one report per statistic index of the test."""
    import time

    if N < 1 or Nprime < 1:
        raise ConfigError("run_three_level: N and Nprime must be positive")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"run_three_level: alpha must be in (0,1), got {alpha}")
    tdef = validate_descriptor(desc)
    arity = tdef.arity(desc)
    cat = categories if categories is not None else build_categories(N, alpha, Nprime, min_expect)
    if cat.N != N or cat.alpha != alpha:
        raise ConfigError("run_three_level: categorization built for different (N, alpha)")

    start = time.perf_counter()
    use_fast = tdef.mt_batch is not None and gen.kind == "mt19937"
    shared_source = None
    if gen.kind == "file":
        # a file is one linear stream; slots consume it sequentially
        shared_source = make_source(gen, master_seed, 0)
        threads = 1

    def one_batch(b: int) -> tuple[np.ndarray, int]:
        if use_fast:
            pv, d = _batch_pvalues_mt_fast(tdef, desc, master_seed, b, N)
        else:
            pv, d = _batch_pvalues_generic(tdef, desc, gen, master_seed, b, N, arity, shared_source)
        t_b = np.array([level2_count(pv[:, i], alpha) for i in range(arity)], dtype=np.int64)
        return t_b, d

    T = np.empty((Nprime, arity), dtype=np.int64)
    discards = 0
    if threads > 1 and shared_source is None:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for b, (t_b, d) in enumerate(pool.map(one_batch, range(Nprime))):
                T[b] = t_b
                discards += d
    else:
        for b in range(Nprime):
            t_b, d = one_batch(b)
            T[b] = t_b
            discards += d
    elapsed = time.perf_counter() - start

    labels = tdef.stat_labels(desc)
    reports = []
    for i in range(arity):
        h, p3, y = level3_gof(T[:, i], cat)
        p3c = clamp_pvalue(p3)
        bound = None
        if p3 < 1e-300:
            bound = round(chi2_sf_log10_bound(len(cat) - 1, h), 3)
        reports.append(
            HarnessReport(
                test_id=desc.test_id,
                stat_index=i,
                stat_label=labels[i],
                variant=desc.variant,
                generator=gen.label(),
                master_seed=master_seed.hex(),
                n=desc.n,
                N=N,
                Nprime=Nprime,
                alpha=alpha,
                params=dict(desc.params),
                categories=cat.labels(),
                df=len(cat) - 1,
                T=T[:, i].tolist(),
                Y=y.tolist(),
                h=h,
                pvalue3=p3c,
                pvalue3_str=pvalue_repr(p3),
                pvalue3_log10_bound=bound,
                discard_count=discards,
                elapsed_s=elapsed,
            )
        )
    return reports


def run_two_level(
    desc: TestDescriptor,
    gen: GeneratorSpec,
    *,
    N: int,
    master_seed: bytes,
    bins: int = 10,
) -> list[TwoLevelResult]:
    """Single batch of N applications, then a uniformity GOF per statistic."""
    if N < bins:
        raise ConfigError(f"run_two_level: N must be >= {bins}")
    tdef = validate_descriptor(desc)
    arity = tdef.arity(desc)
    shared_source = make_source(gen, master_seed, 0) if gen.kind == "file" else None
    pv, discards = _batch_pvalues_generic(tdef, desc, gen, master_seed, 0, N, arity, shared_source)
    labels = tdef.stat_labels(desc)
    out = []
    for i in range(arity):
        chi2, p = uniformity_gof(pv[:, i], bins)
        out.append(
            TwoLevelResult(
                test_id=desc.test_id,
                stat_index=i,
                stat_label=labels[i],
                variant=desc.variant,
                generator=gen.label(),
                chi2=chi2,
                pvalue=p,
                discard_count=discards,
            )
        )
    return out
