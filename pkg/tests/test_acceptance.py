"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Criteria 5 and 6 assert detection thresholds for the original sample-corr
and spectral statistics at batch size N in {100, 50}. Those two statistics
are miscalibrated by only ~4% in standard deviation, which shifts the
per-batch count distribution by well under one count at N=100; a power
calculation (and direct simulation) puts the probability of reaching the
stated thresholds at that scale below 1e-3. The assertions are kept exactly
as stated rather than weakened, so those two checks fail honestly; the
extended-tier test at the end demonstrates the same detection succeeding at
the batch size the headline results used (N=1000).
"""

import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad

from rngaudit import cli
from rngaudit.bitstream import GeneratorSpec
from rngaudit.harness import (
    _batch_pvalues_generic,
    TESTS,
    build_categories,
    run_three_level,
    uniformity_gof,
)
from rngaudit.nist import (
    TestDescriptor,
    excursion_visit_prob,
    longest_run_class_probs,
    overlap_occurrence_probs,
    walk_summary,
)
from rngaudit.numerics import binom_pmf_vector, chi2_sf, erfc
from rngaudit.tu01 import savir2_cell_probs

import _refs

MT = GeneratorSpec("mt19937")


def report(num, ok, detail):
    print(f"ACCEPTANCE {num:>2}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


def test_criterion_01_null_calibration():
    """Identity test at the reference scale: uniform third-level p-values."""
    start = time.perf_counter()
    cats = build_categories(1000, 0.01, 1000)
    p3s = []
    for run in range(20):
        rep = run_three_level(
            TestDescriptor("identity", 32), MT, N=1000, Nprime=1000,
            master_seed=b"null-calibration-%02d" % run, categories=cats,
        )[0]
        p3s.append(rep.pvalue3)
    elapsed = time.perf_counter() - start
    _, p_unif = uniformity_gof(np.array(p3s))
    ok = (
        all(p > 1e-6 for p in p3s)
        and p_unif > 1e-4
        and elapsed < 60.0
    )
    assert report(1, ok, f"min p3={min(p3s):.3g}, uniformity p={p_unif:.3g}, {elapsed:.0f}s")


def test_criterion_02_reference_categorization():
    cat = build_categories(1000, 0.01, 1000, 5.0)
    bounds = list(zip(cat.lows, cat.highs))
    want = [(0, 981)] + [(v, v) for v in range(982, 997)] + [(997, 1000)]
    mode = int(np.argmax(cat.probs))
    ok = (
        bounds == want
        and abs(cat.probs.sum() - 1.0) <= 1e-12
        and bounds[mode] == (990, 990)
    )
    assert report(2, ok, f"{len(cat)} categories, sum={cat.probs.sum():.15f}, mode={bounds[mode]}")


def test_criterion_03_minimum_visit_probability():
    value = excursion_visit_prob(4, 4)
    ok = abs(value - 0.0105) <= 5e-5
    assert report(3, ok, f"pi_4(4)={value:.6f}")


def test_criterion_04_string_run_detection():
    """Original normal run statistic (variance 8n instead of 4n) must be caught."""
    kwargs = dict(N=100, Nprime=100, master_seed=b"string-run-detect")
    orig = run_three_level(TestDescriptor("string_run", 10**5, "original"), MT, **kwargs)[0]
    mod = run_three_level(TestDescriptor("string_run", 10**5, "modified"), MT, **kwargs)[0]
    p_mod = mod.pvalue3
    if p_mod <= 1e-4:  # one retry permitted
        p_mod = run_three_level(
            TestDescriptor("string_run", 10**5, "modified"), MT,
            N=100, Nprime=100, master_seed=b"string-run-detect-retry",
        )[0].pvalue3
    ok = orig.pvalue3 < 1e-10 and p_mod > 1e-4
    assert report(4, ok, f"original p3={orig.pvalue3_str}, modified p3={p_mod:.3g}")


def test_criterion_05_sample_corr_detection():
    """Original lag-correlation standardization (1/12 vs true 13/144) at N=100.

    Kept exactly as stated; see the module docstring for why the original
    side cannot reach 1e-10 at this batch size.
    """
    kwargs = dict(N=100, Nprime=100, master_seed=b"sample-corr-detect")
    orig = run_three_level(TestDescriptor("sample_corr", 10**6, "original"), MT, **kwargs)[0]
    mod = run_three_level(TestDescriptor("sample_corr", 10**6, "modified"), MT, **kwargs)[0]
    ok_mod = mod.pvalue3 > 1e-4
    ok_orig = orig.pvalue3 < 1e-10
    report(5, ok_mod and ok_orig,
           f"original p3={orig.pvalue3:.3g} (<1e-10 required), modified p3={mod.pvalue3:.3g}")
    assert ok_mod, f"modified variant p3={mod.pvalue3:.3g} should be unsuspicious"
    assert ok_orig, (
        f"original variant p3={orig.pvalue3:.3g} did not reach 1e-10: the 4.1% "
        "z-inflation moves the count distribution too little at N=100 "
        "(detection power ~2.5e-3 at this scale; see notes and the extended check)"
    )


@pytest.mark.extended
def test_criterion_06_dft_detection():
    """Spectral test d=4 vs d=3.8 at n=1e6, N=100, N'=50 (extended tier).

    Kept exactly as stated; the true variance ratio 4/3.8 shifts the count
    distribution by ~0.2 counts at N=100, far below what N'=50 batches can
    expose, so the original side fails honestly (power ~2e-4).
    """
    start = time.perf_counter()
    kwargs = dict(N=100, Nprime=50, master_seed=b"dft-detect")
    orig = run_three_level(TestDescriptor("dft", 10**6, "original"), MT, **kwargs)[0]
    mod = run_three_level(TestDescriptor("dft", 10**6, "modified"), MT, **kwargs)[0]
    elapsed = time.perf_counter() - start
    ok_mod = mod.pvalue3 > 1e-4
    ok_orig = orig.pvalue3 < 1e-6
    report(6, ok_mod and ok_orig and elapsed < 1800,
           f"original p3={orig.pvalue3:.3g} (<1e-6 required), modified p3={mod.pvalue3:.3g}, {elapsed:.0f}s")
    assert elapsed < 1800
    assert ok_mod, f"modified variant p3={mod.pvalue3:.3g} should be unsuspicious"
    assert ok_orig, (
        f"original variant p3={orig.pvalue3:.3g} did not reach 1e-6 at N=100, N'=50 "
        "(see module docstring; the extended sample-corr check shows the same "
        "machinery detecting at N=1000)"
    )


def test_criterion_07_probability_oracles():
    checks = []
    for m, anchors in ((8, (1, 2, 3, 4)), (2, (0, 1, 2))):
        counts = _refs.longest_run_class_counts(m, list(anchors))
        got = longest_run_class_probs(m, anchors)
        checks.append(np.array_equal(got, np.array(counts) / 2.0 ** m))
    for m, window in ((2, 4), (2, 6)):
        counts = _refs.overlap_class_counts(m, window)
        got = overlap_occurrence_probs(m, window)
        checks.append(list(got) == [c / 2.0 ** window for c in counts])
    ok = all(checks)
    assert report(7, ok, f"longest-run + overlap enumerations exact: {checks}")


def test_criterion_08_savir2_probabilities():
    exact = savir2_cell_probs(2, 2).tolist() == [0.75, 0.25]
    probs = [Fraction(1, 4)] * 4
    for _ in range(2):
        probs = [sum(probs[j] / (j + 1) for j in range(k, 4)) for k in range(4)]
    got = savir2_cell_probs(4, 3)
    close = max(abs(g - float(w)) for g, w in zip(got, probs)) <= 1e-15
    ok = exact and close
    assert report(8, ok, f"(2,2) exact={exact}, (4,3) max err={max(abs(g - float(w)) for g, w in zip(got, probs)):.2e}")


def test_criterion_09_numerics():
    quad_val = quad(lambda t: t**7 * math.exp(-t), 16.0, np.inf, limit=200)[0] / math.gamma(8.0)
    chi_ok = abs(chi2_sf(16, 32.0) - quad_val) < 1e-8

    series = 0.0
    for k in range(40):
        series += (-1) ** k / (math.factorial(k) * (2 * k + 1))
    erfc_series = 1.0 - 2.0 / math.sqrt(math.pi) * series
    erfc_ok = abs(erfc(1.0) - erfc_series) / erfc_series < 1e-12

    pmf_ok = abs(binom_pmf_vector(1000, 0.99).sum() - 1.0) < 1e-10
    ok = chi_ok and erfc_ok and pmf_ok
    assert report(9, ok, f"chi2_sf={chi_ok}, erfc={erfc_ok}, binom sum={pmf_ok}")


def test_criterion_10_determinism_across_threads(tmp_path):
    start = time.perf_counter()
    args = ["--suite", "nist", "--tier", "desk", "--generator", "mt19937",
            "--seed", "deadbeef01234567"]
    code1 = cli.main(args + ["--threads", "1", "--out", str(tmp_path / "t1")])
    code8 = cli.main(args + ["--threads", "8", "--out", str(tmp_path / "t8")])
    elapsed = time.perf_counter() - start
    b1 = (tmp_path / "t1" / "report.jsonl").read_bytes()
    b8 = (tmp_path / "t8" / "report.jsonl").read_bytes()
    nrec = len(b1.splitlines())
    ok = code1 == 0 and code8 == 0 and b1 == b8 and elapsed < 600.0
    assert report(10, ok, f"{nrec} records, identical={b1 == b8}, {elapsed:.0f}s")


def test_criterion_11_excursions_plumbing():
    desc = TestDescriptor("random_excursions", 10**6, params={"J_min": 500})
    # one batch, inspected structurally: exactly N outcomes, all with 8 p-values
    pv, discards = _batch_pvalues_generic(
        TESTS["random_excursions"], desc, MT, b"excursion-plumbing", 0, 30, 8, None
    )
    structural = pv.shape == (30, 8) and not np.isnan(pv).any()

    reps = run_three_level(desc, MT, N=30, Nprime=20, master_seed=b"excursion-plumbing")
    counted = reps[0].discard_count > 0 and all(len(r.T) == 20 for r in reps)

    rng = np.random.default_rng(0xACCE55)
    partition = True
    for _ in range(10**4):
        bits = rng.integers(0, 2, size=int(rng.integers(1, 2000)), dtype=np.uint8)
        w = walk_summary(bits)
        if not (w.nu.sum(axis=1) == w.cycles).all():
            partition = False
            break
    ok = structural and counted and partition
    assert report(
        11, ok,
        f"batch shape ok={structural}, discards={reps[0].discard_count}, partition={partition}",
    )


@pytest.mark.extended
def test_extended_sample_corr_detection_at_reference_batch_size():
    """The criterion-5 detection succeeds once N matches the headline scale."""
    start = time.perf_counter()
    rep = run_three_level(
        TestDescriptor("sample_corr", 10**6, "original"), MT,
        N=1000, Nprime=100, master_seed=b"sample-corr-n1000",
    )[0]
    elapsed = time.perf_counter() - start
    ok = rep.pvalue3 < 1e-10
    assert report("5x", ok, f"original p3={rep.pvalue3_str} at N=1000, N'=100, {elapsed:.0f}s")
