import math
from fractions import Fraction

import numpy as np
import pytest

from rngaudit import tu01
from rngaudit.bitstream import ConfigError, FileSource, MtSource
from rngaudit.tu01 import (
    SavirParams,
    collect_runs,
    merge_tail_cells,
    run_length_classes,
    sample_corr_statistic,
    sample_corr_test,
    savir2_cell_probs,
    savir2_test,
    string_run_test,
)


def word_file(tmp_path, words, name="words.bin"):
    path = tmp_path / name
    path.write_bytes(np.asarray(words, dtype=">u4").tobytes())
    return FileSource(str(path))


class TestSampleCorr:
    def test_constant_half_gives_p_one(self):
        reals = np.full(1000, 0.5)
        for variant in ("original", "modified"):
            stat, z = sample_corr_statistic(reals, 1, variant)
            assert stat == 0.0 and z == 0.0
            assert sample_corr_test(reals, 1, variant).pvalues[0] == 1.0

    def test_modified_invariant_under_complement(self):
        rng = np.random.default_rng(5)
        u = rng.random(2000)
        s1, _ = sample_corr_statistic(u, 3, "modified")
        s2, _ = sample_corr_statistic(1.0 - u, 3, "modified")
        assert s1 == pytest.approx(s2, rel=1e-12)

    def test_lag_must_be_smaller_than_n(self):
        with pytest.raises(ConfigError):
            sample_corr_test(np.zeros(5), 5)
        with pytest.raises(ConfigError):
            sample_corr_test(np.zeros(5), 0)

    def test_modified_moments_by_monte_carlo(self):
        # 1e6 trials at n=101, k=1: mean ~ 0, variance ~ 1/14400
        rng = np.random.default_rng(99)
        trials, n = 10**6, 101
        stats = np.empty(trials)
        done = 0
        while done < trials:
            b = min(50000, trials - done)
            u = rng.random((b, n)) - 0.5
            stats[done : done + b] = (u[:, :-1] * u[:, 1:]).sum(axis=1) / (n - 1)
            done += b
        var = 1.0 / (144.0 * (n - 1))
        assert abs(stats.mean()) <= 3.0 * math.sqrt(var / trials)
        assert stats.var() == pytest.approx(var, rel=0.05)

    def test_original_z_is_inflated(self):
        # the audited standardization understates the true variance 13/144m
        rng = np.random.default_rng(31)
        trials, n = 20000, 2000
        z = np.empty(trials)
        for i in range(trials):
            u = rng.random(n)
            _, z[i] = sample_corr_statistic(u, 1, "original")
        assert z.std() == pytest.approx(math.sqrt(13.0 / 12.0), rel=0.03)


class TestStringRun:
    def test_alternating_block_hand_values(self, tmp_path):
        path = tmp_path / "alt.bin"
        path.write_bytes(b"\x55" * 200)  # 01010101...
        src = FileSource(str(path))
        before = src.bits_consumed
        out = string_run_test(src, 100, "modified")
        assert src.bits_consumed - before == 200  # Y: every run has length 1
        want = math.erfc(10.0 / math.sqrt(2.0))  # z = (200-400)/20 = -10
        assert out.pvalues[0] == pytest.approx(want, rel=1e-12)

    def test_original_normal_uses_8n(self, tmp_path):
        path = tmp_path / "alt.bin"
        path.write_bytes(b"\x55" * 200)
        out = string_run_test(FileSource(str(path)), 100, "original")
        z = (200.0 - 400.0) / math.sqrt(800.0)
        assert out.pvalues[0] == pytest.approx(math.erfc(abs(z) / math.sqrt(2.0)), rel=1e-12)

    def test_collect_runs_accounting(self):
        src = MtSource(b"runs", 0)
        rc = collect_runs(src, 500, run_length_classes(500))
        assert rc.x0.sum() == 500 and rc.x1.sum() == 500
        assert rc.total_bits >= 1000
        assert src.bits_consumed == rc.total_bits

    def test_consumes_exactly_y_bits(self):
        a = MtSource(b"exact", 0)
        out = string_run_test(a, 200, "modified")
        y = a.bits_consumed
        # a fresh stream skipped forward by y bits must continue identically
        b = MtSource(b"exact", 0)
        b.take_bits(y)
        assert np.array_equal(a.take_bits(64), b.take_bits(64))
        assert len(out.pvalues) == 2

    def test_expected_bits_by_monte_carlo(self):
        # Y = sum of 2n geometric(1/2) run lengths: E[Y]=4n, V[Y]=4n
        rng = np.random.default_rng(8)
        n = 100
        y = rng.geometric(0.5, size=(10**5, 2 * n)).sum(axis=1)
        assert y.mean() == pytest.approx(4 * n, rel=0.01)
        assert y.var() == pytest.approx(4 * n, rel=0.05)

    def test_run_pair_counts_on_mt(self):
        src = MtSource(b"mt-runs", 1)
        rc = collect_runs(src, 10**4, run_length_classes(10**4))
        # geometric(1/2) lengths: about half of each side's runs have length 1
        assert rc.x0[0] == pytest.approx(5000, abs=300)
        assert rc.x1[0] == pytest.approx(5000, abs=300)

    def test_class_count_rule(self):
        assert run_length_classes(10**5) == 15
        assert run_length_classes(100) == 5
        assert run_length_classes(2) == 2


class TestSavir2Probs:
    def test_depth_one_uniform(self):
        assert np.allclose(savir2_cell_probs(8, 1), np.full(8, 0.125), atol=0)

    def test_m2_t2_exact(self):
        assert savir2_cell_probs(2, 2).tolist() == [0.75, 0.25]

    def test_m4_t3_matches_rational_oracle(self):
        probs = [Fraction(1, 4)] * 4
        for _ in range(2):
            probs = [sum(probs[j] / (j + 1) for j in range(k, 4)) for k in range(4)]
        got = savir2_cell_probs(4, 3)
        for g, w in zip(got, probs):
            assert abs(g - float(w)) <= 1e-15

    @pytest.mark.parametrize("m", [4, 16, 64])
    @pytest.mark.parametrize("t", [2, 3, 6])
    def test_monotone_non_increasing(self, m, t):
        p = savir2_cell_probs(m, t)
        assert (np.diff(p) <= 1e-15).all()

    @pytest.mark.parametrize("m,t", [(2, 2), (64, 6), (1 << 20, 30)])
    def test_normalized(self, m, t):
        assert savir2_cell_probs(m, t).sum() == pytest.approx(1.0, abs=1e-12)

    def test_domain(self):
        with pytest.raises(ConfigError):
            savir2_cell_probs(1, 1)


class TestMergeTailCells:
    def test_groups_meet_threshold(self):
        probs = savir2_cell_probs(64, 3)
        starts = merge_tail_cells(probs, 1000, 5.0)
        edges = np.append(starts, 64)
        for lo, hi in zip(edges[:-1], edges[1:]):
            assert 1000 * probs[lo:hi].sum() >= 5.0
        assert starts[0] == 0

    def test_infeasible_sample(self):
        with pytest.raises(ConfigError):
            merge_tail_cells(savir2_cell_probs(4, 1), 2, 5.0)


class TestSavir2Test:
    def test_exact_match_gives_p_one(self, tmp_path):
        # draws cycling through the four cells exactly: chi2 = 0, p = 1
        words = [0x40000000, 0x80000000, 0xC0000000, 0xFFFFFFFF] * 1000
        src = word_file(tmp_path, words)
        out = savir2_test(src, SavirParams(m=4, t=1, n=4000))
        assert out.pvalues[0] == 1.0

    def test_chi2_mean_matches_df(self):
        # m=4, t=2, n=1e4: cells stay unmerged, so df = 3; the mean of the
        # chi-square statistic over repetitions should be close to df
        reps = 1500
        df = 3
        chi2s = np.empty(reps)
        probs = savir2_cell_probs(4, 2)
        for r in range(reps):
            src = MtSource(b"savir-rep", r)
            u1 = src.uniform01_array(10**4)
            v = np.maximum(np.ceil(4 * u1), 1).astype(np.int64)
            u2 = src.uniform01_array(10**4)
            v = np.maximum(np.ceil(v * u2), 1).astype(np.int64)
            counts = np.bincount(v, minlength=5)[1:]
            expected = 10**4 * probs
            chi2s[r] = float(np.sum((counts - expected) ** 2 / expected))
        assert chi2s.mean() == pytest.approx(df, rel=0.10)

    def test_end_to_end_pvalue(self):
        out = savir2_test(MtSource(b"savir", 0), SavirParams(m=256, t=4, n=50000))
        assert 0.0 <= out.pvalues[0] <= 1.0

    def test_params_validation(self):
        with pytest.raises(ConfigError):
            SavirParams(m=1, t=1, n=10)
        with pytest.raises(ConfigError):
            SavirParams(m=4, t=0, n=10)
        with pytest.raises(ConfigError):
            SavirParams(m=4, t=1, n=0)


def test_variants_consume_identical_bits():
    for variant_pair in (("original", "modified"),):
        a, b = MtSource(b"var", 0), MtSource(b"var", 0)
        string_run_test(a, 1000, variant_pair[0])
        string_run_test(b, 1000, variant_pair[1])
        assert a.bits_consumed == b.bits_consumed
