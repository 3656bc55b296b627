import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from normnet import normality as N
from normnet.errors import ConstantSample, NumericalOverflow, SampleTooLarge, SampleTooSmall, \
    ZeroBandwidth
from normnet.rng import substream

HERE = Path(__file__).parent
CORPUS = json.loads((HERE / "golden" / "statistics.json").read_text())
FEATURES = json.loads((HERE / "golden" / "features.json").read_text())
Z3 = [-1.0, 0.0, 1.0]


def _draw(seed, n, family, loc, scale):
    rng = substream(seed)
    base = {"normal": rng.standard_normal, "exponential": rng.standard_exponential,
            "uniform": rng.random}[family](n)
    return base, loc + scale * base


pairs = st.builds(_draw, st.integers(0, 2**32 - 1), st.integers(8, 100),
                  st.sampled_from(["normal", "exponential", "uniform"]),
                  st.floats(-100, 100), st.floats(0.05, 50))


def corpus_ids():
    return [f"{r['family']}-n{r['n']}" for r in CORPUS]


@pytest.mark.parametrize("row", CORPUS, ids=corpus_ids())
class TestGoldenCorpus:
    def test_shapiro_wilk(self, row):
        out = N.shapiro_wilk(row["values"])
        assert out.statistic == pytest.approx(row["sw_w"], abs=1e-6)
        assert out.p_value == pytest.approx(row["sw_p"], abs=1e-3)

    def test_lilliefors(self, row):
        out = N.lilliefors(row["values"])
        assert out.statistic == pytest.approx(row["lf_d"], abs=1e-6)
        p = row["lf_p"]
        sigma = math.sqrt(max(p * (1 - p), 1e-4) * (1 / 10_000 + 1 / row["lf_oracle_sims"]))
        assert abs(out.p_value - p) <= 3 * sigma + 1e-4

    def test_anderson_darling(self, row):
        if row["n"] < 4:
            pytest.skip("AD needs n >= 4")
        out = N.anderson_darling(row["values"])
        assert out.statistic == pytest.approx(row["ad_a"], abs=1e-6)
        assert out.p_value == pytest.approx(row["ad_p"], abs=1e-3)

    def test_jarque_bera(self, row):
        out = N.jarque_bera(row["values"])
        assert out.statistic == pytest.approx(row["jb"], abs=1e-6)
        assert out.p_value == pytest.approx(row["jb_p"], abs=1e-3)
        adj = N.jarque_bera(row["values"], adjusted=True)
        assert adj.statistic == pytest.approx(row["ajb"], abs=1e-6)
        assert adj.p_value == pytest.approx(row["ajb_p"], abs=1e-3)

    def test_cramer_von_mises(self, row):
        assert N.cramer_von_mises(row["values"]) == pytest.approx(row["cvm"], abs=1e-9)


class TestHandExamples:
    def test_lilliefors_three_points(self):
        assert N.lilliefors_statistic(Z3) == pytest.approx(FEATURES["lf_z3"], abs=1e-12)
        assert N.lilliefors_statistic(Z3) == pytest.approx(0.17467, abs=1e-5)

    def test_anderson_three_points(self):
        assert N.anderson_darling_statistic(Z3) == pytest.approx(FEATURES["ad_z3"], abs=1e-12)

    def test_cvm_three_points(self):
        assert N.cramer_von_mises(Z3) == pytest.approx(FEATURES["cvm_z3"], abs=1e-12)

    def test_jb_three_points(self):
        assert N.jarque_bera(Z3).statistic == pytest.approx(0.28125, abs=1e-14)

    def test_jb_zero(self):
        # +-1 with four zeros: skewness 0, kurtosis n/2 = 3
        assert N.jarque_bera([-1, 0, 0, 0, 0, 1]).statistic == pytest.approx(0.0, abs=1e-14)

    def test_adjusted_converges(self):
        x = substream(2).standard_exponential(10**6)
        j = N.jarque_bera(x).statistic
        assert N.jarque_bera(x, adjusted=True).statistic == pytest.approx(j, rel=1e-3)

    def test_cvm_lower_bound(self):
        for seed in range(20):
            x = substream(seed).standard_normal(30)
            assert N.cramer_von_mises(x) >= 1 / (12 * 30)


class TestNormalCdf:
    def test_center(self):
        assert N.normal_cdf(0.0) == 0.5

    def test_reflection(self):
        t = np.linspace(0, 8, 801)
        assert np.max(np.abs(N.normal_cdf(-t) - (1 - N.normal_cdf(t)))) <= 1e-12

    def test_quantile(self):
        assert N.normal_cdf(1.959963985) == pytest.approx(FEATURES["phi_1_959963985"], abs=1e-15)
        assert abs(N.normal_cdf(1.959963985) - 0.975) <= 1e-9


class TestOutcome:
    def test_reject_rule(self):
        out = N.TestOutcome.build("SW", 0.9, 0.04, 0.05)
        assert out.reject and out.to_json() == {"statistic": 0.9, "p_value": 0.04, "alpha": 0.05,
                                                "reject": True, "method": "SW"}
        assert not N.TestOutcome.build("SW", 0.9, 0.05, 0.05).reject

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            N.TestOutcome.build("SW", 0.9, 0.5, 1.0)

    @pytest.mark.parametrize("method", ["SW", "LF", "AD", "JB", "AJB", "FSSD"])
    def test_dispatch(self, method):
        x = substream(1).standard_normal(30)
        out = N.run_test(method, x, 0.1, rng=substream(2))
        assert out.method == method
        assert 0 <= out.p_value <= 1
        assert out.reject == (out.p_value < 0.1)

    def test_unknown(self):
        with pytest.raises(ValueError):
            N.run_test("KS", [1, 2, 3, 4])


class TestErrors:
    @pytest.mark.parametrize("fn", [N.shapiro_wilk, N.lilliefors, N.anderson_darling,
                                    N.jarque_bera, N.cramer_von_mises])
    def test_constant(self, fn):
        with pytest.raises(ConstantSample):
            fn([3.0] * 10)

    def test_sizes(self):
        with pytest.raises(SampleTooSmall):
            N.shapiro_wilk([1, 2])
        with pytest.raises(SampleTooSmall):
            N.lilliefors([1, 2, 3])
        with pytest.raises(SampleTooSmall):
            N.anderson_darling([1, 2, 3])
        with pytest.raises(SampleTooSmall):
            N.jarque_bera([1, 2, 3], adjusted=True)
        with pytest.raises(SampleTooLarge):
            N.shapiro_wilk(np.arange(5001.0))

    def test_sw_bounds_at_three(self):
        out = N.shapiro_wilk([1, 2, 3])
        assert out.statistic == pytest.approx(1.0) and out.p_value == pytest.approx(1.0)

    def test_ad_deep_tail_warns(self):
        x = np.zeros(200)
        x[-1] = 1.0
        with pytest.warns(NumericalOverflow):
            a = N.anderson_darling_statistic(x)
        assert math.isfinite(a)

    def test_fssd_zero_bandwidth(self):
        # more than half the pairs are ties, so the median distance is zero
        with pytest.raises(ZeroBandwidth):
            N.fssd_statistic([0, 0, 0, 0, 0, 1])

    def test_fssd_config(self):
        with pytest.raises(ValueError):
            N.FssdConfig(m=0)
        with pytest.raises(ValueError):
            N.FssdConfig(null_sims=99)


class TestInvariance:
    @given(pairs)
    def test_statistics_affine(self, pair):
        base, y = pair
        for fn in (lambda v: N.shapiro_wilk(v).statistic, N.lilliefors_statistic,
                   N.anderson_darling_statistic, N.cramer_von_mises,
                   lambda v: N.jarque_bera(v).statistic,
                   lambda v: N.jarque_bera(v, adjusted=True).statistic):
            assert fn(y) == pytest.approx(fn(base), rel=1e-9, abs=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(pairs)
    def test_fssd_affine(self, pair):
        base, y = pair
        a = N.fssd_test(base, alpha=0.1, rng=substream(4))
        b = N.fssd_test(y, alpha=0.1, rng=substream(4))
        assert b.p_value == a.p_value
        # FSSD^2 scales like 1/sd^2 under the fitted model
        ratio = np.var(y, ddof=1) / np.var(base, ddof=1)
        assert b.statistic * ratio == pytest.approx(a.statistic, rel=1e-6)


class TestLilliefors:
    def test_monotone_pvalues(self):
        null = N.lilliefors_null(30)
        d = np.linspace(0, 0.4, 200)
        p = [N.mc_pvalue(v, null) for v in d]
        assert all(np.diff(p) <= 0)

    def test_literal_not_larger(self):
        for seed in range(30):
            x = substream(seed).standard_normal(25)
            assert N.lilliefors_statistic(x, literal=True) <= N.lilliefors_statistic(x) + 1e-15

    def test_null_cache_reused(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NORMNET_CACHE_DIR", str(tmp_path))
        N.lilliefors_null.cache_clear()
        first = N.lilliefors_null(12, 500, 3)
        assert list(tmp_path.glob("lf_n12_s500_seed3.npy"))
        N.lilliefors_null.cache_clear()
        assert np.array_equal(N.lilliefors_null(12, 500, 3), first)
        N.lilliefors_null.cache_clear()

    def test_calibration_random_parameters(self):
        rng = substream(77)
        mu = rng.uniform(-100, 100, 10_000)
        sigma = rng.uniform(1, 20, 10_000)
        x = mu[:, None] + sigma[:, None] * rng.standard_normal((10_000, 50))
        null = N.lilliefors_null(50)
        p = np.array([N.mc_pvalue(N.lilliefors_statistic(r), null) for r in x])
        assert abs(np.mean(p < 0.1) - 0.1) <= 0.01


def _delta(xi, xj, mean, var, locs, sigma):
    def xi_q(x, v):
        k = math.exp(-(x - v) ** 2 / (2 * sigma**2))
        return (mean - x) / var * k - (x - v) / sigma**2 * k
    return sum(xi_q(xi, v) * xi_q(xj, v) for v in locs) / len(locs)


class TestFssd:
    def test_two_points_is_single_delta(self):
        x = np.array([0.3, 1.7])
        rng = substream(5)
        stat = N.fssd_statistic(x, rng=substream(5))
        eps = rng.standard_normal(10)
        mean, var = x.mean(), x.var(ddof=1)
        locs = mean + math.sqrt(var) * eps
        assert stat == pytest.approx(_delta(x[0], x[1], mean, var, locs, 1.4), rel=1e-12)

    def test_u_statistic_by_loops(self):
        x = substream(6).standard_normal(9)
        rng = substream(7)
        stat = N.fssd_statistic(x, N.FssdConfig(m=4), rng=substream(7))
        eps = rng.standard_normal(4)
        mean, var = x.mean(), x.var(ddof=1)
        locs = mean + math.sqrt(var) * eps
        sigma = float(np.median([abs(x[i] - x[j]) for i in range(9) for j in range(i)]))
        total = sum(_delta(x[i], x[j], mean, var, locs, sigma) for i in range(1, 9) for j in range(i))
        assert stat == pytest.approx(2 * total / (9 * 8), rel=1e-10)
        assert _delta(x[1], x[4], mean, var, locs, sigma) == _delta(x[4], x[1], mean, var, locs, sigma)

    def test_unbiased_under_known_model(self):
        # with the model, locations and bandwidth fixed the U-statistic is unbiased for 0
        rng = substream(8)
        locs = rng.standard_normal(10)
        x = rng.standard_normal((1000, 100))
        diff = x[:, :, None] - locs
        k = np.exp(-diff**2 / 2)
        xi = (-x[:, :, None] - diff) * k
        total = xi.sum(axis=1)
        stats = (np.sum(total**2, axis=1) - np.sum(xi**2, axis=(1, 2))) / (10 * 100 * 99)
        se = stats.std(ddof=1) / math.sqrt(stats.size)
        assert abs(stats.mean()) <= 3 * se

    def test_fitted_model_bias_vanishes(self):
        # refitting mean and variance adds an O(1/n) bias
        rng = substream(9)
        means = []
        for n in (50, 200):
            x = rng.standard_normal((2000, n))
            means.append(N._fssd_rows(x, rng.standard_normal((2000, 10)), 1.0).mean())
        assert abs(means[1]) < abs(means[0]) / 2.5

    def test_pvalue_bounds(self):
        cfg = N.FssdConfig(null_sims=100)
        for seed in range(10):
            p = N.fssd_test(substream(seed).standard_exponential(40), cfg, rng=substream(seed, 1)).p_value
            assert 1 / 101 <= p <= 1

    def test_fixed_bandwidth_path(self):
        out = N.fssd_test(substream(1).standard_normal(30), N.FssdConfig(bandwidth=0.7), rng=substream(2))
        assert 0 < out.p_value <= 1

    def test_calibration(self):
        cfg = N.FssdConfig(null_sims=200)
        x = substream(9).standard_normal((1000, 50))
        p = np.array([N.fssd_test(r, cfg, 0.1, substream(10, i)).p_value for i, r in enumerate(x)])
        assert abs(np.mean(p < 0.1) - 0.1) <= 0.03

    def test_shared_null_matches_per_sample_bootstrap(self):
        # pivotality: one table per n gives the same rejection rate
        cfg = N.FssdConfig()
        null = N.fssd_null(50, cfg, substream(11))
        x = 5 + 3 * substream(12).standard_normal((1000, 50))
        p = np.array([N.fssd_test(r, cfg, 0.1, substream(13, i), null).p_value for i, r in enumerate(x)])
        assert abs(np.mean(p < 0.1) - 0.1) <= 0.03

    def test_weaker_than_sw_on_uniform(self):
        x = substream(14).random((2000, 50))
        null = N.fssd_null(50, N.FssdConfig(), substream(15))
        fssd = np.mean([N.fssd_test(r, rng=substream(16, i), null=null).p_value < 0.1
                        for i, r in enumerate(x)])
        sw = np.mean([N.shapiro_wilk(r).p_value < 0.1 for r in x])
        assert sw > fssd
