import math

import numpy as np
import pytest
import scipy.stats

from panelcast.errors import UnitMismatchError
from panelcast.evaluation import (
    AccuracyReport,
    ForecastSet,
    accuracy,
    dm_from_forecasts,
    dm_test,
    dominance_summary,
    forecast_errors,
    normal_cdf,
    read_forecasts_csv,
    write_forecasts_csv,
)
from panelcast.panel import ScalingStats

from conftest import make_panel


def make_forecasts(preds, model="m", start_year=2020, prefix="u"):
    preds = np.asarray(preds, dtype=np.float64)
    n, t = preds.shape
    ids = tuple(f"{prefix}{i:04d}" for i in range(n))
    years = tuple(range(start_year, start_year + t))
    return ForecastSet(model, ids, years, preds)


class TestNormalCdf:
    def test_against_scipy(self):
        xs = np.linspace(-8, 8, 41)
        for x in xs:
            assert normal_cdf(x) == pytest.approx(scipy.stats.norm.cdf(x), abs=1e-12)

    def test_symmetry(self):
        assert normal_cdf(0.0) == 0.5
        assert normal_cdf(1.5) + normal_cdf(-1.5) == pytest.approx(1.0, abs=1e-15)


class TestDmTest:
    def test_identical_errors(self):
        e = np.random.default_rng(0).normal(size=(50, 2))
        res = dm_test(e, e.copy())
        assert res.stat == 0.0 and res.p_value == 1.0 and res.d_bar == 0.0
        assert res.zero_variance

    def test_sign_convention(self):
        rng = np.random.default_rng(1)
        n = 200
        ea = np.full((n, 2), 2.0) + rng.normal(size=(n, 2)) * 0.1
        eb = np.full((n, 2), 1.0) + rng.normal(size=(n, 2)) * 0.1
        res = dm_test(ea, eb, "worse", "better")
        assert res.stat > 0  # model A has the larger MSE

    def test_antisymmetry_exact(self):
        rng = np.random.default_rng(2)
        ea = rng.normal(size=(100, 2))
        eb = rng.normal(size=(100, 2))
        ab = dm_test(ea, eb)
        ba = dm_test(eb, ea)
        assert ab.stat == -ba.stat
        assert ab.p_value == ba.p_value

    def test_formula_identity(self):
        rng = np.random.default_rng(3)
        ea = rng.normal(size=(64, 3))
        eb = rng.normal(size=(64, 3))
        res = dm_test(ea, eb)
        d = (ea**2 - eb**2).mean(axis=1)
        dbar = d.mean()
        sd = np.sqrt(((d - dbar) ** 2).sum() / (len(d) - 1))
        assert abs(res.stat - dbar / (sd / math.sqrt(len(d)))) < 1e-12
        assert res.p_value == pytest.approx(2 * (1 - normal_cdf(abs(res.stat))), abs=1e-15)

    def test_zero_variance_nonzero_mean(self):
        ea = np.full((10, 2), 2.0)
        eb = np.full((10, 2), 1.0)
        res = dm_test(ea, eb)
        assert res.zero_variance and res.stat == math.inf and res.p_value == 0.0
        res2 = dm_test(eb, ea)
        assert res2.stat == -math.inf

    def test_monte_carlo_size_under_null(self):
        # both forecasters i.i.d. standard normal errors: 5% two-sided
        # rejection rate must sit near nominal
        rng = np.random.default_rng(4)
        n, reps = 5000, 1000
        rejections = 0
        for _ in range(reps):
            ea = rng.normal(size=(n, 2))
            eb = rng.normal(size=(n, 2))
            if dm_test(ea, eb).p_value < 0.05:
                rejections += 1
        assert 0.03 <= rejections / reps <= 0.07

    def test_location_invariance_of_pipeline(self):
        # adding a common constant to every d_i shifts d_bar but the statistic
        # recomputed from the shifted losses matches direct computation
        rng = np.random.default_rng(5)
        ea = rng.normal(size=(80, 2))
        eb = rng.normal(size=(80, 2))
        d = (ea**2 - eb**2).mean(axis=1) + 3.0
        dbar = d.mean()
        sd = np.sqrt(((d - dbar) ** 2).sum() / 79)
        direct = dbar / (sd / math.sqrt(80))
        base = dm_test(ea, eb)
        # shifting d by c shifts dbar by c, leaves sigma_d unchanged
        assert sd == pytest.approx(base.sigma_d, abs=1e-12)
        assert direct == pytest.approx((base.d_bar + 3.0) / (base.sigma_d / math.sqrt(80)), abs=1e-10)


class TestAccuracy:
    def setup_method(self):
        self.realized = make_panel(
            np.array([[0.0, 1.0, 0.5, -0.5], [1.0, 2.0, 1.5, 0.5]]), start_year=2018)
        self.stats = ScalingStats(self.realized.unit_ids,
                                  np.array([10.0, 20.0]), np.array([2.0, 4.0]))

    def test_perfect_forecasts(self):
        preds = self.realized.values[:, 2:]
        fs = ForecastSet("perfect", self.realized.unit_ids, (2020, 2021), preds)
        rep = accuracy(fs, self.realized, self.stats)
        assert rep.rmse_norm == 0.0
        assert rep.r2_pooled == 1.0
        assert rep.top_share == pytest.approx(rep.top_count / 2)

    def test_pooled_mean_forecast_scores_zero_r2(self):
        actual = self.realized.values[:, 2:]
        preds = np.full_like(actual, actual.mean())
        fs = ForecastSet("mean", self.realized.unit_ids, (2020, 2021), preds)
        rep = accuracy(fs, self.realized, self.stats)
        assert rep.r2_pooled == pytest.approx(0.0, abs=1e-14)

    def test_two_unit_hand_computation(self):
        # unit errors: u0: (0.5, 0.5) -> rmse 0.5; u1: (0.5, -1.5) -> rmse
        # sqrt(1.25); euro rmse scales by sd (2 and 4)
        preds = np.array([[1.0, 0.0], [2.0, -1.0]])
        fs = ForecastSet("hand", self.realized.unit_ids, (2020, 2021), preds)
        rep = accuracy(fs, self.realized, self.stats)
        rmse0, rmse1 = 0.5, math.sqrt((0.25 + 2.25) / 2)
        assert rep.per_unit_rmse == pytest.approx([rmse0, rmse1])
        assert rep.rmse_norm == pytest.approx((rmse0 + rmse1) / 2)
        assert rep.per_unit_rmse_euro == pytest.approx([2 * rmse0, 4 * rmse1])
        assert rep.rmse_euro_median == pytest.approx(np.median([2 * rmse0, 4 * rmse1]))
        sse = 0.25 + 0.25 + 0.25 + 2.25
        actual = self.realized.values[:, 2:]
        sst = ((actual - actual.mean()) ** 2).sum()
        assert rep.r2_pooled == pytest.approx(1 - sse / sst)
        assert rep.per_year_rmse[2020] == pytest.approx(math.sqrt(0.25))
        assert rep.per_year_rmse[2021] == pytest.approx(math.sqrt((0.25 + 2.25) / 2))
        assert rep.pred_range == (-1.0, 2.0)

    def test_euro_rmse_equals_sd_scaled(self):
        rng = np.random.default_rng(6)
        realized = make_panel(rng.normal(size=(40, 6)))
        stats = ScalingStats(realized.unit_ids, rng.normal(size=40),
                             rng.uniform(0.5, 5.0, size=40))
        preds = rng.normal(size=(40, 2))
        fs = ForecastSet("m", realized.unit_ids, realized.years[-2:], preds)
        rep = accuracy(fs, realized, stats)
        assert np.abs(rep.per_unit_rmse_euro - stats.sd * rep.per_unit_rmse).max() < 1e-10

    def test_unit_reordering_invariance(self):
        rng = np.random.default_rng(7)
        realized = make_panel(rng.normal(size=(10, 5)))
        stats = ScalingStats(realized.unit_ids, rng.normal(size=10),
                             rng.uniform(1, 2, size=10))
        preds = rng.normal(size=(10, 2))
        fs = ForecastSet("m", realized.unit_ids, realized.years[-2:], preds)
        rep = accuracy(fs, realized, stats)
        perm = rng.permutation(10)
        fs2 = ForecastSet("m", tuple(realized.unit_ids[i] for i in perm),
                          realized.years[-2:], preds[perm])
        rep2 = accuracy(fs2, realized, stats)
        assert rep2.rmse_norm == pytest.approx(rep.rmse_norm, abs=1e-14)
        assert rep2.r2_pooled == pytest.approx(rep.r2_pooled, abs=1e-14)
        assert rep2.top_share == pytest.approx(rep.top_share, abs=1e-14)

    def test_top_share_concentration(self):
        rng = np.random.default_rng(8)
        realized = make_panel(np.zeros((200, 4)))
        stats = ScalingStats(realized.unit_ids, np.zeros(200), np.ones(200))
        preds = np.zeros((200, 2))
        preds[7] = 100.0  # one unit carries nearly all squared error
        preds += rng.normal(size=preds.shape) * 1e-3
        fs = ForecastSet("m", realized.unit_ids, realized.years[-2:], preds)
        rep = accuracy(fs, realized, stats)
        assert rep.top_count == 2  # ceil(0.01 * 200)
        assert rep.top_share > 0.99

    def test_unit_mismatch(self):
        fs = make_forecasts(np.zeros((3, 2)), prefix="z")
        with pytest.raises(UnitMismatchError):
            accuracy(fs, self.realized, self.stats)


class TestDominance:
    def test_identical_no_dominance(self):
        rng = np.random.default_rng(9)
        realized = make_panel(rng.normal(size=(30, 5)))
        stats = ScalingStats(realized.unit_ids, np.zeros(30), np.ones(30))
        preds = rng.normal(size=(30, 2))
        fs = ForecastSet("m", realized.unit_ids, realized.years[-2:], preds)
        rep = accuracy(fs, realized, stats)
        rec = dominance_summary(rep, rep)
        assert not rec.dominates

    def test_shifted_distribution_dominates(self):
        rng = np.random.default_rng(10)
        realized = make_panel(rng.normal(size=(50, 5)))
        stats = ScalingStats(realized.unit_ids, np.zeros(50), np.ones(50))
        good = ForecastSet("good", realized.unit_ids, realized.years[-2:],
                           realized.values[:, -2:] + rng.normal(size=(50, 2)) * 0.05)
        bad = ForecastSet("bad", realized.unit_ids, realized.years[-2:],
                          realized.values[:, -2:] + 5 + rng.normal(size=(50, 2)))
        rep_g = accuracy(good, realized, stats)
        rep_b = accuracy(bad, realized, stats)
        rec = dominance_summary(rep_g, rep_b)
        assert rec.dominates
        assert rec.a_quantiles[2] < rec.b_quantiles[0]


class TestForecastSetPlumbing:
    def test_errors_alignment(self):
        realized = make_panel(np.arange(12.0).reshape(3, 4), start_year=2018)
        fs = ForecastSet("m", realized.unit_ids, (2020, 2021),
                         realized.values[:, 2:] + 1.0)
        err = forecast_errors(fs, realized)
        assert np.allclose(err, 1.0)

    def test_dm_from_forecasts_intersects_units(self):
        rng = np.random.default_rng(11)
        realized = make_panel(rng.normal(size=(20, 5)))
        years = realized.years[-2:]
        fa = ForecastSet("a", realized.unit_ids, years, rng.normal(size=(20, 2)))
        fb = ForecastSet("b", realized.unit_ids[5:], years, rng.normal(size=(15, 2)))
        res = dm_from_forecasts(fa, fb, realized)
        assert res.n == 15

    def test_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(12)
        fs = make_forecasts(rng.normal(size=(6, 2)), model="gru")
        path = str(tmp_path / "f.csv")
        write_forecasts_csv(fs, path)
        back = read_forecasts_csv(path, "gru")
        assert back.unit_ids == fs.unit_ids
        assert back.test_years == fs.test_years
        assert np.array_equal(back.predictions, fs.predictions)
