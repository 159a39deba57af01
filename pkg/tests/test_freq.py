import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aucmeta import freq
from aucmeta.core import CpmSeries, Method
from aucmeta.errors import DegenerateData, InsufficientData, InvalidArgument, NumericFailure
from aucmeta.freq import (
    TAU_DEGENERATE,
    TAU_NOT_ESTIMABLE,
    TAU_TRUNCATED,
    as_studies,
    cumulative_meta,
    dl_tau,
    fe_pool,
    pool,
    re_pool,
    reml_tau,
    sj_tau,
)
from oracles import reml_grid_argmax

THREE = as_studies([(0.60, 0.02), (0.70, 0.02), (0.80, 0.02)])
TWO = as_studies([(0.70, 0.02), (0.80, 0.04)])


def study_lists(min_size=1, max_size=8):
    pair = st.tuples(st.floats(0.05, 0.95), st.floats(0.005, 0.1))
    return st.lists(pair, min_size=min_size, max_size=max_size).map(as_studies)


def simulated(tau, k, s, seed):
    rng = np.random.default_rng(seed)
    y = 0.7 + tau * rng.standard_normal(k) + s * rng.standard_normal(k)
    return CpmSeries.from_arrays("sim", y, np.full(k, s))


class TestFixedEffects:
    def test_single_study(self):
        se = (0.87 - 0.77) / 3.92
        r = fe_pool(as_studies([(0.82, se)]))
        assert (r.pooled, r.pooled_se, r.tau, r.method, r.k) == (0.82, pytest.approx(se), 0.0, Method.FE, 1)

    def test_identical_pair(self):
        r = fe_pool(as_studies([(0.75, 0.03), (0.75, 0.03)]))
        assert r.pooled == pytest.approx(0.75)
        assert r.pooled_se == pytest.approx(0.03 / math.sqrt(2))

    def test_hand_computed(self):
        r = fe_pool(TWO)
        assert r.pooled == pytest.approx(0.72, abs=1e-12)
        assert r.pooled_se == pytest.approx(0.0178885438, abs=1e-9)

    def test_empty(self):
        with pytest.raises(InvalidArgument):
            fe_pool([])


class TestRandomEffects:
    def test_tau_zero_is_fe(self):
        a, b = fe_pool(TWO), re_pool(TWO, 0.0)
        assert (a.pooled, a.pooled_se) == (b.pooled, b.pooled_se)
        assert b.method is Method.RE_FIXED_TAU

    def test_hand_computed(self):
        # weights 1/0.0029 and 1/0.0041
        r = re_pool(TWO, 0.05)
        assert r.pooled == pytest.approx(0.7414285714, abs=1e-9)
        assert r.pooled_se == pytest.approx(0.0412137286, abs=1e-9)
        assert r.tau == 0.05

    @pytest.mark.parametrize("tau", [-0.1, math.nan, math.inf])
    def test_bad_tau(self, tau):
        with pytest.raises(InvalidArgument):
            re_pool(TWO, tau)


class TestDerSimonianLaird:
    def test_equal_values(self):
        assert dl_tau(as_studies([(0.7, 0.02), (0.7, 0.05), (0.7, 0.03)])) == 0.0

    def test_hand_computed(self):
        # Q = 50, denominator 7500 - 2500 = 5000
        assert dl_tau(THREE) == pytest.approx(math.sqrt(48 / 5000), abs=1e-12)
        assert dl_tau(THREE) == pytest.approx(0.0979796, abs=1e-7)

    def test_simulation_consistency(self):
        assert 0.045 <= dl_tau(simulated(0.05, 200, 0.01, seed=2024)) <= 0.055

    def test_needs_two(self):
        with pytest.raises(InsufficientData):
            dl_tau(as_studies([(0.7, 0.02)]))

    def test_truncation_flag(self):
        r = pool(as_studies([(0.70, 0.05), (0.71, 0.05)]), Method.RE_DL)
        assert r.tau == 0.0 and TAU_TRUNCATED in r.flags


class TestReml:
    def test_equal_values(self):
        assert reml_tau(as_studies([(0.7, 0.02)] * 4)) == 0.0

    def test_against_grid(self):
        assert reml_tau(THREE) == pytest.approx(reml_grid_argmax([0.6, 0.7, 0.8], [0.02] * 3), abs=1e-6)

    def test_simulation_consistency(self):
        assert 0.045 <= reml_tau(simulated(0.05, 200, 0.01, seed=2024)) <= 0.055

    def test_needs_two(self):
        with pytest.raises(InsufficientData):
            reml_tau(as_studies([(0.7, 0.02)]))

    def test_nonconvergence(self, monkeypatch):
        class Fake:
            success, nit, x, fun, message = False, 500, 0.1, 0.0, "maxiter"

        monkeypatch.setattr(freq, "minimize_scalar", lambda *a, **k: Fake())
        with pytest.raises(NumericFailure) as info:
            reml_tau(THREE)
        assert info.value.diagnostics["nit"] == 500

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_grid_equivalence_random(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 11))
        s = rng.uniform(0.01, 0.06, k)
        y = np.clip(0.7 + rng.uniform(0, 0.1) * rng.standard_normal(k) + s * rng.standard_normal(k), 0.02, 0.98)
        est = reml_tau(CpmSeries.from_arrays("r", y, s))
        assert est == pytest.approx(reml_grid_argmax(y, s, step=1e-5), abs=1e-5)


class TestSidikJonkman:
    def test_hand_computed(self):
        tau0_2 = 0.02 / 3
        v = 1.0 / (0.0004 / tau0_2 + 1.0)
        assert sj_tau(THREE) == pytest.approx(math.sqrt(v * 0.02 / 2), abs=1e-12)
        assert sj_tau(THREE) == pytest.approx(0.0971286, abs=1e-7)

    def test_simulation_consistency(self):
        assert 0.04 <= sj_tau(simulated(0.05, 200, 0.01, seed=2024)) <= 0.06

    def test_degenerate(self):
        eps = 1e-3
        assert sj_tau(as_studies([(0.7 + eps, 0.02), (0.7, 0.02)])) > 0
        with pytest.raises(DegenerateData):
            sj_tau(as_studies([(0.7, 0.02), (0.7, 0.02)]))
        r = pool(as_studies([(0.7, 0.02), (0.7, 0.02)]), Method.RE_SJ)
        assert r.tau == 0.0 and TAU_DEGENERATE in r.flags


class TestPool:
    @pytest.mark.parametrize("method", [Method.RE_REML, Method.RE_DL, Method.RE_SJ])
    def test_single_study_not_estimable(self, method):
        r = pool(as_studies([(0.8, 0.03)]), method)
        assert r.tau == 0.0 and TAU_NOT_ESTIMABLE in r.flags and r.method is method

    def test_fixed_tau_needs_tau(self):
        with pytest.raises(InvalidArgument):
            pool(THREE, Method.RE_FIXED_TAU)

    def test_bayes_rejected(self):
        with pytest.raises(InvalidArgument):
            pool(THREE, Method.BAYES_FULL)


class TestCumulative:
    def test_single(self):
        s = CpmSeries.from_arrays("a", [0.8], [0.03])
        (r,) = cumulative_meta(s, Method.RE_REML)
        f = fe_pool(s)
        assert (r.pooled, r.pooled_se, r.tau) == (f.pooled, f.pooled_se, f.tau)

    def test_homogeneous_curves_coincide(self):
        s = CpmSeries.from_arrays("h", [0.74] * 50, [0.01] * 50)
        for a, b in zip(cumulative_meta(s, Method.FE), cumulative_meta(s, Method.RE_REML)):
            assert b.tau == 0.0
            assert a.pooled == pytest.approx(b.pooled) and a.pooled_se == b.pooled_se

    def test_long_series_shape(self):
        s = simulated(0.06, 83, 0.02, seed=7)
        fe = cumulative_meta(s, Method.FE)
        re = cumulative_meta(s, Method.RE_REML)
        assert len(fe) == 83
        assert fe[-1].pooled_se < fe[9].pooled_se < fe[0].pooled_se
        assert fe[-1].pooled_se < 0.003
        last = re[-1]
        pi_width = 2 * 1.96 * math.hypot(last.pooled_se, last.tau)
        assert pi_width == pytest.approx(2 * 1.96 * last.tau, rel=0.02)
        assert 0.04 < last.tau < 0.08


class TestProperties:
    @given(study_lists(), st.floats(0.0, 0.2))
    def test_fe_is_re_zero(self, studies, tau):
        a, b = fe_pool(studies), re_pool(studies, 0.0)
        assert a.pooled == b.pooled and a.pooled_se == b.pooled_se

    @given(study_lists(2), st.randoms(use_true_random=False))
    @settings(deadline=None)
    def test_permutation_invariance(self, studies, rnd):
        shuffled = list(studies)
        rnd.shuffle(shuffled)
        for method in (Method.FE, Method.RE_REML, Method.RE_DL):
            assert pool(shuffled, method).pooled == pytest.approx(pool(studies, method).pooled, abs=1e-9)
        assert re_pool(shuffled, 0.05).pooled == pytest.approx(re_pool(studies, 0.05).pooled, abs=1e-12)

    @given(study_lists(2), st.floats(0.0, 0.3))
    @settings(deadline=None)
    def test_pooled_within_range(self, studies, tau):
        ys = [s.auc_hat for s in studies]
        for r in (fe_pool(studies), re_pool(studies, tau), pool(studies, Method.RE_REML)):
            assert min(ys) - 1e-12 <= r.pooled <= max(ys) + 1e-12

    @given(study_lists(), st.floats(0.0, 0.2), st.floats(0.0, 0.2))
    def test_se_nondecreasing_in_tau(self, studies, t1, t2):
        lo, hi = sorted((t1, t2))
        assert re_pool(studies, lo).pooled_se <= re_pool(studies, hi).pooled_se

    @given(study_lists(2))
    @settings(deadline=None)
    def test_tau_nonnegative(self, studies):
        assert dl_tau(studies) >= 0 and reml_tau(studies) >= 0
        if len({s.auc_hat for s in studies}) > 1:
            assert sj_tau(studies) > 0

    @given(study_lists(2), st.floats(0.05, 0.95))
    @settings(deadline=None)
    def test_zero_weight_limit(self, studies, y_new):
        extra = as_studies([(y_new, 1e9)])[0]
        more = list(studies) + [extra]
        # DL is excluded: a zero-weight study still adds a degree of freedom to Q - (k - 1).
        assert fe_pool(more).pooled == pytest.approx(fe_pool(studies).pooled, abs=1e-9)
        # REML tau is only resolved to the 1e-8 search tolerance
        assert pool(more, Method.RE_REML).pooled == pytest.approx(pool(studies, Method.RE_REML).pooled, abs=1e-7)
        assert re_pool(more, 0.05).pooled == pytest.approx(re_pool(studies, 0.05).pooled, abs=1e-9)
