import numpy as np
import pytest

from ewoc.links import BetaParams, beta_quantile
from ewoc.model import ModelConfig, ToxicityRecord
from ewoc.posterior import (BackendKind, BackendSpec, PosteriorUnderflowError,
                            posterior_summary)

CFG = ModelConfig()
QUAD = BackendSpec()
DATA3 = (ToxicityRecord(0.0, 0), ToxicityRecord(0.25, 0), ToxicityRecord(0.5, 1))
DATA10 = tuple(
    ToxicityRecord(d, y) for d, y in [
        (0.0, 0), (0.1, 0), (0.2, 0), (0.3, 0), (0.45, 1),
        (0.35, 0), (0.5, 0), (0.6, 1), (0.5, 0), (0.55, 1)])


class TestQuadrature:
    def test_no_data_uniform_prior_recovery(self):
        ps = posterior_summary([], CFG, QUAD, (0.05, 0.25, 0.5))
        for p, q in ps.gamma_quantiles.items():
            assert q == pytest.approx(p, abs=1 / 401)

    def test_no_data_beta_prior_recovery(self):
        cfg = ModelConfig(prior_gamma=BetaParams(2, 5))
        ps = posterior_summary([], cfg, QUAD, (0.9,))
        # oracle: the rescaled Beta(2,5) quantile
        assert ps.gamma_quantiles[0.9] == pytest.approx(
            beta_quantile(BetaParams(2, 5), 0.9), abs=0.003)

    def test_quantiles_monotone_and_bounded(self):
        probs = (0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95)
        ps = posterior_summary(DATA3, CFG, QUAD, probs)
        qs = [ps.gamma_quantiles[p] for p in probs]
        assert all(a <= b for a, b in zip(qs, qs[1:]))
        assert all(CFG.x_min <= q <= CFG.x_max for q in qs)

    def test_regression_three_records(self):
        # frozen baseline from the first 401x401 run
        ps = posterior_summary(DATA3, CFG, QUAD, (0.25, 0.5))
        assert ps.gamma_quantiles[0.25] == pytest.approx(0.24506468426999192, abs=1e-12)
        assert ps.gamma_quantiles[0.5] == pytest.approx(0.416099727599268, abs=1e-12)

    def test_self_convergence_201_vs_401(self):
        probs = (0.05, 0.25, 0.5, 0.75, 0.95)
        for data in [(), DATA3, DATA10]:
            lo = posterior_summary(data, CFG, BackendSpec(resolution=201), probs)
            hi = posterior_summary(data, CFG, BackendSpec(resolution=401), probs)
            for p in probs:
                assert abs(lo.gamma_quantiles[p] - hi.gamma_quantiles[p]) < 0.002

    def test_recommended_dose_hits_alpha_mass(self):
        # the alpha-quantile must map back to alpha through the marginal CDF
        for alpha in (0.05, 0.25, 0.4):
            ps = posterior_summary(DATA3, CFG, QUAD, (alpha,))
            dose = ps.gamma_quantiles[alpha]
            cdf = np.interp(dose, ps.diagnostics["dose_edges"],
                            ps.diagnostics["cdf_edges"])
            assert cdf == pytest.approx(alpha, abs=1e-6)

    def test_mean_median_consistent(self):
        ps = posterior_summary(DATA3, CFG, QUAD, (0.5,))
        assert ps.gamma_median == pytest.approx(ps.gamma_quantiles[0.5], abs=1e-12)
        assert CFG.x_min < ps.gamma_mean < CFG.x_max
        assert 0.0 < ps.rho0_mean < CFG.theta

    def test_normalization_positive_prior_only(self):
        ps = posterior_summary([], CFG, QUAD, (0.5,))
        # mass of likelihood * prior over the restricted rho0 domain is theta
        assert ps.normalization == pytest.approx(CFG.theta, rel=1e-6)

    def test_determinism(self):
        a = posterior_summary(DATA10, CFG, QUAD, (0.25, 0.5))
        b = posterior_summary(tuple(DATA10), CFG, QUAD, (0.25, 0.5))
        assert a.gamma_quantiles == b.gamma_quantiles

    def test_underflow_raises(self):
        data = tuple(ToxicityRecord(0.0, 1) for _ in range(1500))
        with pytest.raises(PosteriorUnderflowError):
            posterior_summary(data, CFG, BackendSpec(resolution=51), (0.5,))

    def test_bad_probs_rejected(self):
        with pytest.raises(ValueError):
            posterior_summary([], CFG, QUAD, (0.0,))


class TestMetropolis:
    BACKEND = BackendSpec(kind=BackendKind.METROPOLIS, draws=40_000,
                          burn_in=4_000)

    @pytest.mark.parametrize("data", [(), DATA3, DATA10],
                             ids=["none", "three", "ten"])
    def test_agrees_with_quadrature(self, data):
        quad = posterior_summary(data, CFG, QUAD, (0.25, 0.5))
        mcmc = posterior_summary(data, CFG, self.BACKEND, (0.25, 0.5),
                                 rng=np.random.default_rng(7))
        for p in (0.25, 0.5):
            assert mcmc.gamma_quantiles[p] == pytest.approx(
                quad.gamma_quantiles[p], abs=0.01)

    def test_reproducible_with_same_stream(self):
        a = posterior_summary(DATA3, CFG, self.BACKEND, (0.5,),
                              rng=np.random.default_rng(5))
        b = posterior_summary(DATA3, CFG, self.BACKEND, (0.5,),
                              rng=np.random.default_rng(5))
        assert a.gamma_quantiles == b.gamma_quantiles

    def test_diagnostics_attached(self):
        ps = posterior_summary(DATA3, CFG,
                               BackendSpec(kind=BackendKind.METROPOLIS,
                                           draws=2000, burn_in=500),
                               (0.5,), rng=np.random.default_rng(9))
        assert 0.0 <= ps.diagnostics["acceptance_rate"] <= 1.0
        assert isinstance(ps.diagnostics["acceptance_warning"], bool)
