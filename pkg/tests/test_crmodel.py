import math

import numpy as np
import pytest
from scipy.stats import invgamma, invwishart, multivariate_normal, norm, poisson

from catchtl._updates import gibbs_coeff_matrix, gibbs_covariance, gibbs_variance
from catchtl.chains import CovariateMoments, McmcConfig, PosteriorChains
from catchtl.crmodel import (
    CRDataset,
    CRPriors,
    CRState,
    cr_log_posterior,
    cr_loglik,
    detection_prob,
    fit_cr,
    mean_detection_phat,
)
from catchtl.errors import ValidationError
from catchtl.rng import RngStream
from catchtl.simstudy import generate_cr_data, generate_population, scenario
from catchtl.stats import inv_logit, logit

from conftest import toy_cr_dataset


class TestCrLoglik:
    def test_single_day(self):
        # choose(5,2) * 0.5^2 * 0.5^3 = 10 / 32
        val = cr_loglik(5, [0.5], [(2, 0)])
        assert val == pytest.approx(math.log(10 * 0.25 * 0.125), abs=1e-12)

    def test_certain_detection_limit(self):
        val = cr_loglik(3, [1.0 - 1e-12], [(3, 0)])
        assert val == pytest.approx(0.0, abs=1e-9)

    def test_two_days(self):
        # choose(4,3) * (0.5^2 0.5^2) * (0.5^2 0.5^2)
        val = cr_loglik(4, [0.5, 0.5], [(2, 0), (2, 1)])
        assert val == pytest.approx(math.log(4 * 0.0625 * 0.0625), abs=1e-12)

    def test_single_occasion_is_binomial(self):
        for n_total in range(0, 21):
            for p in np.linspace(0.1, 0.9, 9):
                for n_caught in range(0, n_total + 1):
                    want = (
                        math.log(math.comb(n_total, n_caught))
                        + n_caught * math.log(p)
                        + (n_total - n_caught) * math.log1p(-p)
                    )
                    got = cr_loglik(n_total, [p], [(n_caught, 0)])
                    assert got == pytest.approx(want, abs=1e-12)

    def test_floor_violation_rejected(self):
        with pytest.raises(ValueError):
            cr_loglik(2, [0.5, 0.5], [(2, 0), (2, 1)])

    def test_probability_domain(self):
        for p in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(ValueError):
                cr_loglik(5, [p], [(1, 0)])

    def test_count_protocol_enforced(self):
        with pytest.raises(ValueError):
            cr_loglik(9, [0.5, 0.5], [(2, 1), (1, 0)])  # marked on day 1
        with pytest.raises(ValueError):
            cr_loglik(9, [0.5, 0.5], [(2, 0), (4, 3)])  # recaptures exceed pool
        with pytest.raises(ValueError):
            cr_loglik(9, [0.5], [(2, 3)])  # recaptures exceed catch


class TestDetectionProb:
    def test_intercept_only(self):
        assert detection_prob([1.0], [0.0], 0.0) == 0.5

    def test_baseline_detection(self):
        assert detection_prob([1.0, 0.0, 0.0], [-3.5, -2.0, 0.5], 0.0) == pytest.approx(
            0.029312, abs=1e-6
        )

    def test_monotone_in_effect(self):
        values = [detection_prob([1.0, 0.3], [-1.0, 0.5], e) for e in np.linspace(-2, 2, 9)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            detection_prob([1.0, 2.0], [0.5], 0.0)


def _toy_state(ds: CRDataset, abundance: np.ndarray, gen) -> CRState:
    t_n, j_n = abundance.shape
    qx, qz = ds.x.shape[1], ds.z.shape[1]
    return CRState(
        abundance=abundance + gen.integers(0, 20, size=abundance.shape),
        detect_coeff=gen.normal(scale=0.5, size=(j_n, qx)) - 1.0,
        detect_effects=gen.normal(scale=0.3, size=(ds.n_rows, j_n)),
        effect_var=gen.random(j_n) + 0.2,
        log_mean_abundance=np.log(abundance + 1.0) + gen.normal(scale=0.1, size=(t_n, j_n)),
        year_coeff=gen.normal(size=(j_n, qz)),
        year_cov=np.eye(j_n) * (1.0 + gen.random()),
    )


class TestCrLogPosterior:
    def test_matches_componentwise_oracle(self):
        ds, abundance = toy_cr_dataset(seed=5, n_years=2, n_days=3, n_classes=2)
        gen = RngStream(17).generator()
        priors = CRPriors(detect_coeff_sd=4.0, year_coeff_sd=3.0)
        state = _toy_state(ds, abundance, gen)
        got = cr_log_posterior(state, ds, priors)

        # independent componentwise computation
        want = 0.0
        distinct = ds.distinct()
        for t in range(ds.n_years):
            for j in range(ds.n_classes):
                n_lat = int(state.abundance[t, j])
                d_tj = int(distinct[t, j])
                want += math.log(math.comb(n_lat, d_tj))
                for r in np.nonzero(ds.row_year == t)[0]:
                    eta = float(ds.x[r] @ state.detect_coeff[j] + state.detect_effects[r, j])
                    p = 1.0 / (1.0 + math.exp(-eta))
                    n_rt = int(ds.catch[r, j])
                    want += n_rt * math.log(p) + (n_lat - n_rt) * math.log1p(-p)
                want += poisson.logpmf(n_lat, math.exp(state.log_mean_abundance[t, j]))
        for t in range(ds.n_years):
            want += multivariate_normal.logpdf(
                state.log_mean_abundance[t], state.year_coeff @ ds.z[t], state.year_cov
            )
        want += norm.logpdf(
            state.detect_effects, 0.0, np.sqrt(state.effect_var)
        ).sum()
        want += norm.logpdf(state.detect_coeff, 0.0, 4.0).sum()
        want += norm.logpdf(state.year_coeff, 0.0, 3.0).sum()
        want += invgamma.logpdf(state.effect_var, 0.1, scale=0.1).sum()
        want += invwishart.logpdf(state.year_cov, ds.n_classes + 1, np.eye(ds.n_classes))
        assert got == pytest.approx(want, rel=1e-9)

    def test_zero_column_coefficient_shifts_only_prior(self):
        ds, abundance = toy_cr_dataset(seed=6)
        ds_zero = CRDataset(
            years=ds.years, row_year=ds.row_year, day=ds.day, catch=ds.catch,
            recaptures=ds.recaptures,
            x=np.column_stack([ds.x, np.zeros(ds.n_rows)]),
            x_names=(*ds.x_names, "x_unused"),
            z=ds.z, z_names=ds.z_names, size_classes=ds.size_classes,
        )
        gen = RngStream(18).generator()
        state = _toy_state(ds_zero, abundance, gen)
        priors = CRPriors(detect_coeff_sd=2.0)
        base = cr_log_posterior(state, ds_zero, priors)
        bumped = CRState(
            state.abundance, state.detect_coeff.copy(), state.detect_effects,
            state.effect_var, state.log_mean_abundance, state.year_coeff, state.year_cov,
        )
        bumped.detect_coeff[0, 2] += 1.3
        got_delta = cr_log_posterior(bumped, ds_zero, priors) - base
        want_delta = norm.logpdf(bumped.detect_coeff[0, 2], 0, 2.0) - norm.logpdf(
            state.detect_coeff[0, 2], 0, 2.0
        )
        assert got_delta == pytest.approx(want_delta, abs=1e-10)

    def test_floor_gives_minus_inf(self):
        ds, abundance = toy_cr_dataset(seed=7)
        gen = RngStream(19).generator()
        state = _toy_state(ds, abundance, gen)
        state.abundance[0, 0] = ds.distinct()[0, 0] - 1
        assert cr_log_posterior(state, ds) == -np.inf

    def test_invalid_state_rejected(self):
        ds, abundance = toy_cr_dataset(seed=8)
        gen = RngStream(20).generator()
        state = _toy_state(ds, abundance, gen)
        state.effect_var[0] = -0.5
        with pytest.raises(ValueError):
            cr_log_posterior(state, ds)


class TestFitCr:
    def test_same_seed_bitwise_identical(self, quick_config):
        ds, _ = toy_cr_dataset(seed=9, n_years=3, n_days=2, n_classes=2)
        a = fit_cr(ds, config=quick_config, rng=RngStream(400))
        b = fit_cr(ds, config=quick_config, rng=RngStream(400))
        assert a.equals(b)
        assert a.acceptance == b.acceptance

    def test_abundance_never_below_floor(self, quick_config):
        ds, _ = toy_cr_dataset(seed=10, n_years=3, n_days=3, n_classes=2)
        chains = fit_cr(ds, config=quick_config, rng=RngStream(401))
        assert np.all(chains.get("abundance") >= ds.distinct()[None, :, :])

    def test_adaptation_frozen_after_burn_in(self, quick_config):
        ds, _ = toy_cr_dataset(seed=11)
        chains = fit_cr(ds, config=quick_config, rng=RngStream(402))
        assert chains.info["scales_at_burnin"] == chains.info["scales_final"]

    def test_seed_required(self):
        ds, _ = toy_cr_dataset(seed=12)
        with pytest.raises(ValidationError):
            fit_cr(ds, config=McmcConfig(iterations=100, burn_in=10))

    def test_config_seed_is_fallback(self):
        ds, _ = toy_cr_dataset(seed=12)
        cfg = McmcConfig(iterations=200, burn_in=50, thin=2, seed=31)
        a = fit_cr(ds, config=cfg)
        b = fit_cr(ds, config=cfg, rng=RngStream(31))
        assert a.equals(b)

    def test_parameter_recovery_default_config(self):
        # scenario-I generator, one replicate, full-length default schedule
        spec = scenario("I", base_seed=2024)
        root = RngStream(2024).split("replicate", 0)
        truth = generate_population(spec, root.split("population"))
        ds = generate_cr_data(truth, spec.beta_cr, spec.sigma2, spec, root.split("cr_data"))
        chains = fit_cr(ds, config=McmcConfig(), rng=root.split("fit_cr"))
        beta1 = chains.get("detect_coeff")[:, 0, :].mean(axis=0)
        assert np.all(np.abs(beta1 - np.array([-3.5, -2.0, 0.5])) <= 0.5)

    def test_moments_stored_with_chains(self, quick_config):
        ds, _ = toy_cr_dataset(seed=13)
        chains = fit_cr(ds, config=quick_config, rng=RngStream(403))
        assert chains.moments is not None
        assert chains.moments.names == ds.x_names
        assert chains.moments.sd[0] == 1.0  # intercept untouched
        assert chains.dataset_hash == ds.content_hash()


class TestGibbsBlocks:
    def test_variance_block_moments(self):
        gen = RngStream(500).generator()
        eps = gen.normal(scale=0.6, size=30)
        shape0, rate0 = 2.0, 1.5
        shape_post = shape0 + 15.0
        rate_post = rate0 + 0.5 * float(eps @ eps)
        n = 40_000
        draws = np.array(
            [gibbs_variance(float(eps @ eps), rate0, g) for g in gen.gamma(shape_post, 1.0, n)]
        )
        want_mean = rate_post / (shape_post - 1.0)
        want_var = rate_post**2 / ((shape_post - 1.0) ** 2 * (shape_post - 2.0))
        assert abs(draws.mean() - want_mean) <= 5 * np.sqrt(want_var / n)
        se_var = want_var * np.sqrt(2.0 / n) * 3.0  # inflate for kurtosis
        assert abs(draws.var() - want_var) <= 5 * se_var

    def test_coeff_matrix_block_moments(self):
        gen = RngStream(501).generator()
        t_n, j_n, qz = 20, 2, 2
        z = np.column_stack([np.ones(t_n), gen.normal(size=t_n)])
        y = gen.normal(size=(t_n, j_n)) + 3.0
        cov_inv = np.linalg.inv(np.array([[0.8, 0.2], [0.2, 1.1]]))
        pm = np.full((j_n, qz), 0.3)
        pp = np.full((j_n, qz), 1.0 / 2.0**2)
        # independent derivation of the conditional
        prec = np.kron(cov_inv, z.T @ z) + np.diag(pp.ravel())
        rhs = (cov_inv @ (y.T @ z)).ravel() + pp.ravel() * pm.ravel()
        want_mean = np.linalg.solve(prec, rhs)
        want_cov = np.linalg.inv(prec)
        n = 20_000
        draws = np.array(
            [
                gibbs_coeff_matrix(y, z, cov_inv, pm, pp, gen.standard_normal(j_n * qz)).ravel()
                for _ in range(n)
            ]
        )
        se_mean = np.sqrt(np.diag(want_cov) / n)
        assert np.all(np.abs(draws.mean(axis=0) - want_mean) <= 5 * se_mean)
        se_var = np.diag(want_cov) * np.sqrt(2.0 / n)
        assert np.all(np.abs(draws.var(axis=0) - np.diag(want_cov)) <= 5 * se_var)

    def test_covariance_block_moments(self):
        gen = RngStream(502).generator()
        t_n, j_n = 25, 2
        resid = gen.normal(size=(t_n, j_n)) @ np.array([[1.0, 0.0], [0.4, 0.8]])
        scale0, dof0 = np.eye(j_n), 3.0
        scale_post = scale0 + resid.T @ resid
        dof_post = dof0 + t_n
        want_mean = scale_post / (dof_post - j_n - 1.0)
        n = 40_000
        chi2_df = dof_post - np.arange(j_n)
        draws = np.zeros((n, j_n, j_n))
        for i in range(n):
            draws[i] = gibbs_covariance(
                resid, scale0, dof0, gen.standard_normal((j_n, j_n)), gen.chisquare(chi2_df)
            )
        sample_mean = draws.mean(axis=0)
        se = draws.std(axis=0) / np.sqrt(n)
        assert np.all(np.abs(sample_mean - want_mean) <= 5 * se)

    def test_covariance_block_matches_scipy_density_mean(self):
        # cross-check the analytic conditional against scipy's inverse-Wishart mean
        scale_post = np.array([[3.0, 0.5], [0.5, 2.0]])
        dof_post = 12.0
        assert np.allclose(
            invwishart.mean(df=dof_post, scale=scale_post),
            scale_post / (dof_post - 2 - 1),
        )


class TestMeanDetection:
    def _chains(self, ds, beta_rows, eps_rows):
        s = beta_rows.shape[0]
        return PosteriorChains(
            draws={
                "detect_coeff": beta_rows.reshape(s, -1),
                "detect_effects": eps_rows.reshape(s, -1),
            },
            shapes={
                "detect_coeff": beta_rows.shape[1:],
                "detect_effects": eps_rows.shape[1:],
            },
            config=McmcConfig(iterations=2, burn_in=1, thin=1),
            dataset_hash=ds.content_hash(),
            moments=CovariateMoments(ds.x_names, (0.0,) * len(ds.x_names), (1.0,) * len(ds.x_names)),
        )

    def test_degenerate_chain_constant_p(self):
        ds, _ = toy_cr_dataset(seed=14, n_years=2, n_days=2)
        beta = np.zeros((5, 1, 2))
        eps = np.full((5, ds.n_rows, 1), logit(0.3))
        phat = mean_detection_phat(self._chains(ds, beta, eps), ds)
        assert phat[0] == pytest.approx(0.3, abs=1e-12)

    def test_two_day_average(self):
        ds, _ = toy_cr_dataset(seed=15, n_years=1, n_days=2)
        beta = np.zeros((3, 1, 2))
        eps = np.empty((3, 2, 1))
        eps[:, 0, 0] = logit(0.2)
        eps[:, 1, 0] = logit(0.4)
        phat = mean_detection_phat(self._chains(ds, beta, eps), ds)
        assert phat[0] == pytest.approx(0.3, abs=1e-12)

    def test_matches_bruteforce_enumeration(self):
        ds, _ = toy_cr_dataset(seed=16, n_years=3, n_days=2, n_classes=2)
        gen = RngStream(600).generator()
        beta = gen.normal(size=(7, 2, 2)) * 0.5 - 1.0
        eps = gen.normal(size=(7, ds.n_rows, 2)) * 0.3
        phat = mean_detection_phat(self._chains(ds, beta, eps), ds)
        for j in range(2):
            per_year = []
            for t in range(ds.n_years):
                rows = np.nonzero(ds.row_year == t)[0]
                day_means = []
                for r in rows:
                    vals = [
                        inv_logit(float(ds.x[r] @ beta[s, j] + eps[s, r, j]))
                        for s in range(7)
                    ]
                    day_means.append(np.mean(vals))
                per_year.append(np.mean(day_means))
            assert phat[j] == pytest.approx(np.mean(per_year), rel=1e-12)

    def test_missing_parameters_rejected(self):
        ds, _ = toy_cr_dataset(seed=14)
        chains = self._chains(ds, np.zeros((2, 1, 2)), np.zeros((2, ds.n_rows, 1)))
        del chains.draws["detect_effects"]
        del chains.shapes["detect_effects"]
        with pytest.raises(ValidationError):
            mean_detection_phat(chains, ds)


class TestDatasetValidation:
    def test_recaptures_exceeding_pool_located(self):
        with pytest.raises(ValidationError, match=r"year=2001, day=2"):
            CRDataset(
                years=np.array([2001]),
                row_year=np.array([0, 0]),
                day=np.array([1, 2]),
                catch=np.array([[3], [4]]),
                recaptures=np.array([[0], [4]]),
                x=np.ones((2, 1)),
                x_names=("intercept",),
                z=np.ones((1, 1)),
                z_names=("intercept",),
                size_classes=(1,),
            )

    def test_first_day_recaptures_rejected(self):
        with pytest.raises(ValidationError, match="first day"):
            CRDataset(
                years=np.array([2001]),
                row_year=np.array([0, 0]),
                day=np.array([1, 2]),
                catch=np.array([[3], [4]]),
                recaptures=np.array([[1], [0]]),
                x=np.ones((2, 1)),
                x_names=("intercept",),
                z=np.ones((1, 1)),
                z_names=("intercept",),
                size_classes=(1,),
            )

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            McmcConfig(iterations=50, burn_in=60, thin=1)
        with pytest.raises(ValueError):
            McmcConfig(iterations=50, burn_in=10, thin=0)
