"""Capture-recapture hierarchical abundance model.

Observation layer: within each year a closed population of each size class
is sampled on several days; every caught fish is marked before release, so
a day's catch splits into new (unmarked) fish and recaptures. Given the
per-day detection probabilities, the likelihood kernel for one (year, size
class) cell is

    C(N, D) * prod_k p_k^{n_k} (1 - p_k)^(N - n_k)

where n_k is the day-k catch, D the number of distinct fish caught over the
year, and N the latent abundance (exact up to a factor that depends only on
the data). Detection is logit-linear in standardized day covariates with a
per-class random effect; abundance is Poisson around a log-mean that is
jointly normal across size classes given year covariates.

``fit_cr`` runs a Metropolis-within-Gibbs sampler over the full posterior.
Per sweep: (a) integer random-walk updates of every latent abundance,
(b) blockwise adaptive random-walk updates of each class's detection
coefficients, (c) univariate updates of every detection random effect,
followed by an interweaving move that redraws the coefficients from their
exact Gaussian conditional holding the per-day linear predictors fixed
(the random effects absorb the shift; without this the coefficients and
effects mix far too slowly because they are additively confounded),
(d) conjugate inverse-gamma draws of the effect variances, (e) elementwise
updates of the log-mean layer, (f) a conjugate matrix-normal draw of the
year-coefficient matrix, (g) a conjugate inverse-Wishart draw of the
cross-class covariance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from . import kernels
from ._updates import (
    chol_solve_draw,
    gibbs_coeff_matrix,
    gibbs_covariance,
    gibbs_variance,
    precision_from_covariance,
)
from .chains import McmcConfig, PosteriorChains, standardize_columns
from .errors import FitError, ValidationError
from .rng import RngStream
from .stats import (
    inv_gamma_logpdf,
    inv_logit,
    inv_wishart_logpdf,
    logit,
    mvn_logpdf,
    normal_logpdf,
    poisson_logpmf,
)

__all__ = [
    "CRDataset",
    "CRPriors",
    "CRState",
    "cr_log_posterior",
    "cr_loglik",
    "detection_prob",
    "fit_cr",
    "mean_detection_phat",
]

_CHUNK = 512  # iterations of proposal noise pre-drawn at a time (fixed: part of the draw order)


@dataclass(frozen=True, eq=False)
class CRDataset:
    """Capture-recapture observations for all years, days and size classes.

    Day rows are sorted by (year, day); covariates are stored per day row
    (detection, includes an intercept column) and per year (abundance layer,
    also with intercept). Counts are (n_rows, n_classes): total catch and
    the recaptured (previously marked) part of it.
    """

    years: np.ndarray            # (T,) ints, strictly increasing
    row_year: np.ndarray         # (R,) index into years per day row
    day: np.ndarray              # (R,) day label, increasing within year
    catch: np.ndarray            # (R, J) ints
    recaptures: np.ndarray       # (R, J) ints
    x: np.ndarray                # (R, qx) detection covariates, col 0 intercept
    x_names: tuple[str, ...]
    z: np.ndarray                # (T, qz) year covariates, col 0 intercept
    z_names: tuple[str, ...]
    size_classes: tuple[int, ...]

    def __post_init__(self) -> None:
        years = np.asarray(self.years, dtype=np.int64)
        if years.ndim != 1 or np.any(np.diff(years) <= 0):
            raise ValidationError("years must be strictly increasing")
        r, j = self.catch.shape
        if self.recaptures.shape != (r, j) or self.row_year.shape != (r,):
            raise ValidationError("count arrays must be (n_rows, n_classes)")
        if self.x.shape[0] != r or self.z.shape[0] != years.size:
            raise ValidationError("covariate row counts do not match the data")
        if len(self.x_names) != self.x.shape[1] or len(self.z_names) != self.z.shape[1]:
            raise ValidationError("covariate names do not match column counts")
        if len(self.size_classes) != j:
            raise ValidationError("size_classes must name every count column")
        if r == 0:
            raise ValidationError("dataset has no day rows")
        key = self.row_year * (self.day.max() + 1) + self.day
        if np.any(np.diff(key) <= 0):
            raise ValidationError("day rows must be sorted by (year, day) without duplicates")
        if np.any(self.catch < 0) or np.any(self.recaptures < 0):
            raise ValidationError("counts must be non-negative")
        if np.any(self.recaptures > self.catch):
            raise ValidationError("recaptures cannot exceed the catch")
        first = self.year_starts()
        if np.any(self.recaptures[first] != 0):
            raise ValidationError("recaptures must be zero on the first day of each year")
        if np.any(self.recaptures > self.marked_pool()):
            t, k = np.nonzero(self.recaptures > self.marked_pool())
            raise ValidationError(
                "recaptures exceed the marked pool at day row "
                f"(year={self.years[self.row_year[t[0]]]}, day={self.day[t[0]]}, "
                f"size_class={self.size_classes[k[0]]})"
            )

    @property
    def n_years(self) -> int:
        return self.years.size

    @property
    def n_classes(self) -> int:
        return self.catch.shape[1]

    @property
    def n_rows(self) -> int:
        return self.catch.shape[0]

    def year_starts(self) -> np.ndarray:
        """Index of the first day row of each year (rows are year-sorted)."""
        return np.searchsorted(self.row_year, np.arange(self.n_years))

    def days_per_year(self) -> np.ndarray:
        return np.bincount(self.row_year, minlength=self.n_years)

    def marked_pool(self) -> np.ndarray:
        """Marked fish available per (row, class): cumulative new catches of earlier days."""
        new = self.catch - self.recaptures
        pool = np.zeros_like(new)
        for t in range(self.n_years):
            rows = np.nonzero(self.row_year == t)[0]
            pool[rows[1:]] = np.cumsum(new[rows[:-1]], axis=0)
        return pool

    def distinct(self) -> np.ndarray:
        """Distinct fish caught per (year, class): the support floor for abundance."""
        out = np.zeros((self.n_years, self.n_classes), dtype=np.int64)
        np.add.at(out, self.row_year, self.catch - self.recaptures)
        return out

    def content_hash(self) -> str:
        from .io import dataset_hash

        return dataset_hash(self)


@dataclass(frozen=True)
class CRPriors:
    """Prior hyperparameters for the capture-recapture model.

    Regression coefficients get independent normals (scalar hyperparameters
    broadcast; arrays allow per-coefficient settings, which the calibration
    tests use). The effect variances get shape-rate inverse-gammas and the
    cross-class covariance an inverse-Wishart (scale defaults to the
    identity, dof to n_classes + 1).
    """

    detect_coeff_mean: float | np.ndarray = 0.0
    detect_coeff_sd: float | np.ndarray = 10.0
    year_coeff_mean: float | np.ndarray = 0.0
    year_coeff_sd: float | np.ndarray = 10.0
    effect_var_shape: float = 0.1
    effect_var_rate: float = 0.1
    year_cov_scale: np.ndarray | None = None
    year_cov_dof: float | None = None

    def detect_coeff_moments(self, j: int, qx: int) -> tuple[np.ndarray, np.ndarray]:
        mean = np.broadcast_to(np.asarray(self.detect_coeff_mean, dtype=float), (j, qx)).copy()
        sd = np.broadcast_to(np.asarray(self.detect_coeff_sd, dtype=float), (j, qx)).copy()
        return mean, sd

    def year_coeff_moments(self, j: int, qz: int) -> tuple[np.ndarray, np.ndarray]:
        mean = np.broadcast_to(np.asarray(self.year_coeff_mean, dtype=float), (j, qz)).copy()
        sd = np.broadcast_to(np.asarray(self.year_coeff_sd, dtype=float), (j, qz)).copy()
        return mean, sd

    def year_cov_prior(self, j: int) -> tuple[np.ndarray, float]:
        scale = np.eye(j) if self.year_cov_scale is None else np.asarray(self.year_cov_scale, float)
        dof = float(j + 1 if self.year_cov_dof is None else self.year_cov_dof)
        return scale, dof


@dataclass
class CRState:
    """One full parameter state of the capture-recapture model."""

    abundance: np.ndarray         # (T, J) integers
    detect_coeff: np.ndarray      # (J, qx)
    detect_effects: np.ndarray    # (R, J)
    effect_var: np.ndarray        # (J,)
    log_mean_abundance: np.ndarray  # (T, J)
    year_coeff: np.ndarray        # (J, qz)
    year_cov: np.ndarray          # (J, J)


def cr_loglik(n_total: int, p: Sequence[float], counts) -> float:
    """Exact log of the capture-recapture likelihood kernel for one cell.

    ``counts`` pairs (catch, recaptures) per day, aligned with the per-day
    detection probabilities ``p``. Requires the sampling-protocol count
    constraints and n_total at least the number of distinct fish caught.
    """
    p = np.asarray(p, dtype=float)
    counts = np.asarray(counts, dtype=np.int64)
    if counts.ndim != 2 or counts.shape[1] != 2 or counts.shape[0] != p.size:
        raise ValueError("counts must pair (catch, recaptures) per day")
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("detection probabilities must lie strictly inside (0, 1)")
    n_day, m_day = counts[:, 0], counts[:, 1]
    if np.any(m_day > n_day) or np.any(m_day < 0):
        raise ValueError("recaptures must lie in [0, catch] for every day")
    new = n_day - m_day
    pool = np.concatenate([[0], np.cumsum(new[:-1])])
    if np.any(m_day > pool):
        raise ValueError("recaptures exceed the marked pool")
    distinct = int(new.sum())
    n_total = int(n_total)
    if n_total < distinct:
        raise ValueError(f"abundance {n_total} is below the distinct-animal floor {distinct}")
    log_choose = (
        gammaln(n_total + 1.0) - gammaln(distinct + 1.0) - gammaln(n_total - distinct + 1.0)
    )
    return float(log_choose + np.sum(n_day * np.log(p) + (n_total - n_day) * np.log1p(-p)))


def detection_prob(x: Sequence[float], beta: Sequence[float], eps: float) -> float:
    """Detection probability: logistic of the covariate effect plus the random effect."""
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if x.shape != beta.shape:
        raise ValueError(f"covariate/coefficient dimension mismatch: {x.shape} vs {beta.shape}")
    return float(inv_logit(float(x @ beta) + eps))


def _log_posterior_parts(
    state: CRState,
    x: np.ndarray,
    row_year: np.ndarray,
    catch: np.ndarray,
    recaptures: np.ndarray,
    z: np.ndarray,
    priors: CRPriors,
) -> float:
    t_n, j_n = state.abundance.shape
    r_n, qx = x.shape
    qz = z.shape[1]
    if np.any(state.effect_var <= 0.0):
        raise ValueError("effect variances must be positive")

    new = catch - recaptures
    distinct = np.zeros((t_n, j_n), dtype=np.int64)
    np.add.at(distinct, row_year, new)
    n_lat = state.abundance
    if np.any(n_lat < distinct):
        return -np.inf

    eta = x @ state.detect_coeff.T + state.detect_effects          # (R, J)
    n_per_row = n_lat[row_year]                                    # (R, J)
    loglik = float(
        np.sum(catch * eta - n_per_row * np.logaddexp(0.0, eta))
        + np.sum(
            gammaln(n_lat + 1.0)
            - gammaln(distinct + 1.0)
            - gammaln(n_lat - distinct + 1.0)
        )
    )

    theta = np.exp(state.log_mean_abundance)
    lp_pois = float(np.sum(poisson_logpmf(n_lat, theta)))

    mu = z @ state.year_coeff.T
    lp_layer = sum(
        mvn_logpdf(state.log_mean_abundance[t], mu[t], state.year_cov) for t in range(t_n)
    )

    lp_eps = float(np.sum(normal_logpdf(state.detect_effects, 0.0, state.effect_var)))

    bm, bs = priors.detect_coeff_moments(j_n, qx)
    am, asd = priors.year_coeff_moments(j_n, qz)
    scale0, dof0 = priors.year_cov_prior(j_n)
    lp_prior = (
        float(np.sum(normal_logpdf(state.detect_coeff, bm, bs**2)))
        + float(np.sum(normal_logpdf(state.year_coeff, am, asd**2)))
        + sum(
            inv_gamma_logpdf(v, priors.effect_var_shape, priors.effect_var_rate)
            for v in state.effect_var
        )
        + inv_wishart_logpdf(state.year_cov, scale0, dof0)
    )
    return loglik + lp_pois + lp_layer + lp_eps + lp_prior


def cr_log_posterior(state: CRState, data: CRDataset, priors: CRPriors | None = None) -> float:
    """Joint log-posterior density at a full state, up to the data-only constant.

    Returns -inf when any latent abundance sits below its distinct-animal
    floor; raises on structurally invalid states (non-positive variances,
    covariance not positive-definite). Covariates are used exactly as stored
    on the dataset.
    """
    priors = priors or CRPriors()
    return _log_posterior_parts(
        state, np.asarray(data.x, float), data.row_year, data.catch, data.recaptures,
        np.asarray(data.z, float), priors,
    )


def _resolve_rng(rng: RngStream | None, config: McmcConfig) -> np.random.Generator:
    if rng is not None:
        return rng.generator()
    if config.seed is not None:
        return RngStream(config.seed).generator()
    raise ValidationError("a seed is required: pass an RngStream or set McmcConfig.seed")


def fit_cr(
    data: CRDataset,
    priors: CRPriors | None = None,
    config: McmcConfig | None = None,
    rng: RngStream | None = None,
) -> PosteriorChains:
    """Fit the capture-recapture model by Metropolis-within-Gibbs.

    Detection covariates are standardized to dataset moments first; the
    moments travel with the returned chains so downstream transfer fits can
    reproduce the same scaling. Stored draws are post-burn-in and thinned.
    Same (data, priors, config, rng) always reproduces the chains bitwise
    for a given kernel backend.
    """
    priors = priors or CRPriors()
    config = config or McmcConfig()
    gen = _resolve_rng(rng, config)

    t_n, j_n, r_n = data.n_years, data.n_classes, data.n_rows
    qx, qz = data.x.shape[1], data.z.shape[1]
    xs, moments = standardize_columns(data.x, data.x_names)
    z = np.asarray(data.z, dtype=float)
    d_per_year = data.days_per_year()
    starts = data.year_starts()

    # class-major layouts so each class row is contiguous for the kernels
    catch_jr = np.ascontiguousarray(data.catch.T, dtype=float)      # (J, R)
    distinct_jt = np.ascontiguousarray(data.distinct().T, dtype=float)  # (J, T)

    # --- initial state ------------------------------------------------------
    abundance = 2.0 * distinct_jt + 1.0                              # (J, T)
    beta = np.zeros((j_n, qx))
    for j in range(j_n):
        exposure = float(np.sum(d_per_year * abundance[j]))
        p0 = np.clip(catch_jr[j].sum() / exposure, 1e-6, 1.0 - 1e-6)
        beta[j, 0] = np.clip(logit(p0), -5.0, -1.0)
    eps = np.zeros((j_n, r_n))
    sig2 = np.ones(j_n)
    log_mean = np.log(abundance)                                     # (J, T)
    coeff, *_ = np.linalg.lstsq(z, log_mean.T, rcond=None)
    coeff = np.ascontiguousarray(coeff.T)                            # (J, qz)
    omega = np.eye(j_n)

    init_state = CRState(
        abundance.T.astype(np.int64), beta.copy(), eps.T.copy(), sig2.copy(),
        log_mean.T.copy(), coeff.copy(), omega.copy(),
    )
    lp0 = _log_posterior_parts(
        init_state, xs, data.row_year, data.catch, data.recaptures, z, priors
    )
    if not np.isfinite(lp0):
        raise FitError("initial posterior is not finite; check the dataset")

    bm, bs = priors.detect_coeff_moments(j_n, qx)
    beta_prec = 1.0 / bs**2
    am, asd = priors.year_coeff_moments(j_n, qz)
    year_prec = 1.0 / asd**2
    scale0, dof0 = priors.year_cov_prior(j_n)
    gamma_shape = priors.effect_var_shape + 0.5 * r_n
    chi2_df = (dof0 + t_n) - np.arange(j_n)
    xtx = xs.T @ xs

    # caches
    xb = np.ascontiguousarray(beta @ xs.T)                           # (J, R)
    prec = precision_from_covariance(omega)
    mu = np.ascontiguousarray((z @ coeff.T).T)                       # (J, T)
    total_jr = np.empty((j_n, r_n))
    inv2s = np.empty((j_n, r_n))
    ones_t = np.ones(t_n)

    # adaptive proposal scales
    width = np.maximum(1.0, np.sqrt(abundance)).ravel()              # (J*T,)
    beta_scale = np.full(j_n, 0.1)
    eps_scale = np.full(j_n * r_n, 1.0)
    lm_scale = np.full((j_n, t_n), 0.5)

    n_flat = abundance.reshape(-1)
    floor_flat = distinct_jt.reshape(-1)
    eps_flat = eps.reshape(-1)
    xb_flat = xb.reshape(-1)
    acc_n = np.empty(j_n * t_n, dtype=np.uint8)
    acc_eps = np.empty(j_n * r_n, dtype=np.uint8)
    acc_lm = np.empty((j_n, t_n), dtype=np.uint8)

    n_stored = config.n_stored
    store = {
        "abundance": np.empty((n_stored, t_n * j_n)),
        "detect_coeff": np.empty((n_stored, j_n * qx)),
        "detect_effects": np.empty((n_stored, r_n * j_n)),
        "effect_var": np.empty((n_stored, j_n)),
        "log_mean_abundance": np.empty((n_stored, t_n * j_n)),
        "year_coeff": np.empty((n_stored, j_n * qz)),
        "year_cov": np.empty((n_stored, j_n * j_n)),
    }
    shapes = {
        "abundance": (t_n, j_n),
        "detect_coeff": (j_n, qx),
        "detect_effects": (r_n, j_n),
        "effect_var": (j_n,),
        "log_mean_abundance": (t_n, j_n),
        "year_coeff": (j_n, qz),
        "year_cov": (j_n, j_n),
    }

    tallies = {"abundance": 0.0, "detect_effects": 0.0, "log_mean_abundance": 0.0}
    tallies.update({f"detect_coeff_{c}": 0.0 for c in data.size_classes})
    post_iters = config.iterations - config.burn_in
    scales_at_burnin: dict[str, list[float]] = {}

    stored = 0
    target_s = config.target_accept_scalar
    target_b = config.target_accept_block

    for start in range(0, config.iterations, _CHUNK):
        c = min(_CHUNK, config.iterations - start)
        # fixed pre-draw order per chunk
        nu = gen.random((c, j_n * t_n))
        nlu = np.log(gen.random((c, j_n * t_n)))
        bz = gen.standard_normal((c, j_n, qx))
        blu = np.log(gen.random((c, j_n)))
        ez = gen.standard_normal((c, j_n * r_n))
        elu = np.log(gen.random((c, j_n * r_n)))
        rz = gen.standard_normal((c, j_n, qx))
        gam = gen.gamma(gamma_shape, 1.0, size=(c, j_n))
        lz = gen.standard_normal((c, j_n, t_n))
        llu = np.log(gen.random((c, j_n, t_n)))
        an = gen.standard_normal((c, j_n * qz))
        on = gen.standard_normal((c, j_n, j_n))
        oc2 = gen.chisquare(np.broadcast_to(chi2_df, (c, j_n)))

        for k in range(c):
            i = start + k

            # (a) latent abundance
            eta = xb + eps
            slogq = np.add.reduceat(-np.logaddexp(0.0, eta), starts, axis=1)
            kernels.abundance_sweep(
                n_flat, floor_flat, log_mean.reshape(-1), slogq.reshape(-1),
                nu[k], nlu[k], width, acc_n,
            )

            # (b) detection coefficient blocks
            np.take(abundance, data.row_year, axis=1, out=total_jr)
            acc_b = np.zeros(j_n)
            for j in range(j_n):
                dxb = xs @ bz[k, j]
                acc_b[j] = kernels.coeff_block_step(
                    beta[j], xb[j], eps[j], dxb, catch_jr[j], total_jr[j],
                    bm[j], beta_prec[j], bz[k, j], float(blu[k, j]), float(beta_scale[j]),
                )

            # (c) detection random effects
            inv2s[:] = (0.5 / sig2)[:, None]
            kernels.detect_effects_sweep(
                eps_flat, xb_flat, catch_jr.reshape(-1), total_jr.reshape(-1),
                inv2s.reshape(-1), ez[k], elu[k], eps_scale, acc_eps,
            )

            # interweaving: exact Gaussian redraw of the coefficients with the
            # linear predictors held fixed (likelihood-invariant), effects recomputed
            for j in range(j_n):
                lin_pred = xb[j] + eps[j]
                cond_prec = xtx / sig2[j]
                cond_prec.flat[:: qx + 1] += beta_prec[j]
                rhs = xs.T @ lin_pred / sig2[j] + beta_prec[j] * bm[j]
                beta[j] = chol_solve_draw(cond_prec, rhs, rz[k, j])
                xb[j] = xs @ beta[j]
                eps[j] = lin_pred - xb[j]

            # (d) effect variances
            for j in range(j_n):
                sig2[j] = gibbs_variance(
                    float(eps[j] @ eps[j]), priors.effect_var_rate, float(gam[k, j])
                )

            # (e) log-mean layer
            for j in range(j_n):
                resid = log_mean - mu
                cross = prec[j] @ resid - prec[j, j] * resid[j]
                kernels.log_mean_sweep(
                    log_mean[j], abundance[j], ones_t, mu[j], float(prec[j, j]),
                    cross, lz[k, j], llu[k, j], lm_scale[j], acc_lm[j],
                )

            # (f) year-coefficient matrix
            coeff = gibbs_coeff_matrix(log_mean.T, z, prec, am, year_prec, an[k])
            mu = np.ascontiguousarray((z @ coeff.T).T)

            # (g) cross-class covariance
            omega = gibbs_covariance(log_mean.T - mu.T, scale0, dof0, on[k], oc2[k])
            prec = precision_from_covariance(omega)

            if i < config.burn_in:
                gain = config.adapt_gain / (1.0 + i) ** config.adapt_decay
                width *= np.exp(gain * (acc_n - target_s))
                np.clip(width, 1.0, 1e9, out=width)
                beta_scale *= np.exp(gain * (acc_b - target_b))
                np.clip(beta_scale, 1e-6, 50.0, out=beta_scale)
                eps_scale *= np.exp(gain * (acc_eps - target_s))
                np.clip(eps_scale, 1e-4, 50.0, out=eps_scale)
                lm_scale *= np.exp(gain * (acc_lm - target_s))
                np.clip(lm_scale, 1e-4, 50.0, out=lm_scale)
            else:
                tallies["abundance"] += acc_n.mean()
                tallies["detect_effects"] += acc_eps.mean()
                tallies["log_mean_abundance"] += acc_lm.mean()
                for j, label in enumerate(data.size_classes):
                    tallies[f"detect_coeff_{label}"] += acc_b[j]

            if i == config.burn_in - 1 or (config.burn_in == 0 and i == 0):
                scales_at_burnin = {
                    "abundance_width": width.tolist(),
                    "detect_coeff": beta_scale.tolist(),
                    "detect_effects": eps_scale.tolist(),
                    "log_mean_abundance": lm_scale.ravel().tolist(),
                }

            if i >= config.burn_in and (i - config.burn_in) % config.thin == 0:
                store["abundance"][stored] = abundance.T.ravel()
                store["detect_coeff"][stored] = beta.ravel()
                store["detect_effects"][stored] = eps.T.ravel()
                store["effect_var"][stored] = sig2
                store["log_mean_abundance"][stored] = log_mean.T.ravel()
                store["year_coeff"][stored] = coeff.ravel()
                store["year_cov"][stored] = omega.ravel()
                stored += 1

    acceptance = {k: v / post_iters for k, v in tallies.items()}
    scales_final = {
        "abundance_width": width.tolist(),
        "detect_coeff": beta_scale.tolist(),
        "detect_effects": eps_scale.tolist(),
        "log_mean_abundance": lm_scale.ravel().tolist(),
    }
    chains = PosteriorChains(
        draws=store,
        shapes=shapes,
        config=config,
        dataset_hash=data.content_hash(),
        moments=moments,
        acceptance=acceptance,
        info={
            "model": "capture_recapture",
            "years": data.years.tolist(),
            "size_classes": list(data.size_classes),
            "x_names": list(data.x_names),
            "z_names": list(data.z_names),
            "days_per_year": d_per_year.tolist(),
            "scales_at_burnin": scales_at_burnin,
            "scales_final": scales_final,
        },
    )
    chains.info["mean_detection"] = mean_detection_phat(chains, data).tolist()
    return chains


def mean_detection_phat(chains: PosteriorChains, data: CRDataset) -> np.ndarray:
    """Per-class mean detection probability implied by a capture-recapture fit.

    Averages the posterior-mean per-day detection probabilities first within
    each year (over its days) and then across years, giving the scalar used
    to put naive CPUE output on the abundance scale.
    """
    for name in ("detect_coeff", "detect_effects"):
        if name not in chains.draws:
            raise ValidationError(f"chains are missing the {name!r} draws")
    if chains.moments is None:
        raise ValidationError("chains carry no covariate standardization moments")
    xs = chains.moments.transform(np.asarray(data.x, float))
    beta = chains.get("detect_coeff")         # (S, J, qx)
    eps = chains.get("detect_effects")        # (S, R, J)
    p_mean = np.zeros((data.n_rows, data.n_classes))
    for s in range(beta.shape[0]):
        p_mean += inv_logit(xs @ beta[s].T + eps[s])
    p_mean /= beta.shape[0]
    starts = data.year_starts()
    per_year = np.add.reduceat(p_mean, starts, axis=0) / data.days_per_year()[:, None]
    return per_year.mean(axis=0)
