"""Naive catch-per-unit-effort abundance model.

Counts are Poisson with a known effort offset: y ~ Pois(rate * effort),
where the latent per-(year, class) rate is a relative abundance index. The
rates are jointly lognormal across size classes given year covariates, the
same Gaussian layer the capture-recapture model uses for its abundance
means. Count data carry no information about detection, so the rate is
only proportional to true abundance; ``rescale_naive`` divides draws by a
per-class mean detection probability (from a capture-recapture fit) to put
them on the abundance scale for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._updates import gibbs_coeff_matrix, gibbs_covariance, precision_from_covariance
from .chains import McmcConfig, PosteriorChains
from .crmodel import _CHUNK, _resolve_rng
from .errors import ValidationError
from .rng import RngStream
from .stats import poisson_logpmf

__all__ = ["CPUEDataset", "CpuePriors", "cpue_loglik", "fit_cpue_naive", "rescale_naive"]




@dataclass(frozen=True, eq=False)
class CPUEDataset:
    """Catch-per-unit-effort observations: counts with effort per sampling day.

    Same layout as the capture-recapture dataset (day rows sorted by
    (year, day), per-row detection covariates with an intercept column,
    per-year covariates), but a single count per class and a positive effort
    shared across size classes within a day.
    """

    years: np.ndarray           # (T,) ints, strictly increasing
    row_year: np.ndarray        # (R,)
    day: np.ndarray             # (R,)
    count: np.ndarray           # (R, J) ints
    effort: np.ndarray          # (R,) positive
    x: np.ndarray               # (R, qx)
    x_names: tuple[str, ...]
    z: np.ndarray               # (T, qz)
    z_names: tuple[str, ...]
    size_classes: tuple[int, ...]

    def __post_init__(self) -> None:
        years = np.asarray(self.years, dtype=np.int64)
        if years.ndim != 1 or np.any(np.diff(years) <= 0):
            raise ValidationError("years must be strictly increasing")
        r, j = self.count.shape
        if self.row_year.shape != (r,) or self.effort.shape != (r,):
            raise ValidationError("count/effort arrays must share the day rows")
        if self.x.shape[0] != r or self.z.shape[0] != years.size:
            raise ValidationError("covariate row counts do not match the data")
        if len(self.x_names) != self.x.shape[1] or len(self.z_names) != self.z.shape[1]:
            raise ValidationError("covariate names do not match column counts")
        if len(self.size_classes) != j:
            raise ValidationError("size_classes must name every count column")
        if np.any(self.count < 0):
            raise ValidationError("counts must be non-negative")
        if np.any(~np.isfinite(self.effort)) or np.any(self.effort <= 0.0):
            raise ValidationError("effort must be positive")
        if r == 0:
            raise ValidationError("dataset has no day rows")
        key = self.row_year * (self.day.max() + 1) + self.day
        if np.any(np.diff(key) <= 0):
            raise ValidationError("day rows must be sorted by (year, day) without duplicates")

    @property
    def n_years(self) -> int:
        return self.years.size

    @property
    def n_classes(self) -> int:
        return self.count.shape[1]

    @property
    def n_rows(self) -> int:
        return self.count.shape[0]

    def year_starts(self) -> np.ndarray:
        return np.searchsorted(self.row_year, np.arange(self.n_years))

    def days_per_year(self) -> np.ndarray:
        return np.bincount(self.row_year, minlength=self.n_years)

    def content_hash(self) -> str:
        from .io import dataset_hash

        return dataset_hash(self)


@dataclass(frozen=True)
class CpuePriors:
    """Priors for the CPUE models: normal coefficients, inverse-Wishart covariance."""

    year_coeff_mean: float | np.ndarray = 0.0
    year_coeff_sd: float | np.ndarray = 10.0
    rate_cov_scale: np.ndarray | None = None
    rate_cov_dof: float | None = None

    def year_coeff_moments(self, j: int, qz: int) -> tuple[np.ndarray, np.ndarray]:
        mean = np.broadcast_to(np.asarray(self.year_coeff_mean, dtype=float), (j, qz)).copy()
        sd = np.broadcast_to(np.asarray(self.year_coeff_sd, dtype=float), (j, qz)).copy()
        return mean, sd

    def rate_cov_prior(self, j: int) -> tuple[np.ndarray, float]:
        scale = np.eye(j) if self.rate_cov_scale is None else np.asarray(self.rate_cov_scale, float)
        dof = float(j + 1 if self.rate_cov_dof is None else self.rate_cov_dof)
        return scale, dof


def cpue_loglik(rate: float, effort: float, y: int) -> float:
    """Poisson log-likelihood of one count at the given rate and effort offset."""
    if rate <= 0.0 or effort <= 0.0:
        raise ValueError("rate and effort must be positive")
    return float(poisson_logpmf(int(y), rate * effort))


def _fit_rate_layer(
    data: CPUEDataset,
    e_eff_for_iter,
    priors: CpuePriors,
    config: McmcConfig,
    gen: np.random.Generator,
    refresh: int = 1,
    extra_predraw=None,
    record_extra=None,
):
    """Shared Metropolis-within-Gibbs loop for the two CPUE models.

    ``e_eff_for_iter(i, chunk_draws, k) -> (J, T)`` supplies the effective
    exposure multiplying the rate in each cell for iteration i (plain summed
    effort for the naive model; effort times resampled detection for the
    transfer model). ``extra_predraw(gen, c)`` pre-draws any extra noise per
    chunk and ``record_extra(slot, chunk_draws, k)`` stores per-iteration
    audit values.

    ``refresh`` repeats the whole conditional block (rate sweep plus the two
    layer Gibbs draws) within each iteration. The naive model uses 1 (plain
    Metropolis-within-Gibbs). The transfer model needs several: its
    detection coefficients are resampled fresh every iteration, and the
    persistent state must re-equilibrate against each new draw for the
    chain's stationary law to be the cut posterior (the mixture over
    coefficient draws) rather than a smoothed version of it.
    """
    t_n, j_n = data.n_years, data.n_classes
    qz = data.z.shape[1]
    z = np.asarray(data.z, dtype=float)
    starts = data.year_starts()

    sy = np.add.reduceat(data.count, starts, axis=0).T.astype(float)   # (J, T)
    sy = np.ascontiguousarray(sy)

    am, asd = priors.year_coeff_moments(j_n, qz)
    year_prec = 1.0 / asd**2
    scale0, dof0 = priors.rate_cov_prior(j_n)
    chi2_df = (dof0 + t_n) - np.arange(j_n)

    e0 = e_eff_for_iter(0, None, None)
    log_rate = np.log((sy + 0.5) / e0)                                 # (J, T)
    coeff, *_ = np.linalg.lstsq(z, log_rate.T, rcond=None)
    coeff = np.ascontiguousarray(coeff.T)
    cov = np.eye(j_n)

    prec = precision_from_covariance(cov)
    mu = np.ascontiguousarray((z @ coeff.T).T)
    lr_scale = np.full((j_n, t_n), 0.5)
    acc_lr = np.empty((j_n, t_n))

    n_stored = config.n_stored
    store = {
        "log_rate": np.empty((n_stored, t_n * j_n)),
        "year_coeff": np.empty((n_stored, j_n * qz)),
        "year_cov": np.empty((n_stored, j_n * j_n)),
    }
    shapes = {
        "log_rate": (t_n, j_n),
        "year_coeff": (j_n, qz),
        "year_cov": (j_n, j_n),
    }
    extra_store: dict[str, np.ndarray] = {}

    tally = 0.0
    post_iters = config.iterations - config.burn_in
    scales_at_burnin: dict[str, list[float]] = {}
    stored = 0
    target = config.target_accept_scalar

    acc_step = np.empty((j_n, t_n), dtype=np.uint8)

    for start in range(0, config.iterations, _CHUNK):
        c = min(_CHUNK, config.iterations - start)
        lz = gen.standard_normal((c, refresh, j_n, t_n))
        llu = np.log(gen.random((c, refresh, j_n, t_n)))
        an = gen.standard_normal((c, refresh, j_n * qz))
        on = gen.standard_normal((c, refresh, j_n, j_n))
        oc2 = gen.chisquare(np.broadcast_to(chi2_df, (c, refresh, j_n)))
        chunk_draws = extra_predraw(gen, c) if extra_predraw is not None else None

        for k in range(c):
            i = start + k
            e_eff = e_eff_for_iter(i, chunk_draws, k)                  # (J, T)

            acc_lr[:] = 0
            for step in range(refresh):
                for j in range(j_n):
                    resid = log_rate - mu
                    cross = prec[j] @ resid - prec[j, j] * resid[j]
                    kernels.log_mean_sweep(
                        log_rate[j], sy[j], e_eff[j], mu[j], float(prec[j, j]),
                        cross, lz[k, step, j], llu[k, step, j], lr_scale[j], acc_step[j],
                    )
                acc_lr += acc_step
                coeff = gibbs_coeff_matrix(log_rate.T, z, prec, am, year_prec, an[k, step])
                mu = np.ascontiguousarray((z @ coeff.T).T)
                cov = gibbs_covariance(log_rate.T - mu.T, scale0, dof0, on[k, step], oc2[k, step])
                prec = precision_from_covariance(cov)

            acc_lr /= refresh
            if i < config.burn_in:
                gain = config.adapt_gain / (1.0 + i) ** config.adapt_decay
                lr_scale *= np.exp(gain * (acc_lr - target))
                np.clip(lr_scale, 1e-4, 50.0, out=lr_scale)
            else:
                tally += acc_lr.mean()

            if i == config.burn_in - 1 or (config.burn_in == 0 and i == 0):
                scales_at_burnin = {"log_rate": lr_scale.ravel().tolist()}

            if i >= config.burn_in and (i - config.burn_in) % config.thin == 0:
                store["log_rate"][stored] = log_rate.T.ravel()
                store["year_coeff"][stored] = coeff.ravel()
                store["year_cov"][stored] = cov.ravel()
                if record_extra is not None:
                    record_extra(extra_store, stored, n_stored, chunk_draws, k)
                stored += 1

    acceptance = {"log_rate": tally / post_iters}
    info = {
        "years": data.years.tolist(),
        "size_classes": list(data.size_classes),
        "x_names": list(data.x_names),
        "z_names": list(data.z_names),
        "scales_at_burnin": scales_at_burnin,
        "scales_final": {"log_rate": lr_scale.ravel().tolist()},
    }
    store.update(extra_store)
    return store, shapes, acceptance, info


def fit_cpue_naive(
    data: CPUEDataset,
    priors: CpuePriors | None = None,
    config: McmcConfig | None = None,
    rng: RngStream | None = None,
) -> PosteriorChains:
    """Fit the naive CPUE model (no detection adjustment).

    Chains hold the log relative-abundance rates, the year-coefficient
    matrix and the cross-class covariance; the rates update on the log scale
    by elementwise random-walk Metropolis, the rest by conjugate Gibbs.
    """
    priors = priors or CpuePriors()
    config = config or McmcConfig()
    gen = _resolve_rng(rng, config)

    starts = data.year_starts()
    e_year = np.add.reduceat(data.effort, starts)                       # (T,)
    e_eff = np.broadcast_to(e_year, (data.n_classes, data.n_years)).copy()

    store, shapes, acceptance, info = _fit_rate_layer(
        data, lambda i, cd, k: e_eff, priors, config, gen, refresh=1
    )
    info["model"] = "cpue_naive"
    return PosteriorChains(
        draws=store,
        shapes=shapes,
        config=config,
        dataset_hash=data.content_hash(),
        moments=None,
        acceptance=acceptance,
        info=info,
    )


def rescale_naive(lambda_draws: np.ndarray, phat) -> np.ndarray:
    """Put naive CPUE rate draws on the abundance scale by dividing by p-hat.

    ``lambda_draws`` has classes on the last axis; ``phat`` is the per-class
    mean detection probability in (0, 1].
    """
    lam = np.asarray(lambda_draws, dtype=float)
    phat_arr = np.atleast_1d(np.asarray(phat, dtype=float))
    if np.any(phat_arr <= 0.0) or np.any(phat_arr > 1.0):
        raise ValueError("mean detection must lie in (0, 1]")
    if lam.shape[-1] != phat_arr.size:
        raise ValueError("need one mean detection value per size class")
    return lam / phat_arr
