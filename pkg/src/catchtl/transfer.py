"""Transfer-learning CPUE model (cut posterior).

Counts follow y ~ Pois(rate * effort * p), where the detection probability
p is logit-linear in day covariates with coefficients imported from a
capture-recapture fit. At every MCMC iteration one stored posterior row of
those coefficients is resampled uniformly (the same row for all size
classes, preserving their posterior correlation) and the remaining
parameters are updated conditional on it. The count data never feed back
into the detection coefficients — counts are uninformative about detection,
and the cut keeps the imported posterior intact while still propagating its
uncertainty. With detection in the rate, the latent rate is on the absolute
abundance scale.

The coefficient map selects which source coefficients transfer and which
CPUE covariate column each one multiplies; coefficients tied to effort are
excluded by default because effort already enters through the offset.
Mapped CPUE columns are standardized with the moments stored on the source
chains, never with their own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chains import McmcConfig, PosteriorChains
from .cpue import CPUEDataset, CpuePriors, _fit_rate_layer
from .crmodel import _resolve_rng
from .errors import FitError, ValidationError
from .rng import RngStream
from .stats import inv_logit, poisson_logpmf

__all__ = [
    "TransferSpec",
    "default_coefficient_map",
    "detection_from_transfer",
    "extract_abundance_star",
    "fit_cpue_transfer",
    "transfer_loglik",
]


def default_coefficient_map(
    source_x_names, cpue_x_names, exclude=("effort",)
) -> tuple[tuple[int, int], ...]:
    """Match source coefficients to CPUE covariate columns by name.

    The intercept (column 0 on both sides) is always mapped. Source
    covariates whose name contains an excluded token (effort, by default)
    are dropped from the transfer; any other source covariate without a
    same-named CPUE column is an error.
    """
    source_x_names = list(source_x_names)
    cpue_x_names = list(cpue_x_names)
    pairs = [(0, 0)]
    for ci, name in enumerate(source_x_names[1:], start=1):
        if any(tok in name.lower() for tok in exclude):
            continue
        if name not in cpue_x_names:
            raise ValidationError(
                f"source covariate {name!r} has no same-named CPUE column; "
                "pass an explicit coefficient map"
            )
        pairs.append((ci, cpue_x_names.index(name)))
    return tuple(pairs)


@dataclass(frozen=True)
class TransferSpec:
    """Where the detection coefficients come from and how they map onto the data.

    ``source`` is a capture-recapture fit; ``coefficient_map`` pairs
    (source coefficient index -> CPUE covariate column), with omitted source
    indices excluded from the transfer. The source's covariate
    standardization moments ride along and are applied to the mapped CPUE
    columns.
    """

    source: PosteriorChains
    coefficient_map: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if "detect_coeff" not in self.source.draws:
            raise ValidationError("source chains carry no detection coefficients")
        if self.source.n_draws < 1:
            raise ValidationError("source chains are empty")
        if self.source.moments is None:
            raise ValidationError("source chains carry no standardization moments")
        pairs = tuple((int(a), int(b)) for a, b in self.coefficient_map)
        if not pairs:
            raise ValidationError("coefficient map must not be empty")
        src_idx = [a for a, _ in pairs]
        dst_idx = [b for _, b in pairs]
        if len(set(src_idx)) != len(src_idx) or len(set(dst_idx)) != len(dst_idx):
            raise ValidationError("coefficient map indices must be unique on both sides")
        if (0, 0) not in pairs:
            raise ValidationError("the intercept (0 -> 0) must always be mapped")
        qx = self.source.shapes["detect_coeff"][1]
        if min(src_idx) < 0 or max(src_idx) >= qx:
            raise ValidationError(f"source coefficient indices must lie in [0, {qx})")
        if min(dst_idx) < 0:
            raise ValidationError("CPUE column indices must be non-negative")
        object.__setattr__(self, "coefficient_map", pairs)

    @property
    def source_indices(self) -> list[int]:
        return [a for a, _ in sorted(self.coefficient_map)]

    @property
    def cpue_columns(self) -> list[int]:
        return [b for a, b in sorted(self.coefficient_map)]


def detection_from_transfer(x, beta) -> float:
    """Detection probability from transferred coefficients: logistic of x . beta.

    No random-effect term; detection uncertainty enters the transfer model
    through the resampling of beta, not through a per-day effect.
    """
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if x.shape != beta.shape:
        raise ValueError(f"covariate/coefficient dimension mismatch: {x.shape} vs {beta.shape}")
    return float(inv_logit(float(x @ beta)))


def transfer_loglik(rate: float, effort: float, p: float, y: int) -> float:
    """Poisson log-likelihood of one count at rate * effort * detection."""
    if rate <= 0.0 or effort <= 0.0 or p <= 0.0:
        raise ValueError("rate, effort and detection must all be positive")
    return float(poisson_logpmf(int(y), rate * effort * p))


def fit_cpue_transfer(
    data: CPUEDataset,
    spec: TransferSpec,
    priors: CpuePriors | None = None,
    config: McmcConfig | None = None,
    rng: RngStream | None = None,
    refresh: int = 10,
) -> PosteriorChains:
    """Fit the transfer CPUE model against a capture-recapture source fit.

    Per iteration: one stored source row of detection coefficients is drawn
    uniformly with replacement (shared across size classes), then the
    remaining state re-equilibrates against it: ``refresh`` rounds of the
    random-walk rate sweep (detection-scaled Poisson likelihood plus the
    lognormal layer) and the conjugate layer Gibbs draws. The coefficients
    are never updated from the counts (cut contract: no feedback). Chains
    record the source row and the mapped coefficients used at every stored
    iteration for audit.
    """
    priors = priors or CpuePriors()
    config = config or McmcConfig()
    gen = _resolve_rng(rng, config)

    src_idx = spec.source_indices
    dst_idx = spec.cpue_columns
    if max(dst_idx) >= data.x.shape[1]:
        raise FitError(
            f"coefficient map addresses CPUE column {max(dst_idx)}, "
            f"but the data has only {data.x.shape[1]} covariate columns"
        )
    j_n = data.n_classes
    src_classes = spec.source.shapes["detect_coeff"][0]
    if src_classes != j_n:
        raise FitError(
            f"source fit has {src_classes} size classes, data has {j_n}"
        )

    xs = spec.source.moments.transform(data.x[:, dst_idx], columns=src_idx)
    beta_src = np.ascontiguousarray(spec.source.get("detect_coeff")[:, :, src_idx])
    n_src = beta_src.shape[0]
    n_map = len(src_idx)

    # all rows' effective exposure, precomputed: sum_k effort * p per (year, class)
    eta_all = np.einsum("rc,sjc->sjr", xs, beta_src)
    p_all = inv_logit(eta_all)
    starts = data.year_starts()
    exposure_all = np.ascontiguousarray(
        np.add.reduceat(p_all * data.effort[None, None, :], starts, axis=2)
    )                                                                   # (S_src, J, T)
    if not np.all(exposure_all > 0.0):
        raise FitError(
            "a source coefficient draw implies zero detection for some cell; "
            "check the coefficient map and covariate standardization"
        )
    exposure_mean = exposure_all.mean(axis=0)

    def e_eff_for_iter(i, chunk_draws, k):
        if chunk_draws is None:
            return exposure_mean  # initialization pass only
        return exposure_all[chunk_draws[k]]

    def extra_predraw(gen, c):
        return gen.integers(0, n_src, size=c)

    def record_extra(extra_store, slot, n_stored, chunk_draws, k):
        if not extra_store:
            extra_store["detect_coeff_used"] = np.empty((n_stored, j_n * n_map))
            extra_store["source_row"] = np.empty((n_stored, 1))
        row = int(chunk_draws[k])
        extra_store["detect_coeff_used"][slot] = beta_src[row].ravel()
        extra_store["source_row"][slot] = row

    if refresh < 1:
        raise ValidationError("refresh must be at least 1")
    store, shapes, acceptance, info = _fit_rate_layer(
        data, e_eff_for_iter, priors, config, gen, refresh=refresh,
        extra_predraw=extra_predraw, record_extra=record_extra,
    )
    shapes["detect_coeff_used"] = (j_n, n_map)
    shapes["source_row"] = (1,)
    info["model"] = "cpue_transfer"
    info["coefficient_map"] = [list(p) for p in sorted(spec.coefficient_map)]
    info["source_dataset_hash"] = spec.source.dataset_hash
    info["transferred_x_names"] = [data.x_names[b] for b in dst_idx]
    return PosteriorChains(
        draws=store,
        shapes=shapes,
        config=config,
        dataset_hash=data.content_hash(),
        moments=spec.source.moments,
        acceptance=acceptance,
        info=info,
    )


def extract_abundance_star(chains: PosteriorChains) -> np.ndarray:
    """Abundance draws from a transfer fit: the rate draws, unrescaled.

    The transfer model's rate is already on the absolute abundance scale, so
    extraction applies no detection adjustment; the result is (n_draws,
    n_years, n_classes) on the natural scale.
    """
    if chains.info.get("model") != "cpue_transfer":
        raise ValidationError("abundance extraction expects transfer-model chains")
    if "log_rate" not in chains.draws:
        raise ValidationError("chains are missing the 'log_rate' draws")
    return np.exp(chains.get("log_rate"))
