"""Simulation experiments comparing the naive and transfer CPUE models.

One replicate: simulate a true population trajectory and capture-recapture
data from it, keep the first sampling day of each year as the CPUE dataset,
fit all three models, and score both CPUE models against the truth (median
absolute deviation of the posterior-mean abundance, 95% interval coverage
of the true abundance, and coverage of the true Mann-Kendall trend
statistic by the posterior trend distribution).

Scenarios I-V vary the unexplained detection noise; VI and VII break the
transferability assumption by generating the CPUE counts under a different
detection function than the capture-recapture data (same population, an
independent observation pass), probing negative transfer.

Replicates are independent jobs with derived random streams, executed by a
bounded process pool and keyed by replicate id, so scheduling cannot change
any result.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .chains import McmcConfig, PosteriorChains
from .cpue import CPUEDataset, fit_cpue_naive, rescale_naive
from .crmodel import CRDataset, fit_cr
from .errors import CatchtlError, ValidationError
from .metrics import AbundanceSeries, interval, mad_from_truth, mann_kendall_u, mk_posterior
from .rng import RngStream
from .stats import inv_logit
from .transfer import TransferSpec, default_coefficient_map, extract_abundance_star, fit_cpue_transfer

__all__ = [
    "PopulationTruth",
    "ReplicateResult",
    "ScenarioSpec",
    "ScenarioSummary",
    "derive_cpue",
    "generate_cr_data",
    "generate_population",
    "run_replicate",
    "run_scenario",
    "scenario",
]

WORKERS_ENV = "CATCHTL_WORKERS"

_SIGMA2 = {
    "I": (0.1, 0.1),
    "II": (0.5, 0.5),
    "III": (1.0, 1.0),
    "IV": (0.2, 0.8),
    "V": (0.8, 0.2),
    "VI": (0.1, 0.1),
    "VII": (0.1, 0.1),
}
_CPUE_BETA1 = {"VI": (-3.5, -1.0, 0.5), "VII": (-3.5, -3.0, 0.5)}


@dataclass(frozen=True)
class ScenarioSpec:
    """Full generative configuration of one simulation scenario."""

    id: str
    alpha: np.ndarray                  # (2, 3) abundance-layer coefficients
    omega: np.ndarray                  # (2, 2) cross-class covariance
    beta_cr: np.ndarray                # (2, 3) detection coefficients, CR population
    beta_cpue: np.ndarray | None       # (2, 3) override for the CPUE population (VI/VII)
    sigma2: tuple[float, float]
    n_years: int = 17
    days_per_year: int = 4
    replicates: int = 30
    base_seed: int = 0
    mcmc: McmcConfig = field(default_factory=McmcConfig.desk)

    def __post_init__(self) -> None:
        if self.n_years < 3 or self.days_per_year < 1 or self.replicates < 1:
            raise ValidationError("scenario needs >= 3 years, >= 1 day and >= 1 replicate")

    def with_replicates(self, replicates: int) -> "ScenarioSpec":
        return replace(self, replicates=replicates)


def scenario(
    scenario_id: str,
    replicates: int | None = None,
    base_seed: int = 0,
    preset: str = "desk",
    mcmc: McmcConfig | None = None,
) -> ScenarioSpec:
    """Standard scenario I-VII with the study's default parameter values.

    ``preset`` 'desk' runs 30 replicates with the reduced chain schedule;
    'paper' 100 replicates with the full schedule. Both are overridable.
    """
    sid = scenario_id.strip().upper()
    if sid not in _SIGMA2:
        raise ValidationError(f"unknown scenario {scenario_id!r}; expected I..VII")
    if preset not in ("desk", "paper"):
        raise ValidationError("preset must be 'desk' or 'paper'")
    beta_cr = np.array([[-3.5, -2.0, 0.5], [-3.5, 0.0, 0.0]])
    beta_cpue = None
    if sid in _CPUE_BETA1:
        beta_cpue = beta_cr.copy()
        beta_cpue[0] = _CPUE_BETA1[sid]
    if mcmc is None:
        mcmc = McmcConfig.desk() if preset == "desk" else McmcConfig.paper()
    if replicates is None:
        replicates = 30 if preset == "desk" else 100
    return ScenarioSpec(
        id=sid,
        alpha=np.array([[8.0, 0.0, -2.0], [6.5, 0.05, -1.0]]),
        omega=np.array([[1.0, 0.1], [0.1, 1.0]]),
        beta_cr=beta_cr,
        beta_cpue=beta_cpue,
        sigma2=_SIGMA2[sid],
        replicates=replicates,
        base_seed=base_seed,
        mcmc=mcmc,
    )


@dataclass(frozen=True)
class PopulationTruth:
    years: np.ndarray          # (T,)
    abundance: np.ndarray      # (T, J) ints
    log_mean: np.ndarray       # (T, J)
    z: np.ndarray              # (T, qz)
    z_names: tuple[str, ...]


def generate_population(spec: ScenarioSpec, rng: RngStream) -> PopulationTruth:
    """Simulate the true population trajectory and its year covariates.

    Year covariates: intercept, the year index centered and scaled to
    [-1, 1], and an iid standard-normal annual variable. The log abundance
    means are jointly normal across classes around the covariate effect and
    the abundances Poisson around their means.
    """
    gen = rng.generator()
    t_n = spec.n_years
    j_n = spec.alpha.shape[0]
    years = np.arange(1, t_n + 1)
    half = (t_n - 1) / 2.0
    z = np.column_stack([np.ones(t_n), (years - 1 - half) / half, gen.standard_normal(t_n)])
    noise = gen.standard_normal((t_n, j_n))
    log_mean = z @ spec.alpha.T + noise @ np.linalg.cholesky(spec.omega).T
    abundance = gen.poisson(np.exp(log_mean))
    return PopulationTruth(
        years=years,
        abundance=abundance.astype(np.int64),
        log_mean=log_mean,
        z=z,
        z_names=("intercept", "z_year", "z_annual"),
    )


def _detection_probs(
    x: np.ndarray, beta: np.ndarray, sigma2, gen: np.random.Generator
) -> np.ndarray:
    """Per (row, class) detection: logistic of covariate effect plus fresh noise."""
    eps = gen.standard_normal((x.shape[0], beta.shape[0])) * np.sqrt(np.asarray(sigma2))
    return inv_logit(x @ beta.T + eps)


def generate_cr_data(
    truth: PopulationTruth,
    beta: np.ndarray,
    sigma2,
    spec: ScenarioSpec,
    rng: RngStream,
) -> CRDataset:
    """Simulate the sequential capture-recapture sampling of a true population.

    Day covariates: intercept plus two iid standard-normal day variables.
    Each day's catch splits binomially between the marked pool and the
    remaining unmarked fish at that day's detection probability; new catches
    join the pool.
    """
    gen = rng.generator()
    t_n, j_n = truth.abundance.shape
    d = spec.days_per_year
    r_n = t_n * d
    row_year = np.repeat(np.arange(t_n), d)
    day = np.tile(np.arange(1, d + 1), t_n)
    x = np.column_stack([np.ones(r_n), gen.standard_normal(r_n), gen.standard_normal(r_n)])
    p = _detection_probs(x, beta, sigma2, gen)

    catch = np.zeros((r_n, j_n), dtype=np.int64)
    recaps = np.zeros((r_n, j_n), dtype=np.int64)
    pool = np.zeros((t_n, j_n), dtype=np.int64)
    for k in range(d):
        rows = np.arange(t_n) * d + k
        pk = p[rows]
        recaps[rows] = gen.binomial(pool, pk)
        new = gen.binomial(truth.abundance - pool, pk)
        catch[rows] = recaps[rows] + new
        pool += new

    return CRDataset(
        years=truth.years,
        row_year=row_year,
        day=day,
        catch=catch,
        recaptures=recaps,
        x=x,
        x_names=("intercept", "x_day1", "x_day2"),
        z=truth.z,
        z_names=truth.z_names,
        size_classes=tuple(range(1, j_n + 1)),
    )


def derive_cpue(cr: CRDataset) -> CPUEDataset:
    """CPUE dataset from a capture-recapture one: first sampling day per year, unit effort."""
    if cr.n_rows == 0:
        raise ValidationError("cannot derive CPUE data from an empty dataset")
    rows = cr.year_starts()
    return CPUEDataset(
        years=cr.years,
        row_year=np.arange(cr.n_years),
        day=cr.day[rows],
        count=cr.catch[rows].copy(),
        effort=np.ones(cr.n_years),
        x=cr.x[rows].copy(),
        x_names=cr.x_names,
        z=cr.z,
        z_names=cr.z_names,
        size_classes=cr.size_classes,
    )


def _regenerate_cpue_counts(
    cpue: CPUEDataset,
    truth: PopulationTruth,
    beta_cpue: np.ndarray,
    sigma2,
    rng: RngStream,
) -> CPUEDataset:
    """Fresh single-pass counts under a different detection function (same population)."""
    gen = rng.generator()
    p = _detection_probs(cpue.x, beta_cpue, sigma2, gen)
    counts = gen.binomial(truth.abundance, p)
    return replace(cpue, count=counts.astype(np.int64))


@dataclass(frozen=True)
class ReplicateResult:
    """Per-replicate comparison metrics; one entry per size class where present."""

    replicate_id: int
    failed: bool = False
    error: str | None = None
    truth: np.ndarray | None = None            # (T, J)
    naive_mad: tuple[float, ...] = ()
    transfer_mad: tuple[float, ...] = ()
    naive_n_coverage: tuple[float, ...] = ()   # fraction of years covered
    transfer_n_coverage: tuple[float, ...] = ()
    naive_u_covered: tuple[bool, ...] = ()
    transfer_u_covered: tuple[bool, ...] = ()
    acceptance: dict = field(default_factory=dict)


def _score_model(
    draws: np.ndarray, truth: PopulationTruth, level: float = 0.95
) -> tuple[tuple[float, ...], tuple[float, ...], tuple[bool, ...]]:
    """(MAD, N-coverage fraction, U-coverage flag) per class for abundance draws."""
    years = truth.years
    t_n, j_n = truth.abundance.shape
    mads, n_cov, u_cov = [], [], []
    for j in range(j_n):
        means = draws[:, :, j].mean(axis=0)
        mads.append(
            float(
                mad_from_truth(
                    AbundanceSeries(years, means),
                    AbundanceSeries(years, np.maximum(truth.abundance[:, j], 1e-12)),
                )
            )
        )
        hits = sum(
            interval(draws[:, t, j], level).contains(truth.abundance[t, j])
            for t in range(t_n)
        )
        n_cov.append(float(hits / t_n))
        u_true = mann_kendall_u(truth.abundance[:, j].astype(float))
        u_draws = mk_posterior(draws[:, :, j])
        u_cov.append(bool(interval(u_draws, level).contains(u_true)))
    return tuple(mads), tuple(n_cov), tuple(u_cov)


def run_replicate(spec: ScenarioSpec, replicate_id: int) -> ReplicateResult:
    """Generate data, fit all three models and score the two CPUE models.

    Fully determined by (spec, replicate_id). Fit failures are captured in
    the result rather than raised, so a scenario run never silently drops a
    replicate.
    """
    root = RngStream(spec.base_seed).split("replicate", replicate_id)
    try:
        truth = generate_population(spec, root.split("population"))
        cr = generate_cr_data(truth, spec.beta_cr, spec.sigma2, spec, root.split("cr_data"))
        cpue = derive_cpue(cr)
        if spec.beta_cpue is not None:
            cpue = _regenerate_cpue_counts(
                cpue, truth, spec.beta_cpue, spec.sigma2, root.split("cpue_regen")
            )

        cr_fit = fit_cr(cr, config=spec.mcmc, rng=root.split("fit_cr"))
        naive_fit = fit_cpue_naive(cpue, config=spec.mcmc, rng=root.split("fit_naive"))
        tspec = TransferSpec(cr_fit, default_coefficient_map(cr.x_names, cpue.x_names))
        transfer_fit = fit_cpue_transfer(
            cpue, tspec, config=spec.mcmc, rng=root.split("fit_transfer")
        )

        phat = np.asarray(cr_fit.info["mean_detection"])
        naive_draws = rescale_naive(np.exp(naive_fit.get("log_rate")), phat)
        transfer_draws = extract_abundance_star(transfer_fit)

        n_mad, n_ncov, n_ucov = _score_model(naive_draws, truth)
        t_mad, t_ncov, t_ucov = _score_model(transfer_draws, truth)
        acceptance = {
            "cr": cr_fit.acceptance,
            "naive": naive_fit.acceptance,
            "transfer": transfer_fit.acceptance,
        }
        return ReplicateResult(
            replicate_id=replicate_id,
            truth=truth.abundance,
            naive_mad=n_mad,
            transfer_mad=t_mad,
            naive_n_coverage=n_ncov,
            transfer_n_coverage=t_ncov,
            naive_u_covered=n_ucov,
            transfer_u_covered=t_ucov,
            acceptance=acceptance,
        )
    except (CatchtlError, np.linalg.LinAlgError, ValueError) as exc:
        return ReplicateResult(replicate_id=replicate_id, failed=True, error=str(exc))


@dataclass(frozen=True)
class ScenarioSummary:
    """Aggregated scenario results: per class, means over completed replicates."""

    scenario_id: str
    sigma2: tuple[float, float]
    replicates: int
    failed: int
    naive_mad: tuple[float, ...]
    transfer_mad: tuple[float, ...]
    naive_n_coverage: tuple[float, ...]
    transfer_n_coverage: tuple[float, ...]
    naive_u_coverage: tuple[float, ...]
    transfer_u_coverage: tuple[float, ...]


def aggregate(spec: ScenarioSpec, results: list[ReplicateResult]) -> ScenarioSummary:
    """Mean metrics over completed replicates; fails if nothing completed."""
    done = [r for r in results if not r.failed]
    if not done:
        raise CatchtlError(
            f"all {len(results)} replicates of scenario {spec.id} failed; "
            f"first error: {results[0].error}"
        )

    def mean_over(field_values) -> tuple[float, ...]:
        arr = np.array(field_values, dtype=float)
        return tuple(arr.mean(axis=0))

    return ScenarioSummary(
        scenario_id=spec.id,
        sigma2=spec.sigma2,
        replicates=len(results),
        failed=len(results) - len(done),
        naive_mad=mean_over([r.naive_mad for r in done]),
        transfer_mad=mean_over([r.transfer_mad for r in done]),
        naive_n_coverage=mean_over([r.naive_n_coverage for r in done]),
        transfer_n_coverage=mean_over([r.transfer_n_coverage for r in done]),
        naive_u_coverage=mean_over([[float(b) for b in r.naive_u_covered] for r in done]),
        transfer_u_coverage=mean_over([[float(b) for b in r.transfer_u_covered] for r in done]),
    )


def _worker_count(max_workers: int | None) -> int:
    if max_workers is not None:
        return max(1, max_workers)
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def run_scenario(
    spec: ScenarioSpec,
    max_workers: int | None = None,
    on_result=None,
) -> tuple[ScenarioSummary, list[ReplicateResult]]:
    """Run every replicate of a scenario and aggregate the metrics.

    Replicates execute on a process pool sized by ``max_workers``, the
    CATCHTL_WORKERS environment variable, or the CPU count. Results are
    keyed by replicate id, so the schedule cannot affect the aggregate;
    ``on_result`` (if given) sees each result as it completes.
    """
    workers = _worker_count(max_workers)
    ids = list(range(spec.replicates))
    results: list[ReplicateResult] = []
    if workers == 1 or spec.replicates == 1:
        for rid in ids:
            res = run_replicate(spec, rid)
            results.append(res)
            if on_result is not None:
                on_result(res)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(run_replicate, [spec] * len(ids), ids):
                results.append(res)
                if on_result is not None:
                    on_result(res)
    results.sort(key=lambda r: r.replicate_id)
    return aggregate(spec, results), results
