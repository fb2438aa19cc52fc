import numpy as np
import pytest

from catchtl.chains import CovariateMoments, McmcConfig, PosteriorChains
from catchtl.cpue import CPUEDataset
from catchtl.crmodel import CRDataset
from catchtl.rng import RngStream
from catchtl.stats import logit


def toy_cr_dataset(seed: int = 3, n_years: int = 2, n_days: int = 2, n_classes: int = 1):
    """Small valid capture-recapture dataset built by the sequential protocol."""
    gen = RngStream(seed).generator()
    t_n, d, j_n = n_years, n_days, n_classes
    r_n = t_n * d
    abundance = gen.integers(40, 120, size=(t_n, j_n))
    x = np.column_stack([np.ones(r_n), gen.normal(size=r_n)])
    p = 1.0 / (1.0 + np.exp(-(x @ np.array([[-1.0], [0.4]]))))  # (R, 1)
    p = np.repeat(p, j_n, axis=1)
    catch = np.zeros((r_n, j_n), dtype=np.int64)
    recaps = np.zeros((r_n, j_n), dtype=np.int64)
    pool = np.zeros((t_n, j_n), dtype=np.int64)
    for k in range(d):
        rows = np.arange(t_n) * d + k
        recaps[rows] = gen.binomial(pool, p[rows])
        new = gen.binomial(abundance - pool, p[rows])
        catch[rows] = recaps[rows] + new
        pool += new
    return CRDataset(
        years=np.arange(2001, 2001 + t_n),
        row_year=np.repeat(np.arange(t_n), d),
        day=np.tile(np.arange(1, d + 1), t_n),
        catch=catch,
        recaptures=recaps,
        x=x,
        x_names=("intercept", "x_flow"),
        z=np.column_stack([np.ones(t_n), np.linspace(-1, 1, t_n)]),
        z_names=("intercept", "z_year"),
        size_classes=tuple(range(1, j_n + 1)),
    ), abundance


def single_cell_cpue(y: int = 30, effort: float = 1.0) -> CPUEDataset:
    return CPUEDataset(
        years=np.array([2000]),
        row_year=np.array([0]),
        day=np.array([1]),
        count=np.array([[y]]),
        effort=np.array([effort]),
        x=np.array([[1.0]]),
        x_names=("intercept",),
        z=np.array([[1.0]]),
        z_names=("intercept",),
        size_classes=(1,),
    )


def beta_source_chains(rows, x_names=("intercept",), moments=None) -> PosteriorChains:
    """Hand-built capture-recapture 'fit' holding given detection-coefficient rows.

    ``rows`` is (n_draws, n_classes, n_coeff) or a list of per-draw detection
    probabilities for the intercept-only single-class case.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:  # probabilities -> intercept-only coefficients
        rows = np.array([[[logit(p)]] for p in rows])
    s, j_n, qx = rows.shape
    if moments is None:
        moments = CovariateMoments(
            tuple(x_names), (0.0,) * len(x_names), (1.0,) * len(x_names)
        )
    return PosteriorChains(
        draws={"detect_coeff": rows.reshape(s, j_n * qx)},
        shapes={"detect_coeff": (j_n, qx)},
        config=McmcConfig(iterations=2, burn_in=1, thin=1),
        dataset_hash="synthetic-source",
        moments=moments,
        acceptance={},
        info={"model": "capture_recapture", "x_names": list(x_names)},
    )


@pytest.fixture(scope="session")
def quick_config() -> McmcConfig:
    return McmcConfig(iterations=3000, burn_in=800, thin=4)
