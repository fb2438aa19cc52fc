"""Bayesian abundance models for fisheries catch data.

Three models over shared machinery:

* capture-recapture (CR): hierarchical closed-population model with a
  covariate detection function, fit by Metropolis-within-Gibbs;
* naive CPUE: Poisson counts with an effort offset and a joint lognormal
  relative-abundance layer;
* transfer CPUE: the detection-function posterior from a CR fit is
  resampled at every iteration (cut posterior, no feedback), turning CPUE
  counts into detection-adjusted absolute abundance.

Plus the trend/accuracy metrics, a seeded simulation-study harness, CSV
ingestion, chain persistence, and the ``catchtl`` command line.
"""

from .chains import CovariateMoments, McmcConfig, PosteriorChains
from .metrics import (
    AbundanceSeries,
    CredibleInterval,
    empirical_coverage,
    interval,
    mad_from_truth,
    mann_kendall_u,
    mk_posterior,
)
from .rng import RngStream

__all__ = [
    "AbundanceSeries",
    "CovariateMoments",
    "CredibleInterval",
    "McmcConfig",
    "PosteriorChains",
    "RngStream",
    "empirical_coverage",
    "interval",
    "mad_from_truth",
    "mann_kendall_u",
    "mk_posterior",
]

__version__ = "0.1.0"
