"""Posterior chain containers and MCMC run configuration.

A :class:`PosteriorChains` value is the unit of persistence and of transfer:
named draw matrices (stored post-burn-in, post-thinning only), the config
echo, a hash of the dataset that produced them, the covariate
standardization moments (required downstream by the transfer model), and
per-block acceptance rates. Instances are immutable by convention once a
fit returns them and are safe to share across threads/processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

__all__ = ["CovariateMoments", "McmcConfig", "PosteriorChains", "standardize_columns"]


@dataclass(frozen=True)
class McmcConfig:
    """Iteration schedule and adaptation settings for one sampler run.

    Proposal scales adapt by Robbins-Monro stochastic approximation during
    burn-in only (targets 0.44 for scalar updates, 0.234 for blocks) and are
    frozen afterwards. ``seed`` is optional: library callers normally pass an
    explicit RngStream to the fit functions, which takes precedence.
    """

    iterations: int = 50_000
    burn_in: int = 10_000
    thin: int = 10
    seed: int | None = None
    target_accept_scalar: float = 0.44
    target_accept_block: float = 0.234
    adapt_gain: float = 1.0
    adapt_decay: float = 0.6

    def __post_init__(self) -> None:
        if self.iterations <= self.burn_in:
            raise ValueError("iterations must exceed burn_in")
        if self.burn_in < 0 or self.thin < 1:
            raise ValueError("burn_in must be >= 0 and thin >= 1")
        for t in (self.target_accept_scalar, self.target_accept_block):
            if not 0.0 < t < 1.0:
                raise ValueError("acceptance targets must lie in (0, 1)")
        if self.adapt_gain <= 0.0 or not 0.5 < self.adapt_decay <= 1.0:
            raise ValueError("adapt_gain must be positive and adapt_decay in (0.5, 1]")

    @property
    def n_stored(self) -> int:
        return (self.iterations - self.burn_in - 1) // self.thin + 1

    @classmethod
    def desk(cls, **overrides) -> "McmcConfig":
        """Reduced-length preset for simulation studies and CI runs."""
        base = dict(iterations=10_000, burn_in=2_000, thin=8)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def paper(cls, **overrides) -> "McmcConfig":
        """Full-length default schedule."""
        return cls(**overrides)

    def with_seed(self, seed: int) -> "McmcConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict[str, Any]:
        return {
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "seed": self.seed,
            "target_accept_scalar": self.target_accept_scalar,
            "target_accept_block": self.target_accept_block,
            "adapt_gain": self.adapt_gain,
            "adapt_decay": self.adapt_decay,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "McmcConfig":
        return cls(**d)


@dataclass(frozen=True)
class CovariateMoments:
    """Per-column mean/sd used to standardize detection covariates.

    Columns with zero sample variance (the intercept) are left untouched and
    recorded with mean 0, sd 1, so applying the transform is always safe.
    """

    names: tuple[str, ...]
    mean: tuple[float, ...]
    sd: tuple[float, ...]

    def __post_init__(self) -> None:
        if not len(self.names) == len(self.mean) == len(self.sd):
            raise ValueError("moments fields must have equal length")
        if any(s <= 0.0 for s in self.sd):
            raise ValueError("standardization sd must be positive")

    def transform(self, x: np.ndarray, columns=None) -> np.ndarray:
        """Apply (x - mean) / sd columnwise; ``columns`` selects moment indices."""
        x = np.asarray(x, dtype=float)
        idx = range(len(self.names)) if columns is None else columns
        idx = list(idx)
        if x.shape[1] != len(idx):
            raise ValueError("column count does not match requested moments")
        mean = np.array([self.mean[i] for i in idx])
        sd = np.array([self.sd[i] for i in idx])
        return (x - mean) / sd

    def to_dict(self) -> dict[str, Any]:
        return {"names": list(self.names), "mean": list(self.mean), "sd": list(self.sd)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CovariateMoments":
        return cls(tuple(d["names"]), tuple(d["mean"]), tuple(d["sd"]))


def standardize_columns(x: np.ndarray, names) -> tuple[np.ndarray, CovariateMoments]:
    """Standardize each column of x to zero mean, unit variance (dataset moments).

    Zero-variance columns (the intercept) pass through unchanged.
    """
    x = np.asarray(x, dtype=float)
    out = x.copy()
    means, sds = [], []
    for c in range(x.shape[1]):
        mu = float(x[:, c].mean())
        sd = float(x[:, c].std())
        if sd == 0.0:
            means.append(0.0)
            sds.append(1.0)
        else:
            out[:, c] = (x[:, c] - mu) / sd
            means.append(mu)
            sds.append(sd)
    return out, CovariateMoments(tuple(names), tuple(means), tuple(sds))


@dataclass
class PosteriorChains:
    """Named posterior draw matrices plus run metadata.

    ``draws[name]`` has shape (n_stored, prod(shapes[name])); :meth:`get`
    returns the draws reshaped to (n_stored, *shapes[name]). ``info`` carries
    model-specific extras (years, size classes, mean detection per class,
    the transfer coefficient map, ...) and must stay JSON-serializable.
    """

    draws: dict[str, np.ndarray]
    shapes: dict[str, tuple[int, ...]]
    config: McmcConfig
    dataset_hash: str
    moments: CovariateMoments | None = None
    acceptance: dict[str, float] = field(default_factory=dict)
    info: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        counts = {m.shape[0] for m in self.draws.values()}
        if len(counts) > 1:
            raise ValueError("all parameters must share the iteration count")
        for name, mat in self.draws.items():
            want = int(np.prod(self.shapes[name], dtype=int))
            if mat.ndim != 2 or mat.shape[1] != want:
                raise ValueError(f"draw matrix for {name!r} does not match its shape")

    @property
    def n_draws(self) -> int:
        return next(iter(self.draws.values())).shape[0] if self.draws else 0

    @property
    def parameters(self) -> list[str]:
        return list(self.draws)

    def get(self, name: str) -> np.ndarray:
        if name not in self.draws:
            raise KeyError(f"chains do not contain parameter {name!r}")
        return self.draws[name].reshape((-1, *self.shapes[name]))

    def equals(self, other: "PosteriorChains") -> bool:
        return (
            set(self.draws) == set(other.draws)
            and all(np.array_equal(self.draws[k], other.draws[k]) for k in self.draws)
            and self.shapes == other.shapes
            and self.dataset_hash == other.dataset_hash
        )
