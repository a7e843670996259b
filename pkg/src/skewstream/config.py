"""Detector configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .exceptions import ConfigError


@dataclass(frozen=True)
class DetectorConfig:
    """Hyper-parameters of decomposition, model selection and scoring.

    Attributes
    ----------
    n_components : int
        Number of latent components ``K`` per regime.
    tau : float
        Window length in seconds.
    tick_seconds : float
        Resolution of the per-tick mixture inside a window.
    beta : float
        Strength of carried-over priors, as a fraction of the previous
        window's event count.
    prior_floor : float
        Lower bound for every carried prior pseudo-count.
    burn_in, n_samples : int
        Gibbs sweeps discarded / averaged when decomposing a window.
    refit_burn_in, refit_samples : int
        Same, for re-estimating the mixture of a stored regime.
    float_bits : float
        Bits charged per free real-valued model parameter.
    per_event_normalization : bool
        Divide the anomaly score by the window's event count.
    refresh_regimes : bool
        Replace a reused regime's matrices by the window posterior.
    clamp_epsilon : float
        Continuous values ``<= 0`` are replaced by this.
    """

    n_components: int = 48
    tau: float = 30.0
    tick_seconds: float = 1.0
    beta: float = 0.1
    prior_floor: float = 1e-3
    burn_in: int = 10
    n_samples: int = 5
    refit_burn_in: int = 2
    refit_samples: int = 3
    float_bits: float = 32.0
    per_event_normalization: bool = True
    refresh_regimes: bool = True
    clamp_epsilon: float = 1e-6

    def __post_init__(self):
        if self.n_components < 1:
            raise ConfigError("n_components must be >= 1")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.tick_seconds <= 0:
            raise ConfigError("tick_seconds must be positive")
        if self.beta < 0 or self.prior_floor <= 0:
            raise ConfigError("beta must be >= 0 and prior_floor > 0")
        if self.burn_in < 0 or self.n_samples < 1:
            raise ConfigError("need burn_in >= 0 and n_samples >= 1")
        if self.refit_burn_in < 0 or self.refit_samples < 1:
            raise ConfigError("need refit_burn_in >= 0 and refit_samples >= 1")
        if self.float_bits <= 0:
            raise ConfigError("float_bits must be positive")
        if self.clamp_epsilon <= 0:
            raise ConfigError("clamp_epsilon must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown detector setting(s): {', '.join(sorted(unknown))}")
        return cls(**d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "DetectorConfig":
        return dataclasses.replace(self, **changes)
