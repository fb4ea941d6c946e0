"""NBTI burn-in reliability simulator: stress mode, DAC playback and static metrics."""

from .errors import ConfigError, DomainError
from .device_models import (
    BOLTZMANN_EV_PER_K,
    HOURS_PER_YEAR,
    DegradationParams,
    DeviceGeometry,
    StressCondition,
    aggregate_failure_rate,
    calibrate_prefactor,
    delta_vt_accelerated,
    delta_vt_powerlaw,
    equivalent_use_time,
    extended_relaxation,
    fit_powerlaw_slope,
    load_params,
    mismatch_sigma,
    quasi_static_ttf,
    system_mttf,
    ttf_scaled,
)
from .estimators import PowerLawRegressor

__version__ = "0.1.0"

__all__ = [
    "BOLTZMANN_EV_PER_K",
    "HOURS_PER_YEAR",
    "ConfigError",
    "DegradationParams",
    "DeviceGeometry",
    "DomainError",
    "PowerLawRegressor",
    "StressCondition",
    "aggregate_failure_rate",
    "calibrate_prefactor",
    "delta_vt_accelerated",
    "delta_vt_powerlaw",
    "equivalent_use_time",
    "extended_relaxation",
    "fit_powerlaw_slope",
    "load_params",
    "mismatch_sigma",
    "quasi_static_ttf",
    "system_mttf",
    "ttf_scaled",
]
