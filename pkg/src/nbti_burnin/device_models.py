"""Degradation physics: NBTI threshold shift, scaled time-to-failure and mismatch.

Every function here is pure. Units follow the field names: voltages in volts,
threshold shifts in millivolts, temperatures in degrees Celsius at every
interface (converted to kelvin with ``+273``), stress time in years for the
accelerated model and hours everywhere else.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DomainError

BOLTZMANN_EV_PER_K = 8.617333262e-5
HOURS_PER_YEAR = 365.25 * 24.0
# Reference junction temperature of the scaled-TTF model, in kelvin (125 C).
TTF_REFERENCE_K = 398.0
# Typical technology range of the power-law slope.
POWERLAW_SLOPE_RANGE = (0.15, 0.30)


class PowerLawRangeWarning(UserWarning):
    """Fitted power-law slope lies outside the usual technology range."""


def kelvin(temp_c: float) -> float:
    if temp_c <= -273:
        raise DomainError(f"temperature {temp_c} C is at or below absolute zero")
    return temp_c + 273.0


@dataclass(frozen=True)
class DegradationParams:
    """Process and physics constants for the NBTI models.

    ``beta_v`` is the gate-voltage acceleration of the extrapolation model and
    ``beta_fc`` the failure-criterion exponent of the scaled TTF model; they
    are unrelated quantities. Fields listed in ``PROVISIONAL`` have no
    published value and their defaults are placeholders.
    """

    a_prefactor: float = 4.2e-3  # mV / year^n
    beta_v: float = 0.75  # 1/V
    e_a: float = 0.145  # eV
    n_exp: float = 0.181
    gamma: float = 3.0  # cm/MV
    t_ox: float = 7.0  # nm
    fc: float = 2.0  # mV
    beta_fc: float = 1.0
    mttf: float = 10.0 * HOURS_PER_YEAR * 3600.0  # s
    a_vt: float = 5.0  # mV*um
    geom_scale: Mapping[str, float] = field(default_factory=lambda: {"default": 1.0})
    boltzmann_k: float = BOLTZMANN_EV_PER_K
    # Flip the sign of the Arrhenius exponent of the extrapolation model.
    negate_arrhenius: bool = False

    PROVISIONAL = ("a_prefactor", "gamma", "t_ox", "beta_fc", "mttf", "a_vt", "geom_scale")

    def __post_init__(self):
        for name in ("a_prefactor", "beta_v", "e_a", "gamma", "t_ox", "fc",
                     "beta_fc", "mttf", "a_vt", "boltzmann_k"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be a positive real, got {value!r}")
        if not 0.0 < self.n_exp < 1.0:
            raise DomainError(f"n_exp must lie in (0, 1), got {self.n_exp!r}")
        if not self.geom_scale:
            raise DomainError("geom_scale needs at least one bucket")
        for bucket, factor in self.geom_scale.items():
            if not factor > 0:
                raise DomainError(f"geom_scale[{bucket!r}] must be positive")
        object.__setattr__(self, "geom_scale", dict(self.geom_scale))

    def replace(self, **changes) -> "DegradationParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        out["geom_scale"] = dict(sorted(self.geom_scale.items()))
        return out

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def provisional_fields(self) -> list[str]:
        """Names of unpublished fields still at their placeholder default."""
        defaults = DegradationParams()
        return [name for name in self.PROVISIONAL
                if getattr(self, name) == getattr(defaults, name)]


@dataclass(frozen=True)
class StressCondition:
    v_gs: float  # V, gate-to-source magnitude
    temp_c: float
    duration: float = 0.0  # hours
    biased: bool = True

    def __post_init__(self):
        if self.duration < 0:
            raise DomainError(f"duration must be >= 0, got {self.duration}")
        if self.temp_c <= -273:
            raise DomainError(f"temperature {self.temp_c} C is at or below absolute zero")

    @property
    def temp_k(self) -> float:
        return kelvin(self.temp_c)


@dataclass(frozen=True)
class DeviceGeometry:
    width: float  # um
    length: float  # um

    def __post_init__(self):
        if not (self.width > 0 and self.length > 0):
            raise DomainError(f"geometry must be positive, got W={self.width} L={self.length}")

    @property
    def area(self) -> float:
        return self.width * self.length


def _as_time(t, name: str):
    arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError(f"{name} must be finite and non-negative, got {t!r}")
    return arr


def _maybe_scalar(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def acceleration_factor(p: DegradationParams, c: StressCondition) -> float:
    """exp(beta_v*V_gs) * exp(+-E_a/kT): the condition-dependent part of the shift."""
    sign = -1.0 if p.negate_arrhenius else 1.0
    return math.exp(p.beta_v * c.v_gs + sign * p.e_a / (p.boltzmann_k * c.temp_k))


def delta_vt_accelerated(p: DegradationParams, c: StressCondition, t_years):
    """Threshold shift in mV after ``t_years`` of stress under ``c``.

    Evaluates ``A*exp(beta_v*V_gs)*exp(E_a/(k*T))*t**n``. The Arrhenius term
    keeps the printed positive sign unless ``p.negate_arrhenius`` is set.
    Accepts a scalar or an array of times.
    """
    if not c.biased:
        raise DomainError("accelerated NBTI shift requires a biased condition")
    t = _as_time(t_years, "t_years")
    return _maybe_scalar(p.a_prefactor * acceleration_factor(p, c) * t ** p.n_exp)


def delta_vt_powerlaw(a: float, n_exp: float, t):
    """Plain power law ``a * t**n_exp``."""
    t = _as_time(t, "t")
    return _maybe_scalar(a * t ** n_exp)


def calibrate_prefactor(p: DegradationParams, c: StressCondition, t_years: float,
                        measured_mv: float) -> float:
    """Solve the extrapolation model for the pre-factor from one anchor point."""
    if not measured_mv > 0:
        raise DomainError("anchor shift must be positive")
    if not t_years > 0:
        raise DomainError("anchor time must be positive")
    unit = p.replace(a_prefactor=1.0)
    return measured_mv / delta_vt_accelerated(unit, c, t_years)


def ttf_scaled(p: DegradationParams, c: StressCondition, delta_vtp: float,
               bucket: str = "default") -> float:
    """Voltage- and temperature-scaled time to failure, in seconds.

    The failure-criterion term ``(dVt/FC)**beta_fc`` multiplies the Arrhenius
    argument, and the oxide field is ``V_gs / T_ox`` in MV/cm.
    """
    if not delta_vtp > 0:
        raise DomainError(f"delta_vtp must be positive, got {delta_vtp}")
    try:
        geom = p.geom_scale[bucket]
    except KeyError:
        raise DomainError(f"no geometry scaling bucket {bucket!r}") from None
    field_mv_cm = c.v_gs * 10.0 / p.t_ox  # V/nm -> MV/cm
    criterion = (delta_vtp / p.fc) ** p.beta_fc
    arrhenius = (p.e_a / p.boltzmann_k) * (1.0 / c.temp_k - 1.0 / TTF_REFERENCE_K) * criterion
    return p.mttf * geom * math.exp(-p.gamma * field_mv_cm) * math.exp(arrhenius)


def quasi_static_ttf(ttf_series: Sequence[tuple[float, float]]) -> float:
    """Effective TTF of a time-varying stress: 1 / time-average of 1/TTF(t).

    ``ttf_series`` holds (time, ttf) samples; the average of the failure
    rate is taken with the trapezoidal rule over the sampled window.
    """
    arr = np.asarray(ttf_series, dtype=float)
    if arr.size == 0:
        raise DomainError("empty TTF series")
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DomainError("TTF series must be a sequence of (time, ttf) pairs")
    times, ttf = arr[:, 0], arr[:, 1]
    if np.any(~np.isfinite(ttf)) or np.any(ttf <= 0):
        raise DomainError("TTF samples must be positive")
    if len(times) == 1:
        return float(ttf[0])
    if np.any(np.diff(times) <= 0):
        raise DomainError("sample times must be strictly increasing")
    rate = 1.0 / ttf
    mean_rate = np.trapezoid(rate, times) / (times[-1] - times[0])
    return float(1.0 / mean_rate)


def mismatch_sigma(p: DegradationParams, g: DeviceGeometry) -> float:
    """Pair threshold-mismatch standard deviation in mV for one geometry."""
    return p.a_vt / math.sqrt(g.area)


def aggregate_failure_rate(rates: Iterable[float]) -> float:
    """Failure rate of a series system of constant-rate mechanisms."""
    rates = [float(r) for r in rates]
    if any(not (r >= 0) for r in rates):
        raise DomainError("failure rates must be non-negative")
    return math.fsum(rates)


def system_mttf(rates: Iterable[float]) -> float:
    total = aggregate_failure_rate(rates)
    return math.inf if total == 0 else 1.0 / total


def equivalent_use_time(p: DegradationParams, stress: StressCondition,
                        use: StressCondition, t_stress: float) -> float:
    """Years of operation under ``use`` matching ``t_stress`` hours under ``stress``.

    The pre-factor cancels, leaving
    ``t_use = t_stress * (accel(stress) / accel(use)) ** (1/n)``.
    """
    if not (stress.biased and use.biased):
        raise DomainError("equivalence needs biased conditions")
    if not t_stress > 0:
        raise DomainError(f"t_stress must be positive, got {t_stress}")
    sign = -1.0 if p.negate_arrhenius else 1.0
    log_ratio = (p.beta_v * (stress.v_gs - use.v_gs)
                 + sign * p.e_a / p.boltzmann_k * (1.0 / stress.temp_k - 1.0 / use.temp_k))
    return t_stress * math.exp(log_ratio / p.n_exp) / HOURS_PER_YEAR


def extended_relaxation(delta_vt: float, unbiased_hours: float,
                        recovery_rate: float = 0.0) -> float:
    """Recovery of a threshold shift while the device sits unbiased.

    Exponential decay at ``recovery_rate`` per hour; the result is clamped to
    ``[0, delta_vt]`` so relaxation can never add degradation.
    """
    base = max(float(delta_vt), 0.0)
    if recovery_rate <= 0 or unbiased_hours <= 0:
        return base
    return min(base, max(0.0, base * math.exp(-recovery_rate * unbiased_hours)))


def fit_powerlaw_slope(points: Sequence[tuple[float, float]],
                       warn_range: bool = True) -> tuple[float, float]:
    """Least-squares line through (log t, log dVt); returns (a, n)."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 2:
        raise DomainError("need at least two (t, delta_vt) points")
    if np.any(arr <= 0) or np.any(~np.isfinite(arr)):
        raise DomainError("power-law fit needs strictly positive coordinates")
    x, y = np.log(arr[:, 0]), np.log(arr[:, 1])
    if np.ptp(x) == 0:
        raise DomainError("power-law fit needs at least two distinct times")
    design = np.column_stack([np.ones_like(x), x])
    (intercept, slope), *_ = np.linalg.lstsq(design, y, rcond=None)
    lo, hi = POWERLAW_SLOPE_RANGE
    if warn_range and not lo <= slope <= hi:
        warnings.warn(f"fitted power-law slope {slope:.4g} outside typical range "
                      f"[{lo}, {hi}]", PowerLawRangeWarning, stacklevel=2)
    return float(math.exp(intercept)), float(slope)


# --- parameter files -------------------------------------------------------

_KEY_MAP = {
    "a_prefactor_mv": "a_prefactor",
    "beta_v_per_v": "beta_v",
    "e_a_ev": "e_a",
    "n_exp": "n_exp",
    "gamma_cm_per_mv": "gamma",
    "t_ox_nm": "t_ox",
    "fc_mv": "fc",
    "beta_fc": "beta_fc",
    "mttf_s": "mttf",
    "a_vt_mv_um": "a_vt",
    "boltzmann_k_ev_per_k": "boltzmann_k",
    "negate_arrhenius": "negate_arrhenius",
}
_FIELD_TO_KEY = {v: k for k, v in _KEY_MAP.items()}


def params_from_mapping(values: Mapping[str, str]) -> DegradationParams:
    """Build params from flat ``key -> text`` pairs (unit-suffixed keys)."""
    kwargs: dict = {}
    geom: dict[str, float] = {}
    for key, raw in values.items():
        key = key.strip().lower()
        raw = str(raw).strip()
        if key.startswith("geom_scale."):
            geom[key.split(".", 1)[1]] = _parse_float(key, raw)
        elif key == "negate_arrhenius":
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ConfigError(f"negate_arrhenius must be boolean, got {raw!r}")
            kwargs["negate_arrhenius"] = raw.lower() in ("true", "1", "yes")
        elif key in _KEY_MAP:
            kwargs[_KEY_MAP[key]] = _parse_float(key, raw)
        else:
            raise ConfigError(f"unknown parameter key {key!r}")
    if geom:
        kwargs["geom_scale"] = geom
    return DegradationParams(**kwargs)


def _parse_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None


def load_params(path) -> DegradationParams:
    """Read a flat ``key = value`` parameter file (``#`` comments allowed)."""
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string("[params]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return params_from_mapping(dict(parser["params"]))


def dump_params(p: DegradationParams) -> str:
    """Render params in the flat file format, marking placeholder values."""
    provisional = set(p.provisional_fields())
    lines = []
    for name, value in p.as_dict().items():
        if name == "geom_scale":
            for bucket, factor in value.items():
                tag = "  # provisional" if name in provisional else ""
                lines.append(f"geom_scale.{bucket} = {factor!r}{tag}")
            continue
        if name == "boltzmann_k":
            continue
        tag = "  # provisional" if name in provisional else ""
        lines.append(f"{_FIELD_TO_KEY[name]} = {value!r}{tag}")
    return "\n".join(lines) + "\n"
