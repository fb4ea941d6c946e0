"""Stress mode: accumulate per-device threshold shifts over a stress schedule.

A schedule is a sequence of phases. Biased phases continue the accumulated
shift along their own power law using the equivalent-time rule; unbiased
phases apply extended relaxation. The result is persisted as a ``StressFile``
which the playback side (``nbti_burnin.dac``) consumes.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .device_models import (
    HOURS_PER_YEAR,
    DegradationParams,
    DeviceGeometry,
    StressCondition,
    acceleration_factor,
    extended_relaxation,
    mismatch_sigma,
)
from .errors import ConfigError, DomainError

PURPOSES = ("fresh", "burn_in", "age")
SKEWS = ("typical",)
ROLES = ("current_source", "differential_switch")
MISMATCH_MODES = ("deterministic", "sampled")

_READOUT_TOL = 1e-9


@dataclass(frozen=True)
class StressPhase:
    label: str
    condition: StressCondition
    purpose: str = "burn_in"
    skew: str = "typical"

    def __post_init__(self):
        if self.purpose not in PURPOSES:
            raise ConfigError(f"phase {self.label!r}: unknown purpose {self.purpose!r}")
        if self.skew not in SKEWS:
            raise ConfigError(f"phase {self.label!r}: unsupported skew {self.skew!r}")
        if self.purpose == "fresh" and self.condition.duration != 0:
            raise ConfigError(f"fresh phase {self.label!r} must have zero duration")

    @property
    def duration(self) -> float:
        return self.condition.duration


@dataclass(frozen=True)
class StressSchedule:
    phases: tuple[StressPhase, ...]
    readout_times: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise ConfigError("schedule has no phases")
        readouts = tuple(float(t) for t in self.readout_times) or (self.total_hours,)
        if any(b < a for a, b in zip(readouts, readouts[1:])):
            raise ConfigError("readout times must be sorted ascending")
        if readouts[0] < 0 or readouts[-1] > self.total_hours + _READOUT_TOL:
            raise ConfigError(f"readout times must lie within [0, {self.total_hours}] h")
        object.__setattr__(self, "readout_times", readouts)

    @property
    def total_hours(self) -> float:
        return math.fsum(p.duration for p in self.phases)

    def digest(self) -> str:
        blob = json.dumps({"phases": [asdict(p) for p in self.phases],
                           "readouts": list(self.readout_times)},
                          sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class DeviceSpec:
    """One MOS device in the population handed to stress mode.

    ``bias_vgs`` is the operating gate-source magnitude used to translate a
    threshold shift into an Idsat change; ``stress_vgs_offset`` is added to
    each phase's stress voltage for this device.
    """

    device_id: str
    role: str
    geometry: DeviceGeometry
    fresh_vt: float  # mV
    pair_id: str = ""
    bias_vgs: float = 0.65  # V
    stress_vgs_offset: float = 0.0  # V

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigError(f"device {self.device_id!r}: unknown role {self.role!r}")
        if "\t" in self.device_id or "\t" in self.pair_id:
            raise ConfigError("device and pair ids may not contain tabs")


@dataclass(frozen=True)
class StressRecord:
    device_id: str
    role: str
    pair_id: str
    width: float
    length: float
    fresh_vt: float  # mV
    delta_vt: tuple[float, ...]  # mV, one per readout
    idsat_change: tuple[float, ...]  # percent, one per readout

    @property
    def geometry(self) -> DeviceGeometry:
        return DeviceGeometry(self.width, self.length)


@dataclass(frozen=True)
class StressFile:
    schedule_digest: str
    params_digest: str
    seed: int
    readout_times: tuple[float, ...]
    records: tuple[StressRecord, ...]
    mismatch_mode: str = "deterministic"

    def __post_init__(self):
        ids = [r.device_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise DomainError("stress file lists a device more than once")

    def record(self, device_id: str) -> StressRecord:
        for rec in self.records:
            if rec.device_id == device_id:
                return rec
        raise KeyError(device_id)

    def by_role(self, role: str) -> list[StressRecord]:
        return [r for r in self.records if r.role == role]

    def digest(self) -> str:
        return hashlib.sha256(dumps_stress_file(self).encode()).hexdigest()[:16]


def sample_pair_mismatch(params: DegradationParams, geometry: DeviceGeometry,
                         rng_seed: int, count: int) -> np.ndarray:
    """Draw ``count`` zero-mean Gaussian pair threshold deltas (mV)."""
    if count <= 0:
        raise DomainError(f"count must be positive, got {count}")
    rng = np.random.default_rng(rng_seed)
    return rng.normal(0.0, mismatch_sigma(params, geometry), size=count)


def idsat_change(fresh_vt: float, delta_vt: float, v_gs: float) -> float:
    """Percent drop of square-law saturation current after a threshold shift.

    ``fresh_vt`` and ``delta_vt`` are in mV, ``v_gs`` in volts; all magnitudes.
    """
    overdrive = v_gs - fresh_vt / 1000.0
    degraded = overdrive - delta_vt / 1000.0
    if overdrive <= 0 or degraded <= 0:
        raise DomainError(
            f"device leaves saturation (V_gs={v_gs} V, Vt={fresh_vt} mV, dVt={delta_vt} mV)")
    return 100.0 * (1.0 - (degraded / overdrive) ** 2)


def _phase_value(params, phase, vgs_offset, start_shift, hours, recovery_rate):
    cond = phase.condition
    if not cond.biased:
        return extended_relaxation(start_shift, hours, recovery_rate)
    stressed = StressCondition(cond.v_gs + vgs_offset, cond.temp_c, cond.duration, True)
    k = params.a_prefactor * acceleration_factor(params, stressed)
    t_eq = (start_shift / k) ** (1.0 / params.n_exp) if start_shift > 0 else 0.0
    return k * (t_eq + hours / HOURS_PER_YEAR) ** params.n_exp


def shift_trajectory(params: DegradationParams, schedule: StressSchedule,
                     vgs_offset: float = 0.0, recovery_rate: float = 0.0) -> list[float]:
    """Threshold shift (mV) at every readout time of ``schedule``.

    Each biased phase converts the shift carried into it into the equivalent
    stress time under its own condition and continues from there, so a
    single-phase schedule reduces to the closed-form model.
    """
    readouts = schedule.readout_times
    out: list[float] = []
    shift, elapsed, idx = 0.0, 0.0, 0
    for phase in schedule.phases:
        end = elapsed + phase.duration
        while idx < len(readouts) and readouts[idx] <= end + _READOUT_TOL:
            local = min(max(readouts[idx] - elapsed, 0.0), phase.duration)
            out.append(_phase_value(params, phase, vgs_offset, shift, local, recovery_rate))
            idx += 1
        shift = _phase_value(params, phase, vgs_offset, shift, phase.duration, recovery_rate)
        elapsed = end
    return out


def _pair_seed(seed: int, pair_id: str) -> int:
    h = hashlib.sha256(f"{seed}:{pair_id}".encode()).digest()
    return int.from_bytes(h[:8], "little")


def _fresh_offsets(params, population, seed):
    """Sampled fresh-Vt offsets: each two-device pair gets +-delta/2."""
    pairs: dict[str, list[DeviceSpec]] = {}
    for dev in population:
        if dev.pair_id:
            pairs.setdefault(dev.pair_id, []).append(dev)
    offsets: dict[str, float] = {}
    for pair_id, members in pairs.items():
        if len(members) > 2:
            raise ConfigError(f"pair {pair_id!r} has {len(members)} members")
        if len(members) < 2:
            continue
        a, b = sorted(members, key=lambda d: d.device_id)
        delta = float(sample_pair_mismatch(params, a.geometry, _pair_seed(seed, pair_id), 1)[0])
        offsets[a.device_id] = delta / 2.0
        offsets[b.device_id] = -delta / 2.0
    return offsets


def run_stress_mode(params: DegradationParams, schedule: StressSchedule,
                    population: Sequence[DeviceSpec], seed: int = 0,
                    mismatch: str = "deterministic",
                    recovery_rate: float = 0.0) -> StressFile:
    """Compute the degraded state of every device at every readout.

    ``mismatch="sampled"`` perturbs the fresh threshold of each device pair by
    a seeded Gaussian pair delta; ``"deterministic"`` leaves fresh thresholds
    untouched so that pair members degrade identically.
    """
    if not population:
        raise DomainError("empty device population")
    if mismatch not in MISMATCH_MODES:
        raise ConfigError(f"unknown mismatch mode {mismatch!r}")
    ids = [d.device_id for d in population]
    if len(set(ids)) != len(ids):
        raise DomainError("population has overlapping device ids")

    offsets = _fresh_offsets(params, population, seed) if mismatch == "sampled" else {}
    trajectories: dict[float, list[float]] = {}
    records = []
    for dev in population:
        traj = trajectories.get(dev.stress_vgs_offset)
        if traj is None:
            traj = shift_trajectory(params, schedule, dev.stress_vgs_offset, recovery_rate)
            trajectories[dev.stress_vgs_offset] = traj
        fresh = dev.fresh_vt + offsets.get(dev.device_id, 0.0)
        idsat = tuple(idsat_change(fresh, d, dev.bias_vgs) for d in traj)
        records.append(StressRecord(dev.device_id, dev.role, dev.pair_id,
                                    dev.geometry.width, dev.geometry.length,
                                    fresh, tuple(traj), idsat))
    return StressFile(schedule.digest(), params.digest(), int(seed),
                      schedule.readout_times, tuple(records), mismatch)


def pair_vt_mismatch(stress_file: StressFile, readout: int = -1,
                     mode: str = "deterministic", role: str | None = None) -> dict[str, float]:
    """Per-pair threshold mismatch (mV) at one readout.

    ``"deterministic"`` reports the larger per-device shift of each pair (the
    per-device reading); ``"sampled"`` reports the absolute difference of the
    degraded thresholds of the two members.
    """
    if mode not in MISMATCH_MODES:
        raise ConfigError(f"unknown mismatch mode {mode!r}")
    groups: dict[str, list[StressRecord]] = {}
    for rec in stress_file.records:
        if rec.pair_id and (role is None or rec.role == role):
            groups.setdefault(rec.pair_id, []).append(rec)
    out = {}
    for pair_id, members in sorted(groups.items()):
        if mode == "deterministic":
            out[pair_id] = max(m.delta_vt[readout] for m in members)
        elif len(members) == 2:
            a, b = members
            out[pair_id] = abs((a.fresh_vt + a.delta_vt[readout])
                               - (b.fresh_vt + b.delta_vt[readout]))
    return out


# --- on-disk format --------------------------------------------------------

_MAGIC = "#nbti-stress-file-v1"


def _fmt(x: float) -> str:
    return repr(float(x))


def _hours_label(h: float) -> str:
    return f"{float(h):g}h"


def dumps_stress_file(sf: StressFile) -> str:
    header = "\t".join([_MAGIC, f"schedule={sf.schedule_digest}",
                        f"params={sf.params_digest}", f"seed={sf.seed}",
                        f"mismatch={sf.mismatch_mode}",
                        "readouts=" + ",".join(_fmt(t) for t in sf.readout_times)])
    columns = ["device_id", "role", "pair_id", "width_um", "length_um", "fresh_vt_mv"]
    columns += [f"dvt_mv@{_hours_label(t)}" for t in sf.readout_times]
    columns += [f"idsat_pct@{_hours_label(t)}" for t in sf.readout_times]
    lines = [header, "\t".join(columns)]
    for r in sf.records:
        fields = [r.device_id, r.role, r.pair_id or "-", _fmt(r.width), _fmt(r.length),
                  _fmt(r.fresh_vt)]
        fields += [_fmt(v) for v in r.delta_vt]
        fields += [_fmt(v) for v in r.idsat_change]
        lines.append("\t".join(fields))
    return "\n".join(lines) + "\n"


def loads_stress_file(text: str) -> StressFile:
    lines = text.splitlines()
    if len(lines) < 2 or not lines[0].startswith(_MAGIC):
        raise ConfigError("not a stress file")
    meta = dict(item.split("=", 1) for item in lines[0].split("\t")[1:])
    try:
        readouts = tuple(float(t) for t in meta["readouts"].split(","))
        n = len(readouts)
        records = []
        for line in lines[2:]:
            if not line.strip():
                continue
            f = line.split("\t")
            if len(f) != 6 + 2 * n:
                raise ConfigError(f"stress record has {len(f)} fields, expected {6 + 2 * n}")
            records.append(StressRecord(
                f[0], f[1], "" if f[2] == "-" else f[2], float(f[3]), float(f[4]), float(f[5]),
                tuple(float(v) for v in f[6:6 + n]), tuple(float(v) for v in f[6 + n:])))
        return StressFile(meta["schedule"], meta["params"], int(meta["seed"]), readouts,
                          tuple(records), meta.get("mismatch", "deterministic"))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed stress file: {exc}") from exc


def write_stress_file(sf: StressFile, path) -> Path:
    path = Path(path)
    path.write_text(dumps_stress_file(sf), encoding="utf-8", newline="\n")
    return path


def read_stress_file(path) -> StressFile:
    return loads_stress_file(Path(path).read_text(encoding="utf-8"))


def table1_schedule(burn_in_v: float = 4.6, burn_in_c: float = 110.0,
                    hours: float = 168.0,
                    readouts: Sequence[float] | None = None) -> StressSchedule:
    """Fresh reference followed by a single burn-in stress phase."""
    if readouts is None:
        readouts = tuple(t for t in (0.5, 12.0) if t < hours) + (hours,)
    return StressSchedule(
        (StressPhase("fresh", StressCondition(3.3, 100.0, 0.0), purpose="fresh"),
         StressPhase("burn_in", StressCondition(burn_in_v, burn_in_c, hours), purpose="burn_in")),
        tuple(readouts))
