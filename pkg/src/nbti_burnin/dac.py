"""Behavioral current-steering DAC used in playback mode.

Each unit cell is a PMOS current source whose saturation current follows the
square law around a nominal overdrive; its (possibly degraded) threshold
comes from a stress file. Selected cell currents sum into a single lumped
termination resistor.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .device_models import DeviceGeometry
from .errors import ConfigError, DomainError
from .stress import DeviceSpec, StressFile

CODINGS = ("thermometer", "binary")
# LSB voltage window of the supported video formats, volts.
VIDEO_LSB_RANGE = (684e-6, 1.27e-3)
# Effective stress-voltage offset of the differential switches relative to the
# current sources (V). Chosen so the switch/source shift ratio is 2.059/5.239
# at beta_v = 0.75; provisional.
SWITCH_STRESS_VGS_OFFSET = math.log(2.059 / 5.239) / 0.75


@dataclass(frozen=True)
class DacTopology:
    """Unit-cell array description.

    When ``unit_current_ma`` or ``r_term_ohm`` is omitted it is derived so the
    fresh full-scale output equals ``v_ref`` with ``full_scale_ma`` flowing.
    """

    bits: int = 8
    coding: str = "thermometer"
    v_ref: float = 2.5  # V, ideal full-scale span
    vcca: float = 3.3  # V
    full_scale_ma: float = 4.58
    unit_current_ma: float | None = None
    r_term_ohm: float | None = None
    vt_nominal_mv: float = 450.0
    cs_bias_vgs: float = 0.65  # V, current-source overdrive = 0.2 V
    sw_bias_vgs: float = 1.2  # V
    cs_geometry: DeviceGeometry = field(default_factory=lambda: DeviceGeometry(10.0, 2.0))
    sw_geometry: DeviceGeometry = field(default_factory=lambda: DeviceGeometry(4.0, 0.5))
    leakage_ma: float = 0.0
    switch_loss: bool = False

    def __post_init__(self):
        if not (isinstance(self.bits, int) and self.bits >= 1):
            raise ConfigError(f"bits must be an integer >= 1, got {self.bits!r}")
        if self.coding not in CODINGS:
            raise ConfigError(f"unknown coding {self.coding!r}")
        if not (self.v_ref > 0 and self.vcca > 0 and self.full_scale_ma > 0):
            raise ConfigError("v_ref, vcca and full_scale_ma must be positive")
        if self.unit_current_ma is None:
            object.__setattr__(self, "unit_current_ma", self.full_scale_ma / self.n_cells)
        if self.r_term_ohm is None:
            object.__setattr__(self, "r_term_ohm",
                               self.v_ref / (self.unit_current_ma * self.n_cells * 1e-3))
        if not (self.unit_current_ma > 0 and self.r_term_ohm > 0):
            raise ConfigError("unit current and termination must be positive")
        if self.cs_overdrive <= 0 or self.sw_bias_vgs - self.vt_nominal_mv / 1000.0 <= 0:
            raise ConfigError("devices must be biased above threshold")
        if self.ideal_full_scale_v > self.vcca + 1e-12:
            raise ConfigError(
                f"full-scale output {self.ideal_full_scale_v:.4g} V exceeds vcca {self.vcca} V")

    @property
    def n_cells(self) -> int:
        return 2 ** self.bits - 1

    @property
    def n_codes(self) -> int:
        return 2 ** self.bits

    @property
    def cs_overdrive(self) -> float:
        return self.cs_bias_vgs - self.vt_nominal_mv / 1000.0

    @property
    def ideal_full_scale_v(self) -> float:
        return self.n_cells * self.unit_current_ma * 1e-3 * self.r_term_ohm

    @property
    def ideal_lsb_v(self) -> float:
        return self.ideal_full_scale_v / self.n_cells

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def table4_topology() -> DacTopology:
    """16-code capture matching the published before/after Vout ramp."""
    return DacTopology(bits=4)


def video_lsb(swing_v: float, bits: int = 10) -> float:
    """LSB voltage of a video-mode DAC, ``swing / 2**bits``."""
    return swing_v / 2 ** bits


def lsb_in_video_range(lsb_v: float) -> bool:
    # Bounds are printed to 1 uV and 10 uV; allow half a unit of that rounding.
    lo, hi = VIDEO_LSB_RANGE
    return lo - 0.5e-6 <= lsb_v <= hi + 5e-6


@dataclass(frozen=True)
class DeviceState:
    device_id: str
    role: str
    fresh_vt: float  # mV
    delta_vt: float  # mV
    geometry: DeviceGeometry
    pair_id: str = ""


def dac_population(topology: DacTopology) -> list[DeviceSpec]:
    """Devices of every unit cell, ready for stress mode.

    Cell ``i`` owns current source ``cs<i>`` (paired with its neighbour) and a
    differential switch pair ``swa<i>``/``swb<i>``; ``swa`` steers to the output.
    """
    vt = topology.vt_nominal_mv
    n = topology.n_cells
    devices = []
    for i in range(n):
        pair = f"csp{i // 2:05d}" if i < n - n % 2 else ""
        devices.append(DeviceSpec(f"cs{i:05d}", "current_source", topology.cs_geometry, vt,
                                  pair, topology.cs_bias_vgs))
    for i in range(n):
        for side in ("a", "b"):
            devices.append(DeviceSpec(f"sw{side}{i:05d}", "differential_switch",
                                      topology.sw_geometry, vt, f"swp{i:05d}",
                                      topology.sw_bias_vgs, SWITCH_STRESS_VGS_OFFSET))
    return devices


def fresh_states(topology: DacTopology) -> list[DeviceState]:
    return [DeviceState(d.device_id, d.role, d.fresh_vt, 0.0, d.geometry, d.pair_id)
            for d in dac_population(topology)]


def states_from_stress_file(sf: StressFile, readout: int = -1) -> list[DeviceState]:
    """Degraded device states at one readout of a stress file."""
    return [DeviceState(r.device_id, r.role, r.fresh_vt, r.delta_vt[readout], r.geometry,
                        r.pair_id) for r in sf.records]


def _square_law_factor(overdrive_v: float, vt_excess_mv: float) -> float:
    degraded = overdrive_v - vt_excess_mv / 1000.0
    if degraded <= 0:
        raise DomainError("device leaves saturation at the operating point")
    return (degraded / overdrive_v) ** 2


@dataclass(frozen=True, eq=False)
class CurrentSteeringDac:
    topology: DacTopology
    cell_currents_ma: np.ndarray
    stress_digest: str = ""

    def __post_init__(self):
        currents = np.array(self.cell_currents_ma, dtype=float)
        if currents.shape != (self.topology.n_cells,):
            raise DomainError(f"expected {self.topology.n_cells} cell currents, "
                              f"got shape {currents.shape}")
        currents.setflags(write=False)
        object.__setattr__(self, "cell_currents_ma", currents)

    @property
    def cell_voltages(self) -> np.ndarray:
        """Output-voltage contribution of each cell alone, in volts."""
        return self.cell_currents_ma * 1e-3 * self.topology.r_term_ohm

    @property
    def full_scale_current_ma(self) -> float:
        return float(self.cell_currents_ma.sum())

    def selected_cells(self, code: int) -> np.ndarray:
        """Indices of the cells switched to the output for ``code``."""
        self._check_code(code)
        if self.topology.coding == "thermometer":
            return np.arange(code)
        idx = [np.arange(2 ** b - 1, 2 ** (b + 1) - 1)
               for b in range(self.topology.bits) if code >> b & 1]
        return np.concatenate(idx) if idx else np.arange(0)

    def _check_code(self, code):
        if not 0 <= code < self.topology.n_codes:
            raise DomainError(f"code {code} outside 0..{self.topology.n_codes - 1}")

    def output_voltages(self, codes: Iterable[int]) -> np.ndarray:
        codes = np.asarray(list(codes), dtype=int)
        for c in (codes.min(), codes.max()) if codes.size else ():
            self._check_code(int(c))
        leak_v = self.topology.leakage_ma * 1e-3 * self.topology.r_term_ohm
        contrib = self.cell_voltages
        if self.topology.coding == "thermometer":
            ramp = np.concatenate([[0.0], np.cumsum(contrib)])
            return ramp[codes] + leak_v
        groups = np.array([contrib[2 ** b - 1:2 ** (b + 1) - 1].sum()
                           for b in range(self.topology.bits)])
        bits = (codes[:, None] >> np.arange(self.topology.bits)) & 1
        return bits @ groups + leak_v

    @classmethod
    def from_cell_currents(cls, topology: DacTopology, currents_ma: Sequence[float],
                           stress_digest: str = "") -> "CurrentSteeringDac":
        return cls(topology, np.asarray(currents_ma, dtype=float), stress_digest)


def build_dac(topology: DacTopology,
              states: StressFile | Sequence[DeviceState] | None = None,
              readout: int = -1) -> CurrentSteeringDac:
    """Instantiate the DAC from fresh defaults or degraded device states."""
    digest = ""
    if states is None:
        states = fresh_states(topology)
    elif isinstance(states, StressFile):
        digest = states.digest()
        states = states_from_stress_file(states, readout)
    sources = sorted((s for s in states if s.role == "current_source"),
                     key=lambda s: s.device_id)
    if len(sources) != topology.n_cells:
        raise DomainError(f"topology has {topology.n_cells} cells but states hold "
                          f"{len(sources)} current sources")
    ov = topology.cs_overdrive
    vt0 = topology.vt_nominal_mv
    factors = np.array([_square_law_factor(ov, s.fresh_vt - vt0 + s.delta_vt) for s in sources])
    currents = topology.unit_current_ma * factors

    if topology.switch_loss:
        switches: dict[str, list[DeviceState]] = {}
        for s in states:
            if s.role == "differential_switch":
                switches.setdefault(s.pair_id, []).append(s)
        if len(switches) != topology.n_cells:
            raise DomainError("switch_loss needs one switch pair per cell")
        sw_ov = topology.sw_bias_vgs - vt0 / 1000.0
        loss = []
        for pair_id in sorted(switches):
            out = min(switches[pair_id], key=lambda s: s.device_id)
            loss.append(_square_law_factor(sw_ov, out.fresh_vt - vt0 + out.delta_vt))
        currents = currents * np.array(loss)
    return CurrentSteeringDac(topology, currents, digest)


@dataclass(frozen=True)
class TransferFunction:
    codes: tuple[int, ...]
    v_out: tuple[float, ...]
    topology_digest: str = ""
    stress_digest: str = ""

    def __post_init__(self):
        object.__setattr__(self, "codes", tuple(int(c) for c in self.codes))
        object.__setattr__(self, "v_out", tuple(float(v) for v in self.v_out))
        if len(self.codes) != len(self.v_out):
            raise DomainError("codes and v_out differ in length")
        if any(b != a + 1 for a, b in zip(self.codes, self.codes[1:])):
            raise DomainError("transfer-function codes must be contiguous and ascending")

    def __len__(self):
        return len(self.codes)

    @property
    def voltages(self) -> np.ndarray:
        return np.asarray(self.v_out)


def transfer_function(dac: CurrentSteeringDac,
                      codes: Iterable[int] | None = None) -> TransferFunction:
    """Capture v_out over ``codes`` (default: the full code range)."""
    codes = list(range(dac.topology.n_codes)) if codes is None else [int(c) for c in codes]
    if not codes:
        raise DomainError("empty code range")
    v = dac.output_voltages(codes)
    return TransferFunction(tuple(codes), tuple(v.tolist()), dac.topology.digest(),
                            dac.stress_digest)


# --- CSV interchange --------------------------------------------------------

def dumps_transfer_csv(tf: TransferFunction) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["code", "vout_v"])
    for code, v in zip(tf.codes, tf.v_out):
        writer.writerow([code, repr(v)])
    return buf.getvalue()


def loads_transfer_csv(text: str) -> TransferFunction:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["code", "vout_v"]:
        raise ConfigError("transfer CSV must start with header 'code,vout_v'")
    codes, volts = [], []
    for row in reader:
        if not row:
            continue
        try:
            codes.append(int(row[0]))
            volts.append(float(row[1]))
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"bad transfer CSV row {row!r}") from exc
    return TransferFunction(tuple(codes), tuple(volts))


def write_transfer_csv(tf: TransferFunction, path) -> Path:
    path = Path(path)
    path.write_text(dumps_transfer_csv(tf), encoding="utf-8", newline="\n")
    return path


def read_transfer_csv(path) -> TransferFunction:
    return loads_transfer_csv(Path(path).read_text(encoding="utf-8"))
