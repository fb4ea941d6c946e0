"""Scenario runner: fresh simulation -> stress mode -> playback -> metrics.

Also hosts the table reproduction, calibration, power-law and equivalence
reports used by the CLI. Everything written to disk is a pure function of the
scenario config and seed, so reruns are byte-identical.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, golden
from .dac import (
    SWITCH_STRESS_VGS_OFFSET,
    DacTopology,
    DeviceState,
    TransferFunction,
    build_dac,
    dac_population,
    read_transfer_csv,
    states_from_stress_file,
    transfer_function,
    write_transfer_csv,
)
from .device_models import (
    HOURS_PER_YEAR,
    DegradationParams,
    DeviceGeometry,
    StressCondition,
    calibrate_prefactor,
    delta_vt_accelerated,
    dump_params,
    equivalent_use_time,
    fit_powerlaw_slope,
    load_params,
    params_from_mapping,
)
from .errors import ConfigError, DomainError
from .metrics import (
    SpecLimits,
    compare_reports,
    compute_report,
    dnl,
    endpoint_fit,
    gain_error,
    inl,
    percent_change,
    read_comparison,
    read_report,
    write_comparison,
    write_report,
)
from .stress import (
    DeviceSpec,
    StressFile,
    StressPhase,
    StressSchedule,
    pair_vt_mismatch,
    read_stress_file,
    run_stress_mode,
    table1_schedule,
    write_stress_file,
)

MODES = ("fresh", "stress", "playback", "full", "tables", "equivalence")


@dataclass(frozen=True)
class Anchor:
    """Measured shift used to calibrate the extrapolation pre-factor."""

    v_gs: float = 4.6
    temp_c: float = 110.0
    hours: float = 168.0
    delta_vt_mv: float = 5.239

    @property
    def condition(self) -> StressCondition:
        return StressCondition(self.v_gs, self.temp_c, self.hours)


@dataclass(frozen=True)
class ScenarioConfig:
    params: DegradationParams = field(default_factory=DegradationParams)
    topology: DacTopology = field(default_factory=DacTopology)
    schedule: StressSchedule = field(default_factory=table1_schedule)
    playback: StressCondition = field(default_factory=lambda: StressCondition(3.3, 110.0))
    use_time_years: float = 7.0
    seed: int = 0
    samples: int = 0
    out_dir: Path = Path("out")
    mode: str = "full"
    mismatch: str = "deterministic"
    calibrate: bool = True
    anchor: Anchor = field(default_factory=Anchor)
    recovery_rate: float = 0.0
    workers: int = 1
    stress_file: str = ""
    yield_limits_mv: tuple[float, ...] = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.samples < 0 or self.workers < 1:
            raise ConfigError("samples must be >= 0 and workers >= 1")
        if self.mode == "playback" and not self.stress_file:
            raise ConfigError("playback mode needs a stress_file")

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def digest(self) -> str:
        data = {
            "params": self.params.as_dict(),
            "topology": dataclasses.asdict(self.topology),
            "schedule": self.schedule.digest(),
            "playback": dataclasses.asdict(self.playback),
            "use_time_years": self.use_time_years, "seed": self.seed,
            "samples": self.samples, "mode": self.mode, "mismatch": self.mismatch,
            "calibrate": self.calibrate, "anchor": dataclasses.asdict(self.anchor),
            "recovery_rate": self.recovery_rate,
            "yield_limits_mv": list(self.yield_limits_mv),
        }
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def effective_params(config: ScenarioConfig) -> DegradationParams:
    """Params with the pre-factor calibrated to the anchor when requested."""
    if not config.calibrate:
        return config.params
    a = config.anchor
    a_pref = calibrate_prefactor(config.params, a.condition, a.hours / HOURS_PER_YEAR,
                                 a.delta_vt_mv)
    return config.params.replace(a_prefactor=a_pref)


# --- scenario files -----------------------------------------------------------

def _get(section, key, conv, default):
    if key not in section:
        return default
    raw = section[key].strip()
    try:
        if conv is bool:
            if raw.lower() not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return raw.lower() in ("true", "yes", "1")
        return conv(raw)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key}: cannot parse {raw!r}") from None


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(x) for x in raw.replace(";", ",").split(",") if x.strip())


# Named starting points; a scenario file or CLI flags override their fields.
PRESETS = {
    "table1": {},
    "experiment": {"playback": StressCondition(3.3, 115.0)},
}


def preset_scenario(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ScenarioConfig(**PRESETS[name])


def load_scenario(path) -> ScenarioConfig:
    """Parse an INI scenario file; sections mirror ``ScenarioConfig``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(path.read_text(encoding="utf-8"))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    base = path.parent
    kwargs: dict = {}

    if cp.has_section("params"):
        sec = dict(cp["params"])
        params_file = sec.pop("file", None)
        if params_file:
            p = base / params_file
            if not p.is_file():
                raise ConfigError(f"params file {p} does not exist")
            params = load_params(p)
            if sec:
                merged = params_as_flat(params)
                merged.update(sec)
                params = params_from_mapping(merged)
        else:
            params = params_from_mapping(sec)
        kwargs["params"] = params

    if cp.has_section("topology"):
        t = cp["topology"]
        topo = {}
        for key, name, conv in (("bits", "bits", int), ("coding", "coding", str),
                                ("v_ref_v", "v_ref", float), ("vcca_v", "vcca", float),
                                ("full_scale_ma", "full_scale_ma", float),
                                ("unit_current_ma", "unit_current_ma", float),
                                ("r_term_ohm", "r_term_ohm", float),
                                ("vt_nominal_mv", "vt_nominal_mv", float),
                                ("cs_bias_vgs_v", "cs_bias_vgs", float),
                                ("sw_bias_vgs_v", "sw_bias_vgs", float),
                                ("leakage_ma", "leakage_ma", float),
                                ("switch_loss", "switch_loss", bool)):
            if key in t:
                topo[name] = _get(t, key, conv, None)
        if "cs_width_um" in t or "cs_length_um" in t:
            topo["cs_geometry"] = DeviceGeometry(_get(t, "cs_width_um", float, 10.0),
                                                 _get(t, "cs_length_um", float, 2.0))
        if "sw_width_um" in t or "sw_length_um" in t:
            topo["sw_geometry"] = DeviceGeometry(_get(t, "sw_width_um", float, 4.0),
                                                 _get(t, "sw_length_um", float, 0.5))
        unknown = set(t) - {"bits", "coding", "v_ref_v", "vcca_v", "full_scale_ma",
                            "unit_current_ma", "r_term_ohm", "vt_nominal_mv", "cs_bias_vgs_v",
                            "sw_bias_vgs_v", "leakage_ma", "switch_loss", "cs_width_um",
                            "cs_length_um", "sw_width_um", "sw_length_um"}
        if unknown:
            raise ConfigError(f"[topology] unknown keys {sorted(unknown)}")
        kwargs["topology"] = DacTopology(**topo)

    phases = []
    for name in cp.sections():
        if not name.startswith("phase."):
            continue
        s = cp[name]
        cond = StressCondition(_get(s, "v_gs_v", float, 3.3), _get(s, "temp_c", float, 25.0),
                               _get(s, "duration_h", float, 0.0), _get(s, "biased", bool, True))
        phases.append(StressPhase(name.split(".", 1)[1], cond,
                                  purpose=s.get("purpose", "burn_in").strip(),
                                  skew=s.get("skew", "typical").strip()))
    readouts: tuple[float, ...] = ()
    if cp.has_section("readouts") and "hours" in cp["readouts"]:
        try:
            readouts = _floats(cp["readouts"]["hours"])
        except ValueError:
            raise ConfigError("[readouts] hours must be a comma-separated list") from None
    if phases:
        kwargs["schedule"] = StressSchedule(tuple(phases), readouts)
    elif readouts:
        kwargs["schedule"] = table1_schedule(readouts=readouts)

    if cp.has_section("playback"):
        s = cp["playback"]
        kwargs["playback"] = StressCondition(_get(s, "v_gs_v", float, 3.3),
                                             _get(s, "temp_c", float, 110.0))
        kwargs["use_time_years"] = _get(s, "use_time_years", float, 7.0)

    if cp.has_section("anchor"):
        s = cp["anchor"]
        kwargs["anchor"] = Anchor(_get(s, "v_gs_v", float, 4.6), _get(s, "temp_c", float, 110.0),
                                  _get(s, "hours", float, 168.0),
                                  _get(s, "delta_vt_mv", float, 5.239))

    preset = "table1"
    if cp.has_section("scenario"):
        s = cp["scenario"]
        preset = s.get("preset", preset).strip()
        kwargs["mode"] = s.get("mode", "full").strip()
        kwargs["seed"] = _get(s, "seed", int, 0)
        kwargs["samples"] = _get(s, "samples", int, 0)
        kwargs["out_dir"] = base / s.get("out", "out").strip()
        kwargs["mismatch"] = s.get("mismatch", "deterministic").strip()
        kwargs["calibrate"] = _get(s, "calibrate", bool, True)
        kwargs["recovery_rate"] = _get(s, "recovery_rate_per_h", float, 0.0)
        kwargs["workers"] = _get(s, "workers", int, 1)
        if "stress_file" in s:
            kwargs["stress_file"] = str(base / s["stress_file"].strip())
        if "yield_limits_mv" in s:
            kwargs["yield_limits_mv"] = _floats(s["yield_limits_mv"])
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    return ScenarioConfig(**{**PRESETS[preset], **kwargs})


def params_as_flat(p: DegradationParams) -> dict[str, str]:
    out = {}
    for line in dump_params(p).splitlines():
        key, _, rest = line.partition("=")
        out[key.strip()] = rest.split("#")[0].strip()
    return out


# --- full pipeline --------------------------------------------------------------

@dataclass(frozen=True)
class RunManifest:
    tool_version: str
    config_digest: str
    seed: int
    files: dict  # logical name -> {"path": relative path, "sha256": hex}
    timestamps: dict  # stage -> ISO-8601
    provisional: tuple[str, ...] = ()

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        data = json.loads(text)
        data["provisional"] = tuple(data.get("provisional", ()))
        return cls(**data)


def _timestamp() -> str:
    # Reproducible by construction: wall-clock time would break byte identity.
    epoch = int(os.environ.get("SOURCE_DATE_EPOCH", "0"))
    return datetime.fromtimestamp(epoch, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _fresh_copy(states: Sequence[DeviceState]) -> list[DeviceState]:
    return [dataclasses.replace(s, delta_vt=0.0) for s in states]


def _states(sf: StressFile, readout: int = -1) -> list[DeviceState]:
    return states_from_stress_file(sf, readout)


def _max_cs_mismatch(sf: StressFile, readout: int, mode: str) -> float:
    values = pair_vt_mismatch(sf, readout, mode, role="current_source")
    return max(values.values()) if values else 0.0


def run_full(config: ScenarioConfig) -> RunManifest:
    """Run the configured flow and write every artifact plus ``manifest.json``."""
    if config.mode in ("tables", "equivalence"):
        raise ConfigError(f"mode {config.mode!r} is a report, not a pipeline run")
    params = effective_params(config)
    topo = config.topology
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, Path] = {}
    stamps: dict[str, str] = {}

    if config.mode == "playback":
        sf = read_stress_file(config.stress_file)
    else:
        sf = run_stress_mode(params, config.schedule, dac_population(topo), config.seed,
                             config.mismatch, config.recovery_rate)
    stamps["stress"] = _timestamp()

    fresh_dac = build_dac(topo, _fresh_copy(_states(sf)))
    tf_pre = transfer_function(fresh_dac)
    rep_pre = compute_report(tf_pre, topo.v_ref, fresh_dac.full_scale_current_ma)
    files["transfer_pre"] = write_transfer_csv(tf_pre, out / "transfer_pre.csv")
    files["metrics_pre"] = write_report(rep_pre, out / "metrics_pre.txt")
    stamps["fresh"] = _timestamp()

    if config.mode in ("stress", "full"):
        files["stress_file"] = write_stress_file(sf, out / "stress.tsv")

    if config.mode in ("playback", "full"):
        aged = build_dac(topo, sf)
        tf_post = transfer_function(aged)
        rep_post = compute_report(tf_post, topo.v_ref, aged.full_scale_current_ma)
        mm_mode = sf.mismatch_mode
        vt_pre = _max_cs_mismatch(dataclasses.replace(
            sf, records=tuple(dataclasses.replace(r, delta_vt=tuple(0.0 for _ in r.delta_vt))
                              for r in sf.records)), -1, mm_mode)
        vt_post = _max_cs_mismatch(sf, -1, mm_mode)
        comp = compare_reports(rep_pre, rep_post, SpecLimits(), (vt_pre, vt_post))
        files["transfer_post"] = write_transfer_csv(tf_post, out / "transfer_post.csv")
        files["metrics_post"] = write_report(rep_post, out / "metrics_post.txt")
        files["comparison"] = write_comparison(comp, out / "comparison.csv")
        stamps["playback"] = _timestamp()

    if config.samples > 0 and config.mode == "full":
        mc = run_monte_carlo(config, params)
        files["montecarlo"] = _write_text(out / "montecarlo.csv", mc.samples_csv())
        files["yield"] = _write_text(out / "yield.csv", mc.yield_csv())
        stamps["montecarlo"] = _timestamp()

    manifest = RunManifest(
        __version__, config.digest(), config.seed,
        {name: {"path": p.name, "sha256": _sha256(p)} for name, p in sorted(files.items())},
        stamps, tuple(config.params.provisional_fields()))
    _write_text(out / "manifest.json", manifest.to_json())
    return manifest


def _write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def verify_manifest(out_dir) -> list[str]:
    """Re-read every manifest entry; returns names whose digest or parse fails."""
    out = Path(out_dir)
    manifest = RunManifest.from_json((out / "manifest.json").read_text(encoding="utf-8"))
    readers = {"transfer_pre": read_transfer_csv, "transfer_post": read_transfer_csv,
               "metrics_pre": read_report, "metrics_post": read_report,
               "stress_file": read_stress_file, "comparison": read_comparison,
               "montecarlo": _read_csv, "yield": _read_csv}
    bad = []
    for name, entry in manifest.files.items():
        path = out / entry["path"]
        try:
            if _sha256(path) != entry["sha256"]:
                bad.append(name)
                continue
            readers[name](path)
        except (OSError, ConfigError, DomainError, KeyError, ValueError):
            bad.append(name)
    return bad


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# --- Monte Carlo ---------------------------------------------------------------

@dataclass(frozen=True)
class MonteCarloResult:
    seeds: tuple[int, ...]
    vt_mismatch_mv: tuple[float, ...]
    dnl_max: tuple[float, ...]
    inl_max: tuple[float, ...]
    gain_error_pct: tuple[float, ...]
    limits_mv: tuple[float, ...]

    def yield_curve(self) -> list[tuple[float, float]]:
        mm = np.asarray(self.vt_mismatch_mv)
        return [(lim, float(np.mean(mm <= lim))) for lim in self.limits_mv]

    def samples_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sample", "seed", "vt_mismatch_mv", "dnl_max_lsb", "inl_max_lsb",
                    "gain_error_pct"])
        for i, row in enumerate(zip(self.seeds, self.vt_mismatch_mv, self.dnl_max,
                                    self.inl_max, self.gain_error_pct)):
            w.writerow([i, row[0]] + [repr(float(x)) for x in row[1:]])
        return buf.getvalue()

    def yield_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["vt_mismatch_limit_mv", "yield"])
        for lim, y in self.yield_curve():
            w.writerow([repr(float(lim)), repr(y)])
        return buf.getvalue()


def _mc_sample(job):
    params, topo, schedule, recovery, seed = job
    sf = run_stress_mode(params, schedule, dac_population(topo), seed, "sampled", recovery)
    fresh = build_dac(topo, _fresh_copy(_states(sf)))
    aged = build_dac(topo, sf)
    tf_pre, tf_post = transfer_function(fresh), transfer_function(aged)
    return (_max_cs_mismatch(sf, -1, "sampled"), dnl(tf_post).max_abs, inl(tf_post).max_abs,
            gain_error(endpoint_fit(tf_post, topo.v_ref)))


def sample_seeds(seed: int, count: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def run_monte_carlo(config: ScenarioConfig,
                    params: DegradationParams | None = None) -> MonteCarloResult:
    """Sampled-mismatch batch; results keyed by sample index, independent of workers."""
    params = params or effective_params(config)
    seeds = sample_seeds(config.seed, config.samples)
    jobs = [(params, config.topology, config.schedule, config.recovery_rate, s) for s in seeds]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_mc_sample, jobs))
    else:
        results = [_mc_sample(j) for j in jobs]
    cols = list(zip(*results)) if results else [(), (), (), ()]
    return MonteCarloResult(tuple(seeds), *(tuple(c) for c in cols),
                            tuple(sorted(config.yield_limits_mv)))


# --- calibration and table reproduction -------------------------------------------

@dataclass(frozen=True)
class CalibrationReport:
    anchor: Anchor
    a_prefactor: float
    predicted_nominal_mv: float
    paper_nominal_mv: float
    model_ratio: float
    paper_ratio: float
    provisional: tuple[str, ...]

    @property
    def residual_mv(self) -> float:
        return self.predicted_nominal_mv - self.paper_nominal_mv

    def render(self) -> str:
        a = self.anchor
        lines = [
            f"anchor: {a.delta_vt_mv} mV after {a.hours} h at {a.v_gs} V / {a.temp_c} C",
            f"calibrated pre-factor A = {self.a_prefactor:.6g} mV/year^n",
            f"predicted shift at 3.3 V: {self.predicted_nominal_mv:.4f} mV "
            f"(published {self.paper_nominal_mv} mV, residual {self.residual_mv:+.4f} mV)",
            f"4.6 V / 3.3 V shift ratio: model {self.model_ratio:.4f}, "
            f"published {self.paper_ratio:.4f} (unreconciled)",
            "provisional parameters: " + (", ".join(self.provisional) or "none"),
        ]
        return "\n".join(lines) + "\n"


def calibration_report(params: DegradationParams | None = None,
                       anchor: Anchor | None = None) -> CalibrationReport:
    params = params or DegradationParams()
    anchor = anchor or Anchor()
    a_pref = calibrate_prefactor(params, anchor.condition, anchor.hours / HOURS_PER_YEAR,
                                 anchor.delta_vt_mv)
    cal = params.replace(a_prefactor=a_pref)
    t = anchor.hours / HOURS_PER_YEAR
    nominal = delta_vt_accelerated(cal, StressCondition(3.3, anchor.temp_c), t)
    hi = delta_vt_accelerated(cal, anchor.condition, t)
    paper_hi = golden.scalar("vt_anchor_4v6")
    paper_nom = next(float(r["vt_mismatch_mv"]) for r in golden.load_table("table2_pairs")
                     if r["stress_v"] == "3.3" and r["pair"] == "current_source")
    return CalibrationReport(anchor, a_pref, nominal, paper_nom, hi / nominal,
                             paper_hi / paper_nom, tuple(params.provisional_fields()))


@dataclass(frozen=True)
class DiffRow:
    table: str
    item: str
    printed: float | None
    computed: float | None
    tolerance: float | None
    status: str  # match | mismatch | residual | not comparable | derived
    citation: str = ""


@dataclass(frozen=True)
class TableDiff:
    rows: tuple[DiffRow, ...]

    @property
    def ok(self) -> bool:
        return all(r.status != "mismatch" for r in self.rows)

    def find(self, table: str, item: str) -> DiffRow:
        for r in self.rows:
            if r.table == table and r.item == item:
                return r
        raise KeyError((table, item))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["table", "item", "printed", "computed", "tolerance", "status", "citation"])
        for r in self.rows:
            w.writerow([r.table, r.item, _num(r.printed), _num(r.computed), _num(r.tolerance),
                        r.status, r.citation])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps([dataclasses.asdict(r) for r in self.rows], indent=2) + "\n"


def _num(x):
    return "" if x is None else f"{x:.6g}"


def _diff(table, item, printed, computed, tol, citation):
    status = "match" if abs(computed - printed) <= tol else "mismatch"
    return DiffRow(table, item, printed, computed, tol, status, citation)


PERCENT_TOL = 0.15


def table2_population(cs_bias_vgs: float = 0.65, sw_bias_vgs: float = 1.2,
                      vt_mv: float = 450.0) -> list[DeviceSpec]:
    """The matched pairs M1/M2 (current sources) and M3/M4 (differential switch)."""
    cs, sw = DeviceGeometry(10.0, 2.0), DeviceGeometry(4.0, 0.5)
    return [DeviceSpec("M1", "current_source", cs, vt_mv, "cs", cs_bias_vgs),
            DeviceSpec("M2", "current_source", cs, vt_mv, "cs", cs_bias_vgs),
            DeviceSpec("M3", "differential_switch", sw, vt_mv, "diff", sw_bias_vgs,
                       SWITCH_STRESS_VGS_OFFSET),
            DeviceSpec("M4", "differential_switch", sw, vt_mv, "diff", sw_bias_vgs,
                       SWITCH_STRESS_VGS_OFFSET)]


def burn_in_stress(params: DegradationParams, v_gs: float, temp_c: float = 110.0,
                   hours: float = 168.0, seed: int = 0) -> StressFile:
    """Single-condition burn-in of the M1/M2 and M3/M4 device pairs."""
    return run_stress_mode(params, table1_schedule(v_gs, temp_c, hours, readouts=(hours,)),
                           table2_population(), seed)


def reproduce_tables(params: DegradationParams | None = None,
                     calibrated: bool = True) -> TableDiff:
    """Recompute every derivable published cell and diff it against the print."""
    params = params or DegradationParams()
    rows: list[DiffRow] = []

    for table in ("dac_simulation", "burnin_experiment"):
        for r in golden.load_table(table):
            pct = percent_change(float(r["pre"]), float(r["post"]))
            rows.append(_diff(table, f"{r['metric']} percent_change",
                              float(r["percent_change"]), pct, PERCENT_TOL, r["citation"]))
            if r["metric"] == "gain_error":
                flagged = abs(pct) > SpecLimits().gain_pct
                rows.append(DiffRow(table, "gain_error exceeds 5% spec", 1.0, float(flagged),
                                    0.0, "match" if flagged else "mismatch", r["citation"]))

    codes, pre, post = golden.table4_ramps()
    tf_pre, tf_post = TransferFunction(codes, pre), TransferFunction(codes, post)
    span = golden.scalar("ideal_span")
    fit = endpoint_fit(tf_post, span)
    rows.append(_diff("table4_vout", "gain A_v", 3.585 / 2.5, fit.gain, 1e-6,
                      "post ramp full scale over ideal span"))
    rows.append(_diff("table4_vout", "gain A_v (printed decimals)", golden.scalar("gain_av"),
                      fit.gain, 1e-4, "printed gain"))
    rows.append(_diff("table4_vout", "gain_error_pct", golden.scalar("gain_error_pct"),
                      gain_error(fit), PERCENT_TOL, "printed gain error"))
    rows.append(_diff("table4_vout", "pre-burn-in full scale", span, tf_pre.v_out[-1], 1e-9,
                      "pre ramp, last code"))
    for label, tf in (("pre", tf_pre), ("post", tf_post)):
        rows.append(DiffRow("table4_vout", f"{label} dnl_max_abs", None, dnl(tf).max_abs,
                            None, "derived", "burn-in Vout ramp"))
        rows.append(DiffRow("table4_vout", f"{label} inl_max_abs", None, inl(tf).max_abs,
                            None, "derived", "burn-in Vout ramp"))
    span_err = golden.scalar("span_error")
    rows.append(DiffRow("table4_vout", "span error (V)", span_err, tf_post.v_out[-1] - span,
                        None, "residual", "printed 850 mV; 3.585 - 2.5 = 1.085 V"))

    # Physics-dependent cells: only comparable once A is calibrated.
    cal = calibration_report(params)
    cal_params = params.replace(a_prefactor=cal.a_prefactor) if calibrated else params
    for r in golden.load_table("table2_pairs"):
        v = float(r["stress_v"])
        sf = burn_in_stress(cal_params, v)
        rec = sf.record(r["transistor"])
        item = f"{r['transistor']} @ {r['stress_v']} V"
        if not calibrated:
            rows.append(DiffRow("table2_pairs", item + " dvt_mv", float(r["vt_mismatch_mv"]),
                                rec.delta_vt[-1], None, "not comparable", r["citation"]))
        else:
            printed = float(r["vt_mismatch_mv"])
            ok = abs(rec.delta_vt[-1] - printed) <= 0.05
            rows.append(DiffRow("table2_pairs", item + " dvt_mv", printed, rec.delta_vt[-1], 0.05,
                                "match" if ok else "residual", r["citation"]))
        rows.append(DiffRow("table2_pairs", item + " idsat_pct", float(r["idsat_pct"]),
                            rec.idsat_change[-1], None, "not comparable", r["citation"]))
    return TableDiff(tuple(rows))


# --- power-law series and equivalence ---------------------------------------------

@dataclass(frozen=True)
class PowerLawSeries:
    times_h: tuple[float, ...]
    curves: dict  # volts -> tuple of mV
    fits: dict  # volts -> (prefactor per hour^n, slope)

    def to_csv(self) -> str:
        volts = sorted(self.curves)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_hours"] + [f"dvt_mv_{v:g}v" for v in volts])
        for i, t in enumerate(self.times_h):
            w.writerow([repr(t)] + [repr(self.curves[v][i]) for v in volts])
        return buf.getvalue()

    def fits_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["v_gs_v", "prefactor_mv_per_hour_n", "slope"])
        for v in sorted(self.fits):
            a, n = self.fits[v]
            w.writerow([f"{v:g}", repr(a), repr(n)])
        return buf.getvalue()

    def dominates(self, hi: float, lo: float) -> bool:
        return all(a > b for a, b in zip(self.curves[hi], self.curves[lo]))


def emit_powerlaw_series(params: DegradationParams, temp_c: float = 110.0,
                         times_h: Sequence[float] | None = None,
                         voltages: Sequence[float] = (3.3, 4.6)) -> PowerLawSeries:
    """Shift-versus-time curves at each stress voltage plus their log-log fits."""
    if times_h is None:
        times_h = np.logspace(-1, math.log10(168.0), 25)
    times = np.asarray(times_h, dtype=float)
    if times.ndim != 1 or times.size < 2 or np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise DomainError("time grid must be >= 2 strictly increasing positive values")
    curves, fits = {}, {}
    for v in voltages:
        dvt = np.asarray(delta_vt_accelerated(params, StressCondition(v, temp_c),
                                              times / HOURS_PER_YEAR))
        curves[float(v)] = tuple(dvt.tolist())
        fits[float(v)] = fit_powerlaw_slope(np.column_stack([times, dvt]))
    return PowerLawSeries(tuple(times.tolist()), curves, fits)


@dataclass(frozen=True)
class EquivalenceReport:
    stress: StressCondition
    use: StressCondition
    t_stress_h: float
    n_exp: float
    years: float
    paper_years: float
    sensitivity: tuple[tuple[float, float], ...]  # (n, years)

    @property
    def hours(self) -> float:
        return self.years * HOURS_PER_YEAR

    def render(self) -> str:
        lines = [
            f"stress: {self.t_stress_h:g} h at {self.stress.v_gs} V / {self.stress.temp_c} C",
            f"use:    {self.use.v_gs} V / {self.use.temp_c} C",
            f"equivalent use time: {self.hours:.6g} h = {self.years:.4f} years (n = {self.n_exp})",
            f"published claim: {self.paper_years:g} years "
            f"(gap {self.years - self.paper_years:+.3f} years; '95%' qualifier undefined, ignored)",
            "sensitivity to n:",
        ]
        lines += [f"  n = {n:.3f}: {y:.6g} years" for n, y in self.sensitivity]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n_exp", "equivalent_years", "paper_years"])
        w.writerow([repr(self.n_exp), repr(self.years), repr(self.paper_years)])
        for n, y in self.sensitivity:
            w.writerow([repr(n), repr(y), repr(self.paper_years)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"n_exp": self.n_exp, "years": self.years, "hours": self.hours,
                           "paper_years": self.paper_years,
                           "sensitivity": [list(x) for x in self.sensitivity]}, indent=2) + "\n"


def equivalence_report(params: DegradationParams, stress: StressCondition,
                       use: StressCondition, t_stress: float,
                       n_grid: Sequence[float] | None = None) -> EquivalenceReport:
    years = equivalent_use_time(params, stress, use, t_stress)
    if n_grid is None:
        n_grid = np.round(np.linspace(0.15, 0.30, 16), 10)
    sens = tuple((float(n), equivalent_use_time(params.replace(n_exp=float(n)), stress, use,
                                                t_stress)) for n in n_grid)
    return EquivalenceReport(stress, use, t_stress, params.n_exp, years,
                             golden.scalar("equivalent_use_years"), sens)
