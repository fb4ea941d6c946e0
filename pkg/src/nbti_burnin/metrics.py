"""Static DAC metrics for playback captures: DNL, INL, gain, offset, current.

Linearity uses the endpoint convention: the LSB is the measured span divided
by the number of steps, and INL is measured against the straight line through
the first and last codes. Gain and offset therefore never leak into DNL/INL.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .dac import TransferFunction
from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class LineFit:
    slope: float  # dimensionless gain A_v
    intercept: float  # V
    ideal_span: float  # V
    residual: float = 0.0  # V, rms distance of the capture from the line

    @property
    def gain(self) -> float:
        return self.slope


@dataclass(frozen=True)
class Linearity:
    values: np.ndarray  # LSB
    max_abs: float
    mean_abs: float


@dataclass(frozen=True)
class MetricsReport:
    dnl_max_abs: float
    dnl_mean: float
    inl_max_abs: float
    inl_mean: float
    gain: float
    gain_error: float  # percent
    full_scale_v: float
    offset_error: float  # V
    full_scale_output_current: float | None = None  # mA
    n_codes: int = 0
    topology_digest: str = ""
    stress_digest: str = ""

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not math.isfinite(v):
                raise DomainError(f"metric {f.name} is not finite")


_UNITS = {
    "dnl_max_abs": "LSB", "dnl_mean": "LSB", "inl_max_abs": "LSB", "inl_mean": "LSB",
    "gain": "", "gain_error": "%", "full_scale_v": "V", "offset_error": "V",
    "full_scale_output_current": "mA", "n_codes": "", "topology_digest": "",
    "stress_digest": "",
}


def _span(tf: TransferFunction) -> float:
    if len(tf) < 2:
        raise DomainError("need at least two codes")
    return tf.v_out[-1] - tf.v_out[0]


def endpoint_fit(tf: TransferFunction, ideal_span: float) -> LineFit:
    """Straight line through the end codes, slope expressed as gain vs ``ideal_span``."""
    if not ideal_span > 0:
        raise DomainError(f"ideal span must be positive, got {ideal_span}")
    span = _span(tf)
    gain = span / ideal_span
    v = tf.voltages
    k = np.arange(len(v))
    line = v[0] + span * k / (len(v) - 1)
    residual = float(np.sqrt(np.mean((v - line) ** 2)))
    return LineFit(gain, tf.v_out[0], ideal_span, residual)


def gain_error(fit: LineFit | tuple[TransferFunction, TransferFunction]) -> float:
    """Percent gain error ``100*(A_v - 1)``, offset taken as zero.

    Given a (reference, measured) pair of captures, the reference span is
    used as the ideal span.
    """
    if isinstance(fit, tuple):
        ref, measured = fit
        fit = endpoint_fit(measured, _span(ref))
    if not fit.ideal_span > 0:
        raise DomainError("ideal span must be positive")
    return 100.0 * (fit.gain - 1.0)


def dnl(tf: TransferFunction) -> Linearity:
    span = _span(tf)
    if span == 0:
        raise DomainError("zero measured span")
    lsb = span / (len(tf) - 1)
    values = np.diff(tf.voltages) / lsb - 1.0
    return Linearity(values, float(np.max(np.abs(values))), float(np.mean(np.abs(values))))


def inl(tf: TransferFunction) -> Linearity:
    span = _span(tf)
    if span == 0:
        raise DomainError("zero measured span")
    n = len(tf) - 1
    v = tf.voltages
    line = v[0] + span * np.arange(n + 1) / n
    values = (v - line) / (span / n)
    values[0] = values[-1] = 0.0
    return Linearity(values, float(np.max(np.abs(values))), float(np.mean(np.abs(values))))


def offset_error(tf: TransferFunction) -> float:
    """Output at the first captured code relative to an ideal 0 V."""
    if len(tf) == 0:
        raise DomainError("empty transfer function")
    return tf.v_out[0]


def percent_change(pre_value: float, post_value: float) -> float:
    if pre_value == 0:
        raise DomainError("percent change undefined for a zero reference value")
    return 100.0 * (post_value - pre_value) / pre_value


def compute_report(tf: TransferFunction, ideal_span: float,
                   output_current_ma: float | None = None) -> MetricsReport:
    fit = endpoint_fit(tf, ideal_span)
    d, i = dnl(tf), inl(tf)
    return MetricsReport(
        dnl_max_abs=d.max_abs, dnl_mean=d.mean_abs,
        inl_max_abs=i.max_abs, inl_mean=i.mean_abs,
        gain=fit.gain, gain_error=gain_error(fit),
        full_scale_v=tf.v_out[-1], offset_error=offset_error(tf),
        full_scale_output_current=output_current_ma, n_codes=len(tf),
        topology_digest=tf.topology_digest, stress_digest=tf.stress_digest)


# --- pre/post comparison ----------------------------------------------------

@dataclass(frozen=True)
class SpecLimits:
    dnl_lsb: float = 1.0
    inl_lsb: float = 1.0
    gain_pct: float = 5.0
    offset_pct: float = 5.0
    output_current_ma: tuple[float, float] = (0.0, 21.0)
    vt_mismatch_mv: float = 2.0


@dataclass(frozen=True)
class ComparisonRow:
    metric: str
    pre: float
    post: float
    percent_change: float | None
    spec_limit: str
    passed: bool


@dataclass(frozen=True)
class Comparison:
    rows: tuple[ComparisonRow, ...]

    def row(self, metric: str) -> ComparisonRow:
        for r in self.rows:
            if r.metric == metric:
                return r
        raise KeyError(metric)

    @property
    def failed(self) -> list[str]:
        return [r.metric for r in self.rows if not r.passed]

    @property
    def all_passed(self) -> bool:
        return not self.failed


# References this small are float residue of an ideal value, not a baseline.
_ZERO_REFERENCE = 1e-9


def _pct_or_none(pre, post):
    return None if abs(pre) <= _ZERO_REFERENCE else percent_change(pre, post)


def compare_reports(pre: MetricsReport, post: MetricsReport,
                    limits: SpecLimits = SpecLimits(),
                    vt_mismatch_mv: tuple[float, float] | None = None) -> Comparison:
    """Percent changes and spec flags, pre versus post.

    The gain row compares full-scale output voltages and is judged by its
    percent change; DNL/INL are judged by their post magnitude. A zero offset
    before stress is judged against ``offset_pct`` of the pre full scale.
    ``vt_mismatch_mv`` optionally adds a (pre, post) threshold mismatch row.
    """
    if pre.n_codes != post.n_codes:
        raise DomainError(f"capture ranges differ: {pre.n_codes} vs {post.n_codes} codes")
    rows = [
        ComparisonRow("dnl", pre.dnl_max_abs, post.dnl_max_abs,
                      _pct_or_none(pre.dnl_max_abs, post.dnl_max_abs),
                      f"+/-{limits.dnl_lsb:g} LSB", post.dnl_max_abs <= limits.dnl_lsb),
        ComparisonRow("inl", pre.inl_max_abs, post.inl_max_abs,
                      _pct_or_none(pre.inl_max_abs, post.inl_max_abs),
                      f"+/-{limits.inl_lsb:g} LSB", post.inl_max_abs <= limits.inl_lsb),
    ]
    gain_pct = percent_change(pre.full_scale_v, post.full_scale_v)
    rows.append(ComparisonRow("gain_error", pre.full_scale_v, post.full_scale_v, gain_pct,
                              f"+/-{limits.gain_pct:g}%", abs(gain_pct) <= limits.gain_pct))
    off_pct = _pct_or_none(pre.offset_error, post.offset_error)
    if off_pct is None:
        off_ok = abs(post.offset_error) <= limits.offset_pct / 100.0 * abs(pre.full_scale_v)
    else:
        off_ok = abs(off_pct) <= limits.offset_pct
    rows.append(ComparisonRow("offset_error", pre.offset_error, post.offset_error, off_pct,
                              f"+/-{limits.offset_pct:g}%", off_ok))
    if pre.full_scale_output_current is not None and post.full_scale_output_current is not None:
        lo, hi = limits.output_current_ma
        cur = post.full_scale_output_current
        rows.append(ComparisonRow(
            "output_current", pre.full_scale_output_current, cur,
            _pct_or_none(pre.full_scale_output_current, cur), f"{lo:g}-{hi:g} mA",
            lo <= cur <= hi))
    if vt_mismatch_mv is not None:
        vpre, vpost = vt_mismatch_mv
        rows.append(ComparisonRow("vt_mismatch", vpre, vpost, _pct_or_none(vpre, vpost),
                                  f"{limits.vt_mismatch_mv:g} mV",
                                  vpost <= limits.vt_mismatch_mv))
    return Comparison(tuple(rows))


# --- serialization ------------------------------------------------------------

def dumps_report(report: MetricsReport) -> str:
    lines = []
    for f in fields(report):
        value = getattr(report, f.name)
        text = "none" if value is None else (repr(value) if isinstance(value, float) else str(value))
        unit = _UNITS.get(f.name, "")
        lines.append(f"{f.name} = {text}" + (f" {unit}" if unit else ""))
    return "\n".join(lines) + "\n"


def loads_report(text: str) -> MetricsReport:
    kwargs = {}
    types = {f.name: f.type for f in fields(MetricsReport)}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, rest = line.partition("=")
        key = key.strip()
        if key not in types:
            raise ConfigError(f"unknown metric {key!r}")
        parts = rest.split()
        raw = parts[0] if parts else ""
        if key in ("topology_digest", "stress_digest"):
            kwargs[key] = raw
        elif key == "n_codes":
            kwargs[key] = int(raw)
        else:
            kwargs[key] = None if raw == "none" else float(raw)
    return MetricsReport(**kwargs)


def write_report(report: MetricsReport, path) -> Path:
    path = Path(path)
    path.write_text(dumps_report(report), encoding="utf-8", newline="\n")
    return path


def read_report(path) -> MetricsReport:
    return loads_report(Path(path).read_text(encoding="utf-8"))


COMPARISON_COLUMNS = ("metric", "pre", "post", "percent_change", "spec_limit", "pass")


def dumps_comparison(comp: Comparison) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARISON_COLUMNS)
    for r in comp.rows:
        w.writerow([r.metric, repr(r.pre), repr(r.post),
                    "" if r.percent_change is None else repr(r.percent_change),
                    r.spec_limit, "pass" if r.passed else "fail"])
    return buf.getvalue()


def loads_comparison(text: str) -> Comparison:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != COMPARISON_COLUMNS:
        raise ConfigError("comparison CSV has unexpected columns")
    rows = []
    for r in reader:
        rows.append(ComparisonRow(r["metric"], float(r["pre"]), float(r["post"]),
                                  float(r["percent_change"]) if r["percent_change"] else None,
                                  r["spec_limit"], r["pass"] == "pass"))
    return Comparison(tuple(rows))


def write_comparison(comp: Comparison, path) -> Path:
    path = Path(path)
    path.write_text(dumps_comparison(comp), encoding="utf-8", newline="\n")
    return path


def read_comparison(path) -> Comparison:
    return loads_comparison(Path(path).read_text(encoding="utf-8"))
