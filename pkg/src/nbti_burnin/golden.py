"""Loader for the transcribed published tables shipped under ``nbti_burnin/data``."""

from __future__ import annotations

import csv
from importlib import resources

from .errors import ConfigError

TABLES = ("table1_conditions", "table2_pairs", "dac_simulation", "burnin_experiment",
          "table4_vout", "scalars")


def load_table(name: str) -> list[dict[str, str]]:
    if name not in TABLES:
        raise ConfigError(f"unknown golden table {name!r}")
    try:
        text = resources.files("nbti_burnin.data").joinpath(f"{name}.csv").read_text("utf-8")
    except FileNotFoundError as exc:
        raise ConfigError(f"golden table {name!r} is missing") from exc
    return list(csv.DictReader(text.splitlines()))


def scalar(name: str) -> float:
    for row in load_table("scalars"):
        if row["name"] == name:
            return float(row["value"])
    raise ConfigError(f"unknown golden scalar {name!r}")


def table4_ramps():
    """(codes, pre-burn-in volts, post-burn-in volts) from the Vout table."""
    rows = load_table("table4_vout")
    codes = [int(r["code"]) for r in rows]
    return codes, [float(r["vout_pre_v"]) for r in rows], [float(r["vout_post_v"]) for r in rows]
