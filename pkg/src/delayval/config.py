"""JSON run configuration: schema, validation, and object construction.

A run config bundles the market block, the income model, the income
history and simulation defaults.  Validation happens before any
computation; schema violations carry a JSON-pointer-style path to the
offending element.  All quantities are annual: rates and drifts in
1/years, volatilities in 1/sqrt(years), times in years.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .income import HistorySegment, IncomeModel
from .market import MarketParams
from .simulation import SimConfig

__all__ = ["SchemaError", "RunConfig", "load_config", "validate_config", "CONFIG_SCHEMA"]

SCHEMA_VERSION = 1

_MEASURE_SCHEMA = {
    "type": "object",
    "properties": {
        "atoms": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"loc": {"type": "number"}, "mass": {"type": "number"}},
                "required": ["loc", "mass"],
                "additionalProperties": False,
            },
        },
        "density": {
            "type": "object",
            "properties": {
                "cells": {"type": "integer", "minimum": 1},
                "values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            },
            "required": ["cells", "values"],
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "market": {
            "type": "object",
            "properties": {
                "r": {"type": "number"},
                "mu": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "sigma": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                    "minItems": 1,
                },
            },
            "required": ["r", "mu", "sigma"],
            "additionalProperties": False,
        },
        "income": {
            "type": "object",
            "properties": {
                "mu0": {"type": "number", "exclusiveMinimum": 0},
                "sigma0": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "d": {"type": "number", "exclusiveMinimum": 0},
                "phi": _MEASURE_SCHEMA,
                "phi_vec": {"type": "array", "items": _MEASURE_SCHEMA},
            },
            "required": ["mu0", "sigma0", "d", "phi", "phi_vec"],
            "additionalProperties": False,
        },
        "history": {
            "type": "object",
            "properties": {
                "t0": {"type": "number"},
                "values": {"type": "array", "items": {"type": "number"}, "minItems": 2},
                "csv": {"type": "string"},
                "flat": {"type": "number"},
                "points": {"type": "integer", "minimum": 2},
            },
            "additionalProperties": False,
        },
        "simulation": {
            "type": "object",
            "properties": {
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "n_paths": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer", "minimum": 0},
                "horizon": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "measure": {"enum": ["physical", "risk_neutral"]},
                "antithetic": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "valuation": {
            "type": "object",
            "properties": {"exit_intensity": {"type": "number", "minimum": 0}},
            "additionalProperties": False,
        },
    },
    "required": ["schema_version", "market", "income", "history"],
    "additionalProperties": False,
}

_VALIDATOR = Draft202012Validator(CONFIG_SCHEMA)


class SchemaError(ValueError):
    """Config fails schema validation; carries a JSON-pointer path."""

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"config error at {pointer}: {message}")


@dataclass(frozen=True)
class RunConfig:
    market: MarketParams
    income: IncomeModel
    history: HistorySegment
    sim: SimConfig
    exit_intensity: float


def validate_config(raw: dict) -> None:
    errors = sorted(_VALIDATOR.iter_errors(raw), key=lambda e: e.json_path)
    if errors:
        e = errors[0]
        pointer = "/" + "/".join(str(p) for p in e.absolute_path)
        raise SchemaError(pointer, e.message)


def _history_from_csv(path: Path, d: float) -> HistorySegment:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "t" not in rows[0] or "X0" not in rows[0]:
        raise SchemaError("/history/csv", f"{path}: need columns t, X0")
    t = np.array([float(r["t"]) for r in rows])
    x = np.array([float(r["X0"]) for r in rows])
    steps = np.diff(t)
    if t.size < 2 or not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
        raise SchemaError("/history/csv", f"{path}: times must form a uniform grid")
    if abs((t[-1] - t[0]) - d) > 1e-9 * max(1.0, d):
        raise SchemaError("/history/csv",
                          f"{path}: history spans {t[-1] - t[0]} years, expected {d}")
    return HistorySegment(t0=float(t[-1]), d=d, values=x)


def _build_history(fragment: dict, d: float, base_dir: Path) -> HistorySegment:
    t0 = float(fragment.get("t0", 0.0))
    if "values" in fragment:
        return HistorySegment(t0=t0, d=d, values=np.asarray(fragment["values"], dtype=float))
    if "csv" in fragment:
        return _history_from_csv(base_dir / fragment["csv"], d)
    if "flat" in fragment:
        return HistorySegment.flat(fragment["flat"], d,
                                   n_points=int(fragment.get("points", 101)), t0=t0)
    raise SchemaError("/history", "need one of: values, csv, flat")


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    """Parse, schema-validate and build a run configuration.

    overrides (e.g. from CLI flags) replace keys of the simulation and
    valuation blocks after validation.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise SchemaError("/", f"not valid JSON: {e}") from None
    validate_config(raw)

    market = MarketParams.from_json(raw["market"])
    income = IncomeModel.from_json(raw["income"])
    if market.n_assets != income.n_assets:
        raise SchemaError("/income/sigma0",
                          f"{income.n_assets} income loadings for a "
                          f"{market.n_assets}-asset market")
    history = _build_history(raw["history"], income.d, path.parent)

    sim_raw = dict(raw.get("simulation", {}))
    val_raw = dict(raw.get("valuation", {}))
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key == "exit_intensity":
            val_raw[key] = val
        else:
            sim_raw[key] = val
    horizon = sim_raw.get("horizon")
    sim = SimConfig(
        dt=float(sim_raw.get("dt", 0.01)),
        n_paths=int(sim_raw.get("n_paths", 10_000)),
        seed=int(sim_raw.get("seed", 42)),
        horizon=None if horizon is None else float(horizon),
        measure=str(sim_raw.get("measure", "risk_neutral")),
        antithetic=bool(sim_raw.get("antithetic", False)),
        n_threads=int(sim_raw.get("n_threads", 1)),
    )
    return RunConfig(market=market, income=income, history=history, sim=sim,
                     exit_intensity=float(val_raw.get("exit_intensity", 0.0)))
