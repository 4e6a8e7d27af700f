"""Experiment configuration: defaults, flat ``key=value`` files and overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import typing
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .errors import ConfigError

ENV_PREFIX = "MEA_SIM_"

ANTENNA_CONFIGS = ("macro_only", "oda", "mea_single", "mea_double", "fixed_single", "fixed_double")


@dataclass(frozen=True)
class ExperimentConfig:
    # Monte Carlo
    n_drops: int = 1000
    master_seed: int = 42
    gamma_bins_db: tuple[float, ...] = (-5.0, -2.0, 0.0, 2.0, 5.0)
    gamma_tol_db: float = 0.5
    max_placement_tries: int = 100_000
    # experiments
    antenna_configs: tuple[str, ...] = ANTENNA_CONFIGS
    misalignments_deg: tuple[float, ...] = (0.0, 20.0, 40.0, 60.0, 90.0, 135.0, 180.0)
    rounds_grid: tuple[int, ...] = (1, 2, 5, 10, 15, 20)
    alpha: float = 0.05
    max_rounds: int = 100
    ttest_mode: str = "runner_up"
    training_element: str = "single"
    stability_resamples: int = 50
    install_offset_deg: Optional[float] = None  # None: uniform in [0, 90) per drop
    # layout and users
    isd_m: float = 1732.0
    sector_offset_deg: float = 30.0
    selected_sector: int = 0
    ue_region: str = "sector"
    n_ues: int = 30
    hotspot_fraction: float = 1.0 / 3.0
    hotspot_radius_m: float = 10.0
    min_distance_m: float = 10.0
    # radio
    macro_tx_power_dbm: float = 46.0
    scbs_tx_power_dbm: float = 20.0
    bandwidth_hz: float = 10e6
    noise_figure_db: float = 9.0
    shadowing_std_db: float = 0.0
    macro_gain_dbi: float = 14.0
    macro_hpbw_deg: float = 70.0
    macro_f2b_db: float = 25.0
    single_patch_gain_dbi: float = 7.0
    single_patch_hpbw_deg: float = 90.0
    single_patch_f2b_db: float = 15.0
    double_patch_gain_dbi: float = 10.0
    double_patch_hpbw_deg: float = 60.0
    double_patch_f2b_db: float = 20.0
    omni_gain_dbi: float = 0.0
    macro_pl_intercept_db: float = 128.1
    macro_pl_slope_db: float = 37.6
    scbs_pl_intercept_db: float = 140.7
    scbs_pl_slope_db: float = 36.7
    shannon_bw_eff: float = 0.56
    shannon_sinr_eff: float = 2.0
    shannon_se_cap: float = 4.4

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(key, msg)

        need(self.n_drops >= 1, "n_drops", "must be >= 1")
        need(0 <= self.master_seed < 2 ** 64, "master_seed", "must be an unsigned 64-bit integer")
        need(len(self.gamma_bins_db) >= 1, "gamma_bins_db", "needs at least one bin")
        need(len(set(self.gamma_bins_db)) == len(self.gamma_bins_db), "gamma_bins_db", "duplicate bins")
        need(self.gamma_tol_db > 0, "gamma_tol_db", "must be > 0")
        need(self.max_placement_tries >= 1, "max_placement_tries", "must be >= 1")
        for c in self.antenna_configs:
            need(c in ANTENNA_CONFIGS, "antenna_configs", f"unknown config {c!r}")
        for m in self.misalignments_deg:
            need(0 <= m <= 180, "misalignments_deg", f"{m} outside [0, 180]")
        need(len(self.rounds_grid) >= 1 and all(k >= 1 for k in self.rounds_grid),
             "rounds_grid", "entries must be >= 1")
        need(0 < self.alpha < 1, "alpha", "must be in (0, 1)")
        need(self.max_rounds >= 2, "max_rounds", "must be >= 2")
        need(self.ttest_mode in ("runner_up", "pooled"), "ttest_mode", "must be runner_up or pooled")
        need(self.training_element in ("single", "double"), "training_element",
             "must be single or double")
        need(self.stability_resamples >= 1, "stability_resamples", "must be >= 1")
        need(self.isd_m > 0, "isd_m", "must be > 0")
        need(0 <= self.selected_sector < 3, "selected_sector", "must be 0, 1 or 2 (centre site)")
        need(self.ue_region in ("sector", "site"), "ue_region", "must be sector or site")
        need(self.n_ues >= 1, "n_ues", "must be >= 1")
        need(0 <= self.hotspot_fraction <= 1, "hotspot_fraction", "must be in [0, 1]")
        need(self.hotspot_radius_m > 0, "hotspot_radius_m", "must be > 0")
        need(self.min_distance_m >= 10, "min_distance_m", "must be >= 10 (pathloss validity)")
        need(self.bandwidth_hz > 0, "bandwidth_hz", "must be > 0")
        need(self.shadowing_std_db >= 0, "shadowing_std_db", "must be >= 0")
        for kind in ("macro", "single_patch", "double_patch"):
            hp = getattr(self, f"{kind}_hpbw_deg")
            need(0 < hp < 360, f"{kind}_hpbw_deg", "must be in (0, 360)")
            need(getattr(self, f"{kind}_f2b_db") >= 0, f"{kind}_f2b_db", "must be >= 0")
        need(self.macro_pl_slope_db > 0, "macro_pl_slope_db", "must be > 0")
        need(self.scbs_pl_slope_db > 0, "scbs_pl_slope_db", "must be > 0")
        for key in ("shannon_bw_eff", "shannon_sinr_eff", "shannon_se_cap"):
            need(getattr(self, key) > 0, key, "must be > 0")

    def as_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v)
                for f in fields(self)}

    def fingerprint(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


_HINTS = typing.get_type_hints(ExperimentConfig)
KEYS = tuple(f.name for f in fields(ExperimentConfig))


def _parse_scalar(tp, text: str):
    if tp is int:
        return int(text, 0)
    if tp is float:
        return float(text)
    if tp is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    return text


def parse_value(key: str, text) -> object:
    """Convert a raw string (or JSON value) to the field's declared type."""
    if key not in _HINTS:
        raise ConfigError(key, "unknown configuration key")
    tp = _HINTS[key]
    origin = typing.get_origin(tp)
    try:
        if origin is tuple:
            item = typing.get_args(tp)[0]
            parts = text if isinstance(text, (list, tuple)) else \
                [p.strip() for p in str(text).split(",") if p.strip()]
            return tuple(_parse_scalar(item, str(p)) for p in parts)
        if origin is typing.Union:  # Optional[float]
            if text is None or str(text).strip().lower() in ("", "none", "random"):
                return None
            return _parse_scalar(float, str(text))
        return _parse_scalar(tp, str(text).strip())
    except ValueError as exc:
        raise ConfigError(key, f"bad value {text!r}: {exc}") from None


def read_config_file(path) -> dict[str, object]:
    """Flat ``key = value`` lines (``#`` comments); ``.json`` files hold one object."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config", f"file not found: {p}")
    text = p.read_text()
    if p.suffix == ".json":
        data = json.loads(text) if text.strip() else {}
        if not isinstance(data, dict):
            raise ConfigError("config", "JSON config must be an object")
        return {k: parse_value(k, v) for k, v in data.items()}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = parse_value(key, value)
    return out


def parse_overrides(pairs: Sequence[str]) -> dict[str, object]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(pair, "override must look like key=value")
        key, value = (s.strip() for s in pair.split("=", 1))
        out[key] = parse_value(key, value)
    return out


def env_overrides(environ: Mapping[str, str]) -> dict[str, object]:
    out = {}
    for name, value in sorted(environ.items()):
        if name.startswith(ENV_PREFIX):
            key = name[len(ENV_PREFIX):].lower()
            out[key] = parse_value(key, value)
    return out


def parse_config(path=None, overrides: Sequence[str] = (),
                 environ: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    """Defaults, then the file, then ``MEA_SIM_*`` variables, then ``key=value`` overrides."""
    layered: dict[str, object] = {}
    if path is not None:
        layered.update(read_config_file(path))
    layered.update(env_overrides(os.environ if environ is None else environ))
    layered.update(parse_overrides(overrides))
    return ExperimentConfig(**layered)
