"""Azimuth antenna patterns, distance pathloss and link-budget arithmetic."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgument
from .geometry import angular_distance_deg

MIN_PATHLOSS_DISTANCE_M = 10.0
N_MEA_ELEMENTS = 4

OMNI = "omni"
PATCH = "patch"
MACRO_SECTOR = "macro_sector"


@dataclass(frozen=True)
class AntennaPattern:
    """Parabolic (in dB) azimuth pattern clipped at a front-to-back floor.

    ``hpbw_deg`` is the full -3 dB beamwidth; it is ignored for omni patterns.
    """

    kind: str
    peak_gain_dbi: float
    hpbw_deg: float = 360.0
    front_to_back_db: float = 0.0
    boresight_deg: float = 0.0

    def __post_init__(self):
        if self.kind not in (OMNI, PATCH, MACRO_SECTOR):
            raise InvalidArgument(f"unknown antenna kind {self.kind!r}")
        if self.kind != OMNI and not 0 < self.hpbw_deg < 360:
            raise InvalidArgument(f"hpbw_deg must be in (0, 360), got {self.hpbw_deg}")
        if self.front_to_back_db < 0:
            raise InvalidArgument(f"front_to_back_db must be >= 0, got {self.front_to_back_db}")

    def pointed(self, boresight_deg: float) -> AntennaPattern:
        return replace(self, boresight_deg=boresight_deg % 360.0)

    @property
    def is_directional(self) -> bool:
        return self.kind != OMNI


def omni(gain_dbi: float = 0.0) -> AntennaPattern:
    return AntennaPattern(OMNI, gain_dbi)


def single_patch(gain_dbi: float = 7.0, hpbw_deg: float = 90.0, f2b_db: float = 15.0) -> AntennaPattern:
    return AntennaPattern(PATCH, gain_dbi, hpbw_deg, f2b_db)


def double_patch(gain_dbi: float = 10.0, hpbw_deg: float = 60.0, f2b_db: float = 20.0) -> AntennaPattern:
    return AntennaPattern(PATCH, gain_dbi, hpbw_deg, f2b_db)


def macro_sector(gain_dbi: float = 14.0, hpbw_deg: float = 70.0, f2b_db: float = 25.0) -> AntennaPattern:
    return AntennaPattern(MACRO_SECTOR, gain_dbi, hpbw_deg, f2b_db)


def pattern_gain_db(p: AntennaPattern, azimuth_deg):
    """Gain towards ``azimuth_deg`` (scalar or array)."""
    if not p.is_directional:
        if np.ndim(azimuth_deg) == 0:
            return float(p.peak_gain_dbi)
        return np.full(np.shape(azimuth_deg), float(p.peak_gain_dbi))
    off = angular_distance_deg(azimuth_deg, p.boresight_deg)
    return p.peak_gain_dbi - np.minimum(12.0 * (off / p.hpbw_deg) ** 2, p.front_to_back_db)


@dataclass(frozen=True)
class MeaConfig:
    """Four identical elements at ``install_offset_deg`` + 0/90/180/270 degrees."""

    element: AntennaPattern
    install_offset_deg: float = 0.0
    active_element: int = 0

    def __post_init__(self):
        if not self.element.is_directional:
            raise InvalidArgument("MEA elements must be directional")
        if not 0 <= self.active_element < N_MEA_ELEMENTS:
            raise InvalidArgument(f"active_element must be in 0..3, got {self.active_element}")

    @property
    def boresights(self) -> tuple[float, ...]:
        return tuple((self.install_offset_deg + 90.0 * i) % 360.0 for i in range(N_MEA_ELEMENTS))

    @property
    def elements(self) -> tuple[AntennaPattern, ...]:
        return tuple(self.element.pointed(b) for b in self.boresights)

    @property
    def active_pattern(self) -> AntennaPattern:
        return self.elements[self.active_element]

    def activate(self, i: int) -> MeaConfig:
        return replace(self, active_element=i)


@dataclass(frozen=True)
class PathlossModel:
    """``intercept_db + slope_db * log10(d / 1 km)``."""

    kind: str
    intercept_db: float
    slope_db: float

    def __post_init__(self):
        if not self.slope_db > 0:
            raise InvalidArgument(f"pathloss slope must be positive, got {self.slope_db}")


MACRO_UMA = PathlossModel("macro_uma", 128.1, 37.6)
SMALLCELL_OUTDOOR = PathlossModel("smallcell_outdoor", 140.7, 36.7)


def pathloss_db(m: PathlossModel, distance_m):
    d = np.asarray(distance_m, dtype=float)
    if np.any(d < MIN_PATHLOSS_DISTANCE_M) or np.any(np.isnan(d)):
        raise InvalidArgument(
            f"pathloss distance below {MIN_PATHLOSS_DISTANCE_M:g} m: {float(np.min(d)):.3f} m")
    pl = m.intercept_db + m.slope_db * np.log10(d / 1000.0)
    return float(pl) if pl.ndim == 0 else pl


def rx_power_dbm(tx_power_dbm, tx_gain_db, pl_db):
    """Received power with a 0 dBi UE antenna."""
    return tx_power_dbm + tx_gain_db - pl_db


def thermal_noise_dbm(bandwidth_hz: float, noise_figure_db: float = 9.0) -> float:
    if not bandwidth_hz > 0:
        raise InvalidArgument(f"bandwidth must be positive, got {bandwidth_hz}")
    return -174.0 + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


def dbm_to_mw(dbm):
    return np.power(10.0, np.asarray(dbm, dtype=float) / 10.0)


def mw_to_dbm(mw):
    return 10.0 * np.log10(mw)
