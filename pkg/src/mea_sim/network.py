"""Received power, association, SINR and rates for one macro + SCBS snapshot."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgument
from .geometry import (
    Hotspot,
    NetworkLayout,
    Point2D,
    UePopulation,
    angular_distance_deg,
    bearing_deg,
    drop_ues,
    rotate_about,
)
from .propagation import (
    MACRO_UMA,
    SMALLCELL_OUTDOOR,
    AntennaPattern,
    PathlossModel,
    dbm_to_mw,
    macro_sector,
    omni,
    pathloss_db,
    pattern_gain_db,
    rx_power_dbm,
)


@dataclass(frozen=True)
class Transmitter:
    id: int
    position: Point2D
    tx_power_dbm: float
    pattern: AntennaPattern
    pathloss_model: PathlossModel
    is_scbs: bool = False


@dataclass(frozen=True)
class ShannonParams:
    bw_eff: float = 0.56
    sinr_eff: float = 2.0
    se_cap_bps_per_hz: float = 4.4

    def __post_init__(self):
        for name in ("bw_eff", "sinr_eff", "se_cap_bps_per_hz"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive")


@dataclass(frozen=True)
class RxPowerMap:
    dbm: np.ndarray  # (n_ues, n_transmitters)
    tx_ids: tuple[int, ...]
    scbs_mask: np.ndarray  # (n_transmitters,) bool

    def column(self, tx_id: int) -> int:
        try:
            return self.tx_ids.index(tx_id)
        except ValueError:
            raise InvalidArgument(f"transmitter {tx_id} not in map") from None


@dataclass(frozen=True)
class UeMetrics:
    server_id: int
    sinr_db: float
    rate_bps: float


def macro_transmitters(layout: NetworkLayout, tx_power_dbm: float = 46.0,
                       pattern: AntennaPattern | None = None,
                       model: PathlossModel = MACRO_UMA) -> tuple[Transmitter, ...]:
    pattern = pattern or macro_sector()
    return tuple(
        Transmitter(i, layout.sites[site], tx_power_dbm, pattern.pointed(boresight), model)
        for i, (site, boresight) in enumerate(layout.sectors)
    )


def rx_matrix(xy: np.ndarray, transmitters: Sequence[Transmitter]) -> np.ndarray:
    """Received power matrix (n_points, n_transmitters), vectorised over both axes."""
    pos = np.array([t.position for t in transmitters], dtype=float)
    dx = xy[:, None, 0] - pos[None, :, 0]
    dy = xy[:, None, 1] - pos[None, :, 1]
    dist = np.hypot(dx, dy)
    az = np.degrees(np.arctan2(dy, dx))
    pl = np.empty_like(dist)
    pats = [t.pattern for t in transmitters]
    peak = np.array([p.peak_gain_dbi for p in pats])
    directional = np.array([p.is_directional for p in pats])
    hpbw = np.array([p.hpbw_deg if p.is_directional else 1.0 for p in pats])
    floor = np.array([p.front_to_back_db if p.is_directional else 0.0 for p in pats])
    off = angular_distance_deg(az, np.array([p.boresight_deg for p in pats])[None, :])
    gain = peak[None, :] - np.where(directional, np.minimum(12.0 * (off / hpbw) ** 2, floor), 0.0)
    # pathloss per model group keeps the validity check in one place
    models = [t.pathloss_model for t in transmitters]
    for m in set(models):
        cols = [j for j, mj in enumerate(models) if mj == m]
        pl[:, cols] = pathloss_db(m, dist[:, cols])
    power = np.array([t.tx_power_dbm for t in transmitters], dtype=float)
    return rx_power_dbm(power[None, :], gain, pl)


def rx_power_map(ues: UePopulation | np.ndarray, transmitters: Sequence[Transmitter],
                 shadowing_db: Optional[np.ndarray] = None) -> RxPowerMap:
    """Received power (dBm) at every UE from every transmitter.

    ``shadowing_db``, when given, is an (n_ues, n_transmitters) additive term.
    """
    xy = ues.positions if isinstance(ues, UePopulation) else np.atleast_2d(ues)
    if len(xy) == 0 or len(transmitters) == 0:
        raise InvalidArgument("rx_power_map needs at least one UE and one transmitter")
    dbm = rx_matrix(xy, transmitters)
    if shadowing_db is not None:
        dbm = dbm + shadowing_db
    return RxPowerMap(dbm, tuple(t.id for t in transmitters),
                      np.array([t.is_scbs for t in transmitters]))


def associate(rx_map: RxPowerMap, scbs_id: Optional[int] = None) -> np.ndarray:
    """Server id per UE.

    A UE goes to the SCBS only when the SCBS is strictly stronger than the best
    macro sector; otherwise it takes the strongest macro (lowest id on ties).
    """
    macro_cols = np.flatnonzero(~rx_map.scbs_mask)
    order = macro_cols[np.argsort([rx_map.tx_ids[c] for c in macro_cols], kind="stable")]
    macro_rx = rx_map.dbm[:, order]
    best = np.argmax(macro_rx, axis=1)
    ids = np.asarray(rx_map.tx_ids)
    servers = ids[order[best]]
    if scbs_id is not None:
        col = rx_map.column(scbs_id)
        to_scbs = rx_map.dbm[:, col] > macro_rx[np.arange(len(best)), best]
        servers = np.where(to_scbs, scbs_id, servers)
    return servers


def served_count(rx_map: RxPowerMap, scbs_id: int) -> int:
    return int(np.count_nonzero(associate(rx_map, scbs_id) == scbs_id))


def ue_sinr_db(rx_map: RxPowerMap, servers: np.ndarray, noise_dbm: float,
               ue: Optional[int] = None):
    """Full-buffer SINR; every transmitter in the map interferes."""
    p = dbm_to_mw(rx_map.dbm)
    col_of = {tid: j for j, tid in enumerate(rx_map.tx_ids)}
    cols = np.array([col_of[int(s)] for s in servers], dtype=int)
    sig = p[np.arange(len(p)), cols]
    interference = p.sum(axis=1) - sig
    sinr = 10.0 * np.log10(sig / (interference + dbm_to_mw(noise_dbm)))
    return float(sinr[ue]) if ue is not None else sinr


def capacity_bps(sinr_db, bandwidth_hz: float, p: ShannonParams = ShannonParams()):
    """Modified Shannon rate: efficiency-scaled log2 capped at a peak spectral efficiency."""
    if not bandwidth_hz > 0:
        raise InvalidArgument(f"bandwidth must be positive, got {bandwidth_hz}")
    sinr_lin = dbm_to_mw(sinr_db)
    rate = np.minimum(p.bw_eff * bandwidth_hz * np.log2(1.0 + sinr_lin / p.sinr_eff),
                      bandwidth_hz * p.se_cap_bps_per_hz)
    return float(rate) if np.ndim(rate) == 0 else rate


def ue_rates(servers, sinrs_db, bandwidth_hz: float, params: ShannonParams = ShannonParams()) -> np.ndarray:
    """Equal time share: each UE gets its full-band rate divided by its cell's load."""
    servers = np.asarray(servers)
    if len(servers) != len(np.atleast_1d(sinrs_db)):
        raise InvalidArgument("servers and SINRs differ in length")
    if len(servers) == 0:
        return np.zeros(0)
    _, inverse, counts = np.unique(servers, return_inverse=True, return_counts=True)
    return np.atleast_1d(capacity_bps(sinrs_db, bandwidth_hz, params)) / counts[inverse]


def total_throughput(rates) -> float:
    return float(np.sum(rates)) if len(rates) else 0.0


@dataclass(frozen=True)
class LinkResult:
    """Per-UE outcome of one antenna choice on one UE population."""

    servers: np.ndarray
    sinr_db: np.ndarray
    rates_bps: np.ndarray
    served: int
    total_bps: float

    def metrics(self) -> list[UeMetrics]:
        return [UeMetrics(int(s), float(g), float(r))
                for s, g, r in zip(self.servers, self.sinr_db, self.rates_bps)]


@dataclass(frozen=True)
class Scene:
    """Macro layout, one SCBS site, one hotspot and the UEs of a drop.

    The SCBS antenna is not part of the scene; callers pass the pattern to
    evaluate, so the same snapshot can be scored for every antenna option.
    """

    layout: NetworkLayout
    sector: int
    macros: tuple[Transmitter, ...]
    scbs_position: Point2D
    hotspot: Hotspot
    ues: UePopulation
    scbs_tx_power_dbm: float = 20.0
    scbs_pathloss: PathlossModel = SMALLCELL_OUTDOOR
    oda: AntennaPattern = field(default_factory=omni)
    noise_dbm: float = -95.0
    bandwidth_hz: float = 10e6
    shannon: ShannonParams = ShannonParams()
    n_ues: int = 30
    hotspot_fraction: float = 1.0 / 3.0
    ue_region: str = "sector"
    min_distance_m: float = 10.0
    shadowing_std_db: float = 0.0
    shadowing_db: Optional[np.ndarray] = None  # (n_ues, n_macros + 1)

    @property
    def scbs_id(self) -> int:
        return len(self.macros)

    @property
    def hotspot_bearing_deg(self) -> float:
        return bearing_deg(self.scbs_position, self.hotspot.center)

    def scbs(self, pattern: AntennaPattern) -> Transmitter:
        return Transmitter(self.scbs_id, self.scbs_position, self.scbs_tx_power_dbm,
                           pattern, self.scbs_pathloss, is_scbs=True)

    def transmitters(self, pattern: Optional[AntennaPattern]) -> list[Transmitter]:
        txs = list(self.macros)
        if pattern is not None:
            txs.append(self.scbs(pattern))
        return txs

    @cached_property
    def _macro_rx(self) -> np.ndarray:
        rx = rx_matrix(self.ues.positions, self.macros)
        if self.shadowing_db is not None:
            rx = rx + self.shadowing_db[:, :len(self.macros)]
        return rx

    def rx_map(self, pattern: Optional[AntennaPattern]) -> RxPowerMap:
        macro = self._macro_rx
        if pattern is None:
            cols = macro
        else:
            scbs = rx_matrix(self.ues.positions, [self.scbs(pattern)])
            if self.shadowing_db is not None:
                scbs = scbs + self.shadowing_db[:, -1:]
            cols = np.hstack((macro, scbs))
        txs = self.transmitters(pattern)
        return RxPowerMap(cols, tuple(t.id for t in txs), np.array([t.is_scbs for t in txs]))

    def served(self, pattern: AntennaPattern) -> int:
        """Served-UE count only; skips the SINR and rate work."""
        macro_best = self._macro_rx.max(axis=1)
        scbs = rx_matrix(self.ues.positions, [self.scbs(pattern)])[:, 0]
        if self.shadowing_db is not None:
            scbs = scbs + self.shadowing_db[:, -1]
        return int(np.count_nonzero(scbs > macro_best))

    def evaluate(self, pattern: Optional[AntennaPattern]) -> LinkResult:
        """Association, SINR and rates with ``pattern`` on the SCBS (``None``: no SCBS)."""
        m = self.rx_map(pattern)
        scbs_id = self.scbs_id if pattern is not None else None
        servers = associate(m, scbs_id)
        sinr = ue_sinr_db(m, servers, self.noise_dbm)
        rates = ue_rates(servers, sinr, self.bandwidth_hz, self.shannon)
        served = int(np.count_nonzero(servers == scbs_id)) if scbs_id is not None else 0
        return LinkResult(servers, sinr, rates, served, total_throughput(rates))

    def resample_ues(self, rng: np.random.Generator) -> Scene:
        """Same placement, fresh UE distribution (and fresh shadowing, if enabled)."""
        ues = drop_ues(self.layout, self.sector, self.hotspot, rng, n_ues=self.n_ues,
                       hotspot_fraction=self.hotspot_fraction, region=self.ue_region,
                       keep_out=(self.scbs_position,), min_distance=self.min_distance_m)
        shadow = None
        if self.shadowing_std_db > 0:
            shadow = rng.normal(0.0, self.shadowing_std_db, size=(len(ues), len(self.macros) + 1))
        return replace(self, ues=ues, shadowing_db=shadow)


def gamma_hs_batch(macros: Sequence[Transmitter], scbs_xy: np.ndarray, centers: np.ndarray,
                   scbs_tx_power_dbm: float, scbs_pathloss: PathlossModel, oda: AntennaPattern,
                   noise_dbm: float) -> np.ndarray:
    """Omni-SCBS SINR at each hotspot centre against all macro sectors.

    Rows whose SCBS-to-centre distance is below the pathloss validity limit
    come back as NaN.
    """
    dist = np.hypot(*(centers - scbs_xy).T)
    ok = dist >= 10.0
    gamma = np.full(len(centers), np.nan)
    if not ok.any():
        return gamma
    sig = rx_power_dbm(scbs_tx_power_dbm, pattern_gain_db(oda, 0.0), pathloss_db(scbs_pathloss, dist[ok]))
    interference = dbm_to_mw(rx_matrix(centers[ok], macros)).sum(axis=1) if len(macros) else 0.0
    gamma[ok] = 10.0 * np.log10(dbm_to_mw(sig) / (interference + dbm_to_mw(noise_dbm)))
    return gamma


def gamma_hs(scene: Scene) -> float:
    """SINR at the hotspot centre with an omni SCBS, macro sectors interfering."""
    g = gamma_hs_batch(scene.macros, np.atleast_2d(scene.scbs_position),
                       np.atleast_2d(scene.hotspot.center), scene.scbs_tx_power_dbm,
                       scene.scbs_pathloss, scene.oda, scene.noise_dbm)[0]
    if np.isnan(g):
        raise InvalidArgument("hotspot centre closer to the SCBS than the pathloss validity limit")
    return float(g)


def rotate_scene(scene: Scene, deg: float) -> Scene:
    """Rotate macros, hotspot and UEs counter-clockwise about the SCBS.

    The layout used for resampling is left as is, so only evaluate the result.
    """
    pivot = scene.scbs_position
    macros = tuple(
        replace(t, position=Point2D(*rotate_about(t.position, pivot, deg)[0]),
                pattern=t.pattern.pointed(t.pattern.boresight_deg + deg))
        for t in scene.macros
    )
    centre = Point2D(*rotate_about(scene.hotspot.center, pivot, deg)[0])
    ues = UePopulation(rotate_about(scene.ues.positions, pivot, deg), scene.ues.hotspot_flags.copy())
    return replace(scene, macros=macros, hotspot=replace(scene.hotspot, center=centre), ues=ues)
