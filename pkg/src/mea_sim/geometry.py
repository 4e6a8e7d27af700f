"""Hexagonal tri-sector layout, random placement and angle helpers.

Coordinates are metres in a flat 2D frame; angles are degrees measured
counter-clockwise from the +x axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidArgument, SamplingFailure

N_RING_SITES = 6
SECTORS_PER_SITE = 3
MIN_SITE_DISTANCE_M = 10.0
SECTOR_TRIES = 10_000


class Point2D(NamedTuple):
    x: float
    y: float

    def distance_to(self, other: Point2D) -> float:
        return math.hypot(other.x - self.x, other.y - self.y)


@dataclass(frozen=True)
class NetworkLayout:
    isd: float
    sites: tuple[Point2D, ...]
    sectors: tuple[tuple[int, float], ...]  # (site_index, boresight_deg)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_sectors(self) -> int:
        return len(self.sectors)

    @property
    def cell_radius(self) -> float:
        """Circumradius of the hexagonal cell around each site."""
        return self.isd / math.sqrt(3.0)


@dataclass(frozen=True)
class Hotspot:
    center: Point2D
    radius: float = 10.0

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidArgument(f"hotspot radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class UePopulation:
    positions: np.ndarray  # (n, 2)
    hotspot_flags: np.ndarray  # (n,) bool

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def n_hotspot(self) -> int:
        return int(np.count_nonzero(self.hotspot_flags))


def build_layout(isd: float = 500.0, sector_offset_deg: float = 30.0) -> NetworkLayout:
    """Centre site at the origin plus one ring of six sites at distance ``isd``."""
    if not isd > 0:
        raise InvalidArgument(f"isd must be positive, got {isd}")
    sites = [Point2D(0.0, 0.0)]
    for k in range(N_RING_SITES):
        a = math.radians(60.0 * k)
        sites.append(Point2D(isd * math.cos(a), isd * math.sin(a)))
    sectors = tuple(
        (s, (sector_offset_deg + 120.0 * j) % 360.0)
        for s in range(len(sites))
        for j in range(SECTORS_PER_SITE)
    )
    return NetworkLayout(isd=float(isd), sites=tuple(sites), sectors=sectors)


def bearing_deg(frm: Point2D, to: Point2D) -> float:
    dx, dy = to[0] - frm[0], to[1] - frm[1]
    if dx == 0 and dy == 0:
        raise InvalidArgument("bearing between coincident points is undefined")
    b = math.degrees(math.atan2(dy, dx)) % 360.0
    return 0.0 if b == 360.0 else b  # tiny negative angles round up to 360


def angular_distance_deg(a, b):
    """Smallest absolute circular difference between two angles, in [0, 180].

    Works elementwise on numpy arrays as well as on scalars.
    """
    d = np.abs(np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), 360.0))
    d = np.minimum(d, 360.0 - d)
    return float(d) if d.ndim == 0 else d


def in_hex_cell(layout: NetworkLayout, site: int, xy: np.ndarray) -> np.ndarray:
    """Membership of points (n, 2) in the hexagonal cell of ``site``."""
    rel = np.atleast_2d(xy) - np.asarray(layout.sites[site])
    apothem = layout.isd / 2.0
    inside = np.ones(len(rel), dtype=bool)
    for k in range(6):
        a = math.radians(60.0 * k)
        inside &= rel[:, 0] * math.cos(a) + rel[:, 1] * math.sin(a) <= apothem + 1e-9
    return inside


def in_sector(layout: NetworkLayout, sector: int, xy: np.ndarray,
              min_distance: float = MIN_SITE_DISTANCE_M) -> np.ndarray:
    """Wedge, hex-cell and minimum-distance membership for points (n, 2)."""
    site, boresight = layout.sectors[sector]
    rel = np.atleast_2d(xy) - np.asarray(layout.sites[site])
    dist = np.hypot(rel[:, 0], rel[:, 1])
    bearing = np.degrees(np.arctan2(rel[:, 1], rel[:, 0]))
    wedge = angular_distance_deg(bearing, boresight) <= 60.0
    return wedge & (dist >= min_distance) & in_hex_cell(layout, site, rel + layout.sites[site])


def _check_sector(layout: NetworkLayout, sector: int) -> None:
    if not 0 <= sector < layout.n_sectors:
        raise InvalidArgument(f"sector index {sector} out of range 0..{layout.n_sectors - 1}")


def sample_points_in_sector(layout: NetworkLayout, sector: int, rng: np.random.Generator,
                            n: int, min_distance: float = MIN_SITE_DISTANCE_M) -> np.ndarray:
    """Uniform points over one sector by rejection from the cell's bounding disk."""
    _check_sector(layout, sector)
    site = np.asarray(layout.sites[layout.sectors[sector][0]])
    radius = layout.cell_radius
    out = np.empty((n, 2))
    filled = 0
    budget = SECTOR_TRIES * max(n, 1)
    tries = 0
    while filled < n:
        if tries >= budget:
            raise SamplingFailure(f"no point found in sector {sector} after {tries} tries")
        batch = max(16, 4 * (n - filled))
        tries += batch
        r = radius * np.sqrt(rng.random(batch))
        th = 2.0 * np.pi * rng.random(batch)
        pts = site + np.column_stack((r * np.cos(th), r * np.sin(th)))
        ok = pts[in_sector(layout, sector, pts, min_distance)]
        take = min(len(ok), n - filled)
        out[filled:filled + take] = ok[:take]
        filled += take
    return out


def sample_points_in_cell(layout: NetworkLayout, site: int, rng: np.random.Generator,
                          n: int, min_distance: float = MIN_SITE_DISTANCE_M) -> np.ndarray:
    """Uniform points over the whole hexagonal cell of ``site``."""
    centre = np.asarray(layout.sites[site])
    out = np.empty((0, 2))
    tries = 0
    while len(out) < n:
        if tries >= SECTOR_TRIES * max(n, 1):
            raise SamplingFailure(f"no point found in cell {site} after {tries} tries")
        batch = 2 * (n - len(out)) + 8
        tries += batch
        r = layout.cell_radius * np.sqrt(rng.random(batch))
        th = 2.0 * np.pi * rng.random(batch)
        pts = centre + np.column_stack((r * np.cos(th), r * np.sin(th)))
        keep = in_hex_cell(layout, site, pts) & (np.hypot(*(pts - centre).T) >= min_distance)
        out = np.vstack((out, pts[keep]))[:n]
    return out


def sample_point_in_sector(layout: NetworkLayout, sector: int, rng: np.random.Generator) -> Point2D:
    x, y = sample_points_in_sector(layout, sector, rng, 1)[0]
    return Point2D(float(x), float(y))


def sample_points_in_disk(center: Point2D, radius: float, rng: np.random.Generator,
                          n: int) -> np.ndarray:
    if not radius > 0:
        raise InvalidArgument(f"disk radius must be positive, got {radius}")
    r = radius * np.sqrt(rng.random(n))
    th = 2.0 * np.pi * rng.random(n)
    return np.column_stack((center[0] + r * np.cos(th), center[1] + r * np.sin(th)))


def sample_point_in_disk(center: Point2D, radius: float, rng: np.random.Generator) -> Point2D:
    x, y = sample_points_in_disk(center, radius, rng, 1)[0]
    return Point2D(float(x), float(y))


def _far_from(xy: np.ndarray, anchors: np.ndarray, min_distance: float) -> np.ndarray:
    d = np.hypot(xy[:, None, 0] - anchors[None, :, 0], xy[:, None, 1] - anchors[None, :, 1])
    return np.all(d >= min_distance, axis=1)


def drop_ues(layout: NetworkLayout, sector: int, hotspot: Hotspot, rng: np.random.Generator,
             n_ues: int = 30, hotspot_fraction: float = 1.0 / 3.0, region: str = "sector",
             keep_out: tuple[Point2D, ...] = (), min_distance: float = MIN_SITE_DISTANCE_M,
             max_tries: int = SECTOR_TRIES) -> UePopulation:
    """Drop ``n_ues`` users: a fraction inside the hotspot disk, the rest spread out.

    ``region`` is ``"sector"`` (the selected sector) or ``"site"`` (all three
    sectors of the selected sector's site). No user lands closer than
    ``min_distance`` to any macro site or to a ``keep_out`` point (the SCBS).
    """
    if region not in ("sector", "site"):
        raise InvalidArgument(f"unknown UE region {region!r}")
    n_hot = int(round(n_ues * hotspot_fraction))
    anchors = np.asarray(list(layout.sites) + list(keep_out), dtype=float)

    hot = np.empty((0, 2))
    tries = 0
    while len(hot) < n_hot:
        if tries >= max_tries * max(n_hot, 1):
            raise SamplingFailure("hotspot disk has no room for users outside the keep-out zones")
        batch = 4 * (n_hot - len(hot)) + 8
        tries += batch
        pts = sample_points_in_disk(hotspot.center, hotspot.radius, rng, batch)
        hot = np.vstack((hot, pts[_far_from(pts, anchors, min_distance)]))[:n_hot]

    n_rand = n_ues - n_hot
    site = layout.sectors[sector][0]
    rand = np.empty((0, 2))
    tries = 0
    while len(rand) < n_rand:
        if tries >= max_tries * max(n_rand, 1):
            raise SamplingFailure("could not place background users")
        batch = 2 * (n_rand - len(rand)) + 8
        tries += batch
        if region == "sector":
            pts = sample_points_in_sector(layout, sector, rng, batch, min_distance)
        else:
            pts = sample_points_in_cell(layout, site, rng, batch, min_distance)
        rand = np.vstack((rand, pts[_far_from(pts, anchors, min_distance)]))[:n_rand]

    positions = np.vstack((rand, hot))
    flags = np.zeros(n_ues, dtype=bool)
    flags[n_rand:] = True
    return UePopulation(positions=positions, hotspot_flags=flags)


def rotate_about(xy, pivot: Point2D, deg: float) -> np.ndarray:
    """Rotate points counter-clockwise by ``deg`` about ``pivot``."""
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    # exact quarter turns keep rotation-invariance checks free of rounding
    if deg % 90 == 0:
        c, s = round(c), round(s)
    rel = np.atleast_2d(np.asarray(xy, dtype=float)) - np.asarray(pivot)
    return np.column_stack((c * rel[:, 0] - s * rel[:, 1], s * rel[:, 0] + c * rel[:, 1])) + np.asarray(pivot)
