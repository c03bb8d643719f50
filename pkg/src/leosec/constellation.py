"""Walker Delta kinematics, slot grid and per-slot link scenes."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .frames import (
    SIDEREAL_DAY,
    DegenerateGeometryError,
    GeoPosition,
    gs_frame,
    gs_position,
    spherical_to_cartesian,
)

log = logging.getLogger(__name__)

EARTH_RADIUS = 6371e3  # m
EARTH_GM = 3.986004418e14  # m^3/s^2


class NoVisibleSatelliteError(RuntimeError):
    """No satellite clears the elevation mask in a slot."""


@dataclass(frozen=True)
class ConstellationSpec:
    num_planes: int = 6
    sats_per_plane: int = 8
    altitude: float = 550e3
    inclination: float = math.radians(50.0)
    earth_radius: float = EARTH_RADIUS
    gravitational_parameter: float = EARTH_GM
    earth_rotation_period: float = SIDEREAL_DAY

    def __post_init__(self):
        if self.num_planes < 1:
            raise ValueError("num_planes must be >= 1")
        if self.sats_per_plane < 2:
            raise ValueError("sats_per_plane must be >= 2")
        if not self.altitude > 0:
            raise ValueError("altitude must be positive")
        if not 0 < self.inclination < math.pi:
            raise ValueError("inclination must lie in (0, pi)")
        if not self.gravitational_parameter > 0:
            raise ValueError("gravitational_parameter must be positive")
        if not self.earth_rotation_period > 0:
            raise ValueError("earth_rotation_period must be positive")

    @property
    def orbit_radius(self) -> float:
        return self.earth_radius + self.altitude

    @property
    def num_satellites(self) -> int:
        return self.num_planes * self.sats_per_plane


@dataclass(frozen=True, order=True)
class SatelliteId:
    """1-based (plane, index) pair; ordering is lexicographic."""

    plane: int
    index: int

    def __str__(self) -> str:
        return f"S{self.plane}_{self.index}"


@dataclass(frozen=True)
class TimeGrid:
    observation_interval: float
    num_slots: int
    slot_midpoints: np.ndarray
    raw_interval: float = 0.0

    @property
    def slot_duration(self) -> float:
        return self.observation_interval / self.num_slots


def orbital_period(spec: ConstellationSpec) -> float:
    return 2.0 * math.pi * math.sqrt(spec.orbit_radius**3 / spec.gravitational_parameter)


def _check_id(spec: ConstellationSpec, sat: SatelliteId) -> None:
    if not (1 <= sat.plane <= spec.num_planes and 1 <= sat.index <= spec.sats_per_plane):
        raise ValueError(f"{sat} outside constellation {spec.num_planes}x{spec.sats_per_plane}")


def orbit_angle(spec: ConstellationSpec, k, t):
    """Angle from the ascending node; satellites start spread over [-pi/2, pi/2]."""
    alpha0 = -math.pi / 2 + math.pi * (np.asarray(k) - 1) / (spec.sats_per_plane - 1)
    return 2.0 * math.pi * t / orbital_period(spec) + alpha0


def _geodetic_angles(spec: ConstellationSpec, j, alpha):
    beta = spec.inclination
    lat = np.arcsin(np.sin(beta) * np.sin(alpha))
    # two-argument form keeps the longitude continuous past alpha = pi/2
    lon = np.arctan2(math.cos(beta) * np.sin(alpha), np.cos(alpha)) + 2.0 * math.pi * np.asarray(j) / spec.num_planes
    return lat, lon


def satellite_geodetic(spec: ConstellationSpec, sat: SatelliteId, t: float) -> GeoPosition:
    _check_id(spec, sat)
    alpha = orbit_angle(spec, sat.index, t)
    lat, lon = _geodetic_angles(spec, sat.plane, alpha)
    return GeoPosition(float(lat), float(lon), spec.orbit_radius)


def satellite_position(spec: ConstellationSpec, sat: SatelliteId, t: float) -> np.ndarray:
    g = satellite_geodetic(spec, sat, t)
    return spherical_to_cartesian(g.latitude, g.longitude, g.radius)


def satellite_ids(spec: ConstellationSpec) -> list[SatelliteId]:
    return [SatelliteId(j, k) for j in range(1, spec.num_planes + 1) for k in range(1, spec.sats_per_plane + 1)]


def all_satellite_positions(spec: ConstellationSpec, t: float, ascending_only: bool = False):
    """Positions of every satellite at ``t`` in ``satellite_ids`` order.

    Returns ``(positions, mask)``; ``mask`` is all-True unless
    ``ascending_only`` restricts to satellites between the south and north
    pole on their pass.
    """
    j, k = np.meshgrid(
        np.arange(1, spec.num_planes + 1), np.arange(1, spec.sats_per_plane + 1), indexing="ij"
    )
    j, k = j.ravel(), k.ravel()
    alpha = orbit_angle(spec, k, t)
    lat, lon = _geodetic_angles(spec, j, alpha)
    pos = spherical_to_cartesian(lat, lon, spec.orbit_radius)
    if ascending_only:
        a = np.remainder(alpha + math.pi, 2.0 * math.pi) - math.pi
        mask = np.abs(a) <= math.pi / 2 + 1e-12
    else:
        mask = np.ones(j.size, dtype=bool)
    return pos, mask


def build_time_grid(spec: ConstellationSpec, num_slots: int) -> TimeGrid:
    """Observation window of one inter-plane rotation, snapped to a multiple of T/K."""
    if num_slots < 1:
        raise ValueError("num_slots must be >= 1")
    raw = spec.earth_rotation_period / spec.num_planes
    unit = orbital_period(spec) / spec.sats_per_plane
    n = max(1, round(raw / unit))
    interval = n * unit
    if interval != raw:
        log.debug("observation interval snapped %.3f s -> %.3f s (%d x T/K)", raw, interval, n)
    p = np.arange(1, num_slots + 1)
    mids = (p - 0.5) * interval / num_slots
    return TimeGrid(observation_interval=interval, num_slots=num_slots, slot_midpoints=mids, raw_interval=raw)


def elevation_angle(sat_pos: np.ndarray, gs_pos: np.ndarray) -> float:
    d = np.asarray(sat_pos, dtype=float) - np.asarray(gs_pos, dtype=float)
    dist = np.linalg.norm(d)
    if not dist > 0:
        raise DegenerateGeometryError("satellite and ground station coincide")
    up = np.asarray(gs_pos, dtype=float) / np.linalg.norm(gs_pos)
    return float(np.arcsin(np.clip(d @ up / dist, -1.0, 1.0)))


def _elevations(sat_pos: np.ndarray, gs_pos: np.ndarray) -> np.ndarray:
    d = sat_pos - gs_pos
    up = gs_pos / np.linalg.norm(gs_pos)
    return np.arcsin(np.clip(d @ up / np.linalg.norm(d, axis=-1), -1.0, 1.0))


@dataclass(frozen=True)
class SlotScene:
    """Snapshot of one slot.  Link arrays put the serving satellite in row 0."""

    slot_index: int
    time: float
    serving: SatelliteId
    eavesdroppers: tuple[SatelliteId, ...]
    wave_vectors: np.ndarray  # (1 + M, 3) rad/m, station frame
    distances: np.ndarray  # (1 + M,) m
    path_gains: np.ndarray  # (1 + M,)
    noise_powers: np.ndarray  # (1 + M,) W
    elevations: np.ndarray = field(default=None)  # (1 + M,) rad
    wavelength: float = 0.0

    def __post_init__(self):
        n = 1 + len(self.eavesdroppers)
        for name in ("wave_vectors", "distances", "path_gains", "noise_powers"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            if arr.shape[0] != n:
                raise ValueError(f"{name} has {arr.shape[0]} rows, expected {n}")
        if self.serving in self.eavesdroppers:
            raise ValueError("serving satellite listed as eavesdropper")
        if np.any(self.path_gains <= 0) or np.any(self.noise_powers <= 0):
            raise ValueError("path gains and noise powers must be positive")

    @property
    def num_eavesdroppers(self) -> int:
        return len(self.eavesdroppers)

    @property
    def gain_to_noise(self) -> np.ndarray:
        """Per-link rho / sigma^2."""
        return self.path_gains / self.noise_powers

    @property
    def horizontal_waves(self) -> np.ndarray:
        return self.wave_vectors[:, :2]


def free_space_reference_gain(wavelength: float) -> float:
    """Path gain at 1 m under free-space propagation."""
    return (wavelength / (4.0 * math.pi)) ** 2


def path_gain(distance, reference_gain: float, exponent: float):
    return reference_gain * np.asarray(distance, dtype=float) ** (-exponent)


def build_slot_scene(
    spec: ConstellationSpec,
    grid: TimeGrid,
    p: int,
    *,
    gs_latitude: float,
    wavelength: float,
    path_loss_exponent: float = 2.0,
    reference_gain: float | None = None,
    noise_power: float = 10 ** ((-148 - 30) / 10),
    eaves_noise_power: float | None = None,
    min_elevation: float = math.radians(10.0),
    gs_longitude0: float = 0.0,
    ascending_only: bool = False,
) -> SlotScene:
    """Scene for slot ``p`` (1-based): max-elevation serving satellite, the rest eavesdrop."""
    if not 1 <= p <= grid.num_slots:
        raise ValueError(f"slot {p} outside 1..{grid.num_slots}")
    if reference_gain is None:
        reference_gain = free_space_reference_gain(wavelength)
    if eaves_noise_power is None:
        eaves_noise_power = noise_power
    t = float(grid.slot_midpoints[p - 1])
    gpos = gs_position(gs_latitude, t, spec.earth_radius, spec.earth_rotation_period, gs_longitude0)
    frame = gs_frame(gs_latitude, t, spec.earth_rotation_period, gs_longitude0)
    pos, mask = all_satellite_positions(spec, t, ascending_only)
    elev = _elevations(pos, gpos)
    visible = np.flatnonzero(mask & (elev >= min_elevation))
    if visible.size == 0:
        raise NoVisibleSatelliteError(f"no satellite above {math.degrees(min_elevation):.1f} deg in slot {p}")
    ids = satellite_ids(spec)
    # stable sort on -elevation keeps ties in (plane, index) order
    order = visible[np.argsort(-elev[visible], kind="stable")]
    d = pos[order] - gpos
    dist = np.linalg.norm(d, axis=1)
    b = (2.0 * math.pi / wavelength) * d / dist[:, None]
    b_local = b @ frame.matrix
    noise = np.full(order.size, eaves_noise_power, dtype=float)
    noise[0] = noise_power
    return SlotScene(
        slot_index=p,
        time=t,
        serving=ids[order[0]],
        eavesdroppers=tuple(ids[i] for i in order[1:]),
        wave_vectors=b_local,
        distances=dist,
        path_gains=path_gain(dist, reference_gain, path_loss_exponent),
        noise_powers=noise,
        elevations=elev[order],
        wavelength=wavelength,
    )


def build_scenes(spec: ConstellationSpec, grid: TimeGrid, *, skip_empty: bool = False, **kwargs) -> list[SlotScene]:
    """All slot scenes; with ``skip_empty`` slots without coverage are dropped and logged."""
    scenes = []
    for p in range(1, grid.num_slots + 1):
        try:
            scenes.append(build_slot_scene(spec, grid, p, **kwargs))
        except NoVisibleSatelliteError:
            if not skip_empty:
                raise
            log.info("slot %d has no visible satellite; skipped", p)
    return scenes
