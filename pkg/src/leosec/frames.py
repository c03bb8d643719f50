"""Coordinate frames for the ground station and satellite links.

Three frames are used throughout the package:

* geocentric spherical (latitude, longitude, radius),
* geocentric Cartesian (x towards longitude 0 on the equator, z towards the
  north pole),
* the station-centred frame with x = local north, y = local east,
  z = local up.

Positions are plain ``numpy`` arrays of shape ``(3,)`` in metres; wave vectors
use the same layout in rad/m.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SIDEREAL_DAY = 86164.0905  # s
SPEED_OF_LIGHT = 2.99792458e8  # m/s


class DegenerateGeometryError(ValueError):
    """Raised when two points that must be distinct coincide."""


def wrap_longitude(phi: float) -> float:
    """Map an angle onto (-pi, pi]."""
    wrapped = math.remainder(phi, 2.0 * math.pi)
    if wrapped == -math.pi:
        return math.pi
    return wrapped


@dataclass(frozen=True)
class GeoPosition:
    latitude: float
    longitude: float
    radius: float

    def __post_init__(self):
        if not (-math.pi / 2 - 1e-12 <= self.latitude <= math.pi / 2 + 1e-12):
            raise ValueError(f"latitude {self.latitude} outside [-pi/2, pi/2]")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "longitude", wrap_longitude(self.longitude))

    def to_cartesian(self) -> np.ndarray:
        return spherical_to_cartesian(self.latitude, self.longitude, self.radius)


@dataclass(frozen=True)
class FrameTransform:
    """Rotation taking station-frame coordinates to geocentric Cartesian ones.

    Columns are local north, local east and local up expressed in the
    geocentric frame, so ``matrix.T @ v`` expresses a geocentric vector in the
    station frame.
    """

    matrix: np.ndarray
    epoch: float = 0.0

    def to_local(self, v: np.ndarray) -> np.ndarray:
        return self.matrix.T @ v

    def to_global(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v


def _check_finite(**values: float) -> None:
    for name, v in values.items():
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{name} must be finite, got {v!r}")


def spherical_to_cartesian(latitude, longitude, radius):
    """Vectorised spherical -> Cartesian; trailing axis holds (x, y, z)."""
    lat = np.asarray(latitude, dtype=float)
    lon = np.asarray(longitude, dtype=float)
    cl = np.cos(lat)
    return np.stack(
        [radius * cl * np.cos(lon), radius * cl * np.sin(lon), radius * np.sin(lat) * np.ones_like(lon)],
        axis=-1,
    )


def gs_longitude(t: float, earth_rotation_period: float = SIDEREAL_DAY, longitude0: float = 0.0) -> float:
    return longitude0 + 2.0 * math.pi * t / earth_rotation_period


def gs_position(
    gs_latitude: float,
    t: float,
    earth_radius: float,
    earth_rotation_period: float = SIDEREAL_DAY,
    longitude0: float = 0.0,
) -> np.ndarray:
    """Geocentric Cartesian position of a ground station rotating with the Earth."""
    _check_finite(gs_latitude=gs_latitude, t=t, earth_radius=earth_radius,
                  earth_rotation_period=earth_rotation_period, longitude0=longitude0)
    if earth_rotation_period <= 0:
        raise ValueError("earth_rotation_period must be positive")
    phi = gs_longitude(t, earth_rotation_period, longitude0)
    return spherical_to_cartesian(gs_latitude, phi, earth_radius)


def gs_frame(
    gs_latitude: float,
    t: float,
    earth_rotation_period: float = SIDEREAL_DAY,
    longitude0: float = 0.0,
) -> FrameTransform:
    """Station-frame to geocentric rotation at time ``t``."""
    _check_finite(gs_latitude=gs_latitude, t=t, earth_rotation_period=earth_rotation_period)
    if earth_rotation_period <= 0:
        raise ValueError("earth_rotation_period must be positive")
    phi = gs_longitude(t, earth_rotation_period, longitude0)
    st, ct = math.sin(gs_latitude), math.cos(gs_latitude)
    sp, cp = math.sin(phi), math.cos(phi)
    m = np.array(
        [
            [-st * cp, -sp, ct * cp],
            [-st * sp, cp, ct * sp],
            [ct, 0.0, st],
        ]
    )
    return FrameTransform(matrix=m, epoch=float(t))


def wave_vector(
    sat_pos: np.ndarray,
    gs_pos: np.ndarray,
    wavelength: float,
    frame: FrameTransform,
) -> tuple[np.ndarray, float]:
    """Uplink wave vector in the station frame and the slant range.

    Returns ``(b_tilde, distance)`` where ``|b_tilde| = 2 pi / wavelength``.
    """
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    d = np.asarray(sat_pos, dtype=float) - np.asarray(gs_pos, dtype=float)
    dist = float(np.linalg.norm(d))
    if not dist > 0:
        raise DegenerateGeometryError("satellite and ground station coincide")
    b = (2.0 * math.pi / wavelength) * d / dist
    return frame.to_local(b), dist
