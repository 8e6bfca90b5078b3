"""Spherical-Earth / GEO viewing geometry.

All beam-pointing math works with unit direction vectors seen from the
satellite. Angles between a beam boresight and a user terminal are computed
at the satellite, which is what a single-reflector antenna pattern takes as
its argument. Earth is a sphere of radius 6371 km; the satellite sits on the
geostationary arc (42164 km from the Earth's center) at a configurable
longitude.
"""
from __future__ import annotations

import numpy as np

from .errors import GeometryError

EARTH_RADIUS_KM = 6371.0
GEO_RADIUS_KM = 42164.0


def latlon_to_ecef(lat_deg, lon_deg, radius=EARTH_RADIUS_KM):
    """Map geographic coordinates to ECEF positions, shape (..., 3)."""
    lat = np.radians(np.asarray(lat_deg, dtype=float))
    lon = np.radians(np.asarray(lon_deg, dtype=float))
    cos_lat = np.cos(lat)
    return radius * np.stack(
        [cos_lat * np.cos(lon), cos_lat * np.sin(lon), np.sin(lat)], axis=-1
    )


def ecef_to_latlon(xyz):
    """Inverse of :func:`latlon_to_ecef`; returns (lat_deg, lon_deg)."""
    xyz = np.asarray(xyz, dtype=float)
    r = np.linalg.norm(xyz, axis=-1)
    lat = np.degrees(np.arcsin(xyz[..., 2] / r))
    lon = np.degrees(np.arctan2(xyz[..., 1], xyz[..., 0]))
    return lat, lon


def satellite_position(longitude_deg):
    """ECEF position of a GEO satellite parked at the given longitude."""
    lon = np.radians(longitude_deg)
    return GEO_RADIUS_KM * np.array([np.cos(lon), np.sin(lon), 0.0])


def boresight_directions(sat_pos, ground_xyz):
    """Unit vectors from the satellite towards ground points, shape (..., 3)."""
    d = np.asarray(ground_xyz, dtype=float) - sat_pos
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def off_axis_angles(beam_dirs, user_dirs):
    """Angle (rad) at the satellite between each user and each beam axis.

    beam_dirs: (B, 3) unit vectors; user_dirs: (..., 3) unit vectors.
    Returns an array of shape (..., B). atan2 keeps small angles accurate.
    """
    beam_dirs = np.asarray(beam_dirs, dtype=float)
    user_dirs = np.asarray(user_dirs, dtype=float)
    dots = user_dirs @ beam_dirs.T
    crosses = np.cross(user_dirs[..., None, :], beam_dirs[None, :, :])
    return np.arctan2(np.linalg.norm(crosses, axis=-1), dots)


def ray_earth_intersections(sat_pos, directions):
    """First intersection of satellite rays with the Earth sphere, (..., 3).

    Raises GeometryError if any ray misses the Earth.
    """
    directions = np.asarray(directions, dtype=float)
    # |s + t d|^2 = R^2  ->  t^2 + 2 t (s.d) + (|s|^2 - R^2) = 0
    sd = directions @ sat_pos
    disc = sd**2 - (sat_pos @ sat_pos - EARTH_RADIUS_KM**2)
    if np.any(disc < 0.0):
        raise GeometryError("beam boresight ray does not intersect the Earth")
    t = -sd - np.sqrt(disc)  # near intersection
    return sat_pos + t[..., None] * directions


def view_basis(axis):
    """Right-handed orthonormal pair spanning the plane normal to `axis`.

    The first vector points towards view-north (the projection of the Earth
    rotation axis), fixing a deterministic azimuth origin for ring beams.
    """
    z = np.array([0.0, 0.0, 1.0])
    north = z - (z @ axis) * axis
    n = np.linalg.norm(north)
    if n < 1e-12:
        raise GeometryError("boresight parallel to the Earth axis")
    north /= n
    east = np.cross(north, axis)
    east /= np.linalg.norm(east)
    return north, east


def rotate_towards(axis, north, east, alpha_rad, azimuth_rad):
    """Tilt `axis` by alpha towards the azimuth measured from view-north."""
    alpha = np.asarray(alpha_rad, dtype=float)
    azimuth = np.asarray(azimuth_rad, dtype=float)
    side = np.cos(azimuth)[..., None] * north + np.sin(azimuth)[..., None] * east
    return np.cos(alpha)[..., None] * axis + np.sin(alpha)[..., None] * side
