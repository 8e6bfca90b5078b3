"""Beam layout, user placement and channel-matrix synthesis.

One "generation" drops exactly one user terminal per beam and yields a B x B
complex channel matrix: row = receiving beam feed, column = transmitting
user. Entry magnitudes follow a parametric Gaussian roll-off antenna pattern
evaluated at the off-boresight angle of the user seen from the satellite;
each user (column) carries one i.i.d. uniform phase shared by all feeds.

Normalization convention: with noise density n0, a user located exactly at
its beam's boresight is received in that beam at the configured reference
SNR. All rates downstream inherit this convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import ConfigError, SynthesisError

DEFAULT_BEAM_CENTER = (48.75, 11.9)  # central beam boresight (Munich)
DEFAULT_SATELLITE_LONGITUDE = 19.2   # degrees East, GEO arc

_REJECTION_BATCH = 256
_MAX_REJECTION_ROUNDS = 400


@dataclass(frozen=True)
class AntennaPattern:
    """Gaussian main-lobe power pattern clamped at a sidelobe floor.

    relative_gain(theta) = max(exp(-ln2 * (2 theta / theta_3dB)^2), floor),
    normalized to 1 at boresight. `max_gain_db` is carried for link-budget
    style reporting but cancels under the boresight-SNR normalization.
    """

    beamwidth_deg: float = 0.6
    max_gain_db: float = 52.0
    sidelobe_floor_db: float = -30.0

    def __post_init__(self):
        if self.beamwidth_deg <= 0.0:
            raise ConfigError("beamwidth must be positive")
        if self.sidelobe_floor_db >= 0.0:
            raise ConfigError("sidelobe floor must be below peak (negative dB)")

    def relative_gain(self, theta_rad):
        """Linear power gain relative to boresight, in (floor, 1]."""
        theta = np.asarray(theta_rad, dtype=float)
        width = math.radians(self.beamwidth_deg)
        main = np.exp(-math.log(2.0) * (2.0 * theta / width) ** 2)
        return np.maximum(main, 10.0 ** (self.sidelobe_floor_db / 10.0))


@dataclass(frozen=True)
class NoiseModel:
    """White noise at every feed: covariance n0 * I."""

    n0: float = 1.0

    def __post_init__(self):
        if self.n0 <= 0.0:
            raise ConfigError("noise density must be positive")

    def covariance(self, b):
        return self.n0 * np.eye(b)


@dataclass
class BeamLayout:
    """Hex cluster of co-frequency beams plus the sampling pattern.

    beam_centers[0] is the central beam; rows 1..B-1 are its ring, in
    azimuth order. Coordinates are (latitude, longitude) in degrees.
    """

    beam_centers: np.ndarray
    pattern: AntennaPattern = field(default_factory=AntennaPattern)
    satellite_longitude: float = DEFAULT_SATELLITE_LONGITUDE
    spacing_deg: float = 0.6

    @property
    def b(self):
        return len(self.beam_centers)

    def satellite(self):
        return geometry.satellite_position(self.satellite_longitude)

    def boresights(self):
        """(B, 3) unit vectors from the satellite to each beam center."""
        ground = geometry.latlon_to_ecef(
            self.beam_centers[:, 0], self.beam_centers[:, 1]
        )
        return geometry.boresight_directions(self.satellite(), ground)

    def user_angles(self, lat_deg, lon_deg):
        """Off-axis angles (rad) of ground points w.r.t. every beam, (..., B)."""
        ground = geometry.latlon_to_ecef(np.asarray(lat_deg), np.asarray(lon_deg))
        dirs = geometry.boresight_directions(self.satellite(), ground)
        return geometry.off_axis_angles(self.boresights(), dirs)

    def adjacency(self):
        """Boolean (B, B) matrix: True where two beams are hex-adjacent.

        Adjacent means boresight separation within 1.5x the nominal spacing,
        which cleanly splits touching neighbours (~1.0x) from the next hex
        shell (>= ~1.7x).
        """
        dirs = self.boresights()
        dots = np.clip(dirs @ dirs.T, -1.0, 1.0)
        sep = np.arccos(dots)
        adj = sep < 1.5 * math.radians(self.spacing_deg)
        np.fill_diagonal(adj, False)
        return adj


@dataclass(frozen=True)
class UserTerminal:
    position: tuple  # (lat_deg, lon_deg)
    home_beam: int   # 0-based beam index
    generation: int


@dataclass
class UserDrop:
    """One generation of user terminals: row i sits inside beam i."""

    generation: int
    positions: np.ndarray  # (B, 2) lat/lon degrees

    def terminals(self):
        return [
            UserTerminal(tuple(self.positions[i]), i, self.generation)
            for i in range(len(self.positions))
        ]


@dataclass
class ChannelMatrix:
    """Complex gains of one generation: entries[i, j] = user j into feed i."""

    entries: np.ndarray
    generation: int
    snr_reference_db: float

    @property
    def b(self):
        return self.entries.shape[0]


def build_hex_layout(
    b=7,
    center=DEFAULT_BEAM_CENTER,
    spacing_deg=None,
    pattern=None,
    satellite_longitude=DEFAULT_SATELLITE_LONGITUDE,
):
    """Central beam plus up to six ring beams at hex vertices.

    The default spacing puts ring boresights one full 3 dB beamwidth away
    from the center, i.e. adjacent -3 dB contours touch. Deterministic for
    fixed inputs.
    """
    if not 1 <= b <= 7:
        raise ConfigError(f"beam count must be in 1..7, got {b}")
    pattern = pattern or AntennaPattern()
    if spacing_deg is None:
        spacing_deg = pattern.beamwidth_deg
    if spacing_deg <= 0.0:
        raise ConfigError("beam spacing must be positive")

    sat = geometry.satellite_position(satellite_longitude)
    center_xyz = geometry.latlon_to_ecef(center[0], center[1])
    axis = geometry.boresight_directions(sat, center_xyz)
    north, east = geometry.view_basis(axis)

    centers = [tuple(center)]
    if b > 1:
        azimuths = np.radians(60.0 * np.arange(b - 1))
        tilted = geometry.rotate_towards(
            axis, north, east, math.radians(spacing_deg), azimuths
        )
        ring = geometry.ray_earth_intersections(sat, tilted)
        lat, lon = geometry.ecef_to_latlon(ring)
        centers.extend(zip(lat, lon))

    return BeamLayout(
        beam_centers=np.array(centers, dtype=float),
        pattern=pattern,
        satellite_longitude=satellite_longitude,
        spacing_deg=float(spacing_deg),
    )


def _footprint_box(layout, beam):
    """Lat/lon bounding box enclosing the -3 dB contour of one beam."""
    sat = layout.satellite()
    dirs = layout.boresights()
    axis = dirs[beam]
    north, east = geometry.view_basis(axis)
    azimuths = np.linspace(0.0, 2.0 * np.pi, 256, endpoint=False)
    half = math.radians(layout.pattern.beamwidth_deg) / 2.0
    rim_dirs = geometry.rotate_towards(axis, north, east, half, azimuths)
    rim = geometry.ray_earth_intersections(sat, rim_dirs)
    lat, lon = geometry.ecef_to_latlon(rim)
    lat_margin = 0.15 * (lat.max() - lat.min())
    lon_margin = 0.15 * (lon.max() - lon.min())
    return (
        lat.min() - lat_margin,
        lat.max() + lat_margin,
        lon.min() - lon_margin,
        lon.max() + lon_margin,
    )


def _sample_in_beam(layout, beam, n, rng):
    """Uniform points over the beam's -3 dB ground footprint, shape (n, 2).

    Rejection sampling from an area-uniform lat/lon box (uniform in sin(lat)
    and lon) guarantees uniformity over the accepted spherical region.
    """
    lat_lo, lat_hi, lon_lo, lon_hi = _footprint_box(layout, beam)
    sin_lo, sin_hi = math.sin(math.radians(lat_lo)), math.sin(math.radians(lat_hi))
    half = math.radians(layout.pattern.beamwidth_deg) / 2.0

    out = np.empty((n, 2))
    filled = 0
    for _ in range(_MAX_REJECTION_ROUNDS):
        if filled >= n:
            break
        want = max(n - filled, 1)
        batch = max(_REJECTION_BATCH, 2 * want)
        lat = np.degrees(np.arcsin(rng.uniform(sin_lo, sin_hi, batch)))
        lon = rng.uniform(lon_lo, lon_hi, batch)
        theta = layout.user_angles(lat, lon)[:, beam]
        ok = np.flatnonzero(theta < half)[: n - filled]
        out[filled : filled + len(ok), 0] = lat[ok]
        out[filled : filled + len(ok), 1] = lon[ok]
        filled += len(ok)
    if filled < n:
        raise SynthesisError(
            f"rejection sampling for beam {beam} failed to converge"
        )
    return out


def drop_users(layout, n_ch, seed=0, first_generation=0):
    """Drop n_ch generations of users, one terminal per beam per generation.

    Reproducible for a fixed seed: terminals depend only on (layout, n_ch,
    seed). `seed` may be anything numpy's default_rng accepts. Returns a
    list of UserDrop, ordered by generation index.
    """
    if n_ch < 1:
        raise ConfigError("n_ch must be >= 1")
    rng = np.random.default_rng(seed)
    per_beam = [_sample_in_beam(layout, i, n_ch, rng) for i in range(layout.b)]
    stacked = np.stack(per_beam, axis=1)  # (n_ch, B, 2)
    return [UserDrop(first_generation + c, stacked[c]) for c in range(n_ch)]


def _column_amplitudes(layout, positions, snr_db, noise):
    """(B_users, B_feeds) real amplitude of each user into each feed."""
    theta = layout.user_angles(positions[:, 0], positions[:, 1])
    gains = layout.pattern.relative_gain(theta)
    power = noise.n0 * 10.0 ** (snr_db / 10.0)
    amps = np.sqrt(power * gains)
    if not np.all(np.isfinite(amps)) or np.any(amps.max(axis=1) <= 0.0):
        raise SynthesisError("user outside all beam patterns")
    return amps


def synthesize_channel(layout, users, noise=NoiseModel(), snr_db=15.0, rng=None):
    """Channel matrix for one generation of users.

    entries[i, j] = sqrt(P * g(theta_ij)) * exp(1j phi_j) where theta_ij is
    the off-boresight angle of user j w.r.t. beam i and P is set so that a
    boresight user reaches `snr_db` in its own beam. One random phase per
    column (a single transmit path splits across feeds).
    """
    if len(users.positions) != layout.b:
        raise SynthesisError("need exactly one terminal per beam")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    amps = _column_amplitudes(layout, users.positions, snr_db, noise)
    phases = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, layout.b))
    entries = amps.T * phases[None, :]
    return ChannelMatrix(entries, users.generation, snr_db)


def synthesize_generations(
    layout, n_ch, noise=NoiseModel(), snr_db=15.0, seed=0, first_generation=0
):
    """Drop users and synthesize all n_ch channel matrices in one pass.

    Vectorized batch equivalent of drop_users + synthesize_channel per
    generation. `seed` may be an int or a numpy SeedSequence; positions and
    phases use independently derived child streams.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    drop_seed, phase_seed = ss.spawn(2)
    drops = drop_users(layout, n_ch, seed=drop_seed, first_generation=first_generation)
    rng = np.random.default_rng(phase_seed)
    flat = np.concatenate([d.positions for d in drops], axis=0)
    amps = _column_amplitudes(layout, flat, snr_db, noise)
    amps = amps.reshape(n_ch, layout.b, layout.b)
    phases = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, (n_ch, layout.b)))
    matrices = []
    for c in range(n_ch):
        entries = amps[c].T * phases[c][None, :]
        matrices.append(ChannelMatrix(entries, first_generation + c, snr_db))
    return drops, matrices


def write_channel_csv(matrix, path):
    """Dump a channel matrix as CSV, cells formatted like `re+imj`."""
    entries = matrix.entries
    with open(path, "w", encoding="utf-8") as fh:
        for row in entries:
            fh.write(",".join(f"{z.real:.17g}{z.imag:+.17g}j" for z in row))
            fh.write("\n")


def read_channel_csv(path, generation=0, snr_reference_db=15.0):
    """Parse a CSV written by :func:`write_channel_csv`."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([complex(tok) for tok in line.split(",")])
    return ChannelMatrix(np.array(rows, dtype=complex), generation, snr_reference_db)
