"""Channel synthesis: LoS steering vectors for IoDs, Rayleigh draws for
Eves, and the null-space basis used to project artificial noise away from
every IoD."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import SPEED_OF_LIGHT, SystemConfig, Geometry


class ChannelError(ValueError):
    pass


def path_loss_db(f_c, r):
    """Free-space loss 32.5 + 20 log10(f/MHz) + 20 log10(r/km), in dB."""
    if f_c <= 0 or r <= 0:
        raise ValueError("carrier frequency and range must be positive")
    return 32.5 + 20.0 * math.log10(f_c / 1e6) + 20.0 * math.log10(r / 1e3)


def attenuation(f_c, r):
    """Amplitude gain rho(r) = 10^(-Lfs/20)."""
    return 10.0 ** (-path_loss_db(f_c, r) / 20.0)


def steering(theta_deg, r, cfg: SystemConfig) -> np.ndarray:
    """LoS channel h(r, theta): h_n = rho(r) * exp(-j 2 pi f_c (n-1) d sin(theta) / c).

    The conjugation follows the Hermitian transpose in the array model; only
    the beamformers' phases flip under the opposite convention.
    """
    if not -90.0 <= theta_deg <= 90.0:
        raise ValueError(f"azimuth must lie in [-90, 90] deg, got {theta_deg}")
    n = np.arange(cfg.n_antennas)
    phase = 2.0 * math.pi * cfg.carrier_hz * cfg.spacing() * math.sin(math.radians(theta_deg)) / SPEED_OF_LIGHT
    return attenuation(cfg.carrier_hz, r) * np.exp(-1j * phase * n)


def nullspace_projector(h_tot: np.ndarray) -> np.ndarray:
    """Orthonormal basis V0 of the joint null space of all IoD channels.

    h_tot is N x K with full column rank; V0 is N x (N-K) with
    h_tot^H V0 = 0, obtained from the SVD of h_tot^H.
    """
    n, k = h_tot.shape
    if k >= n:
        raise ChannelError(f"need K < N for a non-trivial null space (K={k}, N={n})")
    _, s, vh = np.linalg.svd(h_tot.conj().T, full_matrices=True)
    if s[-1] < 1e-10 * s[0]:
        raise ChannelError(
            f"IoD channel matrix is rank deficient (sigma_min/sigma_max = {s[-1] / s[0]:.2e}); "
            "co-located or duplicated IoDs?"
        )
    return vh.conj().T[:, k:]


@dataclass
class ChannelSet:
    """Deterministic IoD channels plus the AN null-space basis."""

    iod_channels: list[np.ndarray]  # K vectors of length N
    h_tot: np.ndarray  # N x K stacked matrix
    v0: np.ndarray  # N x (N-K), orthonormal columns, h_tot^H v0 = 0


def build_channels(cfg: SystemConfig, geom: Geometry) -> ChannelSet:
    hs = [steering(theta, r, cfg) for r, theta in geom.iod_polar]
    h_tot = np.stack(hs, axis=1)
    v0 = nullspace_projector(h_tot)
    return ChannelSet(iod_channels=hs, h_tot=h_tot, v0=v0)


def eve_los_channels(cfg: SystemConfig, geom: Geometry) -> list[np.ndarray]:
    """Deterministic Eve channels for placement-based evaluation scenarios."""
    if geom.eve_polar is None:
        raise ChannelError("geometry carries no Eve placements")
    return [steering(theta, r, cfg) for r, theta in geom.eve_polar]


def sample_eve_channels(rng: np.random.Generator, q: int, n: int) -> np.ndarray:
    """Q i.i.d. Rayleigh channels, entries CN(0, 1); returned as a Q x N array."""
    return (rng.standard_normal((q, n)) + 1j * rng.standard_normal((q, n))) / math.sqrt(2.0)
