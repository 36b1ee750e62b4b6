"""Frequency-domain channel and array-gain primitives for a wideband ULA.

Subcarrier frequencies are baseband offsets ``f`` in ``[0, F]`` above the
carrier ``f_c``. Angles cross the API in degrees; internally everything works
on ``sin(theta)`` because the squint and split maps are linear in it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# relative slack accepted on the frequency upper bound (grid round-off)
_FREQ_SLACK = 1e-12


@dataclass(frozen=True)
class SystemConfig:
    """Array geometry and OFDM numerology for one base station.

    ``spacing_ratio`` is ``P`` in ``d = P * wavelength / 2``; ``P = 1`` is the
    classic half-wavelength array, ``P > 1`` introduces beam split.
    """

    antenna_count: int
    spacing_ratio: float
    carrier_hz: float
    bandwidth_hz: float
    subcarrier_count: int
    rf_chains: int = 1

    def __post_init__(self):
        if int(self.antenna_count) != self.antenna_count or self.antenna_count < 2:
            raise DomainError(f"antenna_count must be an integer >= 2, got {self.antenna_count}")
        if int(self.subcarrier_count) != self.subcarrier_count or self.subcarrier_count < 2:
            raise DomainError(f"subcarrier_count must be an integer >= 2, got {self.subcarrier_count}")
        if int(self.rf_chains) != self.rf_chains or self.rf_chains < 1:
            raise DomainError(f"rf_chains must be a positive integer, got {self.rf_chains}")
        if not self.spacing_ratio > 0:
            raise DomainError(f"spacing_ratio must be positive, got {self.spacing_ratio}")
        if not self.carrier_hz > 0:
            raise DomainError(f"carrier_hz must be positive, got {self.carrier_hz}")
        if not 0 < self.bandwidth_hz < self.carrier_hz:
            raise DomainError("bandwidth_hz must satisfy 0 < F < f_c")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def spacing(self) -> float:
        """Inter-antenna spacing ``d`` in metres."""
        return self.spacing_ratio * self.wavelength / 2

    @property
    def spacing_over_wavelength(self) -> float:
        """``d / lambda_c``, equal to ``P / 2``."""
        return self.spacing_ratio / 2

    @property
    def fractional_bandwidth(self) -> float:
        return self.bandwidth_hz / self.carrier_hz


@dataclass(frozen=True)
class UserTruth:
    """Ground-truth line-of-sight parameters of one single-antenna user."""

    aod_deg: float
    gain: complex = 1.0
    delay_s: float = 0.0

    def __post_init__(self):
        if not -90.0 < self.aod_deg < 90.0:
            raise DomainError(f"AoD must lie in (-90, 90) degrees, got {self.aod_deg}")
        if self.gain == 0:
            raise DomainError("user gain must be nonzero")
        if self.delay_s < 0:
            raise DomainError("propagation delay must be nonnegative")

    @property
    def sin_aod(self) -> float:
        return float(np.sin(np.radians(self.aod_deg)))


@dataclass(frozen=True)
class NormalizedAoD:
    """Normalized AoD ``psi = (d / lambda_c) sin(theta)``."""

    psi: float

    def effective(self, freq_hz, carrier_hz: float):
        """Frequency-scaled value ``psi (1 + f / f_c)`` seen at subcarrier ``f``."""
        return self.psi * (1 + np.asarray(freq_hz) / carrier_hz)


def check_angle(aod_deg) -> None:
    a = np.asarray(aod_deg, dtype=float)
    if np.any(~np.isfinite(a)) or np.any(np.abs(a) >= 90.0):
        raise DomainError(f"angle must lie strictly inside (-90, 90) degrees, got {aod_deg}")


def check_frequency(config: SystemConfig, freq_hz) -> None:
    f = np.asarray(freq_hz, dtype=float)
    upper = config.bandwidth_hz * (1 + _FREQ_SLACK)
    if np.any(~np.isfinite(f)) or np.any(f < 0) or np.any(f > upper):
        raise DomainError(f"frequency must lie in [0, {config.bandwidth_hz:g}] Hz, got {freq_hz}")


def normalized_aod(config: SystemConfig, aod_deg: float) -> NormalizedAoD:
    check_angle(aod_deg)
    return NormalizedAoD(config.spacing_over_wavelength * float(np.sin(np.radians(aod_deg))))


def steering_vector(config: SystemConfig, aod_deg: float, freq_hz: float) -> np.ndarray:
    """Return ``a(Theta(f))``, entry ``m`` equal to ``exp(-j 2 pi m Theta(f))``."""
    check_angle(aod_deg)
    check_frequency(config, freq_hz)
    theta_f = normalized_aod(config, aod_deg).effective(freq_hz, config.carrier_hz)
    m = np.arange(config.antenna_count)
    return np.exp(-2j * np.pi * m * theta_f)


def channel_response(config: SystemConfig, user: UserTruth, freq_hz: float) -> np.ndarray:
    """Frequency-domain LoS channel ``beta exp(-j 2 pi f tau) a(Theta(f))``."""
    common = user.gain * np.exp(-2j * np.pi * freq_hz * user.delay_s)
    return common * steering_vector(config, user.aod_deg, freq_hz)


def received_symbol(channel, tx, noise: complex = 0.0) -> complex:
    """Plain transpose product ``channel^T tx`` plus additive noise (no conjugation)."""
    channel = np.asarray(channel)
    tx = np.asarray(tx)
    if channel.shape != tx.shape or channel.ndim != 1:
        raise ValueError(f"channel and tx must be equal-length vectors, got {channel.shape} and {tx.shape}")
    return complex(np.sum(channel * tx) + noise)


def array_gain(config: SystemConfig, aod_deg: float, freq_hz: float, weights) -> float:
    """``|a(Theta(f))^T w|`` for weights ``w`` of length ``M``."""
    weights = np.asarray(weights)
    if weights.shape != (config.antenna_count,):
        raise ValueError(f"weights must have length {config.antenna_count}, got shape {weights.shape}")
    return abs(received_symbol(steering_vector(config, aod_deg, freq_hz), weights))


def array_factor(phase_cycles, antenna_count: int) -> np.ndarray:
    """Closed form of ``sum_m exp(j 2 pi m x)`` for ``m = 0..M-1``, vectorized over ``x``.

    Exact replacement for the explicit element sum used by :func:`array_gain`;
    ``x`` is first reduced modulo one, which the sum is periodic in.
    """
    x = np.asarray(phase_cycles, dtype=float)
    x = x - np.round(x)
    den = np.sin(np.pi * x)
    small = np.abs(den) < 1e-12
    ratio = np.where(small, antenna_count, np.sin(np.pi * antenna_count * x) / np.where(small, 1.0, den))
    return ratio * np.exp(1j * np.pi * (antenna_count - 1) * x)


def squint_matched_aod(phi: float, freq_hz: float, config: SystemConfig) -> NormalizedAoD:
    """Normalized AoD receiving full gain ``M`` from fixed PS weights ``a(phi)*`` at ``f``."""
    if freq_hz < 0:
        raise DomainError("frequency must be nonnegative")
    return NormalizedAoD(phi / (1 + freq_hz / config.carrier_hz))


def squint_range(phi: float, config: SystemConfig) -> float:
    """Drift of the matched normalized AoD across the whole band, ``phi F / (f_c + F)``."""
    return phi * config.bandwidth_hz / (config.carrier_hz + config.bandwidth_hz)
