"""Phase-shifter plus true-time-delay (PS+TTD) frontend design.

One RF chain drives ``M`` antennas through a phase shifter and a delay line
each. Element ``m`` (zero based) applies phase ``2 pi m phi`` and delay
``m * ttd_slope``, so the beam of subcarrier ``f`` points where

    sin(theta(f)) = (sin(theta_0) - f (lambda_c / d) ttd_slope) / (1 + f / f_c)

which sweeps monotonically from ``theta_0`` at ``f = 0`` to ``theta_c`` at
``f = F``. With ``d > lambda_c / 2`` (or at high subcarriers) every beam
also has grating-lobe aliases at ``sin(theta) - 2Z / (P (1 + f / f_c))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DesignError, DomainError
from .wideband import SystemConfig, check_angle, check_frequency

# sines this far outside [-1, 1] are treated as round-off and clamped
SINE_CLAMP_TOL = 1e-12


def safe_arcsin_deg(sine):
    """arcsin in degrees, clamping round-off excursions past +-1."""
    s = np.asarray(sine, dtype=float)
    if np.any(np.abs(s) > 1 + SINE_CLAMP_TOL):
        raise DomainError(f"sine value outside [-1, 1]: {sine}")
    out = np.degrees(np.arcsin(np.clip(s, -1.0, 1.0)))
    return float(out) if out.ndim == 0 else out


def _sin_deg(angle_deg):
    return np.sin(np.radians(angle_deg))


@dataclass(frozen=True)
class FrontendDesign:
    """PS phase ``phi`` and per-antenna TTD increment for one RF chain.

    ``ttd_slope`` may be negative; see :meth:`physical_delays` for a
    realizable, nonnegative set of delays with identical array gain.
    """

    config: SystemConfig
    phi: float
    ttd_slope: float
    theta0_deg: float
    thetac_deg: float

    @property
    def antenna_delays(self) -> np.ndarray:
        """Signed delays ``t_m = m * ttd_slope`` in seconds (``t_0 = 0``)."""
        return np.arange(self.config.antenna_count) * self.ttd_slope

    def physical_delays(self) -> np.ndarray:
        """Delays shifted by a common offset so that all are nonnegative.

        A common delay multiplies the response by a scalar phase per
        subcarrier and leaves every array gain unchanged.
        """
        offset = max(0.0, -(self.config.antenna_count - 1) * self.ttd_slope)
        return self.antenna_delays + offset

    @property
    def slope_sine_rate(self) -> float:
        """``(lambda_c / d) * ttd_slope``: rate (per Hz) entering the beam-direction map."""
        return self.ttd_slope / self.config.spacing_over_wavelength


def design_frontend(config: SystemConfig, theta0_deg: float, thetac_deg: float) -> FrontendDesign:
    """Design PS and TTD values sweeping the beam from ``theta0`` (f=0) to ``thetac`` (f=F)."""
    check_angle(theta0_deg)
    check_angle(thetac_deg)
    s0, sc = float(_sin_deg(theta0_deg)), float(_sin_deg(thetac_deg))
    if s0 == sc:
        raise DesignError(f"degenerate sweep: sin({theta0_deg}) == sin({thetac_deg})")
    ratio = config.spacing_over_wavelength
    phi = ratio * s0
    slope = ratio * (s0 - sc * (1 + config.fractional_bandwidth)) / config.bandwidth_hz
    return FrontendDesign(config, phi, slope, float(theta0_deg), float(thetac_deg))


def retune(design: FrontendDesign, theta0_deg: float) -> FrontendDesign:
    """Re-point the phase shifters to a new initial angle, keeping the TTD lines.

    The termination angle follows from the unchanged delays and must stay
    inside the visible region.
    """
    check_angle(theta0_deg)
    cfg = design.config
    s0 = float(_sin_deg(theta0_deg))
    sc = (s0 - cfg.bandwidth_hz * design.slope_sine_rate) / (1 + cfg.fractional_bandwidth)
    if abs(sc) >= 1:
        raise DomainError(f"initial angle {theta0_deg} pushes the termination angle out of view")
    thetac = safe_arcsin_deg(sc)
    return FrontendDesign(cfg, cfg.spacing_over_wavelength * s0, design.ttd_slope, float(theta0_deg), thetac)


def frontend_response(design: FrontendDesign, freq_hz: float) -> np.ndarray:
    """Weights ``g_m = exp(j 2 pi m phi) exp(-j 2 pi f t_m)`` at subcarrier ``f``."""
    check_frequency(design.config, freq_hz)
    m = np.arange(design.config.antenna_count)
    return np.exp(2j * np.pi * m * (design.phi - freq_hz * design.ttd_slope))


def beam_sine(design: FrontendDesign, freq_hz):
    """Sine of the main-beam direction, vectorized over frequency."""
    f = np.asarray(freq_hz, dtype=float)
    s0 = design.phi / design.config.spacing_over_wavelength
    return (s0 - f * design.slope_sine_rate) / (1 + f / design.config.carrier_hz)


def beam_direction(design: FrontendDesign, freq_hz: float) -> float:
    """Main-beam direction in degrees at subcarrier ``f``."""
    check_frequency(design.config, freq_hz)
    return safe_arcsin_deg(beam_sine(design, freq_hz))


def alias_bound(config: SystemConfig) -> int:
    """Largest ``|Z|`` that can yield a visible alias anywhere in the band."""
    return math.ceil(config.spacing_ratio * (1 + config.fractional_bandwidth))


def alias_spacing(config: SystemConfig, freq_hz):
    """Sine-domain distance between neighbouring aliases, ``2 / (P (1 + f/f_c))``."""
    return 2.0 / (config.spacing_ratio * (1 + np.asarray(freq_hz) / config.carrier_hz))


@dataclass(frozen=True)
class SplitAliasSet:
    """Grating-lobe aliases of ``base_deg`` at one subcarrier, ordered by ``Z``."""

    base_deg: float
    aliases: tuple[float, ...]
    z_values: tuple[int, ...]

    def __len__(self):
        return len(self.aliases)

    def __iter__(self):
        return iter(self.aliases)


def split_alias_sines(config: SystemConfig, base_sine: float, freq_hz: float) -> list[tuple[int, float]]:
    step = float(alias_spacing(config, freq_hz))
    bound = alias_bound(config)
    out = []
    for z in range(-bound, bound + 1):
        if z == 0:
            continue
        s = base_sine - z * step
        if abs(s) < 1.0:  # endfire (|sin| = 1) is outside the open angle domain
            out.append((z, s))
    return out


def split_angles(config: SystemConfig, aod_deg: float, freq_hz: float) -> SplitAliasSet:
    """All directions sharing the array response of ``aod_deg`` at subcarrier ``f``."""
    check_angle(aod_deg)
    pairs = split_alias_sines(config, float(_sin_deg(aod_deg)), freq_hz)
    return SplitAliasSet(
        base_deg=float(aod_deg),
        aliases=tuple(float(safe_arcsin_deg(s)) for _, s in pairs),
        z_values=tuple(z for z, _ in pairs),
    )


def beam_trajectory(design: FrontendDesign, grid) -> list[tuple[float, SplitAliasSet]]:
    """Main direction and its aliases at every frequency of ``grid``."""
    freqs = np.asarray(grid, dtype=float)
    if freqs.ndim != 1 or np.any(np.diff(freqs) <= 0):
        raise DomainError("grid frequencies must be a strictly increasing sequence")
    check_frequency(design.config, freqs)
    out = []
    for f in freqs:
        main = beam_direction(design, float(f))
        out.append((main, split_angles(design.config, main, float(f))))
    return out
