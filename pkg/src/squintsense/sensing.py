"""Frequency-domain user-direction sensing over one or two OFDM blocks.

Squint-only sensing sweeps the whole range with one block and inverts the
beam-direction map at the reported subcarrier. Squint+split sensing adds
grating-lobe aliases (``P > 1``), so each report yields a candidate set;
a second block with re-pointed phase shifters (same TTD lines) yields a
second set and the intersection of the two isolates the user.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AmbiguousIntersectionError,
    DesignError,
    NoIntersectionError,
    NotInRangeError,
    ValidationUnavailableError,
)
from .frontend import (
    FrontendDesign,
    alias_bound,
    alias_spacing,
    beam_sine,
    design_frontend,
    retune,
    safe_arcsin_deg,
    split_alias_sines,
)
from .wideband import SystemConfig, UserTruth, array_factor, check_frequency

# fraction of the peak power M^2 |beta|^2 a user must see to count as covered (-3 dB)
COVERAGE_FRACTION = 0.5
AMBIGUITY_TOL = 1e-9
# initial-angle shifts (degrees) tried for the validation pass, in order
VALIDATION_SHIFTS_DEG = tuple(s for k in range(2, 21, 2) for s in (k, -k))


@dataclass(frozen=True)
class SubcarrierGrid:
    frequencies: np.ndarray

    @classmethod
    def for_config(cls, config: SystemConfig) -> "SubcarrierGrid":
        n = config.subcarrier_count
        return cls(np.arange(n) * (config.bandwidth_hz / n))

    def __len__(self):
        return len(self.frequencies)


@dataclass(frozen=True)
class NoiseModel:
    """Circularly-symmetric complex Gaussian noise of total variance ``variance``.

    ``seed`` may be an int or a tuple of ints; :meth:`for_pass` derives an
    independent stream per sensing pass.
    """

    variance: float = 0.0
    seed: int | tuple = 0

    def __post_init__(self):
        if not self.variance >= 0:
            raise ValueError(f"noise variance must be nonnegative, got {self.variance}")

    def for_pass(self, index: int) -> "NoiseModel":
        base = self.seed if isinstance(self.seed, tuple) else (self.seed,)
        return NoiseModel(self.variance, base + (index,))

    def sample(self, n: int) -> np.ndarray:
        if self.variance == 0:
            return np.zeros(n, dtype=complex)
        rng = np.random.default_rng(self.seed)
        scale = math.sqrt(self.variance / 2)
        return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


@dataclass(frozen=True)
class FeedbackReport:
    subcarrier_index: int
    freq_hz: float
    peak_power: float
    covered: bool


@dataclass(frozen=True)
class CandidateSet:
    """Main-beam direction at the reported subcarrier plus its aliases.

    ``spacing`` is the largest sine-domain step between neighbouring
    subcarriers along any of the candidate trajectories at that subcarrier.
    """

    main_deg: float
    aliases_deg: tuple[float, ...] = ()
    main_sine: float = field(default=None, repr=False)
    alias_sines: tuple[float, ...] = field(default=(), repr=False)
    spacing: float = 0.0

    def __post_init__(self):
        if self.main_sine is None:
            object.__setattr__(self, "main_sine", float(np.sin(np.radians(self.main_deg))))
        if len(self.alias_sines) != len(self.aliases_deg):
            object.__setattr__(self, "alias_sines", tuple(float(np.sin(np.radians(a))) for a in self.aliases_deg))

    @property
    def angles_deg(self) -> tuple[float, ...]:
        return (self.main_deg,) + tuple(self.aliases_deg)

    @property
    def sines(self) -> tuple[float, ...]:
        return (self.main_sine,) + tuple(self.alias_sines)


@dataclass(frozen=True)
class SensingRangeSet:
    """Sine-domain intervals swept by the main beam and each visible alias branch.

    ``splits`` holds ``(start_deg, end_deg)`` per alias branch (clipped to
    the visible region), with the branch index in ``split_z``.
    """

    main: tuple[float, float]
    splits: tuple[tuple[float, float], ...]
    split_z: tuple[int, ...]
    overlap_free: bool
    intervals: tuple[tuple[float, float], ...] = field(repr=False, default=())
    min_gap: float = math.inf

    def covers(self, sine: float) -> bool:
        return any(lo <= sine <= hi for lo, hi in self.intervals)


def noiseless_response(design: FrontendDesign, user: UserTruth, freqs) -> np.ndarray:
    """``beta exp(-j 2 pi f tau) a(Theta(f))^T g(f)`` for every frequency in ``freqs``."""
    cfg = design.config
    f = np.asarray(freqs, dtype=float)
    psi = cfg.spacing_over_wavelength * user.sin_aod
    cycles = design.phi - f * design.ttd_slope - psi * (1 + f / cfg.carrier_hz)
    common = user.gain * np.exp(-2j * np.pi * f * user.delay_s)
    return common * array_factor(cycles, cfg.antenna_count)


def simulate_feedback(design: FrontendDesign, user: UserTruth, grid: SubcarrierGrid,
                      noise: NoiseModel) -> FeedbackReport:
    """One OFDM block: the user reports the subcarrier with the largest received power.

    Ties go to the lowest index. The user counts as covered when its sine
    lies inside an interval swept by the main beam or an alias, or when its
    noiseless peak power reaches ``COVERAGE_FRACTION * M^2 |beta|^2``; the
    second clause keeps users just outside a range whose beam still reaches
    them at -3 dB.
    """
    check_frequency(design.config, grid.frequencies)
    clean = noiseless_response(design, user, grid.frequencies)
    power = np.abs(clean + noise.sample(len(grid))) ** 2
    idx = int(np.argmax(power))
    peak_clean = float(np.max(np.abs(clean) ** 2))
    m = design.config.antenna_count
    covered = (peak_clean >= COVERAGE_FRACTION * m * m * abs(user.gain) ** 2
               or split_sensing_ranges(design).covers(user.sin_aod))
    return FeedbackReport(idx, float(grid.frequencies[idx]), float(power[idx]), bool(covered))


def _require_covered(report: FeedbackReport, design: FrontendDesign):
    if not report.covered:
        raise NotInRangeError(
            f"user not located in the sensed range [{design.theta0_deg:g}, {design.thetac_deg:g}] deg"
        )


def sense_squint(design: FrontendDesign, report: FeedbackReport) -> float:
    """Invert the beam-direction map at the reported frequency (half-wavelength arrays)."""
    if design.config.spacing_ratio != 1:
        raise DesignError("squint-only sensing requires half-wavelength spacing (P = 1)")
    _require_covered(report, design)
    return safe_arcsin_deg(beam_sine(design, report.freq_hz))


def _branch_sines(design: FrontendDesign, freqs, z: int):
    return beam_sine(design, freqs) - z * alias_spacing(design.config, freqs)


def split_sensing_ranges(design: FrontendDesign) -> SensingRangeSet:
    """Intervals swept over ``[0, F]`` by the main beam and every alias branch.

    Each branch keeps a fixed ``Z`` and is monotone in frequency, so its
    sweep is bounded by the values at ``f = 0`` and ``f = F``.
    """
    cfg = design.config
    ends = np.array([0.0, cfg.bandwidth_hz])
    bound = alias_bound(cfg)
    branches = []
    for z in range(-bound, bound + 1):
        a, b = _branch_sines(design, ends, z)
        lo, hi = min(a, b), max(a, b)
        if hi < -1 or lo > 1:
            continue
        branches.append((z, float(a), float(b), max(lo, -1.0), min(hi, 1.0)))
    intervals = sorted((lo, hi) for _, _, _, lo, hi in branches)
    gaps = [c - b for (_, b), (c, _) in zip(intervals, intervals[1:])]
    splits = tuple(
        (safe_arcsin_deg(np.clip(a, -1, 1)), safe_arcsin_deg(np.clip(b, -1, 1)))
        for z, a, b, _, _ in branches if z != 0
    )
    return SensingRangeSet(
        main=(design.theta0_deg, design.thetac_deg),
        splits=splits,
        split_z=tuple(z for z, *_ in branches if z != 0),
        overlap_free=all(g > 0 for g in gaps),
        intervals=tuple(intervals),
        min_gap=min(gaps, default=math.inf),
    )


def _local_spacing(design: FrontendDesign, freq_hz: float, zs) -> float:
    cfg = design.config
    step = cfg.bandwidth_hz / cfg.subcarrier_count
    neighbours = [f for f in (freq_hz - step, freq_hz + step) if -1e-6 <= f <= cfg.bandwidth_hz * (1 + 1e-12)]
    best = 0.0
    for z in zs:
        here = _branch_sines(design, freq_hz, z)
        for f in neighbours:
            best = max(best, abs(float(_branch_sines(design, max(f, 0.0), z) - here)))
    return best


def candidate_angles(design: FrontendDesign, report: FeedbackReport) -> CandidateSet:
    """Main direction and all visible aliases at the reported subcarrier."""
    _require_covered(report, design)
    main = float(beam_sine(design, report.freq_hz))
    pairs = split_alias_sines(design.config, main, report.freq_hz)
    return CandidateSet(
        main_deg=safe_arcsin_deg(main),
        aliases_deg=tuple(safe_arcsin_deg(s) for _, s in pairs),
        main_sine=main,
        alias_sines=tuple(s for _, s in pairs),
        spacing=_local_spacing(design, report.freq_hz, [0] + [z for z, _ in pairs]),
    )


def ambiguity_condition(design: FrontendDesign, theta0_deg: float, theta0_tilde_deg: float, z: int) -> bool:
    """True when re-sensing from ``theta0_tilde`` leaves alias branch ``z`` ambiguous.

    Compares, in cross-multiplied form,
    ``(s~0 + K) / (s0 + K)`` with ``(s~0 - s~0^z) / (s0 - s0^z)`` where
    ``K = f_c (lambda_c / d) ttd_slope`` and ``s^z`` is the ``f = 0`` alias.
    An infeasible alias (``|sin| > 1``) makes the condition false.
    """
    cfg = design.config
    s0 = float(np.sin(np.radians(theta0_deg)))
    st = float(np.sin(np.radians(theta0_tilde_deg)))
    step = 2.0 / cfg.spacing_ratio
    s0z, stz = s0 - z * step, st - z * step
    if z == 0 or abs(s0z) > 1 or abs(stz) > 1:
        return False
    k = cfg.carrier_hz * design.slope_sine_rate
    lhs = (st + k) * (s0 - s0z)
    rhs = (st - stz) * (s0 + k)
    scale = max(1.0, abs(lhs), abs(rhs))
    return abs(lhs - rhs) <= AMBIGUITY_TOL * scale


def _reported_frequency(design: FrontendDesign, sine: float, z: int) -> float | None:
    """Frequency at which branch ``z`` of ``design`` passes through ``sine`` (``None`` if never)."""
    cfg = design.config
    s0 = design.phi / cfg.spacing_over_wavelength
    den = design.slope_sine_rate + sine / cfg.carrier_hz
    if den == 0:
        return None
    f = (s0 - z * 2.0 / cfg.spacing_ratio - sine) / den
    return f if 0.0 <= f <= cfg.bandwidth_hz else None


def _separates(design: FrontendDesign, shifted: FrontendDesign, candidates: CandidateSet) -> bool:
    """Check that, whichever candidate is the user, no other candidate reappears in pass two.

    For each hypothesis the second report is predicted on the shifted sweep.
    The actual report lands within half a subcarrier of the prediction, which
    moves each second-pass candidate by at most half the matching tolerance,
    so every other first-pass candidate must stay more than 1.5 tolerances
    away from the predicted second candidate set.
    """
    bound = alias_bound(design.config)
    zs = range(-bound, bound + 1)
    sines = candidates.sines
    for i, hyp in enumerate(sines):
        freqs = [f for f in (_reported_frequency(shifted, hyp, z) for z in zs) if f is not None]
        if not freqs:
            return False
        f2 = freqs[0]
        predicted = [float(_branch_sines(shifted, f2, z)) for z in zs]
        predicted = [q for q in predicted if abs(q) < 1.0]
        tol = max(candidates.spacing, _local_spacing(shifted, f2, list(zs)))
        for j, other in enumerate(sines):
            if j != i and any(abs(other - q) <= 1.5 * tol for q in predicted):
                return False
    return True


def select_validation_angle(design: FrontendDesign, candidates: CandidateSet,
                            shifts_deg=VALIDATION_SHIFTS_DEG) -> tuple[float, float]:
    """Pick a new initial angle for the validation pass, keeping the TTD lines.

    Shifts are applied in the sine domain, ``sin(theta~0) = sin(theta0) + sin(delta)``,
    and the first one is accepted for which no alias branch stays ambiguous,
    every candidate remains inside the swept ranges, the ranges do not
    overlap, and no wrong candidate is predicted to land close enough to a
    second-pass candidate to match it on the finite grid (see ``_separates``).
    Returns ``(theta~0, theta~c)`` in degrees.
    """
    if design.ttd_slope == 0:
        raise DesignError("TTD slope is zero: no sweep to validate against")
    cfg = design.config
    s0 = float(np.sin(np.radians(design.theta0_deg)))
    bound = alias_bound(cfg)
    for delta in shifts_deg:
        st = s0 + math.sin(math.radians(delta))
        if abs(st) >= 1:
            continue
        theta_t = safe_arcsin_deg(st)
        try:
            shifted = retune(design, theta_t)
        except ValueError:
            continue
        if any(ambiguity_condition(design, design.theta0_deg, theta_t, z)
               for z in range(-bound, bound + 1) if z != 0):
            continue
        ranges = split_sensing_ranges(shifted)
        if not ranges.overlap_free:
            continue
        if not all(ranges.covers(s) for s in candidates.sines):
            continue
        if _separates(design, shifted, candidates):
            return shifted.theta0_deg, shifted.thetac_deg
    raise ValidationUnavailableError("no shifted initial angle satisfies the validation constraints")


def _pairs_within(first: CandidateSet, second: CandidateSet, tol_deg):
    if tol_deg is None:
        tol = max(first.spacing, second.spacing)
        within = lambda i, j: abs(first.sines[i] - second.sines[j]) <= tol  # noqa: E731
    else:
        within = lambda i, j: abs(first.angles_deg[i] - second.angles_deg[j]) <= tol_deg  # noqa: E731
    pairs = [(i, j) for i, j in itertools.product(range(len(first.sines)), range(len(second.sines)))
             if within(i, j)]
    return sorted(pairs, key=lambda p: abs(first.sines[p[0]] - second.sines[p[1]]))


def _combine(first: CandidateSet, second: CandidateSet, i: int, j: int, combine: str) -> float:
    if combine == "first":
        return safe_arcsin_deg(first.sines[i])
    if combine == "midpoint":
        return safe_arcsin_deg((first.sines[i] + second.sines[j]) / 2)
    raise ValueError(f"combine must be 'first' or 'midpoint', got {combine!r}")


def intersection_validate(first: CandidateSet, second: CandidateSet, tol_deg: float | None = None,
                          combine: str = "midpoint") -> float:
    """Return the direction common to both candidate sets.

    Without ``tol_deg`` two candidates match when their sines differ by at
    most the larger local grid spacing of the two passes; with it, when the
    angles differ by at most ``tol_deg``. The closest match wins and the
    estimate is the sine-domain midpoint of the pair; ``combine="first"``
    returns the first-pass member instead (the second pass then only picks
    the branch).
    """
    pairs = _pairs_within(first, second, tol_deg)
    if not pairs:
        raise NoIntersectionError(f"no common direction between {first.angles_deg} and {second.angles_deg}")
    i, j = pairs[0]
    if any(a != i and b != j for a, b in pairs[1:]):
        raise AmbiguousIntersectionError(
            f"several disjoint matches between {first.angles_deg} and {second.angles_deg}"
        )
    return _combine(first, second, i, j, combine)


def closest_pair_estimate(first: CandidateSet, second: CandidateSet, combine: str = "midpoint") -> float:
    """Estimate from the closest cross pair, without any tolerance check."""
    i, j = min(itertools.product(range(len(first.sines)), range(len(second.sines))),
               key=lambda p: abs(first.sines[p[0]] - second.sines[p[1]]))
    return _combine(first, second, i, j, combine)


def _swept_intervals(config: SystemConfig, s0, sc):
    """Vectorized sine intervals of every branch for designs with endpoint sines ``s0``/``sc``.

    Returns clipped ``(lo, hi)``, the visibility mask and the gaps between
    neighbouring visible branches (``inf`` where a neighbour is hidden).
    """
    r = config.fractional_bandwidth
    bound = alias_bound(config)
    zs = np.arange(bound, -bound - 1, -1)  # descending z -> ascending sine
    step = 2.0 / config.spacing_ratio
    a = s0[:, None] - zs[None, :] * step
    b = sc[:, None] - zs[None, :] * step / (1 + r)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    visible = (hi >= -1) & (lo <= 1)
    lo, hi = np.clip(lo, -1, 1), np.clip(hi, -1, 1)
    both = visible[:, :-1] & visible[:, 1:]
    gaps = np.where(both, lo[:, 1:] - hi[:, :-1], np.inf)
    return lo, hi, visible, gaps


def choose_split_range(config: SystemConfig, aod_range_deg=(-80.0, 80.0), *, step_deg: float = 1.0,
                       margin: float = 0.02, headroom_deg: float = VALIDATION_SHIFTS_DEG[2]) -> tuple[float, float]:
    """Search ``(theta0, thetac)`` whose main and alias sweeps tile the AoD range best.

    Candidates are laid on a ``step_deg`` grid. A pair qualifies when all
    swept intervals are separated by at least ``margin`` in the sine domain,
    every visible interval is at least twice as wide as a ``headroom_deg``
    shift, and re-pointing the sweep by any listed validation shift up to
    ``+-headroom_deg`` keeps it visible and overlap-free, so that a validation pass exists for every user. The
    pair covering the most degrees of ``aod_range_deg`` wins; ties keep the
    first in grid order.
    """
    lo_deg, hi_deg = aod_range_deg
    grid = np.arange(-89.0, 89.0 + step_deg / 2, step_deg)
    t0, tc = np.meshgrid(grid, grid, indexing="ij")
    t0, tc = t0.ravel(), tc.ravel()
    s0, sc = np.sin(np.radians(t0)), np.sin(np.radians(tc))
    r = config.fractional_bandwidth
    room = math.sin(math.radians(headroom_deg))
    keep = (s0 != sc) & (np.abs(s0) + room < 1) & (np.abs(sc) + room / (1 + r) < 1)
    t0, tc, s0, sc = t0[keep], tc[keep], s0[keep], sc[keep]

    lo, hi, visible, gaps = _swept_intervals(config, s0, sc)
    ok = np.all(gaps >= margin, axis=1)
    ok &= np.all(~visible | (hi - lo >= 2 * room), axis=1)
    for delta in (d for d in VALIDATION_SHIFTS_DEG if abs(d) <= headroom_deg):
        shift = math.sin(math.radians(delta))
        *_, shifted_gaps = _swept_intervals(config, s0 + shift, sc + shift / (1 + r))
        ok &= np.all(shifted_gaps > 0, axis=1)

    s_lo, s_hi = math.sin(math.radians(lo_deg)), math.sin(math.radians(hi_deg))
    cov_lo = np.clip(lo, s_lo, s_hi)
    cov_hi = np.clip(hi, s_lo, s_hi)
    covered = np.where(visible, np.degrees(np.arcsin(cov_hi) - np.arcsin(cov_lo)), 0.0).sum(axis=1)
    covered = np.where(ok, covered, -1.0)
    best = int(np.argmax(covered))
    if covered[best] <= 0:
        raise DesignError("no overlap-free sensing range covers the requested AoD range")
    return float(t0[best]), float(tc[best])


@dataclass
class SquintSession:
    design: FrontendDesign
    report: FeedbackReport
    estimate_deg: float | None

    @property
    def blocks_used(self) -> int:
        return 1


@dataclass
class SplitSession:
    design: FrontendDesign
    ranges: SensingRangeSet
    reports: list = field(default_factory=list)
    candidates: list = field(default_factory=list)
    validation_design: FrontendDesign | None = None
    estimate_deg: float | None = None

    @property
    def blocks_used(self) -> int:
        # one OFDM block per feedback report
        return len(self.reports)


def run_squint_session(config: SystemConfig, theta0_deg: float, thetac_deg: float, user: UserTruth,
                       grid: SubcarrierGrid | None = None, noise: NoiseModel | None = None) -> SquintSession:
    design = design_frontend(config, theta0_deg, thetac_deg)
    grid = grid or SubcarrierGrid.for_config(config)
    noise = noise or NoiseModel()
    report = simulate_feedback(design, user, grid, noise.for_pass(0))
    session = SquintSession(design, report, None)
    session.estimate_deg = sense_squint(design, report)
    return session


def run_split_session(config: SystemConfig, theta0_deg: float | None, thetac_deg: float | None,
                      user: UserTruth, grid: SubcarrierGrid | None = None, noise: NoiseModel | None = None,
                      tol_deg: float | None = None, fallback_nearest: bool = False,
                      combine: str = "first") -> SplitSession:
    """Two-pass squint+split sensing; the session keeps every intermediate result.

    ``theta0_deg``/``thetac_deg`` of ``None`` select the range with
    :func:`choose_split_range`. With ``fallback_nearest`` an empty or
    ambiguous intersection falls back to the closest candidate pair.
    The estimate is the first-pass member of the matched pair, which is
    exact for noiseless on-grid users; ``combine="midpoint"`` averages the pair.
    """
    if config.spacing_ratio <= 1:
        raise ValueError("squint+split sensing requires spacing ratio P > 1")
    if theta0_deg is None or thetac_deg is None:
        theta0_deg, thetac_deg = choose_split_range(config)
    grid = grid or SubcarrierGrid.for_config(config)
    noise = noise or NoiseModel()
    design = design_frontend(config, theta0_deg, thetac_deg)
    ranges = split_sensing_ranges(design)
    if not ranges.overlap_free:
        raise DesignError(f"sensing range [{theta0_deg:g}, {thetac_deg:g}] overlaps its alias ranges")
    session = SplitSession(design, ranges)

    first = simulate_feedback(design, user, grid, noise.for_pass(0))
    session.reports.append(first)
    if not first.covered:
        raise NotInRangeError("user located neither in the main range nor in any alias range")
    session.candidates.append(candidate_angles(design, first))

    theta0_t, _ = select_validation_angle(design, session.candidates[0])
    session.validation_design = retune(design, theta0_t)
    second = simulate_feedback(session.validation_design, user, grid, noise.for_pass(1))
    session.reports.append(second)
    if not second.covered:
        raise NotInRangeError("user left the validation ranges")
    session.candidates.append(candidate_angles(session.validation_design, second))

    try:
        session.estimate_deg = intersection_validate(*session.candidates, tol_deg=tol_deg, combine=combine)
    except (NoIntersectionError, AmbiguousIntersectionError):
        if not fallback_nearest:
            raise
        session.estimate_deg = closest_pair_estimate(*session.candidates, combine=combine)
    return session


def sense_squint_split(config: SystemConfig, theta0_deg, thetac_deg, user: UserTruth,
                       grid: SubcarrierGrid | None = None, noise: NoiseModel | None = None,
                       tol_deg: float | None = None) -> float:
    return run_split_session(config, theta0_deg, thetac_deg, user, grid, noise, tol_deg).estimate_deg
