"""Monte-Carlo RMSE harness for the two sensing methods.

Every trial draws its users and noise from streams keyed by
``(seed, trial, user[, pass])`` only, so results do not depend on execution
order, on the number of workers, or on which SNR point is being evaluated
(the same users and unit-variance noise draws are reused across the SNR
sweep).
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, SensingError
from .sensing import (
    NoiseModel,
    SubcarrierGrid,
    choose_split_range,
    run_split_session,
    run_squint_session,
)
from .wideband import SystemConfig, UserTruth

METHODS = ("squint-only", "squint-split")
UNCOVERED_POLICIES = ("exclude", "midpoint")
CSV_COLUMNS = ("method", "M", "N", "P", "snr_db", "aod_lo", "aod_hi", "range_lo", "range_hi",
               "trials", "rmse_deg", "coverage_rate", "blocks")


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment: a method, an AoD distribution and a grid of (SNR, N, M) points.

    ``sensing_range_deg`` of ``None`` (squint-split only) lets the harness
    pick an overlap-free range tiling ``aod_range_deg``.
    """

    base: SystemConfig
    method: str
    aod_range_deg: tuple[float, float]
    sensing_range_deg: tuple[float, float] | None
    snr_db_list: tuple[float, ...]
    n_list: tuple[int, ...]
    m_list: tuple[int, ...]
    trials: int = 500
    seed: int = 0
    uncovered_policy: str = "exclude"
    fallback_nearest: bool = True

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        lo, hi = self.aod_range_deg
        if not -90 < lo <= hi < 90:
            raise ConfigError(f"aod_range_deg must lie inside (-90, 90) with lo <= hi, got {self.aod_range_deg}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.uncovered_policy not in UNCOVERED_POLICIES:
            raise ConfigError(f"uncovered_policy must be one of {UNCOVERED_POLICIES}")
        if not (self.snr_db_list and self.n_list and self.m_list):
            raise ConfigError("snr_db_list, n_list and m_list must be nonempty")
        if self.method == "squint-split" and self.base.spacing_ratio <= 1:
            raise ConfigError("squint-split needs spacing ratio P > 1")
        if self.method == "squint-only":
            if self.base.spacing_ratio != 1:
                raise ConfigError("squint-only needs half-wavelength spacing (P = 1)")
            if self.sensing_range_deg is None:
                raise ConfigError("squint-only needs an explicit sensing_range_deg")
        if self.sensing_range_deg is not None:
            t0, tc = self.sensing_range_deg
            if not (-90 < t0 < 90 and -90 < tc < 90) or t0 == tc:
                raise ConfigError(f"invalid sensing_range_deg {self.sensing_range_deg}")
        for m in self.m_list:
            for n in self.n_list:
                try:
                    replace(self.base, antenna_count=m, subcarrier_count=n)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class TrialResult:
    truth_deg: float
    estimate_deg: float | None
    covered: bool
    blocks_used: int


@dataclass(frozen=True)
class RMSEStat:
    rmse_deg: float
    coverage_rate: float
    snr_db: float | None = None
    n: int | None = None
    m: int | None = None
    method: str = ""
    p: float | None = None
    aod_range_deg: tuple = ()
    sensing_range_deg: tuple = ()
    trials: int = 0
    blocks: int = 0


def snr_to_noise(config: SystemConfig, snr_db: float) -> float:
    """Noise variance giving ``SNR = ||a||^2 / sigma^2`` with ``||a||^2 = M``."""
    return config.antenna_count / 10 ** (snr_db / 10)


def rmse(trials: Sequence[Sequence[TrialResult]]) -> RMSEStat:
    """Root mean square angle error over trials, averaging within each trial first.

    Results without an estimate are left out of the error; ``coverage_rate``
    is the fraction of users that were covered.
    """
    users = [r for trial in trials for r in trial]
    if not users:
        raise ValueError("RMSE undefined for empty input")
    per_trial = []
    for trial in trials:
        errs = [(r.estimate_deg - r.truth_deg) ** 2 for r in trial if r.estimate_deg is not None]
        if errs:
            per_trial.append(sum(errs) / len(errs))
    value = math.sqrt(sum(per_trial) / len(per_trial)) if per_trial else math.nan
    return RMSEStat(rmse_deg=value, coverage_rate=sum(r.covered for r in users) / len(users))


def time_overhead(method: str, q_directions: int | None = None) -> int:
    """OFDM blocks consumed per sensing session."""
    if method == "squint-only":
        return 1
    if method == "squint-split":
        return 2
    if method == "exhaustive":
        if q_directions is None or q_directions < 1:
            raise ValueError("exhaustive sweep needs q_directions >= 1")
        return int(q_directions)
    raise ValueError(f"unknown method {method!r}")


def draw_user(seed: int, trial: int, user: int, aod_range_deg) -> UserTruth:
    rng = np.random.default_rng([seed, trial, user])
    aod = rng.uniform(*aod_range_deg)
    phase = rng.uniform(0, 2 * np.pi)
    return UserTruth(float(aod), complex(np.exp(1j * phase)))


@dataclass(frozen=True)
class _Point:
    sc: ScenarioConfig
    config: SystemConfig
    sensing_range: tuple[float, float]
    variance: float


def _run_trial(point: _Point, trial: int) -> list[TrialResult]:
    sc, cfg = point.sc, point.config
    grid = SubcarrierGrid.for_config(cfg)
    t0, tc = point.sensing_range
    out = []
    for k in range(cfg.rf_chains):
        user = draw_user(sc.seed, trial, k, sc.aod_range_deg)
        noise = NoiseModel(point.variance, (sc.seed, trial, k))
        blocks = 1
        try:
            if sc.method == "squint-only":
                session = run_squint_session(cfg, t0, tc, user, grid, noise)
            else:
                session = run_split_session(cfg, t0, tc, user, grid, noise,
                                            fallback_nearest=sc.fallback_nearest)
            out.append(TrialResult(user.aod_deg, session.estimate_deg, True, session.blocks_used))
            continue
        except SensingError:
            # uncovered in pass one, or no usable validation pass
            if sc.method == "squint-split":
                blocks = 2
        estimate = (t0 + tc) / 2 if sc.uncovered_policy == "midpoint" else None
        out.append(TrialResult(user.aod_deg, estimate, False, blocks))
    return out


def _trial_worker(args):
    point, trial = args
    return _run_trial(point, trial)


def scenario_points(sc: ScenarioConfig):
    """Yield ``(m, n, snr_db)`` in output order."""
    for m in sc.m_list:
        for n in sc.n_list:
            for snr in sc.snr_db_list:
                yield m, n, snr


def resolve_sensing_range(sc: ScenarioConfig, config: SystemConfig) -> tuple[float, float]:
    if sc.sensing_range_deg is not None:
        return tuple(float(v) for v in sc.sensing_range_deg)
    return choose_split_range(config, sc.aod_range_deg)


def run_scenario(sc: ScenarioConfig, workers: int = 1,
                 progress: Callable[[str], None] | None = None) -> list[RMSEStat]:
    """Run ``sc.trials`` trials at every (M, N, SNR) point and aggregate RMSE."""
    sc.validate()
    table = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for m, n, snr in scenario_points(sc):
            cfg = replace(sc.base, antenna_count=m, subcarrier_count=n)
            rng_deg = resolve_sensing_range(sc, cfg)
            variance = 0.0 if math.isinf(snr) and snr > 0 else snr_to_noise(cfg, snr)
            point = _Point(sc, cfg, rng_deg, variance)
            jobs = [(point, t) for t in range(sc.trials)]
            if pool is None:
                trials = [_trial_worker(j) for j in jobs]
            else:
                trials = list(pool.map(_trial_worker, jobs, chunksize=max(1, sc.trials // (4 * workers))))
            stat = rmse(trials)
            table.append(replace(
                stat, snr_db=float(snr), n=n, m=m, method=sc.method, p=cfg.spacing_ratio,
                aod_range_deg=tuple(sc.aod_range_deg), sensing_range_deg=rng_deg, trials=sc.trials,
                blocks=time_overhead(sc.method),
            ))
            if progress:
                progress(f"{sc.method} M={m} N={n} SNR={snr:g} dB: rmse={stat.rmse_deg:.6g} deg "
                         f"coverage={stat.coverage_rate:.3f}")
    finally:
        if pool is not None:
            pool.shutdown()
    return table


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def format_results(table: Sequence[RMSEStat]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for s in table:
        writer.writerow([_fmt(v) for v in (
            s.method, s.m, s.n, float(s.p), float(s.snr_db), float(s.aod_range_deg[0]), float(s.aod_range_deg[1]),
            float(s.sensing_range_deg[0]), float(s.sensing_range_deg[1]), s.trials, float(s.rmse_deg),
            float(s.coverage_rate), s.blocks,
        )])
    return buf.getvalue()


def emit_results(table: Sequence[RMSEStat], destination) -> None:
    """Write the result table as CSV to a path or a text stream."""
    text = format_results(table)
    if hasattr(destination, "write"):
        destination.write(text)
        return
    path = os.fspath(destination)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror or exc}") from exc
