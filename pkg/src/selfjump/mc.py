"""Monte Carlo estimation of occupation-measure decay rates.

The probability that the occupation measure L_t sits in a fixed ball decays
exponentially, and -(1/t) log P(L_t in ball) should approach the variational
rate minimized over the ball.  This module estimates those probabilities by
simulation, wraps them in Wilson score intervals, and compares the implied
decay rates against a solver value.

Common random numbers: each path is simulated once out to the largest
requested time and its occupation is read off at every earlier time, so the
curve points share paths and differences across times are not resampling
noise.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import math
import numpy as np

from . import errors
from .core import as_simplex, l1_distance
from .sim import _SAMPLERS

Z_95 = 1.959963984540054


@dataclass(frozen=True)
class BallTarget:
    """An l1 ball of occupation measures, optionally windowed in flux.

    A point (L, R) hits the target when l1_distance(L, center) <= radius
    and, if a flux window (low, high) is set, every off-diagonal R entry
    lies inside its interval.
    """

    center: np.ndarray
    radius: float
    flux_window: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", as_simplex(self.center))
        if not 0.0 < self.radius <= 2.0:
            raise errors.OutOfRange(f"radius must lie in (0, 2], got {self.radius}")
        if self.flux_window is not None:
            lo = np.asarray(self.flux_window[0], dtype=float)
            hi = np.asarray(self.flux_window[1], dtype=float)
            d = self.center.size
            if lo.shape != (d, d) or hi.shape != (d, d):
                raise errors.WrongDimension(
                    f"flux window matrices must be {d}x{d}")
            if np.any(lo[~np.eye(d, dtype=bool)] > hi[~np.eye(d, dtype=bool)]):
                raise errors.OutOfRange("flux window has low > high on an edge")
            object.__setattr__(self, "flux_window", (lo, hi))

    def distance(self, occupation):
        return l1_distance(occupation, self.center)

    def contains(self, occupation):
        return self.distance(occupation) <= self.radius

    def hit(self, occupation, flux=None):
        if not self.contains(occupation):
            return False
        if self.flux_window is None:
            return True
        if flux is None:
            raise ValueError("target has a flux window but no flux was given")
        lo, hi = self.flux_window
        off = ~np.eye(self.center.size, dtype=bool)
        return bool(np.all((flux[off] >= lo[off]) & (flux[off] <= hi[off])))


@dataclass(frozen=True)
class DecayPoint:
    """One point of the decay curve.

    neg_log_rate is -(1/t) log p_hat; when no path hit the ball the point is
    censored and neg_log_rate carries the detection floor -(1/t) log (1/n),
    a lower bound on the observable rate.
    """

    t: float
    p_hat: float
    ci_low: float
    ci_high: float
    n: int
    censored: bool
    neg_log_rate: float


def wilson_interval(hits, n, z=Z_95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise errors.ZeroSamples("need at least one sample")
    p = hits / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
    # center - half is exactly 0 at p = 0 (and center + half exactly 1 at
    # p = 1) on paper; clamp the float dust so lo <= p <= hi always holds
    lo = 0.0 if hits == 0 else max(0.0, center - half)
    hi = 1.0 if hits == n else min(1.0, center + half)
    return lo, hi


def _decay_point(t, hits, n, z):
    lo, hi = wilson_interval(hits, n, z)
    if hits == 0:
        return DecayPoint(t, 0.0, lo, hi, n, True, -math.log(1.0 / n) / t)
    return DecayPoint(t, hits / n, lo, hi, n, False, -math.log(hits / n) / t)


def _count_hits(field, x0, times, target, seed, sampler, lo, hi):
    simulate = _SAMPLERS[sampler]
    horizon = times[-1]
    windowed = target.flux_window is not None
    hits = np.zeros(len(times), dtype=np.int64)
    for i in range(lo, hi):
        traj = simulate(field, x0, horizon, seed, path_index=i)
        for k, t in enumerate(times):
            flux = traj.flux_at(t) if windowed else None
            if target.hit(traj.occupation_at(t), flux):
                hits[k] += 1
    return hits


def decay_curve(field, x0, target, times, n_paths, seed=0, sampler="thinning",
                z=Z_95, threads=1):
    """Estimate P((L_t, R_t) hits target) for each time, one simulated path set.

    Returns a list of DecayPoint sorted by time.  Paths are independent
    streams keyed by (seed, path index), so results do not depend on thread
    scheduling and grow consistently with n_paths.
    """
    if sampler not in _SAMPLERS:
        raise errors.ConfigError(f"unknown sampler {sampler!r}", location="sampler")
    n_paths = int(n_paths)
    if n_paths <= 0:
        raise errors.ZeroSamples("need at least one path")
    times = sorted(float(t) for t in times)
    if not times or times[0] <= 0.0:
        raise errors.OutOfRange("times must be positive")
    if threads <= 1 or n_paths < 2 * threads:
        hits = _count_hits(field, x0, times, target, seed, sampler, 0, n_paths)
    else:
        bounds = np.linspace(0, n_paths, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = pool.map(
                lambda se: _count_hits(field, x0, times, target, seed, sampler, *se),
                zip(bounds[:-1], bounds[1:]))
            hits = sum(parts)
    return [_decay_point(t, int(h), n_paths, z) for t, h in zip(times, hits)]


def estimate_ball_probability(field, x0, target, t, n_paths, seed=0,
                              sampler="thinning", z=Z_95, threads=1):
    """Single-time estimate; see decay_curve."""
    if n_paths == 0:
        raise errors.ZeroSamples("need at least one path")
    return decay_curve(field, x0, target, [t], n_paths, seed=seed,
                       sampler=sampler, z=z, threads=threads)[0]


@dataclass(frozen=True)
class DecayComparison:
    """Decay curve against a variational rate.

    gaps lists neg_log_rate - rate for the uncensored points in time order;
    trend says whether the absolute gap shrinks from first to last of those
    ("toward"), grows ("away"), or neither ("flat").  With fewer than two
    uncensored points the comparison is inconclusive.
    """

    rate: float
    gaps: list
    trend: str
    n_censored: int
    inconclusive: bool


def compare_to_rate(points, rate):
    live = [p for p in points if not p.censored]
    gaps = [p.neg_log_rate - rate for p in live]
    n_cens = sum(1 for p in points if p.censored)
    if len(gaps) < 2:
        return DecayComparison(rate, gaps, "flat", n_cens, True)
    first, last = abs(gaps[0]), abs(gaps[-1])
    if last < first * (1.0 - 1e-9):
        trend = "toward"
    elif last > first * (1.0 + 1e-9):
        trend = "away"
    else:
        trend = "flat"
    return DecayComparison(rate, gaps, trend, n_cens, False)


def write_decay_csv(points, fh):
    """Rows t,p_hat,ci_low,ci_high,n,censored,neg_log_rate."""
    w = csv.writer(fh)
    w.writerow(["t", "p_hat", "ci_low", "ci_high", "n", "censored", "neg_log_rate"])
    for p in points:
        w.writerow([repr(float(p.t)), repr(float(p.p_hat)), repr(float(p.ci_low)),
                    repr(float(p.ci_high)), p.n, int(p.censored),
                    repr(float(p.neg_log_rate))])
