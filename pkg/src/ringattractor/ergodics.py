"""Occupation measures and time averages of switching-diffusion paths.

Every path is treated as piecewise constant between recorded samples: the
sample at ``times[k]`` holds on ``[times[k], times[k+1])``.  Time averages,
windowed integrals and histograms are exact for that interpolant.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .config import RingConfig
from .exceptions import PreconditionError
from .stochastic import SdePath, TestFunction, simulate_sde


def _eval(f, path: SdePath) -> np.ndarray:
    if isinstance(f, TestFunction):
        return f(path.states, path.chain)
    return np.asarray(f(path.states, path.chain), dtype=float)


def _cumulative(times, values):
    """Cumulative integral at each sample time of the held values."""
    return np.concatenate([[0.0], np.cumsum(values[:-1] * np.diff(times))])


def _integral_to(times, values, cum, t):
    t = np.asarray(t, dtype=float)
    k = np.clip(np.searchsorted(times, t, side="right") - 1, 0, times.size - 1)
    return cum[k] + values[k] * (t - times[k])


def window_integral(times, values, a: float, b: float) -> float:
    cum = _cumulative(times, values)
    return float(_integral_to(times, values, cum, b) - _integral_to(times, values, cum, a))


def _durations(times, start):
    """Weight of each sample inside ``[start, times[-1]]``."""
    lo = np.maximum(times[:-1], start)
    w = np.clip(times[1:] - lo, 0.0, None)
    return np.append(w, 0.0)


@dataclass
class EmpiricalMeasure:
    """Time-weighted histogram over (binned coordinates) x (cue state).

    ``weights`` holds unnormalised time; ``mass`` normalises it.  Samples
    outside the bin range are clipped into the edge bins and their weight
    is tracked in ``overflow``.
    """

    edges: list
    coords: tuple
    weights: np.ndarray
    total_weight: float
    burn_in: float
    overflow: float = 0.0
    n_states: int = field(init=False)

    def __post_init__(self):
        self.n_states = self.weights.shape[-1]

    @property
    def mass(self) -> np.ndarray:
        return self.weights / self.total_weight

    def state_mass(self) -> np.ndarray:
        axes = tuple(range(self.weights.ndim - 1))
        return self.mass.sum(axis=axes)

    def marginal(self, coordinate: int, state: int | None = None) -> np.ndarray:
        """1-D marginal of one binned coordinate (optionally for one cue state)."""
        ax = self.coords.index(coordinate)
        m = self.mass if state is None else self.mass[..., state - 1]
        if state is None:
            m = m.sum(axis=-1)
        other = tuple(a for a in range(m.ndim) if a != ax)
        return m.sum(axis=other)

    def centers(self, coordinate: int) -> np.ndarray:
        e = self.edges[self.coords.index(coordinate)]
        return 0.5 * (e[:-1] + e[1:])

    def merge(self, other: "EmpiricalMeasure") -> "EmpiricalMeasure":
        if self.coords != other.coords or any(
            not np.array_equal(a, b) for a, b in zip(self.edges, other.edges)
        ):
            raise ValueError("measures have different binning")
        return EmpiricalMeasure(self.edges, self.coords, self.weights + other.weights,
                                self.total_weight + other.total_weight,
                                self.burn_in, self.overflow + other.overflow)

    def to_csv(self, path, coordinate: int) -> None:
        """Rows ``bin_center, state, mass`` for one coordinate's marginal."""
        centers = self.centers(coordinate)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_center", "state", "mass"])
            for s in range(1, self.n_states + 1):
                for c, m in zip(centers, self.marginal(coordinate, s)):
                    w.writerow([format(c, ".12g"), s, format(m, ".12g")])


def default_edges(cfg: RingConfig, coordinate: int, path: SdePath | None = None,
                  bins: int = 100) -> np.ndarray:
    if cfg.N == 2 and cfg.delta < 1:
        return np.linspace(-0.5, cfg.c / (1 - cfg.delta) + 0.5, bins + 1)
    x = path.states[:, coordinate]
    pad = 0.05 * max(float(np.ptp(x)), 1e-12)
    return np.linspace(x.min() - pad, x.max() + pad, bins + 1)


def empirical_measure(path: SdePath, bins=100, burn_in: float | None = None,
                      coords=None, n_states: int | None = None,
                      ranges=None) -> EmpiricalMeasure:
    """Occupation histogram of ``(x[coords], i)`` after ``burn_in``.

    ``bins`` is an int (with ``ranges``, or auto-ranged from the path) or a
    list of edge arrays.  ``burn_in`` defaults to 10% of the path length.
    """
    N = path.states.shape[1]
    coords = tuple(range(N)) if coords is None else tuple(coords)
    if len(coords) > 3:
        raise ValueError("bin at most three coordinates at once")
    T = path.T
    burn_in = 0.1 * T if burn_in is None else float(burn_in)
    if not T > burn_in:
        raise PreconditionError("empty window after burn-in")
    n_states = n_states or N
    w = _durations(path.times, burn_in)
    X = path.states[:, coords]
    if isinstance(bins, (int, np.integer)):
        edges = []
        for a, k in enumerate(coords):
            if ranges is not None:
                lo, hi = ranges[a]
            else:
                sel = w > 0
                lo, hi = float(X[sel, a].min()), float(X[sel, a].max())
                pad = 0.05 * max(hi - lo, 1e-12)
                lo, hi = lo - pad, hi + pad
            edges.append(np.linspace(lo, hi, int(bins) + 1))
    else:
        edges = [np.asarray(e, dtype=float) for e in bins]
    idx = []
    outside = np.zeros(X.shape[0], dtype=bool)
    for a, e in enumerate(edges):
        j = np.searchsorted(e, X[:, a], side="right") - 1
        outside |= (j < 0) | (j >= e.size - 1)
        idx.append(np.clip(j, 0, e.size - 2))
    shape = tuple(e.size - 1 for e in edges) + (n_states,)
    flat = np.ravel_multi_index(tuple(idx) + (path.chain - 1,), shape)
    weights = np.bincount(flat, weights=w, minlength=int(np.prod(shape))).reshape(shape)
    total = float(w.sum())
    return EmpiricalMeasure(edges, coords, weights, total, burn_in,
                            float(w[outside].sum()) / total)


def time_average(f, path: SdePath, burn_in: float = 0.0, batches: int = 20):
    """Time average of ``f`` over ``[burn_in, T]`` and its batch-means error."""
    T = path.T
    if not T > burn_in:
        raise PreconditionError("empty window after burn-in")
    vals = _eval(f, path)
    cum = _cumulative(path.times, vals)
    edges = np.linspace(burn_in, T, batches + 1)
    I = _integral_to(path.times, vals, cum, edges)
    means = np.diff(I) / np.diff(edges)
    mean = float((I[-1] - I[0]) / (T - burn_in))
    se = float(means.std(ddof=1) / np.sqrt(batches))
    return mean, se


def invariance_residual(path: SdePath, f, t_shift: float, T: float) -> float:
    """``|avg_[t_shift, T + t_shift] f - avg_[0, T] f|`` along the path."""
    if path.T < T + t_shift * (1 - 1e-12):
        raise PreconditionError("path shorter than T + t_shift")
    vals = _eval(f, path)
    cum = _cumulative(path.times, vals)
    a, b, c, d = _integral_to(path.times, vals, cum, [0.0, T, t_shift, T + t_shift])
    return float(abs((d - c) - (b - a)) / T)


@dataclass
class AgreementReport:
    mean_a: float
    stderr_a: float
    mean_b: float
    stderr_b: float
    z: float
    agree: bool


def ergodic_agreement(cfg: RingConfig, f, z0_a, z0_b, T: float, seeds=(1, 2), *,
                      dt: float = 1e-3, burn_in: float | None = None,
                      record_every: int = 10) -> AgreementReport:
    """Time averages from two starting points agree within 3 combined standard errors."""
    burn_in = 0.1 * T if burn_in is None else burn_in
    res = []
    for z0, seed in ((z0_a, seeds[0]), (z0_b, seeds[1])):
        path = simulate_sde(z0, T, dt, cfg, seed, record_every=record_every)
        res.append(time_average(f, path, burn_in))
    (ma, sa), (mb, sb) = res
    se = float(np.hypot(sa, sb))
    diff = ma - mb
    z = 0.0 if se == 0 and diff == 0 else (np.inf if se == 0 else diff / se)
    agree = abs(diff) <= 3 * se if se > 0 else abs(diff) <= 1e-9 * max(1.0, abs(ma))
    return AgreementReport(ma, sa, mb, sb, float(z), bool(agree))


@dataclass
class ModeReport:
    locations: np.ndarray
    masses: np.ndarray
    separation: float

    def to_json(self, path=None):
        doc = {"modes": [{"x": float(x), "mass": float(m)}
                         for x, m in zip(self.locations, self.masses)],
               "separation": float(self.separation)}
        text = json.dumps(doc, indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return doc


def detect_modes(measure: EmpiricalMeasure, coordinate: int, *, window: int = 3,
                 threshold: float = 0.05, prominence: float | None = None) -> ModeReport:
    """Modes of a 1-D marginal.

    The marginal is smoothed with a centred moving average of ``window``
    bins; modes are strict local maxima above ``threshold`` times the peak
    whose prominence also exceeds that fraction (``prominence`` overrides).
    Each mode's mass is the marginal mass of its basin, bounded by the
    lowest points between neighbouring modes.  ``separation`` is one minus
    the ratio of the deepest valley between adjacent modes to the smaller
    of the two peaks (0 for a single mode).
    """
    marg = measure.marginal(coordinate)
    centers = measure.centers(coordinate)
    kernel = np.ones(window) / window
    padded = np.pad(marg, window // 2, mode="constant")
    smooth = np.convolve(padded, kernel, mode="valid")
    peak = smooth.max()
    prom = threshold if prominence is None else prominence
    peaks, _ = find_peaks(np.concatenate([[0.0], smooth, [0.0]]),
                          height=threshold * peak, prominence=prom * peak)
    peaks = peaks - 1
    if peaks.size == 0:
        return ModeReport(np.array([]), np.array([]), 0.0)
    bounds = [0]
    sep = 1.0
    for a, b in zip(peaks[:-1], peaks[1:]):
        valley = a + int(np.argmin(smooth[a:b + 1]))
        bounds.append(valley)
        sep = min(sep, 1.0 - smooth[valley] / min(smooth[a], smooth[b]))
    bounds.append(marg.size)
    masses = np.array([marg[lo:hi].sum() for lo, hi in zip(bounds[:-1], bounds[1:])])
    return ModeReport(centers[peaks], masses, float(sep) if peaks.size > 1 else 0.0)
