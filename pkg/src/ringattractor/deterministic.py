"""Deterministic ring dynamics: exact piecewise-linear flow and its analysis.

Inside a region where the set of units with positive input is fixed, the
ReLU acts linearly and the flow is affine, ``r' = B r + a``.  The exact
integrator propagates with the matrix exponential of the augmented system
``[[B, a], [0, 0]]`` and locates the next region change by sampling the
input signs and bisecting.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm

from .config import RingConfig
from .exceptions import DivergenceError, NumericalError, PreconditionError
from .model import arc_sums, bitstring, drift, relu

EVENT_TOL = 1e-12
MAX_EVENTS = 10**6
MAX_NORM = 1e12
_BATCH = 64


@dataclass(frozen=True, eq=False)
class ActiveRegion:
    """Affine flow ``r' = B r + affine`` valid while ``mask`` stays the active set."""

    mask: np.ndarray
    B: np.ndarray
    affine: np.ndarray
    A: np.ndarray
    V: np.ndarray
    tau: float

    @property
    def active(self) -> frozenset:
        return frozenset(np.flatnonzero(self.mask).tolist())

    @property
    def N(self) -> int:
        return self.mask.size

    def augmented(self) -> np.ndarray:
        N = self.N
        M = np.zeros((N + 1, N + 1))
        M[:N, :N] = self.B
        M[:N, N] = self.affine
        return M

    def signed_inputs(self) -> np.ndarray:
        """Matrix mapping ``[r, 1]`` to ``s_i * (A r + V)_i``, with ``s = ±1`` by activity."""
        s = np.where(self.mask, 1.0, -1.0)
        return s[:, None] * np.hstack([self.A, self.V[:, None]])


def make_region(mask, A, V, tau: float = 1.0) -> ActiveRegion:
    mask = np.asarray(mask, dtype=bool).copy()
    N = mask.size
    D = mask.astype(float)
    B = (-np.eye(N) + D[:, None] * A) / tau
    affine = D * V / tau
    return ActiveRegion(mask, B, affine, np.asarray(A), np.asarray(V, dtype=float), tau)


def forward_mask(r, A, V, tau: float = 1.0, tol: float = EVENT_TOL) -> np.ndarray:
    """Active set the flow enters from ``r``.

    Units strictly away from their threshold use the sign of their input;
    units within ``tol`` of it use the sign of the input's time derivative
    (well defined because the vector field is continuous).
    """
    r = np.asarray(r, dtype=float)
    g = A @ r + V
    scale = tol * max(1.0, float(np.max(np.abs(r))), float(np.max(np.abs(V))))
    mask = g > 0
    near = np.abs(g) <= scale
    if near.any():
        gdot = A @ drift(r, V, A, tau)
        mask[near] = gdot[near] > scale
    return mask


def region_at(r, cfg: RingConfig, V=None) -> ActiveRegion:
    A = cfg.connectivity
    V = cfg.V if V is None else np.asarray(V, dtype=float)
    return make_region(forward_mask(r, A, V, cfg.tau), A, V, cfg.tau)


def step_exact(region: ActiveRegion, r, h: float) -> np.ndarray:
    """Advance ``r`` by ``h`` under the region's affine flow.

    Computes ``exp(B h) r + (int_0^h exp(B s) ds) affine`` in one matrix
    exponential of the augmented ``(N+1)``-dimensional system.
    """
    r = np.asarray(r, dtype=float)
    if h == 0:
        return r.copy()
    y = expm(region.augmented() * h) @ np.append(r, 1.0)
    if not np.all(np.isfinite(y)):
        raise NumericalError(f"matrix exponential overflow after h={h:g}", time=h)
    return y[:-1]


class Crossing(NamedTuple):
    t: float
    index: int
    state: np.ndarray


def _default_sample_dt(region: ActiveRegion) -> float:
    return 0.05 / max(1.0, float(np.linalg.norm(region.B, 2)))


def _scan(region, r, h_max, *, strict, sample_dt=None, max_norm=MAX_NORM,
          t_offset=0.0):
    """Earliest sign change of the region's inputs on ``(0, h_max]``."""
    N = region.N
    y0 = np.append(np.asarray(r, dtype=float), 1.0)
    SG = region.signed_inputs()
    if strict:
        s0 = SG @ y0
        if np.any(s0 <= 0):
            bad = int(np.flatnonzero(s0 <= 0)[0])
            raise PreconditionError(
                f"state is not strictly inside its region (unit {bad})"
            )
    if h_max <= 0:
        return None
    h_s = sample_dt or _default_sample_dt(region)
    n = max(1, math.ceil(h_max / h_s))
    h_s = h_max / n
    M = region.augmented()
    P = expm(M * h_s)
    # stacked powers P^1..P^m, so a batch of samples costs one product
    m = min(_BATCH, n)
    powers = np.empty((m, N + 1, N + 1))
    powers[0] = P
    for k in range(1, m):
        powers[k] = P @ powers[k - 1]

    def exact(t):
        return expm(M * t) @ y0

    v_max = float(np.max(np.abs(region.V)))
    y = y0
    done = 0
    while done < n:
        m_here = min(m, n - done)
        Y = powers[:m_here] @ y  # (m_here, N+1)
        X = Y[:, :N]
        norms = np.max(np.abs(X), axis=1)
        bad_norm = ~np.isfinite(norms) | (norms > max_norm)
        # inputs within rounding of the threshold do not count as crossings
        eps = EVENT_TOL * np.maximum(1.0, np.maximum(norms, v_max))
        viol = (Y @ SG.T) < -eps[:, None]
        hit_v = np.flatnonzero(viol.any(axis=1))
        hit_n = np.flatnonzero(bad_norm)
        kv = hit_v[0] if hit_v.size else m_here
        kn = hit_n[0] if hit_n.size else m_here
        if kn < m_here and kn <= kv:
            lo, hi = (done + kn) * h_s, (done + kn + 1) * h_s
            while hi - lo > 1e-9 * max(1.0, hi):
                mid = 0.5 * (lo + hi)
                x_mid = exact(mid)[:N]
                if np.all(np.isfinite(x_mid)) and np.max(np.abs(x_mid)) <= max_norm:
                    lo = mid
                else:
                    hi = mid
            x_hi = exact(hi)[:N]
            raise DivergenceError(t_offset + hi, x_hi)
        if kv < m_here:
            candidates = np.flatnonzero(viol[kv])
            lo, hi = (done + kv) * h_s, (done + kv + 1) * h_s
            if kv == m_here - 1 and done + kv + 1 == n:
                hi = h_max
            while hi - lo > EVENT_TOL:
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                s_mid = SG[candidates] @ exact(mid)
                if np.any(s_mid < 0):
                    hi = mid
                else:
                    lo = mid
            y_hi = exact(hi)
            s_hi = SG[candidates] @ y_hi
            crossed = candidates[s_hi < 0]
            index = int(crossed.min()) if crossed.size else int(candidates.min())
            return Crossing(hi, index, y_hi[:N])
        y = Y[-1]
        done += m_here
    return None


def detect_crossing(region: ActiveRegion, r, h_max: float, *, sample_dt=None):
    """First time in ``(0, h_max]`` at which some unit's input changes sign.

    Returns ``(t_star, index)`` or ``None``.  ``t_star`` is the right end of a
    bracket of width at most ``1e-12``; simultaneous crossings inside the
    bracket resolve to the smallest index.  ``r`` must lie strictly inside
    ``region`` (no input exactly at its threshold).
    """
    hit = _scan(region, r, h_max, strict=True, sample_dt=sample_dt)
    return None if hit is None else (hit.t, hit.index)


@dataclass(frozen=True)
class Event:
    time: float
    old: frozenset
    new: frozenset


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    active: np.ndarray
    events: list = field(default_factory=list)
    method: str = "exact_event"

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def moments(self):
        m = compute_moments(self.states)
        return m.m_x, m.m_y

    def to_csv(self, path) -> None:
        N = self.states.shape[1]
        m_x, m_y = self.moments()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"r{j}" for j in range(N)] + ["m_x", "m_y", "active_set"])
            for t, x, mx, my, a in zip(self.times, self.states, m_x, m_y, self.active):
                w.writerow([_fmt(t)] + [_fmt(v) for v in x]
                           + [_fmt(mx), _fmt(my), bitstring(a, N)])

    def events_to_csv(self, path) -> None:
        N = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "old", "new"])
            for ev in self.events:
                w.writerow([_fmt(ev.time), bitstring(sorted(ev.old), N),
                            bitstring(sorted(ev.new), N)])


def _fmt(v) -> str:
    return format(float(v), ".12g")


def _output_grid(T, t_eval):
    if t_eval is None:
        t_eval = np.linspace(0.0, T, 201)
    t_eval = np.asarray(t_eval, dtype=float)
    if np.any(t_eval < 0) or np.any(t_eval > T):
        raise ValueError("output times must lie in [0, T]")
    return np.unique(np.concatenate([[0.0], t_eval, [T]]))


def integrate(r0, T: float, cfg: RingConfig, method: str = "exact_event", *,
              h: float | None = None, t_eval=None, V=None,
              max_events: int = MAX_EVENTS, max_norm: float = MAX_NORM,
              sample_dt: float | None = None) -> Trajectory:
    """Integrate the deterministic network from ``r0`` over ``[0, T]``.

    Parameters
    ----------
    r0 : array_like, shape (N,)
        Initial activity.
    T : float
        Horizon.
    cfg : RingConfig
        Model parameters; ``cfg.V`` is the input unless ``V`` is given.
    method : {"exact_event", "rk4", "euler"}
        ``exact_event`` propagates region by region with matrix exponentials
        and records every active-set change; the fixed-step methods need
        ``h`` and record no events.
    t_eval : array_like, optional
        Output times (default: 201 evenly spaced points).  ``0`` and ``T``
        are always included; event times are added for ``exact_event``.

    Raises
    ------
    DivergenceError
        When the sup norm exceeds ``max_norm``; carries the escape time.
    """
    r0 = np.asarray(r0, dtype=float)
    A = cfg.connectivity
    V = cfg.V if V is None else np.asarray(V, dtype=float)
    if r0.shape != (cfg.N,) or not np.all(np.isfinite(r0)):
        raise ValueError(f"r0 must be a finite vector of length {cfg.N}")
    if not T > 0:
        raise ValueError("T must be positive")
    out = _output_grid(T, t_eval)
    if method == "exact_event":
        return _integrate_exact(r0, T, A, V, cfg.tau, out, max_events, max_norm, sample_dt)
    if method in ("rk4", "euler"):
        if h is None or not h > 0:
            raise ValueError(f"method {method!r} needs a positive step h")
        return _integrate_fixed(r0, A, V, cfg.tau, out, method, h, max_norm)
    raise ValueError(f"unknown method {method!r}")


def _integrate_exact(r0, T, A, V, tau, out, max_events, max_norm, sample_dt):
    times, states, masks, events = [0.0], [r0.copy()], [], []
    x = r0.copy()
    t = 0.0
    region = make_region(forward_mask(x, A, V, tau), A, V, tau)
    masks.append(region.mask.copy())
    p = 1
    while True:
        hit = _scan(region, x, T - t, strict=False, sample_dt=sample_dt,
                    max_norm=max_norm, t_offset=t)
        seg_end = T if hit is None else t + hit.t
        while p < out.size and (out[p] < seg_end or (hit is None and out[p] <= T)):
            times.append(out[p])
            states.append(step_exact(region, x, out[p] - t))
            masks.append(region.mask.copy())
            p += 1
        if hit is None:
            break
        x = hit.state
        t = seg_end
        mask = forward_mask(x, A, V, tau)
        g = A[hit.index] @ x + V[hit.index]
        mask[hit.index] = g > 0
        events.append(Event(t, region.active, frozenset(np.flatnonzero(mask).tolist())))
        if len(events) > max_events:
            raise NumericalError(
                f"more than {max_events} region changes (chattering?)", time=t
            )
        region = make_region(mask, A, V, tau)
        if p < out.size and abs(out[p] - t) <= 1e-15 * max(1.0, t):
            p += 1
        times.append(t)
        states.append(x.copy())
        masks.append(mask.copy())
        if t >= T:
            break
    return Trajectory(np.array(times), np.array(states), np.array(masks), events,
                      "exact_event")


def _integrate_fixed(r0, A, V, tau, out, method, h, max_norm):
    f = lambda x: drift(x, V, A, tau)  # noqa: E731
    x = r0.copy()
    states = [x.copy()]
    for t0, t1 in zip(out[:-1], out[1:]):
        n = max(1, math.ceil((t1 - t0) / h - 1e-9))
        dt = (t1 - t0) / n
        for k in range(n):
            if method == "euler":
                x = x + dt * f(x)
            else:
                k1 = f(x)
                k2 = f(x + 0.5 * dt * k1)
                k3 = f(x + 0.5 * dt * k2)
                k4 = f(x + dt * k3)
                x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > max_norm:
                raise DivergenceError(t0 + (k + 1) * dt, x)
        states.append(x.copy())
    states = np.array(states)
    masks = (states @ A.T + V) > 0
    return Trajectory(out.copy(), states, masks, [], method)


# ---------------------------------------------------------------- N = 2

@dataclass(frozen=True, eq=False)
class Equilibrium:
    point: np.ndarray
    kind: str
    region: frozenset
    eigenvalues: np.ndarray


def equilibria_n2(delta: float, V1: float) -> list:
    """All equilibria of the two-unit network with input ``(V1, 0)``.

    Solves the linear fixed-point equation in each of the four activity
    patterns, keeps the solutions that lie strictly inside their own
    pattern, and classifies them by the eigenvalues of the pattern's
    Jacobian.  A stable point is ``globally_stable`` only when it is the
    sole equilibrium and ``delta < 1/2``.
    """
    if not (np.isfinite(delta) and delta > 0):
        raise PreconditionError("delta must be positive")
    if delta in (0.5, 1.0):
        raise PreconditionError(f"delta={delta} is a bifurcation value; not classified")
    if not V1 > 0:
        raise PreconditionError("V1 must be positive")
    A = delta * np.array([[1.0, -1.0], [-1.0, 1.0]])
    V = np.array([V1, 0.0])
    found = []
    for pattern in ((False, False), (True, False), (False, True), (True, True)):
        D = np.diag(np.array(pattern, dtype=float))
        J = -np.eye(2) + D @ A
        try:
            x = np.linalg.solve(-J, D @ V)
        except np.linalg.LinAlgError:
            continue
        g = A @ x + V
        inside = np.where(pattern, g > 0, g < 0)
        if not inside.all():
            continue
        eig = np.linalg.eigvals(J)
        re = eig.real
        if np.all(re < 0):
            kind = "stable"
        elif np.all(re > 0):
            kind = "unstable"
        else:
            kind = "saddle"
        found.append((x, kind, frozenset(np.flatnonzero(pattern).tolist()), eig))
    out = []
    for x, kind, region, eig in found:
        if kind == "stable":
            kind = "globally_stable" if (len(found) == 1 and delta < 0.5) else "locally_stable"
        out.append(Equilibrium(x, kind, region, eig))
    return out


# ---------------------------------------------------------------- moments

class BumpMoments(NamedTuple):
    m_x: np.ndarray
    m_y: np.ndarray
    R_amp: np.ndarray
    phi: np.ndarray


def compute_moments(r) -> BumpMoments:
    """Cosine/sine moments of activity and their polar form.

    Works on a single state ``(N,)`` or a stack ``(n, N)``; ``phi`` lies in
    ``(-pi, pi]`` and is 0 where the amplitude vanishes.
    """
    r = np.asarray(r, dtype=float)
    N = r.shape[-1]
    theta = np.arange(N) * (2.0 * np.pi / N)
    m_x = r @ np.cos(theta)
    m_y = r @ np.sin(theta)
    R_amp = np.hypot(m_x, m_y)
    phi = np.arctan2(m_y, m_x)
    phi = np.where(phi <= -np.pi, phi + 2 * np.pi, phi)
    phi = np.where(R_amp == 0, 0.0, phi)
    if r.ndim == 1:
        return BumpMoments(float(m_x), float(m_y), float(R_amp), float(phi))
    return BumpMoments(m_x, m_y, R_amp, phi)


def moment_ode_residual(r, cfg: RingConfig):
    """Residual of ``m_y' = -m_y (1 - delta * sum_{j in A, j>0} sin^2 theta_j)``.

    Returns ``(residual, symmetric)``; the identity only holds when the
    active set is invariant under ``j -> N - j``, reported by ``symmetric``.
    """
    r = np.asarray(r, dtype=float)
    A, V = cfg.connectivity, cfg.V
    theta = cfg.theta
    g = A @ r + V
    mask = g > 0
    mirror = mask[(-np.arange(cfg.N)) % cfg.N]
    sym = bool(np.array_equal(mask, mirror))
    m_y = float(r @ np.sin(theta))
    my_dot = float(drift(r, V, A, cfg.tau) @ np.sin(theta))
    s2 = float(np.sum(np.sin(theta[1:][mask[1:]]) ** 2))
    predicted = -m_y * (1.0 - cfg.delta * s2) / cfg.tau
    return abs(my_dot - predicted), sym


@dataclass(frozen=True, eq=False)
class BumpProfile:
    rbar: np.ndarray
    m_x: float
    active: frozenset
    cue_index: int
    thresholds: dict
    meets_full_sine_condition: bool


def stationary_bump(N: int, delta: float, V0: float, *, cue_index: int = 0) -> BumpProfile:
    """Stationary bump centred on the cued unit.

    The active arc is ``{j : cos(theta_j - theta_cue) > 0}`` including the
    cue; the amplitude is ``V0 / (1 - delta * sum_arc cos^2)``.  Requires
    ``delta`` below both active-arc thresholds (cosine and sine sums), which
    make the bump positive and locally stable.  Whether the stricter
    full-ring sine condition holds is recorded, not enforced.
    """
    if N < 2:
        raise PreconditionError("N ≥ 2 required")
    if not V0 > 0:
        raise PreconditionError("V0 must be positive")
    if delta < 0:
        raise PreconditionError("delta must be nonnegative")
    arc, c2, s2_arc, s2_full = arc_sums(N, cue_index)
    thr = {
        "cos": np.inf if c2 == 0 else 1.0 / c2,
        "sin_arc": np.inf if s2_arc == 0 else 1.0 / s2_arc,
        "sin_full": np.inf if s2_full == 0 else 1.0 / s2_full,
    }
    for key in ("cos", "sin_arc"):
        if not delta < thr[key]:
            raise PreconditionError(
                f"delta={delta:g} violates bump condition delta < {thr[key]:.6g} ({key} sum)"
            )
    full_ok = delta < thr["sin_full"]
    if not full_ok:
        warnings.warn(
            f"delta={delta:g} exceeds the full-ring sine threshold {thr['sin_full']:.6g}; "
            "the active-arc thresholds still hold",
            stacklevel=2,
        )
    m_x = V0 / (1.0 - delta * c2)
    theta = (np.arange(N) - cue_index) * (2.0 * np.pi / N)
    V = np.zeros(N)
    V[cue_index] = V0
    rbar = np.where(arc, delta * m_x * np.cos(theta), 0.0) + V
    A = delta * np.cos(theta[:, None] - theta[None, :])
    resid = np.max(np.abs(-rbar + relu(A @ rbar + V)))
    if resid > 1e-12 * max(1.0, float(np.max(np.abs(rbar)))):
        raise NumericalError(f"bump fixed-point residual {resid:.3g} too large")
    return BumpProfile(rbar, float(m_x), frozenset(np.flatnonzero(arc).tolist()),
                       cue_index, thr, bool(full_ok))


def my_decay_rate(traj: Trajectory):
    """Exponential decay rate of ``|m_y(t)|`` along a trajectory.

    Fits ``log|m_y|`` linearly from the first time ``|m_y|`` falls below
    half its initial value until it drops under ``1e-10``.  Returns ``None``
    when ``m_y`` is identically zero (rate not identifiable).
    """
    t = np.asarray(traj.times)
    _, m_y = traj.moments()
    a = np.abs(m_y)
    ref = a[0] if a[0] > 1e-14 else a.max()
    if ref <= 1e-14:
        return None
    if not (a[-1] <= 1e-12 or np.log10(ref / max(a[-1], 1e-300)) >= 3):
        raise PreconditionError("|m_y| spans fewer than 3 decades; extend the trajectory")
    start = int(np.argmax(a < 0.5 * ref))
    below = np.flatnonzero(a[start:] < 1e-10)
    stop = start + (below[0] if below.size else a.size - start)
    tt, aa = t[start:stop], a[start:stop]
    keep = aa > 0
    if keep.sum() < 3:
        raise PreconditionError("too few samples in the decay window")
    slope = np.polyfit(tt[keep], np.log(aa[keep]), 1)[0]
    return float(-slope)
