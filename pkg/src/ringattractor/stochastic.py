"""Switching diffusion: cue chain, Euler-Maruyama paths, generator and drift checks.

The cue ``I_t`` is a continuous-time Markov chain on ``1..M`` (``M = N``)
that jumps at total rate ``lam``; unit ``I_t - 1`` receives input ``c``.
Jump times are drawn exactly from exponential clocks and inserted into the
time grid, so the cue is constant over every Euler-Maruyama step.

Random streams follow a counter scheme: replica ``k`` of root seed ``s``
uses ``SeedSequence(s, spawn_key=(k,))``, whose two children drive the
chain and the Brownian increments.  Replica results therefore do not
depend on evaluation order or thread count.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numba
import numpy as np

from .config import RingConfig
from .exceptions import NumericalError, PreconditionError
from .model import lipschitz_bound, relu

# ---------------------------------------------------------------- chain


@dataclass(frozen=True)
class SwitchChain:
    M: int
    lam: float
    kind: str = "uniform_other"

    def __post_init__(self):
        if self.M < 2:
            raise ValueError("chain needs at least two states")
        if self.lam < 0:
            raise ValueError("rate must be nonnegative")
        if self.kind not in ("uniform_other", "two_state"):
            raise ValueError(f"unknown chain kind {self.kind!r}")
        if self.kind == "two_state" and self.M != 2:
            raise ValueError("two_state chain has M = 2")

    def generator_matrix(self) -> np.ndarray:
        Q = np.full((self.M, self.M), self.lam / (self.M - 1))
        np.fill_diagonal(Q, -self.lam)
        return Q

    def next_state(self, i: int, rng: np.random.Generator) -> int:
        if self.M == 2:
            return 3 - i
        j = int(rng.integers(1, self.M))
        return j + 1 if j >= i else j


def chain_for(cfg: RingConfig) -> SwitchChain:
    return SwitchChain(cfg.N, cfg.lam, cfg.chain_kind)


def replica_streams(seed, replica: int = 0):
    """``(chain_rng, noise_rng)`` for replica ``replica`` of root ``seed``."""
    ss = np.random.SeedSequence(seed, spawn_key=(int(replica),))
    chain_ss, noise_ss = ss.spawn(2)
    return np.random.default_rng(chain_ss), np.random.default_rng(noise_ss)


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_jump_times(chain: SwitchChain, i0: int, T: float, seed=None):
    """Jump times in ``(0, T]`` and the states entered at them.

    Inter-jump times are i.i.d. exponential with rate ``chain.lam``.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    if not 1 <= i0 <= chain.M:
        raise ValueError(f"i0 outside 1..{chain.M}")
    rng = _as_rng(seed)
    times, states = [], []
    if chain.lam == 0:
        return np.array(times), np.array(states, dtype=int)
    t, i = 0.0, i0
    while True:
        t += rng.exponential(1.0 / chain.lam)
        if t > T:
            break
        i = chain.next_state(i, rng)
        times.append(t)
        states.append(i)
    return np.array(times), np.array(states, dtype=int)


# ---------------------------------------------------------------- paths


class HybridState(NamedTuple):
    x: np.ndarray
    i: int


@dataclass
class SdePath:
    """Recorded path; ``chain[k]`` is the cue state on ``[times[k], times[k+1])``."""

    times: np.ndarray
    states: np.ndarray
    chain: np.ndarray
    jump_times: np.ndarray
    jump_states: np.ndarray
    seed: object
    replica: int
    dt: float

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def at(self, t) -> HybridState:
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return HybridState(self.states[k], int(self.chain[k]))

    def to_csv(self, path, every: int = 1) -> None:
        N = self.states.shape[1]
        idx = np.arange(0, self.times.size, every)
        if idx[-1] != self.times.size - 1:
            idx = np.append(idx, self.times.size - 1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "i"] + [f"r{j}" for j in range(N)])
            for k in idx:
                w.writerow([format(self.times[k], ".12g"), int(self.chain[k])]
                           + [format(v, ".12g") for v in self.states[k]])


@numba.njit(cache=True, nogil=True)
def _em_kernel(x0, A, c, tau, sigma, h, cue, z, out):
    N = x0.shape[0]
    x = x0.copy()
    xn = np.empty(N)
    for k in range(h.shape[0]):
        hk = h[k]
        sq = math.sqrt(hk)
        for i in range(N):
            g = 0.0
            for j in range(N):
                g += A[i, j] * x[j]
            if i == cue[k]:
                g += c
            if g < 0.0:
                g = 0.0
            xn[i] = x[i] + hk * (g - x[i]) / tau + sigma[i] * sq * z[k, i]
        for i in range(N):
            x[i] = xn[i]
            out[k, i] = xn[i]


def _coerce_state(z0, N):
    x0, i0 = z0
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (N,) or not np.all(np.isfinite(x0)):
        raise ValueError(f"initial state must be a finite vector of length {N}")
    if not 1 <= int(i0) <= N:
        raise ValueError(f"chain state {i0} outside 1..{N}")
    return x0, int(i0)


def simulate_sde(z0, T: float, dt: float, cfg: RingConfig, seed=0, *,
                 replica: int = 0, record_every: int = 1,
                 block: int = 2**17) -> SdePath:
    """Euler-Maruyama path of the switching diffusion.

    Parameters
    ----------
    z0 : (x0, i0)
        Initial activity and 1-based cue state.
    T, dt : float
        Horizon and grid step.  The grid ``k*dt`` is refined by the jump
        times; a final partial step reaches ``T``.
    cfg : RingConfig
        Uses ``connectivity``, ``tau``, ``sigma``, ``lam``, ``c``; the
        static ``cfg.V`` is not used, the cue vector replaces it.
    seed, replica :
        Root seed and replica counter (see module docstring).
    record_every : int
        Keep every ``record_every``-th grid point; jump times and ``T`` are
        always kept.
    """
    N = cfg.N
    x0, i0 = _coerce_state(z0, N)
    if not (T > 0 and dt > 0):
        raise ValueError("T and dt must be positive")
    if dt > 0.1 / lipschitz_bound(cfg):
        warnings.warn(f"dt={dt:g} exceeds 0.1/Lipschitz bound", stacklevel=2)
    A = np.ascontiguousarray(cfg.connectivity)
    sigma = np.ascontiguousarray(cfg.sigma, dtype=float)
    chain_rng, noise_rng = replica_streams(seed, replica)
    jt, js = sample_jump_times(chain_for(cfg), i0, T, chain_rng)
    # jumps within rounding of a grid point act at that grid point
    snapped = np.round(jt / dt) * dt
    jt = np.where(np.abs(jt - snapped) < 1e-9 * dt, snapped, jt)
    state_seq = np.concatenate([[i0], js]).astype(np.int64)

    K = int(math.floor(T / dt + 1e-9))
    tail = T - K * dt > 1e-9 * dt

    times = [np.array([0.0])]
    states = [x0[None, :].copy()]
    x = x0.copy()
    step_base = 0
    for k0 in range(0, max(K, 1), block):
        k1 = min(k0 + block, K)
        gidx = np.arange(k0, k1 + 1)
        grid = gidx * dt
        is_grid = np.ones(grid.size, dtype=bool)
        if k1 == K and tail:
            grid = np.append(grid, T)
            gidx = np.append(gidx, -1)
            is_grid = np.append(is_grid, False)
        lo, hi = grid[0], grid[-1]
        inner = jt[(jt > lo) & (jt < hi)]
        inner = inner[inner != np.round(inner / dt) * dt]
        if inner.size:
            pos = np.searchsorted(grid, inner)
            pts = np.insert(grid, pos, inner)
            flag_grid = np.insert(is_grid, pos, False)
            flag_idx = np.insert(gidx, pos, -1)
        else:
            pts, flag_grid, flag_idx = grid, is_grid, gidx
        h = np.diff(pts)
        if h.size == 0:
            continue
        cue = state_seq[np.searchsorted(jt, pts[:-1], side="right")] - 1
        z = noise_rng.standard_normal((h.size, N))
        out = np.empty((h.size, N))
        _em_kernel(x, A, float(cfg.c), float(cfg.tau), sigma, h, cue, z, out)
        finite = np.isfinite(out).all(axis=1)
        if not finite.all():
            bad = int(np.argmin(finite))
            raise NumericalError(
                f"non-finite state at step {step_base + bad}",
                step_index=step_base + bad, time=float(pts[bad + 1]),
            )
        end_pts = pts[1:]
        keep = (~flag_grid[1:]) | ((flag_idx[1:] % record_every) == 0)
        if k1 == K:
            keep[-1] = True
        times.append(end_pts[keep])
        states.append(out[keep])
        x = out[-1].copy()
        step_base += h.size
    times = np.concatenate(times)
    states = np.concatenate(states)
    chain = state_seq[np.searchsorted(jt, times, side="right")]
    return SdePath(times, states, chain, jt, js, seed, replica, dt)


# ---------------------------------------------------------------- generator


def hybrid_drift(X, I, cfg: RingConfig) -> np.ndarray:
    """Drift ``b_i(x)`` for stacked states ``X (n, N)`` and cue states ``I (n,)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    I = np.broadcast_to(np.asarray(I, dtype=int), X.shape[:1])
    G = X @ cfg.connectivity.T
    G[np.arange(X.shape[0]), I - 1] += cfg.c
    return (-X + relu(G)) / cfg.tau


@dataclass
class TestFunction:
    """Test function ``f(x, i)`` with its gradient and Hessian diagonal in ``x``.

    All callables are vectorized: ``x`` has shape ``(n, dim)`` and ``i``
    shape ``(n,)``; ``f`` returns ``(n,)``, the others ``(n, dim)``.  The
    derivatives are checked against central differences on construction.
    """

    __test__ = False  # not a pytest class

    f: Callable
    grad: Callable
    hess_diag: Callable
    dim: int
    name: str = "f"
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.validate:
            self._check_derivatives()

    def __call__(self, x, i):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.asarray(self.f(x, np.broadcast_to(np.asarray(i), x.shape[:1])), dtype=float)

    def _check_derivatives(self, n_points: int = 4, seed: int = 12345):
        rng = np.random.default_rng(seed)
        X = rng.uniform(-2, 2, (n_points, self.dim))
        for i in (1, 2):
            I = np.full(n_points, i)
            g = np.asarray(self.grad(X, I), dtype=float)
            hd = np.asarray(self.hess_diag(X, I), dtype=float)
            for k in range(self.dim):
                e = np.zeros(self.dim)
                e[k] = 1.0
                fp, fm = self.f(X + 1e-5 * e, I), self.f(X - 1e-5 * e, I)
                fd = (fp - fm) / 2e-5
                if np.any(np.abs(fd - g[:, k]) > 1e-5 * np.maximum(1, np.abs(fd))):
                    raise ValueError(f"{self.name}: gradient disagrees with finite differences")
                f2p, f2m, f0 = self.f(X + 1e-4 * e, I), self.f(X - 1e-4 * e, I), self.f(X, I)
                fdd = (f2p - 2 * f0 + f2m) / 1e-8
                if np.any(np.abs(fdd - hd[:, k]) > 1e-3 * np.maximum(1, np.abs(fdd))):
                    raise ValueError(f"{self.name}: Hessian diagonal disagrees with finite differences")

    def __add__(self, other: "TestFunction") -> "TestFunction":
        return linear_combination([(1.0, self), (1.0, other)])

    def __rmul__(self, a: float) -> "TestFunction":
        return linear_combination([(a, self)])


def linear_combination(terms) -> TestFunction:
    terms = list(terms)
    dim = terms[0][1].dim
    return TestFunction(
        lambda x, i: sum(a * t.f(x, i) for a, t in terms),
        lambda x, i: sum(a * np.asarray(t.grad(x, i), dtype=float) for a, t in terms),
        lambda x, i: sum(a * np.asarray(t.hess_diag(x, i), dtype=float) for a, t in terms),
        dim,
        " + ".join(f"{a:g}*{t.name}" for a, t in terms),
        validate=False,
    )


def coordinate(k: int, dim: int) -> TestFunction:
    def grad(x, i):
        g = np.zeros_like(x)
        g[:, k] = 1.0
        return g

    return TestFunction(lambda x, i: x[:, k].copy(), grad,
                        lambda x, i: np.zeros_like(x), dim, f"x{k + 1}")


def square(k: int, dim: int) -> TestFunction:
    def grad(x, i):
        g = np.zeros_like(x)
        g[:, k] = 2 * x[:, k]
        return g

    def hess(x, i):
        hd = np.zeros_like(x)
        hd[:, k] = 2.0
        return hd

    return TestFunction(lambda x, i: x[:, k] ** 2, grad, hess, dim, f"x{k + 1}^2")


def product(k: int, l: int, dim: int) -> TestFunction:
    if k == l:
        return square(k, dim)

    def grad(x, i):
        g = np.zeros_like(x)
        g[:, k] = x[:, l]
        g[:, l] = x[:, k]
        return g

    return TestFunction(lambda x, i: x[:, k] * x[:, l], grad,
                        lambda x, i: np.zeros_like(x), dim, f"x{k + 1}*x{l + 1}")


def indicator(state: int, dim: int) -> TestFunction:
    return TestFunction(lambda x, i: (np.asarray(i) == state).astype(float),
                        lambda x, i: np.zeros_like(x), lambda x, i: np.zeros_like(x),
                        dim, f"1{{i={state}}}")


def squared_norm(dim: int) -> TestFunction:
    return TestFunction(lambda x, i: np.sum(x**2, axis=1), lambda x, i: 2 * x,
                        lambda x, i: np.full_like(x, 2.0), dim, "|x|^2")


def _generator_values(f: TestFunction, X, I, cfg: RingConfig) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    I = np.broadcast_to(np.asarray(I, dtype=int), X.shape[:1]).copy()
    b = hybrid_drift(X, I, cfg)
    out = np.sum(b * np.asarray(f.grad(X, I)), axis=1)
    out += 0.5 * np.asarray(f.hess_diag(X, I)) @ (cfg.sigma**2)
    if cfg.lam > 0:
        M = cfg.N
        here = f.f(X, I)
        jump = np.zeros(X.shape[0])
        for j in range(1, M + 1):
            other = I != j
            if other.any():
                vals = f.f(X, np.full_like(I, j))
                jump += np.where(other, vals - here, 0.0)
        out += cfg.lam / (M - 1) * jump
    return out


def apply_generator(f: TestFunction, z, cfg: RingConfig) -> float:
    """``<b_i(x), grad f> + 1/2 sum_k sigma_k^2 d_kk f + lam * E[f(x, j) - f(x, i)]``.

    The jump term averages over destinations ``j != i`` with the chain's
    uniform transition law (for two states this is the single other state).
    """
    x, i = z
    return float(_generator_values(f, np.asarray(x, dtype=float)[None, :], [int(i)], cfg)[0])


class GeneratorCheck(NamedTuple):
    mc_estimate: float
    analytic: float
    z_score: float
    stderr: float


def generator_mc_check(f: TestFunction, z, cfg: RingConfig, h: float = 1e-3,
                       samples: int = 100_000, seed=0) -> GeneratorCheck:
    """Monte Carlo difference quotient ``(E_z f(Z_h) - f(z)) / h`` vs the generator.

    Each sample takes one Euler-Maruyama step per chain sojourn in
    ``[0, h]`` with exact exponential jump times.
    """
    x, i = _coerce_state(z, cfg.N)
    rng = np.random.default_rng(seed)
    chain = chain_for(cfg)
    X = np.tile(x, (samples, 1))
    I = np.full(samples, i)
    remaining = np.full(samples, h)
    live = np.ones(samples, dtype=bool)
    sig = cfg.sigma
    while live.any():
        idx = np.flatnonzero(live)
        if chain.lam > 0:
            tau = rng.exponential(1.0 / chain.lam, idx.size)
        else:
            tau = np.full(idx.size, np.inf)
        step = np.minimum(tau, remaining[idx])
        b = hybrid_drift(X[idx], I[idx], cfg)
        xi = rng.standard_normal((idx.size, cfg.N))
        X[idx] += b * step[:, None] + xi * sig * np.sqrt(step)[:, None]
        jumped = tau < remaining[idx]
        remaining[idx] -= step
        for k in idx[jumped]:
            I[k] = chain.next_state(int(I[k]), rng)
        live[idx[~jumped]] = False
    diff = (f(X, I) - f(x[None, :], [i])[0]) / h
    mc = float(diff.mean())
    se = float(diff.std(ddof=1) / np.sqrt(samples))
    analytic = apply_generator(f, (x, i), cfg)
    if se > 0:
        zs = (mc - analytic) / se
    else:
        zs = 0.0 if abs(mc - analytic) <= 1e-9 * max(1.0, abs(analytic)) else np.inf
    return GeneratorCheck(mc, analytic, float(zs), se)


def dynkin_residual(f: TestFunction, path: SdePath, cfg: RingConfig) -> float:
    """``f(Z_T) - f(Z_0) - int_0^T Lf(Z_s) ds`` along a recorded path (left sums)."""
    vals = f(path.states, path.chain)
    Lf = _generator_values(f, path.states[:-1], path.chain[:-1], cfg)
    return float(vals[-1] - vals[0] - np.sum(Lf * np.diff(path.times)))


# ---------------------------------------------------------------- Lyapunov


@dataclass(frozen=True)
class LyapunovCertificate:
    """Constants of ``L|x|^2 <= -alpha |x|^2 + beta``.

    ``beta`` is the smaller of the padded grid supremum and the analytic
    bound ``sum sigma^2 + (c/tau)^2 / tail``, where ``tail`` is the margin by
    which ``alpha`` undercuts the worst quadratic growth of the drift term.
    """

    alpha: float
    beta: float
    nu: float
    beta_grid: float = float("nan")
    beta_analytic: float = float("nan")
    tail: float = float("nan")
    radius: float = float("nan")


def lyapunov_value(X, I, cfg: RingConfig) -> np.ndarray:
    """``L|x|^2 = 2 <x, b_i(x)> + sum_k sigma_k^2`` for stacked states."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return 2.0 * np.sum(X * hybrid_drift(X, I, cfg), axis=1) + float(np.sum(cfg.sigma**2))


def quadratic_growth(cfg: RingConfig) -> float:
    """Upper bound ``q`` with ``sum_k x_k^+ relu((A x)_k) <= q |x|^2``.

    For the reduced two-unit ring the exact constant is
    ``delta (1 + sqrt 2) / 2``; otherwise ``||A||_2``.
    """
    if cfg.N == 2 and cfg.is_reduced:
        return cfg.delta * (1.0 + math.sqrt(2.0)) / 2.0
    return float(np.linalg.norm(cfg.connectivity, 2))


def _grid_sup(cfg, alpha, extent, spacing, chunk=2_000_000):
    axis = np.arange(-round(extent / spacing), round(extent / spacing) + 1) * spacing
    best = -np.inf
    n = axis.size
    rows = max(1, chunk // n)
    for i in range(1, cfg.N + 1):
        for r0 in range(0, n, rows):
            X1, X2 = np.meshgrid(axis[r0:r0 + rows], axis, indexing="ij")
            X = np.column_stack([X1.ravel(), X2.ravel()])
            vals = lyapunov_value(X, i, cfg) + alpha * np.sum(X**2, axis=1)
            best = max(best, float(vals.max()))
    return best


def certify_beta(cfg: RingConfig, alpha: float, *, spacing: float = 0.05,
                 outer_spacing: float = 0.25) -> LyapunovCertificate:
    """Certify ``beta`` for a drift rate ``alpha``.

    For two units the supremum of ``L|x|^2 + alpha |x|^2`` is taken over a
    square of half-width ``10 c / (1 - delta)`` at ``spacing`` and over the
    larger square beyond which the analytic bound is negative at
    ``outer_spacing``; it is padded by 10%.  Larger networks use the
    analytic bound alone.
    """
    delta = cfg.delta
    if not delta < 1:
        raise PreconditionError("delta < 1 required for a Lyapunov certificate")
    if not 0 < alpha < 2 * (1 - delta):
        raise PreconditionError(f"alpha must lie in (0, {2 * (1 - delta):g})")
    q = quadratic_growth(cfg)
    tail = 2.0 * (1.0 - q) / cfg.tau - alpha
    if not tail > 0:
        raise PreconditionError(
            f"alpha={alpha:g} leaves no quadratic margin: need alpha < "
            f"{2 * (1 - q) / cfg.tau:.6g}; no finite beta exists"
        )
    s2 = float(np.sum(cfg.sigma**2))
    lin = 2.0 * cfg.c / cfg.tau
    beta_an = s2 + (cfg.c / cfg.tau) ** 2 / tail
    nu = (2 * (1 - delta) - alpha) / 2
    if cfg.N != 2:
        return LyapunovCertificate(alpha, beta_an, nu, beta_analytic=beta_an, tail=tail)
    R = 10.0 * cfg.c / (1.0 - delta) if cfg.c > 0 else 10.0
    rho0 = (lin + math.sqrt(lin**2 + 4 * tail * s2)) / (2 * tail)
    sup = _grid_sup(cfg, alpha, R, spacing)
    if rho0 > R:
        sup = max(sup, _grid_sup(cfg, alpha, rho0 + outer_spacing, outer_spacing))
    beta_grid = max(sup, 0.0)
    beta = min(1.1 * beta_grid, beta_an) if beta_an >= beta_grid else 1.1 * beta_grid
    return LyapunovCertificate(alpha, beta, nu, beta_grid, beta_an, tail, max(R, rho0))


def lyapunov_drift(z, cert: LyapunovCertificate, cfg: RingConfig):
    """``(lv, bound, ok)`` with ``bound = -alpha |x|^2 + beta``."""
    if not cfg.delta < 1:
        raise PreconditionError("delta < 1 required")
    x, i = z
    x = np.asarray(x, dtype=float)
    lv = float(lyapunov_value(x[None, :], int(i), cfg)[0])
    bound = -cert.alpha * float(x @ x) + cert.beta
    return lv, bound, lv <= bound + 1e-9


def lyapunov_grid_check(cert: LyapunovCertificate, cfg: RingConfig,
                        extent: float = 10.0, spacing: float = 0.1) -> dict:
    """Evaluate the drift inequality on every point of ``[-extent, extent]^2 x states``."""
    if cfg.N != 2:
        raise PreconditionError("grid check is defined for two units")
    n = round(extent / spacing)
    axis = np.arange(-n, n + 1) * spacing
    X1, X2 = np.meshgrid(axis, axis, indexing="ij")
    X = np.column_stack([X1.ravel(), X2.ravel()])
    worst = np.inf
    failures = 0
    for i in range(1, cfg.N + 1):
        lv = lyapunov_value(X, i, cfg)
        margin = (-cert.alpha * np.sum(X**2, axis=1) + cert.beta + 1e-9) - lv
        worst = min(worst, float(margin.min()))
        failures += int(np.sum(margin < 0))
    return {"ok": failures == 0, "points": int(X.shape[0] * cfg.N),
            "failures": failures, "worst_margin": worst}


@dataclass
class MomentReport:
    times: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    envelope: np.ndarray
    ok: bool
    worst_margin: float
    sup_estimate: float
    counterexample: tuple | None = None


def _replica_values(k, z0, T, dt, cfg, seed, stride, t_grid):
    path = simulate_sde(z0, T, dt, cfg, seed, replica=k, record_every=stride)
    idx = np.searchsorted(path.times, t_grid - 1e-9 * dt)
    if np.any(np.abs(path.times[idx] - t_grid) > 1e-6 * dt):
        raise RuntimeError("grid times were not recorded")
    X = path.states[idx]
    return np.sum(X**2, axis=1)


def moment_bound_check(z0, cert: LyapunovCertificate, cfg: RingConfig, T: float = 50.0,
                       dt: float = 1e-3, replicas: int = 10_000, seed=0, *,
                       n_grid: int = 50, threads: int = 1) -> MomentReport:
    """Compare ``E|X_t|^2`` with ``exp(-alpha t) |x0|^2 + beta/alpha`` on a time grid.

    The grid is ``t_j = j T / n_grid`` for ``j = 0..n_grid``; the check
    allows three standard errors of the replica mean.
    """
    x0, i0 = _coerce_state(z0, cfg.N)
    stride = T / n_grid / dt
    if abs(stride - round(stride)) > 1e-9 * stride:
        raise ValueError("T / n_grid must be a multiple of dt")
    stride = int(round(stride))
    t_grid = np.arange(n_grid + 1) * stride * dt
    args = ((x0, i0), T, dt, cfg, seed, stride, t_grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                rows = list(pool.map(lambda k: _replica_values(k, *args), range(replicas)))
        else:
            rows = [_replica_values(k, *args) for k in range(replicas)]
    vals = np.array(rows)
    est = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(replicas) if replicas > 1 else np.zeros_like(est)
    V0 = float(x0 @ x0)
    env = np.exp(-cert.alpha * t_grid) * V0 + cert.beta / cert.alpha
    margin = env + 3 * se - est
    ok = bool(np.all(margin >= 0))
    counter = None
    if not ok:
        k = int(np.argmin(margin))
        counter = (float(t_grid[k]), float(margin[k]))
    return MomentReport(t_grid, est, se, env, ok, float(margin.min()), float(est.max()), counter)
