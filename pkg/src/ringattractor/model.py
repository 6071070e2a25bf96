"""Connectivity, activation, drift field and active sets of the ring network."""

from __future__ import annotations

import numpy as np

from .config import RingConfig
from .exceptions import ConfigError


def build_connectivity(cfg: RingConfig) -> np.ndarray:
    """Circulant coupling matrix ``A`` for ``cfg``.

    ``A[i, j] = j0 + delta*cos(d) + lshift*cos(d + pi/4) + rshift*cos(d - pi/4)``
    with ``d = theta_i - theta_j``.  The returned array is read-only.
    """
    theta = cfg.theta
    d = theta[:, None] - theta[None, :]
    A = cfg.j0 + cfg.delta * np.cos(d)
    if cfg.lshift:
        A = A + cfg.lshift * np.cos(d + np.pi / 4)
    if cfg.rshift:
        A = A + cfg.rshift * np.cos(d - np.pi / 4)
    A = np.ascontiguousarray(A, dtype=float)
    A.setflags(write=False)
    return A


def relu(x):
    """Componentwise ``max(x, 0)``; ``relu(0) == 0``."""
    return np.maximum(x, 0.0)


def total_input(r, V, A) -> np.ndarray:
    return A @ np.asarray(r, dtype=float) + V


def drift(r, V, A, tau: float = 1.0) -> np.ndarray:
    """Right-hand side ``(-r + relu(A r + V)) / tau``.

    ``r`` may also be a stack of states with shape ``(n, N)``.
    """
    r = np.asarray(r, dtype=float)
    V = np.asarray(V, dtype=float)
    N = A.shape[0]
    if A.shape != (N, N) or r.shape[-1] != N or V.shape[-1] != N:
        raise ConfigError(
            f"dimension mismatch: A {A.shape}, r {r.shape}, V {V.shape}"
        )
    return (-r + relu(r @ A.T + V)) / tau


def active_set(r, V, A) -> frozenset:
    """Indices whose total input is strictly positive."""
    g = total_input(r, V, A)
    return frozenset(np.flatnonzero(g > 0).tolist())


def active_mask(r, V, A) -> np.ndarray:
    return total_input(r, V, A) > 0


def lipschitz_bound(cfg: RingConfig) -> float:
    """Certified Lipschitz constant ``(1 + ||A||_2) / tau`` of the drift.

    Uses that ``relu`` is 1-Lipschitz componentwise.
    """
    A = cfg.connectivity
    return float((1.0 + np.linalg.norm(A, 2)) / cfg.tau)


def bitstring(active, N: int) -> str:
    """Encode an active set (index collection or boolean mask) as '0'/'1' chars."""
    mask = np.zeros(N, dtype=bool)
    if isinstance(active, (set, frozenset)):
        active = sorted(active)
    active = np.asarray(active)
    if active.dtype == bool:
        mask[:] = active
    elif active.size:
        mask[active.astype(int)] = True
    return "".join("1" if m else "0" for m in mask)


def arc_sums(N: int, cue_index: int = 0, tol: float = 1e-12):
    """Squared cosine/sine sums over the half-ring facing the cue.

    Returns ``(arc, sum_cos2, sum_sin2_arc, sum_sin2_full)`` where ``arc`` is
    the boolean mask ``cos(theta_j - theta_cue) > tol``; the sine sums skip the
    cue unit itself.
    """
    theta = np.arange(N) * (2.0 * np.pi / N) - cue_index * (2.0 * np.pi / N)
    cos = np.cos(theta)
    sin = np.sin(theta)
    arc = cos > tol
    not_cue = np.arange(N) != cue_index
    return (
        arc,
        float(np.sum(cos[arc] ** 2)),
        float(np.sum(sin[arc & not_cue] ** 2)),
        float(np.sum(sin[not_cue] ** 2)),
    )


def bump_thresholds(N: int) -> dict:
    """Coupling thresholds for the stationary bump at ``N`` units.

    ``cos`` and ``sin_arc`` are the active-arc bounds that guarantee a
    positive, locally stable bump; ``sin_full`` is the stricter bound using
    the sine sum over the whole ring.
    """
    _, c2, s2_arc, s2_full = arc_sums(N)
    inv = lambda s: np.inf if s == 0 else 1.0 / s  # noqa: E731
    return {"cos": inv(c2), "sin_arc": inv(s2_arc), "sin_full": inv(s2_full)}
