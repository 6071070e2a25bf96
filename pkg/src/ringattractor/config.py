"""Model configuration record and its JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .exceptions import ConfigError

CHAIN_KINDS = ("uniform_other", "two_state")


def _as_vector(value, n, name, errors):
    if value is None:
        return np.zeros(n)
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1 and n > 1:
        arr = np.full(n, float(arr[0]))
    if arr.shape != (n,):
        errors.append(f"{name} must have length N={n}, got {arr.size}")
        return np.zeros(n)
    return arr


@dataclass(frozen=True, eq=False)
class RingConfig:
    """All parameters of the ring network and its stochastic extension.

    ``lshift``/``rshift`` weight the connectivity terms shifted by +pi/4 and
    -pi/4.  ``V`` is the static input used by the deterministic dynamics;
    the switching diffusion replaces it by the cue vector ``c * e_{I_t}``.
    ``lam`` is the total switching rate of the cue chain (JSON key ``lambda``).
    """

    N: int
    tau: float = 1.0
    delta: float = 0.0
    j0: float = 0.0
    lshift: float = 0.0
    rshift: float = 0.0
    V: np.ndarray = None
    sigma: np.ndarray = None
    lam: float = 0.0
    c: float = 1.0
    chain_kind: str = "uniform_other"
    i0: int = 1

    def __post_init__(self):
        errors = []
        n = self.N
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
            errors.append(f"N must be an integer, got {n!r}")
            n = 2
        elif n < 2:
            errors.append("N ≥ 2 required")
            n = max(int(n), 1)
        object.__setattr__(self, "N", int(n))
        V = _as_vector(self.V, self.N, "V", errors)
        sigma = _as_vector(self.sigma, self.N, "sigma", errors)
        V.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "sigma", sigma)
        if not np.all(np.isfinite(V)):
            errors.append("V must be finite")
        if not (np.all(np.isfinite(sigma)) and np.all(sigma >= 0)):
            errors.append("sigma entries must be finite and ≥ 0")
        if not (np.isfinite(self.tau) and self.tau > 0):
            errors.append("tau > 0 required")
        if not (np.isfinite(self.delta) and self.delta >= 0):
            errors.append("delta ≥ 0 required")
        for name in ("j0", "lshift", "rshift"):
            if not np.isfinite(getattr(self, name)):
                errors.append(f"{name} must be finite")
        if not (np.isfinite(self.lam) and self.lam >= 0):
            errors.append("lambda ≥ 0 required")
        if self.lam > 0 and not self.c > 0:
            errors.append("c > 0 required when switching is enabled")
        if self.chain_kind not in CHAIN_KINDS:
            errors.append(f"chain_kind must be one of {CHAIN_KINDS}")
        elif self.chain_kind == "two_state" and self.N != 2:
            errors.append("chain_kind 'two_state' requires N = 2")
        if not 1 <= self.i0 <= self.N:
            errors.append(f"i0 must lie in 1..{self.N}")
        if errors:
            raise ConfigError(errors)

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.N) * (2.0 * np.pi / self.N)

    @property
    def is_reduced(self) -> bool:
        return self.j0 == 0 and self.lshift == 0 and self.rshift == 0

    @cached_property
    def connectivity(self) -> np.ndarray:
        from .model import build_connectivity

        return build_connectivity(self)

    def cue_vector(self, i: int) -> np.ndarray:
        """Input vector with ``c`` on unit ``i - 1`` (chain states are 1-based)."""
        return cue_vector(i, self.c, self.N)

    def with_(self, **changes) -> "RingConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "tau": self.tau,
            "delta": self.delta,
            "j0": self.j0,
            "lshift": self.lshift,
            "rshift": self.rshift,
            "V": self.V.tolist(),
            "sigma": self.sigma.tolist(),
            "lambda": self.lam,
            "c": self.c,
            "chain_kind": self.chain_kind,
            "i0": self.i0,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RingConfig":
        errors = []
        known = {"N", "tau", "delta", "j0", "lshift", "rshift", "V", "sigma",
                 "lambda", "c", "chain_kind", "i0"}
        unknown = sorted(set(data) - known)
        if unknown:
            errors.append(f"unknown fields: {', '.join(unknown)}")
        if "N" not in data:
            errors.append("missing required field N")
        kwargs = {}
        for key, attr in (("tau", "tau"), ("delta", "delta"), ("j0", "j0"),
                          ("lshift", "lshift"), ("rshift", "rshift"),
                          ("lambda", "lam"), ("c", "c")):
            if key in data:
                try:
                    kwargs[attr] = float(data[key])
                except (TypeError, ValueError):
                    errors.append(f"{key} must be a number")
        if "chain_kind" in data:
            kwargs["chain_kind"] = data["chain_kind"]
        if "i0" in data:
            kwargs["i0"] = data["i0"]
        n = data.get("N", 2)
        for key in ("V", "sigma"):
            if key in data:
                try:
                    kwargs[key] = np.asarray(data[key], dtype=float)
                except (TypeError, ValueError):
                    errors.append(f"{key} must be numeric")
        try:
            cfg = cls(N=n, **kwargs)
        except ConfigError as exc:
            raise ConfigError(errors + exc.errors) from None
        if errors:
            raise ConfigError(errors)
        return cfg

    @classmethod
    def from_json(cls, path) -> "RingConfig":
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def cue_vector(i: int, c: float, N: int) -> np.ndarray:
    if not 1 <= i <= N:
        raise ValueError(f"chain state {i} outside 1..{N}")
    v = np.zeros(N)
    v[i - 1] = c
    return v
