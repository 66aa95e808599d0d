"""Laplace privacy noise with geometrically decaying scales.

Scales follow d_eta * q^k; an optional truncation index hard-zeroes the
noise from that iteration on, after which the iteration is a deterministic
dynamical system (used for exact fixed-point checks).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-agent scale bases (scalar = homogeneous) and a shared decay rate."""

    d_eta_x: float | tuple[float, ...]
    d_eta_y: float | tuple[float, ...]
    q: float
    truncation_k: int | None = None

    def __post_init__(self):
        if not (0.0 < self.q < 1.0):
            raise ValueError(f"decay rate q must lie in (0, 1), got {self.q}")
        for name in ("d_eta_x", "d_eta_y"):
            base = getattr(self, name)
            if np.any(np.asarray(base, dtype=float) < 0):
                raise ValueError(f"{name} must be >= 0")
        if self.truncation_k is not None and self.truncation_k < 0:
            raise ValueError("truncation_k must be >= 0")

    @property
    def silent(self) -> bool:
        """True when no noise is ever injected (both bases identically 0)."""
        return not (np.any(np.asarray(self.d_eta_x)) or np.any(np.asarray(self.d_eta_y)))

    def q_bar(self) -> float:
        """Largest decay rate; 0 by convention for a silent schedule."""
        return 0.0 if self.silent else float(self.q)

    def d_eta_bar(self) -> float:
        return float(max(np.max(np.asarray(self.d_eta_x)), np.max(np.asarray(self.d_eta_y))))


def scale_at(schedule: NoiseSchedule, k: int, which: str = "y"):
    """Noise scale at iteration k: d_eta * q^k, or 0 past truncation.

    Returns a scalar for homogeneous schedules, a per-agent array otherwise.
    """
    if k < 0:
        raise ValueError("iteration index must be >= 0")
    base = schedule.d_eta_x if which == "x" else schedule.d_eta_y
    base = np.asarray(base, dtype=float)
    if schedule.truncation_k is not None and k >= schedule.truncation_k:
        out = np.zeros_like(base)
    else:
        out = base * schedule.q**k
    return float(out) if out.ndim == 0 else out


def tail_bound(schedule: NoiseSchedule, k: int, which: str = "y"):
    """Upper bound on E sum_{t >= k} |eta(t)| per coordinate: d q^k / (1 - q).

    Exactly 0 for truncated schedules once k reaches the truncation index.
    """
    if k < 0:
        raise ValueError("iteration index must be >= 0")
    base = np.asarray(schedule.d_eta_x if which == "x" else schedule.d_eta_y, dtype=float)
    if schedule.truncation_k is not None and k >= schedule.truncation_k:
        out = np.zeros_like(base)
    else:
        out = base * schedule.q**k / (1.0 - schedule.q)
    return float(out) if out.ndim == 0 else out


def standard_laplace(shape, rng) -> np.ndarray:
    """Unit-scale Laplace draws via inverse CDF on uniform variates."""
    u = rng.random(shape) - 0.5
    return -np.sign(u) * np.log(np.maximum(1.0 - 2.0 * np.abs(u), _TINY))


def sample_laplace(scale: float, d: int, rng) -> np.ndarray:
    """d i.i.d. Laplace(scale) coordinates, density (1/2s) exp(-|x|/s)."""
    if scale <= 0:
        raise ValueError(f"scale must be > 0, got {scale}")
    return scale * standard_laplace(d, rng)


def sample_noise_matrix(schedule: NoiseSchedule, k: int, n: int, d: int, rng, which: str) -> np.ndarray:
    """One (n, d) noise draw for iteration k; exact zeros past truncation.

    Row i is scaled by agent i's scale.  A zero-scale step consumes no
    randomness, so coupled streams stay aligned across schedules that share
    (q, truncation) but differ elsewhere.
    """
    scales = np.asarray(scale_at(schedule, k, which), dtype=float)
    if not np.any(scales):
        return np.zeros((n, d))
    draw = standard_laplace((n, d), rng)
    if scales.ndim == 0:
        return float(scales) * draw
    if scales.shape != (n,):
        raise ValueError(f"per-agent scales must have shape ({n},), got {scales.shape}")
    return scales[:, None] * draw


class NoiseAccumulator:
    """Exact running sum of tracker noise, one (n, d) block per network."""

    def __init__(self, n: int, d: int):
        self.sum = np.zeros((n, d))
        self.count = 0

    def add(self, eta_y: np.ndarray) -> None:
        self.sum += eta_y
        self.count += 1

    def total(self) -> np.ndarray:
        """Sum over agents and steps: the d-vector entering the fixed point."""
        return self.sum.sum(axis=0)

    def copy(self) -> "NoiseAccumulator":
        out = NoiseAccumulator(*self.sum.shape)
        out.sum = self.sum.copy()
        out.count = self.count
        return out
