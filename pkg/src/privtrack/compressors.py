"""Contractive message compressors and empirical contraction estimation.

All compressors satisfy E||C(v) - v||^2 <= phi ||v||^2 for some phi in [0, 1):

* ``identity``      -- phi = 0,
* ``topk:k=K``      -- keep the K largest-magnitude coordinates, phi = 1 - K/d,
* ``bbit:b=B``      -- dithered B-bit magnitude quantizer (biased); phi has no
                       closed form here and is estimated empirically.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

KINDS = ("identity", "topk", "bbit")

MIN_ESTIMATE_SAMPLES = 1000


@dataclass(frozen=True)
class CompressorSpec:
    """Compressor choice plus its declared/estimated contraction parameter."""

    kind: str
    k: int | None = None
    b: int | None = None
    phi: float | None = None

    def label(self) -> str:
        if self.kind == "topk":
            return f"topk:k={self.k}"
        if self.kind == "bbit":
            return f"bbit:b={self.b}"
        return "identity"


def identity_spec() -> CompressorSpec:
    return CompressorSpec(kind="identity", phi=0.0)


def topk_spec(k: int) -> CompressorSpec:
    if k < 1:
        raise ValueError(f"topk needs k >= 1, got {k}")
    return CompressorSpec(kind="topk", k=int(k))


def bbit_spec(b: int) -> CompressorSpec:
    if b < 1:
        raise ValueError(f"bbit needs b >= 1, got {b}")
    return CompressorSpec(kind="bbit", b=int(b))


def parse_compressor(text: str) -> CompressorSpec:
    """Parse config strings: "identity", "topk:k=2", "bbit:b=2"."""
    text = text.strip().lower()
    if text == "identity":
        return identity_spec()
    try:
        kind, _, arg = text.partition(":")
        name, _, value = arg.partition("=")
        if kind == "topk" and name == "k":
            return topk_spec(int(value))
        if kind == "bbit" and name == "b":
            return bbit_spec(int(value))
    except ValueError:
        pass
    raise ValueError(
        f"unrecognized compressor {text!r}; expected 'identity', 'topk:k=K', or 'bbit:b=B'"
    )


def declared_contraction(spec: CompressorSpec, d: int) -> float | None:
    """Exact phi where one is known: 0 for identity, 1 - k/d for top-k.

    Returns the stored empirical estimate (possibly None) for the b-bit
    quantizer, whose closed form is not exposed.
    """
    if spec.kind == "identity":
        return 0.0
    if spec.kind == "topk":
        if spec.k > d:
            raise ValueError(f"topk k={spec.k} exceeds dimension d={d}")
        return 1.0 - spec.k / d
    return spec.phi


def with_phi(spec: CompressorSpec, phi: float) -> CompressorSpec:
    return replace(spec, phi=float(phi))


def _topk(v: np.ndarray, k: int) -> np.ndarray:
    if k >= v.size:
        return v.copy()
    # Stable sort on -|v| keeps the lowest index among tied magnitudes.
    order = np.argsort(-np.abs(v), kind="stable")
    out = np.zeros_like(v)
    keep = order[:k]
    out[keep] = v[keep]
    return out


def _bbit_xi(d: int, b: int) -> float:
    return 1.0 + min(d / 2 ** (2 * (b - 1)), np.sqrt(d) / 2 ** (b - 1))


def _bbit(v: np.ndarray, b: int, rng) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return np.zeros_like(v)
    xi = _bbit_xi(v.size, b)
    u = rng.random(v.size)
    levels = np.floor(2.0 ** (b - 1) * np.abs(v) / norm + u)
    return (norm / xi) * np.sign(v) * 2.0 ** (-(b - 1)) * levels


def compress(spec: CompressorSpec, v: np.ndarray, rng=None) -> np.ndarray:
    """Apply the compressor to one vector, drawing dither from ``rng``."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot compress a non-finite vector")
    if spec.kind == "identity":
        return v.copy()
    if spec.kind == "topk":
        if spec.k > v.size:
            raise ValueError(f"topk k={spec.k} exceeds dimension d={v.size}")
        return _topk(v, spec.k)
    if spec.kind == "bbit":
        if rng is None:
            raise ValueError("bbit compressor needs a random source")
        return _bbit(v, spec.b, rng)
    raise ValueError(f"unknown compressor kind {spec.kind!r}")


def is_deterministic(spec: CompressorSpec) -> bool:
    return spec.kind in ("identity", "topk")


def estimate_contraction(
    spec: CompressorSpec,
    d: int,
    samples: int,
    rng,
    directions: int = 32,
) -> float:
    """Empirical contraction parameter.

    Draws ``directions`` unit-norm probe directions (always including the
    all-equal-magnitude direction, the worst case for top-k) and returns
    the maximum over directions of the Monte-Carlo mean of ||C(x) - x||^2
    over ``samples`` compressor draws.  Deterministic under the seed.
    """
    if samples < MIN_ESTIMATE_SAMPLES:
        raise ValueError(f"need at least {MIN_ESTIMATE_SAMPLES} samples, got {samples}")
    if directions < 1:
        raise ValueError("need at least one direction")
    probes = [np.full(d, 1.0 / np.sqrt(d))]
    for _ in range(directions - 1):
        x = rng.standard_normal(d)
        nx = np.linalg.norm(x)
        if nx == 0.0:
            continue
        probes.append(x / nx)
    draws = 1 if is_deterministic(spec) else samples
    worst = 0.0
    for x in probes:
        total = 0.0
        for _ in range(draws):
            err = compress(spec, x, rng) - x
            total += float(err @ err)
        worst = max(worst, total / draws)
    return worst
