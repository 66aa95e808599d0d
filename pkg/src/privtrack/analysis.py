"""Numerical convergence certificates and privacy accounting.

The error dynamics of the algorithm are bounded by a 5-dimensional linear
recursion E[Theta(k+1)] <= G E[Theta(k)] + vartheta qbar^k dbar, with state
Theta = [consensus error, optimality gap of the mean iterate, tracker
deviation, x-compression error, y-compression error].  Linear convergence
is certified by exhibiting a positive vector zeta with
G zeta <= (1 - (m/2) alpha mu) zeta, which pins the spectral radius of G
below that rate.  The privacy budget epsilon of each agent follows a closed
form in (alpha, L, q, delta, noise bases).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPECTRAL_TOL = 1e-10


@dataclass(frozen=True)
class SystemParams:
    """Inputs of the error-system construction."""

    alpha: float
    gamma: float
    mu: float
    L: float
    phi: float
    rho_w: float
    lambda_wi: float
    q_bar: float
    d_eta_bar: float = 0.0
    n: int = 1


@dataclass(frozen=True, eq=False)
class ConvergenceSystem:
    """The nonnegative recursion matrix G and forcing vector vartheta."""

    G: np.ndarray  # (5, 5)
    vartheta: np.ndarray  # (5,)
    q_bar: float
    d_eta_bar: float
    lambda_hat: float  # 1 - gamma (1 - rho_w)
    params: SystemParams


@dataclass(frozen=True)
class PrivacyBudget:
    """Closed-form differential-privacy budget for one agent."""

    epsilon: float
    tau: float  # alpha / d_eta_x + 1 / d_eta_y
    q_floor: float  # smallest admissible decay rate
    delta: float  # adjacency radius


@dataclass(frozen=True)
class ZetaCheck:
    passed: bool
    slack: np.ndarray  # (5,): (1 - (m/2) alpha mu) zeta - G zeta, row-wise
    rate: float  # 1 - (m/2) alpha mu


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


def build_system(params: SystemParams) -> ConvergenceSystem:
    """Assemble G and vartheta from the five error bounds.

    Requires alpha < 1/(mu + L), gamma in (0, 1], phi in [0, 1).
    """
    p = params
    _require(0 < p.mu <= p.L, f"need 0 < mu <= L, got mu={p.mu}, L={p.L}")
    _require(p.alpha >= 0, f"alpha must be >= 0, got {p.alpha}")
    _require(
        p.alpha < 1.0 / (p.mu + p.L),
        f"hypothesis alpha < 1/(mu+L) violated: {p.alpha} >= {1.0 / (p.mu + p.L)}",
    )
    _require(0 < p.gamma <= 1.0, f"gamma must lie in (0, 1], got {p.gamma}")
    _require(0 <= p.phi < 1.0, f"phi must lie in [0, 1), got {p.phi}")
    _require(0 <= p.rho_w < 1.0, f"rho_w must lie in [0, 1), got {p.rho_w}")
    _require(p.lambda_wi >= 0, f"lambda_wi must be >= 0, got {p.lambda_wi}")
    _require(0 <= p.q_bar < 1.0, f"q_bar must lie in [0, 1), got {p.q_bar}")

    a, g, mu, L = p.alpha, p.gamma, p.mu, p.L
    lw = p.lambda_wi
    lam_hat = 1.0 - g * (1.0 - p.rho_w)
    sphi = math.sqrt(p.phi)

    G = np.array(
        [
            [lam_hat, 0.0, a, g * lw, 0.0],
            [a * L, 1.0 - a * mu, 0.0, 0.0, 0.0],
            [L * (g * lw + a * L), a * L**2, a * L + lam_hat, L * g * lw, g * lw],
            [sphi * (g * lw + a * L), sphi * a * L, sphi * a, sphi * (g * lw + 1.0), 0.0],
            [
                sphi * L * (g * lw + a * L),
                sphi * a * L**2,
                sphi * (a * L + g * lw),
                sphi * L * g * lw,
                sphi * (g * lw + 1.0),
            ],
        ]
    )
    one_minus_q = 1.0 - p.q_bar
    vartheta = p.n**2 * np.array(
        [
            lam_hat,
            (one_minus_q + a) / one_minus_q,
            (L + 1.0) * lam_hat + a * L / one_minus_q,
            sphi * (lam_hat + 1.0) + sphi * a / one_minus_q,
            sphi * L * lam_hat + sphi + sphi * a * L / one_minus_q + sphi * lam_hat,
        ]
    )
    return ConvergenceSystem(
        G=G,
        vartheta=vartheta,
        q_bar=p.q_bar,
        d_eta_bar=p.d_eta_bar,
        lambda_hat=lam_hat,
        params=p,
    )


def power_iteration_radius(mat: np.ndarray, iters: int = 20000, tol: float = 1e-13) -> float:
    """Perron root of a nonnegative matrix by shifted power iteration."""
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    shifted = mat + np.eye(n)  # keeps the dominant eigenvalue unique and real
    v = np.full(n, 1.0 / math.sqrt(n))
    est = 1.0
    for _ in range(iters):
        w = shifted @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new_est = float(v @ w)
        v = w / nw
        if abs(new_est - est) <= tol * max(1.0, abs(new_est)):
            est = new_est
            break
        est = new_est
    return max(est - 1.0, 0.0)


def spectral_radius(G: np.ndarray) -> float:
    """Largest eigenvalue magnitude of a nonnegative matrix.

    Dense eigensolve, cross-checked internally against power iteration.
    """
    G = np.asarray(G, dtype=float)
    if np.any(G < 0):
        raise ValueError("spectral_radius expects a nonnegative matrix")
    dense = float(np.max(np.abs(np.linalg.eigvals(G))))
    power = power_iteration_radius(G)
    if abs(dense - power) > 1e-8 * max(1.0, dense):
        raise ArithmeticError(
            f"eigensolver ({dense}) and power iteration ({power}) disagree"
        )
    return dense


def default_zetas(params: SystemParams, m: float) -> tuple[float, float, float, float, float]:
    """The concrete certificate weights used by the step-size theorem."""
    _require(0 < m < 1, f"m must lie in (0, 1), got {m}")
    z1 = 1.0
    z2 = 2.0 * params.L / (m * params.mu)
    z3 = (2.0 * params.lambda_wi - 2.0 * params.rho_w + 2.0) / (1.0 - params.rho_w)
    z4 = (1.0 - params.rho_w) / (2.0 * params.lambda_wi)
    return (z1, z2, z3, z4, z4)


def lemma2_zeta_check(system: ConvergenceSystem, m: float, zetas) -> ZetaCheck:
    """Evaluate G zeta <= (1 - (m/2) alpha mu) zeta element-wise.

    ``zetas`` are the five positive weights (z1..z5); the test vector is
    [z1, z2, L z3, z4, L z5].  All slacks >= 0 certifies
    rho(G) <= 1 - (m/2) alpha mu.
    """
    _require(0 < m < 1, f"m must lie in (0, 1), got {m}")
    z = np.asarray(zetas, dtype=float)
    _require(z.shape == (5,), f"need 5 zeta weights, got shape {z.shape}")
    _require(bool(np.all(z > 0)), "zeta weights must be positive")
    L = system.params.L
    vec = np.array([z[0], z[1], L * z[2], z[3], L * z[4]])
    rate = 1.0 - 0.5 * m * system.params.alpha * system.params.mu
    slack = rate * vec - system.G @ vec
    return ZetaCheck(passed=bool(np.all(slack >= 0.0)), slack=slack, rate=rate)


def theorem1_bounds(
    params: SystemParams, m: float, gamma: float | None = None
) -> tuple[float, float]:
    """(gamma_max, alpha_max) admissible for the linear-rate certificate.

    ``alpha_max`` scales with the consensus gain actually used; it is
    evaluated at ``gamma`` when given, else at ``gamma_max``.
    """
    _require(0 < m < 1, f"m must lie in (0, 1), got {m}")
    _require(0 <= params.phi < 1.0, f"phi must lie in [0, 1), got {params.phi}")
    mu, L, lw, rho = params.mu, params.L, params.lambda_wi, params.rho_w
    sphi = math.sqrt(params.phi)
    kappa = (1.0 - sphi) / lw
    one_rho = 1.0 - rho

    s1 = 4.0 * lw**2 * m * mu + one_rho**2 * m * mu + (6.0 * m * mu + 2.0 * L) * lw * one_rho
    terms = [kappa * L / (m * mu), 1.0]
    if sphi > 0.0:
        terms.insert(0, kappa * one_rho**2 * m * mu / (4.0 * sphi * s1))
    gamma_max = min(terms)

    g = gamma_max if gamma is None else gamma
    _require(0 < g <= 1.0, f"gamma must lie in (0, 1], got {g}")
    s2 = (6.0 * m * mu + 2.0 * m**2 * mu + 4.0 * L) * one_rho + 2.0 * m * mu * lw * (2.0 + m)
    alpha_max = min(m * mu * one_rho**2 / s2, lw * (1.0 - params.q_bar) / 2.0) * g / L
    return gamma_max, alpha_max


def privacy_epsilon(
    alpha: float,
    L: float,
    q: float,
    delta: float,
    d_eta_x: float,
    d_eta_y: float,
) -> PrivacyBudget:
    """Per-agent privacy budget epsilon = tau q^2 delta / (q^2 - aL - q aL).

    Defined only for alpha < 1/(2L) and q strictly above the floor
    (aL + sqrt(a^2 L^2 + 4 aL)) / 2.
    """
    _require(alpha > 0, f"alpha must be > 0, got {alpha}")
    _require(L > 0, f"L must be > 0, got {L}")
    _require(delta >= 0, f"delta must be >= 0, got {delta}")
    _require(d_eta_x > 0 and d_eta_y > 0, "noise scale bases must be > 0")
    al = alpha * L
    q_floor = (al + math.sqrt(al * al + 4.0 * al)) / 2.0
    _require(alpha < 1.0 / (2.0 * L), f"condition alpha < 1/(2L) violated: {alpha} >= {1.0 / (2.0 * L)}")
    _require(
        q_floor < q < 1.0,
        f"condition q in (q_floor, 1) violated: q={q}, q_floor={q_floor}",
    )
    tau = alpha / d_eta_x + 1.0 / d_eta_y
    eps = tau * q * q * delta / (q * q - al - q * al)
    return PrivacyBudget(epsilon=eps, tau=tau, q_floor=q_floor, delta=delta)


def adjacency_distance(a, b) -> float:
    """Gradient sup-distance between two instances differing in one agent.

    Finite (||2 A^T (b2 - b1)||) only when the differing agent keeps its
    data matrix; +inf when the matrices differ, since the gradient gap is
    then an unbounded linear map.
    """
    if (a.n, a.d) != (b.n, b.d):
        raise ValueError("instances must share (n, d)")
    if a.ridge != b.ridge:
        raise ValueError("instances must share the ridge coefficient")
    differing = [
        i
        for i in range(a.n)
        if not (
            np.array_equal(a.a_mats[i], b.a_mats[i]) and np.array_equal(a.b_vecs[i], b.b_vecs[i])
        )
    ]
    if len(differing) == 0:
        return 0.0
    if len(differing) > 1:
        raise ValueError(f"instances differ in {len(differing)} agents; at most one allowed")
    i0 = differing[0]
    if not np.array_equal(a.a_mats[i0], b.a_mats[i0]):
        return math.inf
    diff = b.b_vecs[i0] - a.b_vecs[i0]
    return float(np.linalg.norm(2.0 * a.a_mats[i0].T @ diff))
