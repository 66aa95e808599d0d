"""The compressed, differentially private gradient-tracking iteration.

Each agent keeps an estimate x_i and a tracker y_i of the network-average
gradient.  Per step it (1) masks both with decaying Laplace noise, (2)
broadcasts a compressed innovation against shared reference states
x_i^c / y_i^c, and (3) mixes neighbors' references through the weighted
graph.  The uncompressed baseline is the identity compressor with full
consensus gain (gamma = 1).

Stacked (n, d) matrix form of one step, with W_g = (1-g) I + g W and
sigma = reference - noised state:

    x+ = W_g (x + eta_x) + g (W - I) sigma_x - alpha y
    y+ = W_g (y + eta_y) + g (W - I) sigma_y + grad(x+) - grad(x)

Row sums of y are conserved: 1^T y(k) = 1^T grad(x(k)) + 1^T sum_{t<k} eta_y(t).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .compressors import CompressorSpec, compress
from .graph import MixingMatrix
from .noise import NoiseAccumulator, NoiseSchedule, sample_noise_matrix
from .objective import ProblemInstance, gradient, gradient_matrix, solve_shifted_optimum
from .records import Trace

DIVERGENCE_NORM = 1e12


class DivergenceError(RuntimeError):
    """Raised when an iterate leaves the finite range."""

    def __init__(self, k: int, detail: str):
        super().__init__(f"divergence at iteration {k}: {detail}")
        self.k = k


@dataclass
class RunConfig:
    """Experiment parameters for a single run."""

    alpha: float
    gamma: float
    schedule: NoiseSchedule
    compressor: CompressorSpec
    horizon: int
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.horizon < 0:
            raise ValueError(f"horizon must be >= 0, got {self.horizon}")


@dataclass
class TrialStreams:
    """Independent random streams owned by one trial.

    The noise stream is consumed identically regardless of compressor or
    gains, so runs sharing (seed, trial) see the same noise realization;
    dither randomness lives on its own stream.
    """

    init: np.random.Generator
    noise: np.random.Generator
    compression: np.random.Generator


def streams_for_trial(seed: int, trial_index: int = 0) -> TrialStreams:
    root = np.random.SeedSequence([int(seed), int(trial_index)])
    init_ss, noise_ss, comp_ss = root.spawn(3)
    return TrialStreams(
        init=np.random.default_rng(init_ss),
        noise=np.random.default_rng(noise_ss),
        compression=np.random.default_rng(comp_ss),
    )


@dataclass
class NetworkState:
    """Synchronous network state at iteration k."""

    k: int
    x: np.ndarray  # (n, d) local estimates
    y: np.ndarray  # (n, d) gradient trackers
    xc: np.ndarray  # (n, d) compressed reference states for x
    yc: np.ndarray  # (n, d) compressed reference states for y
    grad_prev: np.ndarray  # (n, d) cached gradients at x
    noise_acc: NoiseAccumulator


@dataclass
class StepMetrics:
    sigma_x_norm: float
    sigma_y_norm: float
    conservation_rel: float


def init_state(
    instance: ProblemInstance,
    mixing: MixingMatrix,
    config: RunConfig,
    x0="random-uniform",
    rng: np.random.Generator | None = None,
) -> NetworkState:
    """Initial state: y = per-agent gradients at x0, references at zero."""
    n, d = instance.n, instance.d
    if mixing.n != n:
        raise ValueError(f"graph has {mixing.n} agents but instance has {n}")
    if isinstance(x0, str):
        if x0 != "random-uniform":
            raise ValueError(f"unknown initializer {x0!r}")
        if rng is None:
            rng = streams_for_trial(config.seed).init
        x = rng.random((n, d))
    else:
        x = np.array(x0, dtype=float)
        if x.shape != (n, d):
            raise ValueError(f"x0 must have shape ({n}, {d}), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("x0 must be finite")
    grad0 = gradient_matrix(instance, x)
    return NetworkState(
        k=0,
        x=x,
        y=grad0.copy(),
        xc=np.zeros((n, d)),
        yc=np.zeros((n, d)),
        grad_prev=grad0,
        noise_acc=NoiseAccumulator(n, d),
    )


def conservation_residual(state: NetworkState, instance: ProblemInstance) -> float:
    """Relative residual of 1^T y = 1^T grad(x) + 1^T sum eta_y."""
    lhs = state.y.sum(axis=0)
    rhs = state.grad_prev.sum(axis=0) + state.noise_acc.total()
    return float(np.linalg.norm(lhs - rhs) / max(1.0, np.linalg.norm(rhs)))


def apply_step(
    state: NetworkState,
    instance: ProblemInstance,
    mixing: MixingMatrix,
    config: RunConfig,
    eta_x: np.ndarray,
    eta_y: np.ndarray,
    comp_rng: np.random.Generator | None,
) -> tuple[NetworkState, StepMetrics]:
    """One synchronous update with the noise draws pinned by the caller."""
    n = instance.n
    gamma, alpha = config.gamma, config.alpha
    w_minus_i = mixing.weights - np.eye(n)

    xa = state.x + eta_x
    ya = state.y + eta_y

    # Each sender compresses its innovation once; every receiver sees the
    # same message, so one reference row per sender suffices.
    xc_new = np.empty_like(state.xc)
    yc_new = np.empty_like(state.yc)
    for i in range(n):
        xc_new[i] = state.xc[i] + compress(config.compressor, xa[i] - state.xc[i], comp_rng)
    for i in range(n):
        yc_new[i] = state.yc[i] + compress(config.compressor, ya[i] - state.yc[i], comp_rng)

    x_next = xa + gamma * (w_minus_i @ xc_new) - alpha * state.y
    if not np.all(np.isfinite(x_next)):
        raise DivergenceError(state.k, "non-finite estimate entries")
    x_norm = float(np.linalg.norm(x_next))
    if x_norm > DIVERGENCE_NORM:
        raise DivergenceError(state.k, f"estimate norm {x_norm:.3e} exceeds {DIVERGENCE_NORM:.0e}")

    grad_next = gradient_matrix(instance, x_next)
    y_next = ya + gamma * (w_minus_i @ yc_new) + grad_next - state.grad_prev

    acc = state.noise_acc
    acc.add(eta_y)

    new_state = NetworkState(
        k=state.k + 1,
        x=x_next,
        y=y_next,
        xc=xc_new,
        yc=yc_new,
        grad_prev=grad_next,
        noise_acc=acc,
    )
    sigma_x = xc_new - xa
    sigma_y = yc_new - ya
    metrics = StepMetrics(
        sigma_x_norm=float(np.linalg.norm(sigma_x)),
        sigma_y_norm=float(np.linalg.norm(sigma_y)),
        conservation_rel=conservation_residual(new_state, instance),
    )
    return new_state, metrics


def step(
    state: NetworkState,
    instance: ProblemInstance,
    mixing: MixingMatrix,
    config: RunConfig,
    streams: TrialStreams,
) -> tuple[NetworkState, StepMetrics]:
    """Draw this iteration's noise, then apply the update."""
    if state.k >= config.horizon:
        raise ValueError(f"state already at horizon {config.horizon}")
    n, d = instance.n, instance.d
    eta_x = sample_noise_matrix(config.schedule, state.k, n, d, streams.noise, "x")
    eta_y = sample_noise_matrix(config.schedule, state.k, n, d, streams.noise, "y")
    return apply_step(state, instance, mixing, config, eta_x, eta_y, streams.compression)


def step_reference(
    state: NetworkState,
    instance: ProblemInstance,
    mixing: MixingMatrix,
    config: RunConfig,
    eta_x: np.ndarray,
    eta_y: np.ndarray,
    comp_rng: np.random.Generator | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Slow per-agent form of the update, for equivalence checks.

    Returns (x_next, y_next) computed with explicit neighbor sums
    gamma * sum_j w_ij (c_j - c_i) instead of the matrix form.
    """
    n, d = instance.n, instance.d
    w = mixing.weights
    gamma, alpha = config.gamma, config.alpha

    xa = state.x + eta_x
    ya = state.y + eta_y
    xc_new = np.empty((n, d))
    yc_new = np.empty((n, d))
    for i in range(n):
        xc_new[i] = state.xc[i] + compress(config.compressor, xa[i] - state.xc[i], comp_rng)
    for i in range(n):
        yc_new[i] = state.yc[i] + compress(config.compressor, ya[i] - state.yc[i], comp_rng)

    x_next = np.empty((n, d))
    for i in range(n):
        mix = sum(w[i, j] * (xc_new[j] - xc_new[i]) for j in range(n))
        x_next[i] = xa[i] + gamma * mix - alpha * state.y[i]
    y_next = np.empty((n, d))
    for i in range(n):
        mix = sum(w[i, j] * (yc_new[j] - yc_new[i]) for j in range(n))
        y_next[i] = (
            ya[i] + gamma * mix + gradient(instance, i, x_next[i]) - gradient(instance, i, state.x[i])
        )
    return x_next, y_next


def diadsp_config(config: RunConfig, alpha: float | None = None) -> RunConfig:
    """Uncompressed baseline: identity compressor with full consensus gain."""
    from .compressors import identity_spec

    return RunConfig(
        alpha=config.alpha if alpha is None else alpha,
        gamma=1.0,
        schedule=config.schedule,
        compressor=identity_spec(),
        horizon=config.horizon,
        seed=config.seed,
    )


def run(
    instance: ProblemInstance,
    mixing: MixingMatrix,
    config: RunConfig,
    trial_index: int = 0,
    x0="random-uniform",
    config_echo: dict | None = None,
) -> Trace:
    """Run to the horizon and assemble the per-iteration trace.

    The residual column compares each iterate against the realized fixed
    point x_inf, solved from the exact accumulated tracker noise; for
    untruncated schedules the unseen tail is reported as an uncertainty
    bound instead of being simulated.
    """
    streams = streams_for_trial(config.seed, trial_index)
    state = init_state(instance, mixing, config, x0=x0, rng=streams.init)
    checksum = hashlib.sha256()

    horizon = config.horizon
    history = np.empty((horizon, instance.n, instance.d))
    consensus = np.empty(horizon)
    tracker = np.empty(horizon)
    sigma_x = np.empty(horizon)
    sigma_y = np.empty(horizon)
    conservation_max = conservation_residual(state, instance)

    for k in range(horizon):
        eta_x = sample_noise_matrix(config.schedule, k, instance.n, instance.d, streams.noise, "x")
        eta_y = sample_noise_matrix(config.schedule, k, instance.n, instance.d, streams.noise, "y")
        checksum.update(eta_x.tobytes())
        checksum.update(eta_y.tobytes())
        state, metrics = apply_step(state, instance, mixing, config, eta_x, eta_y, streams.compression)
        history[k] = state.x
        consensus[k] = np.linalg.norm(state.x - state.x.mean(axis=0))
        tracker[k] = np.linalg.norm(state.y - state.y.mean(axis=0))
        sigma_x[k] = metrics.sigma_x_norm
        sigma_y[k] = metrics.sigma_y_norm
        conservation_max = max(conservation_max, metrics.conservation_rel)

    noise_sums = state.noise_acc.sum.copy()
    x_inf = solve_shifted_optimum(instance, -state.noise_acc.total())
    residual = np.linalg.norm(history - x_inf[None, None, :], axis=(1, 2))

    # Untracked tail of the noise sum, mapped through the solve.
    from .noise import tail_bound

    tail = np.max(np.asarray(tail_bound(config.schedule, horizon, "y")))
    if tail > 0.0:
        h_min = float(np.linalg.eigvalsh(instance.hessian_sum)[0])
        x_inf_uncertainty = instance.n * np.sqrt(instance.d) * tail / h_min
    else:
        x_inf_uncertainty = 0.0

    return Trace(
        k=np.arange(1, horizon + 1),
        residual=residual,
        consensus_err=consensus,
        tracker_err=tracker,
        sigma_x=sigma_x,
        sigma_y=sigma_y,
        final_x=state.x,
        noise_sums=noise_sums,
        x_inf=x_inf,
        x_inf_uncertainty=float(x_inf_uncertainty),
        conservation_max=float(conservation_max),
        noise_checksum=checksum.hexdigest(),
        seed=config.seed,
        trial_index=trial_index,
        config=config_echo or {},
    )
