"""Per-agent quadratic costs, smoothness constants, and exact optima.

Agent i holds f_i(x) = ||A_i x - b_i||^2 + ridge ||x||^2 with gradient
2 A_i^T (A_i x - b_i) + 2 ridge x.  The global problem min_x sum_i f_i(x)
has the unique optimum x_star; shifted optima (solutions of
sum_i grad f_i(x) = rhs) are produced by a direct dense solve.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Residual tolerance for x_star and shifted-optimum solves.
SOLVE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Immutable problem data shared read-only across trials."""

    n: int
    d: int
    a_mats: tuple[np.ndarray, ...]  # per-agent (m_i, d)
    b_vecs: tuple[np.ndarray, ...]  # per-agent (m_i,)
    ridge: float
    mu: float
    L: float
    x_star: np.ndarray  # (d,)
    hessian_sum: np.ndarray  # 2 (sum_i A_i^T A_i + n ridge I), SPD
    rhs_base: np.ndarray  # 2 sum_i A_i^T b_i
    seed: int | None = None
    data_scale: float = 1.0

    @property
    def m_per_agent(self) -> int:
        return self.a_mats[0].shape[0]


def _finish_instance(n, d, a_mats, b_vecs, ridge, seed, data_scale) -> ProblemInstance:
    eigs = [np.linalg.eigvalsh(a.T @ a) for a in a_mats]
    mu = 2.0 * (min(e[0] for e in eigs) + ridge)
    big_l = 2.0 * (max(e[-1] for e in eigs) + ridge)
    if mu <= 0:
        raise ValueError(
            "per-agent strong convexity failed: "
            f"min eigenvalue {mu / 2.0 - ridge:.3e} with ridge {ridge}"
        )
    hess = 2.0 * (sum(a.T @ a for a in a_mats) + n * ridge * np.eye(d))
    rhs_base = 2.0 * sum(a.T @ b for a, b in zip(a_mats, b_vecs))
    x_star = _refined_solve(hess, rhs_base)
    inst = ProblemInstance(
        n=n,
        d=d,
        a_mats=tuple(a_mats),
        b_vecs=tuple(b_vecs),
        ridge=float(ridge),
        mu=float(mu),
        L=float(big_l),
        x_star=x_star,
        hessian_sum=hess,
        rhs_base=rhs_base,
        seed=seed,
        data_scale=float(data_scale),
    )
    resid = np.linalg.norm(total_gradient(inst, x_star))
    if resid > SOLVE_TOL * max(1.0, np.linalg.norm(rhs_base)):
        raise ValueError(f"optimum residual {resid:.3e} exceeds tolerance")
    return inst


def _refined_solve(hess: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """SPD solve with one step of iterative refinement."""
    x = np.linalg.solve(hess, rhs)
    x += np.linalg.solve(hess, rhs - hess @ x)
    return x


def generate_problem(
    n: int,
    d: int,
    m_per_agent: int,
    ridge: float,
    seed: int,
    data_scale: float = 1.0,
) -> ProblemInstance:
    """Draw a random least-squares instance.

    A_i entries and the true parameter are i.i.d. standard normal and
    b_i = A_i x_true + e_i with standard normal e_i.  ``data_scale``
    multiplies A_i and e_i jointly (scaling every cost by data_scale^2),
    which leaves the optimum unchanged but rescales mu and L.
    """
    if n < 1 or d < 1 or m_per_agent < 1:
        raise ValueError(f"n, d, m_per_agent must be >= 1, got {(n, d, m_per_agent)}")
    if ridge < 0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    if m_per_agent < d and ridge == 0:
        raise ValueError(
            f"m_per_agent={m_per_agent} < d={d} needs ridge > 0 for per-agent strong convexity"
        )
    rng = np.random.default_rng(seed)
    x_true = rng.standard_normal(d)
    a_mats, b_vecs = [], []
    for _ in range(n):
        a = data_scale * rng.standard_normal((m_per_agent, d))
        e = data_scale * rng.standard_normal(m_per_agent)
        a_mats.append(a)
        b_vecs.append(a @ x_true + e)
    return _finish_instance(n, d, a_mats, b_vecs, ridge, seed, data_scale)


def instance_from_data(a_mats, b_vecs, ridge: float = 0.0) -> ProblemInstance:
    """Build an instance from explicit per-agent (A_i, b_i) data."""
    a_mats = [np.asarray(a, dtype=float) for a in a_mats]
    b_vecs = [np.asarray(b, dtype=float).ravel() for b in b_vecs]
    if len(a_mats) != len(b_vecs) or not a_mats:
        raise ValueError("need matching non-empty A and b collections")
    d = a_mats[0].shape[1]
    for a, b in zip(a_mats, b_vecs):
        if a.ndim != 2 or a.shape[1] != d or a.shape[0] != b.shape[0]:
            raise ValueError("inconsistent per-agent data shapes")
    return _finish_instance(len(a_mats), d, a_mats, b_vecs, ridge, None, 1.0)


def gradient(instance: ProblemInstance, agent_index: int, x: np.ndarray) -> np.ndarray:
    """Gradient of agent ``agent_index`` at x: 2 A^T (A x - b) + 2 ridge x."""
    if not (0 <= agent_index < instance.n):
        raise ValueError(f"agent index {agent_index} out of range")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("gradient evaluation at non-finite point")
    a = instance.a_mats[agent_index]
    return 2.0 * (a.T @ (a @ x - instance.b_vecs[agent_index])) + 2.0 * instance.ridge * x


def gradient_matrix(instance: ProblemInstance, x_rows: np.ndarray) -> np.ndarray:
    """Stacked gradients: row i is grad f_i at x_rows[i].  Shape (n, d)."""
    x_rows = np.asarray(x_rows, dtype=float)
    out = np.empty_like(x_rows)
    for i in range(instance.n):
        a = instance.a_mats[i]
        out[i] = 2.0 * (a.T @ (a @ x_rows[i] - instance.b_vecs[i]))
    if instance.ridge:
        out += 2.0 * instance.ridge * x_rows
    return out


def total_gradient(instance: ProblemInstance, x: np.ndarray) -> np.ndarray:
    """sum_i grad f_i(x) at a common point x."""
    return instance.hessian_sum @ np.asarray(x, dtype=float) - instance.rhs_base


def cost(instance: ProblemInstance, agent_index: int, x: np.ndarray) -> float:
    a = instance.a_mats[agent_index]
    r = a @ x - instance.b_vecs[agent_index]
    return float(r @ r + instance.ridge * (x @ x))


def smoothness_constants(instance: ProblemInstance) -> tuple[float, float]:
    """(mu, L): tightest common strong-convexity / smoothness constants."""
    return instance.mu, instance.L


def solve_shifted_optimum(instance: ProblemInstance, rhs: np.ndarray) -> np.ndarray:
    """Unique x with sum_i grad f_i(x) = rhs (rhs = 0 recovers x_star)."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (instance.d,):
        raise ValueError(f"rhs must have shape ({instance.d},), got {rhs.shape}")
    if not np.all(np.isfinite(rhs)):
        raise ValueError("rhs must be finite")
    return _refined_solve(instance.hessian_sum, rhs + instance.rhs_base)


def export_csv(instance: ProblemInstance, directory) -> None:
    """Write per-agent A_i/b_i CSV files plus a metadata JSON."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, (a, b) in enumerate(zip(instance.a_mats, instance.b_vecs)):
        with open(directory / f"A_{i}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in a:
                writer.writerow([f"{v:.17g}" for v in row])
        with open(directory / f"b_{i}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"{v:.17g}" for v in b])
    meta = {
        "n": instance.n,
        "d": instance.d,
        "m_per_agent": instance.m_per_agent,
        "ridge": instance.ridge,
        "seed": instance.seed,
        "data_scale": instance.data_scale,
    }
    (directory / "instance.json").write_text(json.dumps(meta, indent=2) + "\n")


def import_csv(directory) -> ProblemInstance:
    """Rebuild an instance previously written by :func:`export_csv`."""
    directory = Path(directory)
    meta = json.loads((directory / "instance.json").read_text())
    a_mats, b_vecs = [], []
    for i in range(meta["n"]):
        with open(directory / f"A_{i}.csv", newline="") as fh:
            a_mats.append(np.array([[float(v) for v in row] for row in csv.reader(fh)]))
        with open(directory / f"b_{i}.csv", newline="") as fh:
            b_vecs.append(np.array([float(v) for v in next(csv.reader(fh))]))
    return _finish_instance(
        meta["n"], meta["d"], a_mats, b_vecs, meta["ridge"], meta["seed"], meta["data_scale"]
    )
