r"""Weighted, block-sparse square-root LASSO.

Solves

.. math:: \min_{z \in \mathbb{C}^{n \times K}}\;
   \lambda \sum_{j=1}^n v_j \|z_{j,:}\|_2 + \|A z - V\|_F

by the primal-dual hybrid gradient method of Chambolle and Pock.  The data
term is kept non-smooth; its conjugate is the indicator of the Frobenius unit
ball shifted by $\langle y, V\rangle$, whose prox is a projection.  The
regularizer's prox is row-wise (block) soft thresholding.

Also provides the weights and weighted cardinalities used to promote lower
set structure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import basis as _basis
from .basis import DictionarySpec
from .domains import DiscreteGrid
from .indexsets import lower_sets, weighted_cardinality
from .measures import SamplingPlan

__all__ = [
    "SrLassoProblem",
    "RecoveryResult",
    "sr_lasso",
    "objective",
    "block_soft_threshold",
    "default_lambda",
    "lower_set_weights",
    "weighted_cardinality",
    "k_lower",
    "spectral_norm",
]


@dataclass
class SrLassoProblem:
    """Problem data and solver options.

    Attributes:
        A: ``(m, n)`` design matrix.
        V: ``(m, K)`` data block (a vector is treated as ``K = 1``).
        lam: Regularization parameter, > 0.
        weights: Length-``n`` positive weights ``v``; ``None`` means all ones.
        max_iters: Iteration cap.
        tol: Stopping tolerance on relative iterate and objective change.
        tau, sigma: Primal and dual step sizes.  Default to ``1/L`` each with
            ``L`` the estimated spectral norm of ``A``.
    """

    A: np.ndarray
    V: np.ndarray
    lam: float
    weights: np.ndarray | None = None
    max_iters: int = 4000
    tol: float = 1e-8
    tau: float | None = None
    sigma: float | None = None
    z0: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.A = np.asarray(self.A)
        V = np.asarray(self.V)
        self.V = V[:, None] if V.ndim == 1 else V
        m, n = self.A.shape
        if self.V.shape[0] != m:
            raise ValueError("A and V have different row counts")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        w = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (n,) or np.any(~(w > 0)) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be n finite positive numbers")
        self.weights = w
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class RecoveryResult:
    coefficients: np.ndarray
    objective: float
    iterations: int
    converged: bool
    residual_norm: float
    history: np.ndarray = field(default=None, repr=False)


def block_soft_threshold(rows, threshold) -> np.ndarray:
    r"""Prox of $t\|\cdot\|_2$ applied row-wise: $r \max(0, 1 - t/\|r\|_2)$.

    ``rows`` may be one row (1-D) or a stack ``(n, K)``; ``threshold`` is a
    scalar or one value per row.
    """
    rows = np.asarray(rows)
    single = rows.ndim == 1
    R = rows[None, :] if single else rows
    t = np.asarray(threshold, dtype=float)
    if np.any(t < 0):
        raise ValueError("threshold must be nonnegative")
    norms = np.linalg.norm(R, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > 0, np.maximum(0.0, 1.0 - t / np.where(norms > 0, norms, 1.0)), 0.0)
    out = R * scale[:, None]
    return out[0] if single else out


def objective(A, V, z, lam: float, weights=None) -> float:
    V = V[:, None] if np.ndim(V) == 1 else V
    z = z[:, None] if np.ndim(z) == 1 else z
    w = np.ones(z.shape[0]) if weights is None else weights
    return float(lam * np.dot(w, np.linalg.norm(z, axis=1)) + np.linalg.norm(A @ z - V))


def spectral_norm(A, iters: int = 30, seed: int = 0) -> float:
    """Power-iteration estimate of ``||A||_2`` (deterministic start)."""
    A = np.asarray(A)
    x = np.random.default_rng(seed).standard_normal(A.shape[1]).astype(A.dtype)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = A.conj().T @ (A @ x)
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        est = math.sqrt(nrm)
        x = y / nrm
    return est


WINDOW = 10


def sr_lasso(problem: SrLassoProblem) -> RecoveryResult:
    """Primal-dual solve of the weighted block SR-LASSO.

    Convergence is declared when, over the last 10 iterations, both the
    relative change of the iterate and the relative change of the objective
    stay below ``tol``.  The best iterate seen (by objective) is returned, so
    the reported objective is nonincreasing in ``max_iters``.
    """
    p = problem
    A, V = p.A, p.V
    m, n = A.shape
    K = V.shape[1]
    dtype = np.result_type(A, V, float)
    thresh_base = p.lam * p.weights

    L = spectral_norm(A) * 1.01
    if L == 0:
        z = np.zeros((n, K), dtype=dtype)
        obj = objective(A, V, z, p.lam, p.weights)
        return RecoveryResult(z, obj, 0, True, float(np.linalg.norm(V)), np.array([obj]))
    tau = p.tau if p.tau is not None else 1.0 / L
    sigma = p.sigma if p.sigma is not None else 1.0 / L
    if tau * sigma * L**2 > 1.0 + 1e-12:
        raise ValueError("step sizes violate tau * sigma * L^2 <= 1")

    z = np.zeros((n, K), dtype=dtype) if p.z0 is None else np.array(p.z0, dtype=dtype).reshape(n, K)
    y = np.zeros((m, K), dtype=dtype)
    Az = A @ z
    zbar_A = Az.copy()
    best_obj = objective(A, V, z, p.lam, p.weights)
    best_z = z.copy()
    history = [best_obj]
    quiet = 0
    converged = False
    it = 0
    prev_obj = best_obj
    for it in range(1, p.max_iters + 1):
        # Dual step: prox of sigma F*, F(u) = ||u - V||_F.
        y = y + sigma * (zbar_A - V)
        ny = np.linalg.norm(y)
        if ny > 1.0:
            y /= ny
        # Primal step: block soft thresholding.
        z_new = block_soft_threshold(z - tau * (A.conj().T @ y), tau * thresh_base)
        Az_new = A @ z_new
        zbar_A = 2.0 * Az_new - Az

        obj = float(p.lam * np.dot(p.weights, np.linalg.norm(z_new, axis=1))
                    + np.linalg.norm(Az_new - V))
        dz = np.linalg.norm(z_new - z) / max(np.linalg.norm(z_new), 1e-300)
        dobj = abs(obj - prev_obj) / max(abs(obj), 1e-300)
        z, Az, prev_obj = z_new, Az_new, obj
        if obj < best_obj:
            best_obj, best_z = obj, z.copy()
        history.append(best_obj)
        quiet = quiet + 1 if (dz < p.tol and dobj < p.tol) else 0
        if quiet >= WINDOW:
            converged = True
            break

    if not np.iscomplexobj(A) and not np.iscomplexobj(V):
        best_z = best_z.real
    res = float(np.linalg.norm(A @ best_z - V))
    return RecoveryResult(best_z, best_obj, it, converged, res, np.asarray(history))


def default_lambda(s: int, a: float = 1.0) -> float:
    r"""$\lambda = \tfrac{15}{26}\sqrt{a/s}$."""
    if s < 1 or not a > 0:
        raise ValueError("need s >= 1 and a > 0")
    return 15.0 / 26.0 * math.sqrt(a) / math.sqrt(s)


def lower_set_weights(spec: DictionarySpec, grid: DiscreteGrid,
                      plan: SamplingPlan | None = None) -> np.ndarray:
    r"""$u_\iota = \max_i \sqrt{w(z_i)}\,|\phi_\iota(z_i)|$ over the plan's support.

    Without a plan $w \equiv 1$.  For an orthonormalized dictionary on its
    own grid this is the discrete sup-norm of each basis function.
    """
    if spec.family == "ortho" and spec.ortho.grid is grid:
        vals = spec.ortho.grid_values
    else:
        vals = _basis.evaluate(spec, grid.points)
    absval = np.abs(vals)
    if plan is None:
        return absval.max(axis=0)
    sup = plan.support
    return (np.sqrt(plan.weights[sup])[:, None] * absval[sup]).max(axis=0)


K_LOWER_MAX_D = 3
K_LOWER_MAX_S = 10


def k_lower(s: int, weights: Mapping | Callable, d: int) -> float:
    """``max |S|_v`` over lower sets ``S`` with at most ``s`` members.

    ``weights`` maps multi-index tuples to positive reals (a mapping or a
    callable).  Exhaustive, so restricted to ``d <= 3`` and ``s <= 10``;
    beyond that use the bound ``theta^2 * s``.
    """
    if d > K_LOWER_MAX_D or s > K_LOWER_MAX_S:
        raise ValueError(
            f"exact enumeration is limited to d <= {K_LOWER_MAX_D} and s <= {K_LOWER_MAX_S}; "
            "use the bound k(s; w) <= theta^2 * s instead")
    if s < 1:
        raise ValueError("s must be >= 1")
    return max(weighted_cardinality(S, weights) for S in lower_sets(d, s))
