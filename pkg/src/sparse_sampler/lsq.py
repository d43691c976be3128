r"""Weighted least-squares fitting.

With samples $y_i$ drawn from $\mu = w^{-1}\tau$ the weighted discrete problem
reads

.. math:: \min_{C} \|A C - V\|_F,\qquad
   A_{ij} = \sqrt{w(y_i)/m}\,\phi_j(y_i),\quad
   V_{ik} = \sqrt{w(y_i)/m}\,f_k(y_i).

Stability is reported through $\hat\alpha, \hat\beta$, the extreme eigenvalues
of $\tilde A^*\tilde A$ where $\tilde A$ is the design matrix expressed in a
basis that is orthonormal for $\tau$.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import lsqr

from . import basis as _basis
from .basis import DictionarySpec
from .measures import SampleSet

__all__ = [
    "FitResult",
    "assemble_ls",
    "solve_ls",
    "estimate_alpha_beta",
    "truncate_outputs",
    "SOLVERS",
]

log = logging.getLogger(__name__)

SOLVERS = ("qr", "svd", "cg")


@dataclass(frozen=True)
class FitResult:
    """Solution of a weighted least-squares problem.

    Attributes:
        coefficients: ``(s, K)`` coefficient block.
        alpha_hat: Smallest eigenvalue of the tau-orthonormal Gram matrix.
        beta_hat: Largest eigenvalue of the same.
        cond_bound: ``sqrt(beta_hat / alpha_hat)`` (``inf`` when singular).
        residual_norm: Frobenius norm of ``A C - V``.
        solver: ``"qr"``, ``"svd"`` or ``"cg"``; the solver actually used.
    """

    coefficients: np.ndarray
    alpha_hat: float
    beta_hat: float
    cond_bound: float
    residual_norm: float
    solver: str


def assemble_ls(samples: SampleSet, spec: DictionarySpec, values) -> tuple[np.ndarray, np.ndarray]:
    """Build ``(A, V)`` from weighted samples and target values ``(m, K)``."""
    values = np.asarray(values)
    if values.ndim == 1:
        values = values[:, None]
    m = samples.m
    if values.shape[0] != m:
        raise ValueError(f"{values.shape[0]} values for {m} samples")
    if not np.all(np.isfinite(values)):
        raise ValueError("nonfinite sample values")
    A = _basis.assemble_eval_matrix(spec, samples.points, "sqrt_w_over_sqrt_m",
                                    weights=samples.weights).values
    V = values * (np.sqrt(samples.weights) / np.sqrt(m))[:, None]
    return A, V


def estimate_alpha_beta(A, orthonormalizer=None) -> tuple[float, float]:
    """Empirical norm-equivalence constants.

    Args:
        A: ``(m, s)`` design matrix.
        orthonormalizer: Upper-triangular ``R`` of the grid QR of the
            dictionary, when its columns are not already tau-orthonormal.
            The design matrix is then replaced by ``A R^{-1}``.

    Returns:
        ``(sigma_min^2, sigma_max^2)`` of the (transformed) design matrix;
        ``alpha_hat`` is 0 when ``m < s``.
    """
    A = np.asarray(A)
    if orthonormalizer is not None:
        # A R^{-1} = (R^{-T} A^T)^T
        A = sla.solve_triangular(orthonormalizer, A.T, trans="T", lower=False).T
    sv = np.linalg.svd(A, compute_uv=False)
    beta = float(sv[0] ** 2)
    alpha = float(sv[-1] ** 2) if A.shape[0] >= A.shape[1] else 0.0
    return alpha, beta


def _rank_tol(A: np.ndarray, sv_max: float) -> float:
    return max(A.shape) * np.finfo(float).eps * sv_max


def solve_ls(A, V, solver: str = "qr", orthonormalizer=None) -> FitResult:
    r"""Least-squares solution $\hat C = A^\dagger V$.

    The thin-QR path is used when ``A`` has full column rank to working
    precision; otherwise the SVD pseudoinverse is engaged and a warning is
    logged.  ``"cg"`` runs LSQR on each right-hand side.
    """
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}")
    A = np.asarray(A)
    V = np.asarray(V)
    vec = V.ndim == 1
    if vec:
        V = V[:, None]
    m, s = A.shape
    if m < 1 or s < 1:
        raise ValueError("empty least-squares problem")
    if V.shape[0] != m:
        raise ValueError("row counts of A and V differ")
    alpha, beta = estimate_alpha_beta(A, orthonormalizer)
    sv = np.linalg.svd(A, compute_uv=False)
    full_rank = m >= s and sv[-1] > _rank_tol(A, sv[0])

    used = solver
    if solver == "qr" and not full_rank:
        log.warning("design matrix is rank deficient; falling back to the SVD pseudoinverse")
        used = "svd"
    if used == "qr":
        Qa, Ra = np.linalg.qr(A, mode="reduced")
        C = sla.solve_triangular(Ra, Qa.conj().T @ V, lower=False)
    elif used == "svd":
        C = np.linalg.pinv(A, rcond=_rank_tol(A, sv[0]) / sv[0]) @ V
    else:
        dtype = np.result_type(A, V)
        C = np.empty((s, V.shape[1]), dtype=dtype)
        for j in range(V.shape[1]):
            C[:, j] = lsqr(A, V[:, j], atol=1e-14, btol=1e-14, iter_lim=10 * s)[0]
    if not (np.iscomplexobj(A) or np.iscomplexobj(V)):
        C = C.real
    res = float(np.linalg.norm(A @ C - V))
    cond = float(np.sqrt(beta / alpha)) if alpha > 0 else float("inf")
    return FitResult(C[:, 0] if vec else C, alpha, beta, cond, res, used)


def truncate_outputs(C, k_h: int) -> np.ndarray:
    """Coordinate truncation: keep the first ``k_h`` output columns, zero the rest."""
    C = np.array(C, copy=True)
    if not 0 <= k_h <= C.shape[1]:
        raise ValueError("truncation level out of range")
    C[:, k_h:] = 0
    return C
