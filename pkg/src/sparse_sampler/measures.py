r"""Sampling measures on a finite grid.

A :class:`SamplingPlan` is a probability vector over grid points together with
the weight function $w$ linked to it by $\mu = w^{-1}\tau$, i.e.
``probs[i] * k * w[i] == 1`` wherever ``probs[i] > 0``.  Plans provided:

* Monte Carlo: uniform over the grid, $w \equiv 1$.
* LS-optimal: proportional to the reciprocal Christoffel function
  $K(z) = \sum_j |\upsilon_j(z)|^2$ of the target subspace.
* CS-optimal: proportional to $\max_j |\phi_j(z)|^2$.
* Preconditioned (Legendre only): the arcsine density.

Rows of the grid where the density vanishes get probability zero and weight
``inf``; they are never drawn.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .domains import DiscreteGrid
from .rng import as_generator

__all__ = [
    "SamplingPlan",
    "SampleSet",
    "ConstantsReport",
    "christoffel_on_grid",
    "mc_plan",
    "ls_optimal_plan",
    "ls_hierarchical_draw",
    "cs_optimal_plan",
    "preconditioning_weight",
    "preconditioned_plan",
    "draw",
    "draw_continuous",
    "nikolskii_sq",
    "constants_report",
]


@dataclass(frozen=True)
class SamplingPlan:
    scheme: str
    probs: np.ndarray
    weights: np.ndarray
    theta_sq: float | None = None

    @property
    def k(self) -> int:
        return self.probs.shape[0]

    @property
    def support(self) -> np.ndarray:
        return self.probs > 0


@dataclass(frozen=True)
class SampleSet:
    """Drawn points.  ``point_ids`` index the grid (``None`` for continuous
    draws); ``weights`` are ``w(y_i)``."""

    points: np.ndarray
    weights: np.ndarray
    scheme: str
    point_ids: np.ndarray | None = None
    stream: str = ""

    @property
    def m(self) -> int:
        return self.points.shape[0]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("sample weights must be finite and positive")


@dataclass
class ConstantsReport:
    theta_sq: float
    Theta_sq: float
    nikolskii_sq: float
    riesz_a: float
    riesz_b: float
    extra: dict = field(default_factory=dict)

    def to_json(self, **kw) -> str:
        d = asdict(self)
        d.update(d.pop("extra"))
        # NaN is not valid JSON; uncomputed constants are written as null.
        d = {key: (None if isinstance(v, float) and v != v else v) for key, v in d.items()}
        return json.dumps(d, allow_nan=False, **kw)


ORTHO_TOL = 1e-8


def _check_orthonormal(Q: np.ndarray) -> None:
    G = Q.conj().T @ Q
    err = np.abs(G - np.eye(G.shape[0])).max()
    if err > ORTHO_TOL:
        raise ValueError(f"columns are not orthonormal (max |Q^*Q - I| = {err:.2e})")


def christoffel_on_grid(Q) -> np.ndarray:
    """``K(z_i) = k * sum_j |Q_ij|^2`` for an orthonormal ``(k, s)`` matrix."""
    Q = np.asarray(Q)
    _check_orthonormal(Q)
    return Q.shape[0] * np.sum(np.abs(Q) ** 2, axis=1)


def _plan_from_density(scheme: str, density: np.ndarray, theta_sq=None) -> SamplingPlan:
    # density >= 0 over the grid; probs normalize it and w = 1 / (k probs).
    k = density.shape[0]
    total = density.sum()
    if not total > 0:
        raise ValueError("sampling density vanishes on the whole grid")
    probs = density / total
    with np.errstate(divide="ignore"):
        weights = np.where(probs > 0, 1.0 / (k * probs), np.inf)
    return SamplingPlan(scheme, probs, weights, theta_sq)


def mc_plan(grid: DiscreteGrid | int) -> SamplingPlan:
    k = grid if isinstance(grid, int) else grid.k
    return SamplingPlan("mc", np.full(k, 1.0 / k), np.ones(k))


def ls_optimal_plan(Q, grid: DiscreteGrid | None = None) -> SamplingPlan:
    r"""Nonhierarchical optimal plan, ``P(z_i) = (1/s) sum_j |Q_ij|^2``.

    The weights are ``w = s / K`` so the weighted Nikolskii constant
    $\max_i w(z_i) K(z_i)$ equals ``s``.
    """
    Q = np.asarray(Q)
    K = christoffel_on_grid(Q)
    s = Q.shape[1]
    plan = _plan_from_density("opt-nonhier", K)
    # Recompute on the support from K directly: w = s/K exactly.
    with np.errstate(divide="ignore"):
        w = np.where(K > 0, s / np.where(K > 0, K, 1.0), np.inf)
    return SamplingPlan(plan.scheme, plan.probs, w)


def ls_hierarchical_draw(Q, m: int, rng, grid: DiscreteGrid | None = None) -> SampleSet:
    """Hierarchical optimal draw: ``m / s`` points from each ``|Q_:j|^2``.

    Column ``j`` uses its own child stream when ``rng`` is a
    :class:`~sparse_sampler.rng.StreamId`, so the draws attached to the
    first columns do not change when columns are appended.
    """
    from .rng import StreamId

    Q = np.asarray(Q)
    k, s = Q.shape
    if m % s:
        raise ValueError(f"hierarchical sampling needs m to be a multiple of s={s}, got {m}")
    per = m // s
    K = christoffel_on_grid(Q)
    ids = []
    for j in range(s):
        gen = rng.child(j).generator() if isinstance(rng, StreamId) else as_generator(rng)
        ids.append(_categorical(np.abs(Q[:, j]) ** 2, per, gen))
    ids = np.concatenate(ids)
    w = s / K[ids]
    pts = grid.points[ids] if grid is not None else np.empty((m, 0))
    return SampleSet(pts, w, "opt-hier", ids, str(rng) if isinstance(rng, StreamId) else "")


def hierarchical_column_draws(Q, per_column: int, rng) -> list[np.ndarray]:
    """Grid ids drawn from each column density, one independent child stream
    per column.  Extending ``per_column`` keeps the earlier draws as a prefix."""
    Q = np.asarray(Q)
    return [_categorical(np.abs(Q[:, j]) ** 2, per_column, rng.child(j).generator())
            for j in range(Q.shape[1])]


def cs_optimal_plan(B, grid: DiscreteGrid | None = None) -> SamplingPlan:
    r"""``P(z_i) \propto max_j |B_ij|^2`` for the ``1/sqrt(k)``-scaled matrix.

    ``theta_sq`` on the returned plan is $\sum_i \max_j |B_{ij}|^2$ and
    ``w(z_i) = theta^2 / (k max_j |B_ij|^2)``.
    """
    B = np.asarray(B)
    if not np.all(np.isfinite(B)):
        raise ValueError("nonfinite grid matrix")
    rowmax = np.max(np.abs(B) ** 2, axis=1)
    theta_sq = float(rowmax.sum())
    if theta_sq == 0:
        raise ValueError("grid matrix is identically zero")
    plan = _plan_from_density("cs-opt", rowmax, theta_sq)
    k = B.shape[0]
    with np.errstate(divide="ignore"):
        w = np.where(rowmax > 0, theta_sq / (k * np.where(rowmax > 0, rowmax, 1.0)), np.inf)
    return SamplingPlan(plan.scheme, plan.probs, w, theta_sq)


def preconditioning_weight(y) -> np.ndarray:
    r"""$w(y) = \prod_k (\pi/2)\sqrt{1 - y_k^2}$ (arcsine / Chebyshev density)."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    return np.prod(0.5 * np.pi * np.sqrt(np.clip(1 - y**2, 0, None)), axis=1)


def preconditioned_plan(grid: DiscreteGrid) -> SamplingPlan:
    """Arcsine plan restricted to the grid.

    The plan's weights are the continuous weights rescaled by the grid mean of
    ``1/w`` so that the discrete normalization holds exactly.
    """
    w = preconditioning_weight(grid.points)
    if np.any(w == 0):
        raise ValueError("preconditioning weight vanishes at a grid point on the cube boundary")
    return _plan_from_density("precond", 1.0 / w)


def _categorical(probs: np.ndarray, m: int, gen: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(probs)
    u = gen.random(m) * cdf[-1]
    ids = np.searchsorted(cdf, u, side="right")
    return np.minimum(ids, probs.shape[0] - 1)


def draw(plan: SamplingPlan, m: int, rng, grid: DiscreteGrid | None = None) -> SampleSet:
    """``m`` i.i.d. grid draws from ``plan`` by inverse CDF."""
    from .rng import StreamId

    if m < 1:
        raise ValueError("m must be >= 1")
    ids = _categorical(plan.probs, m, as_generator(rng))
    pts = grid.points[ids] if grid is not None else np.empty((m, 0))
    return SampleSet(pts, plan.weights[ids], plan.scheme, ids,
                     str(rng) if isinstance(rng, StreamId) else "")


def draw_continuous(domain, m: int, rng) -> SampleSet:
    """Exact uniform draws on the hypercube or torus (Monte Carlo, ``w = 1``)."""
    if domain.kind not in ("hypercube", "torus"):
        raise ValueError("continuous draws are only closed-form on the hypercube and torus")
    lo, hi = domain.box
    pts = lo + (hi - lo) * as_generator(rng).random((m, domain.dimension))
    return SampleSet(pts, np.ones(m), "mc")


def nikolskii_sq(plan: SamplingPlan, K: np.ndarray) -> float:
    """Grid value of ``(N(P_S, w))^2 = max_i w(z_i) K(z_i)`` over the support."""
    sup = plan.support
    return float(np.max(plan.weights[sup] * K[sup]))


def constants_report(B, Q=None, plan: SamplingPlan | None = None) -> ConstantsReport:
    """Diagnostic constants of a ``1/sqrt(k)``-scaled grid matrix ``B``.

    ``Q`` (orthonormal basis of the target subspace) and ``plan`` are needed
    for the Nikolskii constant; without them it is reported as ``nan``.
    """
    B = np.asarray(B)
    k = B.shape[0]
    a2 = np.abs(B) ** 2
    theta_sq = float(a2.max(axis=1).sum())
    Theta_sq = float(k * a2.max())
    sv = np.linalg.svd(B, compute_uv=False)
    riesz_a = float(sv[-1] ** 2) if B.shape[0] >= B.shape[1] else 0.0
    nik = float("nan")
    if Q is not None and plan is not None:
        nik = nikolskii_sq(plan, christoffel_on_grid(Q))
    return ConstantsReport(theta_sq, Theta_sq, nik, riesz_a, float(sv[0] ** 2))
