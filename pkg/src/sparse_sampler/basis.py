r"""Dictionary evaluation.

Two closed-form families are supported:

* tensor Legendre on $[-1,1]^d$, orthonormal for the uniform probability
  measure: $\phi_\iota(y) = \prod_k p_{\iota_k}(y_k)$ with
  $p_j = \sqrt{2j+1}\,P_j$;
* tensor Fourier on $[0,1)^d$: $\phi_\iota(y) = \exp(2\pi i\,\iota\cdot y)$.

A third family wraps a grid-orthogonalized basis (see :mod:`.ortho`).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .indexsets import MultiIndexSet

__all__ = [
    "DictionarySpec",
    "EvalMatrix",
    "legendre_1d",
    "legendre_table",
    "eval_tensor_legendre",
    "eval_tensor_fourier",
    "evaluate",
    "assemble_eval_matrix",
    "legendre_sup_norm_sq",
    "save_matrix",
    "load_matrix",
]

CLAMP_TOL = 1e-12
SCALINGS = ("raw", "one_over_sqrt_k", "sqrt_w_over_sqrt_m")


@dataclass(frozen=True)
class DictionarySpec:
    """Which functions make up the dictionary.

    ``family`` is ``"legendre"``, ``"fourier"`` or ``"ortho"``; for the last,
    ``ortho`` holds the :class:`~sparse_sampler.ortho.OrthoBasis` that does the
    evaluation.
    """

    family: str
    index_set: MultiIndexSet
    ortho: Any = None

    def __post_init__(self):
        if self.family == "legendre" and self.index_set.signed:
            raise ValueError("Legendre dictionaries need nonnegative indices")
        if self.family == "ortho" and self.ortho is None:
            raise ValueError("an 'ortho' dictionary needs its OrthoBasis")
        if self.family not in ("legendre", "fourier", "ortho"):
            raise ValueError(f"unknown dictionary family {self.family!r}")

    @property
    def dimension(self) -> int:
        return self.index_set.dimension

    def __len__(self) -> int:
        return len(self.index_set)


@dataclass(frozen=True)
class EvalMatrix:
    values: np.ndarray
    scaling: str = "raw"
    points: np.ndarray | None = None

    @property
    def shape(self):
        return self.values.shape


def _check_interval(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(y) > 1 + CLAMP_TOL) or not np.all(np.isfinite(y)):
        raise ValueError("Legendre arguments must lie in [-1, 1]")
    return np.clip(y, -1.0, 1.0)


def legendre_table(max_degree: int, y) -> np.ndarray:
    """Orthonormal Legendre values ``p_0..p_max_degree`` at ``y``.

    Returns an array of shape ``y.shape + (max_degree + 1,)``.
    """
    y = _check_interval(y)
    out = np.empty(y.shape + (max_degree + 1,))
    out[..., 0] = 1.0
    if max_degree >= 1:
        out[..., 1] = y
    for j in range(1, max_degree):
        out[..., j + 1] = ((2 * j + 1) * y * out[..., j] - j * out[..., j - 1]) / (j + 1)
    out *= np.sqrt(2 * np.arange(max_degree + 1) + 1)
    return out


def legendre_1d(degree: int, y):
    """Orthonormal Legendre polynomial ``p_degree`` at ``y`` (scalar or array)."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    vals = legendre_table(degree, y)[..., degree]
    return float(vals) if np.ndim(vals) == 0 else vals


def eval_tensor_legendre(index, y) -> float:
    index = np.asarray(index, dtype=int)
    y = np.asarray(y, dtype=float)
    if index.shape != y.shape:
        raise ValueError("index and point dimensions differ")
    return float(np.prod([legendre_1d(int(j), yk) for j, yk in zip(index, y)]))


def eval_tensor_fourier(index, y) -> complex:
    index = np.asarray(index, dtype=float)
    y = np.asarray(y, dtype=float)
    if index.shape != y.shape:
        raise ValueError("index and point dimensions differ")
    return complex(np.exp(2j * np.pi * np.dot(index, y)))


def _legendre_matrix(iset: MultiIndexSet, points: np.ndarray) -> np.ndarray:
    idx = iset.indices
    out = np.ones((points.shape[0], idx.shape[0]))
    for k in range(idx.shape[1]):
        table = legendre_table(int(idx[:, k].max()), points[:, k])
        out *= table[:, idx[:, k]]
    return out


def _fourier_matrix(iset: MultiIndexSet, points: np.ndarray) -> np.ndarray:
    # Reduce the phase mod 1 before exponentiating to keep |phi| = 1 exact-ish.
    phase = np.mod(points @ iset.indices.T.astype(float), 1.0)
    return np.exp(2j * np.pi * phase)


def evaluate(spec: DictionarySpec, points) -> np.ndarray:
    """Raw values ``phi_j(y_i)`` as a ``(len(points), n)`` array.

    Legendre values are real (float64); Fourier and orthonormalized Fourier
    values are complex.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != spec.dimension:
        raise ValueError(f"points have dimension {points.shape[1]}, dictionary has {spec.dimension}")
    if spec.family == "legendre":
        return _legendre_matrix(spec.index_set, points)
    if spec.family == "fourier":
        return _fourier_matrix(spec.index_set, points)
    return spec.ortho.evaluate(points)


def assemble_eval_matrix(spec: DictionarySpec, points, scaling: str = "raw",
                         weights=None) -> EvalMatrix:
    """Evaluation matrix with one of three row scalings.

    ``raw``: ``phi_j(y_i)``; ``one_over_sqrt_k``: divided by ``sqrt(k)`` (the
    grid matrix ``B``); ``sqrt_w_over_sqrt_m``: ``sqrt(w_i/m) phi_j(y_i)``
    (the design matrix ``A``).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if scaling not in SCALINGS:
        raise ValueError(f"unknown scaling {scaling!r}")
    if (weights is not None) != (scaling == "sqrt_w_over_sqrt_m"):
        raise ValueError("weights are required exactly for the sqrt_w_over_sqrt_m scaling")
    vals = evaluate(spec, points)
    k = points.shape[0]
    if scaling == "one_over_sqrt_k":
        vals = vals / np.sqrt(k)
    elif scaling == "sqrt_w_over_sqrt_m":
        w = np.asarray(weights, dtype=float)
        if w.shape != (k,):
            raise ValueError("one weight per point expected")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be finite and positive")
        vals = vals * (np.sqrt(w) / np.sqrt(k))[:, None]
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("nonfinite dictionary values")
    return EvalMatrix(vals, scaling, points)


def legendre_sup_norm_sq(iset: MultiIndexSet) -> np.ndarray:
    r"""$\|\phi_\iota\|_\infty^2 = \prod_k (2\iota_k + 1)$ for each index."""
    return np.prod(2 * iset.indices + 1, axis=1).astype(float)


# Binary layout shared by matrices and coefficient blocks:
#   magic "SSMX", u8 complex flag, u8 scaling tag, 2 pad bytes,
#   i64 rows, i64 cols, then row-major little-endian float64
#   (re, im interleaved when complex).
_MAGIC = b"SSMX"
_HEADER = struct.Struct("<4sBB2xqq")


def save_matrix(values, path, scaling: str = "raw") -> None:
    values = np.asarray(values)
    is_complex = np.iscomplexobj(values)
    rows, cols = values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, int(is_complex), SCALINGS.index(scaling), rows, cols))
        data = values.astype(np.complex128 if is_complex else np.float64)
        fh.write(np.ascontiguousarray(data).view("<f8").tobytes())


def load_matrix(path) -> tuple[np.ndarray, str]:
    raw = Path(path).read_bytes()
    magic, is_complex, tag, rows, cols = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError("not a matrix file")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if is_complex:
        data = data.view(np.complex128)
    return data.reshape(rows, cols).copy(), SCALINGS[tag]
