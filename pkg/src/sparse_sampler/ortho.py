r"""Orthonormalization of a dictionary over a discrete grid measure.

Given the grid matrix $B = (\phi_{\iota_j}(z_i)/\sqrt{k})$ with thin QR
factorization $B = QR$, the functions

.. math:: \upsilon_{\iota_i}(y) = \sum_{j \le i} (R^{-\top})_{ij}\,\phi_{\iota_j}(y)

are orthonormal in $L^2_\tau$, with grid values $\upsilon_{\iota_j}(z_i) =
\sqrt{k}\,Q_{ij}$.  Because $R$ is triangular the new basis depends on the
column order: the first $j$ functions span the same space as the first $j$
dictionary elements.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from . import basis as _basis
from . import domains as _domains
from . import indexsets as _indexsets
from .basis import DictionarySpec
from .domains import DiscreteGrid

__all__ = [
    "OrthoBasis",
    "RankDeficiencyError",
    "orthonormalize",
    "orthonormalize_dictionary",
    "riesz_constants",
    "ortho_constants",
    "save_basis",
    "load_basis",
]


class RankDeficiencyError(np.linalg.LinAlgError):
    def __init__(self, column: int, ratio: float):
        super().__init__(
            f"grid matrix is numerically rank deficient at column {column} "
            f"(|R_jj| / max|R_ii| = {ratio:.2e})")
        self.column = column


@dataclass(frozen=True)
class OrthoBasis:
    """Orthonormal basis with respect to the uniform measure on a grid.

    Attributes:
        Q: ``(k, n)`` matrix with orthonormal columns.
        R: ``(n, n)`` upper-triangular factor with positive diagonal.
        source: The dictionary that was orthonormalized.
        grid: The grid defining the discrete measure.
    """

    Q: np.ndarray
    R: np.ndarray
    source: DictionarySpec | None = None
    grid: DiscreteGrid | None = None

    @property
    def n(self) -> int:
        return self.R.shape[0]

    @property
    def k(self) -> int:
        return self.Q.shape[0]

    @property
    def ordering(self) -> str:
        return self.source.index_set.ordering if self.source is not None else "custom"

    @property
    def grid_values(self) -> np.ndarray:
        """``upsilon_j(z_i) = sqrt(k) Q_ij``."""
        return np.sqrt(self.k) * self.Q

    @property
    def transform(self) -> np.ndarray:
        """Lower-triangular ``R^{-T}``; row ``i`` expresses ``upsilon_i`` in the
        source dictionary."""
        eye = np.eye(self.n, dtype=self.R.dtype)
        return sla.solve_triangular(self.R, eye, trans="T", lower=False)

    def from_raw(self, raw: np.ndarray) -> np.ndarray:
        """Map raw dictionary values ``(N, n)`` to orthonormal-basis values."""
        # upsilon(y) = phi(y) R^{-1}, i.e. R^T upsilon(y)^T = phi(y)^T.
        return sla.solve_triangular(self.R, np.asarray(raw).T, trans="T", lower=False).T

    def evaluate(self, points) -> np.ndarray:
        if self.source is None:
            raise ValueError("off-grid evaluation needs the source dictionary")
        return self.from_raw(_basis.evaluate(self.source, points))

    def dictionary(self) -> DictionarySpec:
        return DictionarySpec("ortho", self.source.index_set, ortho=self)

    def prefix(self, n: int) -> "OrthoBasis":
        """The basis obtained from the first ``n`` dictionary elements."""
        src = None
        if self.source is not None:
            iset = self.source.index_set
            sub = _indexsets.MultiIndexSet(iset.indices[:n], "custom", iset.family)
            src = DictionarySpec(self.source.family, sub)
        return OrthoBasis(self.Q[:, :n], self.R[:n, :n], src, self.grid)


def _householder_qr(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # LAPACK geqrf: Householder, backward stable.
    Q, R = np.linalg.qr(B, mode="reduced")
    diag = np.diag(R)
    phase = np.where(diag == 0, 1.0, diag / np.where(diag == 0, 1.0, np.abs(diag)))
    # B = (Q D)(D^{-1} R) with D = diag(phase) makes the diagonal of R positive.
    Q = Q * phase[None, :]
    R = R * np.conj(phase)[:, None]
    if not np.iscomplexobj(B):
        Q, R = Q.real, R.real
    return Q, R


def orthonormalize(B, source: DictionarySpec | None = None, grid: DiscreteGrid | None = None,
                   check_rank: bool = True) -> OrthoBasis:
    """Thin QR of the ``1/sqrt(k)``-scaled grid matrix.

    Raises :class:`RankDeficiencyError` when some ``|R_jj|`` falls below
    ``k * eps * max|R_ii|``, unless ``check_rank`` is False (the factorization
    is then returned as computed, with ``Q`` still orthonormal).
    """
    B = np.asarray(B)
    k, n = B.shape
    if k < n:
        raise ValueError(f"need at least as many grid points ({k}) as functions ({n})")
    Q, R = _householder_qr(B)
    if check_rank:
        diag = np.abs(np.diag(R))
        tol = k * np.finfo(float).eps * diag.max()
        bad = np.flatnonzero(diag < tol)
        if bad.size:
            raise RankDeficiencyError(int(bad[0]), float(diag[bad[0]] / diag.max()))
    return OrthoBasis(Q, R, source, grid)


def orthonormalize_dictionary(spec: DictionarySpec, grid: DiscreteGrid,
                              check_rank: bool = True) -> OrthoBasis:
    B = _basis.assemble_eval_matrix(spec, grid.points, "one_over_sqrt_k").values
    return orthonormalize(B, spec, grid, check_rank=check_rank)


def riesz_constants(B) -> tuple[float, float]:
    """Optimal Riesz bounds ``(sigma_min^2, sigma_max^2)`` of a grid matrix."""
    sv = np.linalg.svd(np.asarray(B), compute_uv=False)
    return float(sv[-1] ** 2), float(sv[0] ** 2)


def ortho_constants(basis: OrthoBasis) -> tuple[float, float]:
    """``(theta^2, Theta^2)`` of the orthonormalized basis on its grid."""
    a2 = np.abs(basis.Q) ** 2
    return float(a2.max(axis=1).sum()), float(basis.k * a2.max())


# Packed upper triangle of R, row by row: n(n+1)/2 values (complex interleaved).
_MAGIC = b"SSOB"
_HEADER = struct.Struct("<4sBB2xqq")


def save_basis(basis: OrthoBasis, path) -> None:
    """Write the grid, index set and packed ``R`` next to each other.

    Produces ``path`` (R), ``path.grid`` and ``path.idx``.
    """
    path = Path(path)
    src = basis.source
    if src is None or basis.grid is None:
        raise ValueError("only bases built from a dictionary and grid can be saved")
    _domains.save_grid(basis.grid, path.with_suffix(path.suffix + ".grid"))
    _indexsets.save(src.index_set, path.with_suffix(path.suffix + ".idx"))
    iu = np.triu_indices(basis.n)
    packed = basis.R[iu]
    is_complex = np.iscomplexobj(packed)
    fam = ("legendre", "fourier").index(src.family)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, int(is_complex), fam, basis.n, basis.k))
        data = packed.astype(np.complex128 if is_complex else np.float64)
        fh.write(np.ascontiguousarray(data).view("<f8").tobytes())


def load_basis(path, check_rank: bool = True) -> OrthoBasis:
    """Reload a saved basis by refactorizing on the saved grid.

    The refactorization is deterministic, and the stored ``R`` is compared
    bitwise against it.
    """
    path = Path(path)
    raw = path.read_bytes()
    magic, is_complex, fam, n, k = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError("not an orthonormal-basis file")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if is_complex:
        data = data.view(np.complex128)
    grid = _domains.load_grid(path.with_suffix(path.suffix + ".grid"))
    iset = _indexsets.load(path.with_suffix(path.suffix + ".idx"))
    spec = DictionarySpec(("legendre", "fourier")[fam], iset)
    out = orthonormalize_dictionary(spec, grid, check_rank=check_rank)
    if out.k != k or out.n != n or not np.array_equal(out.R[np.triu_indices(n)], data):
        raise ValueError("stored R factor does not match the refactorized grid")
    return out
