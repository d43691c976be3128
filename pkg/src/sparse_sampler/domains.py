"""Sampling domains and finite Monte Carlo grids.

Every domain lives inside a bounding box (``[-1, 1]^d``, or ``[0, 1)^d`` for
the torus used with Fourier dictionaries).  Grids are built by rejection from
the uniform distribution on the box, so they are exactly uniform on the domain
whatever its shape.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .rng import StreamId, as_generator

__all__ = [
    "Domain",
    "DiscreteGrid",
    "RejectionError",
    "hypercube",
    "annulus",
    "cut_cube",
    "torus",
    "predicate",
    "from_name",
    "mc_grid",
    "uniform_probs",
    "save_grid",
    "load_grid",
]


class RejectionError(RuntimeError):
    """The domain occupies too small a fraction of its bounding box."""


@dataclass(frozen=True)
class Domain:
    kind: str
    dimension: int
    r_inner: float = 0.5
    callback: Callable | None = None

    @property
    def box(self) -> tuple[float, float]:
        return (0.0, 1.0) if self.kind == "torus" else (-1.0, 1.0)

    def contains(self, y) -> np.ndarray | bool:
        """Closed-set membership.  Accepts one point or an ``(N, d)`` array."""
        y = np.asarray(y, dtype=float)
        single = y.ndim == 1
        pts = np.atleast_2d(y)
        if pts.shape[1] != self.dimension:
            raise ValueError(f"point dimension {pts.shape[1]} != domain dimension {self.dimension}")
        lo, hi = self.box
        if self.kind == "torus":
            inside = np.all((pts >= lo) & (pts < hi), axis=1)
        else:
            inside = np.all(np.abs(pts) <= 1.0, axis=1)
        if self.kind == "annulus":
            r2 = np.sum(pts**2, axis=1)
            inside &= (r2 >= self.r_inner**2) & (r2 <= 1.0)
        elif self.kind == "cut_cube":
            inside &= pts.sum(axis=1) <= 1.0
        elif self.kind == "predicate":
            inside &= np.array([bool(self.callback(p)) for p in pts], dtype=bool)
        elif self.kind not in ("hypercube", "torus"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        return bool(inside[0]) if single else inside


def hypercube(d: int) -> Domain:
    return Domain("hypercube", d)


def annulus(d: int, r_inner: float = 0.5) -> Domain:
    return Domain("annulus", d, r_inner=r_inner)


def cut_cube(d: int) -> Domain:
    return Domain("cut_cube", d)


def torus(d: int) -> Domain:
    return Domain("torus", d)


def predicate(d: int, fn: Callable) -> Domain:
    return Domain("predicate", d, callback=fn)


_NAMES = {"cube": hypercube, "D1": hypercube, "hypercube": hypercube,
          "annulus": annulus, "D2": annulus,
          "cut": cut_cube, "D3": cut_cube, "cut_cube": cut_cube,
          "torus": torus}


def from_name(name: str, d: int) -> Domain:
    try:
        return _NAMES[name](d)
    except KeyError:
        raise ValueError(f"unknown domain {name!r}; choose from {sorted(_NAMES)}") from None


@dataclass(frozen=True)
class DiscreteGrid:
    points: np.ndarray
    seed_info: str = ""
    proposals: int = 0

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("grid needs at least one point")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def k(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def acceptance_rate(self) -> float:
        return self.k / self.proposals if self.proposals else 1.0


MIN_ACCEPTANCE = 1e-4
PROBE_PROPOSALS = 10**6


def mc_grid(domain: Domain, k: int, rng) -> DiscreteGrid:
    """``k`` i.i.d. uniform points on ``domain`` by rejection from its box.

    ``rng`` may be a :class:`~sparse_sampler.rng.StreamId` (recorded in the
    grid), a ``numpy`` Generator, or a seed.
    """
    if k < 1:
        raise ValueError("grid size must be >= 1")
    seed_info = str(rng) if isinstance(rng, StreamId) else ""
    gen = as_generator(rng)
    lo, hi = domain.box
    d = domain.dimension
    accepted: list[np.ndarray] = []
    n_acc = 0
    n_prop = 0
    batch = max(1024, k)
    while True:
        prop = lo + (hi - lo) * gen.random((batch, d))
        mask = domain.contains(prop)
        hits = np.flatnonzero(mask)
        need = k - n_acc
        if hits.size >= need:
            accepted.append(prop[hits[:need]])
            n_prop += int(hits[need - 1]) + 1
            break
        accepted.append(prop[hits])
        n_acc += hits.size
        n_prop += batch
        if n_prop >= PROBE_PROPOSALS and n_acc < MIN_ACCEPTANCE * n_prop:
            raise RejectionError(
                f"acceptance rate {n_acc / n_prop:.2e} below {MIN_ACCEPTANCE:g}")
        rate = max(n_acc, 1) / n_prop
        batch = int(min(max(1024, 1.2 * (k - n_acc) / rate), 4 * 10**6))
    return DiscreteGrid(np.concatenate(accepted), seed_info, n_prop)


def uniform_probs(grid: DiscreteGrid) -> np.ndarray:
    return np.full(grid.k, 1.0 / grid.k)


_GRID_MAGIC = b"SSGR"
_GRID_HEADER = struct.Struct("<4sqqq")


def save_grid(grid: DiscreteGrid, path) -> None:
    """Binary: magic, ``d``, ``k``, seed-info length, seed-info bytes,
    then row-major little-endian float64 points."""
    info = grid.seed_info.encode()
    with open(path, "wb") as fh:
        fh.write(_GRID_HEADER.pack(_GRID_MAGIC, grid.dimension, grid.k, len(info)))
        fh.write(info)
        fh.write(np.ascontiguousarray(grid.points, dtype="<f8").tobytes())


def load_grid(path) -> DiscreteGrid:
    raw = Path(path).read_bytes()
    magic, d, k, n_info = _GRID_HEADER.unpack_from(raw)
    if magic != _GRID_MAGIC:
        raise ValueError("not a grid file")
    off = _GRID_HEADER.size
    info = raw[off:off + n_info].decode()
    pts = np.frombuffer(raw, dtype="<f8", offset=off + n_info).reshape(k, d)
    return DiscreteGrid(pts, info)
