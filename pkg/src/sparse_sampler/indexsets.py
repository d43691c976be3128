r"""Multi-index sets.

Finite subsets of $\mathbb{N}_0^d$ (or $\mathbb{Z}^d$ for trigonometric
dictionaries) used to enumerate dictionary functions.  Three isotropic
families of order $t$ are provided:

* tensor product:   $\max_k \iota_k \le t$
* total degree:     $\sum_k \iota_k \le t$
* hyperbolic cross: $\prod_k (\iota_k + 1) \le t + 1$

Sets are immutable; the member array is stored read-only with shape ``(n, d)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

__all__ = [
    "MultiIndexSet",
    "CardinalityError",
    "DEFAULT_CAP",
    "tensor_product",
    "total_degree",
    "hyperbolic_cross",
    "hyperbolic_cross_size",
    "from_family",
    "signed_variant",
    "is_lower",
    "reorder",
    "lower_sets",
    "save",
    "load",
    "weighted_cardinality",
]

DEFAULT_CAP = 10**7

ORDERINGS = ("lex", "total_degree", "max_degree")


class CardinalityError(OverflowError):
    """Raised when an index set would exceed the configured size cap."""


def _sort_key(ordering: str) -> Callable[[tuple[int, ...]], tuple]:
    # Within equal degree, (1,0) precedes (0,1): descending lexicographic on
    # the absolute entries, then on the signed entries.
    if ordering == "lex":
        return lambda i: i
    if ordering == "total_degree":
        return lambda i: (sum(map(abs, i)), tuple(-abs(x) for x in i), tuple(-x for x in i))
    if ordering == "max_degree":
        return lambda i: (max(map(abs, i)), sum(map(abs, i)), tuple(-abs(x) for x in i),
                          tuple(-x for x in i))
    raise ValueError(f"unknown ordering {ordering!r}; expected one of {ORDERINGS}")


@dataclass(frozen=True)
class MultiIndexSet:
    """An ordered, duplicate-free collection of multi-indices.

    Attributes:
        indices: Integer array of shape ``(n, d)``.
        ordering: One of ``"lex"``, ``"total_degree"``, ``"max_degree"``, or
            ``"custom"`` for user-supplied orders.
        family: Provenance, e.g. ``"HC:10"``, ``"TD:3"`` or ``"custom"``.
    """

    indices: np.ndarray
    ordering: str = "custom"
    family: str = "custom"
    _lookup: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        arr = np.asarray(self.indices, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("index set must be a nonempty (n, d) integer array")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "indices", arr)
        lookup = {tuple(row): j for j, row in enumerate(arr.tolist())}
        if len(lookup) != arr.shape[0]:
            raise ValueError("index set contains duplicate multi-indices")
        object.__setattr__(self, "_lookup", lookup)

    @property
    def dimension(self) -> int:
        return self.indices.shape[1]

    @property
    def signed(self) -> bool:
        return bool((self.indices < 0).any())

    def __len__(self) -> int:
        return self.indices.shape[0]

    def __iter__(self):
        return iter(tuple(r) for r in self.indices.tolist())

    def __contains__(self, item) -> bool:
        return tuple(int(x) for x in item) in self._lookup

    def position(self, item) -> int:
        return self._lookup[tuple(int(x) for x in item)]

    def as_set(self) -> frozenset:
        return frozenset(self._lookup)

    def __repr__(self) -> str:
        return (f"MultiIndexSet(d={self.dimension}, n={len(self)}, "
                f"ordering={self.ordering!r}, family={self.family!r})")


def _check_cap(count: int, cap: int) -> None:
    if count > cap:
        raise CardinalityError(f"index set of size {count} exceeds cap {cap}")


def _build(rows: Iterable[tuple[int, ...]], d: int, family: str, ordering: str) -> MultiIndexSet:
    rows = sorted(rows, key=_sort_key(ordering))
    return MultiIndexSet(np.array(rows, dtype=np.int64).reshape(-1, d), ordering, family)


def _check_args(d: int, t: int) -> None:
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if t < 0:
        raise ValueError("order must be >= 0")


def tensor_product(d: int, t: int, ordering: str = "total_degree",
                   cap: int = DEFAULT_CAP) -> MultiIndexSet:
    """All indices with every entry at most ``t``; ``(t+1)**d`` members."""
    _check_args(d, t)
    _check_cap((t + 1) ** d, cap)
    rows = itertools.product(range(t + 1), repeat=d)
    return _build(rows, d, f"TP:{t}", ordering)


def total_degree(d: int, t: int, ordering: str = "total_degree",
                 cap: int = DEFAULT_CAP) -> MultiIndexSet:
    """All indices with entry sum at most ``t``; ``C(d+t, d)`` members."""
    _check_args(d, t)
    _check_cap(math.comb(d + t, d), cap)

    def rec(k, budget):
        if k == 0:
            yield ()
            return
        for a in range(budget + 1):
            for rest in rec(k - 1, budget - a):
                yield (a,) + rest

    return _build(rec(d, t), d, f"TD:{t}", ordering)


def _hc_rows(d: int, bound: int, cap: int) -> list[tuple[int, ...]]:
    # Depth-first with the running product (iota_k + 1) as pruning bound.
    out: list[tuple[int, ...]] = []
    prefix = [0] * d

    def rec(k, remaining):
        if k == d:
            out.append(tuple(prefix))
            if len(out) > cap:
                raise CardinalityError(f"hyperbolic cross exceeds cap {cap}")
            return
        for a in range(remaining):
            prefix[k] = a
            rec(k + 1, remaining // (a + 1))
        prefix[k] = 0

    rec(0, bound)
    return out


def hyperbolic_cross(d: int, t: int, ordering: str = "total_degree",
                     cap: int = DEFAULT_CAP) -> MultiIndexSet:
    """All indices with ``prod(iota_k + 1) <= t + 1``."""
    _check_args(d, t)
    return _build(_hc_rows(d, t + 1, cap), d, f"HC:{t}", ordering)


def hyperbolic_cross_size(d: int, t: int) -> int:
    """Cardinality of the order-``t`` hyperbolic cross, without building it."""

    def count(k, bound):
        if k == 0:
            return 1
        return sum(count(k - 1, bound // a) for a in range(1, bound + 1))

    return count(d, t + 1)


_FAMILIES = {"TP": tensor_product, "TD": total_degree, "HC": hyperbolic_cross}


def from_family(spec: str, d: int, ordering: str = "total_degree") -> MultiIndexSet:
    """Build a set from a ``"HC:10"``-style family tag."""
    name, _, order = spec.partition(":")
    try:
        fn = _FAMILIES[name.upper()]
    except KeyError:
        raise ValueError(f"unknown index family {name!r}") from None
    return fn(d, int(order), ordering=ordering)


def signed_variant(iset: MultiIndexSet, cap: int = DEFAULT_CAP) -> MultiIndexSet:
    """Replace each index by all of its sign patterns (trigonometric case)."""
    if iset.signed:
        raise ValueError("signed_variant expects a nonnegative index set")
    nz = (iset.indices != 0).sum(axis=1)
    _check_cap(int((2 ** nz).sum()), cap)
    rows = set()
    for row in iset:
        choices = [(x,) if x == 0 else (x, -x) for x in row]
        rows.update(itertools.product(*choices))
    ordering = iset.ordering if iset.ordering in ORDERINGS else "total_degree"
    return _build(rows, iset.dimension, f"signed({iset.family})", ordering)


def is_lower(iset: MultiIndexSet) -> bool:
    """True iff the set is downward closed under componentwise ``<=``."""
    if iset.signed:
        raise ValueError("is_lower is defined for nonnegative index sets")
    members = iset.as_set()
    # Closure under single unit decrements implies closure under <=.
    for row in members:
        for k, x in enumerate(row):
            if x > 0 and row[:k] + (x - 1,) + row[k + 1:] not in members:
                return False
    return True


def reorder(iset: MultiIndexSet, ordering: str) -> MultiIndexSet:
    """Return the same members sorted by ``ordering`` (stable, deterministic)."""
    key = _sort_key(ordering)
    rows = sorted(iset, key=key)
    return MultiIndexSet(np.array(rows, dtype=np.int64), ordering, iset.family)


def lower_sets(d: int, s: int) -> list[frozenset]:
    """Enumerate every lower set in ``N_0^d`` with between 1 and ``s`` members.

    Exhaustive; intended for small ``d`` and ``s`` only.
    """
    origin = (0,) * d
    layers = [{frozenset([origin])}]
    for _ in range(s - 1):
        nxt = set()
        for S in layers[-1]:
            for cand in _addable(S, d):
                nxt.add(S | {cand})
        if not nxt:
            break
        layers.append(nxt)
    return [S for layer in layers for S in layer]


def _addable(S: frozenset, d: int):
    seen = set()
    for row in S:
        for k in range(d):
            cand = row[:k] + (row[k] + 1,) + row[k + 1:]
            if cand in S or cand in seen:
                continue
            seen.add(cand)
            if all(c == 0 or cand[:j] + (c - 1,) + cand[j + 1:] in S
                   for j, c in enumerate(cand)):
                yield cand


def save(iset: MultiIndexSet, path) -> None:
    """Write the plain-text format: a ``d n ordering family`` header line,
    then one whitespace-separated index per line."""
    lines = [f"{iset.dimension} {len(iset)} {iset.ordering} {iset.family}"]
    lines += [" ".join(str(x) for x in row) for row in iset.indices.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def load(path) -> MultiIndexSet:
    text = Path(path).read_text().split("\n")
    header = text[0].split()
    if len(header) != 4:
        raise ValueError("malformed index set header")
    d, n = int(header[0]), int(header[1])
    rows = [list(map(int, ln.split())) for ln in text[1:] if ln.strip()]
    if len(rows) != n or any(len(r) != d for r in rows):
        raise ValueError(f"expected {n} rows of {d} integers")
    return MultiIndexSet(np.array(rows, dtype=np.int64), header[2], header[3])


def weighted_cardinality(members: Iterable, weights: Mapping | Callable) -> float:
    r"""$|S|_v = \sum_{\iota \in S} v_\iota^2$."""
    get = weights if callable(weights) else weights.__getitem__
    return float(sum(get(tuple(m)) ** 2 for m in members))
