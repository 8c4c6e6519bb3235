"""Dense/sparse multiway arrays and rank-one expansion algebra.

All heavy operations reduce to BLAS calls on contiguous row-major float64
arrays. Objects are immutable after construction, so they are safe to share
between threads; every function here is pure.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DenseTensor",
    "SparseTensor",
    "RankOneTerm",
    "SeparatedExpansion",
    "as_dense",
    "reconstruct",
    "contract_except",
    "sup_norm",
    "residual",
]

# Guard against accidentally materializing a huge grid (see reconstruct()).
DEFAULT_ELEMENT_CAP = int(1e8)


def _check_shape(shape: tuple[int, ...]) -> None:
    if len(shape) < 1:
        raise ValueError("tensor order must be >= 1")
    for axis, n in enumerate(shape):
        if n < 1:
            raise ValueError(f"axis {axis} has non-positive length {n}")


class DenseTensor:
    """Immutable dense tensor: row-major flat float64 storage."""

    __slots__ = ("_array",)

    def __init__(self, array: np.ndarray | Iterable):
        arr = np.array(array, dtype=np.float64, order="C", copy=True)
        _check_shape(arr.shape)
        arr.flags.writeable = False
        self._array = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "DenseTensor":
        """Take ownership of a freshly built contiguous float64 array (no copy)."""
        out = object.__new__(cls)
        _check_shape(arr.shape)
        arr.flags.writeable = False
        out._array = arr
        return out

    @property
    def array(self) -> np.ndarray:
        """Read-only ndarray view."""
        return self._array

    @property
    def data(self) -> np.ndarray:
        """Flat row-major view of the entries."""
        return self._array.reshape(-1)

    @property
    def shape(self) -> tuple[int, ...]:
        return self._array.shape

    @property
    def order(self) -> int:
        return self._array.ndim

    @property
    def size(self) -> int:
        return self._array.size

    def __repr__(self) -> str:
        return f"DenseTensor(shape={self.shape})"


def as_dense(x) -> DenseTensor:
    """Coerce an ndarray (or nested sequence) into a DenseTensor."""
    return x if isinstance(x, DenseTensor) else DenseTensor(np.asarray(x, dtype=np.float64))


class SparseTensor:
    """Sparse tensor in sorted coordinate (COO) format.

    Multi-indices are unique, lexicographically sorted and in bounds; explicit
    zeros are stripped on construction.
    """

    __slots__ = ("_shape", "_coords", "_values")

    def __init__(self, shape: Sequence[int], coords: np.ndarray, values: np.ndarray):
        shape = tuple(int(n) for n in shape)
        _check_shape(shape)
        coords = np.ascontiguousarray(coords, dtype=np.int64).reshape(-1, len(shape))
        values = np.ascontiguousarray(values, dtype=np.float64).reshape(-1)
        if coords.shape[0] != values.shape[0]:
            raise ValueError(
                f"{coords.shape[0]} multi-indices but {values.shape[0]} values"
            )
        keep = values != 0.0
        coords, values = coords[keep], values[keep]
        if coords.size:
            lo = coords.min(axis=0)
            hi = coords.max(axis=0)
            for axis in range(len(shape)):
                if lo[axis] < 0 or hi[axis] >= shape[axis]:
                    raise ValueError(f"index out of bounds on axis {axis}")
            order = np.lexsort(coords.T[::-1])
            coords, values = coords[order], values[order]
            if coords.shape[0] > 1 and (np.diff(
                    np.ravel_multi_index(coords.T, shape)) == 0).any():
                raise ValueError("duplicate multi-indices")
        coords.flags.writeable = False
        values.flags.writeable = False
        self._shape = shape
        self._coords = coords
        self._values = values

    @classmethod
    def empty(cls, shape: Sequence[int]) -> "SparseTensor":
        d = len(tuple(shape))
        return cls(shape, np.empty((0, d), dtype=np.int64), np.empty(0))

    @classmethod
    def from_entries(cls, shape, entries) -> "SparseTensor":
        """Build from an iterable of (multi_index, value) pairs."""
        entries = list(entries)
        if not entries:
            return cls.empty(shape)
        coords = np.array([idx for idx, _ in entries], dtype=np.int64)
        values = np.array([v for _, v in entries], dtype=np.float64)
        return cls(shape, coords, values)

    @classmethod
    def from_dense(cls, dense: DenseTensor | np.ndarray) -> "SparseTensor":
        arr = as_dense(dense).array
        coords = np.argwhere(arr != 0.0)
        return cls(arr.shape, coords, arr[tuple(coords.T)] if coords.size else np.empty(0))

    @property
    def shape(self) -> tuple[int, ...]:
        return self._shape

    @property
    def order(self) -> int:
        return len(self._shape)

    @property
    def coords(self) -> np.ndarray:
        """(nnz, order) int64 array of sorted multi-indices."""
        return self._coords

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def nnz(self) -> int:
        return self._values.shape[0]

    @property
    def sparsity(self) -> float:
        """Fraction of zero-valued entries, in [0, 1]."""
        total = int(np.prod(self._shape))
        return 1.0 - self.nnz / total

    def densify(self) -> DenseTensor:
        arr = np.zeros(self._shape)
        if self.nnz:
            arr[tuple(self._coords.T)] = self._values
        return DenseTensor(arr)

    def add_into(self, out: np.ndarray) -> None:
        """Accumulate the stored entries into a writable dense array."""
        if out.shape != self._shape:
            raise ValueError(f"target shape {out.shape} != {self._shape}")
        if self.nnz:
            out[tuple(self._coords.T)] += self._values

    def __repr__(self) -> str:
        return f"SparseTensor(shape={self.shape}, nnz={self.nnz}, sparsity={self.sparsity:.4f})"


class RankOneTerm:
    """One rank-one term: the outer product of a vector per axis."""

    __slots__ = ("_factors",)

    def __init__(self, factors: Sequence[np.ndarray]):
        if len(factors) < 1:
            raise ValueError("a rank-one term needs at least one factor")
        fs = []
        for axis, f in enumerate(factors):
            f = np.ascontiguousarray(f, dtype=np.float64).reshape(-1)
            if f.size < 1:
                raise ValueError(f"factor for axis {axis} is empty")
            f.flags.writeable = False
            fs.append(f)
        self._factors = tuple(fs)

    @property
    def factors(self) -> tuple[np.ndarray, ...]:
        return self._factors

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.size for f in self._factors)

    @property
    def order(self) -> int:
        return len(self._factors)

    def reconstruct(self) -> np.ndarray:
        out = self._factors[0]
        for f in self._factors[1:]:
            out = np.multiply.outer(out, f)
        return out

    def scaled(self, s: float) -> "RankOneTerm":
        """Same term with the first factor scaled by s."""
        return RankOneTerm((self._factors[0] * s,) + self._factors[1:])

    def __repr__(self) -> str:
        return f"RankOneTerm(shape={self.shape})"


class SeparatedExpansion:
    """An ordered sum of rank-one terms over a common shape."""

    __slots__ = ("_shape", "_terms")

    def __init__(self, shape: Sequence[int], terms: Sequence[RankOneTerm] = ()):
        shape = tuple(int(n) for n in shape)
        _check_shape(shape)
        for m, t in enumerate(terms):
            _require_same_shape(t.shape, shape, f"term {m}")
        self._shape = shape
        self._terms = tuple(terms)

    @property
    def shape(self) -> tuple[int, ...]:
        return self._shape

    @property
    def terms(self) -> tuple[RankOneTerm, ...]:
        return self._terms

    @property
    def n_terms(self) -> int:
        return len(self._terms)

    def with_term(self, term: RankOneTerm) -> "SeparatedExpansion":
        _require_same_shape(term.shape, self._shape, f"term {len(self._terms)}")
        return SeparatedExpansion(self._shape, self._terms + (term,))

    def __repr__(self) -> str:
        return f"SeparatedExpansion(shape={self.shape}, n_terms={self.n_terms})"


def _require_same_shape(got, expected, what: str) -> None:
    got, expected = tuple(got), tuple(expected)
    if len(got) != len(expected):
        raise ValueError(f"{what}: order {len(got)} != expected {len(expected)}")
    for axis, (a, b) in enumerate(zip(got, expected)):
        if a != b:
            raise ValueError(f"{what}: axis {axis} has length {a}, expected {b}")


def reconstruct(
    expansion: SeparatedExpansion,
    enrichments: Sequence[SparseTensor] = (),
    element_cap: int = DEFAULT_ELEMENT_CAP,
) -> DenseTensor:
    """Densely materialize separated terms plus sparse enrichments.

    The element cap guards against accidental blowup on large grids; callers
    that only need slices should reconstruct those instead.
    """
    shape = expansion.shape
    if int(np.prod(shape)) > element_cap:
        raise ValueError(
            f"reconstruction of {shape} exceeds the element cap {element_cap:g}"
        )
    out = np.zeros(shape)
    for term in expansion.terms:
        out += term.reconstruct()
    for k, enr in enumerate(enrichments):
        _require_same_shape(enr.shape, shape, f"enrichment {k}")
        enr.add_into(out)
    return DenseTensor(out)


def contract_except(
    tensor: DenseTensor | np.ndarray,
    factors: Sequence[np.ndarray | None],
    free_axis: int,
) -> np.ndarray:
    """Contract every axis but one against the supplied factor vectors.

    Returns v with v[i] = sum over all other indices of
    tensor[..., i, ...] * prod_j factors[j][i_j]; equivalently the mode
    unfolding at ``free_axis`` applied to the Khatri-Rao column of the other
    factors. ``factors[free_axis]`` is ignored (may be None).

    Axes are contracted in descending order, each as one BLAS reduction, so
    the floating-point reduction order is fixed and results are deterministic.
    """
    arr = as_dense(tensor).array
    d = arr.ndim
    if not -d <= free_axis < d:
        raise ValueError(f"free_axis {free_axis} out of range for order {d}")
    free_axis %= d
    if len(factors) != d:
        raise ValueError(f"expected {d} factor slots, got {len(factors)}")
    for axis in range(d - 1, -1, -1):
        if axis == free_axis:
            continue
        f = np.asarray(factors[axis], dtype=np.float64).reshape(-1)
        if f.size != arr.shape[axis]:
            raise ValueError(
                f"factor for axis {axis} has length {f.size}, expected {arr.shape[axis]}"
            )
        arr = np.tensordot(arr, f, axes=([axis], [0]))
    return np.ascontiguousarray(arr)


def sup_norm(tensor: DenseTensor | np.ndarray) -> float:
    """Maximum absolute entry."""
    arr = as_dense(tensor).array
    if arr.size == 0:
        raise ValueError("sup_norm of an empty tensor")
    return float(np.abs(arr).max())


def residual(
    data: DenseTensor | np.ndarray,
    expansion: SeparatedExpansion,
    enrichments: Sequence[SparseTensor] = (),
) -> DenseTensor:
    """data minus the reconstructed model."""
    arr = as_dense(data).array
    _require_same_shape(expansion.shape, arr.shape, "expansion")
    model = reconstruct(expansion, enrichments, element_cap=arr.size)
    return DenseTensor(arr - model.array)
