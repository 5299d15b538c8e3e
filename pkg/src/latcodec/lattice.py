"""Uniform quantization lattices in 1, 2 and 3 dimensions.

Three cell shapes are supported: the integer grid (intervals), the
hexagonal A2 lattice (regular hexagons) and the BCC lattice (truncated
octahedra).  All lattices are parameterized by the Voronoi cell volume,
so grids of different dimension can be compared at equal code budget.

Nearest-point search never scans a codebook: the hexagonal and BCC
lattices are each the union of two rectangular/cubic cosets, so the
nearest center is found by rounding in each coset and keeping the
closer candidate.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

MAX_DICTIONARY_CODES = 1 << 16

_SQRT3 = np.sqrt(3.0)


class LatticeKind(enum.Enum):
    INTEGER = "sq"
    HEX = "hex"
    TRUNC_OCT = "oct"

    @classmethod
    def from_name(cls, name):
        for kind in cls:
            if kind.value == name or kind.name.lower() == str(name).lower():
                return kind
        raise ValueError(f"unknown lattice kind: {name!r}")


_DIMENSION = {LatticeKind.INTEGER: 1, LatticeKind.HEX: 2, LatticeKind.TRUNC_OCT: 3}


def _round_half_away(x):
    """Round to nearest integer, halves away from zero (platform independent)."""
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass(frozen=True)
class LatticeSpec:
    """A uniform lattice with Voronoi cells of the given volume.

    ``volume`` is the v-dimensional cell volume (u**v for per-dimension
    unit size u), so e.g. volume=1 gives unit intervals, unit-area
    hexagons and unit-volume truncated octahedra.
    """

    kind: LatticeKind
    volume: float

    def __post_init__(self):
        if not np.isfinite(self.volume) or self.volume <= 0:
            raise ValueError("lattice volume must be positive and finite")

    @property
    def ndim(self) -> int:
        return _DIMENSION[self.kind]

    @cached_property
    def side_length(self) -> float:
        """Cell side length a (interval width for the integer grid)."""
        if self.kind is LatticeKind.INTEGER:
            return self.volume
        if self.kind is LatticeKind.HEX:
            # hexagon area 3*sqrt(3)*a^2/2 == volume
            return float(np.sqrt(2.0 * self.volume / (3.0 * _SQRT3)))
        # truncated octahedron volume 8*sqrt(2)*a^3 == volume
        return float((self.volume / (8.0 * np.sqrt(2.0))) ** (1.0 / 3.0))

    @cached_property
    def coset_period(self) -> np.ndarray:
        """Per-axis period of the rectangular sublattice shared by both cosets."""
        a = self.side_length
        if self.kind is LatticeKind.INTEGER:
            return np.array([self.volume])
        if self.kind is LatticeKind.HEX:
            return np.array([3.0 * a, _SQRT3 * a])
        cube = (2.0 * self.volume) ** (1.0 / 3.0)
        return np.array([cube, cube, cube])

    @cached_property
    def coset_offsets(self) -> np.ndarray:
        if self.kind is LatticeKind.INTEGER:
            return np.zeros((1, 1))
        return np.stack([np.zeros(self.ndim), 0.5 * self.coset_period])

    @cached_property
    def basis(self) -> np.ndarray:
        """Generator matrix; column j is the j-th basis vector."""
        a = self.side_length
        if self.kind is LatticeKind.INTEGER:
            return np.array([[self.volume]])
        if self.kind is LatticeKind.HEX:
            return np.array([[1.5 * a, 0.0], [0.5 * _SQRT3 * a, _SQRT3 * a]])
        cube = self.coset_period[0]
        return np.array(
            [
                [cube, 0.0, 0.5 * cube],
                [0.0, cube, 0.5 * cube],
                [0.0, 0.0, 0.5 * cube],
            ]
        )

    @cached_property
    def circumradius(self) -> float:
        """Largest distance from a cell center to its cell boundary."""
        a = self.side_length
        if self.kind is LatticeKind.INTEGER:
            return 0.5 * self.volume
        if self.kind is LatticeKind.HEX:
            return a
        return 0.25 * np.sqrt(5.0) * self.coset_period[0]

    def cell_contains(self, delta, strict=False):
        """Whether offsets ``delta`` from a center lie inside the Voronoi cell.

        Every cell here is an intersection of constraints of the form
        sum_i w_i*|delta_i| <= t, which is what makes the box-intersection
        test in :func:`enumerate_dictionary` exact.
        """
        delta = np.atleast_2d(np.abs(np.asarray(delta, dtype=float)))
        lt = np.less if strict else np.less_equal
        if self.kind is LatticeKind.INTEGER:
            ok = lt(delta[:, 0], 0.5 * self.volume)
        elif self.kind is LatticeKind.HEX:
            a = self.side_length
            ok = lt(delta[:, 1], 0.5 * _SQRT3 * a)
            ok &= lt(_SQRT3 * delta[:, 0] + delta[:, 1], _SQRT3 * a)
        else:
            half = 0.5 * self.coset_period[0]
            ok = np.all(lt(delta, half), axis=1)
            ok &= lt(delta.sum(axis=1), 1.5 * half)
        return ok


@dataclass(frozen=True)
class LatticePoint:
    """A lattice center: real coordinates plus integer basis coordinates."""

    coords: np.ndarray
    int_coords: tuple
    index: int | None = None


def dequantize(point: LatticePoint) -> np.ndarray:
    """Reconstruction is the cell center itself."""
    return np.asarray(point.coords, dtype=float)


def _coset_round(X, lattice):
    """Nearest lattice point per row of X.

    Returns (coset index, per-coset integer coords, centers).  Ties between
    cosets go to coset 0, the one containing the origin; within a coset,
    componentwise rounding uses half-away-from-zero.
    """
    period = lattice.coset_period
    offsets = lattice.coset_offsets
    best_n = None
    best_c = None
    best_d = None
    best_k = None
    for k, off in enumerate(offsets):
        n = _round_half_away((X - off) / period)
        cand = n * period + off
        d = np.sum((X - cand) ** 2, axis=1)
        if best_d is None:
            best_n, best_c, best_d = n, cand, d
            best_k = np.zeros(len(X), dtype=np.int64)
        else:
            take = d < best_d  # strict: equidistant keeps coset 0
            best_n = np.where(take[:, None], n, best_n)
            best_c = np.where(take[:, None], cand, best_c)
            best_d = np.where(take, d, best_d)
            best_k = np.where(take, k, best_k)
    return best_k, best_n.astype(np.int64), best_c


def _int_coords_from_coset(kind, coset, n):
    """Map (coset, per-coset integer coords) to basis integer coordinates."""
    if kind is LatticeKind.INTEGER:
        return n
    out = np.empty_like(n)
    if kind is LatticeKind.HEX:
        p, q = n[:, 0], n[:, 1]
        out[:, 0] = 2 * p + coset
        out[:, 1] = q - p
    else:
        p, q, r = n[:, 0], n[:, 1], n[:, 2]
        out[:, 0] = p - r
        out[:, 1] = q - r
        out[:, 2] = 2 * r + coset
    return out


def nearest_int_coords(X, lattice: LatticeSpec) -> np.ndarray:
    """Integer basis coordinates of the nearest lattice point for each row."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != lattice.ndim:
        raise ValueError("invalid input: wrong dimension")
    if not np.all(np.isfinite(X)):
        raise ValueError("invalid input")
    coset, n, _ = _coset_round(X, lattice)
    return _int_coords_from_coset(lattice.kind, coset, n)


def center_of(int_coords, lattice: LatticeSpec) -> np.ndarray:
    """Real coordinates of lattice points given integer basis coordinates."""
    n = np.atleast_2d(np.asarray(int_coords, dtype=np.int64))
    return n @ lattice.basis.T


def nearest_point(x, lattice: LatticeSpec) -> LatticePoint:
    """Nearest lattice center to a single v-vector (or scalar for 1D)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ic = nearest_int_coords(x[None, :], lattice)[0]
    coords = center_of(ic[None, :], lattice)[0]
    return LatticePoint(coords=coords, int_coords=tuple(int(v) for v in ic))


def second_moment(kind: LatticeKind, volume: float) -> float:
    """Per-dimension MSE of a uniform source over one cell of the given volume."""
    if volume <= 0:
        raise ValueError("volume must be positive")
    if kind is LatticeKind.INTEGER:
        return volume**2 / 12.0
    if kind is LatticeKind.HEX:
        return 5.0 * _SQRT3 * volume / 108.0
    return 19.0 * volume ** (2.0 / 3.0) / (48.0 * (8.0 * np.sqrt(2.0)) ** (2.0 / 3.0))


class Dictionary:
    """Finite, deterministically ordered set of lattice centers.

    Centers are every lattice point whose Voronoi cell intersects the
    bounding box, sorted lexicographically by integer basis coordinates.
    """

    def __init__(self, lattice: LatticeSpec, int_coords, bounds):
        self.lattice = lattice
        self.int_coords = np.asarray(int_coords, dtype=np.int64)
        self.bounds = np.asarray(bounds, dtype=float)
        self.centers = center_of(self.int_coords, lattice)
        self._lo = self.int_coords.min(axis=0)
        shape = self.int_coords.max(axis=0) - self._lo + 1
        grid = np.full(shape, -1, dtype=np.int64)
        rel = self.int_coords - self._lo
        grid[tuple(rel.T)] = np.arange(len(self.int_coords))
        self._grid = grid

    def __len__(self):
        return len(self.int_coords)

    @property
    def size(self):
        return len(self.int_coords)

    def index_of(self, int_coords) -> np.ndarray:
        """Dictionary index per row of integer coords; -1 when not listed."""
        ic = np.atleast_2d(np.asarray(int_coords, dtype=np.int64))
        rel = ic - self._lo
        inside = np.all((rel >= 0) & (rel < self._grid.shape), axis=1)
        out = np.full(len(ic), -1, dtype=np.int64)
        if inside.any():
            out[inside] = self._grid[tuple(rel[inside].T)]
        return out

    def point(self, index: int) -> LatticePoint:
        return LatticePoint(
            coords=self.centers[index],
            int_coords=tuple(int(v) for v in self.int_coords[index]),
            index=int(index),
        )

    def encode(self, X) -> np.ndarray:
        """Quantize rows of X to dictionary indices.

        Points whose nearest cell falls outside the dictionary are clamped
        into the bounding box and requantized (boundary-cell clamping; there
        is no escape symbol).
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not np.all(np.isfinite(X)):
            raise ValueError("invalid input")
        idx = self.index_of(nearest_int_coords(X, self.lattice))
        miss = idx < 0
        if miss.any():
            clamped = np.clip(X[miss], self.bounds[:, 0], self.bounds[:, 1])
            idx2 = self.index_of(nearest_int_coords(clamped, self.lattice))
            still = idx2 < 0
            if still.any():
                # boundary-degenerate stragglers: nearest listed center wins
                pts = clamped[still]
                d = ((pts[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
                idx2[still] = np.argmin(d, axis=1)
            idx[miss] = idx2
        return idx


def enumerate_dictionary(lattice: LatticeSpec, bounds) -> Dictionary:
    """List every lattice center whose cell intersects the bounding box.

    ``bounds`` is one (lo, hi) interval per axis.  The intersection test is
    exact: a cell meets the box iff the box point nearest to the center lies
    inside the (open) cell, which holds because all cell constraints are
    separable in |delta_i|.
    """
    bounds = np.asarray(bounds, dtype=float).reshape(lattice.ndim, 2)
    if np.any(bounds[:, 1] <= bounds[:, 0]) or not np.all(np.isfinite(bounds)):
        raise ValueError("bounds must be finite, non-degenerate intervals")
    r = lattice.circumradius
    period = lattice.coset_period
    pieces = []
    for coset, off in enumerate(lattice.coset_offsets):
        lo = np.ceil((bounds[:, 0] - r - off) / period).astype(np.int64)
        hi = np.floor((bounds[:, 1] + r - off) / period).astype(np.int64)
        axes = [np.arange(l, h + 1) for l, h in zip(lo, hi)]
        if any(len(ax) == 0 for ax in axes):
            continue
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lattice.ndim)
        centers = mesh * period + off
        delta = np.clip(centers, bounds[:, 0], bounds[:, 1]) - centers
        keep = lattice.cell_contains(delta, strict=True)
        if keep.any():
            k = np.full(keep.sum(), coset, dtype=np.int64)
            pieces.append(_int_coords_from_coset(lattice.kind, k, mesh[keep]))
    if not pieces:
        raise ValueError("bounds intersect no lattice cell")
    ints = np.concatenate(pieces, axis=0)
    order = np.lexsort(tuple(ints[:, j] for j in range(lattice.ndim - 1, -1, -1)))
    ints = ints[order]
    if len(ints) > MAX_DICTIONARY_CODES:
        raise ValueError("dictionary too large")
    return Dictionary(lattice, ints, bounds)
