"""Uniform planar grids, punctured-disk masks, fields and discrete operators.

A grid node ``(i, j)`` sits at ``z = x_i + 1j * y_j`` with
``x_i = -extent + i*h`` and ``y_j = -extent + j*h``; arrays are indexed
``[i, j]`` (x first). A field is a full ``(n, n)`` array holding NaN at
every node outside its support, so differential operators can shrink the
support simply by letting NaN propagate through their stencils.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, GeometryError

EXCLUDED, INTERIOR, OUTER_BAND, PUNCTURE_BAND = 0, 1, 2, 3

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class GridSpec:
    """Square node grid on ``[-extent, extent]^2`` with ``n`` nodes per side."""

    extent: float
    n: int

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 3):
            raise ConfigurationError(f"grid needs n >= 3 nodes per side, got {self.n!r}")
        if not (math.isfinite(self.extent) and self.extent > 0):
            raise ConfigurationError(f"grid extent must be positive, got {self.extent!r}")

    @classmethod
    def periodic(cls, period: float, n: int) -> "GridSpec":
        """Grid whose node spacing times ``n`` equals ``period``.

        Used with spectral derivatives: node ``n-1`` and node ``0`` are then
        neighbours under periodic wrap-around.
        """
        return cls(extent=period * (n - 1) / (2 * n), n=n)

    @property
    def h(self) -> float:
        return 2.0 * self.extent / (self.n - 1)

    @cached_property
    def x(self) -> np.ndarray:
        return -self.extent + self.h * np.arange(self.n)

    @cached_property
    def Z(self) -> np.ndarray:
        X, Y = np.meshgrid(self.x, self.x, indexing="ij")
        Z = X + 1j * Y
        Z.setflags(write=False)
        return Z

    def node_z(self, i: int, j: int) -> complex:
        return complex(self.x[i], self.x[j])

    def fractional_index(self, z) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        return (z.real + self.extent) / self.h, (z.imag + self.extent) / self.h

    def nearest_node(self, z: complex) -> tuple[int, int]:
        fi, fj = self.fractional_index(z)
        return int(np.rint(fi)), int(np.rint(fj))


@dataclass(frozen=True, eq=False)
class DomainMask:
    """Node classification for ``D(0, R)`` minus closed puncture disks.

    ``R = None`` means the whole grid square; its frame is then the outer
    band. Labels: 0 excluded, 1 interior, 2 outer band, 3 puncture band.
    """

    grid: GridSpec
    R: float | None
    punctures: tuple[tuple[complex, float], ...]
    labels: np.ndarray = field(repr=False)

    @property
    def interior(self) -> np.ndarray:
        return self.labels == INTERIOR

    @property
    def outer_band(self) -> np.ndarray:
        return self.labels == OUTER_BAND

    @property
    def puncture_band(self) -> np.ndarray:
        return self.labels == PUNCTURE_BAND

    @property
    def band(self) -> np.ndarray:
        return (self.labels == OUTER_BAND) | (self.labels == PUNCTURE_BAND)

    @property
    def support(self) -> np.ndarray:
        return self.labels != EXCLUDED

    def contains(self, z) -> np.ndarray:
        """True where ``z`` lies in the open domain (not only at nodes)."""
        z = np.asarray(z, dtype=complex)
        if self.R is None:
            e = self.grid.extent
            inside = (np.abs(z.real) < e) & (np.abs(z.imag) < e)
        else:
            inside = np.abs(z) < self.R
        for c, eps in self.punctures:
            inside &= np.abs(z - c) > eps
        return inside

    def same_as(self, other: "DomainMask") -> bool:
        return (
            self.grid == other.grid
            and self.R == other.R
            and self.punctures == other.punctures
            and np.array_equal(self.labels, other.labels)
        )


def build_mask(
    grid: GridSpec,
    R: float | None = None,
    punctures: Iterable[tuple[complex, float]] = (),
    eps_floor: float = 2.0,
) -> DomainMask:
    """Classify grid nodes for the domain ``D(0,R)`` minus the puncture disks.

    Parameters
    ----------
    grid : GridSpec
    R : float or None
        Outer radius; ``None`` uses the full grid square.
    punctures : iterable of (center, radius)
    eps_floor : float
        Each puncture radius must be at least ``eps_floor * h``. Pass 0 to
        skip the check (used when re-reading stored fields).
    """
    h = grid.h
    punct = tuple((complex(c), float(eps)) for c, eps in punctures)
    if R is not None:
        R = float(R)
        if not (R > 0 and R <= grid.extent + 1e-12 * grid.extent):
            raise ConfigurationError(f"outer radius R={R} must lie in (0, extent={grid.extent}]")
    for k, (c, eps) in enumerate(punct):
        if not eps > 0:
            raise ConfigurationError(f"puncture {k} at {c}: radius must be positive, got {eps}")
        if eps < eps_floor * h * (1 - 1e-12):
            raise ConfigurationError(
                f"puncture {k} at {c}: radius {eps} is below the floor {eps_floor}*h = {eps_floor * h:.6g}"
            )
        if R is None:
            reach = max(abs(c.real), abs(c.imag)) + eps
            limit = grid.extent - 2 * h
        else:
            reach = abs(c) + eps
            limit = R - 2 * h
        if reach > limit:
            raise ConfigurationError(
                f"puncture {k} at {c}: disk of radius {eps} is not contained in the domain with a 2h margin"
            )
        for m in range(k):
            c2, eps2 = punct[m]
            if abs(c - c2) <= eps + eps2:
                raise ConfigurationError(f"punctures {m} and {k} (at {c2} and {c}) overlap")

    Z = grid.Z
    if R is None:
        inside = np.zeros(Z.shape, dtype=bool)
        inside[1:-1, 1:-1] = True
    else:
        inside = np.abs(Z) < R
    in_hole = np.zeros(Z.shape, dtype=bool)
    coincident = np.zeros(Z.shape, dtype=bool)
    for c, eps in punct:
        d = np.abs(Z - c)
        in_hole |= d <= eps
        coincident |= d < 1e-9 * h
    interior = inside & ~in_hole
    near = ndimage.binary_dilation(interior, structure=_EIGHT) & ~interior & ~coincident

    labels = np.zeros(Z.shape, dtype=np.int8)
    labels[interior] = INTERIOR
    labels[near & in_hole] = PUNCTURE_BAND
    labels[near & ~in_hole] = OUTER_BAND
    labels.setflags(write=False)
    return DomainMask(grid=grid, R=R, punctures=punct, labels=labels)


def square_mask(grid: GridSpec) -> DomainMask:
    return build_mask(grid, None, ())


@dataclass(frozen=True, eq=False)
class Field:
    """Real or complex node values on a mask; NaN marks nodes without data."""

    mask: DomainMask
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.mask.grid.n
        data = np.asarray(self.data)
        if data.shape != (n, n):
            raise ValueError(f"field data has shape {data.shape}, expected {(n, n)}")
        if np.iscomplexobj(data):
            data = data.astype(np.complex128, copy=True)
        else:
            data = data.astype(np.float64, copy=True)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def sample(cls, mask: DomainMask, fn: Callable[[np.ndarray], np.ndarray], dtype=None) -> "Field":
        """Evaluate ``fn(z)`` at every non-excluded node."""
        sup = mask.support
        vals = np.asarray(fn(mask.grid.Z[sup]))
        if dtype is None:
            dtype = np.complex128 if np.iscomplexobj(vals) else np.float64
        data = np.full(sup.shape, np.nan, dtype=dtype)
        data[sup] = vals
        return cls(mask, data)

    @classmethod
    def constant(cls, mask: DomainMask, value) -> "Field":
        return cls.sample(mask, lambda z: np.full(z.shape, value))

    @property
    def grid(self) -> GridSpec:
        return self.mask.grid

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.data)

    @property
    def support(self) -> np.ndarray:
        return np.isfinite(self.data)

    @property
    def values(self) -> np.ndarray:
        return self.data[self.support]

    def with_data(self, data) -> "Field":
        return Field(self.mask, data)

    def _other(self, other):
        if isinstance(other, Field):
            if other.mask.grid != self.mask.grid:
                raise ValueError("fields live on different grids")
            return other.data
        return other

    def __add__(self, other):
        return self.with_data(self.data + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_data(self.data - self._other(other))

    def __rsub__(self, other):
        return self.with_data(self._other(other) - self.data)

    def __mul__(self, other):
        return self.with_data(self.data * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.with_data(self.data / self._other(other))

    def __neg__(self):
        return self.with_data(-self.data)

    def conj(self) -> "Field":
        return self.with_data(np.conj(self.data))

    def abs(self) -> "Field":
        return self.with_data(np.abs(self.data))

    @property
    def real(self) -> "Field":
        return self.with_data(self.data.real)

    @property
    def imag(self) -> "Field":
        return self.with_data(self.data.imag)

    def apply(self, fn: Callable[[np.ndarray], np.ndarray]) -> "Field":
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            return self.with_data(fn(self.data))

    def sup(self, where: np.ndarray | None = None) -> float:
        vals = np.abs(self.data if where is None else self.data[where])
        vals = vals[np.isfinite(vals)]
        return float(vals.max()) if vals.size else 0.0


# ---------------------------------------------------------------- operators


def partial(f: Field, axis: int) -> Field:
    """Centered difference along x (axis 0) or y (axis 1).

    Undefined (NaN) wherever the node or either neighbour lacks data.
    """
    h = f.grid.h
    d = f.data
    out = np.full_like(d, np.nan)
    if axis == 0:
        out[1:-1, :] = (d[2:, :] - d[:-2, :]) / (2 * h)
    else:
        out[:, 1:-1] = (d[:, 2:] - d[:, :-2]) / (2 * h)
    out[~np.isfinite(d)] = np.nan
    return f.with_data(out)


def wirtinger(f: Field, which: str = "zbar") -> Field:
    """``d/dz = (d/dx - i d/dy)/2`` or ``d/dzbar = (d/dx + i d/dy)/2``."""
    fx = partial(f, 0).data
    fy = partial(f, 1).data
    if which == "z":
        return f.with_data(0.5 * (fx - 1j * fy))
    if which == "zbar":
        return f.with_data(0.5 * (fx + 1j * fy))
    raise ValueError(f"which must be 'z' or 'zbar', got {which!r}")


def laplacian(f: Field) -> Field:
    """Five-point Laplacian; defined where the node and its four neighbours are."""
    d = f.data
    h2 = f.grid.h ** 2
    out = np.full_like(d, np.nan)
    out[1:-1, 1:-1] = (
        d[2:, 1:-1] + d[:-2, 1:-1] + d[1:-1, 2:] + d[1:-1, :-2] - 4 * d[1:-1, 1:-1]
    ) / h2
    return f.with_data(out)


def bilinear(f: Field, z) -> np.ndarray:
    """Bilinear interpolation; raises if any stencil corner lacks data."""
    grid = f.grid
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    fi, fj = grid.fractional_index(z)
    i0 = np.floor(fi).astype(int)
    j0 = np.floor(fj).astype(int)
    i0 = np.clip(i0, 0, grid.n - 2)
    j0 = np.clip(j0, 0, grid.n - 2)
    ti, tj = fi - i0, fj - j0
    if np.any((ti < -1e-9) | (ti > 1 + 1e-9) | (tj < -1e-9) | (tj > 1 + 1e-9)):
        raise GeometryError("interpolation point lies outside the grid")
    d = f.data
    c00, c10, c01, c11 = d[i0, j0], d[i0 + 1, j0], d[i0, j0 + 1], d[i0 + 1, j0 + 1]
    out = (1 - ti) * (1 - tj) * c00 + ti * (1 - tj) * c10 + (1 - ti) * tj * c01 + ti * tj * c11
    if not np.all(np.isfinite(out)):
        raise GeometryError("interpolation stencil touches nodes without data")
    return out


def contour_normal_flux(f: Field, center: complex, radius: float) -> float:
    """Outward normal-derivative flux of ``f`` through a circle.

    Trapezoid rule in angle with ``max(16, ceil(2*pi*radius/h))`` samples; the
    radial derivative is a centered difference of bilinear samples at
    ``radius +- h``. The circle must sit at least ``2h`` inside the support.
    """
    h = f.grid.h
    if radius <= 2 * h:
        raise GeometryError(f"contour radius {radius} must exceed 2h = {2 * h}")
    m = max(16, math.ceil(2 * math.pi * radius / h))
    e = np.exp(2j * np.pi * np.arange(m) / m)
    try:
        bilinear(f, center + (radius - 2 * h) * e)
        bilinear(f, center + (radius + 2 * h) * e)
        outer = bilinear(f, center + (radius + h) * e)
        inner = bilinear(f, center + (radius - h) * e)
    except GeometryError as exc:
        raise GeometryError(
            f"circle |z - {center}| = {radius} is not 2h inside the field support"
        ) from exc
    dr = (outer - inner) / (2 * h)
    return float(np.real(np.sum(dr)) * radius * 2 * np.pi / m)


def area_integral(f: Field, mask: DomainMask | None = None):
    """Node-cell midpoint rule: ``h^2`` times the sum over interior nodes."""
    mask = f.mask if mask is None else mask
    vals = f.data[mask.interior]
    if not np.all(np.isfinite(vals)):
        raise GeometryError("field is undefined at some interior nodes of the integration mask")
    total = vals.sum() * f.grid.h ** 2
    return complex(total) if np.iscomplexobj(vals) else float(total)


# ------------------------------------------------------------------ divisors


@dataclass(frozen=True)
class VortexDivisor:
    """Finite set of distinct points with positive integer multiplicities."""

    entries: tuple[tuple[complex, int], ...] = ()

    def __post_init__(self):
        clean = []
        for p, m in self.entries:
            if int(m) != m or m < 1:
                raise ConfigurationError(f"vortex at {p}: multiplicity must be a positive integer, got {m}")
            clean.append((complex(p), int(m)))
        pts = [p for p, _ in clean]
        for a in range(len(pts)):
            for b in range(a):
                if pts[a] == pts[b]:
                    raise ConfigurationError(f"vortex point {pts[a]} is listed twice")
        object.__setattr__(self, "entries", tuple(clean))

    @classmethod
    def of(cls, *pairs) -> "VortexDivisor":
        return cls(tuple(pairs))

    @property
    def points(self) -> list[complex]:
        return [p for p, _ in self.entries]

    @property
    def multiplicities(self) -> list[int]:
        return [m for _, m in self.entries]

    @property
    def degree(self) -> int:
        return sum(self.multiplicities)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class WindingCount:
    """Result of plaquette winding: total, clustered zeros, ambiguous cells."""

    count: int
    zeros: tuple[tuple[complex, int], ...]
    ambiguous: tuple[complex, ...]
    threshold: float


def _boundary_ring(mask_sup: np.ndarray) -> np.ndarray:
    eroded = ndimage.binary_erosion(mask_sup, structure=_EIGHT, border_value=0)
    return mask_sup & ~eroded


def _ring_winding(cells: np.ndarray, others: np.ndarray, ex: np.ndarray, ey: np.ndarray, good: np.ndarray) -> int | None:
    """Winding along the node rectangle one node outside a cluster's bounding
    box; None when that rectangle leaves the grid, touches a bad node or
    encloses cells of another cluster."""
    ii, jj = np.nonzero(cells)
    a, b = ii.min() - 1, ii.max() + 2
    c, d = jj.min() - 1, jj.max() + 2
    n0, n1 = good.shape
    if a < 0 or c < 0 or b >= n0 or d >= n1:
        return None
    ring = np.zeros_like(good)
    ring[a : b + 1, [c, d]] = True
    ring[[a, b], c : d + 1] = True
    if not good[ring].all() or others[a:b, c:d].any():
        return None
    total = ex[a:b, c].sum() + ey[b, c:d].sum() - ex[a:b, d].sum() - ey[a, c:d].sum()
    return int(np.rint(total / (2 * np.pi)))


def count_zeros_winding(
    w: Field, region: DomainMask | None = None, tau_rel: float = 1e-8
) -> WindingCount:
    """Count zeros of ``w`` (with sign) by the discrete argument principle.

    Every plaquette whose four corners carry data contributes the sum of its
    wrapped edge phase increments. Plaquettes with nonzero winding, or with a
    corner below ``tau = tau_rel * sup|w|``, are grouped into 8-connected
    clusters. Each cluster reports its centroid and the winding along the node
    rectangle just outside it (the summed plaquette winding when that
    rectangle is unusable), so a zero sitting exactly on a node or split over
    neighbouring cells is still one entry with the right multiplicity.
    """
    region = w.mask if region is None else region
    d = np.where(region.support, w.data, np.nan)
    finite = np.isfinite(d)
    if not finite.any():
        raise GeometryError("no data to count zeros on")
    mag = np.abs(np.where(finite, d, 0))
    tau = tau_rel * mag.max()
    ring = _boundary_ring(finite)
    if np.any(mag[ring] < tau):
        raise GeometryError("field vanishes (below tau) on the boundary of the counting region")

    ex = np.angle(d[1:, :] * np.conj(d[:-1, :]))  # edge (i,j)->(i+1,j)
    ey = np.angle(d[:, 1:] * np.conj(d[:, :-1]))  # edge (i,j)->(i,j+1)
    wind = ex[:, :-1] + ey[1:, :] - ex[:, 1:] - ey[:-1, :]
    ok = finite[:-1, :-1] & finite[1:, :-1] & finite[:-1, 1:] & finite[1:, 1:]
    wind = np.where(ok, np.rint(wind / (2 * np.pi)), 0).astype(int)
    low = mag < tau
    amb = ok & (low[:-1, :-1] | low[1:, :-1] | low[:-1, 1:] | low[1:, 1:])

    grid = w.grid
    centers = grid.Z[:-1, :-1] + 0.5 * grid.h * (1 + 1j)
    labels, nlab = ndimage.label((wind != 0) | amb, structure=_EIGHT)
    zeros = []
    ambiguous = []
    for lab in range(1, nlab + 1):
        cells = labels == lab
        wsum = _ring_winding(cells, (labels != lab) & (labels > 0), ex, ey, finite & ~low)
        if wsum is None:
            wsum = int(wind[cells].sum())
        weights = np.abs(wind[cells]).astype(float)
        pts = centers[cells]
        loc = (pts * weights).sum() / weights.sum() if weights.sum() > 0 else pts.mean()
        if wsum != 0:
            zeros.append((complex(loc), wsum))
        elif amb[cells].any():
            ambiguous.append(complex(loc))
    zeros.sort(key=lambda t: (t[0].real, t[0].imag))
    return WindingCount(
        count=sum(m for _, m in zeros), zeros=tuple(zeros), ambiguous=tuple(ambiguous), threshold=float(tau)
    )


def restrict(f: Field, mask: DomainMask) -> Field:
    """Copy of ``f`` with data dropped outside ``mask``'s support."""
    if mask.grid != f.grid:
        raise ValueError("mask and field live on different grids")
    return Field(mask, np.where(mask.support, f.data, np.nan))

