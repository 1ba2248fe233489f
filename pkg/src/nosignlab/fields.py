"""Uniform 2-D grids, scalar fields, stencils and ball/circle quadrature.

Values are stored as ``(ny, nx)`` arrays: ``values[j, i]`` sits at
``(ox + i*h, oy + j*h)``.  The first coordinate ``x1`` runs along axis 1.
Everything here is immutable and pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

# relative slack when deciding whether a node lies on a ball boundary
_BALL_EPS = 1e-12


class GridError(ValueError):
    """Invalid grid geometry or a region that leaves the grid."""


class FieldFormatError(ValueError):
    """A field file could not be parsed."""


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    h: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise GridError(f"grid must be at least 3x3 nodes, got {self.nx}x{self.ny}")
        if not (self.h > 0 and np.isfinite(self.h)):
            raise GridError(f"spacing must be positive, got {self.h}")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def square(cls, n: int, lo: float = -1.0, hi: float = 1.0) -> "Grid":
        """``n`` x ``n`` nodes covering ``[lo, hi]^2``."""
        return cls(n, n, (hi - lo) / (n - 1), (lo, lo))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def x1(self) -> np.ndarray:
        return self.origin[0] + self.h * np.arange(self.nx)

    @property
    def x2(self) -> np.ndarray:
        return self.origin[1] + self.h * np.arange(self.ny)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        x1, x2 = self.x1, self.x2
        return (x1[0], x1[-1], x2[0], x2[-1])

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates as two ``(ny, nx)`` arrays."""
        return np.meshgrid(self.x1, self.x2)

    def points(self, flags: np.ndarray) -> np.ndarray:
        """Coordinates of the flagged nodes, shape ``(k, 2)``, row-major order."""
        j, i = np.nonzero(flags)
        return np.column_stack([self.origin[0] + i * self.h, self.origin[1] + j * self.h])

    def nearest_node(self, point) -> tuple[int, int]:
        """``(j, i)`` index of the node closest to ``point`` (clipped to the grid)."""
        i = int(np.clip(np.rint((point[0] - self.origin[0]) / self.h), 0, self.nx - 1))
        j = int(np.clip(np.rint((point[1] - self.origin[1]) / self.h), 0, self.ny - 1))
        return j, i

    def node(self, j: int, i: int) -> np.ndarray:
        return np.array([self.origin[0] + i * self.h, self.origin[1] + j * self.h])

    def interior(self, margin: int = 1) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[margin:self.ny - margin, margin:self.nx - margin] = True
        return mask

    def check_ball(self, center, r: float, margin: int = 0) -> None:
        """Raise :class:`GridError` unless ``B_r(center)`` stays ``margin`` nodes inside."""
        if not r > 0:
            raise GridError(f"radius must be positive, got {r}")
        lo1, hi1, lo2, hi2 = self.extent
        pad = margin * self.h - _BALL_EPS * max(r, self.h)
        c1, c2 = center
        if c1 - r < lo1 + pad or c1 + r > hi1 - pad or c2 - r < lo2 + pad or c2 + r > hi2 - pad:
            raise GridError(f"ball of radius {r} at {tuple(center)} exits the grid (margin {margin})")

    def ball(self, center, r: float, margin: int = 0) -> np.ndarray:
        """Boolean mask of nodes with ``|x - center| <= r``."""
        self.check_ball(center, r, margin)
        X, Y = self.coords()
        d2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
        return d2 <= r * r * (1 + _BALL_EPS)


@dataclass(frozen=True)
class ScalarField:
    """Real values on a :class:`Grid`.

    ``valid`` optionally flags the nodes where the values are meaningful
    (stencil outputs leave the outer ring invalid).
    """

    grid: Grid
    values: np.ndarray
    name: str = "u"
    valid: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"field {self.name!r} has non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.valid is not None:
            valid = np.array(self.valid, dtype=bool).reshape(self.grid.shape)
            valid.setflags(write=False)
            object.__setattr__(self, "valid", valid)

    @classmethod
    def from_function(cls, grid: Grid, fn, name: str = "u") -> "ScalarField":
        X, Y = grid.coords()
        return cls(grid, np.broadcast_to(fn(X, Y), grid.shape), name)

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _vals(other), self.name)

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _vals(other), self.name)

    def __mul__(self, c):
        return ScalarField(self.grid, self.values * _vals(c), self.name)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values, self.name)

    def renamed(self, name: str) -> "ScalarField":
        return ScalarField(self.grid, self.values, name, self.valid)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.grid.h ** 2)


def _vals(x):
    return x.values if isinstance(x, ScalarField) else x


@dataclass(frozen=True)
class Mask:
    grid: Grid
    flags: np.ndarray

    def __post_init__(self):
        flags = np.array(self.flags, dtype=bool)
        if flags.size != self.grid.size:
            raise ValueError(f"mask has {flags.size} entries, grid has {self.grid.size}")
        flags = flags.reshape(self.grid.shape)
        flags.setflags(write=False)
        object.__setattr__(self, "flags", flags)

    @classmethod
    def empty(cls, grid: Grid) -> "Mask":
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    def __len__(self):
        return int(self.flags.sum())

    def __eq__(self, other):
        return isinstance(other, Mask) and self.grid == other.grid and np.array_equal(self.flags, other.flags)

    def __hash__(self):
        return hash((self.grid, np.packbits(self.flags).tobytes()))

    def points(self) -> np.ndarray:
        return self.grid.points(self.flags)

    def as_field(self, name: str = "mask") -> ScalarField:
        return ScalarField(self.grid, self.flags.astype(float), name)


# ---------------------------------------------------------------- stencils

def laplacian(field: ScalarField) -> ScalarField:
    """5-point Laplacian; the outer ring is set to 0 and flagged invalid."""
    u, h = field.values, field.grid.h
    out = np.zeros_like(u)
    out[1:-1, 1:-1] = (u[1:-1, 2:] + u[1:-1, :-2] + u[2:, 1:-1] + u[:-2, 1:-1] - 4 * u[1:-1, 1:-1]) / h**2
    return ScalarField(field.grid, out, f"lap_{field.name}", field.grid.interior())


def gradient(field: ScalarField) -> tuple[ScalarField, ScalarField]:
    """Central-difference gradient ``(d/dx1, d/dx2)``; outer ring zero and invalid."""
    u, h = field.values, field.grid.h
    g1 = np.zeros_like(u)
    g2 = np.zeros_like(u)
    g1[1:-1, 1:-1] = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * h)
    g2[1:-1, 1:-1] = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * h)
    valid = field.grid.interior()
    return ScalarField(field.grid, g1, "d1", valid), ScalarField(field.grid, g2, "d2", valid)


def hessian(field: ScalarField) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Central-difference Hessian components ``(u11, u12, u22)``.

    The mixed term uses the 4-point diagonal stencil.  All three stencils
    are exact on quadratics.  The outer ring is left at zero.
    """
    u, h = field.values, field.grid.h
    u11 = np.zeros_like(u)
    u22 = np.zeros_like(u)
    u12 = np.zeros_like(u)
    c = u[1:-1, 1:-1]
    u11[1:-1, 1:-1] = (u[1:-1, 2:] - 2 * c + u[1:-1, :-2]) / h**2
    u22[1:-1, 1:-1] = (u[2:, 1:-1] - 2 * c + u[:-2, 1:-1]) / h**2
    u12[1:-1, 1:-1] = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4 * h**2)
    return u11, u12, u22


# -------------------------------------------------------------- quadrature

def ball_integral(field, center, r: float, margin: int = 0) -> float:
    """Midpoint sum of ``field * h^2`` over nodes inside ``B_r(center)``.

    A node counts iff it lies in the closed ball; no partial-cell correction.
    """
    grid = field.grid
    inside = grid.ball(center, r, margin)
    return float(np.sum(field.values[inside]) * grid.h**2)


def ball_mean(field: ScalarField, center, r: float, margin: int = 0) -> float:
    inside = field.grid.ball(center, r, margin)
    return float(np.mean(field.values[inside]))


def interpolate(field: ScalarField, points: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of ``field`` at ``(k, 2)`` points."""
    interp = RegularGridInterpolator((field.grid.x2, field.grid.x1), field.values, method="linear")
    pts = np.asarray(points, dtype=float)
    return interp(pts[:, ::-1])


def sphere_integral(field: ScalarField, center, r: float, n_theta: int = 256) -> float:
    """Trapezoid rule for the integral of ``field`` over the circle ``|x - center| = r``."""
    if n_theta < 64:
        raise ValueError(f"n_theta must be >= 64, got {n_theta}")
    field.grid.check_ball(center, r)
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    pts = np.column_stack([center[0] + r * np.cos(theta), center[1] + r * np.sin(theta)])
    vals = interpolate(field, pts)
    return float(np.sum(vals) * (2 * np.pi * r / n_theta))


# ---------------------------------------------------------------- file I/O

def write_field(field: ScalarField, path) -> None:
    g = field.grid
    lines = ["FIELD v1", f"{g.nx} {g.ny} {g.h!r} {g.origin[0]!r} {g.origin[1]!r}"]
    flat = field.values.ravel()
    for k in range(0, flat.size, 8):
        lines.append(" ".join(f"{v:.17g}" for v in flat[k:k + 8]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path, name: str | None = None) -> ScalarField:
    text = Path(path).read_text().split("\n", 2)
    if len(text) < 2 or text[0].strip() != "FIELD v1":
        raise FieldFormatError(f"{path}: missing 'FIELD v1' header")
    try:
        nx, ny, h, ox, oy = text[1].split()
        grid = Grid(int(nx), int(ny), float(h), (float(ox), float(oy)))
    except ValueError as exc:
        raise FieldFormatError(f"{path}: bad grid line {text[1]!r}") from exc
    payload = text[2] if len(text) > 2 else ""
    try:
        vals = np.array(payload.split(), dtype=float)
    except ValueError as exc:
        raise FieldFormatError(f"{path}: unparsable value") from exc
    if vals.size != grid.size:
        raise FieldFormatError(f"{path}: expected {grid.size} values, found {vals.size}")
    if not np.all(np.isfinite(vals)):
        raise FieldFormatError(f"{path}: non-finite values")
    return ScalarField(grid, vals, name or Path(path).stem)


def read_mask(path) -> Mask:
    fld = read_field(path)
    return Mask(fld.grid, fld.values != 0)
