"""Finite-difference solvers for ``Lap u = f * chi_{u != 0}`` and analytic fixtures.

Three solvers share the 5-point stencil and red-black over-relaxation:

* :func:`solve_poisson` -- Dirichlet Poisson problem, optionally with pinned nodes;
* :func:`solve_obstacle_psor` -- classical obstacle problem ``u >= 0`` by projected SOR;
* :func:`solve_no_sign` -- active-set fixed point for the no-sign problem.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .fields import Grid, Mask, ScalarField, laplacian
from .zeroset import interface_points


class SolverError(RuntimeError):
    """Base class for solver failures."""


class NonConvergenceError(SolverError):
    def __init__(self, msg, residual=float("nan"), u=None, masks=()):
        super().__init__(msg)
        self.residual = residual
        self.u = u
        self.masks = tuple(masks)


class MaskCycleError(SolverError):
    def __init__(self, msg, u=None, masks=()):
        super().__init__(msg)
        self.u = u
        self.masks = tuple(masks)


@dataclass(frozen=True)
class SolveParams:
    linear_tol: float = 1e-10
    max_sweeps: int = 50_000
    zero_tol: float | None = None
    grad_tol: float | None = None
    max_outer: int = 100
    relax: float | None = None
    check_every: int = 10

    def __post_init__(self):
        for name in ("linear_tol", "max_sweeps", "max_outer", "check_every"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("zero_tol", "grad_tol"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")
        if self.relax is not None and not 1.0 < self.relax < 2.0:
            raise ValueError(f"relax must lie in (1, 2), got {self.relax}")

    def resolve(self, grid: Grid, g_max: float) -> "SolveParams":
        """Fill in grid-dependent defaults."""
        zero_tol = self.zero_tol if self.zero_tol is not None else 1e-8 * g_max + 1e-12
        grad_tol = self.grad_tol if self.grad_tol is not None else 10 * zero_tol / grid.h
        relax = self.relax
        if relax is None:
            relax = 2.0 / (1.0 + math.sin(math.pi / (max(grid.nx, grid.ny) - 1)))
        return replace(self, zero_tol=zero_tol, grad_tol=grad_tol, relax=relax)


@dataclass(frozen=True)
class SolveResult:
    u: ScalarField
    zero_set: Mask
    free_boundary: np.ndarray
    outer_iters: int
    converged: bool
    residual: float
    f: ScalarField | None = None
    zero_tol: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)


# ------------------------------------------------------------------ helpers

def boundary_values(grid: Grid, g) -> np.ndarray:
    """Full array holding ``g`` on the outer ring and 0 inside.

    ``g`` may be a ScalarField (only its outer ring is read), a callable
    ``g(x1, x2)`` or a constant.
    """
    if isinstance(g, ScalarField):
        vals = np.array(g.values, dtype=float)
    elif callable(g):
        X, Y = grid.coords()
        vals = np.broadcast_to(np.asarray(g(X, Y), dtype=float), grid.shape).copy()
    else:
        vals = np.full(grid.shape, float(g))
    if vals.shape != grid.shape or not np.all(np.isfinite(vals)):
        raise ValueError("boundary data must be finite and match the grid")
    vals[1:-1, 1:-1] = 0.0
    return vals


def _as_field(grid: Grid, f, name="f") -> ScalarField:
    if isinstance(f, ScalarField):
        return f
    if callable(f):
        return ScalarField.from_function(grid, f, name)
    return ScalarField(grid, np.full(grid.shape, float(f)), name)


def _stencil_sum(u):
    return u[1:-1, 2:] + u[1:-1, :-2] + u[2:, 1:-1] + u[:-2, 1:-1]


def _lap(u, h):
    out = np.zeros_like(u)
    out[1:-1, 1:-1] = (_stencil_sum(u) - 4 * u[1:-1, 1:-1]) / h**2
    return out


def _sublattices(shape):
    """Slice pairs for the four interior sub-lattices, grouped by colour (i + j) % 2."""
    ny, nx = shape
    groups = ([], [])
    for j0 in (1, 2):
        for i0 in (1, 2):
            rows = slice(j0, ny - 1, 2)
            cols = slice(i0, nx - 1, 2)
            groups[(i0 + j0) % 2].append((rows, cols))
    return groups


def _shift(sl, d):
    return slice(sl.start + d, sl.stop + d, 2)


def _sor(u, f, free, params: SolveParams, h, project=False):
    """Red-black (projected) SOR in place on ``u``; returns the final residual.

    ``free`` flags the interior unknowns; every other node keeps its value.
    With ``project`` the iterate is clipped to ``u >= 0`` after each update.
    """
    omega = params.relax
    blocks = []
    for group in _sublattices(u.shape):
        for rows, cols in group:
            w = omega * free[rows, cols].astype(float)
            blocks.append((rows, cols, _shift(rows, -1), _shift(rows, 1), _shift(cols, -1),
                           _shift(cols, 1), w, h * h * f[rows, cols]))
    residual = math.inf
    for sweep in range(1, params.max_sweeps + 1):
        for rows, cols, rs, rn, cw, ce, w, h2f in blocks:
            c = u[rows, cols]
            gs = 0.25 * (u[rows, cw] + u[rows, ce] + u[rs, cols] + u[rn, cols] - h2f)
            c += w * (gs - c)
            if project:
                np.maximum(c, 0.0, out=c)
        if sweep % params.check_every == 0:
            residual = (_psor_residual if project else _poisson_residual)(u, f, free, h)
            if residual <= params.linear_tol:
                return residual
    raise NonConvergenceError(
        f"no convergence after {params.max_sweeps} sweeps (residual {residual:.3e})",
        residual, u.copy())


def _poisson_residual(u, f, free, h):
    r = np.abs(_lap(u, h) - f)[free]
    return float(r.max()) if r.size else 0.0


def _psor_residual(u, f, free, h):
    w = f - _lap(u, h)
    r = np.where(u > 0, np.abs(w), np.maximum(-w, 0.0))[free]
    return float(r.max()) if r.size else 0.0


# ------------------------------------------------------------------ solvers

def solve_poisson(f, g, params: SolveParams = SolveParams(), pinned: Mask | None = None,
                  u0: ScalarField | None = None, grid: Grid | None = None) -> ScalarField:
    """Solve the 5-point ``Lap u = f`` with Dirichlet data ``g`` by SOR.

    Nodes of ``pinned`` are held at zero.  Raises
    :class:`NonConvergenceError` if ``max_sweeps`` is exhausted.
    """
    grid = grid or _grid_of(f, g)
    f = _as_field(grid, f)
    gb = boundary_values(grid, g)
    p = params.resolve(grid, float(np.abs(gb).max()))
    u = gb.copy()
    if u0 is not None:
        u[1:-1, 1:-1] = u0.values[1:-1, 1:-1]
    free = grid.interior()
    if pinned is not None:
        u[pinned.flags & free] = 0.0
        free &= ~pinned.flags
    _sor(u, f.values, free, p, grid.h)
    return ScalarField(grid, u, "u")


def solve_obstacle_psor(f, g, params: SolveParams = SolveParams(), grid: Grid | None = None) -> SolveResult:
    """Projected SOR for ``u >= 0``, ``Lap u <= f``, ``u * (Lap u - f) = 0``."""
    grid = grid or _grid_of(f, g)
    f = _as_field(grid, f)
    gb = boundary_values(grid, g)
    if gb[~grid.interior()].min() < 0:
        raise ValueError("obstacle solver needs g >= 0 on the boundary")
    p = params.resolve(grid, float(np.abs(gb).max()))
    u = gb.copy()
    free = grid.interior()
    residual = _sor(u, f.values, free, p, grid.h, project=True)
    uf = ScalarField(grid, u, "u")
    zero = Mask(grid, (u <= p.zero_tol) & free)
    return SolveResult(uf, zero, interface_points(uf, zero, p.zero_tol), 1, True, residual,
                       f, p.zero_tol, {"solver": "psor"})


def solve_no_sign(f, g, params: SolveParams = SolveParams(), grid: Grid | None = None,
                  initial_mask: Mask | None = None) -> SolveResult:
    """Active-set fixed point for ``Lap u = f chi_{u != 0}`` without a sign constraint.

    Each outer step solves the Poisson problem with the current mask pinned
    to zero, then updates the mask:

    * a pinned node is released when its multiplier ``s * (f - Lap u)``
      is negative beyond ``linear_tol`` (``s = sign f``): freeing it would
      push ``u`` to the side of the sign of ``f``;
    * a free node joins the mask when ``s * u < -zero_tol`` and its
      wrong-sign component is not fed by wrong-sign Dirichlet data
      (such components are genuine negative phases, not a zero set);
    * a free node touching the mask joins it when ``|u| <= zero_tol`` and
      ``|grad u| <= grad_tol``.

    Converges when the mask repeats exactly; a revisit of an older mask
    within the last 20 steps raises :class:`MaskCycleError`.
    """
    grid = grid or _grid_of(f, g)
    f = _as_field(grid, f)
    gb = boundary_values(grid, g)
    p = params.resolve(grid, float(np.abs(gb).max()))
    h = grid.h
    interior = grid.interior()
    s = np.sign(f.values)
    fed = _wrong_sign_seeds(gb, s, interior, p.zero_tol)

    mask = np.zeros(grid.shape, dtype=bool) if initial_mask is None else initial_mask.flags & interior
    u = gb.copy()
    window = deque(maxlen=20)
    window.append(_mask_key(mask))
    prev = mask
    for k in range(1, p.max_outer + 1):
        free = interior & ~mask
        u[mask] = 0.0
        _sor(u, f.values, free, p, h)
        lap = _lap(u, h)
        mult = f.values - lap
        release = mask & np.where(s != 0, s * mult < -p.linear_tol, np.abs(mult) > p.linear_tol)
        wrong = free & (s * u < -p.zero_tol)
        if wrong.any():
            labels, n = ndimage.label(wrong)
            anchored = np.unique(labels[fed & wrong])
            wrong &= ~np.isin(labels, anchored[anchored > 0])
        g1 = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * h)
        g2 = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * h)
        flat = np.zeros(grid.shape, dtype=bool)
        flat[1:-1, 1:-1] = np.hypot(g1, g2) <= p.grad_tol
        touching = ndimage.binary_dilation(mask) & free
        flat &= touching & (np.abs(u) <= p.zero_tol)
        new = (mask & ~release) | wrong | flat
        if np.array_equal(new, mask):
            uf = ScalarField(grid, u, "u")
            zero = Mask(grid, mask)
            resid = _poisson_residual(u, f.values, free, h)
            return SolveResult(uf, zero, interface_points(uf, zero, p.zero_tol), k, True,
                               resid, f, p.zero_tol, {"solver": "no_sign"})
        key = _mask_key(new)
        if key in window:
            raise MaskCycleError(f"mask cycle detected at outer step {k}",
                                 ScalarField(grid, u, "u"), (Mask(grid, mask), Mask(grid, new)))
        window.append(key)
        prev, mask = mask, new
    raise NonConvergenceError(
        f"mask not stationary after {p.max_outer} outer steps",
        _poisson_residual(u, f.values, interior & ~mask, h), ScalarField(grid, u, "u"),
        (Mask(grid, prev), Mask(grid, mask)))


def _mask_key(flags):
    return hash(np.packbits(flags).tobytes())


def _wrong_sign_seeds(gb, s, interior, tol):
    """Interior nodes adjacent to boundary nodes whose data has the wrong sign."""
    bad = ~interior & (s * gb < -tol)
    return ndimage.binary_dilation(bad) & interior


def _grid_of(*objs) -> Grid:
    for o in objs:
        if isinstance(o, ScalarField):
            return o.grid
    raise ValueError("pass grid= when neither f nor g is a ScalarField")


# ----------------------------------------------------------------- fixtures

FIXTURE_KINDS = ("half_space", "polynomial", "radial")


def radial_profile(r, a):
    """Radial solution with ``f = 1`` vanishing on ``B_a``."""
    r = np.asarray(r, dtype=float)
    rs = np.maximum(r, a)
    return np.where(r > a, (rs**2 - a**2) / 4 - (a**2 / 2) * np.log(rs / a), 0.0)


def fixture_function(kind: str, a: float = 0.5, shift=(0.0, 0.0), angle: float = 0.0):
    """``u(x1, x2)`` and the zero-set predicate for a fixture kind."""
    c, s = math.cos(angle), math.sin(angle)
    s1, s2 = shift
    if kind == "half_space":
        def u(x1, x2):
            t = (x1 - s1) * c + (x2 - s2) * s
            return 0.5 * np.maximum(t, 0.0) ** 2

        def zero(x1, x2, h):
            return (x1 - s1) * c + (x2 - s2) * s <= 1e-9 * h
    elif kind == "polynomial":
        def u(x1, x2):
            t = (x1 - s1) * c + (x2 - s2) * s
            return 0.5 * t**2

        def zero(x1, x2, h):
            return np.abs((x1 - s1) * c + (x2 - s2) * s) <= 1e-9 * h
    elif kind == "radial":
        if not a > 0:
            raise ValueError(f"radial fixture needs a > 0, got {a}")

        def u(x1, x2):
            return radial_profile(np.hypot(x1 - s1, x2 - s2), a)

        def zero(x1, x2, h):
            return np.hypot(x1 - s1, x2 - s2) <= a
    else:
        raise ValueError(f"unknown fixture kind {kind!r}; expected one of {FIXTURE_KINDS}")
    return u, zero


def make_fixture(kind: str, grid: Grid, a: float = 0.5, shift=(0.0, 0.0), angle: float = 0.0,
                 zero_tol: float = 1e-12) -> SolveResult:
    """Exact solution of the no-sign problem with ``f = 1``.

    ``half_space``: ``u = (x1+)^2 / 2``; ``polynomial``: ``u = x1^2 / 2``;
    ``radial``: the radial profile vanishing on ``B_a``.  ``shift`` and
    ``angle`` translate and rotate the first two.
    """
    ufn, zfn = fixture_function(kind, a, shift, angle)
    X, Y = grid.coords()
    u = ScalarField(grid, ufn(X, Y), "u")
    f = ScalarField(grid, np.ones(grid.shape), "f")
    zero = Mask(grid, zfn(X, Y, grid.h))
    band = ndimage.binary_dilation(zero.flags, iterations=2) & ndimage.binary_dilation(~zero.flags, iterations=2)
    lap = laplacian(u).values
    ok = grid.interior() & ~band
    residual = float(np.abs(lap - f.values * ~zero.flags)[ok].max()) if ok.any() else 0.0
    meta = {"kind": kind, "a": a, "shift": tuple(shift), "angle": angle}
    return SolveResult(u, zero, interface_points(u, zero, zero_tol), 0, True, residual,
                       f, zero_tol, meta)


def generic_case(a: float = 0.5):
    """Source and boundary data of a sign-changing test problem.

    ``f = 1 + x1 x2 / 4`` is positive and non-constant.  The boundary data
    are the radial profile minus a narrow Gaussian dip centred on the corner
    ``(1, 1)``, so a negative phase enters from that corner while a zero set
    forms around the origin.
    """
    ur, _ = fixture_function("radial", a)

    def f(x1, x2):
        return 1.0 + 0.25 * x1 * x2

    def g(x1, x2):
        return ur(x1, x2) - 0.5 * np.exp(-((x1 - 1) ** 2 + (x2 - 1) ** 2) / 0.03)

    return f, g
