"""Scalar functionals evaluated on solutions and zero sets.

Zero-set density and thickness, the Weiss energy and its small-radius
limit, a sampled BMO seminorm of the Hessian, the Dini integral of a
modulus, quadratic growth ratios, free-boundary extraction, a sign check
and a local line fit of the free boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import Mask, ScalarField, ball_integral, gradient, hessian, sphere_integral
from .solver import SolveResult
from .zeroset import interface_points


@dataclass(frozen=True)
class WeissSample:
    center: tuple[float, float]
    r: float
    value: float
    boundary_sign: int


@dataclass(frozen=True)
class WeissLimit:
    value: float
    samples: tuple[WeissSample, ...]
    confident: bool


@dataclass(frozen=True)
class ThicknessSample:
    center: tuple[float, float]
    r: float
    md: float
    delta: float
    lam: float


@dataclass(frozen=True)
class DiniResult:
    value: float
    converged: bool
    tail: float


@dataclass(frozen=True)
class GraphFit:
    normal: np.ndarray
    residual: float
    n_points: int
    flagged: bool


# ------------------------------------------------------------ zero-set size

def lambda_density(zero_set: Mask, center, r: float) -> float:
    """Fraction of ball nodes that belong to the zero set."""
    inside = zero_set.grid.ball(center, r)
    return float(np.count_nonzero(zero_set.flags & inside)) / float(np.count_nonzero(inside))


def minimal_diameter(points, center, r: float, n_angles: int = 180) -> float:
    """Smallest width over ``n_angles`` directions in ``[0, pi)`` of ``points`` within ``B_r``."""
    if n_angles < 90:
        raise ValueError(f"n_angles must be >= 90, got {n_angles}")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    d = pts - np.asarray(center, dtype=float)
    pts = pts[np.einsum("ij,ij->i", d, d) <= r * r * (1 + 1e-12)]
    if len(pts) == 0:
        return 0.0
    theta = np.pi * np.arange(n_angles) / n_angles
    proj = pts @ np.vstack([np.cos(theta), np.sin(theta)])
    return float(np.min(proj.max(axis=0) - proj.min(axis=0)))


def thickness(zero_set: Mask, center, r: float, n_angles: int = 180) -> ThicknessSample:
    md = minimal_diameter(zero_set.points(), center, r, n_angles)
    return ThicknessSample((float(center[0]), float(center[1])), r, md, md / r,
                           lambda_density(zero_set, center, r))


# ------------------------------------------------------------------- Weiss

def _default_n_theta(r, h):
    return max(256, int(math.ceil(8 * math.pi * r / h)))


def weiss(u: ScalarField, f: ScalarField, center, r: float, boundary_sign: int = -1,
          n_theta: int | None = None) -> WeissSample:
    """``r^-4 int_B (|grad u|^2/2 + f u) + sign * 2 r^-5 int_dB u^2`` in 2-D."""
    if boundary_sign not in (1, -1):
        raise ValueError("boundary_sign must be +1 or -1")
    grid = u.grid
    grid.check_ball(center, r, margin=1)
    g1, g2 = gradient(u)
    dens = ScalarField(grid, 0.5 * (g1.values**2 + g2.values**2) + f.values * u.values, "weiss")
    bulk = ball_integral(dens, center, r, margin=1)
    sq = ScalarField(grid, u.values**2, "u2")
    surf = sphere_integral(sq, center, r, n_theta or _default_n_theta(r, grid.h))
    value = bulk / r**4 + boundary_sign * 2 * surf / r**5
    return WeissSample((float(center[0]), float(center[1])), float(r), float(value), boundary_sign)


def weiss_limit(u: ScalarField, f: ScalarField, center, radii, boundary_sign: int = -1,
                tol: float = 1e-3) -> WeissLimit:
    """Extrapolate ``W(r)`` to ``r -> 0`` by a least-squares line in ``r``.

    The result is flagged low-confidence when consecutive samples move in
    both directions by more than ``tol`` relative.
    """
    radii = [float(r) for r in radii]
    if len(radii) < 4 or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("weiss_limit needs at least 4 strictly decreasing radii")
    samples = tuple(weiss(u, f, center, r, boundary_sign) for r in radii)
    w = np.array([s.value for s in samples])
    rr = np.array(radii)
    slope, intercept = np.polyfit(rr, w, 1)
    scale = max(np.max(np.abs(w)), 1e-300)
    steps = np.diff(w[::-1]) / scale
    confident = not (np.any(steps > tol) and np.any(steps < -tol))
    if np.all(w == 0):
        intercept = 0.0
    return WeissLimit(float(intercept), samples, bool(confident))


def monotonicity_violation(values) -> float:
    """Largest relative decrease in a sequence ordered by increasing radius."""
    w = np.asarray(values, dtype=float)
    drops = np.maximum(w[:-1] - w[1:], 0.0)
    scale = np.maximum(np.abs(w[:-1]), 1e-300)
    return float(np.max(drops / scale)) if len(w) > 1 else 0.0


# --------------------------------------------------------------------- BMO

def bmo_seminorm(u: ScalarField, samples) -> float:
    """Max over ``(center, r)`` of ``r^-2 int_{B_r} |D^2 u - mean D^2 u|_F^2``.

    Sampled over the supplied balls only, so a lower bound for the true sup.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("bmo_seminorm needs at least one (center, r) sample")
    grid = u.grid
    u11, u12, u22 = hessian(u)
    best = 0.0
    for center, r in samples:
        inside = grid.ball(center, r, margin=1)
        a, b, c = u11[inside], u12[inside], u22[inside]
        osc = (a - a.mean())**2 + (c - c.mean())**2 + 2 * (b - b.mean())**2
        best = max(best, float(np.sum(osc)) * grid.h**2 / r**2)
    return best


# -------------------------------------------------------------------- Dini

def dini_integral(radii, sigma, tol: float = 1e-3) -> DiniResult:
    """``int_0^{r_max} sigma(r)/r dr`` from samples on a log-spaced grid.

    The sampled range is integrated in ``t = ln r`` by the trapezoid rule;
    below ``r_min`` a power law fitted on the last decade supplies the
    tail.  The estimate counts as converged when dropping the last decade
    (and refitting the tail one decade up) changes it by at most ``tol``
    relative.
    """
    r = np.asarray(radii, dtype=float)
    s = np.asarray(sigma, dtype=float)
    order = np.argsort(r)
    r, s = r[order], s[order]
    if np.any(r <= 0) or r.size != s.size:
        raise ValueError("radii must be positive and match sigma")
    if np.any(s < 0):
        raise ValueError("sigma must be nonnegative")
    if np.any(np.diff(s) < -1e-12 * max(s.max(), 1.0)):
        raise ValueError("sigma must be nondecreasing")
    if r[-1] / r[0] < 1e3:
        raise ValueError("samples must span at least three decades")

    def estimate(k0):
        t = np.log(r[k0:])
        body = float(np.trapezoid(s[k0:], t))
        tail = _power_tail(r[k0:], s[k0:])
        return body + tail, tail

    total, tail = estimate(0)
    k1 = int(np.searchsorted(r, 10 * r[0]))
    total_up, _ = estimate(k1)
    converged = bool(np.isfinite(total) and np.isfinite(total_up)
                     and abs(total - total_up) <= tol * abs(total) + 1e-12)
    return DiniResult(total, converged, tail)


def _power_tail(r, s):
    if s[0] == 0:
        return 0.0
    last = r <= 10 * r[0]
    if np.count_nonzero(last) < 2 or np.any(s[last] <= 0):
        return math.inf
    alpha = np.polyfit(np.log(r[last]), np.log(s[last]), 1)[0]
    return s[0] / alpha if alpha > 0 else math.inf


# ---------------------------------------------------------- growth & sign

def quad_growth(u: ScalarField, center, radii) -> list[float]:
    """``max_{B_r} |u| / r^2`` for each radius."""
    out = []
    for r in radii:
        inside = u.grid.ball(center, r)
        out.append(float(np.max(np.abs(u.values[inside]))) / r**2)
    return out


def sign_check(u: ScalarField, center, r: float) -> float:
    inside = u.grid.ball(center, r)
    return float(np.min(u.values[inside]))


# ----------------------------------------------------------- free boundary

def free_boundary_extract(result: SolveResult) -> np.ndarray:
    return interface_points(result.u, result.zero_set, result.zero_tol)


def c1_graph_fit(gamma, center, r: float, graph_tol: float = 0.1) -> GraphFit:
    """Total-least-squares line through the free-boundary points in ``B_r``.

    The residual is the rms orthogonal distance divided by ``r``.  The
    normal is oriented so its largest component is positive.
    """
    pts = np.asarray(gamma, dtype=float).reshape(-1, 2)
    d = pts - np.asarray(center, dtype=float)
    pts = pts[np.einsum("ij,ij->i", d, d) <= r * r]
    if len(pts) < 5:
        raise ValueError(f"need at least 5 free-boundary points in the window, found {len(pts)}")
    centered = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    normal = vt[-1]
    k = int(np.argmax(np.abs(normal)))
    if normal[k] < 0:
        normal = -normal
    resid = float(np.sqrt(np.mean((centered @ normal) ** 2))) / r
    return GraphFit(normal, resid, len(pts), resid > graph_tol)


def weiss_convention(u: ScalarField, f: ScalarField, center, radii) -> tuple[int, dict, dict]:
    """Evaluate both boundary-sign conventions over increasing ``radii``.

    Returns the sign whose sequence has the smaller monotonicity violation,
    the violation per sign and the sampled values per sign.
    """
    radii = sorted(float(r) for r in radii)
    values = {s: [weiss(u, f, center, r, s).value for r in radii] for s in (1, -1)}
    violation = {s: monotonicity_violation(v) for s, v in values.items()}
    best = min(violation, key=lambda s: (violation[s], -s))
    return best, violation, values
