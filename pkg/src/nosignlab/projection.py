"""Projection onto homogeneous harmonic quadratics over a ball.

In 2-D the space is spanned by ``x1^2 - x2^2`` and ``x1 x2``, so a member
is fixed by its constant trace-free Hessian ``M``.  The projection of ``u``
over ``B_r(x0)`` is ``S * p`` with ``S = |M|_F`` and ``D^2 p = M / S``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .fields import ScalarField, hessian

_NORM_TOL = 1e-12


@dataclass(frozen=True)
class HarmonicProjection:
    S: float
    P: np.ndarray
    center: tuple[float, float]
    radius: float

    @property
    def M(self) -> np.ndarray:
        """Hessian of the projection, ``S * P``."""
        return self.S * self.P

    @property
    def degenerate(self) -> bool:
        """True when ``S = 0`` and the direction ``P`` is undefined."""
        return self.S == 0.0

    def __call__(self, x1, x2):
        d1, d2 = np.asarray(x1) - self.center[0], np.asarray(x2) - self.center[1]
        M = self.M
        return 0.5 * (M[0, 0] * d1**2 + 2 * M[0, 1] * d1 * d2 + M[1, 1] * d2**2)


def _factor(M: np.ndarray, center, r) -> HarmonicProjection:
    S = float(np.sqrt(np.sum(M * M)))
    P = M / S if S > 0 else np.zeros((2, 2))
    return HarmonicProjection(S, P, (float(center[0]), float(center[1])), float(r))


def mean_hessian(u: ScalarField, center, r: float) -> np.ndarray:
    """Ball average of the central-difference Hessian (one-node margin)."""
    inside = u.grid.ball(center, r, margin=1)
    u11, u12, u22 = hessian(u)
    a, b, c = u11[inside].mean(), u12[inside].mean(), u22[inside].mean()
    return np.array([[a, b], [b, c]])


def trace_free_mean_hessian(u: ScalarField, center, r: float) -> np.ndarray:
    Mbar = mean_hessian(u, center, r)
    return Mbar - 0.5 * np.trace(Mbar) * np.eye(2)


def project(u: ScalarField, center, r: float) -> HarmonicProjection:
    """Trace-free part of the mean Hessian over ``B_r(center)``."""
    return _factor(trace_free_mean_hessian(u, center, r), center, r)


_BASIS = (np.array([[2.0, 0.0], [0.0, -2.0]]), np.array([[0.0, 1.0], [1.0, 0.0]]))


def project_bruteforce(u: ScalarField, center, r: float) -> HarmonicProjection:
    """Least-squares fit of ``D^2 p`` to the nodal Hessians by normal equations.

    Minimizes ``sum_nodes |D^2 u - D^2 p|_F^2`` over ``p`` in the span of
    ``x1^2 - x2^2`` and ``x1 x2``.  Each node's Hessian is assembled
    separately; no averaging shortcut is used.
    """
    grid = u.grid
    inside = grid.ball(center, r, margin=1)
    vals = u.values
    h2 = grid.h**2
    G = np.zeros((2, 2))
    rhs = np.zeros(2)
    for k in range(2):
        for l in range(2):
            G[k, l] = np.sum(_BASIS[k] * _BASIS[l]) * np.count_nonzero(inside)
    for j, i in zip(*np.nonzero(inside)):
        H = np.empty((2, 2))
        H[0, 0] = (vals[j, i + 1] - 2 * vals[j, i] + vals[j, i - 1]) / h2
        H[1, 1] = (vals[j + 1, i] - 2 * vals[j, i] + vals[j - 1, i]) / h2
        H[0, 1] = H[1, 0] = (vals[j + 1, i + 1] - vals[j + 1, i - 1]
                             - vals[j - 1, i + 1] + vals[j - 1, i - 1]) / (4 * h2)
        rhs[0] += np.sum(H * _BASIS[0])
        rhs[1] += np.sum(H * _BASIS[1])
    coef = np.linalg.solve(G, rhs)
    M = coef[0] * _BASIS[0] + coef[1] * _BASIS[1]
    return _factor(M, center, r)


def quadratic_form_sup(D: np.ndarray) -> float:
    """``sup_{|x| <= 1} |x^T D x| / 2`` for symmetric ``D``."""
    return float(np.max(np.abs(np.linalg.eigvalsh(D)))) / 2


def dyadic_difference(u: ScalarField, v: ScalarField, center, r: float) -> float:
    """``sup_{B_1}`` of ``Pi(u,r) - Pi(v,r) - Pi(u,r/2) + Pi(v,r/2)``."""
    D = (trace_free_mean_hessian(u, center, r) - trace_free_mean_hessian(v, center, r)
         - trace_free_mean_hessian(u, center, r / 2) + trace_free_mean_hessian(v, center, r / 2))
    return quadratic_form_sup(D)


def write_projection_csv(projections, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["center_x", "center_y", "r", "S", "P11", "P12", "P22"])
        for p in projections:
            w.writerow([f"{x:.17g}" for x in
                        (p.center[0], p.center[1], p.radius, p.S, p.P[0, 0], p.P[0, 1], p.P[1, 1])])


def check_normalization(p: HarmonicProjection) -> bool:
    if p.S == 0:
        return not p.P.any()
    return abs(np.trace(p.P)) <= _NORM_TOL and abs(math.sqrt(np.sum(p.P**2)) - 1) <= _NORM_TOL
