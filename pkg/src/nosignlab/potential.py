"""Logarithmic potential ``v`` with ``Lap v = f`` and the sup norm of its Hessian."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .fields import ScalarField, hessian, laplacian


@dataclass(frozen=True)
class PotentialResult:
    v: ScalarField
    residual_norm: float
    hessian_sup: float


def self_cell_kernel(h: float) -> float:
    """Mean of ``ln|z| / (2 pi)`` over the square cell ``[-h/2, h/2]^2``."""
    return (math.log(h / 2) - 1.5 + math.pi / 4 + math.log(2) / 2) / (2 * math.pi)


def log_kernel(nx: int, ny: int, h: float) -> np.ndarray:
    """Kernel ``ln|z| / (2 pi)`` on offsets ``(-(ny-1)..ny-1, -(nx-1)..nx-1)`` times ``h``."""
    d1 = h * np.arange(-(nx - 1), nx)
    d2 = h * np.arange(-(ny - 1), ny)
    Z1, Z2 = np.meshgrid(d1, d2)
    r = np.hypot(Z1, Z2)
    r[ny - 1, nx - 1] = 1.0
    k = np.log(r) / (2 * math.pi)
    k[ny - 1, nx - 1] = self_cell_kernel(h)
    return k


def newtonian_potential(f: ScalarField, method: str = "fft") -> PotentialResult:
    """``v(x) = sum_y k(x - y) f(y) h^2`` with ``k(z) = ln|z| / (2 pi)``.

    ``method="direct"`` loops over target nodes with a fixed summation
    order; ``"fft"`` evaluates the same discrete convolution by FFT.
    """
    grid = f.grid
    nx, ny, h = grid.nx, grid.ny, grid.h
    k = log_kernel(nx, ny, h)
    if method == "fft":
        full = fftconvolve(f.values, k, mode="full")
        v = full[ny - 1:2 * ny - 1, nx - 1:2 * nx - 1] * h * h
    elif method == "direct":
        v = np.empty(grid.shape)
        fv = f.values
        for j in range(ny):
            for i in range(nx):
                window = k[ny - 1 - j:2 * ny - 1 - j, nx - 1 - i:2 * nx - 1 - i]
                v[j, i] = np.sum(window * fv) * h * h
    else:
        raise ValueError(f"unknown method {method!r}")
    vf = ScalarField(grid, v, "v")
    lap = laplacian(vf)
    resid = float(np.abs(lap.values - f.values)[lap.valid].max())
    return PotentialResult(vf, resid, hessian_sup_norm(vf))


def hessian_frobenius(field: ScalarField) -> np.ndarray:
    u11, u12, u22 = hessian(field)
    return np.sqrt(u11**2 + u22**2 + 2 * u12**2)


def hessian_sup_norm(v: ScalarField) -> float:
    """Max over interior nodes of the Frobenius norm of the discrete Hessian."""
    return float(hessian_frobenius(v)[v.grid.interior()].max())
