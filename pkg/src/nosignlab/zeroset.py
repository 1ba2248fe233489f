"""Mask components, measure-zero detection and free-boundary point extraction."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .fields import Mask, ScalarField

_CROSS = ndimage.generate_binary_structure(2, 1)
_SQUARE = ndimage.generate_binary_structure(2, 2)


def interior_nodes(flags: np.ndarray) -> np.ndarray:
    """Nodes whose four neighbours are also flagged (outside the grid counts as flagged)."""
    return ndimage.binary_erosion(flags, structure=_CROSS, border_value=1)


def split_components(flags: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a mask into (thick, thin) parts.

    A component (8-connected) is thick when it owns at least one interior
    node; thin components have zero area in the continuum limit.
    """
    labels, n = ndimage.label(flags, structure=_SQUARE)
    if n == 0:
        return np.zeros_like(flags), np.zeros_like(flags)
    has_interior = np.zeros(n + 1, dtype=bool)
    has_interior[np.unique(labels[interior_nodes(flags) & flags])] = True
    has_interior[0] = False
    thick = has_interior[labels]
    return thick, flags & ~thick


def essential_mask(mask: Mask) -> Mask:
    """The mask with measure-zero components removed."""
    thick, _ = split_components(mask.flags)
    return Mask(mask.grid, thick)


def interface_points(u: ScalarField, mask: Mask, eps: float) -> np.ndarray:
    """Free-boundary points of ``mask`` as a ``(k, 2)`` array.

    Thick components contribute one point per grid edge leaving the mask,
    placed where the linear interpolant of ``|u| - eps`` vanishes.  Thin
    components with at least two nodes contribute their nodes (there the
    zero set is its own boundary); isolated single nodes are dropped.
    """
    grid = u.grid
    flags = mask.flags
    thick, thin = split_components(flags)
    phi = np.abs(u.values) - eps
    x1, x2 = grid.x1, grid.x2
    ny, nx = flags.shape
    pts = []
    for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        # p inside a thick component, q = p + (dj, di) outside the mask
        jp, ip = np.nonzero(thick)
        jq, iq = jp + dj, ip + di
        ok = (jq >= 0) & (jq < ny) & (iq >= 0) & (iq < nx)
        jp, ip, jq, iq = jp[ok], ip[ok], jq[ok], iq[ok]
        outside = ~flags[jq, iq]
        jp, ip, jq, iq = jp[outside], ip[outside], jq[outside], iq[outside]
        fp, fq = phi[jp, ip], phi[jq, iq]
        den = fp - fq
        t = np.clip(np.divide(fp, den, out=np.zeros_like(fp), where=den != 0), 0.0, 1.0)
        pts.append(np.column_stack([x1[ip] + t * (x1[iq] - x1[ip]),
                                    x2[jp] + t * (x2[jq] - x2[jp])]))
    labels, n = ndimage.label(thin, structure=_SQUARE)
    if n:
        sizes = np.bincount(labels.ravel())
        keep = (sizes[labels] >= 2) & thin
        pts.append(grid.points(keep))
    if not pts:
        return np.zeros((0, 2))
    out = np.concatenate(pts)
    order = np.lexsort((out[:, 0], out[:, 1]))
    return out[order]
