"""Dyadic-scale tables around a free-boundary point and thickness verdicts."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .diagnostics import (c1_graph_fit, lambda_density, minimal_diameter, quad_growth,
                          sign_check, weiss)
from .fields import ScalarField, hessian
from .potential import hessian_sup_norm
from .projection import dyadic_difference, trace_free_mean_hessian
from .solver import SolveResult
from .zeroset import essential_mask

NAN = float("nan")


@dataclass(frozen=True)
class ScaleRow:
    j: int
    r: float
    available: bool
    S: float = NAN
    lam: float = NAN
    delta: float = NAN
    W: float = NAN
    growth: float = NAN
    lemma2_resid: float = NAN
    lemma3_hat_C: float = NAN
    mainprop_hat_C: float = NAN
    u_l1: float = NAN
    d2v_sup: float = NAN


@dataclass(frozen=True)
class BoundednessReport:
    max_S: float
    median_S: float
    growth_exponent: float
    max_growth: float
    bounded: bool


@dataclass(frozen=True)
class ThicknessConfig:
    eps_thick: float = 0.25
    eps_thin: float = 0.05
    sign_tol: float | None = None
    graph_tol: float = 0.1
    n_angles: int = 180
    min_cells: float = 4.0


@dataclass(frozen=True)
class ThicknessVerdict:
    center: tuple[float, float]
    verdict: str
    delta: float
    min_u: float
    graph_residual: float
    graph_radius: float
    normal: tuple[float, float]
    radii: tuple[float, ...]
    deltas: tuple[float, ...]

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), indent=2, sort_keys=True) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        return float(f"{obj:.17g}") if math.isfinite(obj) else None
    return obj


def dyadic_radii(r0: float, J: int) -> list[float]:
    return [r0 * 2.0**-j for j in range(J + 1)]


def check_center(result: SolveResult, center, tol_cells: float = 2.0) -> None:
    gamma = result.free_boundary
    h = result.u.grid.h
    if len(gamma) == 0:
        raise ValueError("result has no free-boundary points")
    dist = np.min(np.hypot(gamma[:, 0] - center[0], gamma[:, 1] - center[1]))
    if dist > tol_cells * h:
        raise ValueError(f"center {tuple(center)} is {dist:.3g} from the free boundary (> {tol_cells}h)")


def regularity_report(u: ScalarField, v: ScalarField, f: ScalarField, result: SolveResult,
                      center, r0: float, J: int, kappa: float = 0.0, weiss_sign: int = -1,
                      n_angles: int = 180, require_gamma: bool = True) -> list[ScaleRow]:
    """One :class:`ScaleRow` per radius ``r_j = r0 2^-j``, ``j = 0..J``.

    Rows with ``r_j < 4h`` are returned with ``available=False``.  Zero-set
    density and thickness use the zero set with measure-zero components
    removed.
    """
    grid = u.grid
    h = grid.h
    if require_gamma:
        check_center(result, center)
    grid.check_ball(center, r0, margin=1)
    zero = essential_mask(result.zero_set)
    zpts = zero.points()
    f_sup = f.max_abs()
    d2v = hessian_sup_norm(v)
    u_l1 = u.l1_norm()
    u11, u12, u22 = hessian(u)
    rows = []
    for j, r in enumerate(dyadic_radii(r0, J)):
        if r < 4 * h:
            rows.append(ScaleRow(j, r, False, u_l1=u_l1, d2v_sup=d2v))
            continue
        M = trace_free_mean_hessian(u, center, r)
        S = float(np.sqrt(np.sum(M * M)))
        lam = lambda_density(zero, center, r)
        lam_half = lambda_density(zero, center, r / 2)
        md = minimal_diameter(zpts, center, r, n_angles)
        inside = grid.ball(center, r, margin=1)
        res2 = ((u11[inside] - M[0, 0])**2 + (u22[inside] - M[1, 1])**2
                + 2 * (u12[inside] - M[0, 1])**2)
        lemma2 = math.sqrt(float(np.sum(res2)) * h * h / r**2)
        if lam > 0 and f_sup > 0:
            l3 = dyadic_difference(u, v, center, r) / (f_sup * math.sqrt(lam))
        else:
            l3 = NAN
        if lam > 0 and d2v > 0:
            mp = math.sqrt(lam_half) * (S - kappa) / (math.sqrt(lam) * d2v)
        else:
            mp = NAN
        rows.append(ScaleRow(
            j, r, True, S, lam, md / r, weiss(u, f, center, r, weiss_sign).value,
            quad_growth(u, center, [r])[0], lemma2, l3, mp, u_l1, d2v))
    return rows


def s_boundedness_check(rows, bound_factor: float = 10.0, exponent_tol: float = 0.25,
                        tail: int = 3) -> BoundednessReport:
    """Decide whether ``S_j`` stays bounded across the dyadic scales.

    Bounded means ``max S <= bound_factor * median S`` and the growth
    exponent of ``S_j`` per dyadic step, fitted as the slope of ``log2 S_j``
    over the ``tail`` finest resolvable rows, is at most ``exponent_tol``.
    Fitting only the fine end keeps a sequence that settles onto a limit
    from reading as growth.
    """
    valid = [r for r in rows if r.available]
    if len(valid) < 3:
        raise ValueError(f"need at least 3 resolvable rows, got {len(valid)}")
    S = np.array([r.S for r in valid])
    js = np.array([r.j for r in valid], dtype=float)
    fine = np.arange(len(valid)) >= len(valid) - tail
    pos = (S > 0) & fine
    if np.count_nonzero(pos) >= 2:
        expo = float(np.polyfit(js[pos], np.log2(S[pos]), 1)[0])
    else:
        expo = 0.0
    max_S, med = float(S.max()), float(np.median(S))
    bounded = max_S <= bound_factor * med and expo <= exponent_tol
    return BoundednessReport(max_S, med, expo, float(max(r.growth for r in valid)), bool(bounded))


def thickness_classify(result: SolveResult, center, r: float,
                       config: ThicknessConfig = ThicknessConfig()) -> ThicknessVerdict:
    """Classify a free-boundary point as regular-candidate, thin-candidate or inconclusive.

    The sweep runs over ``r, r/2, ...`` down to ``min_cells * h``.
    """
    u = result.u
    h = u.grid.h
    gamma = result.free_boundary
    near = np.hypot(gamma[:, 0] - center[0], gamma[:, 1] - center[1]) <= r if len(gamma) else []
    if not np.any(near):
        raise ValueError(f"no free-boundary points within {r} of {tuple(center)}")
    sign_tol = config.sign_tol if config.sign_tol is not None else 10 * result.zero_tol
    zero = essential_mask(result.zero_set)
    zpts = zero.points()
    radii = []
    rr = r
    while rr >= config.min_cells * h - 1e-12:
        radii.append(rr)
        rr /= 2
    if not radii:
        raise ValueError(f"reference radius {r} is below {config.min_cells}h")
    deltas = [minimal_diameter(zpts, center, s, config.n_angles) / s for s in radii]
    min_u = sign_check(u, center, r / 2)
    fit = None
    for s in reversed(radii):
        if np.count_nonzero(np.hypot(gamma[:, 0] - center[0], gamma[:, 1] - center[1]) <= s) >= 5:
            fit = c1_graph_fit(gamma, center, s, config.graph_tol)
            fit_r = s
            break
    if fit is None:
        fit_r, resid, normal = NAN, NAN, (NAN, NAN)
    else:
        resid, normal = fit.residual, (float(fit.normal[0]), float(fit.normal[1]))
    if deltas[0] >= config.eps_thick and min_u >= -sign_tol and fit is not None and resid <= config.graph_tol:
        verdict = "regular-candidate"
    elif all(d < config.eps_thin for d in deltas):
        verdict = "thin-candidate"
    else:
        verdict = "inconclusive"
    return ThicknessVerdict((float(center[0]), float(center[1])), verdict, deltas[0], min_u,
                            resid, fit_r, normal, tuple(radii), tuple(deltas))


REPORT_COLUMNS = [f.name for f in fields(ScaleRow)]


def rows_to_csv(rows, extra: dict | None = None) -> str:
    """CSV text, one row per line, floats with 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    extra = extra or {}
    w.writerow(list(extra) + REPORT_COLUMNS)
    for row in rows:
        w.writerow([_fmt(v) for v in extra.values()] + [_fmt(getattr(row, c)) for c in REPORT_COLUMNS])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)
