"""Acceptance criteria 1-11, one PASS/FAIL line each.

Run under pytest (lines are written straight to the terminal) or directly
with ``python tests/test_acceptance.py``.
"""

import math
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from nosignlab.cli import main as cli_main
from nosignlab.diagnostics import dini_integral, monotonicity_violation, weiss, weiss_limit
from nosignlab.fields import Grid, Mask, ScalarField
from nosignlab.pipeline import regularity_report, s_boundedness_check, thickness_classify
from nosignlab.potential import newtonian_potential
from nosignlab.projection import project, project_bruteforce
from nosignlab.solver import (SolveParams, SolveResult, fixture_function, generic_case, make_fixture,
                              solve_no_sign, solve_obstacle_psor)

RADIAL_G = fixture_function("radial", 0.5)[0]


# ------------------------------------------------------------ shared data

@lru_cache(maxsize=None)
def grid(n):
    return Grid.square(n)


@lru_cache(maxsize=None)
def fixture(kind, n):
    return make_fixture(kind, grid(n))


@lru_cache(maxsize=None)
def radial_no_sign(n):
    t0 = time.perf_counter()
    res = solve_no_sign(1.0, RADIAL_G, SolveParams(linear_tol=1e-10), grid=grid(n))
    return res, time.perf_counter() - t0


@lru_cache(maxsize=None)
def radial_psor(n):
    return solve_obstacle_psor(1.0, RADIAL_G, SolveParams(linear_tol=1e-10), grid=grid(n))


@lru_cache(maxsize=None)
def generic_no_sign(n):
    f, g = generic_case()
    return solve_no_sign(f, g, grid=grid(n))


def nearest_gamma_node(result, point):
    gamma = result.free_boundary
    k = np.argmin(np.hypot(gamma[:, 0] - point[0], gamma[:, 1] - point[1]))
    g = result.u.grid
    return tuple(float(c) for c in g.node(*g.nearest_node(gamma[k])))


def report_rows(result, center, r0, J, **kw):
    v = newtonian_potential(result.f).v
    return regularity_report(result.u, v, result.f, result, center, r0, J, **kw)


# --------------------------------------------------------------- criteria

def criterion_1():
    errs = {}
    for n in (129, 257):
        res, secs = radial_no_sign(n)
        errs[n] = float(np.max(np.abs(res.u.values - fixture("radial", n).u.values)))
    res, secs = radial_no_sign(257)
    h = grid(257).h
    radii = np.hypot(res.free_boundary[:, 0], res.free_boundary[:, 1])
    fb = float(np.max(np.abs(radii - 0.5)))
    ratio = errs[129] / errs[257]
    ok = res.converged and errs[257] <= 1e-3 and fb <= 2 * h and secs <= 60 and ratio >= 3
    return ok, (f"err257={errs[257]:.3g} fb_dev={fb:.3g} (2h={2 * h:.3g}) "
                f"time={secs:.1f}s ratio={ratio:.2f}")


def criterion_2():
    a, _ = radial_no_sign(257)
    b = radial_psor(257)
    diff = float(np.max(np.abs(a.u.values - b.u.values)))
    return diff <= 1e-6, f"max|u_nosign - u_psor|={diff:.3g}"


def criterion_3():
    g = grid(65)
    rng = np.random.default_rng(2024)
    worst_s = worst_p = 0.0
    cases = []
    for _ in range(20):
        a, b, c, d, e, k = rng.normal(size=6)
        u = ScalarField.from_function(g, lambda x, y: a * x**2 + b * x * y + c * y**2 + d * x + e * y + k)
        cases.append((u, tuple(rng.uniform(-0.3, 0.3, 2)), rng.uniform(0.15, 0.5)))
    for kind in ("half_space", "polynomial", "radial"):
        u = fixture(kind, 129).u
        cases += [(u, (0.0, 0.0), 0.4), (u, (0.5, 0.0), 0.2), (u, (0.0, -0.5), 0.1)]
    ok = True
    for u, center, r in cases:
        p, q = project(u, center, r), project_bruteforce(u, center, r)
        ds = abs(p.S - q.S)
        dp = float(np.max(np.abs(p.P - q.P)))
        worst_s = max(worst_s, ds / (1 + p.S))
        worst_p = max(worst_p, dp)
        ok &= ds <= 1e-8 * (1 + p.S) and dp <= 1e-8
    return ok, f"{len(cases)} cases, max |dS|/(1+S)={worst_s:.3g} max |dP|={worst_p:.3g}"


def criterion_4():
    g = grid(129)
    saddle = project(ScalarField.from_function(g, lambda x, y: x**2 - y**2), (0, 0), 0.5).S
    ok = abs(saddle - 2 * math.sqrt(2)) <= 1e-8
    hs = fixture("half_space", 129).u
    target = math.sqrt(2) / 4
    vals = [project(hs, (0, 0), r).S for r in (0.4, 0.2, 0.1, 0.05)]
    ok &= all(abs(s - target) <= 0.05 * target for s in vals)
    return ok, f"saddle S={saddle:.12f}; half-space S={', '.join(f'{s:.6f}' for s in vals)}"


def criterion_5():
    out = []
    ok = True
    for name, res, center in (("radial", fixture("radial", 257), (0.5, 0.0)),
                              ("half_space", fixture("half_space", 257), (0.0, 0.0))):
        rep = s_boundedness_check(report_rows(res, center, 0.4, 4))
        ok &= rep.bounded
        out.append(f"{name}={rep.bounded}({rep.growth_exponent:.3f})")
    gen = generic_no_sign(257)
    ok &= gen.converged
    center = nearest_gamma_node(gen, (0.5, 0.0))
    rep = s_boundedness_check(report_rows(gen, center, 0.4, 4))
    ok &= rep.bounded
    out.append(f"generic={rep.bounded}({rep.growth_exponent:.3f}) at {center}")
    g = grid(257)
    X, Y = g.coords()
    r = np.hypot(X, Y)
    u = ScalarField(g, np.where(r > 0, np.sqrt(r) * (X**2 - Y**2) / np.where(r > 0, r, 1), 0.0))
    zero = ScalarField(g, np.zeros(g.shape), "f")
    sing = SolveResult(u, Mask.empty(g), np.zeros((0, 2)), 0, True, 0.0, zero)
    rows = regularity_report(u, zero, zero, sing, (0.0, 0.0), 0.8, 6, require_gamma=False)
    rep = s_boundedness_check(rows)
    ok &= (not rep.bounded) and abs(rep.growth_exponent - 0.5) <= 0.1
    out.append(f"singular={rep.bounded}({rep.growth_exponent:.3f})")
    return ok, " ".join(out)


def criterion_6():
    radii_dec = [0.4, 0.3, 0.2, 0.1]
    ok = True
    parts = []
    for sign in (1, -1):
        lims = {}
        for kind in ("half_space", "polynomial"):
            fx = fixture(kind, 1025)
            lims[kind] = weiss_limit(fx.u, fx.f, (0, 0), radii_dec, sign).value
            w = [weiss(fx.u, fx.f, (0, 0), r, sign).value for r in (0.1, 0.2, 0.4)]
            spread = (max(w) - min(w)) / abs(np.mean(w))
            ok &= spread <= 0.01
            parts.append(f"{kind}[{sign:+d}] spread={spread:.2%}")
        ratio = lims["polynomial"] / lims["half_space"]
        ok &= abs(ratio - 2) <= 0.1
        parts.append(f"ratio[{sign:+d}]={ratio:.4f}")
    return ok, "grid 1025^2; " + " ".join(parts)


def criterion_7():
    fx = fixture("radial", 1025)
    center = nearest_gamma_node(fx, (0.5, 0.0))
    radii = np.geomspace(0.1, 0.45, 12)
    viol = {}
    for sign in (1, -1):
        viol[sign] = monotonicity_violation([weiss(fx.u, fx.f, center, r, sign).value for r in radii])
    passing = [s for s in (-1, 1) if viol[s] <= 1e-3]
    ok = bool(passing)
    named = ", ".join(f"{s:+d}" for s in passing) if passing else "none"
    return ok, (f"12 radii in [0.1, 0.45] at {center}, grid 1025^2; violation(+1)={viol[1]:.3g} "
                f"violation(-1)={viol[-1]:.3g}; monotone convention: {named}")


def criterion_8():
    fx = fixture("radial", 1025)
    worst = 0.0
    ok = True
    for angle in (0.0, 1.0, 2.5, 4.0):
        center = nearest_gamma_node(fx, (0.5 * math.cos(angle), 0.5 * math.sin(angle)))
        rows = report_rows(fx, center, 0.4, 5)
        vals = [r.lemma3_hat_C for r in rows if 1 <= r.j <= 5]
        ok &= all(math.isfinite(v) for v in vals)
        worst = max(worst, max(vals))
    ok &= worst <= 100
    return ok, f"4 centers, r0=0.4, grid 1025^2; max lemma3_hat_C over j=1..5 = {worst:.3g}"


def criterion_9():
    r = np.geomspace(1e-8, 0.5, 2001)
    a = dini_integral(r, np.sqrt(r))
    r2 = np.geomspace(1e-12, 0.5, 2001)
    b = dini_integral(r2, 1 / np.log(1 / r2))
    ok = a.converged and abs(a.value - math.sqrt(2)) <= 1e-3 and not b.converged
    return ok, f"sqrt: {a.value:.6f} converged={a.converged}; 1/ln(1/r): converged={b.converged}"


def criterion_10():
    parts = []
    ok = True
    solved, _ = radial_no_sign(257)
    for name, res in (("fixture", fixture("radial", 257)), ("solved", solved)):
        center = nearest_gamma_node(res, (0.5, 0.0))
        v = thickness_classify(res, center, 0.2)
        good = (v.verdict == "regular-candidate" and v.delta >= 0.25
                and v.min_u >= -10 * res.zero_tol)
        ok &= good
        parts.append(f"radial {name}: {v.verdict} delta={v.delta:.3f} min_u={v.min_u:.2g}")
    v = thickness_classify(fixture("polynomial", 257), (0.0, 0.0), 0.2)
    ok &= v.verdict == "thin-candidate"
    parts.append(f"polynomial: {v.verdict}")
    return ok, "; ".join(parts)


def criterion_11(tmp: Path):
    src = tmp / "src"
    if cli_main(["fixture", "kind=radial", "n=129", "--out", str(src)]) != 0:
        return False, "fixture command failed"
    outs = []
    for d in ("run1", "run2"):
        rc = cli_main(["diagnose", f"in={src}", "near=0.5,0", "--out", str(tmp / d)])
        if rc != 0:
            return False, f"diagnose exit {rc}"
        outs.append(tmp / d)
    names = sorted(p.name for p in outs[0].iterdir())
    same = all((outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in names)
    return same, f"compared {', '.join(names)}"


CRITERIA = {
    1: ("radial benchmark", criterion_1),
    2: ("cross-solver agreement", criterion_2),
    3: ("projection oracle equivalence", criterion_3),
    4: ("projection values", criterion_4),
    5: ("S-boundedness", criterion_5),
    6: ("Weiss dichotomy", criterion_6),
    7: ("Weiss monotonicity", criterion_7),
    8: ("projection-difference constant", criterion_8),
    9: ("Dini diagnostic", criterion_9),
    10: ("thickness pipeline", criterion_10),
    11: ("determinism", criterion_11),
}


def _line(n, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} criterion {n:2d} ({CRITERIA[n][0]}): {detail}"


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, tmp_path, capsys):
    fn = CRITERIA[n][1]
    ok, detail = fn(tmp_path) if n == 11 else fn()
    with capsys.disabled():
        sys.stdout.write("\n" + _line(n, ok, detail) + "\n")
    assert ok, detail


if __name__ == "__main__":
    import tempfile

    failures = 0
    for n, (_, fn) in sorted(CRITERIA.items()):
        if n == 11:
            with tempfile.TemporaryDirectory() as d:
                ok, detail = fn(Path(d))
        else:
            ok, detail = fn()
        failures += not ok
        print(_line(n, ok, detail), flush=True)
    sys.exit(1 if failures else 0)
