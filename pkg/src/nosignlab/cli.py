"""Batch front-end: ``fixture``, ``solve``, ``diagnose`` and ``sweep``.

Configuration is a flat ``key = value`` file (``--config``), overridden by
``--set key=value`` flags and bare ``key=value`` arguments, in that order.

Exit codes: 0 success, 2 bad configuration, 3 solver non-convergence,
4 I/O failure, 5 no free-boundary point found.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .fields import FieldFormatError, Grid, Mask, ScalarField, read_field, write_field
from .pipeline import (ThicknessConfig, rows_to_csv, regularity_report, s_boundedness_check,
                       thickness_classify, _jsonable)
from .potential import newtonian_potential
from .solver import (FIXTURE_KINDS, MaskCycleError, NonConvergenceError, SolveParams, SolveResult,
                     fixture_function, generic_case, make_fixture, solve_no_sign, solve_obstacle_psor)
from .zeroset import interface_points

log = logging.getLogger("nosignlab")

EXIT_CONFIG, EXIT_NONCONV, EXIT_IO, EXIT_NO_GAMMA = 2, 3, 4, 5


class ConfigError(ValueError):
    pass


class NoFreeBoundary(RuntimeError):
    pass


_GRID_KEYS = {"n": 129, "lo": -1.0, "hi": 1.0}
_SOLVER_KEYS = {"linear_tol": 1e-10, "max_sweeps": 50_000, "max_outer": 100,
                "zero_tol": None, "grad_tol": None, "relax": None}
_DIAG_KEYS = {
    "in": None, "v": None, "near": "0,0", "center": None, "snap": 1,
    "r0": 0.4, "J": 4, "kappa": 0.0, "r_ref": None,
    "weiss_n": 12, "weiss_rmin": None, "weiss_rmax": None,
    "eps_thick": 0.25, "eps_thin": 0.05, "sign_tol": None, "graph_tol": 0.1,
    "n_angles": 180, "plots": 0,
}
KEYS = {
    "fixture": {"kind": None, "a": 0.5, "shift": "0,0", "angle": 0.0, "zero_tol": 1e-12, **_GRID_KEYS},
    "solve": {"preset": None, "f": None, "g": None, "solver": "no_sign", "a": 0.5,
              **_GRID_KEYS, **_SOLVER_KEYS},
    "diagnose": dict(_DIAG_KEYS),
    "sweep": {**_DIAG_KEYS, "centers": None, "n_centers": 8},
}
# keys whose default is None but whose value, when given, is a float
_OPTIONAL_FLOATS = {"zero_tol", "grad_tol", "relax", "r_ref", "weiss_rmin", "weiss_rmax", "sign_tol"}
REQUIRED = {"fixture": ("kind",), "solve": (), "diagnose": (), "sweep": ()}
PRESETS = ("radial", "harmonic", "generic")


# ------------------------------------------------------------------ config

def parse_config_text(text: str, source: str = "config") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_config(command: str, config_path, overrides) -> dict:
    raw = {}
    if config_path:
        try:
            raw.update(parse_config_text(Path(config_path).read_text(), str(config_path)))
        except OSError as exc:
            raise OSError(f"cannot read config {config_path}: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    allowed = KEYS[command]
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) for {command}: {', '.join(unknown)}")
    cfg = {}
    for key, default in allowed.items():
        cfg[key] = _coerce(key, raw[key], default) if key in raw else default
    for key in REQUIRED[command]:
        if cfg[key] is None:
            raise ConfigError(f"missing required key {key!r}")
    return cfg


def _coerce(key, value, default):
    try:
        if isinstance(default, bool):
            return value.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float) or key in _OPTIONAL_FLOATS:
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return value


def _point(key, text):
    try:
        x, y = (float(t) for t in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad point for {key}: {text!r} (expected x,y)") from exc
    return (x, y)


def _grid(cfg) -> Grid:
    if cfg["n"] < 3 or not cfg["hi"] > cfg["lo"]:
        raise ConfigError("grid needs n >= 3 and hi > lo")
    return Grid.square(cfg["n"], cfg["lo"], cfg["hi"])


# ----------------------------------------------------------------- writers

def fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, (tuple, list)):
        return ",".join(fmt(x) for x in v)
    return str(v)


def write_meta(path: Path, meta: dict) -> None:
    path.write_text("".join(f"{k} = {fmt(meta[k])}\n" for k in sorted(meta)))


def read_meta(path: Path) -> dict:
    return parse_config_text(path.read_text(), str(path))


def write_result(out: Path, result: SolveResult, meta: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_field(result.u, out / "u.field")
    write_field(result.f, out / "f.field")
    write_field(result.zero_set.as_field(), out / "mask.field")
    gamma = result.free_boundary
    lines = ["x,y\n"] + [f"{x:.17g},{y:.17g}\n" for x, y in gamma]
    (out / "gamma.csv").write_text("".join(lines))
    write_meta(out / "meta.txt", meta)


def load_result(directory: Path) -> SolveResult:
    try:
        u = read_field(directory / "u.field", "u")
        f = read_field(directory / "f.field", "f")
        mask_f = read_field(directory / "mask.field", "mask")
        meta = read_meta(directory / "meta.txt") if (directory / "meta.txt").exists() else {}
    except (OSError, FieldFormatError) as exc:
        raise OSError(f"cannot load solution from {directory}: {exc}") from exc
    if not (u.grid == f.grid == mask_f.grid):
        raise OSError(f"{directory}: fields live on different grids")
    zero = Mask(u.grid, mask_f.values != 0)
    zero_tol = float(meta.get("zero_tol", 0.0))
    return SolveResult(u, zero, interface_points(u, zero, zero_tol), int(meta.get("outer_iters", 0)),
                       meta.get("converged", "1") == "1", float(meta.get("residual", "nan")), f,
                       zero_tol, meta)


# ---------------------------------------------------------------- commands

def cmd_fixture(cfg, out: Path) -> int:
    if cfg["kind"] not in FIXTURE_KINDS:
        raise ConfigError(f"bad value for kind: {cfg['kind']!r} (expected one of {', '.join(FIXTURE_KINDS)})")
    grid = _grid(cfg)
    shift = _point("shift", cfg["shift"])
    res = make_fixture(cfg["kind"], grid, a=cfg["a"], shift=shift, angle=cfg["angle"],
                       zero_tol=cfg["zero_tol"])
    meta = {"kind": cfg["kind"], "a": cfg["a"], "shift": shift, "angle": cfg["angle"], "n": grid.nx,
            "h": grid.h, "zero_tol": res.zero_tol, "outer_iters": 0, "converged": True,
            "residual_off_band": res.residual, "gamma_points": len(res.free_boundary)}
    write_result(out, res, meta)
    return 0


def _solve_inputs(cfg, grid):
    preset = cfg["preset"]
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"bad value for preset: {preset!r} (expected one of {', '.join(PRESETS)})")
        if preset == "radial":
            return 1.0, fixture_function("radial", cfg["a"])[0]
        if preset == "harmonic":
            return 0.0, lambda x, y: x**2 - y**2
        return generic_case(cfg["a"])
    if cfg["f"] is None or cfg["g"] is None:
        raise ConfigError("solve needs preset=... or both f=PATH and g=PATH")
    try:
        f = read_field(cfg["f"], "f")
        g = read_field(cfg["g"], "g")
    except FieldFormatError as exc:
        raise OSError(str(exc)) from exc
    if f.grid != g.grid:
        raise ConfigError("f and g files must share a grid")
    return f, g


def cmd_solve(cfg, out: Path) -> int:
    grid = _grid(cfg)
    f, g = _solve_inputs(cfg, grid)
    if isinstance(f, ScalarField):
        grid = f.grid
    params = SolveParams(**{k: cfg[k] for k in _SOLVER_KEYS})
    meta = {"preset": cfg["preset"] or "files", "solver": cfg["solver"], "n": grid.nx, "h": grid.h}
    if cfg["solver"] not in ("no_sign", "psor"):
        raise ConfigError(f"bad value for solver: {cfg['solver']!r}")
    try:
        if cfg["solver"] == "psor":
            res = solve_obstacle_psor(f, g, params, grid=grid)
        else:
            res = solve_no_sign(f, g, params, grid=grid)
    except (NonConvergenceError, MaskCycleError) as exc:
        log.error("%s", exc)
        u = exc.u if exc.u is not None else ScalarField(grid, np.zeros(grid.shape), "u")
        mask = exc.masks[-1] if exc.masks else Mask.empty(grid)
        fld = f if isinstance(f, ScalarField) else ScalarField.from_function(grid, f, "f") if callable(f) \
            else ScalarField(grid, np.full(grid.shape, float(f)), "f")
        failed = SolveResult(u, mask, interface_points(u, mask, 0.0), 0, False, getattr(exc, "residual", math.nan), fld)
        meta.update(converged=False, error=type(exc).__name__, residual=failed.residual, zero_tol=0.0)
        write_result(out, failed, meta)
        return EXIT_NONCONV
    gamma = res.free_boundary
    meta.update(converged=res.converged, outer_iters=res.outer_iters, residual=res.residual,
                zero_tol=res.zero_tol, zero_nodes=len(res.zero_set), gamma_points=len(gamma),
                fb_radius=float(np.mean(np.hypot(gamma[:, 0], gamma[:, 1]))) if len(gamma) else math.nan,
                u_min=float(res.u.values.min()))
    write_result(out, res, meta)
    return 0


def _pick_center(result: SolveResult, cfg):
    grid = result.u.grid
    gamma = result.free_boundary
    if len(gamma) == 0:
        raise NoFreeBoundary("no free-boundary point found")
    if cfg["center"] is not None:
        return _point("center", cfg["center"])
    near = _point("near", cfg["near"])
    c = gamma[np.argmin(np.hypot(gamma[:, 0] - near[0], gamma[:, 1] - near[1]))]
    if cfg["snap"]:
        c = grid.node(*grid.nearest_node(c))
    return (float(c[0]), float(c[1]))


def _diagnose_center(result, v, center, cfg):
    """Report rows, verdict, Weiss sweep and summary for one center."""
    u, f = result.u, result.f
    h = u.grid.h
    rows = regularity_report(u, v, f, result, center, cfg["r0"], cfg["J"], cfg["kappa"],
                             n_angles=cfg["n_angles"])
    tcfg = ThicknessConfig(cfg["eps_thick"], cfg["eps_thin"], cfg["sign_tol"], cfg["graph_tol"],
                           cfg["n_angles"])
    r_ref = cfg["r_ref"] if cfg["r_ref"] is not None else cfg["r0"] / 2
    verdict = thickness_classify(result, center, r_ref, tcfg)
    rmax = cfg["weiss_rmax"] if cfg["weiss_rmax"] is not None else cfg["r0"]
    rmin = cfg["weiss_rmin"] if cfg["weiss_rmin"] is not None else max(8 * h, rmax / 8)
    radii = np.geomspace(rmin, rmax, cfg["weiss_n"])
    best, violation, values = dg.weiss_convention(u, f, center, radii)
    weiss_rows = [(float(r), s, values[s][k]) for s in (1, -1) for k, r in enumerate(radii)]
    try:
        bounded = s_boundedness_check(rows)
    except ValueError:
        bounded = None
    valid = [r for r in rows if r.available]
    summary = {
        "center": center,
        "verdict": verdict.verdict,
        "weiss_monotone_sign": best,
        "weiss_violation": {str(s): violation[s] for s in (1, -1)},
        "weiss_limit": {str(s): _safe_limit(u, f, center, radii[::-1], s) for s in (1, -1)},
        "S_max": max((r.S for r in valid), default=math.nan),
        "S_min": min((r.S for r in valid), default=math.nan),
        "bounded": None if bounded is None else bounded.bounded,
        "growth_exponent": None if bounded is None else bounded.growth_exponent,
        "growth_max": max((r.growth for r in valid), default=math.nan),
        "lemma3_hat_C_max": max((r.lemma3_hat_C for r in valid if math.isfinite(r.lemma3_hat_C)), default=math.nan),
        "bmo_lower_bound": dg.bmo_seminorm(u, [(center, r.r) for r in valid]) if valid else math.nan,
        "u_l1": u.l1_norm(),
    }
    return rows, verdict, weiss_rows, summary


def _safe_limit(u, f, center, radii, sign):
    lim = dg.weiss_limit(u, f, center, radii, sign)
    return {"value": lim.value, "confident": lim.confident}


def _potential(result, cfg):
    if cfg["v"] is not None:
        try:
            v = read_field(cfg["v"], "v")
        except FieldFormatError as exc:
            raise OSError(str(exc)) from exc
        if v.grid != result.u.grid:
            raise ConfigError("v must live on the solution grid")
        return v
    return newtonian_potential(result.f).v


def _weiss_csv(weiss_rows, prefix=None):
    head = (["center_x", "center_y"] if prefix else []) + ["r", "boundary_sign", "W"]
    lines = [",".join(head)]
    for r, s, w in weiss_rows:
        lines.append(",".join(([fmt(prefix[0]), fmt(prefix[1])] if prefix else []) + [fmt(r), str(s), fmt(w)]))
    return "\n".join(lines) + "\n"


_PLOT = """set datafile separator ','
set key autotitle columnhead
set logscale x
set xlabel 'r'
plot '{csv}' using 2:{col} with linespoints title '{title}'
"""


def _input_dir(cfg, out):
    d = Path(cfg["in"]) if cfg["in"] is not None else out
    if not (d / "u.field").exists():
        raise OSError(f"no solution files in {d} (run fixture or solve first)")
    return d


def cmd_diagnose(cfg, out: Path) -> int:
    result = load_result(_input_dir(cfg, out))
    center = _pick_center(result, cfg)
    v = _potential(result, cfg)
    rows, verdict, weiss_rows, summary = _diagnose_center(result, v, center, cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(rows_to_csv(rows))
    (out / "verdict.json").write_text(verdict.to_json())
    (out / "weiss.csv").write_text(_weiss_csv(weiss_rows))
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    if cfg["plots"]:
        for col, name in ((4, "S"), (7, "W"), (5, "lam")):
            (out / f"plot_{name}.gp").write_text(_PLOT.format(csv="report.csv", col=col, title=name))
    return 0


def cmd_sweep(cfg, out: Path) -> int:
    result = load_result(_input_dir(cfg, out))
    grid = result.u.grid
    gamma = result.free_boundary
    if len(gamma) == 0:
        raise NoFreeBoundary("no free-boundary point found")
    if cfg["centers"] is not None:
        centers = [_point("centers", c) for c in cfg["centers"].split(";") if c.strip()]
    else:
        idx = np.linspace(0, len(gamma) - 1, min(cfg["n_centers"], len(gamma))).round().astype(int)
        centers = [tuple(grid.node(*grid.nearest_node(gamma[i]))) for i in idx]
    v = _potential(result, cfg)
    csv_parts, weiss_parts, verdicts, summaries = [], [], [], []
    for c in centers:
        c = (float(c[0]), float(c[1]))
        try:
            rows, verdict, weiss_rows, summary = _diagnose_center(result, v, c, cfg)
        except ValueError as exc:
            log.warning("skipping center %s: %s", c, exc)
            continue
        text = rows_to_csv(rows, {"center_x": c[0], "center_y": c[1]})
        csv_parts.append(text if not csv_parts else text.split("\n", 1)[1])
        weiss_parts.append(_weiss_csv(weiss_rows, c) if not weiss_parts
                           else _weiss_csv(weiss_rows, c).split("\n", 1)[1])
        verdicts.append(json.loads(verdict.to_json()))
        summaries.append(_jsonable(summary))
    if not csv_parts:
        raise NoFreeBoundary("no admissible center on the free boundary")
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text("".join(csv_parts))
    (out / "sweep_weiss.csv").write_text("".join(weiss_parts))
    (out / "verdicts.json").write_text(json.dumps(verdicts, indent=2, sort_keys=True) + "\n")
    (out / "sweep_summary.json").write_text(json.dumps(summaries, indent=2, sort_keys=True) + "\n")
    return 0


COMMANDS = {"fixture": cmd_fixture, "solve": cmd_solve, "diagnose": cmd_diagnose, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nosignlab", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("pairs", nargs="*", metavar="key=value")
    parser.add_argument("--config", metavar="PATH")
    parser.add_argument("--out", metavar="DIR", default=".")
    parser.add_argument("--set", dest="sets", action="append", default=[], metavar="key=value")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = build_config(args.command, args.config, list(args.sets) + list(args.pairs))
        return COMMANDS[args.command](cfg, Path(args.out))
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except NoFreeBoundary as exc:
        log.error("%s", exc)
        return EXIT_NO_GAMMA
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
