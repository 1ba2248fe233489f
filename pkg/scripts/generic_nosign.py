"""Solve the sign-changing test problem and run the scale diagnostics along its free boundary.

Writes the solution and, per sampled free-boundary center, the dyadic
report and thickness verdict, using the same file layout as the CLI.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from nosignlab.cli import write_result
from nosignlab.fields import Grid
from nosignlab.pipeline import regularity_report, rows_to_csv, s_boundedness_check, thickness_classify
from nosignlab.potential import newtonian_potential
from nosignlab.solver import generic_case, solve_no_sign


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, default=257)
    ap.add_argument("--centers", type=int, default=6)
    ap.add_argument("--r0", type=float, default=0.4)
    ap.add_argument("--J", type=int, default=4)
    ap.add_argument("--out", default="generic_out")
    args = ap.parse_args(argv)

    grid = Grid.square(args.n)
    f, g = generic_case()
    res = solve_no_sign(f, g, grid=grid)
    u = res.u.values
    print(f"converged after {res.outer_iters} outer steps; zero nodes {len(res.zero_set)}, "
          f"negative nodes {int(np.count_nonzero(u < -res.zero_tol))}, min u {u.min():.4f}")
    out = Path(args.out)
    write_result(out, res, {"n": args.n, "outer_iters": res.outer_iters, "zero_tol": res.zero_tol,
                            "converged": res.converged, "residual": res.residual})
    v = newtonian_potential(res.f).v
    gamma = res.free_boundary
    idx = np.linspace(0, len(gamma) - 1, args.centers).round().astype(int)
    summary = []
    for k in idx:
        c = tuple(float(x) for x in grid.node(*grid.nearest_node(gamma[k])))
        try:
            rows = regularity_report(res.u, v, res.f, res, c, args.r0, args.J)
        except ValueError as exc:
            print(f"skip {c}: {exc}")
            continue
        rep = s_boundedness_check(rows)
        ver = thickness_classify(res, c, args.r0 / 2)
        tag = f"{c[0]:+.4f}_{c[1]:+.4f}"
        (out / f"report_{tag}.csv").write_text(rows_to_csv(rows))
        summary.append({"center": c, "bounded": rep.bounded, "growth_exponent": rep.growth_exponent,
                        "verdict": ver.verdict, "delta": ver.delta})
        print(f"{c}: bounded={rep.bounded} exponent={rep.growth_exponent:.3f} verdict={ver.verdict}")
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
