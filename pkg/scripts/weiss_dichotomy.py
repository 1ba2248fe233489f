"""Weiss energy on the two homogeneous blow-ups and on the radial solution.

For the half-space and polynomial fixtures the script reports W at several
radii and both boundary-sign conventions, per grid, together with the
ratio of the extrapolated limits.  For the radial fixture it reports the
monotonicity violation of each convention at a free-boundary point.
"""

import argparse
import sys

import numpy as np

from nosignlab.diagnostics import monotonicity_violation, weiss, weiss_limit
from nosignlab.fields import Grid
from nosignlab.solver import make_fixture


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[257, 513, 1025])
    ap.add_argument("--n-radii", type=int, default=12)
    args = ap.parse_args(argv)

    radii = [0.4, 0.3, 0.2, 0.1]
    print("grid   sign  W_half(0.1,0.2,0.4)              W_poly(0.1,0.2,0.4)              ratio")
    for n in args.sizes:
        grid = Grid.square(n)
        hs, po = make_fixture("half_space", grid), make_fixture("polynomial", grid)
        for sign in (1, -1):
            wh = [weiss(hs.u, hs.f, (0, 0), r, sign).value for r in (0.1, 0.2, 0.4)]
            wp = [weiss(po.u, po.f, (0, 0), r, sign).value for r in (0.1, 0.2, 0.4)]
            lh = weiss_limit(hs.u, hs.f, (0, 0), radii, sign).value
            lp = weiss_limit(po.u, po.f, (0, 0), radii, sign).value
            fmt = lambda w: " ".join(f"{x:+.5f}" for x in w)
            print(f"{n:5d}  {sign:+d}    {fmt(wh)}   {fmt(wp)}   {lp / lh:.4f}")

    print("\nradial fixture at (0.5, 0): relative monotonicity violation")
    rr = np.geomspace(0.1, 0.45, args.n_radii)
    for n in args.sizes:
        fx = make_fixture("radial", Grid.square(n))
        viol = {s: monotonicity_violation([weiss(fx.u, fx.f, (0.5, 0.0), r, s).value for r in rr])
                for s in (1, -1)}
        print(f"{n:5d}  +1: {viol[1]:.2e}   -1: {viol[-1]:.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
