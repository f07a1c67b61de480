"""Spatial convergence of the finite-difference oracle on an ATM call.

Prints the error against Black-Scholes and the ratio between successive
refinements; a ratio near 4 means second order.
"""

import argparse

import numpy as np

from kummerbs.closed_form import black_scholes
from kummerbs.oracle import FDGrid, fd_solve
from kummerbs.payoffs import PayoffDescriptor
from kummerbs.transform import MarketParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, nargs="+", default=[64, 128, 256, 512, 1024])
    ap.add_argument("--strike", type=float, default=100.0)
    ap.add_argument("--vol", type=float, default=0.2)
    args = ap.parse_args()

    params = MarketParams(0.05, (args.vol,), 1.0)
    call = PayoffDescriptor.vanilla_call(0, args.strike)
    ref = black_scholes(100.0, args.strike, 0.05, args.vol, 1.0)
    print(f"closed form {ref:.12f}")
    print(f"{'nodes':>6} {'value':>16} {'abs error':>12} {'ratio':>7}")
    prev = None
    for n in args.nodes:
        surf = fd_solve(call, params, np.ones((1, 1)), FDGrid.around([100.0], params, n, n))
        v = surf.at([100.0])
        err = abs(v - ref)
        ratio = f"{prev / err:7.3f}" if prev else " " * 7
        print(f"{n:6d} {v:16.12f} {err:12.3e} {ratio}")
        prev = err


if __name__ == "__main__":
    main()
