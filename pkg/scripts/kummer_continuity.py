"""Approach to the co-monotone boundary of a two-asset basket call.

Regular-kernel prices at rho = 1 - delta are compared with the degenerate
kernel price at rho = 1, alongside a rank-one Monte Carlo estimate.
"""

import argparse

from kummerbs.geometry import CorrelationPoint
from kummerbs.payoffs import PayoffDescriptor
from kummerbs.pricing import MonteCarlo, PricingRequest, Quadrature, price
from kummerbs.transform import MarketParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--deltas", type=float, nargs="+", default=[1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
    ap.add_argument("--order", type=int, default=64)
    ap.add_argument("--paths", type=int, default=10**6)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    params = MarketParams(0.05, (0.2, 0.3), 1.0)
    basket = PayoffDescriptor.basket_call((0.5, 0.5), 100.0)

    def request(rho, method):
        return PricingRequest(params, CorrelationPoint.of(rho), (100.0, 100.0), 0.0, basket, method)

    limit = price(request(1.0, Quadrature(args.order)))
    mc = price(request(1.0, MonteCarlo(args.paths, args.seed)))
    print(f"degenerate ({limit.method_used}) {limit.value:.10f}")
    print(f"rank-1 Monte Carlo {mc.value:.10f} +/- {mc.std_error:.2e}")
    print(f"{'delta':>8} {'value':>14} {'rel gap':>10}")
    for d in args.deltas:
        v = price(request(1.0 - d, Quadrature(args.order))).value
        print(f"{d:8.0e} {v:14.10f} {abs(v - limit.value) / limit.value:10.2e}")


if __name__ == "__main__":
    main()
