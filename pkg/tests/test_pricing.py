import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import norm

from conftest import random_correlation
from kummerbs.closed_form import black_scholes, black_scholes_delta, margrabe
from kummerbs.errors import ConfigError, PricingUndefinedError
from kummerbs.payoffs import PayoffDescriptor
from kummerbs.geometry import (
    CorrelationPoint,
    Region,
    assemble_matrix,
    kummer_sheet_z,
    spectral_decompose,
)
from kummerbs.pricing import (
    MonteCarlo,
    PricingRequest,
    Quadrature,
    correlation_root,
    greeks_delta,
    price,
    price_monte_carlo,
    sample_normals,
)
from kummerbs.transform import MarketParams

# Frozen regression constants, each pinned by an independent route (see tests below).
BS_ATM_CALL = 10.450583572185565
MARGRABE_ATM = 11.246291601828489

P1 = MarketParams(0.05, (0.2,), 1.0)
P2 = MarketParams(0.05, (0.2, 0.3), 1.0)
P3 = MarketParams(0.05, (0.2, 0.25, 0.3), 1.0)
ONE = PayoffDescriptor.custom(lambda S: np.ones(S.shape[:-1]))


def req(params, corr, spot, payoff, method=None, tau=0.0, eps_rank=None):
    return PricingRequest(params, corr, tuple(spot), tau, payoff, method or Quadrature(64), eps_rank)


# -- closed forms --------------------------------------------------------------------


def test_bs_constant_by_lognormal_quadrature():
    mu, s = np.log(100) + 0.03, 0.2

    def integrand(x):
        return (np.exp(x) - 100.0) * norm.pdf(x, mu, s)

    val, _ = integrate.quad(integrand, np.log(100.0), mu + 12 * s, epsabs=1e-13, epsrel=1e-13)
    assert np.exp(-0.05) * val == pytest.approx(BS_ATM_CALL, abs=1e-10)
    assert black_scholes(100, 100, 0.05, 0.2, 1.0) == pytest.approx(BS_ATM_CALL, abs=1e-12)


def test_bs_edge_cases_and_parity():
    assert black_scholes(120, 100, 0.05, 0.2, 0.0) == 20.0
    assert black_scholes(120, 0.0, 0.05, 0.2, 1.0) == pytest.approx(120.0)
    for S, K in [(80, 100), (100, 100), (130, 95)]:
        c = black_scholes(S, K, 0.03, 0.25, 0.7)
        p = black_scholes(S, K, 0.03, 0.25, 0.7, "put")
        assert c - p == pytest.approx(S - K * np.exp(-0.03 * 0.7), abs=1e-12)
    with pytest.raises(ValueError):
        black_scholes(100, 100, 0.05, 0.2, 1.0, "straddle")


def test_margrabe_constant_and_limits():
    assert margrabe(100, 100, 0.2, 0.2, 0.0, 1.0) == pytest.approx(MARGRABE_ATM, abs=1e-12)
    assert margrabe(100, 100, 0.2, 0.2, 1.0, 1.0) == 0.0
    assert margrabe(110, 100, 0.2, 0.2, 1.0, 1.0) == pytest.approx(10.0)
    assert margrabe(100, 100, 0.2, 0.2 + 1e-9, 1.0, 1.0) == pytest.approx(0.0, abs=1e-6)


@pytest.mark.slow
def test_margrabe_constant_by_monte_carlo():
    p = MarketParams(0.0, (0.2, 0.2), 1.0)
    r = price(req(p, CorrelationPoint.of(0.0), (100, 100), PayoffDescriptor.exchange(0, 1),
                  MonteCarlo(10**7, 7)))
    assert abs(r.value - MARGRABE_ATM) <= 3 * r.std_error


# -- routing and errors ----------------------------------------------------------------


def test_request_validation():
    call = PayoffDescriptor.vanilla_call(0, 100)
    with pytest.raises(ConfigError):
        req(P1, None, (100.0, 100.0), call)
    with pytest.raises(ConfigError):
        req(P1, None, (-1.0,), call)
    with pytest.raises(ConfigError):
        req(P1, None, (100.0,), call, tau=1.5)
    with pytest.raises(ConfigError):
        req(P1, CorrelationPoint.of(0.2), (100.0,), call)
    with pytest.raises(ConfigError):
        req(P2, None, (100.0, 100.0), call)
    with pytest.raises(ConfigError):
        req(P2, CorrelationPoint.of(0.2), (100.0, 100.0), PayoffDescriptor.vanilla_call(2, 100))


def test_low_quadrature_order_rejected():
    with pytest.raises(ConfigError):
        price(req(P1, None, (100,), PayoffDescriptor.vanilla_call(0, 100), Quadrature(2)))


def test_indefinite_is_never_priced():
    basket = PayoffDescriptor.basket_call((1, 1, 1), 300)
    for method in (Quadrature(16), MonteCarlo(1000, 0)):
        with pytest.raises(PricingUndefinedError) as exc:
            price(req(P3, CorrelationPoint.of(0.9, 0.9, -0.9), (100,) * 3, basket, method))
        assert exc.value.determinant == pytest.approx(-2.888)
        assert exc.value.min_eigenvalue < 0
        assert "-2.888" in str(exc.value)


def test_expiry_returns_payoff():
    r = price(req(P1, None, (120,), PayoffDescriptor.vanilla_call(0, 100), tau=1.0))
    assert r.value == 20.0 and r.method_used == "expiry"


def test_too_many_diffusive_dims_for_quadrature():
    p = MarketParams(0.05, (0.2,) * 5, 1.0)
    corr = CorrelationPoint.from_matrix(random_correlation(np.random.default_rng(0), 5))
    with pytest.raises(ConfigError):
        price(req(p, corr, (100,) * 5, PayoffDescriptor.basket_call((0.2,) * 5, 100), Quadrature(8)))


# -- quadrature ------------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["call", "put"])
@pytest.mark.parametrize("strike", [70.0, 90.0, 100.0, 115.0, 150.0])
def test_vanilla_quadrature_vs_closed_form(kind, strike):
    make = PayoffDescriptor.vanilla_call if kind == "call" else PayoffDescriptor.vanilla_put
    r = price(req(P1, None, (100,), make(0, strike), tau=0.25))
    assert r.value == pytest.approx(black_scholes(100, strike, 0.05, 0.2, 0.75, kind), abs=1e-6)
    assert r.method_used == "quadrature-regular" and r.std_error is None


def test_atm_call_regression():
    r = price(req(P1, None, (100,), PayoffDescriptor.vanilla_call(0, 100)))
    assert r.value == pytest.approx(BS_ATM_CALL, abs=1e-6)


@pytest.mark.parametrize("rho", [-0.5, 0.0, 0.5])
def test_margrabe_by_quadrature(rho):
    r = price(req(P2, CorrelationPoint.of(rho), (100, 95), PayoffDescriptor.exchange(0, 1)))
    ref = margrabe(100, 95, 0.2, 0.3, rho, 1.0)
    assert abs(r.value - ref) / ref <= 1e-4


@pytest.mark.parametrize("rho", [1.0, -1.0])
def test_margrabe_on_kummer_boundary(rho):
    # the effective vol sigma1 -/+ sigma2 stays positive, so Margrabe still applies
    r = price(req(P2, CorrelationPoint.of(rho), (100, 95), PayoffDescriptor.exchange(0, 1)))
    assert r.method_used == "quadrature-degenerate"
    ref = margrabe(100, 95, 0.2, 0.3, rho, 1.0)
    assert abs(r.value - ref) / ref <= 1e-4


def test_margrabe_equal_vol_regression():
    p = MarketParams(0.05, (0.2, 0.2), 1.0)
    r = price(req(p, CorrelationPoint.of(0.0), (100, 100), PayoffDescriptor.exchange(0, 1)))
    assert abs(r.value - MARGRABE_ATM) / MARGRABE_ATM <= 1e-4


def test_exchange_with_units_by_quadrature():
    r = price(req(P2, CorrelationPoint.of(0.3), (100, 50), PayoffDescriptor.exchange(0, 1, 2.0)))
    ref = margrabe(100, 50, 0.2, 0.3, 0.3, 1.0, 2.0)
    assert abs(r.value - ref) / ref <= 1e-4


def test_zero_payoff_and_discount_bond():
    zero = PayoffDescriptor.custom(lambda S: np.zeros(S.shape[:-1]))
    assert price(req(P2, CorrelationPoint.of(0.3), (100, 90), zero)).value == 0.0
    r = price(req(P2, CorrelationPoint.of(0.3), (100, 90), ONE, tau=0.4))
    assert r.value == pytest.approx(np.exp(-0.05 * 0.6), abs=1e-10)


@pytest.mark.parametrize("entries", [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (1.0, 0.0, 0.0),
                                     (0.5, 0.5, kummer_sheet_z(0.5, 0.5, "plus")),
                                     (-0.3, 0.6, kummer_sheet_z(-0.3, 0.6, "minus"))])
def test_discount_bond_on_kummer_surface(entries):
    r = price(req(P3, CorrelationPoint.of(*entries), (100, 90, 110), ONE, tau=0.2, eps_rank=1e-9))
    assert r.region.verdict is Region.KUMMER_SURFACE
    assert r.value == pytest.approx(np.exp(-0.05 * 0.8), abs=1e-8)


def test_basket_self_convergence():
    basket = PayoffDescriptor.basket_call((0.5, 0.5), 100)
    a = price(req(P2, CorrelationPoint.of(0.5), (100, 100), basket, Quadrature(64))).value
    b = price(req(P2, CorrelationPoint.of(0.5), (100, 100), basket, Quadrature(128))).value
    assert abs(a - b) <= 1e-7


def test_quadrature_is_deterministic():
    basket = PayoffDescriptor.basket_call((0.3, 0.3, 0.4), 100)
    corr = CorrelationPoint.of(0.2, 0.4, 0.1)
    a = price(req(P3, corr, (100, 100, 100), basket, Quadrature(32))).value
    b = price(req(P3, corr, (100, 100, 100), basket, Quadrature(32))).value
    assert a == b


@pytest.mark.parametrize("kind", ["max_call", "min_call"])
def test_max_min_quadrature_vs_monte_carlo(kind):
    pay = getattr(PayoffDescriptor, kind)(100)
    corr = CorrelationPoint.of(0.3)
    q = price(req(P2, corr, (100, 95), pay)).value
    mc = price(req(P2, corr, (100, 95), pay, MonteCarlo(10**6, 3)))
    assert abs(q - mc.value) <= 3 * mc.std_error


def test_max_min_parity():
    # max(a,b) + min(a,b) = a + b, so the two calls at zero strike sum to both spots
    corr = CorrelationPoint.of(-0.2)
    mx = price(req(P2, corr, (100, 95), PayoffDescriptor.max_call(0.0))).value
    mn = price(req(P2, corr, (100, 95), PayoffDescriptor.min_call(0.0))).value
    assert mx + mn == pytest.approx(195.0, abs=1e-8)


# -- degenerate pricing ------------------------------------------------------------------


def test_degenerate_call_on_pinned_asset():
    call2 = PayoffDescriptor.vanilla_call(1, 100)
    r = price(req(P2, CorrelationPoint.of(1.0), (100, 95), call2))
    assert r.method_used == "quadrature-degenerate"
    assert r.diagnostics == {"n_a": 1, "n_b": 1, "coord_b": [1]}
    ref = black_scholes(95, 100, 0.05, 0.3, 1.0)
    assert abs(r.value - ref) / ref <= 1e-3


@pytest.mark.slow
def test_degenerate_call_vs_rank_one_monte_carlo():
    call2 = PayoffDescriptor.vanilla_call(1, 100)
    q = price(req(P2, CorrelationPoint.of(1.0), (100, 95), call2)).value
    mc = price(req(P2, CorrelationPoint.of(1.0), (100, 95), call2, MonteCarlo(10**7, 11)))
    assert abs(q - mc.value) / q <= 1e-3
    assert abs(q - mc.value) <= 3 * mc.std_error
    assert mc.diagnostics["rank"] == 1


def test_vertex_basket_vs_monte_carlo():
    basket = PayoffDescriptor.basket_call((0.3, 0.3, 0.4), 100)
    vertex = CorrelationPoint.of(1.0, 1.0, 1.0)
    q = price(req(P3, vertex, (100, 100, 100), basket))
    assert q.diagnostics["n_a"] == 1 and q.diagnostics["n_b"] == 2
    mc = price(req(P3, vertex, (100, 100, 100), basket, MonteCarlo(10**5, 5)))
    assert abs(q.value - mc.value) <= 3 * mc.std_error


def test_sheet_point_vs_monte_carlo():
    corr = CorrelationPoint.of(0.5, 0.5, kummer_sheet_z(0.5, 0.5, "plus"))
    basket = PayoffDescriptor.basket_call((0.3, 0.3, 0.4), 100)
    q = price(req(P3, corr, (100, 100, 100), basket, eps_rank=1e-9))
    assert q.diagnostics["n_a"] == 2
    mc = price(req(P3, corr, (100, 100, 100), basket, MonteCarlo(10**6, 6), eps_rank=1e-9))
    assert abs(q.value - mc.value) <= 3 * mc.std_error


def test_regular_prices_converge_to_degenerate():
    basket = PayoffDescriptor.basket_call((0.5, 0.5), 100)
    limit = price(req(P2, CorrelationPoint.of(1.0), (100, 100), basket)).value
    gaps = [abs(price(req(P2, CorrelationPoint.of(1 - d), (100, 100), basket)).value - limit) / limit
            for d in (1e-2, 1e-3, 1e-4)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] <= 1e-3


# -- Monte Carlo -------------------------------------------------------------------------


def test_monte_carlo_vanilla_within_three_errors():
    for kind, make in (("call", PayoffDescriptor.vanilla_call), ("put", PayoffDescriptor.vanilla_put)):
        r = price(req(P1, None, (100,), make(0, 100), MonteCarlo(10**6, 1)))
        assert r.std_error >= 0
        assert abs(r.value - black_scholes(100, 100, 0.05, 0.2, 1.0, kind)) <= 3 * r.std_error


def test_monte_carlo_zero_vol_is_deterministic():
    p = MarketParams(0.05, (0.0, 0.0), 1.0)
    call = PayoffDescriptor.vanilla_call(0, 100)
    r = price_monte_carlo(req(p, CorrelationPoint.of(0.3), (100, 100), call), 5000, 0)
    assert r.value == pytest.approx(np.exp(-0.05) * (100 * np.exp(0.05) - 100), rel=1e-13)
    assert r.std_error == pytest.approx(0.0, abs=1e-12)


def test_rank_one_draws_are_identical():
    d = spectral_decompose(assemble_matrix(CorrelationPoint.of(1.0)))
    z = np.concatenate(sample_normals(correlation_root(d), 100_000, 2))
    assert abs(np.corrcoef(z.T)[0, 1] - 1.0) <= 1e-12


def test_monte_carlo_seed_and_worker_determinism():
    basket = PayoffDescriptor.basket_call((0.5, 0.5), 100)
    base = req(P2, CorrelationPoint.of(0.4), (100, 100), basket)
    a = price_monte_carlo(base, 200_000, 9)
    b = price_monte_carlo(base, 200_000, 9)
    c = price_monte_carlo(base, 200_000, 9, workers=4)
    d = price_monte_carlo(base, 200_000, 10)
    assert a.value == b.value == c.value
    assert a.std_error == c.std_error
    assert d.value != a.value


def test_monte_carlo_needs_enough_paths():
    with pytest.raises(ConfigError):
        price_monte_carlo(req(P1, None, (100,), PayoffDescriptor.vanilla_call(0, 100)), 999, 0)


def test_method_agreement_on_random_requests():
    rng = np.random.default_rng(31)
    for k in range(10):
        n = int(rng.integers(1, 4))
        params = MarketParams(0.03, tuple(rng.uniform(0.15, 0.4, n)), float(rng.uniform(0.5, 2)))
        corr = CorrelationPoint.from_matrix(random_correlation(rng, n)) if n > 1 else None
        spot = tuple(rng.uniform(80, 120, n))
        pay = PayoffDescriptor.basket_call(tuple(np.full(n, 1.0 / n)), float(rng.uniform(90, 110)))
        q = price(req(params, corr, spot, pay)).value
        mc = price(req(params, corr, spot, pay, MonteCarlo(10**5, 100 + k)))
        assert abs(q - mc.value) <= 3 * mc.std_error


# -- greeks ----------------------------------------------------------------------------


def test_delta_examples():
    p = MarketParams(0.05, (0.2,), 0.1)
    d = greeks_delta(req(p, None, (200,), PayoffDescriptor.vanilla_call(0, 100)))
    assert d[0] >= 0.999
    d = greeks_delta(req(P2, CorrelationPoint.of(0.3), (100, 90), ONE))
    np.testing.assert_allclose(d, 0.0, atol=1e-8)
    lin = PayoffDescriptor.custom(lambda S: S[..., 0])
    d = greeks_delta(req(P2, CorrelationPoint.of(0.3), (100, 90), lin))
    np.testing.assert_allclose(d, [1.0, 0.0], atol=1e-6)


def test_delta_matches_closed_form():
    d = greeks_delta(req(P1, None, (105,), PayoffDescriptor.vanilla_call(0, 100)))
    assert d[0] == pytest.approx(black_scholes_delta(105, 100, 0.05, 0.2, 1.0), abs=1e-5)
    assert 0.0 <= d[0] <= 1.0


@given(st.integers(0, 2**31))
def test_call_monotone_in_spot(seed):
    rng = np.random.default_rng(seed)
    corr = CorrelationPoint.of(float(rng.uniform(-0.9, 0.9)))
    S = rng.uniform(60, 140, 2)
    call = PayoffDescriptor.vanilla_call(0, float(rng.uniform(80, 120)))
    lo = price(req(P2, corr, S, call, Quadrature(24))).value
    hi = price(req(P2, corr, S * [1.01, 1.0], call, Quadrature(24))).value
    assert hi >= lo
