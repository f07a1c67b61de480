import numpy as np
import pytest

from conftest import random_correlation
from kummerbs.closed_form import black_scholes, margrabe
from kummerbs.errors import DomainError, PricingUndefinedError
from kummerbs.geometry import CorrelationPoint, assemble_matrix, kummer_sheet_z, spectral_decompose
from kummerbs.oracle import FDGrid, covariance_probe, fd_solve, semigroup_probe
from kummerbs.payoffs import PayoffDescriptor
from kummerbs.pricing import correlation_root, sample_normals
from kummerbs.transform import MarketParams

P1 = MarketParams(0.05, (0.2,), 1.0)
P2 = MarketParams(0.05, (0.2, 0.3), 1.0)
CALL = PayoffDescriptor.vanilla_call(0, 100.0)


def _matrix(*entries):
    return assemble_matrix(CorrelationPoint.of(*entries)).values


# -- grid ---------------------------------------------------------------------------


@pytest.mark.parametrize("kwargs", [
    dict(dims=3, lower=(0.0,) * 3, upper=(1.0,) * 3),
    dict(dims=1, lower=(0.0, 0.0), upper=(1.0,)),
    dict(dims=1, lower=(0.0,), upper=(1.0,), nodes=16),
    dict(dims=1, lower=(0.0,), upper=(1.0,), theta=1.5),
    dict(dims=1, lower=(0.0,), upper=(1.0,), steps=0),
    dict(dims=1, lower=(0.0,), upper=(1.0,), smoothing=0),
])
def test_grid_rejects_bad_settings(kwargs):
    base = dict(nodes=64, steps=10)
    base.update(kwargs)
    with pytest.raises(DomainError):
        FDGrid(**base)


def test_grid_places_spot_on_node():
    g = FDGrid.around([100.0, 80.0], P2, 65, 10)
    for ax, s in zip(g.axes(), (100.0, 80.0)):
        assert np.min(np.abs(ax - np.log(s))) <= 1e-12
        assert len(ax) == 65


# -- finite differences -------------------------------------------------------------


def test_fd_vanilla_matches_black_scholes():
    ref = black_scholes(100.0, 100.0, 0.05, 0.2, 1.0)
    surf = fd_solve(CALL, P1, np.ones((1, 1)), FDGrid.around([100.0], P1, 512, 512))
    assert abs(surf.at([100.0]) - ref) / ref <= 1e-3


def test_fd_off_node_interpolation():
    ref = black_scholes(103.7, 100.0, 0.05, 0.2, 1.0)
    surf = fd_solve(CALL, P1, np.ones((1, 1)), FDGrid.around([100.0], P1, 512, 512))
    assert abs(surf.at([103.7]) - ref) / ref <= 1e-3


def test_fd_second_order():
    ref = black_scholes(100.0, 100.0, 0.05, 0.2, 1.0)
    err = {}
    for n in (128, 256):
        surf = fd_solve(CALL, P1, np.ones((1, 1)), FDGrid.around([100.0], P1, n, n))
        err[n] = abs(surf.at([100.0]) - ref)
    assert 3.5 <= err[128] / err[256] <= 4.5


def test_fd_unit_payoff_is_discount():
    one = PayoffDescriptor.custom(lambda S: 1.0)
    surf = fd_solve(one, P2, _matrix(0.4), FDGrid.around([100.0, 100.0], P2, 48, 20))
    np.testing.assert_allclose(surf.values, np.exp(-0.05), rtol=0, atol=1e-6)


def test_fd_exchange_matches_margrabe():
    ex = PayoffDescriptor.exchange(0, 1)
    ref = margrabe(100.0, 95.0, 0.2, 0.3, 0.5, 1.0)
    surf = fd_solve(ex, P2, _matrix(0.5), FDGrid.around([100.0, 95.0], P2, 128, 128))
    assert abs(surf.at([100.0, 95.0]) - ref) / ref <= 5e-3


def test_fd_rejects_singular_and_mismatched():
    g = FDGrid.around([100.0, 100.0], P2, 32, 4)
    with pytest.raises(DomainError):
        fd_solve(CALL, P2, _matrix(1.0), g)
    with pytest.raises(DomainError):
        fd_solve(CALL, P2, np.eye(3), g)


# -- covariance ---------------------------------------------------------------------


def test_covariance_identity():
    c = covariance_probe(np.eye(3), 10**6, 0)
    off = c[~np.eye(3, dtype=bool)]
    assert np.max(np.abs(off)) <= 5e-3
    np.testing.assert_allclose(np.diag(c), 1.0, atol=5e-3)


def test_covariance_random_interior(rng):
    rho = random_correlation(rng, 4)
    c = covariance_probe(rho, 10**6, 1)
    assert np.max(np.abs(c - rho)) <= 5e-3


def test_covariance_vertex_has_rank_one():
    c = covariance_probe(_matrix(1.0, 1.0, 1.0), 10**5, 2)
    assert np.linalg.matrix_rank(c, tol=1e-8) == 1


def test_covariance_on_sheet_is_singular():
    z = float(kummer_sheet_z(0.5, 0.5, "plus"))
    c = covariance_probe(_matrix(0.5, 0.5, z), 10**6, 3)
    assert abs(np.linalg.det(c)) <= 5e-3


def test_draws_avoid_null_direction():
    z = float(kummer_sheet_z(0.3, -0.6, "minus"))
    rho = _matrix(0.3, -0.6, z)
    d = spectral_decompose(rho)
    w, vecs = np.linalg.eigh(rho)
    v = vecs[:, np.argmin(np.abs(w))]
    draws = np.concatenate(sample_normals(correlation_root(d), 10**4, 4))
    assert np.max(np.abs(draws @ v)) <= 1e-10


def test_covariance_rejects_indefinite():
    with pytest.raises(PricingUndefinedError):
        covariance_probe(_matrix(0.9, 0.9, -0.9), 1000, 0)


# -- semigroup ----------------------------------------------------------------------


def _pairs(rng, n, k=5):
    return [(rng.normal(size=n), rng.normal(size=n)) for _ in range(k)]


def test_semigroup_one_dimension(rng):
    d = spectral_decompose(np.ones((1, 1)))
    assert semigroup_probe(d, 0.3, 0.7, _pairs(rng, 1)) <= 1e-6


def test_semigroup_two_dimensions(rng):
    d = spectral_decompose(_matrix(0.6))
    assert semigroup_probe(d, 0.4, 0.6, _pairs(rng, 2)) <= 1e-5


def test_semigroup_small_first_horizon(rng):
    d = spectral_decompose(_matrix(-0.3))
    assert semigroup_probe(d, 1e-4, 1.0, _pairs(rng, 2)) <= 1e-5
    assert semigroup_probe(d, 1.0, 1e-4, _pairs(rng, 2)) <= 1e-5


def test_semigroup_rejects_zero_horizon():
    d = spectral_decompose(_matrix(0.2))
    with pytest.raises(DomainError):
        semigroup_probe(d, 0.0, 1.0, [])
