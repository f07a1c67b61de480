"""Brute-force checks that share no code path with the analytic kernels.

* :func:`fd_solve` - theta-scheme finite differences for N = 1, 2 on the
  constant-coefficient equation in drift-removed log prices, cross
  derivatives included (no diagonalisation).
* :func:`covariance_probe` - sample covariance of correlated draws.
* :func:`semigroup_probe` - Chapman-Kolmogorov composition by quadrature.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import splu

from .errors import DomainError, PricingUndefinedError
from .geometry import Region, _as_values, classify_spectrum, spectral_decompose
from .pricing import correlation_root, sample_normals
from .propagator import build_regular


@dataclass(frozen=True)
class FDGrid:
    """Tensor grid in ``x = ln S - (r - sigma^2/2) tau`` at tau = 0.

    ``lower``/``upper`` are per-dimension log bounds.
    """

    dims: int
    lower: tuple
    upper: tuple
    nodes: int
    steps: int
    theta: float = 0.5
    rannacher_steps: int = 2
    smoothing: int = 16

    def __post_init__(self):
        if self.dims not in (1, 2):
            raise DomainError("finite differences support 1 or 2 dimensions")
        if len(self.lower) != self.dims or len(self.upper) != self.dims:
            raise DomainError("bounds must match dims")
        if self.nodes < 32:
            raise DomainError("need at least 32 nodes per dimension")
        if not 0.0 <= self.theta <= 1.0:
            raise DomainError("theta must lie in [0, 1]")
        if self.steps < 1:
            raise DomainError("need at least one time step")
        if self.smoothing < 1:
            raise DomainError("smoothing needs at least one sample per cell")

    @classmethod
    def around(cls, spot, params, nodes, steps, width=6.0, theta=0.5):
        """Grid covering ``+/- width sigma sqrt(T)`` with the spot on a node."""
        x0 = np.log(np.asarray(spot, dtype=float))
        half = width * params.positive_sigma() * np.sqrt(params.maturity)
        h = 2 * half / (nodes - 1)
        lower = x0 - (nodes // 2) * h
        upper = lower + (nodes - 1) * h
        return cls(len(x0), tuple(lower), tuple(upper), nodes, steps, theta)

    def axes(self):
        return [np.linspace(lo, hi, self.nodes) for lo, hi in zip(self.lower, self.upper)]


@dataclass(frozen=True)
class PriceSurface:
    """Option values at tau = 0 on the grid; ``spot_axes`` are ``exp`` of the x axes."""

    x_axes: list
    values: np.ndarray

    @property
    def spot_axes(self):
        return [np.exp(a) for a in self.x_axes]

    def at(self, spot):
        x = np.log(np.atleast_1d(np.asarray(spot, dtype=float)))
        for ax, xi in zip(self.x_axes, x):
            j = np.flatnonzero(np.isclose(ax, xi, rtol=0, atol=1e-12 * max(1.0, abs(xi))))
            if len(j) != 1:
                break
        else:
            idx = tuple(
                int(np.argmin(np.abs(ax - xi))) for ax, xi in zip(self.x_axes, x)
            )
            return float(self.values[idx])
        interp = RegularGridInterpolator(self.x_axes, self.values, method="cubic")
        return float(interp(x[None, :])[0])


def _second_diff(n, h):
    return sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) / h**2


def _first_diff(n, h):
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1]) / (2 * h)


def _operator(grid, a):
    axes = grid.axes()
    n = grid.nodes
    hs = [ax[1] - ax[0] for ax in axes]
    eye = sp.identity(n, format="csr")
    if grid.dims == 1:
        return 0.5 * a[0, 0] * _second_diff(n, hs[0])
    d2x, d2y = _second_diff(n, hs[0]), _second_diff(n, hs[1])
    d1x, d1y = _first_diff(n, hs[0]), _first_diff(n, hs[1])
    return (
        0.5 * a[0, 0] * sp.kron(d2x, eye)
        + 0.5 * a[1, 1] * sp.kron(eye, d2y)
        + a[0, 1] * sp.kron(d1x, d1y)
    )


def fd_solve(payoff, params, rho, grid):
    """Solve ``Psi_t = 1/2 sum a_ij Psi_{x_i x_j}`` from t = 0 to T and discount.

    ``a_ij = sigma_i sigma_j rho_ij``.  Boundary nodes are held at the
    payoff of the forward, ``Phi(S e^{r (T - tau)})``.  The first
    ``rannacher_steps`` steps are fully implicit to damp the payoff kink.
    The initial data are cell averages of the payoff (``grid.smoothing``
    midpoint samples per cell and dimension), which keeps the error
    second order wherever the kink falls relative to the nodes.
    """
    rho = _as_values(rho)
    if rho.shape != (grid.dims, grid.dims):
        raise DomainError("correlation matrix does not match the grid dimension")
    decomp = spectral_decompose(rho)
    region = classify_spectrum(decomp.eigenvalues, np.linalg.det(rho))
    if region.verdict is not Region.INTERIOR:
        raise DomainError(
            f"finite differences need a positive-definite correlation matrix "
            f"(region {region.verdict.value})"
        )
    sigma = params.positive_sigma()
    T, r = params.maturity, params.rate
    a = np.outer(sigma, sigma) * rho

    axes = grid.axes()
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, grid.dims)

    def forward_payoff(t, x=mesh):
        # at calendar time tau = T - t the forward is exp(x + r T - sigma^2 tau / 2)
        return payoff(np.exp(x + r * T - 0.5 * sigma**2 * (T - t)))

    def cell_average():
        hs = np.array([ax[1] - ax[0] for ax in axes])
        s = grid.smoothing
        u = (np.arange(s) + 0.5) / s - 0.5
        offsets = np.stack(np.meshgrid(*([u] * grid.dims), indexing="ij"), -1).reshape(-1, grid.dims)
        acc = np.zeros(mesh.shape[0])
        for off in offsets:
            acc += forward_payoff(0.0, mesh + off * hs)
        return acc / len(offsets)

    shape = (grid.nodes,) * grid.dims
    boundary = np.zeros(shape, dtype=bool)
    for k in range(grid.dims):
        sl = [slice(None)] * grid.dims
        sl[k] = 0
        boundary[tuple(sl)] = True
        sl[k] = -1
        boundary[tuple(sl)] = True
    boundary = boundary.ravel()
    interior = sp.diags((~boundary).astype(float))
    op = interior @ _operator(grid, a).tocsr()
    size = mesh.shape[0]
    eye = sp.identity(size, format="csc")
    dt = T / grid.steps

    def factor(theta):
        lhs = (eye - theta * dt * op).tocsc()
        rhs = (eye + (1 - theta) * dt * op).tocsr()
        return splu(lhs), rhs

    schemes = {}
    psi = cell_average() if grid.smoothing > 1 else forward_payoff(0.0)
    for step in range(grid.steps):
        theta = 1.0 if step < grid.rannacher_steps else grid.theta
        if theta not in schemes:
            schemes[theta] = factor(theta)
        lu, rhs = schemes[theta]
        b = rhs @ psi
        b[boundary] = forward_payoff((step + 1) * dt)[boundary]
        psi = lu.solve(b)
    values = np.exp(-r * T) * psi.reshape(shape)
    return PriceSurface(axes, values)


def covariance_probe(rho, paths, seed):
    """Sample covariance of normalised log-returns ``Z = L G``."""
    rho = _as_values(rho)
    decomp = spectral_decompose(rho)
    region = classify_spectrum(decomp.eigenvalues, np.linalg.det(rho))
    if region.verdict is Region.INDEFINITE:
        raise PricingUndefinedError(region.determinant, region.min_eigenvalue)
    z = np.concatenate(sample_normals(correlation_root(decomp), paths, seed))
    return np.cov(z, rowvar=False)


def semigroup_probe(decomp, t1, t2, sample_pairs, order=64):
    """Max ``|int K(zeta, t1 | y) K(y, t2 | zeta') dy - K(zeta, t1 + t2 | zeta')|``.

    The nodes follow the narrower of the two factors, so the remaining factor
    is smooth on their scale and the limit of one vanishing horizon is
    resolved; ``sample_pairs`` is a sequence of (zeta, zeta') pairs.
    """
    if not (t1 > 0 and t2 > 0):
        raise DomainError("both horizons must be positive")
    k1, k2 = build_regular(decomp, t1), build_regular(decomp, t2)
    k12 = build_regular(decomp, t1 + t2)
    lam = decomp.eigenvalues
    n = len(lam)
    x, w = np.polynomial.hermite_e.hermegauss(order)
    w = w / w.sum()
    nodes = np.stack(np.meshgrid(*([x] * n), indexing="ij"), axis=-1).reshape(-1, n)
    weights = np.prod(np.stack(np.meshgrid(*([w] * n), indexing="ij"), axis=-1).reshape(-1, n), axis=1)

    worst = 0.0
    for zeta, zeta_p in sample_pairs:
        zeta, zeta_p = np.asarray(zeta, float), np.asarray(zeta_p, float)
        direct = float(k12.value(zeta, zeta_p))
        if t1 <= t2:
            # y ~ N(zeta, lambda t1), integrate K(y, t2 | zeta')
            y = zeta + np.sqrt(lam * t1) * nodes
            composed = float(weights @ k2.value(y, zeta_p))
        else:
            y = zeta_p + np.sqrt(lam * t2) * nodes
            composed = float(weights @ k1.value(zeta, y))
        worst = max(worst, abs(composed - direct))
    return worst
