"""Green functions of the diagonalised diffusion ``Psi_t = 1/2 sum lambda_k Psi_kk``.

The evolution operator is an ordered product of ``exp(lambda_k t / 2 d^2/dzeta_k^2)``.
The generators commute, so the product needs no ordering corrections and the
kernel factorises into one-dimensional heat kernels.

Inside the positive-definite region every factor is a Gaussian.  On the
Kummer surface the null directions contribute Dirac deltas; eliminating them
leaves a Gaussian over the ``N_A`` coordinates labelled A, with the B
coordinates pinned to ``Delta chi_B = -gamma Delta chi_A``.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import _debug
from .errors import DegenerateInputError, DomainError, NumericError, PricingUndefinedError
from .geometry import (
    Region,
    SpectralDecomposition,
    classify_spectrum,
    _as_values,
)
from .transform import alpha_vector

EPS_PIVOT = 1e-10


def _exponent_sign():
    return 1.0 if _debug.enabled("kernel-sign") else -1.0


# -- regular branch ----------------------------------------------------------


@dataclass(frozen=True)
class RegularKernel:
    decomp: SpectralDecomposition
    horizon_t: float

    @property
    def variances(self):
        return self.decomp.eigenvalues * self.horizon_t

    def log_value(self, zeta, zeta_prime):
        d = np.asarray(zeta, dtype=float) - np.asarray(zeta_prime, dtype=float)
        var = self.variances
        quad = np.sum(d * d / var, axis=-1)
        return -0.5 * np.sum(np.log(2 * np.pi * var)) + _exponent_sign() * 0.5 * quad

    def value(self, zeta, zeta_prime):
        """``prod_k (2 pi lambda_k t)^(-1/2) exp(-(zeta_k - zeta'_k)^2 / (2 lambda_k t))``."""
        return np.exp(self.log_value(zeta, zeta_prime))

    def chi_density(self, dchi):
        """Density of the chi-space displacement; ``|det U| = 1`` so no Jacobian."""
        return self.value(np.asarray(dchi) @ self.decomp.basis, 0.0)


def _check_spectrum(decomp, eps_rank):
    region = classify_spectrum(decomp.eigenvalues, decomp.determinant, eps_rank)
    if region.verdict is Region.INDEFINITE:
        raise PricingUndefinedError(region.determinant, region.min_eigenvalue)
    return region


def build_regular(decomp, t, eps_rank=None):
    if not t > 0:
        raise DomainError(f"horizon must be positive, got {t}")
    region = _check_spectrum(decomp, eps_rank)
    if region.verdict is Region.KUMMER_SURFACE:
        raise DegenerateInputError(
            f"{region.null_count} eigenvalue(s) within {region.tolerance_used:.3g} of zero; "
            "use build_degenerate"
        )
    return RegularKernel(decomp, float(t))


def evaluate_regular_S(kernel, S, tau, S_prime, params):
    """Transition density of the discounted price, in (S, tau) -> (S', T).

    ``exp(-r(T-tau)) / [sqrt((2 pi (T-tau))^N det rho) prod sigma_i prod S'_i]
    * exp(-alpha^T rho^{-1} alpha / (2 (T-tau)))``.  The horizon is taken from
    ``tau``; only the spectral data of ``kernel`` are used.
    """
    t = params.maturity - tau
    if not t > 0:
        raise DomainError("valuation time must be strictly before maturity")
    alpha = alpha_vector(S, S_prime, tau, params)
    lam = kernel.decomp.eigenvalues
    u = kernel.decomp.basis
    rho_inv = (u / lam) @ u.T
    quad = np.einsum("...i,ij,...j->...", alpha, rho_inv, alpha)
    n = len(lam)
    sigma = params.positive_sigma()
    log_pref = (
        -params.rate * t
        - 0.5 * (n * np.log(2 * np.pi * t) + np.sum(np.log(lam)))
        - np.sum(np.log(sigma))
        - np.sum(np.log(np.asarray(S_prime, dtype=float)), axis=-1)
    )
    return np.exp(log_pref + _exponent_sign() * quad / (2 * t))


# -- degenerate branch -------------------------------------------------------


@dataclass(frozen=True)
class DegenerateKernel:
    """Kummer-surface kernel after eliminating the null directions.

    ``eigen_a`` / ``eigen_b`` index eigenpairs (rows of ``U^-1``);
    ``coord_a`` / ``coord_b`` index chi coordinates (columns of ``U^-1``).
    ``column_permutation`` lists ``coord_a`` followed by ``coord_b``.
    """

    eigen_a: tuple
    eigen_b: tuple
    coord_a: tuple
    coord_b: tuple
    d_a: np.ndarray
    u_inv_aa: np.ndarray
    u_inv_ab: np.ndarray
    u_inv_ba: np.ndarray
    u_inv_bb: np.ndarray
    gamma: np.ndarray
    rho_inv_sigma: np.ndarray
    abs_det_u_inv_bb: float

    @property
    def n_a(self):
        return len(self.coord_a)

    @property
    def n_b(self):
        return len(self.coord_b)

    @property
    def column_permutation(self):
        return self.coord_a + self.coord_b

    @property
    def effective_covariance(self):
        """Covariance of ``Delta chi_A`` per unit time: inverse of ``rho_inv_sigma``."""
        return np.linalg.inv(self.rho_inv_sigma)

    def constrain(self, dchi_a):
        """``Delta chi_B = -gamma Delta chi_A`` along the last axis."""
        return -np.asarray(dchi_a, dtype=float) @ self.gamma.T

    def assemble(self, dchi_a):
        """Full chi displacement in the original coordinate order."""
        dchi_a = np.asarray(dchi_a, dtype=float)
        out = np.empty(dchi_a.shape[:-1] + (self.n_a + self.n_b,))
        out[..., list(self.coord_a)] = dchi_a
        out[..., list(self.coord_b)] = self.constrain(dchi_a)
        return out


def _choose_b_coordinates(u_inv, eigen_b, n):
    """Pick chi coordinates for the B block maximising ``|det U^-1_BB|``.

    Candidates are visited with the trailing coordinates first, so the
    natural labelling wins ties.
    """
    n_b = len(eigen_b)
    rows = u_inv[list(eigen_b)]
    best, best_det = None, -1.0
    for cols in sorted(combinations(range(n), n_b), key=lambda c: tuple(-i for i in reversed(c))):
        d = abs(np.linalg.det(rows[:, list(cols)]))
        if d > best_det * (1 + 1e-12):
            best, best_det = cols, d
    if best_det <= EPS_PIVOT:
        raise NumericError("U^-1_BB is singular for every choice of B coordinates")
    return tuple(best), best_det


def build_degenerate(decomp, eps_rank=None):
    region = _check_spectrum(decomp, eps_rank)
    if region.verdict is not Region.KUMMER_SURFACE:
        raise DomainError("build_degenerate needs a point on the Kummer surface")
    lam = decomp.eigenvalues
    eps = region.tolerance_used
    n = len(lam)
    eigen_a = tuple(int(k) for k in np.flatnonzero(lam > eps))
    eigen_b = tuple(int(k) for k in np.flatnonzero(np.abs(lam) <= eps))
    if not eigen_a:
        raise NumericError("no positive eigenvalue; trace of a correlation matrix is N > 0")

    u_inv = np.asarray(decomp.basis).T
    coord_b, det_bb = _choose_b_coordinates(u_inv, eigen_b, n)
    coord_a = tuple(i for i in range(n) if i not in coord_b)
    ea, eb, ca, cb = list(eigen_a), list(eigen_b), list(coord_a), list(coord_b)
    u_aa, u_ab = u_inv[np.ix_(ea, ca)], u_inv[np.ix_(ea, cb)]
    u_ba, u_bb = u_inv[np.ix_(eb, ca)], u_inv[np.ix_(eb, cb)]

    # exact solve of 0 = U^-1_BA dchi_A + U^-1_BB dchi_B
    gamma = np.linalg.solve(u_bb, u_ba)
    if _debug.enabled("gamma-sign"):
        gamma = -gamma
    d_a = lam[ea].copy()
    m = u_aa - u_ab @ gamma
    rho_inv_sigma = (m.T / d_a) @ m
    rho_inv_sigma = 0.5 * (rho_inv_sigma + rho_inv_sigma.T)
    return DegenerateKernel(
        eigen_a, eigen_b, coord_a, coord_b, d_a, u_aa, u_ab, u_ba, u_bb,
        gamma, rho_inv_sigma, float(det_bb),
    )


def evaluate_degenerate_density(kernel, dchi_A, t):
    """``(2 pi t)^(-N_A/2) det(D_A)^(-1/2) |det U^-1_BB|^-1 exp(-q / (2t))``.

    ``q = dchi_A^T rho_inv_sigma dchi_A``; broadcasts over leading axes.
    """
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    d = np.asarray(dchi_A, dtype=float)
    quad = np.einsum("...i,ij,...j->...", d, kernel.rho_inv_sigma, d)
    log_pref = (
        -0.5 * kernel.n_a * np.log(2 * np.pi * t)
        - 0.5 * np.sum(np.log(kernel.d_a))
        - np.log(kernel.abs_det_u_inv_bb)
    )
    return np.exp(log_pref + _exponent_sign() * quad / (2 * t))


def constrained_SB(S_A, S_A_prime, S_B, tau, params, kernel):
    """Terminal prices of the B assets implied by the delta constraint.

    ``S'_B^i = S_B^i prod_j (S_A^j / S'_A^j)^(sigma_i gamma_ij / sigma_j)
    * exp([(r - sigma_i^2/2) + sum_j (sigma_i/sigma_j) gamma_ij (r - sigma_j^2/2)] (T - tau))``.
    Broadcasts over leading axes of ``S_A_prime``.
    """
    if tau > params.maturity:
        raise DomainError(f"valuation time {tau} is after maturity {params.maturity}")
    S_A = np.asarray(S_A, dtype=float)
    S_A_prime = np.asarray(S_A_prime, dtype=float)
    S_B = np.asarray(S_B, dtype=float)
    if np.any(S_A <= 0) or np.any(S_A_prime <= 0) or np.any(S_B <= 0):
        raise DomainError("prices must be strictly positive")
    sigma = params.positive_sigma()
    drift = params.log_drift
    sa, sb = sigma[list(kernel.coord_a)], sigma[list(kernel.coord_b)]
    da, db = drift[list(kernel.coord_a)], drift[list(kernel.coord_b)]
    expo = kernel.gamma * sb[:, None] / sa[None, :]
    t = params.maturity - tau
    log_ratio = np.log(S_A / S_A_prime)
    return S_B * np.exp(log_ratio @ expo.T + (db + expo @ da) * t)


# -- PDE residual --------------------------------------------------------------


def pde_residual(price_fn, sample, params, rho, h=1e-3):
    """Central-difference residual of the multi-asset Black-Scholes operator.

    ``Pi_tau + 1/2 sum_ij sigma_i sigma_j S_i S_j rho_ij Pi_ij + r (sum_j S_j Pi_j - Pi)``
    at one (S, tau) sample.  ``price_fn(S, tau)`` returns a float.  Price
    bumps are relative (``h * S_i``), the time bump is ``h`` years.
    """
    S = np.asarray(sample.coords, dtype=float).ravel()
    tau = sample.time
    n = len(S)
    rho = _as_values(rho)
    sigma = params.sigma
    hs = h * S

    def f(dS=None, dtau=0.0):
        x = S.copy() if dS is None else S + dS
        return float(price_fn(x, tau + dtau))

    p0 = f()
    p_tau = (f(dtau=h) - f(dtau=-h)) / (2 * h)
    grad = np.empty(n)
    hess = np.empty((n, n))
    e = np.eye(n)
    for i in range(n):
        up, dn = f(hs[i] * e[i]), f(-hs[i] * e[i])
        grad[i] = (up - dn) / (2 * hs[i])
        hess[i, i] = (up - 2 * p0 + dn) / hs[i] ** 2
    for i, j in combinations(range(n), 2):
        bi, bj = hs[i] * e[i], hs[j] * e[j]
        v = (f(bi + bj) - f(bi - bj) - f(-bi + bj) + f(-bi - bj)) / (4 * hs[i] * hs[j])
        hess[i, j] = hess[j, i] = v
    a = np.outer(sigma * S, sigma * S) * rho
    return p_tau + 0.5 * np.sum(a * hess) + params.rate * (S @ grad - p0)
