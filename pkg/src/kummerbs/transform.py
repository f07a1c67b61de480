"""Change of variables between option-price space (S, tau) and diffusion space (zeta, t).

The chain is

    S  --log-->  x = ln S - (r - sigma^2/2) tau
    x  --vol-->  chi = x / sigma
    tau --fwd--> t = T - tau
    chi --rot--> zeta = U^T chi

together with the discount wrap ``Pi = exp(-r (T - tau)) Psi``.  Under it the
multi-asset Black-Scholes equation becomes ``Psi_t = 1/2 sum_k lambda_k
Psi_{zeta_k zeta_k}``.  Coordinates carry a space tag and a clock tag so
that feeding log-coordinates into a price-space map fails loudly.

Time is in years; rates and volatilities are annualised.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class MarketParams:
    """Flat rate, per-asset volatilities and maturity.

    Real-world drifts of the assets never enter a price (the risk-neutral
    drift is ``rate``) and are therefore not stored.  Zero volatilities are
    accepted so the Monte Carlo engine can run deterministic paths; every map
    that divides by a volatility rejects them.
    """

    rate: float
    vols: tuple
    maturity: float

    def __post_init__(self):
        vols = tuple(float(v) for v in np.atleast_1d(self.vols))
        object.__setattr__(self, "vols", vols)
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "maturity", float(self.maturity))
        if not vols:
            raise DomainError("need at least one volatility")
        if any(not np.isfinite(v) or v < 0 for v in vols):
            raise DomainError(f"volatilities must be finite and nonnegative: {vols}")
        if not np.isfinite(self.maturity) or self.maturity < 0:
            raise DomainError(f"maturity must be >= 0, got {self.maturity}")
        if not np.isfinite(self.rate):
            raise DomainError("rate must be finite")

    @property
    def n_assets(self):
        return len(self.vols)

    @property
    def sigma(self):
        return np.array(self.vols)

    @property
    def log_drift(self):
        """Risk-neutral drift of log prices, ``r - sigma^2 / 2``."""
        return self.rate - 0.5 * self.sigma**2

    def positive_sigma(self):
        s = self.sigma
        if np.any(s <= 0):
            raise DomainError("this operation needs strictly positive volatilities")
        return s


class Space(Enum):
    S = "S"
    X = "x"
    CHI = "chi"
    ZETA = "zeta"


class Clock(Enum):
    TAU = "tau"
    T = "t"


@dataclass(frozen=True)
class StateVector:
    """Coordinates of one point, or a stack of points along leading axes."""

    coords: np.ndarray
    space: Space
    time: float
    clock: Clock = Clock.TAU

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim == 0:
            c = c[None]
        object.__setattr__(self, "coords", c)
        object.__setattr__(self, "time", float(self.time))
        if self.space is Space.S and np.any(c <= 0):
            raise DomainError("prices must be strictly positive")

    @property
    def n(self):
        return self.coords.shape[-1]


def prices(S, tau):
    return StateVector(S, Space.S, tau, Clock.TAU)


def _expect(state, space, clock=None):
    if state.space is not space:
        raise DomainError(f"expected {space.value}-space coordinates, got {state.space.value}")
    if clock is not None and state.clock is not clock:
        raise DomainError(f"expected {clock.value} clock, got {state.clock.value}")


def _tau_of(state, params):
    return state.time if state.clock is Clock.TAU else params.maturity - state.time


def _check_dim(state, params):
    if state.n != params.n_assets:
        raise DomainError(f"state has {state.n} coordinates, params describe {params.n_assets}")


def to_log(state, params):
    _expect(state, Space.S, Clock.TAU)
    _check_dim(state, params)
    x = np.log(state.coords) - params.log_drift * state.time
    return StateVector(x, Space.X, state.time, Clock.TAU)


def from_log(state, params):
    _expect(state, Space.X, Clock.TAU)
    _check_dim(state, params)
    S = np.exp(state.coords + params.log_drift * state.time)
    return StateVector(S, Space.S, state.time, Clock.TAU)


def _check_tau(tau, params):
    if tau > params.maturity:
        raise DomainError(f"valuation time {tau} is after maturity {params.maturity}")


def discount_wrap(psi, tau, params):
    """``Pi = exp(-r (T - tau)) Psi``."""
    _check_tau(tau, params)
    return np.exp(-params.rate * (params.maturity - tau)) * psi


def discount_unwrap(pi_value, tau, params):
    _check_tau(tau, params)
    return np.exp(params.rate * (params.maturity - tau)) * pi_value


def scale_by_vol(state, params):
    _expect(state, Space.X)
    _check_dim(state, params)
    return StateVector(state.coords / params.positive_sigma(), Space.CHI, state.time, state.clock)


def unscale_by_vol(state, params):
    _expect(state, Space.CHI)
    _check_dim(state, params)
    return StateVector(state.coords * params.positive_sigma(), Space.X, state.time, state.clock)


def forward_time(tau, params):
    if not 0.0 <= tau <= params.maturity:
        raise DomainError(f"tau = {tau} is outside [0, {params.maturity}]")
    return params.maturity - tau


def backward_time(t, params):
    if not 0.0 <= t <= params.maturity:
        raise DomainError(f"t = {t} is outside [0, {params.maturity}]")
    return params.maturity - t


def to_forward_clock(state, params):
    if state.clock is Clock.T:
        return state
    return StateVector(state.coords, state.space, forward_time(state.time, params), Clock.T)


def to_calendar_clock(state, params):
    if state.clock is Clock.TAU:
        return state
    return StateVector(state.coords, state.space, backward_time(state.time, params), Clock.TAU)


def to_diagonal(state, decomp):
    """``zeta = U^{-1} chi = U^T chi``."""
    _expect(state, Space.CHI)
    if state.n != decomp.n:
        raise DomainError(f"state has {state.n} coordinates, decomposition has {decomp.n}")
    return StateVector(state.coords @ decomp.basis, Space.ZETA, state.time, state.clock)


def from_diagonal(state, decomp):
    _expect(state, Space.ZETA)
    if state.n != decomp.n:
        raise DomainError(f"state has {state.n} coordinates, decomposition has {decomp.n}")
    return StateVector(state.coords @ decomp.basis.T, Space.CHI, state.time, state.clock)


def to_diffusion(state, params, decomp):
    """(S, tau) -> (zeta, t) through the whole chain."""
    chi = scale_by_vol(to_log(state, params), params)
    return to_diagonal(to_forward_clock(chi, params), decomp)


def from_diffusion(state, params, decomp):
    """(zeta, t) -> (S, tau)."""
    chi = to_calendar_clock(from_diagonal(state, decomp), params)
    return from_log(unscale_by_vol(chi, params), params)


def alpha_vector(S, S_prime, tau, params):
    """``alpha_i = [ln(S_i / S'_i) + (r - sigma_i^2/2)(T - tau)] / sigma_i``.

    Equals ``chi_i(S, tau) - chi_i(S', T)``: the chi-space displacement
    between the valuation point and a terminal point.  Broadcasts over
    leading axes of ``S_prime``.
    """
    _check_tau(tau, params)
    S = np.asarray(S, dtype=float)
    S_prime = np.asarray(S_prime, dtype=float)
    if np.any(S <= 0) or np.any(S_prime <= 0):
        raise DomainError("prices must be strictly positive")
    sigma = params.positive_sigma()
    return (np.log(S / S_prime) + params.log_drift * (params.maturity - tau)) / sigma


def terminal_prices(S, alpha, tau, params):
    """Inverse of :func:`alpha_vector` in its second argument."""
    sigma = params.sigma
    t = params.maturity - tau
    return np.asarray(S, dtype=float) * np.exp(params.log_drift * t - sigma * alpha)
