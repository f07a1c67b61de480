"""Classical closed forms used as validation references."""

import numpy as np
from scipy.stats import norm


def black_scholes(S, K, r, sigma, t, kind="call"):
    """European call or put on one asset with time to expiry ``t``."""
    if kind not in ("call", "put"):
        raise ValueError(f"kind must be 'call' or 'put', got {kind!r}")
    df = np.exp(-r * t)
    if t <= 0 or sigma <= 0 or K <= 0:
        fwd = S * np.exp(r * t)
        intrinsic = max(fwd - K, 0.0) if kind == "call" else max(K - fwd, 0.0)
        return float(df * intrinsic)
    vol = sigma * np.sqrt(t)
    d1 = (np.log(S / K) + (r + 0.5 * sigma**2) * t) / vol
    d2 = d1 - vol
    if kind == "call":
        return float(S * norm.cdf(d1) - K * df * norm.cdf(d2))
    return float(K * df * norm.cdf(-d2) - S * norm.cdf(-d1))


def black_scholes_delta(S, K, r, sigma, t, kind="call"):
    if t <= 0 or sigma <= 0:
        itm = S * np.exp(r * t) > K
        return float(itm) if kind == "call" else float(itm) - 1.0
    d1 = (np.log(S / K) + (r + 0.5 * sigma**2) * t) / (sigma * np.sqrt(t))
    return float(norm.cdf(d1)) if kind == "call" else float(norm.cdf(d1) - 1.0)


def margrabe(S1, S2, sigma1, sigma2, rho, t, units=1.0):
    """Option to exchange ``units`` of asset 2 for one unit of asset 1.

    Rate-free: asset 2 serves as numeraire.  A vanishing effective volatility
    leaves the deterministic payoff ``max(S1 - b S2, 0)``.
    """
    var = sigma1**2 - 2.0 * rho * sigma1 * sigma2 + sigma2**2
    vol = np.sqrt(max(var, 0.0) * t)
    if vol <= 1e-300:
        return float(max(S1 - units * S2, 0.0))
    d1 = (np.log(S1 / (units * S2)) + 0.5 * vol**2) / vol
    d2 = d1 - vol
    return float(S1 * norm.cdf(d1) - units * S2 * norm.cdf(d2))
