"""European payoff descriptors.

Besides evaluating the payoff, each descriptor lists *kink functions*: smooth
functions of the terminal prices whose zero sets contain every point where
the payoff fails to be smooth.  The quadrature engine splits its line
integrals at those zeros.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import ConfigError

KINDS = ("vanilla_call", "vanilla_put", "basket_call", "exchange", "max_call", "min_call", "custom")


@dataclass(frozen=True)
class PayoffDescriptor:
    kind: str
    asset: int = None
    strike: float = None
    weights: tuple = None
    asset_long: int = None
    asset_short: int = None
    units: float = 1.0
    func: object = None

    # constructors -----------------------------------------------------------

    @classmethod
    def vanilla_call(cls, asset, strike):
        return cls("vanilla_call", asset=int(asset), strike=float(strike))

    @classmethod
    def vanilla_put(cls, asset, strike):
        return cls("vanilla_put", asset=int(asset), strike=float(strike))

    @classmethod
    def basket_call(cls, weights, strike):
        return cls("basket_call", weights=tuple(float(w) for w in weights), strike=float(strike))

    @classmethod
    def exchange(cls, asset_long, asset_short, units=1.0):
        return cls("exchange", asset_long=int(asset_long), asset_short=int(asset_short),
                   units=float(units))

    @classmethod
    def max_call(cls, strike):
        return cls("max_call", strike=float(strike))

    @classmethod
    def min_call(cls, strike):
        return cls("min_call", strike=float(strike))

    @classmethod
    def custom(cls, func):
        """``func`` maps terminal prices of shape ``(..., N)`` to payoffs of shape ``(...)``."""
        return cls("custom", func=func)

    # -----------------------------------------------------------------------

    def validate(self, n):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown payoff kind {self.kind!r}")
        if self.strike is not None and not (np.isfinite(self.strike) and self.strike >= 0):
            raise ConfigError(f"strike must be a finite nonnegative number, got {self.strike}")
        if self.kind in ("vanilla_call", "vanilla_put"):
            self._check_asset(self.asset, n)
        elif self.kind == "basket_call":
            if self.weights is None or len(self.weights) != n:
                raise ConfigError(f"basket needs {n} weights")
            if not all(np.isfinite(w) for w in self.weights):
                raise ConfigError("basket weights must be finite")
        elif self.kind == "exchange":
            self._check_asset(self.asset_long, n)
            self._check_asset(self.asset_short, n)
            if self.asset_long == self.asset_short:
                raise ConfigError("exchange option needs two distinct assets")
            if not (np.isfinite(self.units) and self.units >= 0):
                raise ConfigError("exchange units must be nonnegative")
        elif self.kind == "custom" and not callable(self.func):
            raise ConfigError("custom payoff needs a callable")
        if self.kind in ("vanilla_call", "vanilla_put", "basket_call", "max_call", "min_call"):
            if self.strike is None:
                raise ConfigError(f"{self.kind} needs a strike")

    @staticmethod
    def _check_asset(i, n):
        if i is None or not 0 <= i < n:
            raise ConfigError(f"asset index {i} out of range for {n} assets")

    def __call__(self, S):
        S = np.asarray(S, dtype=float)
        k = self.kind
        if k == "vanilla_call":
            return np.maximum(S[..., self.asset] - self.strike, 0.0)
        if k == "vanilla_put":
            return np.maximum(self.strike - S[..., self.asset], 0.0)
        if k == "basket_call":
            return np.maximum(S @ np.array(self.weights) - self.strike, 0.0)
        if k == "exchange":
            return np.maximum(S[..., self.asset_long] - self.units * S[..., self.asset_short], 0.0)
        if k == "max_call":
            return np.maximum(S.max(axis=-1) - self.strike, 0.0)
        if k == "min_call":
            return np.maximum(S.min(axis=-1) - self.strike, 0.0)
        return np.asarray(self.func(S), dtype=float) * np.ones(S.shape[:-1])

    def kink_functions(self, n):
        """Smooth functions of ``S`` vanishing on the payoff's non-smooth set."""
        k = self.kind
        out = []
        if k in ("vanilla_call", "vanilla_put"):
            if self.strike > 0:
                i, lk = self.asset, np.log(self.strike)
                out.append(lambda S: np.log(S[..., i]) - lk)
        elif k == "basket_call":
            w, K = np.array(self.weights), self.strike
            out.append(lambda S: S @ w - K)
        elif k == "exchange" and self.units > 0:
            i, j, lb = self.asset_long, self.asset_short, np.log(self.units)
            out.append(lambda S: np.log(S[..., i]) - np.log(S[..., j]) - lb)
        elif k in ("max_call", "min_call"):
            if self.strike > 0:
                lk = np.log(self.strike)
                out.extend((lambda S, i=i: np.log(S[..., i]) - lk) for i in range(n))
            out.extend(
                (lambda S, i=i, j=j: np.log(S[..., i]) - np.log(S[..., j]))
                for i, j in combinations(range(n), 2)
            )
        return out

    def to_dict(self):
        if self.kind == "custom":
            raise ConfigError("custom payoffs cannot be serialised")
        d = {"kind": self.kind}
        for name in ("asset", "strike", "weights", "asset_long", "asset_short"):
            v = getattr(self, name)
            if v is not None:
                d[name] = list(v) if isinstance(v, tuple) else v
        if self.kind == "exchange":
            d["units"] = self.units
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind")
        if kind == "custom":
            raise ConfigError("custom payoffs are only available through the library API")
        if "weights" in d:
            d["weights"] = tuple(float(w) for w in d["weights"])
        return cls(kind, **d)
