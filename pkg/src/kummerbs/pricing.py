"""European pricing against the regular or degenerate propagator, and by Monte Carlo.

Quadrature works in standardised Gaussian coordinates ``z`` of the kernel
(``zeta`` scaled by ``sqrt(lambda t)`` inside the positive-definite region,
the A-block coordinates on the Kummer surface).  The weight at every node is
the propagator itself, so normalisation errors in a kernel show up in prices.

Payoff kinks ruin plain Gauss-Hermite convergence, so the rule is a
product: one axis of ``z`` is rotated onto the gradient of the payoff's
primary kink and integrated along lines with Gauss-Legendre panels split at
the kink roots; the remaining axes use a Gauss-Hermite tensor grid.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .errors import ConfigError, DomainError, PricingUndefinedError
from .geometry import (
    CorrelationPoint,
    Region,
    assemble_matrix,
    classify_spectrum,
    spectral_decompose,
)
from .payoffs import PayoffDescriptor
from .propagator import (
    DegenerateKernel,
    RegularKernel,
    build_degenerate,
    build_regular,
    constrained_SB,
    evaluate_degenerate_density,
)
from .transform import MarketParams, discount_wrap, terminal_prices

MAX_QUADRATURE_DIM = 4
MC_CHUNK = 1 << 16


@dataclass(frozen=True)
class Quadrature:
    order: int = 64


@dataclass(frozen=True)
class MonteCarlo:
    paths: int = 100_000
    seed: int = 0
    workers: int = 1


@dataclass(frozen=True)
class PricingRequest:
    params: MarketParams
    correlation: Optional[CorrelationPoint]
    spot: tuple
    valuation_time: float
    payoff: PayoffDescriptor
    method: Union[Quadrature, MonteCarlo] = field(default_factory=Quadrature)
    eps_rank: Optional[float] = None

    def __post_init__(self):
        spot = tuple(float(s) for s in np.atleast_1d(self.spot))
        object.__setattr__(self, "spot", spot)
        object.__setattr__(self, "valuation_time", float(self.valuation_time))
        n = self.params.n_assets
        if len(spot) != n:
            raise ConfigError(f"{len(spot)} spots for {n} assets")
        if any(not np.isfinite(s) or s <= 0 for s in spot):
            raise ConfigError("spot prices must be strictly positive")
        if not 0.0 <= self.valuation_time <= self.params.maturity:
            raise ConfigError(
                f"valuation time {self.valuation_time} outside [0, {self.params.maturity}]"
            )
        if n == 1:
            if self.correlation is not None:
                raise ConfigError("a single asset takes no correlations")
        elif self.correlation is None or self.correlation.n_assets != n:
            raise ConfigError(f"need a correlation point for {n} assets")
        self.payoff.validate(n)

    @property
    def n_assets(self):
        return self.params.n_assets

    @property
    def rho(self):
        if self.correlation is None:
            return np.ones((1, 1))
        return assemble_matrix(self.correlation).values

    @property
    def horizon(self):
        return self.params.maturity - self.valuation_time

    def with_spot(self, spot):
        return replace(self, spot=tuple(spot))


@dataclass(frozen=True)
class PriceResult:
    value: float
    std_error: Optional[float]
    method_used: str
    region: object
    diagnostics: dict = field(default_factory=dict)


def analyse(request):
    """Spectral decomposition and region of the request's correlation matrix."""
    decomp = spectral_decompose(request.rho)
    region = classify_spectrum(decomp.eigenvalues, np.linalg.det(request.rho), request.eps_rank)
    return decomp, region


def _reject_indefinite(region):
    if region.verdict is Region.INDEFINITE:
        raise PricingUndefinedError(region.determinant, region.min_eigenvalue)


def build_kernel(request):
    decomp, region = analyse(request)
    _reject_indefinite(region)
    t = request.horizon
    if region.verdict is Region.KUMMER_SURFACE:
        return build_degenerate(decomp, region.tolerance_used), region
    if t <= 0:
        return None, region
    return build_regular(decomp, t, region.tolerance_used), region


def price(request):
    """Price a request, routing by the region of its correlation point.

    Indefinite points raise :class:`PricingUndefinedError`; no value is ever
    produced for them.
    """
    method = request.method
    if isinstance(method, Quadrature):
        if method.order < 3:
            raise ConfigError(f"quadrature order must be at least 3, got {method.order}")
        kernel, region = build_kernel(request)
        return price_quadrature(request, kernel, region)
    if isinstance(method, MonteCarlo):
        return price_monte_carlo(request, method.paths, method.seed, method.workers)
    raise ConfigError(f"unknown pricing method {method!r}")


# -- quadrature ----------------------------------------------------------------


class _RegularSetup:
    def __init__(self, kernel, request):
        self.kernel = kernel
        self.request = request
        self.scale = np.sqrt(kernel.decomp.eigenvalues * kernel.horizon_t)
        self.dim = len(self.scale)
        self.log_jac = float(np.sum(np.log(self.scale)))

    def terminal(self, z):
        dzeta = z * self.scale
        alpha = dzeta @ self.kernel.decomp.basis.T
        r = self.request
        return terminal_prices(np.array(r.spot), alpha, r.valuation_time, r.params)

    def log_weight(self, z):
        return self.kernel.log_value(z * self.scale, 0.0) + self.log_jac


class _DegenerateSetup:
    def __init__(self, kernel, request):
        self.kernel = kernel
        self.request = request
        self.t = request.horizon
        self.chol = np.linalg.cholesky(kernel.effective_covariance)
        self.dim = kernel.n_a
        self.log_jac = 0.5 * self.dim * np.log(self.t) + float(np.sum(np.log(np.diag(self.chol))))
        spot = np.array(request.spot)
        self.spot_a = spot[list(kernel.coord_a)]
        self.spot_b = spot[list(kernel.coord_b)]

    def _dchi_a(self, z):
        return np.sqrt(self.t) * (z @ self.chol.T)

    def terminal(self, z):
        k, r = self.kernel, self.request
        sig = r.params.sigma[list(k.coord_a)]
        drift = r.params.log_drift[list(k.coord_a)]
        s_a = self.spot_a * np.exp(drift * self.t - sig * self._dchi_a(z))
        s_b = constrained_SB(self.spot_a, s_a, self.spot_b, r.valuation_time, r.params, k)
        out = np.empty(z.shape[:-1] + (r.n_assets,))
        out[..., list(k.coord_a)] = s_a
        out[..., list(k.coord_b)] = s_b
        return out

    def log_weight(self, z):
        dens = evaluate_degenerate_density(self.kernel, self._dchi_a(z), self.t)
        return np.log(dens) + self.log_jac


def _orthonormal_completion(e):
    d = len(e)
    m = np.column_stack([e, np.eye(d)])
    q, _ = np.linalg.qr(m)
    if q[:, 0] @ e < 0:
        q[:, 0] = -q[:, 0]
    return q[:, :d]


def _kink_direction(setup, kinks):
    d = setup.dim
    h = 1e-5
    for g in kinks:
        grad = np.array([
            (g(setup.terminal(h * e)) - g(setup.terminal(-h * e))) / (2 * h) for e in np.eye(d)
        ])
        norm = np.linalg.norm(grad)
        if np.isfinite(norm) and norm > 1e-12:
            return grad / norm
    return np.eye(d)[0]


def _line_roots(g, lo, hi, points, n_scan=257, iters=64):
    """Zeros of ``g(points(line, u))`` for u in [lo, hi], padded with ``hi``.

    ``points(idx, u)`` maps line indices and abscissae of equal shape to z.
    Returns an array of shape (lines, R).
    """
    n_lines = points.n_lines
    grid = np.linspace(lo, hi, n_scan)
    idx = np.broadcast_to(np.arange(n_lines)[:, None], (n_lines, n_scan))
    vals = g(points(idx, np.broadcast_to(grid, (n_lines, n_scan))))
    sgn = np.sign(vals)
    cand = np.full((n_lines, 2 * n_scan - 1), hi)

    exact = sgn == 0
    cand[:, :n_scan][exact] = np.broadcast_to(grid, (n_lines, n_scan))[exact]

    li, ci = np.nonzero(sgn[:, :-1] * sgn[:, 1:] < 0)
    if len(li):
        a, b = grid[ci].copy(), grid[ci + 1].copy()
        sa = sgn[li, ci]
        for _ in range(iters):
            mid = 0.5 * (a + b)
            sm = np.sign(g(points(li, mid)))
            left = sm == sa
            a = np.where(left, mid, a)
            b = np.where(left, b, mid)
        cand[li, n_scan + ci] = 0.5 * (a + b)
    cand.sort(axis=1)
    r = int(np.max(np.sum(cand < hi, axis=1))) if cand.size else 0
    return cand[:, :r]


class _Lines:
    def __init__(self, q, offsets):
        self.q0 = q[:, 0]
        self.offsets = offsets  # (lines, d) contribution of the outer coordinates
        self.n_lines = len(offsets)

    def __call__(self, idx, u):
        return self.offsets[idx] + np.asarray(u)[..., None] * self.q0


def _hermite_grid(order, dim):
    if dim == 0:
        return np.zeros((1, 0)), np.ones(1)
    x, w = np.polynomial.hermite_e.hermegauss(order)
    w = w / w.sum()
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    wgrids = np.meshgrid(*([w] * dim), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return nodes, weights


def _integrate(setup, payoff, n_assets, order, n_panels=8, max_points=1 << 18):
    """``E[payoff]`` under the kernel described by ``setup``."""
    d = setup.dim
    kinks = payoff.kink_functions(n_assets)
    q = _orthonormal_completion(_kink_direction(setup, kinks))

    base = np.log(setup.terminal(np.zeros(d)))
    growth = np.abs(np.log(setup.terminal(q[:, 0])) - base)
    half = 10.0 + float(np.max(growth))

    outer, outer_w = _hermite_grid(order, d - 1)
    offsets = outer @ q[:, 1:].T
    gl_x, gl_w = np.polynomial.legendre.leggauss(max(8, order // 4))
    fixed = np.linspace(-half, half, n_panels + 1)
    log_norm_outer = 0.5 * np.sum(outer**2, axis=1) + 0.5 * (d - 1) * np.log(2 * np.pi)

    per_line = (n_panels + 4) * len(gl_x)
    chunk = max(1, max_points // per_line)
    total = 0.0
    for start in range(0, len(offsets), chunk):
        sl = slice(start, start + chunk)
        lines = _Lines(q, offsets[sl])
        roots = [_line_roots(lambda z, g=g: g(setup.terminal(z)), -half, half, lines) for g in kinks]
        edges = np.sort(
            np.concatenate([np.broadcast_to(fixed, (lines.n_lines, len(fixed)))] + roots, axis=1),
            axis=1,
        )
        a, b = edges[:, :-1], edges[:, 1:]
        u = 0.5 * (a + b)[..., None] + 0.5 * (b - a)[..., None] * gl_x
        du = 0.5 * (b - a)[..., None] * gl_w
        idx = np.broadcast_to(np.arange(lines.n_lines)[:, None, None], u.shape)
        z = lines(idx, u)
        vals = payoff(setup.terminal(z))
        logw = setup.log_weight(z) + log_norm_outer[sl][:, None, None]
        line_int = np.sum(np.exp(logw) * vals * du, axis=(1, 2))
        total += float(outer_w[sl] @ line_int)
    return total


def price_quadrature(request, kernel=None, region=None):
    if kernel is None and region is None:
        kernel, region = build_kernel(request)
    order = request.method.order if isinstance(request.method, Quadrature) else 64
    if order < 3:
        raise ConfigError(f"quadrature order must be at least 3, got {order}")
    if request.horizon <= 0:
        value = float(request.payoff(np.array(request.spot)))
        return PriceResult(value, None, "expiry", region, {})

    if isinstance(kernel, DegenerateKernel):
        setup = _DegenerateSetup(kernel, request)
        diag = {"n_a": kernel.n_a, "n_b": kernel.n_b, "coord_b": list(kernel.coord_b)}
        used = "quadrature-degenerate"
    elif isinstance(kernel, RegularKernel):
        setup = _RegularSetup(kernel, request)
        diag = {}
        used = "quadrature-regular"
    else:
        raise DomainError("no kernel supplied")
    if setup.dim > MAX_QUADRATURE_DIM:
        raise ConfigError(
            f"tensor quadrature limited to {MAX_QUADRATURE_DIM} diffusive dimensions "
            f"(got {setup.dim}); use Monte Carlo"
        )
    expectation = _integrate(setup, request.payoff, request.n_assets, order)
    value = float(discount_wrap(expectation, request.valuation_time, request.params))
    return PriceResult(value, None, used, region, diag)


# -- Monte Carlo ---------------------------------------------------------------


def correlation_root(decomp):
    """``L = U diag(sqrt(max(lambda, 0)))`` so that ``L L^T = rho``.

    Also valid on the Kummer surface, where it samples the degenerate support.
    """
    return decomp.basis * np.sqrt(np.maximum(decomp.eigenvalues, 0.0))


def _chunk_sizes(paths):
    full, rest = divmod(paths, MC_CHUNK)
    return [MC_CHUNK] * full + ([rest] if rest else [])


def chunk_generator(seed, index):
    """Counter-based substream ``index`` of ``seed``; independent of worker layout."""
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, index]))


def sample_normals(root, paths, seed, workers=1):
    """Correlated standard normals ``Z = G L^T``, in deterministic chunks."""
    sizes = _chunk_sizes(paths)

    def draw(k):
        g = chunk_generator(seed, k).standard_normal((sizes[k], root.shape[1]))
        return g @ root.T

    return _map(draw, range(len(sizes)), workers)


def _map(fn, items, workers):
    items = list(items)
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def price_monte_carlo(request, paths, seed, workers=1):
    """Discounted mean of the payoff over terminal GBM draws."""
    if paths < 1000:
        raise ConfigError(f"Monte Carlo needs at least 1000 paths, got {paths}")
    decomp, region = analyse(request)
    _reject_indefinite(region)
    root = correlation_root(decomp)

    p = request.params
    t = request.horizon
    spot = np.array(request.spot)
    drift = p.log_drift * t
    vol = p.sigma * np.sqrt(t)
    sizes = _chunk_sizes(paths)

    def chunk_moments(k):
        g = chunk_generator(seed, k).standard_normal((sizes[k], root.shape[1]))
        s_t = spot * np.exp(drift + vol * (g @ root.T))
        v = request.payoff(s_t)
        m = float(v.mean())
        return len(v), m, float(((v - m) ** 2).sum())

    # pairwise (Chan) combination of centred moments, in chunk order
    count, mean, m2 = 0, 0.0, 0.0
    for n_k, mean_k, m2_k in _map(chunk_moments, range(len(sizes)), workers):
        total = count + n_k
        delta = mean_k - mean
        mean += delta * n_k / total
        m2 += m2_k + delta * delta * count * n_k / total
        count = total
    var = m2 / (paths - 1)
    df = float(discount_wrap(1.0, request.valuation_time, p))
    diag = {"paths": paths, "seed": seed, "rank": region.rank}
    return PriceResult(df * mean, float(df * np.sqrt(var / paths)), "monte-carlo", region, diag)


# -- greeks ----------------------------------------------------------------------


def greeks_delta(request, bump=1e-4):
    """Central-difference deltas ``dPi/dS_i`` with relative bump ``bump``."""
    spot = np.array(request.spot)
    out = np.empty(len(spot))
    for i in range(len(spot)):
        h = bump * spot[i]
        up, dn = spot.copy(), spot.copy()
        up[i] += h
        dn[i] -= h
        out[i] = (price(request.with_spot(up)).value - price(request.with_spot(dn)).value) / (2 * h)
    return out
