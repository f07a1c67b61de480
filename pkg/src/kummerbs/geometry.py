"""Geometry of the correlation hypercube.

A point ``r`` of the hypercube ``[-1, 1]^M`` (``M = N(N-1)/2``) fixes a unit
diagonal symmetric matrix.  The locus ``det rho(r) = 0`` is the Kummer
surface; it separates the positive-definite region containing the origin
from regions where some eigenvalue is negative.  Everything here is a pure
function of immutable values.
"""

from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations

import numpy as np

from .errors import DomainError, NumericError

BRANCHES = ("plus", "minus")
VERTICES3 = ((1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0))

_EPS = np.finfo(float).eps


def n_assets_for(m):
    """Return N such that ``N(N-1)/2 == m``; raise DomainError if none exists."""
    n = int(round((1 + np.sqrt(1 + 8 * m)) / 2))
    if n < 2 or n * (n - 1) // 2 != m:
        raise DomainError(f"{m} correlations do not match any asset count N >= 2")
    return n


def pair_index(n):
    """Lexicographic (i, j), i < j, zero-based."""
    return list(combinations(range(n), 2))


@dataclass(frozen=True)
class CorrelationPoint:
    """Off-diagonal correlations ``(rho_12, rho_13, ..., rho_(N-1)N)``."""

    n_assets: int
    entries: tuple

    def __post_init__(self):
        entries = tuple(float(e) for e in self.entries)
        object.__setattr__(self, "entries", entries)
        if self.n_assets < 2:
            raise DomainError("need at least two assets")
        m = self.n_assets * (self.n_assets - 1) // 2
        if len(entries) != m:
            raise DomainError(
                f"N={self.n_assets} needs {m} correlations, got {len(entries)}"
            )
        for (i, j), e in zip(pair_index(self.n_assets), entries):
            if not np.isfinite(e) or abs(e) > 1.0:
                raise DomainError(f"rho_{i + 1}{j + 1} = {e} is outside [-1, 1]")

    @classmethod
    def of(cls, *entries):
        """Build a point, inferring N from the number of entries."""
        if len(entries) == 1 and np.ndim(entries[0]) == 1:
            entries = tuple(entries[0])
        return cls(n_assets_for(len(entries)), tuple(entries))

    @classmethod
    def from_matrix(cls, values):
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        return cls(n, tuple(values[i, j] for i, j in pair_index(n)))

    @property
    def vector(self):
        return np.array(self.entries)

    def permuted(self, perm):
        """Relabel assets: new asset k is old asset ``perm[k]``."""
        m = assemble_matrix(self).values
        p = np.asarray(perm)
        return CorrelationPoint.from_matrix(m[np.ix_(p, p)])


@dataclass(frozen=True)
class CorrelationMatrix:
    n_assets: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.n_assets, self.n_assets):
            raise DomainError(f"expected {self.n_assets}x{self.n_assets}, got {v.shape}")
        if not np.array_equal(np.diag(v), np.ones(self.n_assets)):
            raise DomainError("correlation matrix must have unit diagonal")
        if not np.array_equal(v, v.T):
            raise DomainError("correlation matrix must be symmetric")
        if np.any(np.abs(v) > 1.0):
            raise DomainError("off-diagonal entries must lie in [-1, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def assemble_matrix(point):
    n = point.n_assets
    v = np.eye(n)
    for (i, j), e in zip(pair_index(n), point.entries):
        v[i, j] = v[j, i] = e
    return CorrelationMatrix(n, v)


def _as_values(m):
    if isinstance(m, CorrelationPoint):
        return assemble_matrix(m).values
    if isinstance(m, CorrelationMatrix):
        return m.values
    return np.asarray(m, dtype=float)


def determinant_generic(matrix):
    """Determinant by LU factorisation with partial pivoting (LAPACK getrf)."""
    return float(np.linalg.det(_as_values(matrix)))


def determinant_closed3(x, y, z):
    """``2xyz - x^2 - y^2 - z^2 + 1`` for ``r = (rho_12, rho_13, rho_23)``.

    Vectorised; defined on all of R^3.
    """
    return 2.0 * x * y * z - x * x - y * y - z * z + 1.0


# -- eigensolver -------------------------------------------------------------


def jacobi_eigh(a, tol=None, max_sweeps=60):
    """Cyclic Jacobi eigensolver on a stack of symmetric matrices.

    ``a`` has shape ``(..., n, n)``.  Returns ``(eigenvalues, vectors)`` with
    eigenvalues unsorted and eigenvectors in the columns of ``vectors``.
    Rotations are applied to the whole stack at once, so large batches of
    small matrices are cheap.
    """
    a = np.array(a, dtype=float, copy=True)
    if a.shape[-1] != a.shape[-2]:
        raise DomainError("matrix must be square")
    n = a.shape[-1]
    batch = a.shape[:-2]
    a = a.reshape((-1, n, n))
    v = np.broadcast_to(np.eye(n), a.shape).copy()
    if tol is None:
        tol = 1e-3 * _EPS
    scale = np.sqrt(np.sum(a * a, axis=(1, 2)))
    scale = np.where(scale > 0, scale, 1.0)
    off_mask = ~np.eye(n, dtype=bool)

    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(a[:, off_mask] ** 2, axis=1))
        if np.all(off <= tol * scale):
            break
        for p, q in combinations(range(n), 2):
            apq = a[:, p, q]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            safe = np.where(active, apq, 1.0)
            theta = (a[:, q, q] - a[:, p, p]) / (2.0 * safe)
            t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            cc, ss = c[:, None], s[:, None]

            ap, aq = a[:, :, p].copy(), a[:, :, q].copy()
            a[:, :, p] = cc * ap - ss * aq
            a[:, :, q] = ss * ap + cc * aq
            rp, rq = a[:, p, :].copy(), a[:, q, :].copy()
            a[:, p, :] = cc * rp - ss * rq
            a[:, q, :] = ss * rp + cc * rq
            a[:, p, q] = np.where(active, 0.0, a[:, p, q])
            a[:, q, p] = a[:, p, q]

            vp, vq = v[:, :, p].copy(), v[:, :, q].copy()
            v[:, :, p] = cc * vp - ss * vq
            v[:, :, q] = ss * vp + cc * vq
    else:
        raise NumericError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")

    w = np.diagonal(a, axis1=1, axis2=2).copy()
    return w.reshape(batch + (n,)), v.reshape(batch + (n, n))


def _canonicalise(w, v):
    """Sort descending, then flip each eigenvector so its largest entry is positive.

    Magnitudes are compared after rounding to 12 digits so near-ties resolve to
    the first index deterministically.
    """
    order = np.argsort(-w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    v = np.take_along_axis(v, order[..., None, :], axis=-1)
    lead = np.argmax(np.round(np.abs(v), 12), axis=-2)
    sign = np.take_along_axis(v, lead[..., None, :], axis=-2)[..., 0, :]
    v = v * np.where(sign < 0, -1.0, 1.0)[..., None, :]
    return w, v


def eigh_batch(values, tol=None):
    """Canonical (sorted, sign-fixed) spectra for a stack of symmetric matrices."""
    w, v = jacobi_eigh(values, tol=tol)
    return _canonicalise(w, v)


@dataclass(frozen=True)
class SpectralDecomposition:
    """``rho = U diag(eigenvalues) U^T`` with eigenvalues sorted descending."""

    eigenvalues: np.ndarray
    basis: np.ndarray
    determinant: float

    @property
    def n(self):
        return len(self.eigenvalues)

    @property
    def basis_determinant(self):
        return float(np.linalg.det(self.basis))

    def reconstruct(self):
        u = self.basis
        return (u * self.eigenvalues) @ u.T


def spectral_decompose(matrix, tol=None):
    values = _as_values(matrix)
    w, v = eigh_batch(values, tol=tol)
    w.setflags(write=False)
    v.setflags(write=False)
    return SpectralDecomposition(w, v, float(np.prod(w)))


def perturb_convention(decomp, rng, atol=1e-9):
    """Return the same decomposition in a randomised eigenbasis convention.

    Flips eigenvector signs at random and applies a random orthogonal mixing
    inside every cluster of equal eigenvalues (within ``atol``), then shuffles
    the order inside the cluster.  Used to check that downstream results do
    not depend on the canonical convention.
    """
    w = np.array(decomp.eigenvalues)
    u = np.array(decomp.basis)
    n = len(w)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and abs(w[stop] - w[start]) <= atol:
            stop += 1
        k = stop - start
        if k > 1:
            q, _ = np.linalg.qr(rng.standard_normal((k, k)))
            u[:, start:stop] = u[:, start:stop] @ q
            perm = rng.permutation(k)
            u[:, start:stop] = u[:, start:stop][:, perm]
            w[start:stop] = w[start:stop][perm]
        start = stop
    u = u * rng.choice([-1.0, 1.0], size=n)
    return SpectralDecomposition(w, u, decomp.determinant)


# -- classification ----------------------------------------------------------


def default_eps_rank(n, lambda_max):
    """Zero-eigenvalue threshold: ``N * lambda_1 * 2^-52 * 10^3``."""
    return float(n * max(abs(lambda_max), 1.0) * _EPS * 1e3)


class Region(Enum):
    INTERIOR = "Interior"
    KUMMER_SURFACE = "KummerSurface"
    INDEFINITE = "Indefinite"


@dataclass(frozen=True)
class RegionClassification:
    verdict: Region
    rank: int
    null_count: int
    determinant: float
    tolerance_used: float
    eigenvalues: tuple = ()

    @property
    def min_eigenvalue(self):
        return min(self.eigenvalues)


def classify_spectrum(eigenvalues, determinant, eps_rank=None):
    w = np.asarray(eigenvalues, dtype=float)
    eps = default_eps_rank(len(w), w.max()) if eps_rank is None else float(eps_rank)
    if eps <= 0:
        raise DomainError("eps_rank must be positive")
    null = int(np.sum(np.abs(w) <= eps))
    if np.any(w < -eps):
        verdict = Region.INDEFINITE
    elif null > 0:
        verdict = Region.KUMMER_SURFACE
    else:
        verdict = Region.INTERIOR
    return RegionClassification(
        verdict, len(w) - null, null, float(determinant), eps, tuple(float(x) for x in w)
    )


def classify(point, eps_rank=None):
    """Interior / Kummer surface / indefinite, decided from eigenvalue signs.

    The determinant alone is not enough: two negative eigenvalues give a
    positive determinant but no valid Gaussian law.
    """
    matrix = point if isinstance(point, CorrelationMatrix) else assemble_matrix(point)
    decomp = spectral_decompose(matrix)
    return classify_spectrum(decomp.eigenvalues, determinant_generic(matrix), eps_rank)


# -- gradient ----------------------------------------------------------------


def cofactor_matrix(values):
    n = values.shape[0]
    cof = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            minor = np.delete(np.delete(values, i, axis=0), j, axis=1)
            cof[i, j] = (-1) ** (i + j) * (np.linalg.det(minor) if n > 1 else 1.0)
    return cof


def gradient_eta(point):
    """Gradient of ``phi(r) = det rho(r)`` with respect to the off-diagonal entries.

    For N = 3 this is the analytic gradient of the cubic; otherwise it uses
    ``d det / d rho_ij = 2 C_ij`` (cofactor, symmetric parametrisation), which
    stays valid on singular matrices.
    """
    if point.n_assets == 3:
        x, y, z = point.entries
        return np.array([2 * y * z - 2 * x, 2 * x * z - 2 * y, 2 * x * y - 2 * z])
    cof = cofactor_matrix(assemble_matrix(point).values)
    return np.array([2.0 * cof[i, j] for i, j in pair_index(point.n_assets)])


# -- N = 3 closed forms --------------------------------------------------------


def _sheet_radicand(x, y):
    return x * x * y * y - x * x - y * y + 1.0


def _branch_sign(branch):
    if branch not in BRANCHES:
        raise DomainError(f"branch must be 'plus' or 'minus', got {branch!r}")
    return 1.0 if branch == "plus" else -1.0


def kummer_sheet_z(x, y, branch):
    """``z = xy +/- sqrt(x^2 y^2 - x^2 - y^2 + 1)``, or None off the domain."""
    sign = _branch_sign(branch)
    rad = _sheet_radicand(x, y)
    if rad < 0:
        return None
    # |z| <= 1 exactly (z = cos(a -/+ b) with x = cos a, y = cos b); clip rounding
    return float(np.clip(x * y + sign * np.sqrt(rad), -1.0, 1.0))


def closed3_sheet_eigenvalues(x, y, branch):
    """Two nonzero eigenvalues of ``rho(x, y, z_branch(x, y))``; the third is 0.

    Accepts scalars or arrays of the same shape.
    """
    sign = _branch_sign(branch)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rad = _sheet_radicand(x, y)
    if np.any(rad < 0):
        raise DomainError("(x, y) outside the sheet domain: radicand negative")
    inner = 1.0 + 8.0 * x * x * y * y + sign * 8.0 * x * y * np.sqrt(rad)
    # inner is (lambda_1 - lambda_2)^2; rounding can push a true zero below it
    root = np.sqrt(np.maximum(inner, 0.0))
    lam1 = 1.5 + 0.5 * root
    lam2 = 1.5 - 0.5 * root
    if lam1.ndim == 0:
        return float(lam1), float(lam2)
    return lam1, lam2


def sheet_grid(resolution, branch):
    """Sheet points over a ``resolution x resolution`` grid on ``[-1, 1]^2``.

    The radicand ``(1 - x^2)(1 - y^2)`` is nonnegative on the whole square,
    so every grid node is admissible.
    """
    g = np.linspace(-1.0, 1.0, resolution)
    x, y = np.meshgrid(g, g, indexing="ij")
    sign = _branch_sign(branch)
    z = np.clip(x * y + sign * np.sqrt(np.maximum(_sheet_radicand(x, y), 0.0)), -1.0, 1.0)
    return x.ravel(), y.ravel(), z.ravel()


@dataclass(frozen=True)
class LevelSurfaceSample:
    """Points of ``{det rho = C}`` for N = 3, one row per (x, y, branch) root."""

    level: float
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    det: np.ndarray
    branch: tuple

    def __len__(self):
        return len(self.x)

    def points(self):
        return [CorrelationPoint(3, (a, b, c)) for a, b, c in zip(self.x, self.y, self.z)]


def sample_level_surface(level, grid_resolution):
    """Solve the quadratic in z of ``det rho(x, y, z) = C`` on an (x, y) grid.

    ``z^2 - 2xy z + (x^2 + y^2 - 1 + C) = 0``.  Roots outside ``[-1, 1]`` are
    dropped.  The determinant is at most 1 on the cube (attained only at the
    origin), so ``C >= 1`` has nothing to sample.
    """
    level = float(level)
    if not np.isfinite(level):
        raise DomainError(f"level must be finite, got {level}")
    if level >= 1.0:
        raise DomainError(f"C = {level} >= 1: the determinant never exceeds 1 on the cube")
    if level < -3.0:
        raise DomainError(f"C = {level} < -3 is outside the supported range [-3, 1)")
    if grid_resolution < 8:
        raise DomainError("grid_resolution must be at least 8")

    g = np.linspace(-1.0, 1.0, grid_resolution)
    x, y = np.meshgrid(g, g, indexing="ij")
    x, y = x.ravel(), y.ravel()
    disc = _sheet_radicand(x, y) - level
    ok = disc >= 0
    root = np.sqrt(np.where(ok, disc, 0.0))

    xs, ys, zs, branches = [], [], [], []
    for branch, sign in (("plus", 1.0), ("minus", -1.0)):
        z = x * y + sign * root
        keep = ok & (np.abs(z) <= 1.0)
        xs.append(x[keep])
        ys.append(y[keep])
        zs.append(z[keep])
        branches.extend([branch] * int(keep.sum()))
    x, y, z = np.concatenate(xs), np.concatenate(ys), np.concatenate(zs)
    det = determinant_closed3(x, y, z)
    bad = np.abs(det - level) > 1e-9
    if bad.any():
        raise NumericError(f"{int(bad.sum())} level-surface samples failed membership")
    return LevelSurfaceSample(level, x, y, z, det, tuple(branches))
