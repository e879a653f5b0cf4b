"""Spatial trends and residual structure of resonance wavelengths across a mask.

``z`` is the deviation of each cavity's wavelength from a target, in nm, at
mask coordinates ``(x, y)``. Global trends are removed by a quadratic surface
or by LOESS (local tricube-weighted planes); the residual's spatial
correlation is then inspected with per-axis semivariograms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidValue, NoPairsInRange, RankDeficient

TARGET_NM = 620.0


@dataclass(frozen=True, eq=False)
class SpatialField:
    x_um: np.ndarray
    y_um: np.ndarray
    z_nm: np.ndarray
    target_nm: float = TARGET_NM

    def __post_init__(self):
        arrs = [np.array(a, dtype=np.float64).ravel() for a in (self.x_um, self.y_um, self.z_nm)]
        if not (arrs[0].size == arrs[1].size == arrs[2].size):
            raise InvalidValue("x, y and z must have equal length")
        if arrs[0].size < 1:
            raise InvalidValue("spatial field needs at least one point")
        if not all(np.all(np.isfinite(a)) for a in arrs):
            raise InvalidValue("spatial field values must be finite")
        for name, a in zip(("x_um", "y_um", "z_nm"), arrs):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def from_wavelengths(cls, x_um, y_um, lambda_nm, target_nm: float = TARGET_NM) -> "SpatialField":
        return cls(x_um, y_um, np.asarray(lambda_nm, dtype=np.float64) - target_nm, target_nm)

    @property
    def n(self) -> int:
        return self.z_nm.size

    def with_values(self, z_nm) -> "SpatialField":
        return SpatialField(self.x_um, self.y_um, z_nm, self.target_nm)


# ---------------------------------------------------------------- quadratic


@dataclass(frozen=True)
class QuadraticSurface:
    """``z = b0 + b1 x + b2 y + b3 x^2 + b4 x y + b5 y^2`` in input coordinates."""

    coefficients: tuple[float, float, float, float, float, float]
    normal_residual: float = 0.0

    def __call__(self, x, y):
        b0, b1, b2, b3, b4, b5 = self.coefficients
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        return b0 + b1 * x + b2 * y + b3 * x * x + b4 * x * y + b5 * y * y


def _quad_basis(u, v):
    return np.column_stack([np.ones_like(u), u, v, u * u, u * v, v * v])


def fit_quadratic_surface(field: SpatialField, max_condition: float = 1e10) -> QuadraticSurface:
    """Least squares on centred, scaled coordinates; coefficients mapped back."""
    if field.n < 6:
        raise RankDeficient("quadratic surface needs at least 6 points", n=field.n)
    mx, my = float(np.mean(field.x_um)), float(np.mean(field.y_um))
    sx = float(np.std(field.x_um)) or 1.0
    sy = float(np.std(field.y_um)) or 1.0
    u, v = (field.x_um - mx) / sx, (field.y_um - my) / sy
    A = _quad_basis(u, v)
    cond = np.linalg.cond(A)
    if not cond <= max_condition:
        raise RankDeficient(f"design condition number {cond:.3g} exceeds {max_condition:g}")
    g, *_ = np.linalg.lstsq(A, field.z_nm, rcond=None)
    resid = field.z_nm - A @ g
    scale = np.linalg.norm(A, axis=0) * max(np.linalg.norm(field.z_nm), 1e-300)
    normal = float(np.max(np.abs(A.T @ resid) / scale))

    # expand g(u, v) with u = (x - mx)/sx, v = (y - my)/sy
    g0, g1, g2, g3, g4, g5 = g
    b3 = g3 / sx**2
    b4 = g4 / (sx * sy)
    b5 = g5 / sy**2
    b1 = g1 / sx - 2 * b3 * mx - b4 * my
    b2 = g2 / sy - 2 * b5 * my - b4 * mx
    b0 = g0 - g1 * mx / sx - g2 * my / sy + b3 * mx * mx + b4 * mx * my + b5 * my * my
    return QuadraticSurface(tuple(float(b) for b in (b0, b1, b2, b3, b4, b5)), normal)


# ---------------------------------------------------------------- LOESS


@dataclass(frozen=True, eq=False)
class LoessFit:
    k: int
    fitted: np.ndarray
    planes: np.ndarray  # (N, 3): a, b, c of z = a + b x + c y
    degenerate: np.ndarray  # True where the weighted-mean fallback was used


def default_k(n: int) -> int:
    return max(3, math.ceil(0.3 * n))


def tricube(u):
    u = np.asarray(u, dtype=np.float64)
    return np.where(u < 1.0, (1.0 - u**3) ** 3, 0.0)


def _neighbours(x, y, k: int, block: int = 512):
    """Indices and distances of the k nearest points (ties broken by index)."""
    n = x.size
    idx = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k))
    for a in range(0, n, block):
        b = min(a + block, n)
        d = np.hypot(x[a:b, None] - x[None, :], y[a:b, None] - y[None, :])
        order = np.argsort(d, axis=1, kind="stable")[:, :k]
        idx[a:b] = order
        dist[a:b] = np.take_along_axis(d, order, axis=1)
    return idx, dist


def loess_fit(field: SpatialField, k: int | None = None, rcond: float = 1e-10) -> LoessFit:
    """Local linear regression with tricube weights over the k nearest points.

    The kernel support is the distance to the k-th neighbour, so that
    neighbour always gets weight zero. A neighbourhood whose weighted points
    are collinear falls back to the weighted mean and is flagged.
    """
    n = field.n
    k = default_k(n) if k is None else int(k)
    if k < 3:
        raise InvalidValue("LOESS needs k >= 3", k=k)
    if k > n:
        raise InvalidValue("k exceeds the number of points", k=k, n=n)
    x, y, z = field.x_um, field.y_um, field.z_nm
    idx, dist = _neighbours(x, y, k)
    dmax = dist[:, -1:]
    safe = np.where(dmax > 0, dmax, 1.0)
    w = np.where(dmax > 0, tricube(dist / safe), 1.0)

    # local frame centred on the target point, scaled by the bandwidth
    dx = (x[idx] - x[:, None]) / safe
    dy = (y[idx] - y[:, None]) / safe
    sw = np.sqrt(w)
    A = np.stack([sw, sw * dx, sw * dy], axis=-1)
    rhs = sw * z[idx]
    s = np.linalg.svd(A, compute_uv=False)
    degenerate = ~(s[:, -1] > rcond * s[:, 0])

    coef = np.zeros((n, 3))
    good = np.nonzero(~degenerate)[0]
    if good.size:
        Q, R = np.linalg.qr(A[good])
        qtb = np.einsum("nki,nk->ni", Q, rhs[good])
        coef[good] = np.linalg.solve(R, qtb[..., None])[..., 0]
    bad = np.nonzero(degenerate)[0]
    for i in bad:
        wi = w[i]
        coef[i, 0] = float(np.dot(wi, z[idx[i]]) / wi.sum()) if wi.sum() > 0 else float(z[i])

    fitted = coef[:, 0].copy()
    b = coef[:, 1] / safe[:, 0]
    c = coef[:, 2] / safe[:, 0]
    planes = np.column_stack([coef[:, 0] - b * x - c * y, b, c])
    return LoessFit(k, fitted, planes, degenerate)


# ---------------------------------------------------------------- residuals


@dataclass(frozen=True, eq=False)
class ResidualSummary:
    std_before: float
    std_after: float
    reduction_pct: float
    residuals: np.ndarray


def _std(v: np.ndarray) -> float:
    vals = v.tolist()
    if len(vals) < 2:
        return float("nan")
    m = math.fsum(vals) / len(vals)
    return math.sqrt(math.fsum((a - m) ** 2 for a in vals) / (len(vals) - 1))


def residual_summary(field: SpatialField, fitted) -> ResidualSummary:
    fitted = np.asarray(fitted, dtype=np.float64).ravel()
    if fitted.size != field.n:
        raise InvalidValue("fitted values must match the field length", n=field.n, got=fitted.size)
    resid = field.z_nm - fitted
    before, after = _std(field.z_nm), _std(resid)
    reduction = 100.0 * (1.0 - after / before) if before > 0 else float("nan")
    return ResidualSummary(before, after, reduction, resid)


# ---------------------------------------------------------------- variogram


@dataclass(frozen=True)
class VariogramBin:
    lag: float
    gamma: float
    n_pairs: int


@dataclass(frozen=True)
class SemivariogramResult:
    axis: str
    bins: list[VariogramBin]
    nugget: float
    bin_width: float

    @property
    def lags(self) -> np.ndarray:
        return np.array([b.lag for b in self.bins])

    @property
    def gammas(self) -> np.ndarray:
        return np.array([b.gamma for b in self.bins])

    @property
    def counts(self) -> np.ndarray:
        return np.array([b.n_pairs for b in self.bins])

    def slope(self) -> float:
        """Pair-weighted least-squares slope of gamma against lag."""
        h, g, w = self.lags, self.gammas, self.counts.astype(float)
        hm = np.sum(w * h) / np.sum(w)
        gm = np.sum(w * g) / np.sum(w)
        return float(np.sum(w * (h - hm) * (g - gm)) / np.sum(w * (h - hm) ** 2))


def semivariogram(
    field: SpatialField, axis: str = "x", bin_width: float = 1.0, max_lag: float | None = None,
    block: int = 1024,
) -> SemivariogramResult:
    """Per-axis semivariance ``sum (z_i - z_j)^2 / (2 n_pairs)`` in lag bins.

    Bin ``k`` is centred at ``k * bin_width`` and spans half a bin either
    side; a pair enters only if its separation along the other axis is below
    ``bin_width / 2``.
    """
    if axis not in ("x", "y"):
        raise InvalidValue(f"axis must be 'x' or 'y', got {axis!r}")
    if not bin_width > 0:
        raise InvalidValue("bin_width must be positive", bin_width=bin_width)
    a, o = (field.x_um, field.y_um) if axis == "x" else (field.y_um, field.x_um)
    z = field.z_nm
    if max_lag is None:
        max_lag = float(np.ptp(a))
    if not max_lag >= 0:
        raise InvalidValue("max_lag must be non-negative")
    n_bins = int(math.floor(max_lag / bin_width + 0.5)) + 1
    sums = np.zeros(n_bins)
    counts = np.zeros(n_bins, dtype=np.int64)
    n = z.size
    for s in range(0, n, block):
        e = min(s + block, n)
        i = np.arange(s, e)[:, None]
        j = np.arange(n)[None, :]
        keep = j > i
        sep = np.abs(a[s:e, None] - a[None, :])
        ortho = np.abs(o[s:e, None] - o[None, :])
        k = np.floor(sep / bin_width + 0.5).astype(np.int64)
        keep &= (ortho < 0.5 * bin_width) & (k < n_bins)
        kk = k[keep]
        dz = (z[s:e, None] - z[None, :])[keep]
        sums += np.bincount(kk, weights=dz * dz, minlength=n_bins)
        counts += np.bincount(kk, minlength=n_bins)
    bins = [
        VariogramBin(k * bin_width, float(sums[k] / (2 * counts[k])), int(counts[k]))
        for k in range(n_bins)
        if counts[k] > 0
    ]
    if not bins:
        raise NoPairsInRange("no point pairs within the lag range", axis=axis)
    return SemivariogramResult(axis, bins, bins[0].gamma, bin_width)
