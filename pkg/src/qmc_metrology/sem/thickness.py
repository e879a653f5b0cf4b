"""Closed-form beam thickness from tilted-view ridge separations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateTilt, InvalidGeometry, InvalidValue, UnstableGeometry
from ..montecarlo import CounterRNG
from .tilted import TiltedRidges
from .widths import WidthMeasurement

MIN_MC = 100
MAX_INVALID_FRACTION = 0.1

STREAM_WT, STREAM_WB, STREAM_DT, STREAM_DNB = 10, 11, 12, 13


def _trig(theta_deg: float, psi_deg: float):
    # cos is taken as sin of the complement so that both agree to the bit at 45 deg
    s = math.sin(math.radians(theta_deg))
    c = math.sin(math.radians(90.0 - theta_deg))
    cp = math.sin(math.radians(90.0 - abs(psi_deg)))
    sp = math.sin(math.radians(psi_deg))
    return s, c, cp, sp


def projection_prefactor(theta_deg: float, psi_deg: float = 0.0) -> float:
    """Geometric factor multiplying the ratio term; exactly 1 at 45 deg, psi 0."""
    if not (math.isfinite(theta_deg) and 0.0 < theta_deg < 90.0):
        raise DegenerateTilt(f"tilt must lie in (0, 90) deg, got {theta_deg}", theta_deg=theta_deg)
    if not (math.isfinite(psi_deg) and abs(psi_deg) < 90.0):
        raise InvalidValue(f"|psi| must be < 90 deg, got {psi_deg}", psi_deg=psi_deg)
    s, c, cp, sp = _trig(theta_deg, psi_deg)
    # 1 - sin^2(theta) cos^2(psi), rearranged to avoid cancellation
    root = math.sqrt(c * c + s * s * sp * sp)
    den = s * root
    if not den > 0.0 or not math.isfinite(c * c * cp / den):
        raise DegenerateTilt("tilt geometry is numerically degenerate", theta_deg=theta_deg)
    return c * c * cp / den


def thickness_from_projection(
    W_t_um: float,
    W_b_um: float,
    d_T: float,
    d_NB: float,
    theta_deg: float,
    psi_deg: float = 0.0,
) -> float:
    """Thickness in um from top/bottom widths and the two ridge separations.

    Only the ratio ``d_NB / d_T`` enters, so the separations may be in any
    common unit.
    """
    for name, v in (("W_t", W_t_um), ("W_b", W_b_um), ("d_NB", d_NB)):
        if not math.isfinite(v):
            raise InvalidValue(f"{name} must be finite")
    if not (math.isfinite(d_T) and d_T > 0):
        raise InvalidValue(f"d_T must be > 0, got {d_T}", d_T=d_T)
    k = projection_prefactor(theta_deg, psi_deg)
    t = k * (W_t_um * (d_NB / d_T) - (W_b_um - W_t_um) / 2.0)
    if not t > 0:
        raise InvalidGeometry(f"reconstructed thickness {t:.6g} um is not positive", t_um=t)
    return t


def thickness_array(W_t, W_b, d_T, d_NB, theta_deg: float, psi_deg: float = 0.0) -> np.ndarray:
    """Vectorized form; invalid geometries come back as NaN."""
    k = projection_prefactor(theta_deg, psi_deg)
    W_t = np.asarray(W_t, dtype=np.float64)
    W_b = np.asarray(W_b, dtype=np.float64)
    d_T = np.asarray(d_T, dtype=np.float64)
    d_NB = np.asarray(d_NB, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = k * (W_t * (d_NB / d_T) - (W_b - W_t) / 2.0)
    ok = (d_T > 0) & np.isfinite(t) & (t > 0)
    return np.where(ok, t, np.nan)


@dataclass(frozen=True)
class ProjectionNoise:
    sigma_Wt_um: float = 0.0
    sigma_Wb_um: float = 0.0
    sigma_dT_px: float = 0.0
    sigma_dNB_px: float = 0.0

    def __post_init__(self):
        for name in ("sigma_Wt_um", "sigma_Wb_um", "sigma_dT_px", "sigma_dNB_px"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidValue(f"{name} must be finite and >= 0", value=v)

    @classmethod
    def from_measurements(cls, widths: WidthMeasurement, sigma_d_px: float) -> "ProjectionNoise":
        return cls(widths.sigma_top_nm * 1e-3, widths.sigma_bottom_nm * 1e-3, sigma_d_px, sigma_d_px)


@dataclass(frozen=True, eq=False)
class ThicknessEstimate:
    t_um: float
    sigma_t_um: float
    n_mc: int
    n_invalid: int
    W_t_um: float
    W_b_um: float
    d_T: float
    d_NB: float
    theta_deg: float
    psi_deg: float
    seed: int
    samples: np.ndarray

    def summary(self) -> dict:
        return {
            "t_um": self.t_um,
            "sigma_t_um": self.sigma_t_um,
            "n_mc": self.n_mc,
            "n_invalid": self.n_invalid,
            "W_t_um": self.W_t_um,
            "W_b_um": self.W_b_um,
            "d_T_px": self.d_T,
            "d_NB_px": self.d_NB,
            "theta_deg": self.theta_deg,
            "psi_deg": self.psi_deg,
            "seed": self.seed,
        }


def propagate_thickness(
    W_t_um: float,
    W_b_um: float,
    d_T: float,
    d_NB: float,
    theta_deg: float,
    psi_deg: float,
    noise: ProjectionNoise,
    n_mc: int,
    seed: int,
) -> ThicknessEstimate:
    """Monte Carlo spread of the thickness under Gaussian input perturbations."""
    if n_mc < MIN_MC:
        raise InvalidValue(f"n_mc must be >= {MIN_MC}, got {n_mc}", n_mc=n_mc)
    thickness_from_projection(W_t_um, W_b_um, d_T, d_NB, theta_deg, psi_deg)

    def draw(stream, mean, std):
        if std == 0:
            return np.full(n_mc, float(mean))
        return CounterRNG(seed, stream).normal(0, n_mc, mean, std)

    t = thickness_array(
        draw(STREAM_WT, W_t_um, noise.sigma_Wt_um),
        draw(STREAM_WB, W_b_um, noise.sigma_Wb_um),
        draw(STREAM_DT, d_T, noise.sigma_dT_px),
        draw(STREAM_DNB, d_NB, noise.sigma_dNB_px),
        theta_deg,
        psi_deg,
    )
    good = t[np.isfinite(t)]
    n_bad = n_mc - good.size
    if n_bad > MAX_INVALID_FRACTION * n_mc:
        raise UnstableGeometry(
            f"{n_bad} of {n_mc} perturbed geometries are invalid", n_invalid=n_bad, n_mc=n_mc
        )
    mean = math.fsum(good) / good.size
    var = math.fsum((good - mean) ** 2) / (good.size - 1)
    return ThicknessEstimate(
        mean, math.sqrt(var), n_mc, n_bad, W_t_um, W_b_um, d_T, d_NB, theta_deg, psi_deg, seed, good
    )


def thickness_with_uncertainty(
    widths: WidthMeasurement,
    ridges: TiltedRidges,
    theta_deg: float,
    noise: ProjectionNoise,
    n_mc: int,
    seed: int,
) -> ThicknessEstimate:
    """Thickness from a top-view width measurement and tilted-view ridges."""
    return propagate_thickness(
        widths.W_top_um, widths.W_bottom_um, ridges.d_T, ridges.d_NB,
        theta_deg, ridges.psi_deg, noise, n_mc, seed,
    )
