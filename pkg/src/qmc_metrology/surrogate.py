"""Material dispersion and the geometry-to-wavelength surrogate with its inverse.

The surrogate maps top width ``W``, hole radius ``r`` and thickness ``t`` (all
µm) to a resonance wavelength in nm::

    lam = lam0 + cW dW + cr dr + ct dt + sum_{i<=j} q_ij d_i d_j

with ``d = x - x0`` about a reference point. Coefficients come from a JSON
calibration file so that simulation-derived values can be dropped in.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    InvalidValue,
    NonMonotoneOnBracket,
    NoSignChange,
    OutOfValidityBox,
    OutOfValidityRange,
    PoleProximity,
    RankDeficient,
    TooFewSamples,
)

# ---------------------------------------------------------------- Sellmeier


@dataclass(frozen=True)
class SellmeierParams:
    """Two-term Sellmeier coefficients; ``C1``, ``C2`` in µm²."""

    B1: float = 0.3306
    C1: float = 0.175**2
    B2: float = 4.3356
    C2: float = 0.106**2
    valid_um: tuple[float, float] = (0.23, 5.0)

    def __post_init__(self):
        if not (self.C1 > 0 and self.C2 > 0):
            raise InvalidValue("Sellmeier C1 and C2 must be positive")
        if not self.valid_um[0] < self.valid_um[1]:
            raise InvalidValue("Sellmeier validity range is empty")

    @property
    def long_wavelength_limit(self) -> float:
        return math.sqrt(1.0 + self.B1 + self.B2)


DIAMOND = SellmeierParams()
POLE_TOL_UM2 = 1e-6


def sellmeier_n(wavelength_um: float, p: SellmeierParams = DIAMOND) -> float:
    lam = float(wavelength_um)
    if not math.isfinite(lam):
        raise InvalidValue("wavelength must be finite")
    l2 = lam * lam
    for c in (p.C1, p.C2):
        if abs(l2 - c) < POLE_TOL_UM2:
            raise PoleProximity(f"lambda^2 within {POLE_TOL_UM2} um^2 of a pole", wavelength_um=lam)
    lo, hi = p.valid_um
    if not lo <= lam <= hi:
        raise OutOfValidityRange(f"wavelength outside [{lo}, {hi}] um", wavelength_um=lam)
    return math.sqrt(1.0 + p.B1 * l2 / (l2 - p.C1) + p.B2 * l2 / (l2 - p.C2))


# ---------------------------------------------------------------- surrogate

PARAMS = ("W", "r", "t")
QUAD_KEYS = ("WW", "rr", "tt", "Wr", "Wt", "rt")
_QUAD_IDX = {"WW": (0, 0), "rr": (1, 1), "tt": (2, 2), "Wr": (0, 1), "Wt": (0, 2), "rt": (1, 2)}


@dataclass(frozen=True)
class SurrogateModel:
    reference_um: tuple[float, float, float]
    lambda0_nm: float
    linear: tuple[float, float, float]
    quadratic: tuple[float, float, float, float, float, float] | None = None
    validity_um: tuple[tuple[float, float], ...] = ((0.25, 0.45), (0.02, 0.08), (0.05, 0.25))
    provenance: str = ""
    residual_rms_nm: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "reference_um", tuple(float(v) for v in self.reference_um))
        object.__setattr__(self, "linear", tuple(float(v) for v in self.linear))
        object.__setattr__(self, "validity_um", tuple(tuple(map(float, b)) for b in self.validity_um))
        if self.quadratic is not None:
            object.__setattr__(self, "quadratic", tuple(float(v) for v in self.quadratic))
            if len(self.quadratic) != 6:
                raise InvalidValue("quadratic set needs 6 coefficients")
        if len(self.validity_um) != 3 or any(not lo < hi for lo, hi in self.validity_um):
            raise InvalidValue("validity box must be non-empty in W, r and t")
        if self.linear[2] == 0.0:
            raise InvalidValue("thickness coefficient ct must be nonzero")
        vals = (*self.reference_um, self.lambda0_nm, *self.linear, *(self.quadratic or ()))
        if not all(math.isfinite(v) for v in vals):
            raise InvalidValue("surrogate coefficients must be finite")

    @property
    def order(self) -> str:
        return "linear" if self.quadratic is None else "quadratic"

    def quad_matrix(self) -> np.ndarray:
        """Symmetric ``Q`` such that the quadratic term is ``d^T Q d``."""
        Q = np.zeros((3, 3))
        if self.quadratic is not None:
            for key, v in zip(QUAD_KEYS, self.quadratic):
                i, j = _QUAD_IDX[key]
                if i == j:
                    Q[i, i] = v
                else:
                    Q[i, j] = Q[j, i] = 0.5 * v
        return Q

    # JSON -------------------------------------------------------------
    def to_dict(self) -> dict:
        W0, r0, t0 = self.reference_um
        out = {
            "reference": {"W_um": W0, "r_um": r0, "t_um": t0, "lambda_nm": self.lambda0_nm},
            "linear": dict(zip(("cW", "cr", "ct"), self.linear)),
            "validity": {f"{n}_um": list(b) for n, b in zip(PARAMS, self.validity_um)},
            "provenance": self.provenance,
        }
        if self.quadratic is not None:
            out["quadratic"] = dict(zip(QUAD_KEYS, self.quadratic))
        if self.residual_rms_nm is not None:
            out["residual_rms_nm"] = self.residual_rms_nm
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SurrogateModel":
        try:
            ref = d["reference"]
            lin = d["linear"]
            quad = d.get("quadratic")
            val = d.get("validity")
            kwargs = {}
            if val is not None:
                kwargs["validity_um"] = tuple(tuple(val[f"{n}_um"]) for n in PARAMS)
            return cls(
                (ref["W_um"], ref["r_um"], ref["t_um"]),
                float(ref["lambda_nm"]),
                (lin["cW"], lin["cr"], lin["ct"]),
                None if quad is None else tuple(quad[k] for k in QUAD_KEYS),
                provenance=str(d.get("provenance", "")),
                residual_rms_nm=d.get("residual_rms_nm"),
                **kwargs,
            )
        except (KeyError, TypeError) as exc:
            raise InvalidValue(f"malformed calibration: missing {exc}") from None

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SurrogateModel":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise InvalidValue(f"calibration is not valid JSON: {exc}") from None


def _check_box(m: SurrogateModel, W, r, t) -> None:
    for name, v, (lo, hi) in zip(PARAMS, (W, r, t), m.validity_um):
        a = np.asarray(v, dtype=np.float64)
        if not np.all(np.isfinite(a)):
            raise InvalidValue(f"{name} must be finite")
        if np.any(a < lo) or np.any(a > hi):
            raise OutOfValidityBox(f"{name} outside [{lo}, {hi}] um", parameter=name)


def _eval_unchecked(m: SurrogateModel, W, r, t):
    W0, r0, t0 = m.reference_um
    cW, cr, ct = m.linear
    dW, dr, dt = np.subtract(W, W0), np.subtract(r, r0), np.subtract(t, t0)
    lam = m.lambda0_nm + cW * dW + cr * dr + ct * dt
    if m.quadratic is not None:
        qWW, qrr, qtt, qWr, qWt, qrt = m.quadratic
        lam = lam + (qWW * dW * dW + qrr * dr * dr + qtt * dt * dt
                     + qWr * dW * dr + qWt * dW * dt + qrt * dr * dt)
    return lam


def surrogate_eval(m: SurrogateModel, W_um, r_um, t_um):
    """Resonance wavelength in nm; scalars in give a float, arrays an array."""
    _check_box(m, W_um, r_um, t_um)
    lam = _eval_unchecked(m, W_um, r_um, t_um)
    return float(lam) if np.ndim(lam) == 0 else lam


def _dlam_dt(m: SurrogateModel, W, r, t):
    W0, r0, t0 = m.reference_um
    d = m.linear[2]
    if m.quadratic is not None:
        _, _, qtt, _, qWt, qrt = m.quadratic
        d = d + 2 * qtt * (t - t0) + qWt * (np.subtract(W, W0)) + qrt * (np.subtract(r, r0))
    return d


# ---------------------------------------------------------------- fitting


@dataclass(frozen=True)
class CalibrationSample:
    W_um: float
    r_um: float
    t_um: float
    lambda_nm: float
    Q: float | None = None

    def __post_init__(self):
        for name in ("W_um", "r_um", "t_um", "lambda_nm"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidValue(f"{name} must be positive and finite", value=v)
        lo, hi = DIAMOND.valid_um
        if not lo <= self.lambda_nm * 1e-3 <= hi:
            raise OutOfValidityRange("sample wavelength outside dispersion validity")


def _design(d: np.ndarray, order: str) -> np.ndarray:
    cols = [np.ones(len(d)), d[:, 0], d[:, 1], d[:, 2]]
    if order == "quadratic":
        for key in QUAD_KEYS:
            i, j = _QUAD_IDX[key]
            cols.append(d[:, i] * d[:, j])
    return np.column_stack(cols)


def fit_surrogate(
    samples: Sequence[CalibrationSample],
    order: str = "linear",
    validity_um=None,
    provenance: str = "fit_surrogate",
    max_condition: float = 1e10,
) -> SurrogateModel:
    """Ordinary least squares about the sample centroid.

    Samples are sorted before the solve so the coefficients do not depend on
    input order down to the last bit.
    """
    if order not in ("linear", "quadratic"):
        raise InvalidValue(f"unknown surrogate order {order!r}")
    n_par = 4 if order == "linear" else 10
    if len(samples) < 2 * n_par:
        raise TooFewSamples(f"{order} fit needs >= {2 * n_par} samples", n=len(samples))
    rows = sorted((s.W_um, s.r_um, s.t_um, s.lambda_nm) for s in samples)
    X = np.array(rows)[:, :3]
    y = np.array(rows)[:, 3]
    centroid = tuple(math.fsum(X[:, k]) / len(X) for k in range(3))
    A = _design(X - np.array(centroid), order)
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise RankDeficient("a design column is identically zero")
    cond = np.linalg.cond(A / norms)
    if not cond <= max_condition:
        raise RankDeficient(f"design condition number {cond:.3g} exceeds {max_condition:g}")
    coef, *_ = np.linalg.lstsq(A / norms, y, rcond=None)
    coef = coef / norms
    resid = A @ coef - y
    rms = math.sqrt(math.fsum(resid * resid) / len(y))
    if validity_um is None:
        validity_um = tuple((float(X[:, k].min()), float(X[:, k].max())) for k in range(3))
    return SurrogateModel(
        centroid,
        float(coef[0]),
        tuple(coef[1:4]),
        None if order == "linear" else tuple(coef[4:]),
        validity_um=validity_um,
        provenance=provenance,
        residual_rms_nm=rms,
    )


# ---------------------------------------------------------------- inversion

T_TOL_UM = 1e-7


def invert_many(m: SurrogateModel, W_um, r_um, lambda_nm, bracket_um):
    """Vectorised bisection for ``t``; returns ``(t, ok)`` with NaN where no root.

    Raises only for invalid inputs (box, bracket, monotonicity); a missing
    sign change is reported per element through ``ok``.
    """
    W = np.atleast_1d(np.asarray(W_um, dtype=np.float64))
    r = np.atleast_1d(np.asarray(r_um, dtype=np.float64))
    lam = np.atleast_1d(np.asarray(lambda_nm, dtype=np.float64))
    W, r, lam = np.broadcast_arrays(W, r, lam)
    lo_t, hi_t = map(float, bracket_um)
    if not lo_t < hi_t:
        raise InvalidValue("bracket low must be below high", bracket=bracket_um)
    _check_box(m, W, r, np.array([lo_t, hi_t]))
    if not np.all(np.isfinite(lam)):
        raise InvalidValue("wavelength must be finite")

    if m.quadratic is not None:
        grid = np.linspace(lo_t, hi_t, 17)
        deriv = _dlam_dt(m, W[..., None], r[..., None], grid)
        mono = np.all(deriv > 0, axis=-1) | np.all(deriv < 0, axis=-1)
        if not np.all(mono):
            raise NonMonotoneOnBracket("d lambda / d t changes sign on the bracket")

    lo = np.full(W.shape, lo_t)
    hi = np.full(W.shape, hi_t)
    g_lo = _eval_unchecked(m, W, r, lo) - lam
    g_hi = _eval_unchecked(m, W, r, hi) - lam
    ok = (g_lo == 0) | (g_hi == 0) | (np.sign(g_lo) != np.sign(g_hi))
    # narrow well past T_TOL_UM so the forward model reproduces lambda closely
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        g_mid = _eval_unchecked(m, W, r, mid) - lam
        left = np.sign(g_mid) == np.sign(g_lo)
        lo = np.where(left, mid, lo)
        g_lo = np.where(left, g_mid, g_lo)
        hi = np.where(left, hi, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * np.abs(hi)):
            break
    t = np.where(ok, 0.5 * (lo + hi), np.nan)
    return t, ok


def invert_for_thickness(m: SurrogateModel, W_um: float, r_um: float, lambda_nm: float,
                         bracket_um: tuple[float, float] = (0.05, 0.25)) -> float:
    t, ok = invert_many(m, W_um, r_um, lambda_nm, bracket_um)
    if not ok[0]:
        lo = _eval_unchecked(m, W_um, r_um, bracket_um[0])
        hi = _eval_unchecked(m, W_um, r_um, bracket_um[1])
        raise NoSignChange(
            f"lambda {lambda_nm} nm not attainable on bracket (range {min(lo, hi):.4f}..{max(lo, hi):.4f})",
            bracket=bracket_um,
        )
    return float(t[0])


def linear_inverse(m: SurrogateModel, W_um, r_um, lambda_nm):
    """Closed-form inverse of the linear part, ignoring quadratic terms."""
    W0, r0, t0 = m.reference_um
    cW, cr, ct = m.linear
    lam_t0 = m.lambda0_nm + cW * (W_um - W0) + cr * (r_um - r0)
    return t0 + (lambda_nm - lam_t0) / ct


# ---------------------------------------------------------------- default

STANDIN_REFERENCE = (0.330, 0.045, 0.129)
STANDIN_LAMBDA_NM = 633.2
STANDIN_PITCH_UM = 0.185
# decay lengths of the confinement factors in t and W, and hole-fill weight
STANDIN_T_DECAY_UM = 0.060
STANDIN_W_DECAY_UM = 0.112
STANDIN_FILL_WEIGHT = 0.28


def _standin_index(W, r, t):
    n_core = sellmeier_n(STANDIN_LAMBDA_NM * 1e-3)
    conf = (1 - np.exp(-np.asarray(t) / STANDIN_T_DECAY_UM)) * (1 - np.exp(-np.asarray(W) / STANDIN_W_DECAY_UM))
    fill = np.pi * np.asarray(r) ** 2 / (STANDIN_PITCH_UM * np.asarray(W))
    return 1.0 + (n_core - 1.0) * conf * (1.0 - STANDIN_FILL_WEIGHT * fill)


def standin_lambda_nm(W_um, r_um, t_um):
    """Analytic effective-index stand-in for a simulated resonance wavelength.

    Confinement grows with thickness and width and saturates; hole area
    lowers the mean index. Only the trends are meaningful.
    """
    ref = _standin_index(*STANDIN_REFERENCE)
    return STANDIN_LAMBDA_NM * _standin_index(W_um, r_um, t_um) / ref


def default_from_standin(quadratic: bool = False, h: float = 1e-4) -> SurrogateModel:
    """Taylor coefficients of the stand-in at the reference by central differences."""
    x0 = np.array(STANDIN_REFERENCE)
    f = lambda x: float(standin_lambda_nm(*x))
    lin, hess = [], np.zeros((3, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        lin.append((f(x0 + e) - f(x0 - e)) / (2 * h))
        for j in range(3):
            ej = np.zeros(3)
            ej[j] = h
            hess[i, j] = (f(x0 + e + ej) - f(x0 + e - ej) - f(x0 - e + ej) + f(x0 - e - ej)) / (4 * h * h)
    quad = None
    if quadratic:
        quad = tuple(
            0.5 * hess[i, i] if i == j else hess[i, j] for i, j in (_QUAD_IDX[k] for k in QUAD_KEYS)
        )
    return SurrogateModel(
        STANDIN_REFERENCE,
        STANDIN_LAMBDA_NM,
        tuple(round(c, 6) for c in lin),
        None if quad is None else tuple(round(c, 3) for c in quad),
        provenance=(
            "analytic effective-index stand-in (not simulation-derived); "
            "Taylor expansion about W=0.330 um, r=0.045 um, t=0.129 um"
        ),
    )


def load_default_model() -> SurrogateModel:
    text = resources.files("qmc_metrology").joinpath("data/default_calibration.json").read_text()
    return SurrogateModel.from_dict(json.loads(text))


__all__ = [
    "CalibrationSample",
    "DIAMOND",
    "SellmeierParams",
    "SurrogateModel",
    "default_from_standin",
    "fit_surrogate",
    "invert_for_thickness",
    "invert_many",
    "linear_inverse",
    "load_default_model",
    "sellmeier_n",
    "standin_lambda_nm",
    "surrogate_eval",
]
