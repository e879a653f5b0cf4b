"""Small dense Levenberg-Marquardt solver with analytic Jacobians."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class LMResult:
    params: np.ndarray
    cost: float
    n_iter: int
    converged: bool
    message: str


def levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    p0: np.ndarray,
    scale: np.ndarray,
    xtol: float = 1e-10,
    max_iter: int = 200,
) -> LMResult:
    """Minimise ``0.5 * |residual(p)|^2`` from ``p0``.

    ``scale`` gives a typical magnitude per parameter; the relative step test
    is ``max |dp_i| / max(|p_i|, scale_i) < xtol``.
    """
    p = np.array(p0, dtype=np.float64)
    scale = np.abs(np.asarray(scale, dtype=np.float64))
    r = residual(p)
    cost = 0.5 * float(r @ r)
    mu = 1e-3
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        J = jacobian(p)
        # column scaling keeps the damping meaningful across parameter magnitudes
        cnorm = np.sqrt(np.sum(J * J, axis=0))
        cnorm[cnorm == 0] = 1.0
        Js = J / cnorm
        improved = False
        for _ in range(30):
            A = np.vstack([Js, np.sqrt(mu) * np.eye(p.size)])
            b = np.concatenate([-r, np.zeros(p.size)])
            step_s, *_ = np.linalg.lstsq(A, b, rcond=None)
            step = step_s / cnorm
            p_new = p + step
            r_new = residual(p_new)
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                improved = True
                break
            mu *= 4.0
        if not improved:
            return LMResult(p, cost, n_iter, cost == 0.0 or _small(step, p, scale, xtol),
                            "no decrease along damped step")
        rel = _rel_step(step, p, scale)
        p, r, cost = p_new, r_new, cost_new
        mu = max(mu / 3.0, 1e-12)
        if rel < xtol or cost == 0.0:
            return LMResult(p, cost, n_iter, True, "relative step below tolerance")
    return LMResult(p, cost, n_iter, False, "iteration limit reached")


def _rel_step(step: np.ndarray, p: np.ndarray, scale: np.ndarray) -> float:
    return float(np.max(np.abs(step) / np.maximum(np.abs(p), scale)))


def _small(step, p, scale, xtol) -> bool:
    return _rel_step(step, p, scale) < xtol * 10
