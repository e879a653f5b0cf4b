"""Q extraction from field ringdown by the matrix-pencil form of Prony's method.

The record is modelled as ``sum_k a_k exp((i 2 pi f_k - gamma_k) n dt)``.
For a field amplitude decaying as ``exp(-gamma t)`` the stored energy decays
at ``2 gamma``, hence ``Q = 2 pi f / (2 gamma) = pi f / gamma``.

Optical ringdowns spanning many decay times hold far more carrier cycles than
samples, so records are usually demodulated first: pass the complex baseband
``E(t) exp(-i 2 pi f_c t)`` together with ``carrier_frequency=f_c`` and the
reported frequencies are shifted back by ``f_c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import AllModesUnresolved, InvalidValue, TooFewSamples

SV_THRESHOLD = 1e-8
UNRESOLVED_DECAY = 1e-6


@dataclass(frozen=True)
class RingdownMode:
    frequency: float
    decay_rate: float
    amplitude: float
    phase: float
    resolved: bool

    @property
    def Q(self) -> float:
        if not self.resolved:
            return float("inf")
        return float(np.pi * self.frequency / self.decay_rate)


@dataclass(frozen=True)
class RingdownModes:
    modes: list[RingdownMode] = field(default_factory=list)
    model_order: int = 0
    singular_values: np.ndarray | None = None

    @property
    def resolved(self) -> list[RingdownMode]:
        return [m for m in self.modes if m.resolved]

    def __len__(self) -> int:
        return len(self.modes)


def _hankel_r(x: np.ndarray, pencil: int, block: int = 8192) -> np.ndarray:
    """R factor of the (N-L) x (L+1) Hankel matrix, built block-wise (TSQR)."""
    rows = sliding_window_view(x, pencil + 1)
    R = np.zeros((0, pencil + 1), dtype=x.dtype)
    for start in range(0, rows.shape[0], block):
        stacked = np.vstack([R, rows[start : start + block]])
        R = np.linalg.qr(stacked, mode="r")
    return R


def prony_ringdown_q(
    samples,
    dt: float,
    carrier_frequency: float = 0.0,
    pencil: int | None = None,
    sv_threshold: float = SV_THRESHOLD,
) -> RingdownModes:
    """Decompose a ringdown record into damped exponentials.

    Real input yields conjugate pairs; only the positive-frequency member is
    reported, with amplitude doubled to the physical cosine amplitude.
    Modes whose total decay over the record ``gamma * N * dt`` is below 1e-6
    are kept but flagged unresolved (``Q`` reported as infinity).
    """
    x = np.asarray(samples)
    if x.ndim != 1:
        raise InvalidValue("ringdown samples must be 1-D")
    if not dt > 0:
        raise InvalidValue("dt must be positive", dt=dt)
    is_real = not np.iscomplexobj(x)
    if is_real and carrier_frequency != 0.0:
        raise InvalidValue("a carrier frequency requires complex (demodulated) samples")
    x = x.astype(np.complex128)
    n = x.size
    if n < 8:
        raise TooFewSamples("need at least 8 samples", n=n)
    if not np.any(x):
        raise AllModesUnresolved("record is identically zero")
    L = pencil if pencil is not None else min(n // 3, 128)
    L = int(max(2, min(L, n // 2)))

    scale = np.max(np.abs(x))
    R = _hankel_r(x / scale, L)
    _, s, vh = np.linalg.svd(R)
    order = int(np.sum(s > sv_threshold * s[0]))
    if 4 * order > n:
        raise TooFewSamples("record shorter than 4x the detected model order", n=n, order=order)
    # rows of the Hankel matrix lie in the span of the leading rows of vh
    V = vh[:order].T
    z = np.linalg.eigvals(np.linalg.pinv(V[:-1]) @ V[1:])

    steps = np.arange(n)
    vander = np.exp(np.outer(steps, np.log(z)))
    amps, *_ = np.linalg.lstsq(vander, x, rcond=None)

    s_k = np.log(z) / dt
    gamma = -s_k.real
    freq = s_k.imag / (2 * np.pi)
    record = n * dt
    modes = []
    for f_k, g_k, a_k in zip(freq, gamma, amps):
        if is_real and f_k < 0:
            continue
        amp = abs(a_k) * (2.0 if is_real and f_k > 0 else 1.0)
        resolved = bool(g_k * record >= UNRESOLVED_DECAY)
        modes.append(
            RingdownMode(
                float(f_k + carrier_frequency), float(g_k), float(amp), float(np.angle(a_k)), resolved
            )
        )
    modes.sort(key=lambda m: -m.amplitude)
    return RingdownModes(modes, order, s)
