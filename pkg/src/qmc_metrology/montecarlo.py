"""Seeded counter-based sampling and the inverse Monte Carlo thickness estimator.

Draw ``j`` of stream ``s`` is a pure function of ``(seed, s, j)``: the Philox
key packs ``seed`` and ``s``, and the counter is ``j // 4`` since each Philox
block yields four 64-bit words. Work is split into 4-aligned chunks so that
any thread count reproduces the same numbers.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

from .core import GaussianSpec
from .errors import InvalidValue, TooManyFailures
from .surrogate import SurrogateModel, _eval_unchecked, invert_many

MASK64 = (1 << 64) - 1
CHUNK = 4096
MAX_FAILED_FRACTION = 0.2

STREAM_W, STREAM_R, STREAM_LAMBDA, STREAM_T = 0, 1, 2, 3


class CounterRNG:
    """Random access generator over one ``(seed, stream)`` pair."""

    def __init__(self, seed: int, stream: int = 0):
        if not (0 <= seed <= MASK64 and 0 <= stream <= MASK64):
            raise InvalidValue("seed and stream must be unsigned 64-bit integers")
        self.seed = int(seed)
        self.stream = int(stream)
        self._key = self.seed | (self.stream << 64)

    def raw(self, start: int, count: int) -> np.ndarray:
        """64-bit words ``start .. start + count - 1``."""
        if start < 0 or count < 0:
            raise InvalidValue("start and count must be non-negative")
        block, skip = divmod(start, 4)
        gen = Philox(key=self._key, counter=block)
        return gen.random_raw(skip + count)[skip:]

    def uniform(self, start: int, count: int) -> np.ndarray:
        """Open-interval uniforms on (0, 1) with 53-bit resolution."""
        return ((self.raw(start, count) >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53

    def normal(self, start: int, count: int, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        return mean + std * ndtri(self.uniform(start, count))

    def integers(self, start: int, count: int, n: int) -> np.ndarray:
        """Indices in ``[0, n)`` by scaling a uniform."""
        return np.minimum((self.uniform(start, count) * n).astype(np.int64), n - 1)


def seeded_rng(seed: int, stream: int = 0) -> CounterRNG:
    return CounterRNG(seed, stream)


def configured_threads(n_threads: int | None = None) -> int:
    if n_threads is not None:
        return max(1, int(n_threads))
    env = os.environ.get("QMC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidValue(f"QMC_THREADS must be an integer, got {env!r}") from None
    return max(1, os.cpu_count() or 1)


def _chunks(n: int, size: int = CHUNK):
    if size % 4:
        raise InvalidValue("chunk size must be a multiple of 4")
    return [(a, min(a + size, n)) for a in range(0, n, size)]


def _map_chunks(fn, n: int, n_threads: int | None):
    chunks = _chunks(n)
    k = configured_threads(n_threads)
    if k == 1 or len(chunks) == 1:
        parts = [fn(a, b) for a, b in chunks]
    else:
        with ThreadPoolExecutor(max_workers=k) as pool:
            parts = list(pool.map(lambda ab: fn(*ab), chunks))
    return parts


# ---------------------------------------------------------------- inputs


@dataclass(frozen=True)
class InverseMcInputs:
    W_um: GaussianSpec
    r_um: GaussianSpec
    lambda_nm: GaussianSpec | np.ndarray
    n_mc: int = 10_000
    seed: int = 0
    bracket_um: tuple[float, float] = (0.05, 0.25)

    def __post_init__(self):
        if self.n_mc < 100:
            raise InvalidValue("n_mc must be >= 100", n_mc=self.n_mc)
        if not isinstance(self.lambda_nm, GaussianSpec):
            lam = np.asarray(self.lambda_nm, dtype=np.float64).ravel()
            if lam.size == 0:
                raise InvalidValue("empirical wavelength set is empty")
            if not np.all(np.isfinite(lam)):
                raise InvalidValue("empirical wavelengths must be finite")
            lam.setflags(write=False)
            object.__setattr__(self, "lambda_nm", lam)
        if not 0 <= self.seed <= MASK64:
            raise InvalidValue("seed must be an unsigned 64-bit integer")

    @property
    def lambda_mode(self) -> str:
        return "gaussian" if isinstance(self.lambda_nm, GaussianSpec) else "empirical"


def _spec(d, name) -> GaussianSpec:
    try:
        return GaussianSpec(float(d["mean"]), float(d["std"]))
    except (KeyError, TypeError):
        raise InvalidValue(f"{name} needs 'mean' and 'std'") from None


def inputs_from_job(job: dict, base_dir: str | Path = ".", seed: int | None = None) -> InverseMcInputs:
    """Build inputs from a JSON job mapping.

    ``lambda_nm`` is either ``{"mean", "std"}``, ``{"empirical": [...]}`` or
    ``{"empirical_csv": path}`` (a column named ``lambda_nm`` or the first).
    """
    from .io_formats import read_table

    lam = job.get("lambda_nm")
    if not isinstance(lam, dict):
        raise InvalidValue("job needs a 'lambda_nm' object")
    if "empirical" in lam:
        lam_v = np.asarray(lam["empirical"], dtype=np.float64)
    elif "empirical_csv" in lam:
        table = read_table(Path(base_dir) / lam["empirical_csv"])
        col = "lambda_nm" if "lambda_nm" in table.names else table.names[0]
        lam_v = np.asarray([v for v in table.columns[col] if v is not None], dtype=np.float64)
    else:
        lam_v = _spec(lam, "lambda_nm")
    if seed is None:
        if "seed" not in job:
            raise InvalidValue("a seed is required (job 'seed' or --seed)")
        seed = int(job["seed"])
    return InverseMcInputs(
        _spec(job.get("W_um", {}), "W_um"),
        _spec(job.get("r_um", {}), "r_um"),
        lam_v,
        int(job.get("n_mc", 10_000)),
        int(seed),
        tuple(job.get("bracket_um", (0.05, 0.25))),
    )


def load_job(path: str | Path, seed: int | None = None) -> InverseMcInputs:
    p = Path(path)
    try:
        job = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidValue(f"job file is not valid JSON: {exc}") from None
    return inputs_from_job(job, p.parent, seed)


# ---------------------------------------------------------------- estimator


@dataclass(frozen=True)
class ThicknessDistribution:
    samples: np.ndarray
    t_bar_um: float
    sigma_t_um: float
    n_failed: int
    seed: int
    n_mc: int = 0
    lambda_mode: str = "gaussian"
    extras: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "t_bar_um": self.t_bar_um,
            "sigma_t_um": self.sigma_t_um,
            "n_failed": self.n_failed,
            "n_mc": self.n_mc,
            "lambda_mode": self.lambda_mode,
            "seed": self.seed,
        }


def _draw_geometry(inputs: InverseMcInputs, a: int, b: int):
    n = b - a
    W = CounterRNG(inputs.seed, STREAM_W).normal(a, n, inputs.W_um.mean, inputs.W_um.std)
    r = CounterRNG(inputs.seed, STREAM_R).normal(a, n, inputs.r_um.mean, inputs.r_um.std)
    return W, r


def _draw_lambda(inputs: InverseMcInputs, a: int, b: int):
    rng = CounterRNG(inputs.seed, STREAM_LAMBDA)
    if isinstance(inputs.lambda_nm, GaussianSpec):
        return rng.normal(a, b - a, inputs.lambda_nm.mean, inputs.lambda_nm.std)
    emp = inputs.lambda_nm
    return emp[rng.integers(a, b - a, emp.size)]


def _in_box(model: SurrogateModel, W, r):
    (wl, wh), (rl, rh), _ = model.validity_um
    return (W >= wl) & (W <= wh) & (r >= rl) & (r <= rh)


def _mean_std(x: np.ndarray) -> tuple[float, float]:
    vals = x.tolist()
    n = len(vals)
    if n == 0:
        return float("nan"), float("nan")
    mean = math.fsum(vals) / n
    if n < 2:
        return mean, float("nan")
    return mean, math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (n - 1))


def run_inverse_mc(
    model: SurrogateModel, inputs: InverseMcInputs, n_threads: int | None = None
) -> ThicknessDistribution:
    """Propagate W, r and wavelength scatter to thickness by repeated inversion.

    Draws outside the surrogate's validity box and wavelengths not attainable
    on the bracket count as failures and are left out of the statistics.
    """
    W0, r0, _ = model.reference_um

    def work(a: int, b: int):
        W, r = _draw_geometry(inputs, a, b)
        lam = _draw_lambda(inputs, a, b)
        inside = _in_box(model, W, r)
        t, ok = invert_many(model, np.where(inside, W, W0), np.where(inside, r, r0), lam, inputs.bracket_um)
        return np.where(inside & ok, t, np.nan)

    t = np.concatenate(_map_chunks(work, inputs.n_mc, n_threads))
    good = t[np.isfinite(t)]
    n_failed = int(inputs.n_mc - good.size)
    if n_failed > MAX_FAILED_FRACTION * inputs.n_mc:
        raise TooManyFailures(
            f"{n_failed} of {inputs.n_mc} inversions failed", n_failed=n_failed, seed=inputs.seed
        )
    mean, std = _mean_std(good)
    return ThicknessDistribution(good, mean, std, n_failed, inputs.seed, inputs.n_mc, inputs.lambda_mode)


def forward_wavelengths(
    model: SurrogateModel,
    t_um: Sequence[float],
    W_um: GaussianSpec,
    r_um: GaussianSpec,
    seed: int,
    n_threads: int | None = None,
) -> np.ndarray:
    """Push known thicknesses through the model with sampled W and r.

    Uses streams distinct from :func:`run_inverse_mc` so the forward and
    inverse geometry draws are independent even under the same seed.
    """
    t = np.asarray(t_um, dtype=np.float64)

    def work(a: int, b: int):
        n = b - a
        W = CounterRNG(seed, STREAM_T + 1).normal(a, n, W_um.mean, W_um.std)
        r = CounterRNG(seed, STREAM_T + 2).normal(a, n, r_um.mean, r_um.std)
        return _eval_unchecked(model, W, r, t[a:b])

    return np.concatenate(_map_chunks(work, t.size, n_threads))


def stratified_normal(mean: float, std: float, n: int) -> np.ndarray:
    """Midpoint quantiles of ``N(mean, std)``; symmetric, so the mean is exact."""
    u = (np.arange(n) + 0.5) / n
    z = ndtri(u)
    z = 0.5 * (z - z[::-1])
    return mean + std * z
