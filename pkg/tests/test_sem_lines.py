import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import circle_geometric, welsch_line_direct
from qmc_metrology.errors import InvalidValue
from qmc_metrology.sem.holes import gauss_newton_circle, kasa_circle
from qmc_metrology.sem.lines import WELSCH_C_PX, line_separation, welsch_line_fit, welsch_weights


def _data(seed, slope, offset, n=200, noise=0.3):
    rng = np.random.default_rng(seed)
    s = np.linspace(-100, 100, n)
    return s, offset + slope * s + rng.normal(0, noise, n), rng


def test_weights_at_c():
    assert welsch_weights(0.0) == 1.0
    assert welsch_weights(WELSCH_C_PX) == pytest.approx(np.exp(-1.0))


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.floats(-0.05, 0.05), st.floats(-50, 50), st.floats(10.0, 60.0))
def test_outliers_do_not_move_fit(seed, slope, offset, jump):
    s, v, rng = _data(seed, slope, offset)
    clean = welsch_line_fit(s, v)
    bad = v.copy()
    idx = rng.choice(s.size, size=s.size // 5, replace=False)
    # gross outliers at >= 10c, on either side
    bad[idx] += rng.choice([-1.0, 1.0], idx.size) * (10 * WELSCH_C_PX + jump)
    dirty = welsch_line_fit(s, bad)
    assert abs(dirty.offset - clean.offset) < 0.1
    assert abs(dirty.slope - clean.slope) * 100 < 0.1


@pytest.mark.parametrize("seed", range(5))
def test_irls_fixed_point_matches_direct_minimiser(seed):
    s, v, _ = _data(seed, 0.02, 3.0, noise=0.8)
    ir = welsch_line_fit(s, v, tol=1e-12, max_iter=500)
    direct = welsch_line_direct(s, v, start=(ir.offset + 0.05, ir.slope))
    assert abs(ir.offset - direct[0]) < 1e-4
    assert abs(ir.slope - direct[1]) < 1e-6


def test_line_separation_perpendicular():
    s = np.linspace(-10, 10, 50)
    a = welsch_line_fit(s, 1.0 + 0.1 * s)
    b = welsch_line_fit(s, 6.0 + 0.1 * s)
    assert line_separation(a, b) == pytest.approx(5.0 / np.sqrt(1.01), rel=1e-12)


def test_line_input_checks():
    with pytest.raises(InvalidValue):
        welsch_line_fit([1.0], [1.0])
    with pytest.raises(InvalidValue):
        welsch_line_fit([1.0, 2.0], [1.0, 2.0], base_weights=[1.0, -1.0])


def _arc(seed, cx, cy, r, n=80, span=2 * np.pi, noise=0.2):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, span, n, endpoint=False)
    return cx + r * np.cos(t) + rng.normal(0, noise, n), cy + r * np.sin(t) + rng.normal(0, noise, n)


def test_kasa_exact_circle():
    t = np.linspace(0, 2 * np.pi, 30, endpoint=False)
    cx, cy, r = kasa_circle(5 + 22.5 * np.cos(t), -3 + 22.5 * np.sin(t))
    assert (cx, cy, r) == pytest.approx((5.0, -3.0, 22.5), abs=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_gauss_newton_converges_to_geometric_fit(seed):
    x, y = _arc(seed, 10.0, 20.0, 22.5, span=1.5 * np.pi)
    ref = circle_geometric(x, y)
    one = gauss_newton_circle(x, y, *kasa_circle(x, y))
    many = gauss_newton_circle(x, y, *kasa_circle(x, y), steps=30)
    assert np.allclose(many, ref, atol=1e-7)
    assert np.allclose(one, ref, atol=2e-2)
