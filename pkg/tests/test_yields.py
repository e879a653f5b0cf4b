import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmc_metrology.errors import ChipletOutOfRange, InvalidValue
from qmc_metrology.spectral.cavity_map import CavityMap, CavityRecord, ChipletGrid
from qmc_metrology.spectral.lineshapes import LorentzianFit
from qmc_metrology.yields import (
    EffortParams,
    ReplacementParams,
    expected_functional,
    fill_fraction,
    integration_effort,
)

GRID = ChipletGrid(2, 3, 15, 15, 15)


def _rec(chiplet, beam, lam=635.0):
    r, c = chiplet
    return CavityRecord(c * 15 + 3, r * 15 + beam, chiplet, beam, LorentzianFit(lam, 0.15, 1.0, 0.0, 0.0))


def test_effort_example():
    e = integration_effort(EffortParams(100, 10, 120, 1))
    assert e.E == 110 and e.per_chiplet == 110 / 120
    assert round(e.per_chiplet, 4) == 0.9167


def test_effort_large_batch_limit():
    e = integration_effort(EffortParams(100, 10, 120, 10**6))
    assert abs(e.per_chiplet - 10 / 120) < 1e-3


@given(st.integers(1, 10_000))
def test_effort_no_overhead_is_flat(B):
    assert integration_effort(EffortParams(0, 10, 120, B)).per_chiplet == 10 / 120


@given(st.floats(1e-3, 1e4), st.floats(0, 1e3), st.integers(1, 500), st.integers(1, 10_000))
def test_effort_decreasing_and_bounded(E0, Eu, Nc, B):
    a = integration_effort(EffortParams(E0, Eu, Nc, B)).per_chiplet
    b = integration_effort(EffortParams(E0, Eu, Nc, B + 1)).per_chiplet
    assert b < a
    assert b >= Eu / Nc


def test_effort_validation():
    with pytest.raises(InvalidValue):
        EffortParams(-1, 1)
    with pytest.raises(InvalidValue):
        EffortParams(1, 1, Nc=0)
    with pytest.raises(InvalidValue):
        EffortParams(1, 1, B=1.5)


def test_single_attempt():
    out = expected_functional(ReplacementParams(100, 0.8, 0))
    assert out.n_good == pytest.approx(80.0, rel=1e-15)


def test_two_replacements():
    out = expected_functional(ReplacementParams(100, 0.8, 2))
    assert out.residual_defect == pytest.approx(0.008, abs=1e-16)
    assert out.n_good == pytest.approx(99.2, abs=1e-12)


def test_three_replacements():
    assert expected_functional(ReplacementParams(120, 0.6, 3)).n_good == pytest.approx(116.928, abs=1e-12)


@given(st.integers(0, 10_000), st.floats(0, 1), st.integers(0, 20))
def test_replacement_monotone(N, p, r):
    base = expected_functional(ReplacementParams(N, p, r)).n_good
    assert base <= N
    assert expected_functional(ReplacementParams(N, p, r + 1)).n_good >= base
    assert expected_functional(ReplacementParams(N, min(1.0, p + 0.05), r)).n_good >= base


def test_replacement_validation():
    with pytest.raises(InvalidValue):
        ReplacementParams(10, 1.2)
    with pytest.raises(InvalidValue):
        ReplacementParams(10, 0.5, -1)
    with pytest.raises(InvalidValue):
        ReplacementParams(-3, 0.5)


def test_fill_fraction_examples():
    recs = [_rec((0, 1), b) for b in range(9)]
    cmap = CavityMap(recs, GRID)
    assert fill_fraction(cmap, (0, 1)) == 0.6
    assert fill_fraction(cmap, (1, 2)) == 0.0
    double = CavityMap([_rec((1, 0), b, lam) for b in range(15) for lam in (630.0, 640.0)], GRID)
    assert fill_fraction(double, (1, 0)) == 1.0
    with pytest.raises(ChipletOutOfRange):
        fill_fraction(cmap, (2, 0))


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 2), st.integers(0, 14)), max_size=60), st.randoms(use_true_random=False))
def test_fill_fraction_ordering_invariant(keys, rnd):
    recs = [_rec((r, c), b) for r, c, b in keys]
    shuffled = list(recs)
    rnd.shuffle(shuffled)
    for chip in [(r, c) for r in range(2) for c in range(3)]:
        f = fill_fraction(CavityMap(recs, GRID), chip)
        assert f == fill_fraction(CavityMap(shuffled, GRID), chip)
        assert 0.0 <= f <= 1.0
