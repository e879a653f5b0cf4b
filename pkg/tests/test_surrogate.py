import json
import math
from importlib import resources

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import frozen, quad_surrogate_brute, sellmeier_limit_mp, sellmeier_mp, standin_lambda_mp
from qmc_metrology.errors import (
    InvalidValue,
    NoSignChange,
    NonMonotoneOnBracket,
    OutOfValidityBox,
    OutOfValidityRange,
    PoleProximity,
    RankDeficient,
    TooFewSamples,
)
from qmc_metrology.surrogate import (
    DIAMOND,
    CalibrationSample,
    SurrogateModel,
    default_from_standin,
    fit_surrogate,
    invert_for_thickness,
    invert_many,
    linear_inverse,
    load_default_model,
    sellmeier_n,
    standin_lambda_nm,
    surrogate_eval,
)

REF = (0.330, 0.045, 0.129)
LIN = SurrogateModel(REF, 633.2, (200.0, -450.0, 750.0))
QUAD = SurrogateModel(REF, 633.2, (200.0, -450.0, 750.0), (120.0, -300.0, 900.0, 50.0, -80.0, 40.0))


# ---------------------------------------------------------------- Sellmeier


def test_sellmeier_620():
    n = sellmeier_n(0.620)
    assert abs(n / 2.424 - 1) < 0.005
    assert n == pytest.approx(frozen()["sellmeier"]["n_0p620"], rel=1e-14)


def test_sellmeier_one_micron_and_limit():
    assert sellmeier_n(1.0) == pytest.approx(frozen()["sellmeier"]["n_1p000"], rel=1e-14)
    assert round(sellmeier_n(1.0), 4) == 2.3929
    assert DIAMOND.long_wavelength_limit == pytest.approx(frozen()["sellmeier"]["limit"], rel=1e-15)
    with pytest.raises(OutOfValidityRange):
        sellmeier_n(100.0)


def test_sellmeier_monotone_grid():
    n = np.array([sellmeier_n(v) for v in np.linspace(0.23, 5.0, 1000)])
    assert np.all(np.diff(n) < 0) and np.all(n > 1)
    assert n[-1] > DIAMOND.long_wavelength_limit


@given(st.floats(0.23, 5.0))
def test_sellmeier_matches_mpmath(lam):
    assert sellmeier_n(lam) == pytest.approx(float(sellmeier_mp(repr(lam))), rel=1e-13)


def test_pole_proximity():
    from qmc_metrology.surrogate import SellmeierParams

    p = SellmeierParams(valid_um=(0.1, 5.0))
    with pytest.raises(PoleProximity):
        sellmeier_n(0.175, p)
    with pytest.raises(InvalidValue):
        SellmeierParams(C1=0.0)


# ---------------------------------------------------------------- evaluation


def test_eval_at_reference_and_linear_step():
    assert surrogate_eval(LIN, *REF) == 633.2
    assert surrogate_eval(LIN, 0.330, 0.045, 0.139) == pytest.approx(633.2 + 7.5, abs=1e-12)


def test_quadratic_matches_brute_force():
    rng = np.random.default_rng(0)
    W = rng.uniform(0.25, 0.45, 100)
    r = rng.uniform(0.02, 0.08, 100)
    t = rng.uniform(0.05, 0.25, 100)
    got = surrogate_eval(QUAD, W, r, t)
    for i in range(100):
        ref = quad_surrogate_brute(REF, 633.2, QUAD.linear, QUAD.quadratic, W[i], r[i], t[i])
        assert abs(got[i] - ref) <= 1e-12 * abs(ref)


def test_box_and_model_validation():
    with pytest.raises(OutOfValidityBox):
        surrogate_eval(LIN, 0.5, 0.045, 0.129)
    with pytest.raises(InvalidValue):
        SurrogateModel(REF, 633.2, (200.0, -450.0, 0.0))
    with pytest.raises(InvalidValue):
        SurrogateModel(REF, 633.2, (1.0, 1.0, 1.0), validity_um=((0.3, 0.3), (0.0, 1.0), (0.0, 1.0)))


def test_json_round_trip(tmp_path):
    QUAD.save(tmp_path / "m.json")
    back = SurrogateModel.load(tmp_path / "m.json")
    assert back.to_dict() == QUAD.to_dict()
    assert surrogate_eval(back, 0.31, 0.05, 0.14) == surrogate_eval(QUAD, 0.31, 0.05, 0.14)


# ---------------------------------------------------------------- fitting


def _samples(model, n=60, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        W, r, t = rng.uniform(0.28, 0.38), rng.uniform(0.03, 0.06), rng.uniform(0.09, 0.17)
        out.append(CalibrationSample(W, r, t, float(surrogate_eval(model, W, r, t))))
    return out


def test_exact_linear_recovery():
    m = fit_surrogate(_samples(LIN))
    assert m.residual_rms_nm < 1e-10
    assert np.allclose(m.linear, LIN.linear, rtol=1e-10)
    assert surrogate_eval(m, *REF) == pytest.approx(633.2, rel=1e-12)


def test_exact_quadratic_recovery():
    m = fit_surrogate(_samples(QUAD), order="quadratic")
    for W, r, t in [(0.3, 0.04, 0.1), (0.36, 0.055, 0.16)]:
        assert surrogate_eval(m, W, r, t) == pytest.approx(surrogate_eval(QUAD, W, r, t), rel=1e-10)


def test_linear_fit_of_quadratic_data_residual():
    samples = _samples(QUAD, n=80, seed=2)
    m = fit_surrogate(samples, order="linear")
    X = np.array([[1.0, s.W_um, s.r_um, s.t_um] for s in samples])
    y = np.array([s.lambda_nm for s in samples])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    oracle = math.sqrt(np.mean((X @ coef - y) ** 2))
    assert oracle > 0 and m.residual_rms_nm == pytest.approx(oracle, rel=1e-8)


def test_fit_errors():
    one = [CalibrationSample(0.33, 0.045, 0.129, 633.2)] * 10
    with pytest.raises(RankDeficient):
        fit_surrogate(one)
    with pytest.raises(TooFewSamples):
        fit_surrogate(_samples(LIN, n=7))


@given(st.randoms(use_true_random=False))
def test_fit_invariant_to_ordering(rnd):
    samples = _samples(QUAD, n=40, seed=4)
    shuffled = list(samples)
    rnd.shuffle(shuffled)
    a, b = fit_surrogate(samples, "quadratic"), fit_surrogate(shuffled, "quadratic")
    assert a.to_dict() == b.to_dict()


# ---------------------------------------------------------------- inversion


def test_linear_inversion_example():
    t = invert_for_thickness(LIN, 0.330, 0.045, 633.2 + 7.5, (0.05, 0.25))
    assert abs(t - 0.139) < 1e-7
    assert abs(t - linear_inverse(LIN, 0.330, 0.045, 640.7)) < 1e-7


@pytest.mark.parametrize("model", [LIN, QUAD], ids=["linear", "quadratic"])
def test_round_trip_thousand(model):
    rng = np.random.default_rng(7)
    W, r, t = rng.uniform(0.28, 0.4, 1000), rng.uniform(0.03, 0.07, 1000), rng.uniform(0.06, 0.24, 1000)
    lam = surrogate_eval(model, W, r, t)
    got, ok = invert_many(model, W, r, lam, (0.05, 0.25))
    assert ok.all()
    assert np.max(np.abs(got - t)) < 1e-7
    assert np.max(np.abs(surrogate_eval(model, W, r, got) - lam)) < 1e-6


def test_no_sign_change_and_nonmonotone():
    with pytest.raises(NoSignChange):
        invert_for_thickness(LIN, 0.33, 0.045, 900.0)
    bent = SurrogateModel(REF, 633.2, (200.0, -450.0, 750.0), (0.0, 0.0, -6196.0, 0.0, 0.0, 0.0))
    with pytest.raises(NonMonotoneOnBracket):
        invert_for_thickness(bent, 0.33, 0.045, 633.2)


# ---------------------------------------------------------------- default calibration


def test_default_sensitivity_signs():
    m = load_default_model()
    cW, cr, ct = m.linear
    assert ct > 0 and cW > 0 and cr < 0
    assert "not simulation-derived" in m.provenance


def test_default_matches_regeneration():
    shipped = json.loads(resources.files("qmc_metrology").joinpath("data/default_calibration.json").read_text())
    assert default_from_standin().to_dict() == shipped


def test_standin_gradient_against_mpmath():
    g = frozen()["standin_gradient_nm_per_um"]
    m = load_default_model()
    for got, key in zip(m.linear, ("cW", "cr", "ct")):
        assert got == pytest.approx(g[key], rel=1e-6)


@given(st.floats(0.26, 0.44), st.floats(0.025, 0.075), st.floats(0.06, 0.24))
def test_standin_reimplementation(W, r, t):
    assert standin_lambda_nm(W, r, t) == pytest.approx(float(standin_lambda_mp(repr(W), repr(r), repr(t))), rel=1e-13)
