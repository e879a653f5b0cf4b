import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmc_metrology.core import Spectrum
from qmc_metrology.errors import InvalidValue, WindowTooSmall
from qmc_metrology.spectral.lineshapes import fano, fit_fano, fit_lorentzian, lorentzian
from qmc_metrology.spectral.peaks import PeakCandidate, find_peaks
from qmc_metrology.synthetic import fano_spectrum, lorentzian_spectrum, wavelength_axis


def _fit_first(s, half=1.0, fano_fit=False):
    p = find_peaks(s)[0]
    f = fit_fano if fano_fit else fit_lorentzian
    return f(s, (p.center_nm - half, p.center_nm + half), p)


def test_noiseless_lorentzian_recovery():
    x = wavelength_axis(618.5, 620.5, 801)
    s = lorentzian_spectrum(x, [(619.5, 0.124, 100.0)], offset=1.0)
    fit = _fit_first(s)
    assert fit.converged
    assert abs(fit.center_nm - 619.5) / 619.5 < 1e-6
    assert abs(fit.fwhm_nm - 0.124) / 0.124 < 1e-6
    assert abs(fit.Q - 4996.0) < 0.1
    assert fit.Q == fit.center_nm / fit.fwhm_nm
    assert fit.residual_rms < 1e-8 * fit.amplitude


def test_noisy_lorentzian_statistics():
    x = wavelength_axis(618.5, 620.5, 801)
    dl, dq = [], []
    for k in range(50):
        rng = np.random.default_rng(100 + k)
        s = lorentzian_spectrum(x, [(619.5, 0.124, 100.0)], offset=1.0, noise_std=5.0, rng=rng)
        fit = _fit_first(s)
        dl.append(abs(fit.center_nm - 619.5))
        dq.append(abs(fit.Q - 4996.0) / 4996.0)
    assert np.median(dl) < 0.02
    assert np.median(dq) < 0.05


def test_flat_input_flags_nonconvergence():
    x = wavelength_axis(619.0, 621.0, 101)
    s = Spectrum(x, np.full(x.size, 2.0))
    init = PeakCandidate(620.0, 0.0, 0.2, 2.0)
    assert not fit_lorentzian(s, (619.5, 620.5), init).converged


def test_window_checks():
    x = wavelength_axis(619.0, 621.0, 101)
    s = lorentzian_spectrum(x, [(620.0, 0.2, 10.0)])
    init = PeakCandidate(620.0, 10.0, 0.2, 10.0)
    with pytest.raises(WindowTooSmall):
        fit_lorentzian(s, (620.0, 620.05), init)
    with pytest.raises(InvalidValue):
        fit_lorentzian(s, (619.0, 619.5), init)


def test_fano_recovery():
    x = wavelength_axis(620.0, 630.0, 2001)
    s = fano_spectrum(x, 625.0, 0.735, 2.0, 10.0, 5.0)
    init = PeakCandidate(625.0, 1.0, 0.7, float(s.intensity.max()))
    fit = fit_fano(s, (621.0, 629.0), init)
    for got, want in ((fit.center_nm, 625.0), (fit.fwhm_nm, 0.735), (fit.q, 2.0), (fit.amplitude, 10.0)):
        assert abs(got - want) / want < 1e-4
    assert abs(fit.Q - 850.3) < 1.0
    assert fit.residual_rms < 1e-8 * fit.amplitude


def test_fano_symmetric_dip():
    x = wavelength_axis(620.0, 630.0, 2001)
    s = fano_spectrum(x, 625.0, 0.735, 0.0, 10.0, 1.0)
    init = PeakCandidate(625.0, 1.0, 0.7, float(s.intensity.max()))
    fit = fit_fano(s, (621.0, 629.0), init)
    assert abs(fit.q) < 1e-3
    assert abs(fit.center_nm - 625.0) < 1e-6


def test_fano_lorentzian_limit():
    q = 1e6
    x = wavelength_axis(624.0, 626.0, 801)
    s = fano_spectrum(x, 625.0, 0.2, q, 50.0 / q**2, 1.0)
    p = find_peaks(s)[0]
    lo = fit_lorentzian(s, (624.2, 625.8), p)
    fa = fit_fano(s, (624.2, 625.8), p)
    assert abs(fa.center_nm - lo.center_nm) / lo.center_nm < 5e-3
    assert abs(fa.Q - lo.Q) / lo.Q < 5e-3


@given(st.floats(5.0, 500.0), st.floats(-1e-3, 1e-3))
def test_fano_tends_to_lorentzian_shape(aq2, x_shift):
    # fixed A q^2; as q grows the Fano profile converges to a Lorentzian peak of height A q^2
    x = np.linspace(-1.0, 1.0, 41) + x_shift
    target = lorentzian(x, 0.0, 0.3, aq2, 0.0)
    errs = [np.max(np.abs(fano(x, 0.0, 0.3, q, aq2 / q**2, 0.0) - target)) for q in (1e2, 1e3, 1e4)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3 * aq2


@given(st.floats(615.0, 625.0), st.floats(0.05, 0.5), st.floats(1.0, 1000.0))
def test_q_identity_as_stored(c, g, a):
    x = np.linspace(c - 5 * g, c + 5 * g, 401)
    s = Spectrum(x, lorentzian(x, c, g, a, 0.5))
    fit = fit_lorentzian(s, (x[0], x[-1]), PeakCandidate(c, a, g, a + 0.5))
    assert fit.Q == fit.center_nm / fit.fwhm_nm
    assert fit.residual_rms < 1e-8 * a
