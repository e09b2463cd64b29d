import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcorr.analysis import (
    CorrelationTrace,
    Spectrum,
    band_power,
    find_peak,
    fit_sinusoid,
    predict_cc_eq2,
    predict_qc_eq1,
    predict_qc_eq3,
    spectral_energy,
    spectrum,
)
from qcorr.protocol import build_cc_sequence, build_qc_sequence, sweep_delay
from qcorr.spins import build_bath

TWO_PI = 2 * np.pi


def tone_trace(freq, amp, n=128, step=1e-6, phase=0.0, start=0.0):
    d = start + step * np.arange(n)
    return CorrelationTrace(d, amp * np.cos(TWO_PI * freq * d + phase), np.zeros(n))


def test_trace_validation():
    with pytest.raises(ValueError):
        CorrelationTrace([0.0, 1.0], [1.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        CorrelationTrace([1.0, 0.0], [1.0, 2.0], [0.0, 0.0])


def test_qc_predictor_closed_form(bare_spin):
    (p,) = bare_spin.params
    t, t2 = 0.3e-6, 2.2e-6
    expected = (p.a_perp * t) ** 2 / 4 * p.p_z * np.sin(p.omega * t2)
    assert predict_qc_eq1(bare_spin, t, 0.0, t2) == pytest.approx(expected, rel=1e-10)
    assert predict_qc_eq3(p.a_perp, t, p.p_z, p.omega, t2) == pytest.approx(expected, rel=1e-12)


def test_predictor_exchange_symmetry(carbon):
    t, t1, t2 = 0.2e-6, 0.4e-6, 3.3e-6
    assert predict_qc_eq1(carbon, t, t2, t1) == pytest.approx(-predict_qc_eq1(carbon, t, t1, t2), rel=1e-12)
    assert predict_cc_eq2(carbon, t, t2, t1) == pytest.approx(predict_cc_eq2(carbon, t, t1, t2), rel=1e-12)


def test_scalar_shift_leaves_qc_unchanged(carbon):
    shifted = carbon.with_coupling(carbon.b_op + 3e5 * np.eye(2))
    t, t2 = 0.2e-6, 1.7e-6
    assert predict_qc_eq1(shifted, t, 0.0, t2) == pytest.approx(predict_qc_eq1(carbon, t, 0.0, t2), rel=1e-10)
    assert abs(predict_cc_eq2(shifted, t, 0.0, t2) - predict_cc_eq2(carbon, t, 0.0, t2)) > 1e-4


def test_spectrum_reads_tone_amplitude():
    n, step = 128, 1e-6
    f = 10 / (n * step)
    # np.hanning is the symmetric window, which leaks slightly even on a bin
    for window, rel in (("rect", 1e-10), ("hann", 1e-4)):
        spec = spectrum(tone_trace(f, 0.3), window)
        peak = find_peak(spec)
        assert peak.freq == pytest.approx(f)
        assert peak.amplitude == pytest.approx(0.3, rel=rel)
        assert peak.distinct


def test_spectrum_needs_uniform_grid():
    tr = CorrelationTrace([0.0, 1.0, 3.0], [0.0, 1.0, 0.0], [0.0] * 3)
    with pytest.raises(ValueError):
        spectrum(tr)
    with pytest.raises(ValueError):
        spectrum(tone_trace(1e4, 1.0), "kaiser")


@settings(max_examples=25, deadline=None)
@given(st.integers(8, 200), st.integers(0, 2**32 - 1))
def test_parseval(n, seed):
    values = np.random.default_rng(seed).normal(size=n)
    spec = spectrum(CorrelationTrace(np.arange(n) * 1e-6, values, np.zeros(n)))
    assert spectral_energy(spec) == pytest.approx(np.mean((values - values.mean()) ** 2), rel=1e-9)


def test_peak_tie_goes_to_lower_frequency():
    spec = Spectrum(np.arange(6.0), np.array([0.0, 1.0, 0.0, 0.0, 1.0, 0.0]), 1.0)
    assert find_peak(spec).freq == 1.0


def test_two_tones_with_bands():
    n, step = 256, 1e-6
    f1, f2 = 20 / (n * step), 70 / (n * step)
    d = step * np.arange(n)
    tr = CorrelationTrace(d, 1.0 * np.sin(TWO_PI * f1 * d) + 0.4 * np.sin(TWO_PI * f2 * d), np.zeros(n))
    spec = spectrum(tr)
    assert find_peak(spec).freq == pytest.approx(f1)
    assert find_peak(spec, (50 / (n * step), 100 / (n * step))).freq == pytest.approx(f2)
    assert band_power(spec, (f2 - 1, f2 + 1)) == pytest.approx(0.16, rel=1e-9)
    with pytest.raises(ValueError):
        find_peak(spec, (0, 1e9))


def test_flat_spectrum_has_no_distinct_peak():
    spec = Spectrum(np.arange(10.0), np.ones(10), 1.0)
    assert not find_peak(spec).distinct


def test_fit_sinusoid_recovers_parameters():
    d = 1e-6 * np.arange(200)
    y = 0.02 * np.cos(TWO_PI * 31.3e3 * d + 0.7) + 0.001
    f, a, ph = fit_sinusoid(d, y, 30e3)
    assert f == pytest.approx(31.3e3, rel=1e-8)
    assert a == pytest.approx(0.02, rel=1e-8)
    assert ph == pytest.approx(0.7, abs=1e-8)


def test_qc_and_cc_in_quadrature():
    n, step, t = 64, 0.25e-6, 0.05e-6
    f = 9 / (n * step)
    sys = build_bath(TWO_PI * f, 0.0, TWO_PI * 40e3, 1.0)
    delays = t + step * np.arange(n)
    qc = spectrum(sweep_delay(build_qc_sequence, sys, None, delays, t))
    cc = spectrum(sweep_delay(build_cc_sequence, sys, None, delays, t))
    k = int(np.argmin(np.abs(qc.freqs - f)))
    # QC ~ sin(omega delay), CC ~ cos(omega delay)
    assert np.cos(qc.phases[k]) == pytest.approx(0.0, abs=0.02)
    assert abs(np.cos(cc.phases[k])) == pytest.approx(1.0, abs=0.02)
