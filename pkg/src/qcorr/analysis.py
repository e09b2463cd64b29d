"""Closed-form correlation predictors and spectral analysis of delay traces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import curve_fit

from .linalg import anticommutator, commutator

# Prefactor of the short-window QC formula, fixed by the oracle calibration
# (qcorr.oracle.calibrate_eq3_constant returns 1.000 +- 1e-3).  It also
# sets the bath-trace normalisation of the commutator/anticommutator
# predictors: S = (-i/2) Tr_B{[phi2, phi1] rho_B} with a plain trace.
EQ3_CONSTANT = 1.0

WINDOWS = ("rect", "hann")


@dataclass(frozen=True, eq=False)
class CorrelationTrace:
    delays: np.ndarray
    values: np.ndarray
    stderrs: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("delays", "values", "stderrs"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.delays.shape == self.values.shape == self.stderrs.shape) or self.delays.ndim != 1:
            raise ValueError("delays, values and stderrs must be 1-d and equally long")
        if np.any(np.diff(self.delays) <= 0):
            raise ValueError("delays must be strictly increasing")

    def __len__(self) -> int:
        return len(self.delays)


@dataclass(frozen=True, eq=False)
class Spectrum:
    freqs: np.ndarray
    amplitudes: np.ndarray
    resolution: float
    # DFT phase referenced to delay 0: cos -> 0, sin -> -pi/2
    phases: np.ndarray | None = None
    n_samples: int | None = None

    def __len__(self) -> int:
        return len(self.freqs)


@dataclass(frozen=True)
class Peak:
    freq: float
    amplitude: float
    distinct: bool


def _phase_ops(sys, t_interr, t1, t2):
    from .spins import phase_operator

    return (
        phase_operator(sys, t_interr, t2 + t_interr / 2),
        phase_operator(sys, t_interr, t1 + t_interr / 2),
    )


def _real_trace(z: complex) -> float:
    if abs(z.imag) > 1e-12 * max(1.0, abs(z)):
        raise ArithmeticError(f"expectation has imaginary part {z.imag:.3e}")
    return float(z.real)


def predict_qc_eq1(sys, t_interr: float, t1: float, t2: float) -> float:
    """QC signal from the commutator of the two window phase operators.

    ``t1`` and ``t2`` are window start times; each phase operator is taken at
    its window midpoint.
    """
    phi2, phi1 = _phase_ops(sys, t_interr, t1, t2)
    z = -0.5j * EQ3_CONSTANT * np.trace(commutator(phi2, phi1) @ sys.rho_bath)
    return _real_trace(z)


def predict_cc_eq2(sys, t_interr: float, t1: float, t2: float) -> float:
    """CC signal from the anticommutator of the two window phase operators."""
    phi2, phi1 = _phase_ops(sys, t_interr, t1, t2)
    z = 0.5 * EQ3_CONSTANT * np.trace(anticommutator(phi2, phi1) @ sys.rho_bath)
    return _real_trace(z)


def predict_qc_eq3(a_perp, t_interr, p_z, omega, delay):
    """Short-window QC signal of one polarized spin-1/2."""
    return EQ3_CONSTANT * (a_perp**2 * t_interr**2 / 4) * p_z * np.sin(omega * np.asarray(delay))


def delay_step(delays) -> float:
    delays = np.asarray(delays, dtype=float)
    if len(delays) < 2:
        raise ValueError("need at least two delays")
    steps = np.diff(delays)
    if np.max(np.abs(steps - steps.mean())) > 1e-9 * abs(steps.mean()):
        raise ValueError("delay grid is not uniform")
    return float(steps.mean())


def spectrum(trace: CorrelationTrace, window: str = "rect") -> Spectrum:
    """One-sided DFT magnitude of a mean-removed trace.

    Amplitudes are normalised to the window's coherent gain, so a sinusoid of
    amplitude ``a`` centred on a bin reads ``a`` for either window.
    """
    if window not in WINDOWS:
        raise ValueError(f"unknown window {window!r}")
    step = delay_step(trace.delays)
    n = len(trace)
    w = np.hanning(n) if window == "hann" else np.ones(n)
    x = (trace.values - trace.values.mean()) * w
    coeffs = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, step)
    scale = np.full(len(freqs), 2.0 / w.sum())
    scale[0] = 1.0 / w.sum()
    if n % 2 == 0:
        scale[-1] = 1.0 / w.sum()
    coeffs = coeffs * np.exp(-2j * np.pi * freqs * trace.delays[0])
    return Spectrum(freqs, np.abs(coeffs) * scale, 1.0 / (n * step), np.angle(coeffs), n)


def spectral_energy(spec: Spectrum) -> float:
    """Mean square of the mean-removed rect-window trace, rebuilt from ``spec``."""
    if spec.n_samples is None:
        raise ValueError("spectrum does not record its sample count")
    weights = np.full(len(spec), 0.5)
    weights[0] = 1.0
    if spec.n_samples % 2 == 0:
        weights[-1] = 1.0
    return float(np.sum(weights * spec.amplitudes**2))


def band_mask(spec: Spectrum, band) -> np.ndarray:
    lo, hi = band
    if lo > hi:
        raise ValueError("band must be (low, high)")
    return (spec.freqs >= lo) & (spec.freqs <= hi)


def band_power(spec: Spectrum, band) -> float:
    """Sum of squared amplitudes over the bins inside ``band``."""
    return float(np.sum(spec.amplitudes[band_mask(spec, band)] ** 2))


def find_peak(spec: Spectrum, band=None) -> Peak:
    """Largest bin in ``band`` with three-point parabolic refinement.

    Ties go to the lowest frequency.  ``distinct`` is False when the maximum
    is below twice the band median, i.e. nothing stands out of the floor.
    """
    if band is None:
        band = (spec.freqs[0], spec.freqs[-1])
    lo, hi = band
    if lo < spec.freqs[0] - 1e-9 * spec.resolution or hi > spec.freqs[-1] + 1e-9 * spec.resolution:
        raise ValueError("band extends outside the spectrum")
    idx = np.flatnonzero(band_mask(spec, band))
    if idx.size == 0:
        raise ValueError("no spectral bins inside band")
    amps = spec.amplitudes[idx]
    k = int(idx[np.argmax(amps)])
    a = spec.amplitudes
    freq = float(spec.freqs[k])
    if 0 < k < len(a) - 1:
        denom = a[k - 1] - 2 * a[k] + a[k + 1]
        if denom < 0:
            freq += 0.5 * (a[k - 1] - a[k + 1]) / denom * spec.resolution
    distinct = bool(a[k] >= 2 * np.median(amps) and a[k] > 0)
    return Peak(freq, float(a[k]), distinct)


def fit_sinusoid(delays, values, freq_guess: float):
    """Least-squares ``a sin(2 pi f t) + b cos(2 pi f t) + c``; returns ``(freq, amplitude, phase)``.

    ``phase`` is that of ``amplitude * cos(2 pi f t + phase)``.
    """
    t = np.asarray(delays, dtype=float)
    y = np.asarray(values, dtype=float)

    def model(t, f, a, b, c):
        arg = 2 * np.pi * f * t
        return a * np.sin(arg) + b * np.cos(arg) + c

    # linear solve at the guess gives good starting amplitudes
    arg = 2 * np.pi * freq_guess * t
    design = np.column_stack([np.sin(arg), np.cos(arg), np.ones_like(t)])
    p_lin = np.linalg.lstsq(design, y, rcond=None)[0]
    popt, _ = curve_fit(model, t, y, p0=[freq_guess, *p_lin], maxfev=20000)
    f, a, b, _ = popt
    return float(f), float(np.hypot(a, b)), float(np.arctan2(-a, b))
