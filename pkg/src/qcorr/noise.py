"""Classical stochastic fields ``b(t)`` added to the sensor coupling.

Every trajectory is a pure function of ``(seed_base, trajectory_index)``: its
random numbers come from a counter-based Philox stream whose key is the seed
and whose counter block is the trajectory index, so generating trajectories
in any order or on any number of workers gives identical samples.

Kinds
-----
``none``
    ``b = 0``.
``ac``
    ``b(t) = A cos(2 pi f t + phase)`` with a fixed phase.
``random_phase_ac``
    Same tone with the phase drawn uniformly on ``[0, 2 pi)`` per trajectory.
``ou_lorentzian``
    Stationary Ornstein-Uhlenbeck process with standard deviation ``sigma``
    and correlation time ``tau = 1 / (pi * fwhm)``, giving the one-sided
    spectrum ``4 sigma^2 tau / (1 + (2 pi f tau)^2)``.  With
    ``center_freq > 0`` the process is an envelope on the carrier
    ``cos(2 pi f_c t + phase)`` (random phase per trajectory), which moves the
    Lorentzian line to ``f_c``.
``white``
    Independent Gaussian samples of variance ``sigma^2 / dt`` so that
    ``<b(t) b(t')> = sigma^2 delta(t - t')`` in the ``dt -> 0`` limit; held
    constant within each sample interval.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit
from scipy.signal import lfilter

from .analysis import Spectrum

KINDS = ("none", "ac", "random_phase_ac", "ou_lorentzian", "white")

# Philox counter word reserved for each independent use of a trajectory key
NOISE_STREAM = 0
PHASE_STREAM = 1


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "none"
    amplitude: float = 0.0  # rad/s; the standard deviation for ou/white
    frequency: float = 0.0  # Hz, ac kinds
    fwhm: float = 0.0  # Hz, ou_lorentzian
    center_freq: float = 0.0  # Hz, ou_lorentzian carrier (0 = baseband)
    phase: float = 0.0  # rad, fixed phase of the ac kind
    seed_base: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {KINDS}")
        if self.frequency < 0 or self.center_freq < 0:
            raise ValueError("noise frequencies must be >= 0")
        if self.kind == "ou_lorentzian" and not self.fwhm > 0:
            raise ValueError("ou_lorentzian noise needs fwhm > 0")
        if not 0 <= self.seed_base < 2**64:
            raise ValueError("seed_base must be an unsigned 64-bit integer")

    @property
    def tau(self) -> float:
        """OU correlation time in seconds."""
        return 1.0 / (np.pi * self.fwhm)

    @property
    def max_frequency(self) -> float:
        """Highest frequency present, in Hz (for step-size selection)."""
        if self.kind in ("ac", "random_phase_ac"):
            return self.frequency
        if self.kind == "ou_lorentzian":
            return self.center_freq + 5 * self.fwhm
        return 0.0


def trajectory_rng(seed_base: int, traj_index: int, stream: int = NOISE_STREAM) -> np.random.Generator:
    """Independent generator for one trajectory and one use of it."""
    if traj_index < 0:
        raise ValueError("trajectory index must be >= 0")
    return np.random.Generator(
        np.random.Philox(key=int(seed_base), counter=[0, 0, int(stream), int(traj_index)])
    )


def n_grid_samples(timeline: float, dt: float) -> int:
    return int(np.ceil(timeline / dt - 1e-9)) + 1


@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    """Several trajectories on a shared time grid; row ``i`` is ``indices[i]``.

    ``samples`` holds ``b`` on the grid.  For carrier-modulated kinds the
    slowly varying ``envelope`` and per-row ``carrier_phase`` are kept so that
    :meth:`at` evaluates the field exactly between grid points.
    """

    kind: str
    dt: float
    samples: np.ndarray
    indices: np.ndarray
    envelope: np.ndarray | None = None
    carrier_freq: float = 0.0
    carrier_phase: np.ndarray | None = None

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.samples.shape[1])

    @property
    def duration(self) -> float:
        return self.dt * (self.samples.shape[1] - 1)

    def __len__(self) -> int:
        return self.samples.shape[0]

    def row(self, i: int) -> "NoiseTrajectory":
        def pick(a):
            return None if a is None else a[i : i + 1]

        return NoiseTrajectory(
            TrajectoryBatch(
                self.kind, self.dt, self.samples[i : i + 1], self.indices[i : i + 1],
                pick(self.envelope), self.carrier_freq, pick(self.carrier_phase),
            )
        )

    def at(self, t) -> np.ndarray:
        """Field values at times ``t``; shape ``(n_traj, len(t))``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if t.size and (t.min() < -1e-15 or t.max() > self.duration * (1 + 1e-12) + 1e-15):
            raise ValueError("requested time outside the trajectory timeline")
        if self.kind == "white":
            k = np.clip(np.floor(t / self.dt + 1e-9).astype(int), 0, self.samples.shape[1] - 1)
            return self.samples[:, k]
        base = self.samples if self.envelope is None else self.envelope
        x = np.clip(t / self.dt, 0, base.shape[1] - 1)
        k = np.minimum(np.floor(x).astype(int), base.shape[1] - 2) if base.shape[1] > 1 else np.zeros_like(x, int)
        frac = x - k
        if base.shape[1] > 1:
            vals = base[:, k] * (1 - frac) + base[:, k + 1] * frac
        else:
            vals = base[:, k]
        if self.envelope is not None:
            vals = vals * np.cos(2 * np.pi * self.carrier_freq * t[None, :] + self.carrier_phase[:, None])
        return vals


@dataclass(frozen=True, eq=False)
class NoiseTrajectory:
    """One sampled path of ``b(t)``; a thin view on a single-row batch."""

    batch: TrajectoryBatch

    @property
    def dt(self) -> float:
        return self.batch.dt

    @property
    def samples(self) -> np.ndarray:
        return self.batch.samples[0]

    @property
    def trajectory_index(self) -> int:
        return int(self.batch.indices[0])

    @property
    def times(self) -> np.ndarray:
        return self.batch.times

    @property
    def duration(self) -> float:
        return self.batch.duration

    def at(self, t) -> np.ndarray:
        return self.batch.at(t)[0]


def sample_batch(model: NoiseModel, timeline: float, dt: float, traj_indices: Sequence[int]) -> TrajectoryBatch:
    """Sample the trajectories ``traj_indices`` of ``model`` over ``[0, timeline]``."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if timeline < dt:
        raise ValueError("timeline must be >= dt")
    indices = np.asarray(traj_indices, dtype=np.int64)
    n, m = len(indices), n_grid_samples(timeline, dt)
    t = dt * np.arange(m)
    kind = model.kind

    if kind == "none":
        return TrajectoryBatch(kind, dt, np.zeros((n, m)), indices)

    rngs = [trajectory_rng(model.seed_base, int(i)) for i in indices]

    if kind in ("ac", "random_phase_ac"):
        if kind == "ac":
            phase = np.full(n, model.phase)
        else:
            phase = np.array([r.uniform(0, 2 * np.pi) for r in rngs])
        env = np.full((n, m), model.amplitude)
        return _carrier_batch(kind, dt, env, indices, model.frequency, phase, t)

    if kind == "white":
        xi = np.stack([r.standard_normal(m) for r in rngs]) if n else np.zeros((0, m))
        return TrajectoryBatch(kind, dt, model.amplitude / np.sqrt(dt) * xi, indices)

    # ou_lorentzian; carrier phase is drawn before the Gaussian increments
    phase = np.array([r.uniform(0, 2 * np.pi) for r in rngs])
    xi = np.stack([r.standard_normal(m) for r in rngs]) if n else np.zeros((0, m))
    decay = np.exp(-dt / model.tau)
    drive = xi * (model.amplitude * np.sqrt(1 - decay**2))
    drive[:, 0] = model.amplitude * xi[:, 0]  # stationary initial value
    env = lfilter([1.0], [1.0, -decay], drive, axis=1)
    if model.center_freq > 0:
        return _carrier_batch(kind, dt, env, indices, model.center_freq, phase, t)
    return TrajectoryBatch(kind, dt, env, indices)


def _carrier_batch(kind, dt, env, indices, freq, phase, t):
    samples = env * np.cos(2 * np.pi * freq * t[None, :] + phase[:, None])
    return TrajectoryBatch(kind, dt, samples, indices, env, freq, phase)


def sample_trajectory(model: NoiseModel, timeline: float, dt: float, traj_index: int) -> NoiseTrajectory:
    return NoiseTrajectory(sample_batch(model, timeline, dt, [traj_index]))


def psd_estimate(trajectories) -> Spectrum:
    """Averaged one-sided periodogram in (rad/s)^2 / Hz.

    Accepts a list of :class:`NoiseTrajectory` or a :class:`TrajectoryBatch`.
    """
    if isinstance(trajectories, TrajectoryBatch):
        x, dt = trajectories.samples, trajectories.dt
    else:
        trajectories = list(trajectories)
        if len(trajectories) < 2:
            raise ValueError("need at least two trajectories")
        dt = trajectories[0].dt
        m = len(trajectories[0].samples)
        if any(tr.dt != dt or len(tr.samples) != m for tr in trajectories):
            raise ValueError("trajectories must share one time grid")
        x = np.stack([tr.samples for tr in trajectories])
    if x.shape[0] < 2:
        raise ValueError("need at least two trajectories")
    m = x.shape[1]
    return Spectrum(
        freqs=np.fft.rfftfreq(m, dt),
        amplitudes=_periodograms(x, dt).mean(axis=0),
        resolution=1.0 / (m * dt),
    )


def _periodograms(x: np.ndarray, dt: float) -> np.ndarray:
    """One-sided periodogram of each row of ``x``."""
    m = x.shape[1]
    power = np.abs(np.fft.rfft(x, axis=1)) ** 2 * (dt / m)
    power[:, 1 : (m + 1) // 2] *= 2  # fold negative frequencies, DC/Nyquist excepted
    return power


def averaged_psd(model: NoiseModel, timeline: float, dt: float, n_traj: int, chunk: int = 256) -> Spectrum:
    """:func:`psd_estimate` over trajectories ``0 .. n_traj - 1``, generated in chunks."""
    if n_traj < 2:
        raise ValueError("need at least two trajectories")
    total = 0.0
    for lo in range(0, n_traj, chunk):
        batch = sample_batch(model, timeline, dt, range(lo, min(lo + chunk, n_traj)))
        total = total + _periodograms(batch.samples, dt).sum(axis=0)
    m = n_grid_samples(timeline, dt)
    return Spectrum(np.fft.rfftfreq(m, dt), total / n_traj, 1.0 / (m * dt))


def ou_psd(freqs, sigma: float, tau: float) -> np.ndarray:
    """One-sided OU spectrum ``4 sigma^2 tau / (1 + (2 pi f tau)^2)``."""
    f = np.asarray(freqs, dtype=float)
    return 4 * sigma**2 * tau / (1 + (2 * np.pi * f * tau) ** 2)


def fit_lorentzian(spec: Spectrum, center: float | None = None, span: float | None = None):
    """Least-squares Lorentzian fit; returns ``(center_hz, fwhm_hz, peak)``.

    ``center=None`` fits a baseband line pinned at 0 Hz.  Only bins within
    ``span`` of the centre enter the fit (default: the whole spectrum).
    Residuals are weighted relative to the model, matching the constant
    relative scatter of an averaged periodogram.
    """
    f, s = spec.freqs, spec.amplitudes
    c0 = 0.0 if center is None else center
    keep = np.ones_like(f, bool) if span is None else np.abs(f - c0) <= span
    keep &= f > 0
    f, s = f[keep], s[keep]
    peak0 = s.max()
    above = f[s >= peak0 / 2]
    hw0 = max(np.ptp(above) / 2 if center is not None else above.max() - c0, spec.resolution)

    if center is None:
        def model(f, peak, hw):
            return peak / (1 + (f / hw) ** 2)
        p0 = [peak0, hw0]
    else:
        def model(f, peak, hw, fc):
            return peak / (1 + ((f - fc) / hw) ** 2)
        p0 = [peak0, hw0, c0]

    popt, _ = curve_fit(model, f, s, p0=p0, sigma=np.maximum(s, peak0 * 1e-6), maxfev=20000)
    fc = 0.0 if center is None else float(popt[2])
    return fc, 2 * abs(float(popt[1])), float(popt[0])


def write_trajectory_csv(traj: NoiseTrajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_s", "b_rad_per_s"])
        for t, b in zip(traj.times, traj.samples):
            w.writerow([format(t, ".17g"), format(b, ".17g")])
