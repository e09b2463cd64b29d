"""Brute-force reference evolution used to check the main executor.

Nothing here goes through ``expm_hermitian`` or the protocol module's
propagators: step propagators are truncated Taylor series on short steps,
rotations use the closed form ``cos(a/2) I - i sin(a/2) sigma``, and the
dephasing channel is replaced by an explicit average over equally spaced z
rotations.  Slow on purpose.
"""

from __future__ import annotations

import math

import numpy as np

from .noise import NoiseModel, sample_trajectory
from .protocol import (
    Initialize,
    Interrogate,
    Measure,
    PhaseRandomize,
    Rotate,
    Wait,
    build_cc_sequence,
    build_qc_sequence,
    execute_exact,
)
from .spins import SpinSystem, build_bath

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)
_SIGMA = {"x": _SX, "y": _SY, "z": _SZ}

# |H| dt kept below this on every Taylor step
_MAX_STEP_NORM = 0.05
_TAYLOR_ORDER = 16


class ConventionError(AssertionError):
    """Calibration ratio depends on the parameters: a normalisation bug."""


def _taylor_propagator(h: np.ndarray, dt: float) -> np.ndarray:
    a = -1j * dt * h
    term = np.eye(len(h), dtype=complex)
    total = term.copy()
    for k in range(1, _TAYLOR_ORDER + 1):
        term = term @ a / k
        total = total + term
    return total


def _propagator(h: np.ndarray, duration: float) -> np.ndarray:
    norm = np.abs(h).sum(axis=1).max()
    n = max(1, math.ceil(norm * duration / _MAX_STEP_NORM))
    return np.linalg.matrix_power(_taylor_propagator(h, duration / n), n)


def _rotation(axis: str, angle: float) -> np.ndarray:
    return math.cos(angle / 2) * np.eye(2) - 1j * math.sin(angle / 2) * _SIGMA[axis]


def _evolve(u, rho):
    return u @ rho @ u.conj().T


def oracle_execute(seq, sys: SpinSystem, traj=None, n_substeps: int = 256, n_phases: int = 16) -> float:
    """Measured expectation of ``seq`` by naive stepwise integration.

    Each interrogation window is cut into exactly ``n_substeps`` pieces with
    the field sampled at piece midpoints; each piece is itself integrated
    with short Taylor steps.
    """
    if n_substeps < 1 or n_phases < 2:
        raise ValueError("need n_substeps >= 1 and n_phases >= 2")
    d_b = sys.dim_bath
    eye_b = np.eye(d_b, dtype=complex)
    s_z = np.kron(_SZ / 2, eye_b)
    h_free = np.kron(np.eye(2), sys.h_bath)
    h_coupled = h_free + np.kron(_SZ / 2, sys.b_op)

    t = 0.0
    rho = None
    for step in seq.steps:
        if isinstance(step, Initialize):
            sensor = (np.eye(2) + step.sign * _SIGMA[step.axis]) / 2
            rho = np.kron(sensor, sys.rho_bath)
        elif isinstance(step, Interrogate):
            dt = step.duration / n_substeps
            for k in range(n_substeps):
                b = 0.0 if traj is None else float(traj.at(t + (k + 0.5) * dt)[0])
                rho = _evolve(_propagator(h_coupled + b * s_z, dt), rho)
            t += step.duration
        elif isinstance(step, Wait):
            rho = _evolve(_propagator(h_free, step.duration), rho)
            t += step.duration
        elif isinstance(step, Rotate):
            rho = _evolve(np.kron(_rotation(step.axis, step.angle), eye_b), rho)
        elif isinstance(step, PhaseRandomize):
            rotations = [np.kron(_rotation("z", 2 * np.pi * k / n_phases), eye_b) for k in range(n_phases)]
            rho = sum(_evolve(u, rho) for u in rotations) / n_phases
        elif isinstance(step, Measure):
            return float(np.trace(np.kron(_SIGMA[step.axis], eye_b) @ rho).real)
    raise ValueError("sequence has no Measure step")


def qc_reference_amplitude(sys: SpinSystem, t_interr: float) -> float:
    """``(a_perp t)^2 p_z / 4`` of a single-spin system, the unit of the QC formula."""
    (p,) = sys.params
    return p.a_perp**2 * t_interr**2 / 4 * p.p_z


def calibration_family():
    """Single-spin cases in the perturbative regime: ``(system, t_interr, delays)``."""
    cases = []
    for a_perp_hz in (20e3, 60.4e3):
        for p_z in (0.25, 0.5, 1.0):
            for t_interr in (0.05e-6, 0.1e-6):
                omega = 2 * np.pi * 150e3
                sys = build_bath(omega0=omega, a_par=0.0, a_perp=2 * np.pi * a_perp_hz, p_z=p_z)
                period = 2 * np.pi / omega
                delays = t_interr + period * np.array([0.25, 0.75, 1.25, 1.6])
                cases.append((sys, t_interr, delays))
    return cases


def calibrate_eq3_constant(cases=None, n_substeps: int = 256, tol: float = 0.02) -> float:
    """Prefactor ``c`` of the short-window QC formula, measured with the oracle.

    For each case, the least-squares ratio of oracle QC values to
    ``(a_perp t)^2 p_z sin(omega delay) / 4`` is formed; all ratios must agree
    within ``tol`` of the pooled one.
    """
    if cases is None:
        cases = calibration_family()
    num = den = 0.0
    ratios = []
    for sys, t_interr, delays in cases:
        if sys.n_spins != 1:
            raise ValueError("calibration uses single-spin systems")
        (p,) = sys.params
        if abs(p.a_perp) * t_interr > 0.05 + 1e-12:
            raise ValueError("calibration needs a_perp * t_interr <= 0.05")
        x = qc_reference_amplitude(sys, t_interr) * np.sin(p.omega * np.asarray(delays))
        y = np.array(
            [oracle_execute(build_qc_sequence(t_interr, d), sys, None, n_substeps) for d in delays]
        )
        ratios.append(float(x @ y / (x @ x)))
        num += float(x @ y)
        den += float(x @ x)
    c = num / den
    spread = max(abs(r / c - 1) for r in ratios)
    if spread > tol:
        raise ConventionError(f"calibration ratio varies by {spread:.2%} across cases")
    return c


def random_scenarios(n: int, seed: int = 0):
    """Random single-spin systems, QC/CC sequences and classical tones.

    Returns ``(sequence, system, trajectory)`` triples; about half the
    trajectories are ``None`` (no classical field).
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        omega = 2 * np.pi * rng.uniform(50e3, 800e3)
        sys = build_bath(
            omega0=omega,
            a_par=2 * np.pi * rng.uniform(-60e3, 60e3),
            a_perp=2 * np.pi * rng.uniform(5e3, 200e3),
            p_z=rng.uniform(-1, 1),
        )
        t_interr = rng.uniform(0.1e-6, 2e-6)
        delay = t_interr + rng.uniform(0, 10e-6)
        builder = build_qc_sequence if rng.random() < 0.5 else build_cc_sequence
        seq = builder(t_interr, delay)
        traj = None
        if rng.random() < 0.5:
            model = NoiseModel(
                "ac",
                amplitude=rng.uniform(0.1, 1.0) * np.pi / t_interr,
                frequency=rng.uniform(100e3, 1e6),
                phase=rng.uniform(0, 2 * np.pi),
            )
            traj = sample_trajectory(model, seq.duration, seq.duration, 0)
        out.append((seq, sys, traj))
    return out


def cross_validate(n: int = 20, seed: int = 0, n_substeps: int = 256) -> float:
    """Largest ``|execute_exact - oracle_execute|`` over ``n`` random scenarios."""
    worst = 0.0
    for seq, sys, traj in random_scenarios(n, seed):
        fast = execute_exact(seq, sys, traj, seq.t_interr / n_substeps).value
        slow = oracle_execute(seq, sys, traj, n_substeps)
        worst = max(worst, abs(fast - slow))
    return worst
