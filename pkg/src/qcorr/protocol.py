"""QC and CC correlation sequences acting on the joint sensor (x) bath state.

Clock convention: the sequence starts at ``t = 0`` with the first
interrogation window, and ``delay`` is the start-to-start separation of the
two windows.  Rotations and phase randomization are instantaneous.  Between
windows only the bath Hamiltonian acts; the noise trajectory keeps running so
field correlations across windows are preserved.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial
from typing import Callable, Sequence, Union

import numpy as np

from .analysis import CorrelationTrace
from .linalg import PSD_TOL, STRUCT_TOL, expm_hermitian, kron
from .noise import PHASE_STREAM, NoiseModel, NoiseTrajectory, sample_batch, trajectory_rng
from .spins import IDENTITY_2, PAULI, SENSOR, SpinSystem

RANDOMIZE_MODES = ("exact_channel", "sampled")


class NumericalError(ArithmeticError):
    """State left the set of density matrices (trace drift or negative eigenvalue)."""


@dataclass(frozen=True)
class Initialize:
    axis: str = "x"
    sign: int = 1


@dataclass(frozen=True)
class Interrogate:
    duration: float


@dataclass(frozen=True)
class Rotate:
    axis: str
    angle: float


@dataclass(frozen=True)
class PhaseRandomize:
    mode: str = "exact_channel"


@dataclass(frozen=True)
class Wait:
    duration: float


@dataclass(frozen=True)
class Measure:
    axis: str = "y"


ProtocolStep = Union[Initialize, Interrogate, Rotate, PhaseRandomize, Wait, Measure]


@dataclass(frozen=True)
class ProtocolSequence:
    steps: tuple
    t_interr: float
    delay: float
    kind: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps or not isinstance(self.steps[0], Initialize):
            raise ValueError("a sequence starts with Initialize")
        measures = [i for i, s in enumerate(self.steps) if isinstance(s, Measure)]
        if measures != [len(self.steps) - 1]:
            raise ValueError("a sequence has exactly one Measure, as its last step")
        for s in self.steps:
            if isinstance(s, (Interrogate, Wait)) and s.duration < 0:
                raise ValueError("step durations must be >= 0")
            if isinstance(s, (Initialize, Rotate, Measure)) and s.axis not in PAULI:
                raise ValueError(f"unknown axis {s.axis!r}")
            if isinstance(s, PhaseRandomize) and s.mode not in RANDOMIZE_MODES:
                raise ValueError(f"unknown phase randomization mode {s.mode!r}")

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.steps if isinstance(s, (Interrogate, Wait)))

    def windows(self) -> list[tuple[float, float]]:
        """``(start, duration)`` of each interrogation window."""
        out, t = [], 0.0
        for s in self.steps:
            if isinstance(s, Interrogate):
                out.append((t, s.duration))
            if isinstance(s, (Interrogate, Wait)):
                t += s.duration
        return out

    def with_randomize_mode(self, mode: str) -> "ProtocolSequence":
        steps = [PhaseRandomize(mode) if isinstance(s, PhaseRandomize) else s for s in self.steps]
        return replace(self, steps=tuple(steps))


@dataclass(frozen=True)
class ExecutionResult:
    value: float
    stderr: float
    n_traj: int
    mode: str

    def __post_init__(self):
        if abs(self.value) > 1 + 1e-9:
            raise NumericalError(f"expectation value {self.value} outside [-1, 1]")


def _check_delay(t_interr, delay):
    if not t_interr > 0:
        raise ValueError("t_interr must be > 0")
    if delay < t_interr:
        raise ValueError(f"delay {delay} is shorter than the interrogation time {t_interr}")


def build_qc_sequence(t_interr: float, delay: float, randomize_mode: str = "exact_channel") -> ProtocolSequence:
    _check_delay(t_interr, delay)
    steps = (
        Initialize("x", 1),
        Interrogate(t_interr),
        PhaseRandomize(randomize_mode),
        Wait(delay - t_interr),
        Rotate("y", np.pi / 2),
        Interrogate(t_interr),
        Measure("y"),
    )
    return ProtocolSequence(steps, t_interr, delay, "qc")


def build_cc_sequence(t_interr: float, delay: float, randomize_mode: str = "exact_channel") -> ProtocolSequence:
    # the x rotation moves the first-window phase into the z population,
    # where phase randomization cannot erase it
    _check_delay(t_interr, delay)
    steps = (
        Initialize("x", 1),
        Interrogate(t_interr),
        Rotate("x", np.pi / 2),
        PhaseRandomize(randomize_mode),
        Wait(delay - t_interr),
        Rotate("y", np.pi / 2),
        Interrogate(t_interr),
        Measure("y"),
    )
    return ProtocolSequence(steps, t_interr, delay, "cc")


BUILDERS = {"qc": build_qc_sequence, "cc": build_cc_sequence}


# --- shared operator construction -------------------------------------------------


def sensor_rotation(axis: str, angle: float) -> np.ndarray:
    """``exp(-i angle sigma_axis / 2)``."""
    return expm_hermitian(PAULI[axis] / 2, -angle)


def initial_state(step: Initialize, sys: SpinSystem) -> np.ndarray:
    sensor = (IDENTITY_2 + step.sign * PAULI[step.axis]) / 2
    return kron(sensor, sys.rho_bath)


def coupled_hamiltonian(sys: SpinSystem) -> np.ndarray:
    """Window Hamiltonian without the classical field: ``I (x) H_B + S_z (x) B``."""
    return kron(IDENTITY_2, sys.h_bath) + kron(SENSOR.s_z, sys.b_op)


def default_substep(t_interr: float, max_freq_hz: float) -> float:
    dt = t_interr / 64
    if max_freq_hz > 0:
        dt = min(dt, 1.0 / (50 * max_freq_hz))
    return dt


def _max_freq_hz(sys: SpinSystem, model: NoiseModel | None) -> float:
    f = sys.max_frequency() / (2 * np.pi)
    if model is not None:
        f = max(f, model.max_frequency)
    return f


def _substep_times(start: float, duration: float, substep_dt: float):
    n = max(1, math.ceil(duration / substep_dt - 1e-9))
    dt = duration / n
    return start + dt * (np.arange(n) + 0.5), dt


def _check_state(rho: np.ndarray, where: str) -> None:
    tr = np.trace(rho, axis1=-2, axis2=-1)
    if np.max(np.abs(tr - 1)) > STRUCT_TOL:
        raise NumericalError(f"trace drifted to {tr.real.ravel()[np.argmax(np.abs(tr - 1))]} after {where}")
    herm = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    lowest = np.linalg.eigvalsh(herm).min()
    if lowest < -PSD_TOL:
        raise NumericalError(f"negative eigenvalue {lowest:.3e} after {where}")


# --- single-trajectory executor -----------------------------------------------------


def execute_exact(
    seq: ProtocolSequence,
    sys: SpinSystem,
    traj: NoiseTrajectory | None = None,
    substep_dt: float | None = None,
    phase: float | None = None,
) -> ExecutionResult:
    """Evolve the joint density matrix through ``seq`` for one field trajectory.

    Interrogation windows use piecewise-constant Hamiltonians on substeps of
    at most ``substep_dt``, with the classical field taken at each substep
    midpoint.  ``PhaseRandomize("sampled")`` needs an explicit ``phase``
    (a z rotation angle); ``exact_channel`` applies z-basis dephasing.
    """
    if substep_dt is None:
        substep_dt = default_substep(seq.t_interr, _max_freq_hz(sys, None))
    if not substep_dt > 0:
        raise ValueError("substep_dt must be > 0")
    if traj is not None and traj.duration < seq.duration * (1 - 1e-12):
        raise ValueError(f"noise trajectory covers {traj.duration} s, sequence needs {seq.duration} s")

    d_b = sys.dim_bath
    eye_b = np.eye(d_b, dtype=complex)
    h_q = coupled_hamiltonian(sys)
    h_cl = kron(SENSOR.s_z, eye_b)
    projectors = [kron(np.diag([1.0, 0.0]), eye_b), kron(np.diag([0.0, 1.0]), eye_b)]

    t = 0.0
    rho = None
    value = None
    for i, step in enumerate(seq.steps):
        if isinstance(step, Initialize):
            rho = initial_state(step, sys)
        elif isinstance(step, Interrogate):
            mids, dt = _substep_times(t, step.duration, substep_dt)
            fields = traj.at(mids) if traj is not None else np.zeros(len(mids))
            for b in fields:
                u = expm_hermitian(h_q + b * h_cl, -dt)
                rho = u @ rho @ u.conj().T
            t += step.duration
        elif isinstance(step, Wait):
            u = kron(IDENTITY_2, expm_hermitian(sys.h_bath, -step.duration))
            rho = u @ rho @ u.conj().T
            t += step.duration
        elif isinstance(step, Rotate):
            u = kron(sensor_rotation(step.axis, step.angle), eye_b)
            rho = u @ rho @ u.conj().T
        elif isinstance(step, PhaseRandomize):
            if step.mode == "exact_channel":
                rho = sum(p @ rho @ p for p in projectors)
            else:
                if phase is None:
                    raise ValueError("sampled phase randomization needs an explicit phase")
                u = kron(sensor_rotation("z", phase), eye_b)
                rho = u @ rho @ u.conj().T
        elif isinstance(step, Measure):
            value = np.trace(kron(PAULI[step.axis], eye_b) @ rho).real
        _check_state(rho, f"step {i} ({type(step).__name__})")
    return ExecutionResult(float(value), 0.0, 1, "exact")


# --- trajectory-batched executor ----------------------------------------------------


def _sensor_phase(rho: np.ndarray, phi: np.ndarray, d_b: int) -> np.ndarray:
    """Apply ``exp(-i phi_j S_z) (x) I`` to each state ``rho[j]``.

    Off-diagonal sensor blocks pick up ``exp(-+i phi_j)``; diagonal blocks
    are unchanged.
    """
    out = rho.copy()
    f = np.exp(-1j * phi)[:, None, None]
    out[:, :d_b, d_b:] *= f
    out[:, d_b:, :d_b] *= np.conj(f)
    return out


def _conjugate(u: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return u @ rho @ u.conj().T


def execute_batch(
    seq: ProtocolSequence,
    sys: SpinSystem,
    window_phases: Sequence[np.ndarray],
    random_phases: np.ndarray | None = None,
    check: bool = True,
) -> np.ndarray:
    """Measured value for each trajectory of a batch.

    The classical term ``b(t) S_z (x) I`` commutes with the rest of the window
    Hamiltonian, so a trajectory enters only through the integrated phase
    ``window_phases[k][j]`` of window ``k``; the coupled propagator is shared.
    """
    n = len(window_phases[0]) if window_phases else (1 if random_phases is None else len(random_phases))
    d_b = sys.dim_bath
    eye_b = np.eye(d_b, dtype=complex)
    h_q = coupled_hamiltonian(sys)
    window = 0
    rho = None
    for i, step in enumerate(seq.steps):
        if isinstance(step, Initialize):
            rho = np.broadcast_to(initial_state(step, sys), (n, 2 * d_b, 2 * d_b)).copy()
        elif isinstance(step, Interrogate):
            rho = _conjugate(expm_hermitian(h_q, -step.duration), rho)
            rho = _sensor_phase(rho, np.asarray(window_phases[window]), d_b)
            window += 1
        elif isinstance(step, Wait):
            rho = _conjugate(kron(IDENTITY_2, expm_hermitian(sys.h_bath, -step.duration)), rho)
        elif isinstance(step, Rotate):
            rho = _conjugate(kron(sensor_rotation(step.axis, step.angle), eye_b), rho)
        elif isinstance(step, PhaseRandomize):
            if step.mode == "exact_channel":
                rho[:, :d_b, d_b:] = 0
                rho[:, d_b:, :d_b] = 0
            else:
                if random_phases is None:
                    raise ValueError("sampled phase randomization needs per-trajectory phases")
                rho = _sensor_phase(rho, np.asarray(random_phases), d_b)
        elif isinstance(step, Measure):
            obs = kron(PAULI[step.axis], eye_b)
            values = np.einsum("ij,nji->n", obs, rho).real
        if check:
            _check_state(rho, f"step {i} ({type(step).__name__})")
    return values


def window_phases(seq: ProtocolSequence, batch, substep_dt: float) -> list[np.ndarray]:
    """Midpoint-rule integral of the field over each interrogation window, per trajectory."""
    out = []
    for start, duration in seq.windows():
        mids, dt = _substep_times(start, duration, substep_dt)
        out.append(batch.at(mids).sum(axis=1) * dt)
    return out


def default_noise_dt(model: NoiseModel, substep_dt: float, timeline: float) -> float:
    """Grid spacing for sampled trajectories.

    Tones and carriers are evaluated analytically between grid points, so the
    grid only has to resolve the OU envelope (``tau / 50``) or, for white
    noise, one sample per substep.
    """
    if model.kind == "white":
        return substep_dt
    if model.kind == "ou_lorentzian":
        return min(model.tau / 50, timeline)
    return timeline


def mc_values(
    seq: ProtocolSequence,
    sys: SpinSystem,
    model: NoiseModel,
    traj_indices: Sequence[int],
    substep_dt: float,
    noise_dt: float | None = None,
    check: bool = True,
) -> np.ndarray:
    """Per-trajectory measured values for the trajectories ``traj_indices`` of ``model``."""
    timeline = max(seq.duration, seq.t_interr)
    if noise_dt is None:
        noise_dt = default_noise_dt(model, substep_dt, timeline)
    batch = sample_batch(model, timeline, min(noise_dt, timeline), traj_indices)
    phases = window_phases(seq, batch, substep_dt)
    random_phases = None
    if any(isinstance(s, PhaseRandomize) and s.mode == "sampled" for s in seq.steps):
        random_phases = np.array(
            [trajectory_rng(model.seed_base, int(j), PHASE_STREAM).uniform(0, 2 * np.pi) for j in traj_indices]
        )
    return execute_batch(seq, sys, phases, random_phases, check=check)


def execute_mc(
    seq: ProtocolSequence,
    sys: SpinSystem,
    model: NoiseModel,
    n_traj: int,
    substep_dt: float | None = None,
    randomize_mode: str | None = None,
    seed: int | None = None,
    noise_dt: float | None = None,
    chunk: int = 4096,
) -> ExecutionResult:
    """Average over ``n_traj`` noise trajectories.

    Trajectory ``j`` is keyed by ``(seed, j)`` (``seed`` defaults to
    ``model.seed_base``) and processed in fixed-size chunks; the mean is a
    single reduction over the index-ordered value array, so the result does
    not depend on how trajectories are scheduled.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if randomize_mode is not None:
        seq = seq.with_randomize_mode(randomize_mode)
    if seed is not None:
        model = replace(model, seed_base=int(seed))
    if substep_dt is None:
        substep_dt = default_substep(seq.t_interr, _max_freq_hz(sys, model))
    values = np.concatenate(
        [
            mc_values(seq, sys, model, range(lo, min(lo + chunk, n_traj)), substep_dt, noise_dt)
            for lo in range(0, n_traj, chunk)
        ]
    )
    stderr = float(values.std(ddof=1) / np.sqrt(n_traj)) if n_traj > 1 else 0.0
    return ExecutionResult(float(values.mean()), stderr, n_traj, "monte_carlo")


# --- delay sweeps -------------------------------------------------------------------


def delay_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for the ``index``-th point of a sweep."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])


def _sweep_point(
    index_delay,
    builder,
    sys,
    model,
    t_interr,
    mode,
    n_traj,
    substep_dt,
    randomize_mode,
    seed,
    noise_dt,
):
    index, delay = index_delay
    seq = builder(t_interr, delay)
    if randomize_mode is not None:
        seq = seq.with_randomize_mode(randomize_mode)
    point_seed = delay_seed(seed, index)
    if substep_dt is None:
        substep_dt = default_substep(t_interr, _max_freq_hz(sys, model))
    if mode == "exact":
        traj = None
        if model.kind != "none":
            point_model = replace(model, seed_base=point_seed)
            timeline = max(seq.duration, t_interr)
            dt = noise_dt or default_noise_dt(model, substep_dt, timeline)
            traj = NoiseTrajectory(sample_batch(point_model, timeline, min(dt, timeline), [0]))
        phase = None
        if seq.steps and any(isinstance(s, PhaseRandomize) and s.mode == "sampled" for s in seq.steps):
            phase = trajectory_rng(point_seed, 0, PHASE_STREAM).uniform(0, 2 * np.pi)
        return execute_exact(seq, sys, traj, substep_dt, phase)
    if mode == "mc":
        return execute_mc(seq, sys, model, n_traj, substep_dt, None, point_seed, noise_dt)
    raise ValueError(f"unknown run mode {mode!r}")


def sweep_delay(
    seq_builder: Callable[[float, float], ProtocolSequence],
    sys: SpinSystem,
    model: NoiseModel | None,
    delays,
    t_interr: float,
    mode: str = "exact",
    n_traj: int = 1,
    substep_dt: float | None = None,
    randomize_mode: str | None = None,
    seed: int = 0,
    noise_dt: float | None = None,
    workers: int = 1,
    meta: dict | None = None,
) -> CorrelationTrace:
    """Run ``seq_builder(t_interr, delay)`` at each delay.

    Every delay gets its own trajectory set, seeded from ``(seed, index)``.
    Points are distributed over ``workers`` processes and collected in delay
    order, so the trace is identical for any worker count.
    """
    delays = np.asarray(delays, dtype=float)
    if delays.size == 0:
        raise ValueError("delays must be non-empty")
    if np.any(delays < t_interr):
        raise ValueError("every delay must be >= t_interr")
    model = model or NoiseModel()
    point = partial(
        _sweep_point,
        builder=seq_builder,
        sys=sys,
        model=model,
        t_interr=t_interr,
        mode=mode,
        n_traj=n_traj,
        substep_dt=substep_dt,
        randomize_mode=randomize_mode,
        seed=seed,
        noise_dt=noise_dt,
    )
    items = list(enumerate(delays))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(point, items, chunksize=max(1, len(items) // (4 * workers))))
    else:
        results = [point(item) for item in items]
    return CorrelationTrace(
        delays,
        np.array([r.value for r in results]),
        np.array([r.stderr for r in results]),
        dict(meta or {}),
    )
