"""Simulation of quantum-correlation (QC) and classical-correlation (CC)
sensing sequences on a qubit sensor coupled to nuclear spins and to
classical stochastic fields."""

__version__ = "0.1.0"

from .analysis import (
    CorrelationTrace,
    Peak,
    Spectrum,
    find_peak,
    predict_cc_eq2,
    predict_qc_eq1,
    predict_qc_eq3,
    spectrum,
)
from .noise import NoiseModel, NoiseTrajectory, psd_estimate, sample_trajectory
from .protocol import (
    ExecutionResult,
    ProtocolSequence,
    build_cc_sequence,
    build_qc_sequence,
    execute_exact,
    execute_mc,
    sweep_delay,
)
from .spins import SpinSystem, build_bath, heisenberg_b, omega0_from_field, phase_operator

__all__ = [
    "CorrelationTrace",
    "ExecutionResult",
    "NoiseModel",
    "NoiseTrajectory",
    "Peak",
    "ProtocolSequence",
    "Spectrum",
    "SpinSystem",
    "build_bath",
    "build_cc_sequence",
    "build_qc_sequence",
    "execute_exact",
    "execute_mc",
    "find_peak",
    "heisenberg_b",
    "omega0_from_field",
    "phase_operator",
    "predict_cc_eq2",
    "predict_qc_eq1",
    "predict_qc_eq3",
    "psd_estimate",
    "sample_trajectory",
    "spectrum",
    "sweep_delay",
]
