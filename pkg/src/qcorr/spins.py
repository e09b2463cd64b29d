"""Sensor qubit and nuclear-spin bath operators.

Spin-1/2 operators are ``I_a = sigma_a / 2`` (eigenvalues +-1/2).  All rates
are angular frequencies in rad/s; use :func:`omega0_from_field` or
``2 * pi * f`` to convert from Hz.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

from .linalg import as_matrix, expm_hermitian, is_psd

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

PAULI = {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}

# 13C gyromagnetic ratio, gamma / 2pi
GAMMA_13C_HZ_PER_T = 10.705e6
GAUSS = 1e-4  # tesla


@dataclass(frozen=True)
class SensorOps:
    s_z: np.ndarray = field(default_factory=lambda: PAULI_Z / 2)
    pauli_x: np.ndarray = field(default_factory=lambda: PAULI_X.copy())
    pauli_y: np.ndarray = field(default_factory=lambda: PAULI_Y.copy())
    pauli_z: np.ndarray = field(default_factory=lambda: PAULI_Z.copy())
    # |x><x| with |x> = (|0> + |1>) / sqrt(2)
    plus_x_state: np.ndarray = field(default_factory=lambda: np.full((2, 2), 0.5, dtype=complex))


SENSOR = SensorOps()


@dataclass(frozen=True)
class SpinParams:
    omega0: float
    a_par: float
    a_perp: float
    p_z: float

    @property
    def omega(self) -> float:
        """Effective Larmor frequency ``omega0 + a_par / 2`` (rad/s)."""
        return self.omega0 + self.a_par / 2


@dataclass(frozen=True, eq=False)
class SpinSystem:
    h_bath: np.ndarray
    b_op: np.ndarray
    rho_bath: np.ndarray
    params: tuple[SpinParams, ...]
    dim_sensor: int = 2

    @property
    def dim_bath(self) -> int:
        return self.h_bath.shape[0]

    @property
    def n_spins(self) -> int:
        return len(self.params)

    def max_frequency(self) -> float:
        """Largest bath frequency scale in rad/s, used to pick integration steps."""
        return max(max(abs(p.omega), abs(p.a_perp), abs(p.a_par)) for p in self.params)

    def with_coupling(self, b_op) -> "SpinSystem":
        """Copy with the sensor coupling operator replaced (e.g. ``0`` for a classical-only run)."""
        b_op = as_matrix(b_op) if np.ndim(b_op) else b_op * np.eye(self.dim_bath, dtype=complex)
        return SpinSystem(self.h_bath, b_op, self.rho_bath, self.params, self.dim_sensor)


def omega0_from_field(b_z_gauss: float, gamma_hz_per_t: float = GAMMA_13C_HZ_PER_T) -> float:
    """Nuclear Larmor angular frequency (rad/s) at a field given in gauss."""
    return 2 * np.pi * gamma_hz_per_t * b_z_gauss * GAUSS


def spin_operator(axis: str, site: int, n_spins: int) -> np.ndarray:
    """``I_axis`` acting on bath spin ``site`` of an ``n_spins`` register."""
    factors = [IDENTITY_2] * n_spins
    factors[site] = PAULI[axis] / 2
    return reduce(np.kron, factors)


def _per_spin(value, n: int, name: str) -> list[float]:
    values = list(np.atleast_1d(np.asarray(value, dtype=float)))
    if len(values) == 1:
        values = values * n
    if len(values) != n:
        raise ValueError(f"{name}: expected 1 or {n} values, got {len(values)}")
    if not all(np.isfinite(values)):
        raise ValueError(f"{name} must be finite")
    return values


def build_bath(
    omega0: float | Sequence[float],
    a_par: float | Sequence[float],
    a_perp: float | Sequence[float],
    p_z: float | Sequence[float],
    n_spins: int = 1,
) -> SpinSystem:
    """Bath of non-interacting spin-1/2 nuclei coupled to the sensor.

    Each argument is either a scalar shared by all spins or one value per
    spin.  Builds ``h_bath = sum_j (omega0_j + a_par_j / 2) I_z^j``,
    ``b_op = sum_j a_perp_j I_x^j`` and the product state
    ``rho_bath = prod_j (1/2 + p_z_j I_z^j)``.
    """
    if n_spins < 1:
        raise ValueError("n_spins must be >= 1")
    w0 = _per_spin(omega0, n_spins, "omega0")
    ap = _per_spin(a_par, n_spins, "a_par")
    ax = _per_spin(a_perp, n_spins, "a_perp")
    pz = _per_spin(p_z, n_spins, "p_z")
    for v in pz:
        if abs(v) > 1:
            raise ValueError(f"invalid polarization p_z={v}: need |p_z| <= 1")

    params = tuple(SpinParams(*vals) for vals in zip(w0, ap, ax, pz))
    dim = 2**n_spins
    h_bath = np.zeros((dim, dim), dtype=complex)
    b_op = np.zeros((dim, dim), dtype=complex)
    for j, p in enumerate(params):
        h_bath += p.omega * spin_operator("z", j, n_spins)
        b_op += p.a_perp * spin_operator("x", j, n_spins)
    rho_bath = reduce(np.kron, [IDENTITY_2 / 2 + p.p_z * PAULI_Z / 2 for p in params])
    if not is_psd(rho_bath):
        raise ValueError("bath state is not positive semidefinite")
    return SpinSystem(h_bath=h_bath, b_op=b_op, rho_bath=rho_bath, params=params)


def heisenberg_b(sys: SpinSystem, t: float) -> np.ndarray:
    """Coupling operator in the bath Heisenberg picture, ``e^{iHt} B e^{-iHt}``."""
    u = expm_hermitian(sys.h_bath, t)
    return u @ sys.b_op @ u.conj().T


def phase_operator(sys: SpinSystem, t_interr: float, t_center: float) -> np.ndarray:
    """Operator-valued phase ``t_interr * B(t_center)`` picked up in one window."""
    return t_interr * heisenberg_b(sys, t_center)
