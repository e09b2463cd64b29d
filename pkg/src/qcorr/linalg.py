"""Small dense complex linear algebra for sensor (x) bath operators.

Ordering convention: every joint operator is ``kron(sensor, bath)``, so the
sensor index is the slowest-varying one.  Matrices are plain ``numpy``
arrays of dtype ``complex128``.
"""

from __future__ import annotations

import numpy as np

# structural checks (hermiticity, dimension bookkeeping)
STRUCT_TOL = 1e-10
# numerical identities (unitarity, trace preservation of exact maps)
NUM_TOL = 1e-12
# most negative eigenvalue tolerated in a density matrix
PSD_TOL = 1e-8


class NotHermitianError(ValueError):
    """Raised when an operator that must be Hermitian is not."""


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {m.shape}")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def is_hermitian(a, tol: float = STRUCT_TOL) -> bool:
    a = as_matrix(a)
    return bool(np.max(np.abs(a - dagger(a)), initial=0.0) <= tol)


def is_unitary(a, tol: float = NUM_TOL) -> bool:
    a = as_matrix(a)
    return bool(np.max(np.abs(a @ dagger(a) - np.eye(a.shape[0]))) <= tol)


def is_psd(a, tol: float = PSD_TOL) -> bool:
    a = as_matrix(a)
    if not is_hermitian(a):
        return False
    return bool(np.linalg.eigvalsh(0.5 * (a + dagger(a))).min() >= -tol)


def trace_one(a, tol: float = STRUCT_TOL) -> bool:
    return bool(abs(np.trace(as_matrix(a)) - 1.0) <= tol)


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def expm_hermitian(h, scale: float) -> np.ndarray:
    """Return ``exp(1j * scale * h)`` for Hermitian ``h``.

    Computed from the eigendecomposition of ``h`` so the result is unitary to
    working precision whatever the norm of ``scale * h``.
    """
    h = as_matrix(h)
    if not is_hermitian(h):
        raise NotHermitianError("expm_hermitian needs a Hermitian generator")
    evals, evecs = np.linalg.eigh(0.5 * (h + dagger(h)))
    return (evecs * np.exp(1j * scale * evals)) @ dagger(evecs)


def partial_trace_bath(rho, dim_sensor: int, dim_bath: int) -> np.ndarray:
    """Trace out the bath factor of a ``sensor (x) bath`` operator."""
    rho = as_matrix(rho)
    if rho.shape[0] != dim_sensor * dim_bath:
        raise ValueError(
            f"operator dimension {rho.shape[0]} != {dim_sensor} * {dim_bath}"
        )
    return np.einsum("ajbj->ab", rho.reshape(dim_sensor, dim_bath, dim_sensor, dim_bath))


def _same_dim(a, b):
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def commutator(a, b) -> np.ndarray:
    a, b = _same_dim(a, b)
    return a @ b - b @ a


def anticommutator(a, b) -> np.ndarray:
    a, b = _same_dim(a, b)
    return a @ b + b @ a
