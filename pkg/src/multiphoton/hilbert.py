"""Truncated qubit (x) cavity Hilbert space and elementary operators.

Ordering convention used everywhere in the package: the qubit factor comes
first, so composite operators are ``kron(qubit_op, cavity_op)`` and the basis
index of ``|n, s>`` is ``s * (n_photon_max + 1) + n`` with ``s = 0`` for the
excited state and ``s = 1`` for the ground state.  Qubit basis vectors are
``|e> = (1, 0)`` and ``|g> = (0, 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EXCITED = 0
GROUND = 1


@dataclass(frozen=True)
class SpaceConfig:
    n_photon_max: int

    def __post_init__(self):
        if int(self.n_photon_max) != self.n_photon_max or self.n_photon_max < 1:
            raise ValueError(f"n_photon_max must be an integer >= 1, got {self.n_photon_max!r}")

    @property
    def n_levels(self) -> int:
        return self.n_photon_max + 1

    @property
    def dim(self) -> int:
        return 2 * self.n_levels

    def index(self, n: int, qubit: int) -> int:
        """Basis index of ``|n, qubit>`` (``qubit`` is EXCITED or GROUND)."""
        return qubit * self.n_levels + n

    def basis(self, n: int, qubit: int) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(n, qubit)] = 1.0
        return v


def annihilation(n_photon_max: int) -> np.ndarray:
    if int(n_photon_max) != n_photon_max or n_photon_max < 1:
        raise ValueError(f"n_photon_max must be an integer >= 1, got {n_photon_max!r}")
    return np.diag(np.sqrt(np.arange(1, n_photon_max + 1)), k=1).astype(complex)


def creation(n_photon_max: int) -> np.ndarray:
    return annihilation(n_photon_max).conj().T


def number(n_photon_max: int) -> np.ndarray:
    return np.diag(np.arange(n_photon_max + 1)).astype(complex)


def pauli_lowering() -> np.ndarray:
    # sigma_- |e> = |g>
    return np.array([[0, 0], [1, 0]], dtype=complex)


def pauli_raising() -> np.ndarray:
    return np.array([[0, 1], [0, 0]], dtype=complex)


def pauli_z() -> np.ndarray:
    return np.array([[1, 0], [0, -1]], dtype=complex)


def kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError("kron expects two square matrices")
    return np.kron(A, B)


def adjoint(A: np.ndarray) -> np.ndarray:
    return np.asarray(A).conj().T


def expectation(rho: np.ndarray, O: np.ndarray) -> complex:
    """Return ``trace(rho @ O)``."""
    rho = np.asarray(rho)
    O = np.asarray(O)
    if rho.shape != O.shape or rho.ndim != 2:
        raise ValueError(f"dimension mismatch: rho {rho.shape} vs operator {O.shape}")
    # trace(rho O) = sum_ij rho_ij O_ji
    return complex(np.sum(rho * O.T))


def composite_operators(space: SpaceConfig) -> dict[str, np.ndarray]:
    """Embed a, sigma_-, sigma_+, sigma_z into the composite space."""
    a = annihilation(space.n_photon_max)
    i_c = np.eye(space.n_levels, dtype=complex)
    i_q = np.eye(2, dtype=complex)
    ops = {
        "a": kron(i_q, a),
        "sm": kron(pauli_lowering(), i_c),
        "sp": kron(pauli_raising(), i_c),
        "sz": kron(pauli_z(), i_c),
    }
    ops["ad"] = adjoint(ops["a"])
    ops["n"] = ops["ad"] @ ops["a"]
    return ops


def check_density_matrix(rho: np.ndarray, tol: float = 1e-10, psd_tol: float = 1e-8) -> None:
    """Raise ValueError unless ``rho`` is unit-trace, Hermitian and PSD."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise ValueError(f"trace {tr} differs from 1")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > tol:
        raise ValueError(f"not Hermitian (max deviation {herm:.3e})")
    w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if w.min() < -psd_tol:
        raise ValueError(f"negative eigenvalue {w.min():.3e}")


def cavity_populations(rho: np.ndarray, space: SpaceConfig) -> np.ndarray:
    """Diagonal of the reduced cavity state, p_n for n = 0..n_photon_max."""
    diag = np.real(np.diagonal(rho)).reshape(2, space.n_levels)
    return diag.sum(axis=0)
