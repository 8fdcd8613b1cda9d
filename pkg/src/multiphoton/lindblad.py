"""Liouvillian of the driven, damped JC master equation and its steady state.

Vectorization is column stacking, ``vec(rho) = rho.reshape(-1, order="F")``,
so that ``vec(A X B) = kron(B.T, A) @ vec(X)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .hilbert import SpaceConfig, composite_operators
from .jc_model import JCParams, interaction_hamiltonian

PSD_TOL = 1e-8
RESIDUAL_TOL = 1e-9
MAX_REFINE = 6
# Dekker splitting constant, 2**27 + 1
_SPLIT = 134217729.0


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Superoperator:
    matrix: np.ndarray
    space: SpaceConfig

    @property
    def dim(self) -> int:
        return self.space.dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)


@dataclass(frozen=True)
class SteadyStateResult:
    rho: np.ndarray
    residual: float
    truncation_tail: float


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


def _spre(A):
    return np.kron(np.eye(A.shape[0]), A)


def _spost(A):
    return np.kron(A.T, np.eye(A.shape[0]))


def _sandwich(c):
    # rho -> c rho c^dagger
    return np.kron(c.conj(), c)


def build_liouvillian(H: np.ndarray, p: JCParams, space: SpaceConfig) -> Superoperator:
    """Assemble the Liouvillian of

    ``drho/dt = -i[H, rho] + gamma (s- rho s+ - {s+s-, rho}/2)
                + kappa (2 a rho a+ - {a+a, rho})``.
    """
    H = np.asarray(H)
    if H.shape != (space.dim, space.dim):
        raise ValueError(f"Hamiltonian shape {H.shape} does not match space dim {space.dim}")
    ops = composite_operators(space)
    a, sm = ops["a"], ops["sm"]
    n_cav = ops["n"]
    n_qub = ops["sp"] @ sm
    L = -1j * (_spre(H) - _spost(H))
    if p.gamma:
        L += p.gamma * (_sandwich(sm) - 0.5 * _spre(n_qub) - 0.5 * _spost(n_qub))
    if p.kappa:
        L += p.kappa * (2.0 * _sandwich(a) - _spre(n_cav) - _spost(n_cav))
    return Superoperator(L, space)


def jc_liouvillian(p: JCParams, space: SpaceConfig) -> Superoperator:
    return build_liouvillian(interaction_hamiltonian(p, space), p, space)


def residual_norm(L: Superoperator, rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    if rho.shape != (L.dim, L.dim):
        raise ValueError(f"state shape {rho.shape} does not match Liouvillian dim {L.dim}")
    return float(np.max(np.abs(L.matrix @ vec(rho))))


def nullspace_dimension(L: Superoperator, rtol: float = 1e-10) -> int:
    s = np.linalg.svd(L.matrix, compute_uv=False)
    return int(np.sum(s < rtol * s[0]))


def truncation_tail(rho: np.ndarray, space: SpaceConfig) -> float:
    """Population in the two highest Fock levels of the cavity."""
    diag = np.real(np.diagonal(rho)).reshape(2, space.n_levels)
    return float(diag[:, -2:].sum())


def condition_state(rho: np.ndarray) -> np.ndarray:
    """Hermitize and renormalize; reject states that are clearly not PSD.

    Eigenvalues in [-PSD_TOL, 0) are left in place rather than clipped:
    rebuilding rho from its eigendecomposition adds ~1e-17 absolute noise to
    every element and wipes out the multiphoton populations (often < 1e-20)
    that the high-order moments depend on.
    """
    rho = 0.5 * (rho + rho.conj().T)
    w = np.linalg.eigvalsh(rho)
    if w.min() < -PSD_TOL:
        raise SolverError(f"steady state has eigenvalue {w.min():.3e} below -{PSD_TOL}")
    return rho / np.real(np.trace(rho))


def _two_prod(a: np.ndarray, b: np.ndarray):
    """Error-free product: ``a * b == p + e`` exactly."""
    p = a * b
    c = _SPLIT * a
    ah = c - (c - a)
    al = a - ah
    c = _SPLIT * b
    bh = c - (c - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def exact_residual(A: scipy.sparse.csr_matrix, b: np.ndarray, parts) -> np.ndarray:
    """``b - A @ sum(parts)`` with each row accumulated exactly and rounded once."""
    ar, ai = A.data.real, A.data.imag
    re_terms, im_terms = [], []
    for x in parts:
        xr, xi = x.real[A.indices], x.imag[A.indices]
        for u, v, sign, out in ((ar, xr, -1, re_terms), (ai, xi, 1, re_terms),
                                (ar, xi, -1, im_terms), (ai, xr, -1, im_terms)):
            prod, err = _two_prod(u, v)
            out += [sign * prod, sign * err]
    re = np.stack(re_terms, axis=1)
    im = np.stack(im_terms, axis=1)
    r = np.empty(A.shape[0], dtype=complex)
    ptr = A.indptr
    for i in range(A.shape[0]):
        lo, hi = ptr[i], ptr[i + 1]
        r[i] = complex(math.fsum([b[i].real, *re[lo:hi].ravel()]),
                       math.fsum([b[i].imag, *im[lo:hi].ravel()]))
    return r


def steady_state(L: Superoperator) -> SteadyStateResult:
    """Steady state by a direct LU solve with one row replaced by the trace condition.

    The LU solution is refined with residuals computed without rounding error
    and the iterate carried as an unevaluated double-double sum.  Plain
    refinement leaves the smallest populations (1e-20 and below, which
    carry the high-order moments) with relative errors up to O(1); the
    extra-precise variant makes them accurate to working precision.
    """
    d = L.dim
    A = L.matrix.copy()
    trace_row = vec(np.eye(d))
    A[0, :] = trace_row
    b = np.zeros(d * d, dtype=complex)
    b[0] = 1.0
    try:
        with warnings.catch_warnings():
            # exact singularity is detected below from the pivots
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu = scipy.linalg.lu_factor(A, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"LU factorization failed ({exc}); "
                          f"null-space dimension {nullspace_dimension(L)}") from exc
    if np.any(np.diagonal(lu[0]) == 0):
        raise SolverError(f"singular system; null-space dimension {nullspace_dimension(L)}")
    x = scipy.linalg.lu_solve(lu, b, check_finite=False)
    x_lo = np.zeros_like(x)
    A_sparse = scipy.sparse.csr_matrix(A)
    prev = np.inf
    for _ in range(MAX_REFINE):
        dx = scipy.linalg.lu_solve(lu, exact_residual(A_sparse, b, (x, x_lo)), check_finite=False)
        t = x_lo + dx
        s = x + t
        x_lo = t - (s - x)
        x = s
        step = np.max(np.abs(dx))
        if step <= 1e-30 * np.max(np.abs(x)) or step >= 0.5 * prev:
            break
        prev = step
    rho = condition_state(unvec(x, d))
    res = residual_norm(L, rho)
    if not np.isfinite(res) or res > RESIDUAL_TOL:
        nd = nullspace_dimension(L)
        if nd > 1:
            raise SolverError(f"steady state not unique: null-space dimension {nd}")
        raise SolverError(f"steady state residual {res:.3e} exceeds {RESIDUAL_TOL}")
    return SteadyStateResult(rho=rho, residual=res, truncation_tail=truncation_tail(rho, L.space))


def steady_state_eig(L: Superoperator) -> np.ndarray:
    """Independent route: eigenvector of L with eigenvalue closest to zero."""
    w, V = scipy.linalg.eig(L.matrix)
    i = int(np.argmin(np.abs(w)))
    rho = unvec(V[:, i], L.dim)
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T)
