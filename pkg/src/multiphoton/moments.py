"""Photon-correlation quantities built from normally ordered moments.

Everything here depends on the state only through the normally ordered
moments ``m_k = <a+^k a^k>``, which in turn depend only on the cavity Fock
populations.  The central objects are the conditional ratios

    R_{k,k-1} = m_k m_{k-2} / m_{k-1}^2

and the n-photon correlation measure built from them,

    M_n = prod_{k=2..n} max(R_{k,k-1} - 1, 0) * prod_{k=n+1..N_tr} max(1/R_{k,k-1} - 1, 0),

which is positive only when photon emission surges up to n quanta and is
blocked beyond.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .hilbert import SpaceConfig, cavity_populations

RATIO_MIN = 1e-12
RATIO_MAX = 1e12
# relative floor for a moment used as a denominator
ZERO_TOL = 1e-12
# m_1 at or below this is treated as "no light"
M1_FLOOR = 1e-300
NEGATIVE_TOL = 1e-12
# excesses |R - 1| at or below this are rounding noise (same tolerance as the classical bound)
EXCESS_TOL = 1e-10


class TruncationError(ValueError):
    pass


@dataclass(frozen=True)
class MomentVector:
    """``values[k] = <a+^k a^k>`` for k = 0..k_max, with ``values[0] == 1``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("need at least m_0 and m_1")
        if not np.all(np.isfinite(v)):
            raise ValueError("moments must be finite")
        if abs(v[0] - 1.0) > 1e-12:
            raise ValueError(f"m_0 must be 1, got {v[0]}")
        scale = np.maximum(1.0, np.abs(v))
        if np.any(v < -NEGATIVE_TOL * scale):
            raise ValueError(f"negative moment beyond tolerance: {v}")
        v = np.clip(v, 0.0, None)
        v[0] = 1.0
        object.__setattr__(self, "values", v)

    @property
    def k_max(self) -> int:
        return self.values.size - 1

    def __getitem__(self, k: int) -> float:
        return float(self.values[k])

    def scaled(self, eta: float) -> "MomentVector":
        """Moments of the field attenuated by intensity factor eta: m_k -> eta^k m_k."""
        k = np.arange(self.values.size)
        return MomentVector(self.values * eta ** k)

    def is_degenerate(self, k: int) -> bool:
        m1 = self.values[1]
        if m1 <= M1_FLOOR:
            return True
        return self.values[k] < ZERO_TOL * max(m1 ** k, m1)


def falling_factorial_weights(n_levels: int, k_max: int) -> np.ndarray:
    """``W[k, n] = n (n-1) ... (n-k+1)`` for k = 0..k_max, n = 0..n_levels-1."""
    n = np.arange(n_levels, dtype=float)
    W = np.ones((k_max + 1, n_levels))
    for k in range(1, k_max + 1):
        W[k] = W[k - 1] * (n - (k - 1))
    return np.clip(W, 0.0, None)


def moments_from_populations(p: np.ndarray, k_max: int) -> MomentVector:
    p = np.asarray(p, dtype=float)
    p = p / p.sum()
    return MomentVector(falling_factorial_weights(p.size, k_max) @ p)


def normally_ordered_moments(rho: np.ndarray, k_max: int, space: SpaceConfig | None = None) -> MomentVector:
    """``<a+^k a^k>`` for k = 0..k_max from the cavity Fock populations of ``rho``."""
    if space is None:
        space = SpaceConfig(rho.shape[0] // 2 - 1)
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    if k_max >= space.n_photon_max:
        raise TruncationError(f"k_max={k_max} needs n_photon_max > k_max, have {space.n_photon_max}")
    return moments_from_populations(cavity_populations(rho, space), k_max)


def glauber_g(m: MomentVector, n: int) -> float:
    """Zero-delay Glauber function ``m_n / m_1^n``; NaN when there is no light."""
    if n < 2 or n > m.k_max:
        raise ValueError(f"order {n} outside 2..{m.k_max}")
    if m[1] <= M1_FLOOR:
        return float("nan")
    return m[n] / m[1] ** n


def differential_c(m: MomentVector, n: int) -> float:
    """``m_n - m_1^n``."""
    if n < 2 or n > m.k_max:
        raise ValueError(f"order {n} outside 2..{m.k_max}")
    return m[n] - m[1] ** n


def conditional_ratio(m: MomentVector, k: int) -> tuple[float, bool]:
    """Return ``(R_{k,k-1}, valid)``.

    The ratio is clamped to [RATIO_MIN, RATIO_MAX].  ``valid`` is False when the
    denominator moment m_{k-1} is below the zero tolerance, in which case the
    returned value is whatever the clamp gives and should not be trusted.
    """
    if k < 2 or k > m.k_max:
        raise ValueError(f"k={k} outside 2..{m.k_max}")
    valid = not m.is_degenerate(k - 1)
    num = m[k] * m[k - 2]
    den = m[k - 1] ** 2
    if den > 0:
        with np.errstate(over="ignore"):
            r = num / den
    else:
        r = RATIO_MAX if num > 0 else RATIO_MIN
    return float(np.clip(r, RATIO_MIN, RATIO_MAX)), valid


def correlation_measure(m: MomentVector, n: int, n_tr: int) -> float:
    """n-photon correlation measure with truncation ``n_tr``; 0 if any input ratio is invalid.

    Excesses no larger than ``EXCESS_TOL`` count as zero, so a coherent state
    (all R = 1 up to rounding) has measure exactly 0.
    """
    if not 2 <= n < n_tr <= m.k_max:
        raise ValueError(f"need 2 <= n < n_tr <= k_max, got n={n}, n_tr={n_tr}, k_max={m.k_max}")
    value = 1.0
    for k in range(2, n_tr + 1):
        r, valid = conditional_ratio(m, k)
        if not valid:
            return 0.0
        excess = r - 1.0 if k <= n else 1.0 / r - 1.0
        value *= excess if excess > EXCESS_TOL else 0.0
    return value


def classical_bound_check(m: MomentVector, tol: float = 1e-10) -> dict[int, bool]:
    """For k = 2..k_max, True where R_{k,k-1} < 1 - tol (Cauchy-Schwarz bound violated)."""
    if m.k_max < 2:
        raise ValueError("need k_max >= 2")
    out = {}
    for k in range(2, m.k_max + 1):
        r, valid = conditional_ratio(m, k)
        out[k] = bool(valid and r < 1.0 - tol)
    return out


def excitation_probabilities(rho: np.ndarray, n_max: int, space: SpaceConfig | None = None) -> np.ndarray:
    """Population of each total-excitation manifold {|n,g>, |n-1,e>} for n = 0..n_max."""
    if space is None:
        space = SpaceConfig(rho.shape[0] // 2 - 1)
    if n_max > space.n_photon_max:
        raise TruncationError(f"n_max={n_max} exceeds n_photon_max={space.n_photon_max}")
    diag = np.real(np.diagonal(rho)).reshape(2, space.n_levels)
    excited, ground = diag[0], diag[1]
    P = np.empty(n_max + 1)
    P[0] = ground[0]
    for n in range(1, n_max + 1):
        P[n] = ground[n] + excited[n - 1]
    return P


def photon_number_probabilities(rho: np.ndarray, n_max: int, space: SpaceConfig | None = None) -> np.ndarray:
    """Probability of n photons in the cavity (qubit traced out), n = 0..n_max.

    This is the P_n for which ``<a+^n a^n> ~ n! P_n`` holds at weak drive.
    """
    if space is None:
        space = SpaceConfig(rho.shape[0] // 2 - 1)
    if n_max > space.n_photon_max:
        raise TruncationError(f"n_max={n_max} exceeds n_photon_max={space.n_photon_max}")
    return cavity_populations(rho, space)[: n_max + 1]


@dataclass
class CorrelationReport:
    g_n: dict[int, float]
    c_n: dict[int, float]
    ratios: dict[int, float]
    ratio_valid: dict[int, bool]
    measure: dict[int, float]
    n_tr: dict[int, int]
    notes: list[str] = field(default_factory=list)


def correlation_report(m: MomentVector, measure_orders: dict[int, int]) -> CorrelationReport:
    """All correlation quantities for one moment vector.

    ``measure_orders`` maps each requested order n to its truncation N_tr.
    """
    g_n, c_n, ratios, valid = {}, {}, {}, {}
    notes = []
    for n in range(2, m.k_max + 1):
        g_n[n] = glauber_g(m, n)
        c_n[n] = differential_c(m, n)
        ratios[n], valid[n] = conditional_ratio(m, n)
    if m[1] <= M1_FLOOR:
        notes.append("no light: g_n undefined")
    bad = [k for k, ok in valid.items() if not ok]
    if bad:
        notes.append("degenerate ratios k=" + ",".join(map(str, bad)))
    measure = {n: correlation_measure(m, n, n_tr) for n, n_tr in sorted(measure_orders.items())}
    return CorrelationReport(g_n, c_n, ratios, valid, measure, dict(measure_orders), notes)


def thermal_moments(nbar: float, k_max: int) -> MomentVector:
    return MomentVector(np.array([factorial(k) * nbar ** k for k in range(k_max + 1)]))


def coherent_moments(intensity: float, k_max: int) -> MomentVector:
    return MomentVector(np.array([intensity ** k for k in range(k_max + 1)]))
