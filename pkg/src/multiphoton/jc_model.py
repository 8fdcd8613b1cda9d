"""Driven Jaynes-Cummings model in the frame rotating at the drive frequency.

All rates are angular frequencies; the coupling ``g`` sets the unit (g = 1 in
every preset).  ``kappa`` is the cavity *field* decay rate, so the cavity
energy decays at ``2 * kappa``; ``gamma`` is the qubit energy decay rate.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .hilbert import SpaceConfig, composite_operators


@dataclass(frozen=True)
class JCParams:
    g: float = 1.0
    kappa: float = 0.05
    gamma: float = 0.1
    drive: float = 0.005
    delta: float = 0.0

    def __post_init__(self):
        # g = 0 is allowed: the decoupled driven cavity is the analytic oracle
        for name in ("g", "kappa", "gamma", "drive"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        if not np.isfinite(self.delta):
            raise ValueError("delta must be finite")

    @classmethod
    def from_ratios(cls, two_kappa_over_g: float, gamma_over_g: float,
                    drive_over_kappa: float, delta_over_g: float = 0.0,
                    g: float = 1.0) -> "JCParams":
        """Build parameters from the dimensionless ratios used in the figure captions."""
        if not g > 0:
            raise ValueError("ratios to g need g > 0")
        kappa = 0.5 * two_kappa_over_g * g
        return cls(g=g, kappa=kappa, gamma=gamma_over_g * g,
                   drive=drive_over_kappa * kappa, delta=delta_over_g * g)

    def with_delta(self, delta: float) -> "JCParams":
        return dataclasses.replace(self, delta=float(delta))


def interaction_hamiltonian(p: JCParams, space: SpaceConfig) -> np.ndarray:
    """H_I / hbar = delta (a+a + sz/2) + i g (a+ s- - a s+) + i E (a+ - a)."""
    ops = composite_operators(space)
    a, ad, sm, sp, sz = ops["a"], ops["ad"], ops["sm"], ops["sp"], ops["sz"]
    H = (p.delta * (ad @ a + 0.5 * sz)
         + 1j * p.g * (ad @ sm - a @ sp)
         + 1j * p.drive * (ad - a))
    # remove round-off asymmetry
    return 0.5 * (H + H.conj().T)


def dressed_energy(n: int, branch: int, g: float = 1.0) -> float:
    """Rotating-frame energy of the n-excitation polariton, ``branch * g * sqrt(n)``.

    ``branch`` is +1 or -1.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if branch not in (1, -1):
        raise ValueError(f"branch must be +1 or -1, got {branch}")
    return branch * g * np.sqrt(n)


def resonance_detunings(n: int, g: float = 1.0) -> tuple[float, float]:
    """Detunings at which the drive is n-photon resonant with a polariton pair."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    d = g / np.sqrt(n)
    return (-d, d)
