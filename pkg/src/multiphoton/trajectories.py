"""Quantum-jump unraveling of the JC master equation and click-record statistics.

Jump operators are ``sqrt(2 kappa) a`` (cavity output) and ``sqrt(gamma) s-``
(qubit side channel).  Between jumps the unnormalized state evolves under

    H_eff = H_I - i (kappa a+a + gamma/2 s+s-)

and jump times are drawn with the waiting-time method: draw ``u ~ U(0, 1)``
and jump when ``||psi(t)||^2`` falls to ``u``.  Because H_eff is time
independent the no-jump evolution is propagated exactly through its
eigendecomposition, so a waiting time of 1e6/g costs the same as one of 1/g.

Each trajectory draws from its own Philox stream keyed by ``(seed, index)``;
results do not depend on how trajectories are distributed over workers.
"""
from __future__ import annotations

import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.optimize

from .hilbert import GROUND, SpaceConfig, composite_operators
from .jc_model import JCParams, interaction_hamiltonian

log = logging.getLogger(__name__)

CAVITY = 0
QUBIT = 1
CHANNEL_NAMES = {CAVITY: "cavity", QUBIT: "qubit"}
CHANNEL_CODES = {v: k for k, v in CHANNEL_NAMES.items()}

NORM_TOL = 1e-9
MIN_BINS = 1000
# Gauss-Legendre rule used for time averages along no-jump segments
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class SimulationError(RuntimeError):
    pass


class StatisticsError(ValueError):
    pass


@dataclass
class ClickRecord:
    """Photodetection events of a trajectory ensemble.

    ``times`` are measured from the end of the discarded transient and lie in
    ``[0, duration]``.  Rows are ordered by trajectory index, then time.
    ``averages`` optionally holds per-trajectory time averages of observables.
    """

    trajectory: np.ndarray
    times: np.ndarray
    channels: np.ndarray
    duration: float
    n_trajectories: int
    seed: int
    averages: dict[str, np.ndarray] = field(default_factory=dict)

    def channel_mask(self, channel: int) -> np.ndarray:
        return self.channels == channel

    def counts(self, channel: int = CAVITY) -> np.ndarray:
        """Number of clicks per trajectory on ``channel``."""
        sel = self.trajectory[self.channel_mask(channel)]
        return np.bincount(sel, minlength=self.n_trajectories)

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# seed={self.seed}\n")
        buf.write(f"# duration={self.duration:.12g}\n")
        buf.write(f"# n_traj={self.n_trajectories}\n")
        for i, t, c in zip(self.trajectory, self.times, self.channels):
            buf.write(f"{i}\t{t:.12g}\t{CHANNEL_NAMES[int(c)]}\n")
        return buf.getvalue()

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "ClickRecord":
        header = {}
        traj, times, chans = [], [], []
        for line in text.splitlines():
            if not line.strip():
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key.strip()] = value.strip()
                continue
            i, t, c = line.split("\t")
            traj.append(int(i))
            times.append(float(t))
            chans.append(CHANNEL_CODES[c.strip()])
        return cls(
            trajectory=np.array(traj, dtype=np.int64),
            times=np.array(times, dtype=float),
            channels=np.array(chans, dtype=np.int8),
            duration=float(header["duration"]),
            n_trajectories=int(header["n_traj"]),
            seed=int(header["seed"]),
        )

    @classmethod
    def read(cls, path: str | Path) -> "ClickRecord":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class RatioEstimate:
    k: int
    value: float
    std_error: float
    n_bins: int
    bin_width: float
    valid: bool = True


def transient_time(p: JCParams) -> float:
    """Discarded start-up interval, 10 / min(gamma, 2 kappa)."""
    rates = [r for r in (p.gamma, 2 * p.kappa) if r > 0]
    if not rates:
        raise ValueError("need gamma > 0 or kappa > 0 for a stationary unraveling")
    return 10.0 / min(rates)


def default_bin_width(p: JCParams) -> float:
    return 0.05 / (2 * p.kappa)


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


class NoJumpPropagator:
    """Exact propagation of ``psi' = -i H_eff psi``."""

    def __init__(self, H_eff: np.ndarray):
        self.H = H_eff
        w, V = scipy.linalg.eig(H_eff)
        self.cond = np.linalg.cond(V)
        self.use_eig = self.cond < 1e8
        if self.use_eig:
            self.w = w
            self.V = V
            self.Vinv = np.linalg.inv(V)
        else:
            log.warning("H_eff eigenbasis ill-conditioned (cond=%.2e); using expm", self.cond)

    def coefficients(self, psi: np.ndarray) -> np.ndarray:
        return self.Vinv @ psi if self.use_eig else psi

    def states(self, c: np.ndarray, t) -> np.ndarray:
        """States at the times ``t`` (scalar or 1-d array), from coefficients ``c``."""
        t = np.asarray(t, dtype=float)
        if self.use_eig:
            phases = np.exp(-1j * np.multiply.outer(t, self.w))
            return (phases * c) @ self.V.T
        if t.ndim == 0:
            return scipy.linalg.expm(-1j * self.H * t) @ c
        return np.array([scipy.linalg.expm(-1j * self.H * s) @ c for s in t])

    def norm2(self, c: np.ndarray, t: float) -> float:
        psi = self.states(c, t)
        return float(np.real(np.vdot(psi, psi)))


def _grid_edges(a: float, b: float, h: float, t_fine: float) -> np.ndarray:
    """Subinterval edges on [a, b]: step h up to t_fine, then geometric growth."""
    edges = [a]
    x = a
    while x < b:
        step = h if x < t_fine else max(h, 0.5 * (x - t_fine))
        x = min(b, x + step)
        edges.append(x)
    return np.asarray(edges)


def _gauss_legendre(edges: np.ndarray):
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * _GL_X).ravel()
    weights = (half[:, None] * _GL_W).ravel()
    return nodes, weights


def _quadrature_nodes(a: float, b: float, h: float, t_fine: float):
    """Gauss-Legendre nodes/weights covering [a, b]: step h up to t_fine, then geometric."""
    return _gauss_legendre(_grid_edges(a, b, h, t_fine))


class _Unraveling:
    def __init__(self, p: JCParams, space: SpaceConfig):
        ops = composite_operators(space)
        self.space = space
        self.jump_ops = [np.sqrt(2 * p.kappa) * ops["a"], np.sqrt(p.gamma) * ops["sm"]]
        H = interaction_hamiltonian(p, space)
        H_eff = H - 1j * (p.kappa * ops["n"] + 0.5 * p.gamma * (ops["sp"] @ ops["sm"]))
        self.prop = NoJumpPropagator(H_eff)
        # both observables are diagonal in the product basis
        self.observables = {
            "n_cavity": np.real(np.diagonal(ops["n"])),
            "n_qubit": np.real(np.diagonal(ops["sp"] @ ops["sm"])),
        }
        self.t_transient = transient_time(p)
        # one 8-point rule per step of the fastest coherent period / 2 pi
        self.h = 1.0 / max(p.g, abs(p.delta), p.kappa, p.gamma, p.drive)
        self.t_fine = self.t_transient
        # segments that start at a jump share one grid; its phases are cached
        self._edges = np.array([0.0])
        self._phases = np.empty((0, space.dim), dtype=complex)
        self._weights = np.empty(0)

    def _extend_grid(self, b):
        x = self._edges[-1]
        if x >= b:
            return
        new = [x]
        while x < b:
            x += self.h if x < self.t_fine else max(self.h, 0.5 * (x - self.t_fine))
            new.append(x)
        nodes, weights = _gauss_legendre(np.asarray(new))
        self._edges = np.concatenate([self._edges, new[1:]])
        self._weights = np.concatenate([self._weights, weights])
        self._phases = np.concatenate([self._phases, np.exp(-1j * np.multiply.outer(nodes, self.prop.w))])

    def _segment_states(self, c, a, b):
        if a != 0 or not self.prop.use_eig:
            nodes, weights = _quadrature_nodes(a, b, self.h, self.t_fine)
            return self.prop.states(c, nodes), weights
        self._extend_grid(b)
        k = int(np.searchsorted(self._edges, b, side="right")) - 1
        psi = (self._phases[: _GL_X.size * k] * c) @ self.prop.V.T
        weights = self._weights[: _GL_X.size * k]
        if self._edges[k] < b:
            nodes, w = _gauss_legendre(np.array([self._edges[k], b]))
            psi = np.concatenate([psi, self.prop.states(c, nodes)])
            weights = np.concatenate([weights, w])
        return psi, weights

    def _integrate(self, c, a, b, acc):
        psi, weights = self._segment_states(c, a, b)
        prob = np.abs(psi) ** 2
        norms = prob.sum(axis=1)
        for name, diag in self.observables.items():
            acc[name] += float(np.sum(weights * (prob @ diag) / norms))

    def run(self, duration: float, rng: np.random.Generator, with_averages: bool):
        t0 = self.t_transient
        t_end = t0 + duration
        psi = self.space.basis(0, GROUND)
        t = 0.0
        times, chans = [], []
        acc = {name: 0.0 for name in self.observables}
        prop = self.prop
        while True:
            nrm = np.linalg.norm(psi)
            if abs(nrm - 1.0) > NORM_TOL:
                raise SimulationError(f"state norm {nrm} after renormalization at t={t}")
            c = prop.coefficients(psi)
            u = rng.random()
            remaining = t_end - t
            n_end = prop.norm2(c, remaining)
            if not np.isfinite(n_end):
                raise SimulationError(f"non-finite norm at t={t}")
            if n_end >= u:
                tau = remaining
                jump = False
            else:
                log_u = np.log(u)

                def f(s):
                    return np.log(max(prop.norm2(c, s), 1e-300)) - log_u

                tau = scipy.optimize.brentq(f, 0.0, remaining, xtol=1e-12, rtol=1e-10)
                jump = True
            if with_averages and t + tau > t0:
                self._integrate(c, max(0.0, t0 - t), tau, acc)
            if not jump:
                break
            t += tau
            psi = prop.states(c, tau)
            rates = np.array([np.real(np.vdot(J @ psi, J @ psi)) for J in self.jump_ops])
            total = rates.sum()
            if not total > 0:
                raise SimulationError(f"zero jump rate at t={t} with decayed norm")
            ch = int(rng.random() * total >= rates[0])
            psi = self.jump_ops[ch] @ psi
            psi /= np.linalg.norm(psi)
            if t >= t0:
                times.append(t - t0)
                chans.append(ch)
        averages = {k: v / duration for k, v in acc.items()} if with_averages else {}
        return np.array(times), np.array(chans, dtype=np.int8), averages


def _run_chunk(p, space, duration, seed, indices, with_averages):
    model = _Unraveling(p, space)
    out = []
    for i in indices:
        out.append((i,) + model.run(duration, trajectory_rng(seed, i), with_averages))
    return out


def mcwf_ensemble(p: JCParams, space: SpaceConfig, duration: float, n_traj: int, seed: int,
                  workers: int = 1, with_averages: bool = False) -> ClickRecord:
    """Simulate ``n_traj`` quantum-jump trajectories and merge their click records.

    Each trajectory starts in ``|0, g>``, runs through the transient
    (``transient_time(p)``) and then records for ``duration``.  With
    ``with_averages`` the record also carries per-trajectory time averages of
    ``<a+a>`` and ``<s+s->`` over the recorded window.
    """
    if duration <= 0 or n_traj < 1:
        raise ValueError("duration must be positive and n_traj >= 1")
    indices = np.arange(n_traj)
    if workers <= 1:
        results = _run_chunk(p, space, duration, seed, indices, with_averages)
    else:
        chunks = np.array_split(indices, min(workers * 4, n_traj))
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futures = [ex.submit(_run_chunk, p, space, duration, seed, ch, with_averages) for ch in chunks]
            results = [r for fut in futures for r in fut.result()]
    results.sort(key=lambda r: r[0])
    traj = np.concatenate([np.full(len(r[1]), r[0], dtype=np.int64) for r in results])
    times = np.concatenate([r[1] for r in results]).astype(float)
    chans = np.concatenate([r[2] for r in results]).astype(np.int8)
    averages = {}
    if with_averages:
        for name in results[0][3]:
            averages[name] = np.array([r[3][name] for r in results])
    return ClickRecord(traj, times, chans, float(duration), int(n_traj), int(seed), averages)


def thin_record(r: ClickRecord, efficiency: float, seed: int) -> ClickRecord:
    """Keep each cavity click independently with probability ``efficiency``."""
    if not 0 < efficiency <= 1:
        raise ValueError(f"efficiency must lie in (0, 1], got {efficiency}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0x7417])))
    draws = rng.random(r.times.size)
    keep = (r.channels != CAVITY) | (draws < efficiency)
    return ClickRecord(r.trajectory[keep], r.times[keep], r.channels[keep],
                       r.duration, r.n_trajectories, r.seed, dict(r.averages))


def binned_factorial_sums(r: ClickRecord, bin_width: float, k_max: int):
    """Per-trajectory sums of falling factorials of cavity counts per bin.

    Returns ``(S, n_bins)`` where ``S[i, k] = sum_bins m (m-1) ... (m-k+1)``
    for trajectory i (``S[i, 0]`` is the bin count) and ``n_bins`` is the
    number of complete bins per trajectory.  Empty bins contribute only to
    ``S[:, 0]``, so the bins never need to be materialized.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    n_bins = int(np.floor(r.duration / bin_width))
    S = np.zeros((r.n_trajectories, k_max + 1))
    S[:, 0] = n_bins
    sel = r.channel_mask(CAVITY)
    traj = r.trajectory[sel]
    idx = np.floor(r.times[sel] / bin_width).astype(np.int64)
    inside = idx < n_bins
    traj, idx = traj[inside], idx[inside]
    if traj.size:
        keys = traj * n_bins + idx
        uniq, m = np.unique(keys, return_counts=True)
        owner = uniq // n_bins
        m = m.astype(float)
        ff = np.ones_like(m)
        for k in range(1, k_max + 1):
            ff = ff * (m - (k - 1))
            np.add.at(S[:, k], owner, ff)
    return S, n_bins


def _moments_from_sums(S: np.ndarray) -> np.ndarray:
    tot = S.sum(axis=0)
    return tot / tot[0]


def factorial_moments(r: ClickRecord, bin_width: float, k_max: int) -> np.ndarray:
    """``F[k] = <m (m-1) ... (m-k+1)>`` over all bins, k = 0..k_max.

    In the small-bin limit ``F[k] / bin_width**k`` estimates
    ``(eta * 2 kappa)**k <a+^k a^k>``.
    """
    S, n_bins = binned_factorial_sums(r, bin_width, k_max)
    if n_bins * r.n_trajectories < MIN_BINS:
        raise StatisticsError(f"only {n_bins * r.n_trajectories} bins; need >= {MIN_BINS}")
    return _moments_from_sums(S)


def _ratios(F: np.ndarray, k_max: int):
    out = np.full(k_max + 1, np.nan)
    for k in range(2, k_max + 1):
        if F[k - 1] > 0:
            out[k] = F[k] * F[k - 2] / F[k - 1] ** 2
    return out


def bootstrap_factorial_moments(r: ClickRecord, bin_width: float, k_max: int,
                                n_bootstrap: int = 500, seed: int = 0):
    """Factorial moments with bootstrap samples, resampling whole trajectories.

    Returns ``(F, samples)`` with ``samples`` of shape ``(n_bootstrap, k_max + 1)``.
    """
    S, n_bins = binned_factorial_sums(r, bin_width, k_max)
    if n_bins * r.n_trajectories < MIN_BINS:
        raise StatisticsError(f"only {n_bins * r.n_trajectories} bins; need >= {MIN_BINS}")
    F = _moments_from_sums(S)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0xB007])))
    n = r.n_trajectories
    samples = np.empty((n_bootstrap, k_max + 1))
    for b in range(n_bootstrap):
        pick = rng.integers(0, n, size=n)
        samples[b] = _moments_from_sums(S[pick])
    return F, samples


def estimate_ratios(r: ClickRecord, bin_width: float, k_max: int, n_bootstrap: int = 500,
                    seed: int = 0) -> list[RatioEstimate]:
    """Click-record estimates of R_{k,k-1} = F_k F_{k-2} / F_{k-1}^2 for k = 2..k_max."""
    F, samples = bootstrap_factorial_moments(r, bin_width, k_max, n_bootstrap, seed)
    n_bins = int(np.floor(r.duration / bin_width)) * r.n_trajectories
    point = _ratios(F, k_max)
    boot = np.array([_ratios(s, k_max) for s in samples])
    out = []
    for k in range(2, k_max + 1):
        if not np.isfinite(point[k]):
            out.append(RatioEstimate(k, 0.0, 0.0, n_bins, bin_width, valid=False))
            continue
        b = boot[:, k]
        b = b[np.isfinite(b)]
        se = float(np.std(b, ddof=1)) if b.size > 1 else 0.0
        out.append(RatioEstimate(k, float(point[k]), se, n_bins, bin_width))
    return out
