"""Detuning sweeps of the driven JC steady state and spectral peak finding."""
from __future__ import annotations

import dataclasses
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.signal

from . import __version__
from .hilbert import SpaceConfig
from .jc_model import JCParams
from .lindblad import SolverError, jc_liouvillian, steady_state
from .moments import correlation_report, normally_ordered_moments

log = logging.getLogger(__name__)

TAIL_TOL = 1e-8
ESCALATION_STEP = 5
MAX_ESCALATIONS = 3
DIAGNOSTIC_COLUMNS = ("n_photon_max", "residual", "truncation_tail", "status")


@dataclass(frozen=True)
class ScanConfig:
    """Sweep definition.  Rates are given as ratios to g, as in the figure captions."""

    two_kappa_over_g: float
    gamma_over_g: float
    drive_over_kappa: float
    delta_min: float = -1.5
    delta_max: float = 1.5
    delta_count: int = 301
    n_photon_max: int = 12
    k_max: int = 5
    measure_orders: dict[int, int] = field(default_factory=dict)
    outputs: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.delta_count < 2:
            raise ValueError("grid count must be >= 2")
        if not self.k_max < self.n_photon_max:
            raise ValueError(f"k_max={self.k_max} must be < n_photon_max={self.n_photon_max}")
        mo = {int(n): int(t) for n, t in dict(self.measure_orders).items()}
        for n, n_tr in mo.items():
            if not 2 <= n < n_tr <= self.k_max:
                raise ValueError(f"measure order {n} with N_tr={n_tr} incompatible with k_max={self.k_max}")
        object.__setattr__(self, "measure_orders", mo)
        if self.outputs is not None:
            unknown = set(self.outputs) - set(all_columns(self.k_max, mo))
            if unknown:
                raise ValueError(f"unknown output columns: {sorted(unknown)}")
            object.__setattr__(self, "outputs", tuple(self.outputs))

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.delta_min, self.delta_max, self.delta_count)

    def params(self, delta_over_g: float) -> JCParams:
        return JCParams.from_ratios(self.two_kappa_over_g, self.gamma_over_g,
                                    self.drive_over_kappa, delta_over_g)

    def columns(self) -> list[str]:
        if self.outputs is not None:
            return ["delta_over_g"] + [c for c in self.outputs if c != "delta_over_g"]
        return quantity_columns(self.k_max, self.measure_orders)

    def replace(self, **changes) -> "ScanConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["measure_orders"] = {str(n): t for n, t in self.measure_orders.items()}
        if d["outputs"] is not None:
            d["outputs"] = list(d["outputs"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScanConfig":
        d = dict(d)
        if "grid" in d:
            d["delta_min"], d["delta_max"], d["delta_count"] = parse_grid(d.pop("grid"))
        if "measure_orders" in d:
            d["measure_orders"] = {int(n): int(t) for n, t in d["measure_orders"].items()}
        if d.get("outputs") is not None:
            d["outputs"] = tuple(d["outputs"])
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def parse_grid(spec) -> tuple[float, float, int]:
    """``"min:max:count"`` (or a 3-sequence) -> (min, max, count)."""
    parts = spec.split(":") if isinstance(spec, str) else list(spec)
    if len(parts) != 3:
        raise ValueError(f"grid must be min:max:count, got {spec!r}")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    return lo, hi, n


def quantity_columns(k_max: int, measure_orders: dict[int, int]) -> list[str]:
    cols = ["delta_over_g"]
    cols += [f"m{k}" for k in range(1, k_max + 1)]
    cols += [f"g{k}" for k in range(2, k_max + 1)]
    cols += [f"c{k}" for k in range(2, k_max + 1)]
    cols += [f"r{k}{k - 1}" for k in range(2, k_max + 1)]
    cols += [f"M{n}" for n in sorted(measure_orders)]
    return cols


def all_columns(k_max: int, measure_orders: dict[int, int]) -> list[str]:
    return quantity_columns(k_max, measure_orders) + list(DIAGNOSTIC_COLUMNS)


PRESETS = {
    # 2 kappa/g = gamma/g = 0.01, E/kappa = 0.1
    "fig1c": dict(two_kappa_over_g=0.01, gamma_over_g=0.01, drive_over_kappa=0.1,
                  n_photon_max=12, k_max=4, measure_orders={}),
    # 2 kappa/g = gamma/g = E/kappa = 0.1; N_tr = 4 for M2, 5 for M3 and M4
    "fig2": dict(two_kappa_over_g=0.1, gamma_over_g=0.1, drive_over_kappa=0.1,
                 n_photon_max=12, k_max=5, measure_orders={2: 4, 3: 5, 4: 5}),
    # E/kappa = 1 with 2 kappa/g = gamma/g = 0.1; N_tr = 4 for M2, 5 for M3
    "fig3": dict(two_kappa_over_g=0.1, gamma_over_g=0.1, drive_over_kappa=1.0,
                 n_photon_max=20, k_max=5, measure_orders={2: 4, 3: 5}),
}


def figure_preset(name: str) -> ScanConfig:
    try:
        kw = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return ScanConfig(**kw)


@dataclass
class SpectrumTable:
    """Rows (dicts keyed by column name) sorted by detuning, plus run metadata."""

    config: ScanConfig
    rows: list[dict]

    @property
    def failed(self) -> list[dict]:
        return [r for r in self.rows if r["status"] != "ok"]

    def column(self, name: str) -> np.ndarray:
        if self.rows and name not in self.rows[0]:
            raise KeyError(f"no column {name!r}")
        return np.array([r[name] for r in self.rows], dtype=float)

    @property
    def delta(self) -> np.ndarray:
        return self.column("delta_over_g")

    def to_csv(self, timestamp: str | None = None) -> str:
        buf = io.StringIO()
        buf.write(f"# multiphoton {__version__}\n")
        if timestamp is not None:
            buf.write(f"# timestamp={timestamp}\n")
        buf.write("# config=" + json.dumps(self.config.to_dict(), sort_keys=True) + "\n")
        for r in self.failed:
            buf.write(f"# failed delta_over_g={_fmt(r['delta_over_g'])}: {r['status']}\n")
        cols = self.config.columns()
        buf.write(",".join(cols) + "\n")
        for r in self.rows:
            buf.write(",".join(_fmt(r[c]) for c in cols) + "\n")
        return buf.getvalue()

    def write_csv(self, path: str | Path, timestamp: str | None = None) -> None:
        Path(path).write_text(self.to_csv(timestamp))


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def solve_point(cfg: ScanConfig, delta_over_g: float, n_photon_max: int | None = None) -> dict:
    """Steady-state correlation quantities at one detuning, escalating truncation as needed."""
    p = cfg.params(delta_over_g)
    n_max = cfg.n_photon_max if n_photon_max is None else n_photon_max
    row = {c: float("nan") for c in all_columns(cfg.k_max, cfg.measure_orders)}
    row["delta_over_g"] = float(delta_over_g)
    status = "ok"
    for attempt in range(MAX_ESCALATIONS + 1):
        space = SpaceConfig(n_max)
        try:
            res = steady_state(jc_liouvillian(p, space))
        except SolverError as exc:
            status = f"solver error: {exc}"
            break
        row.update(n_photon_max=n_max, residual=res.residual, truncation_tail=res.truncation_tail)
        if res.truncation_tail < TAIL_TOL:
            break
        if attempt == MAX_ESCALATIONS:
            status = f"truncation tail {res.truncation_tail:.3e} at n_photon_max={n_max}"
            break
        n_max += ESCALATION_STEP
    row["status"] = status
    if status != "ok":
        log.warning("delta/g=%g failed: %s", delta_over_g, status)
        return row
    m = normally_ordered_moments(res.rho, cfg.k_max, space)
    rep = correlation_report(m, cfg.measure_orders)
    for k in range(1, cfg.k_max + 1):
        row[f"m{k}"] = m[k]
    for k in range(2, cfg.k_max + 1):
        row[f"g{k}"] = rep.g_n[k]
        row[f"c{k}"] = rep.c_n[k]
        row[f"r{k}{k - 1}"] = rep.ratios[k]
    for n, v in rep.measure.items():
        row[f"M{n}"] = v
    row["ratio_valid"] = dict(rep.ratio_valid)
    row["notes"] = list(rep.notes)
    return row


def _solve_many(cfg, deltas, n_photon_max):
    return [solve_point(cfg, d, n_photon_max) for d in deltas]


def run_scan(cfg: ScanConfig, workers: int = 1, deltas=None, n_photon_max: int | None = None) -> SpectrumTable:
    """Solve every grid point (or the given ``deltas``) and collect a sorted table.

    Rows that fail keep NaN quantities and a status message; the scan itself
    never aborts on a single point.
    """
    deltas = cfg.grid if deltas is None else np.asarray(deltas, dtype=float)
    if workers <= 1:
        rows = _solve_many(cfg, deltas, n_photon_max)
    else:
        chunks = [c for c in np.array_split(deltas, workers * 4) if c.size]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futures = [ex.submit(_solve_many, cfg, c, n_photon_max) for c in chunks]
            rows = [r for f in futures for r in f.result()]
    rows.sort(key=lambda r: r["delta_over_g"])
    return SpectrumTable(cfg, rows)


def find_peaks(table: SpectrumTable, column: str, rel_prominence: float = 0.05) -> list[tuple[float, float]]:
    """Local maxima of ``column`` whose prominence exceeds ``rel_prominence`` times the column max."""
    y = table.column(column)
    x = table.delta
    if y.size < 5:
        raise ValueError("need at least 5 grid points")
    finite = np.isfinite(y)
    if not finite.any():
        return []
    # failed rows (NaN) become valleys
    y = np.where(finite, y, np.min(y[finite]))
    top = np.max(y)
    if top <= 0:
        return []
    idx, _ = scipy.signal.find_peaks(y, prominence=rel_prominence * top)
    return [(float(x[i]), float(y[i])) for i in idx]
