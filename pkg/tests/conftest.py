"""Shared expensive fixtures (preset scans, the fig2 click-record ensemble) and
the acceptance summary printed at the end of the run."""
import time

import numpy as np
import pytest

from multiphoton.hilbert import SpaceConfig
from multiphoton.scan import figure_preset, run_scan
from multiphoton.trajectories import mcwf_ensemble

# fig2 ensemble at delta = g/sqrt2: 2000 trajectories of 5e7/g each
ENSEMBLE_SEED = 2024
ENSEMBLE_N_TRAJ = 2000
ENSEMBLE_DURATION = 5e7

# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE = {}
N_CRITERIA = 9


def _timed_scan(name):
    t = time.perf_counter()
    table = run_scan(figure_preset(name))
    table.elapsed = time.perf_counter() - t
    return table


@pytest.fixture(scope="session")
def fig1c_table():
    return _timed_scan("fig1c")


@pytest.fixture(scope="session")
def fig2_table():
    return _timed_scan("fig2")


@pytest.fixture(scope="session")
def fig3_table():
    return _timed_scan("fig3")


@pytest.fixture(scope="session")
def fig2_ensemble():
    cfg = figure_preset("fig2")
    p = cfg.params(1 / np.sqrt(2))
    t = time.perf_counter()
    rec = mcwf_ensemble(p, SpaceConfig(cfg.n_photon_max), ENSEMBLE_DURATION, ENSEMBLE_N_TRAJ, ENSEMBLE_SEED)
    rec.elapsed = time.perf_counter() - t
    return p, rec


@pytest.fixture(scope="session")
def fig2_averaged():
    """Smaller fig2 ensembles carrying per-trajectory time averages, keyed by delta/g."""
    cfg = figure_preset("fig2")
    out = {}
    for seed, delta in enumerate((0.0, 1 / np.sqrt(2)), start=808):
        p = cfg.params(delta)
        out[delta] = p, mcwf_ensemble(p, SpaceConfig(cfg.n_photon_max), 5e7, 200, seed, with_averages=True)
    return out


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n in ACCEPTANCE:
            ok, detail = ACCEPTANCE[n]
            terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n}: NOT RUN  (deselected, or errored before its check)")
