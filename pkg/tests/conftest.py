"""Shared fixtures and reference oracles for the test suite."""

from pathlib import Path

import numpy as np
import pytest

from resdyn import integrate_reference, read_trace_csv

REPO_ROOT = Path(__file__).resolve().parent.parent
NOTIONAL_CSV = REPO_ROOT / "data" / "notional.csv"


@pytest.fixture(scope="session")
def notional_trace():
    return read_trace_csv(NOTIONAL_CSV)


def reference_piecewise_constant(schedule, f_init, f0, grid):
    """RK4 oracle for piecewise-constant schedules.

    Integrates window by window so the fixed-step method never straddles
    a rate discontinuity; the grid must contain every breakpoint.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.empty(grid.size)
    f = float(f_init)
    pts = schedule.breakpoints
    for j, seg in enumerate(schedule.segments):
        i_lo = int(np.searchsorted(grid, pts[j]))
        i_hi = int(np.searchsorted(grid, pts[j + 1]))
        assert grid[i_lo] == pts[j] and grid[i_hi] == pts[j + 1], \
            "oracle grid must contain the breakpoints"
        sub = grid[i_lo:i_hi + 1]
        piece = integrate_reference(
            lambda t, s=seg: s.bonware_impact,
            lambda t, s=seg: s.malware_impact,
            f, f0, sub,
        )
        values[i_lo:i_hi + 1] = piece.values
        f = float(piece.values[-1])
    return values


def reference_piecewise_linear(schedule, f_init, f0, grid):
    """RK4 oracle for piecewise-linear schedules (window-local clocks)."""
    grid = np.asarray(grid, dtype=float)
    values = np.empty(grid.size)
    f = float(f_init)
    pts = schedule.breakpoints
    for j, seg in enumerate(schedule.segments):
        i_lo = int(np.searchsorted(grid, pts[j]))
        i_hi = int(np.searchsorted(grid, pts[j + 1]))
        assert grid[i_lo] == pts[j] and grid[i_hi] == pts[j + 1], \
            "oracle grid must contain the breakpoints"
        sub = grid[i_lo:i_hi + 1]
        t_lo = pts[j]
        piece = integrate_reference(
            lambda t, s=seg, t0=t_lo: s.bonware_at(t - t0),
            lambda t, s=seg, t0=t_lo: s.malware_at(t - t0),
            f, f0, sub,
        )
        values[i_lo:i_hi + 1] = piece.values
        f = float(piece.values[-1])
    return values
