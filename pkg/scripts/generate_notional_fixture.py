#!/usr/bin/env python3
"""Generate the bundled notional incident trace (data/notional.csv).

The reference incident behind the bundled fixture is only described by its
summary statistics, not shipped as data, so this script reconstructs a
trace constrained to reproduce every one of them:

* samples at 1 s spacing on [0, 125] with normal functionality f0 = 1;
* the minimum value 0.27 is attained exactly on the plateau [64, 75] s,
  whose midpoint gives the switching time 69.5 s;
* seven strict decreases and two strict increases before the switch;
* one strict decrease and four strict increases in (69.5, 100];
* a recovery tail rising toward 0.95 after 100 s.

Event levels between the pinned ones carry a small seeded jitter so the
curve does not look hand-ruled; the jitter is far smaller than any event
step, so the counts above cannot change.  The construction is verified
against the package's own detection and counting before writing.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT / "src"))

from resdyn import count_activities, detect_switch_time  # noqa: E402
from resdyn.core import FunctionalityTrace, write_trace_csv  # noqa: E402

SEED = 20220917
JITTER = 0.004

# (event time, base level after the event, jitter allowed).  Levels are
# spaced by at least 0.03, so +-JITTER can never flip an event direction
# or undercut the 0.27 minimum.
EVENTS = [
    (5, 0.88, True),
    (14, 0.70, True),
    (22, 0.74, True),   # up
    (27, 0.60, True),
    (36, 0.47, True),
    (44, 0.52, True),   # up
    (50, 0.40, True),
    (58, 0.32, True),
    (64, 0.27, False),  # plateau level; pinned
    (76, 0.45, True),   # recovery begins after the plateau [64, 75]
    (84, 0.60, True),
    (88, 0.55, True),   # down
    (93, 0.72, True),
    (99, 0.80, True),
    (106, 0.87, True),
    (113, 0.91, True),
    (120, 0.94, True),
]

END_TIME = 125
F0 = 1.0


def build_trace() -> FunctionalityTrace:
    rng = np.random.default_rng(SEED)
    times = np.arange(END_TIME + 1, dtype=float)
    values = np.empty(times.size)
    level = F0
    pending = {
        t: (base + (rng.uniform(-JITTER, JITTER) if jitter else 0.0))
        for t, base, jitter in EVENTS
    }
    for k, t in enumerate(times):
        if t in pending:
            level = pending[t]
        values[k] = level
    return FunctionalityTrace(times, values, F0)


def verify(trace: FunctionalityTrace) -> None:
    switch = detect_switch_time(trace)
    assert switch == 69.5, f"switch time {switch} != 69.5"
    assert float(trace.values.min()) == 0.27, "minimum must be exactly 0.27"
    rates = count_activities(trace, switch, count_end=100.0)
    counts = (
        round(rates.malware_phase1 * 69.5),
        round(rates.bonware_phase1 * 69.5),
        round(rates.malware_phase2 * 30.5),
        round(rates.bonware_phase2 * 30.5),
    )
    assert counts == (7, 2, 1, 4), f"event counts {counts} != (7, 2, 1, 4)"
    plateau = trace.values[(trace.times >= 64) & (trace.times <= 75)]
    assert (plateau == 0.27).all(), "plateau must sit exactly at 0.27"
    others = trace.values[(trace.times < 64) | (trace.times > 75)]
    assert others.min() > 0.27 + 1e-6, "minimum must be unique to the plateau"


def main() -> int:
    trace = build_trace()
    verify(trace)
    out = REPO_ROOT / "data" / "notional.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out)
    print(f"wrote {out} ({trace.times.size} samples)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
