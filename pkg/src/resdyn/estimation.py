"""Parameter estimation from functionality traces.

Two estimators live here.

The fast two-phase recipe reads a single incident trace: locate the
switching time where decay turns into recovery (midpoint of the minimum
plateau), count up/down events in each phase to get activity rates, then
solve one small nonlinear system per phase for the impact rates.  Each
impact decomposes as impact = activity * effectiveness / 2, the
effectiveness being the upper bound of the uniform per-event effect (an
event averages half its bound).

The likelihood route scores step transitions under the stochastic model:
integrating out the per-step activity and effect draws leaves a mixture
of an atom at zero, two uniform components, and a trapezoid for the
both-agents-fired case.  ``grid_mle`` maximizes the summed log density
over an explicit parameter grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import product
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .core import ConstantImpacts, FunctionalityTrace, PiecewiseConstantSchedule
from .errors import DomainError, FitFailureError, NoSwitchError
from .stochastic import SdeParams

# Samples within this absolute tolerance of the minimum belong to the
# minimum plateau; consecutive samples closer than this do not count as
# up/down events.
MIN_WINDOW_TOL = 1e-9
EVENT_TOL = 1e-9

# Increments at most this close to zero are scored against the atom of
# the transition mixture.
ATOM_TOL = 1e-12

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class FitConfig:
    """Hyperparameters of the two-phase fitting recipe.

    ``decay_asymptote_fraction`` pins the phase-1 asymptote at that
    fraction of the observed minimum; ``recovery_asymptote`` is the
    normalized level the recovery approaches, and
    ``recovery_level_fraction`` is the fraction of that level the phase-2
    curve must reach at ``recovery_fit_end``.  Activities are counted up
    to ``activity_count_end``.  The two absolute endpoints default to the
    bundled notional incident (100 s and 125 s); override them for other
    missions.
    """

    decay_asymptote_fraction: float = 1.0 - 1.0 / math.e
    recovery_level_fraction: float = 1.0 - math.exp(-4.0)
    recovery_asymptote: float = 0.95
    activity_count_end: float = 100.0
    recovery_fit_end: float = 125.0
    min_window_policy: str = "midpoint"

    def __post_init__(self):
        for name in (
            "decay_asymptote_fraction",
            "recovery_level_fraction",
            "recovery_asymptote",
        ):
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not 0.0 < v < 1.0:
                raise DomainError(f"{name} must lie in (0, 1), got {v}")
        for name in ("activity_count_end", "recovery_fit_end"):
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v}")
        if self.min_window_policy != "midpoint":
            raise DomainError(
                f"unsupported min_window_policy {self.min_window_policy!r}"
            )


class ActivityRates(NamedTuple):
    """Event counts per second in each phase (strict up/down moves)."""

    malware_phase1: float
    bonware_phase1: float
    malware_phase2: float
    bonware_phase2: float


@dataclass(frozen=True)
class PhaseEstimate:
    """Fitted impacts of one phase with their activity/effectiveness split."""

    impacts: ConstantImpacts
    malware_activity: float
    bonware_activity: float
    malware_effectiveness: float
    bonware_effectiveness: float


@dataclass(frozen=True)
class FitResult:
    """Two-phase fit: switching time, per-phase estimates, and residuals."""

    switch_time: float
    phase1: PhaseEstimate
    phase2: PhaseEstimate
    schedule: PiecewiseConstantSchedule
    phase1_residual: float
    phase2_residual: float


def detect_switch_time(trace: FunctionalityTrace) -> float:
    """Midpoint of the maximal contiguous window attaining the minimum.

    Samples within MIN_WINDOW_TOL of the global minimum count as part of
    the plateau.  A minimum touching either end of the trace means the
    trend never reversed, which raises :class:`NoSwitchError`.
    """
    values = trace.values
    i_min = int(np.argmin(values))
    v_min = float(values[i_min])
    in_window = values <= v_min + MIN_WINDOW_TOL
    left = i_min
    while left - 1 >= 0 and in_window[left - 1]:
        left -= 1
    right = i_min
    while right + 1 < values.size and in_window[right + 1]:
        right += 1
    if left == 0 or right == values.size - 1:
        raise NoSwitchError(
            "the minimum sits on the trace boundary; no switching time exists"
        )
    return float(0.5 * (trace.times[left] + trace.times[right]))


def count_activities(trace: FunctionalityTrace, switch_time: float,
                     count_end: float) -> ActivityRates:
    """Strict up/down event counts per second, split at the switching time.

    An event is a consecutive-sample move larger than EVENT_TOL and is
    assigned to the time of its later sample; phase 1 covers events up to
    ``switch_time`` inclusive, phase 2 events up to ``count_end``
    inclusive.  Rates divide by the phase durations
    (switch_time - t0) and (count_end - switch_time).
    """
    t0 = trace.start_time
    if not t0 < switch_time < trace.end_time:
        raise DomainError(
            f"switch_time {switch_time} is outside the trace window"
        )
    if count_end <= switch_time:
        raise DomainError(
            f"count_end {count_end} must exceed switch_time {switch_time}"
        )
    diffs = np.diff(trace.values)
    ends = trace.times[1:]
    down = diffs < -EVENT_TOL
    up = diffs > EVENT_TOL
    phase1 = ends <= switch_time
    phase2 = (ends > switch_time) & (ends <= count_end)
    dur1 = switch_time - t0
    dur2 = count_end - switch_time
    return ActivityRates(
        malware_phase1=float(np.count_nonzero(down & phase1)) / dur1,
        bonware_phase1=float(np.count_nonzero(up & phase1)) / dur1,
        malware_phase2=float(np.count_nonzero(down & phase2)) / dur2,
        bonware_phase2=float(np.count_nonzero(up & phase2)) / dur2,
    )


def _newton_2x2(residual, jacobian, x0, feasible, max_iter=60):
    """Damped Newton for a 2-equation system; returns (x, residual_norm)."""
    x = np.asarray(x0, dtype=float)
    r = residual(x)
    norm = math.hypot(r[0], r[1])
    for _ in range(max_iter):
        if norm <= 1e-13:
            break
        j = jacobian(x)
        det = j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]
        if det == 0.0 or not math.isfinite(det):
            break
        step = np.array(
            [
                (-r[0] * j[1, 1] + r[1] * j[0, 1]) / det,
                (-r[1] * j[0, 0] + r[0] * j[1, 0]) / det,
            ]
        )
        scale = 1.0
        improved = False
        while scale >= 1.0 / 1024.0:
            candidate = x + scale * step
            if feasible(candidate):
                r_new = residual(candidate)
                norm_new = math.hypot(r_new[0], r_new[1])
                if norm_new < norm:
                    x, r, norm = candidate, r_new, norm_new
                    improved = True
                    break
            scale *= 0.5
        if not improved:
            break
    return x, norm


def _decay_feasible(x) -> bool:
    m, b = x
    return m >= 0.0 and b >= 0.0 and m + b > 0.0 and math.isfinite(m + b)


def fit_phase1(min_value: float, switch_elapsed: float, f_init: float,
               f0: float, config: FitConfig | None = None
               ) -> tuple[ConstantImpacts, float]:
    """Impacts of the decay phase from the data minimum and switch time.

    Solves the two-equation system: (i) the decay asymptote f0*b/(m+b)
    equals ``decay_asymptote_fraction * min_value``, and (ii) the
    constant-rate trajectory from ``f_init`` passes through ``min_value``
    after ``switch_elapsed`` seconds.  A damped Newton step with analytic
    Jacobian polishes a closed-form start; if it stalls, the monotone
    scalar reduction in q = m + b is bracketed instead.  Returns the
    fitted impacts and the final residual norm.
    """
    cfg = config or FitConfig()
    if not 0.0 < min_value < f_init <= f0:
        raise DomainError(
            f"need 0 < min_value < f_init <= f0, got "
            f"min_value={min_value}, f_init={f_init}, f0={f0}"
        )
    if switch_elapsed <= 0.0:
        raise DomainError(f"switch_elapsed must be > 0, got {switch_elapsed}")
    target_level = cfg.decay_asymptote_fraction * min_value
    horizon = switch_elapsed

    def residual(x):
        m, b = x
        q = m + b
        level = f0 * b / q
        decay = math.exp(-q * horizon)
        return np.array(
            [
                level - target_level,
                (f_init - level) * decay + level - min_value,
            ]
        )

    def jacobian(x):
        m, b = x
        q = m + b
        level = f0 * b / q
        decay = math.exp(-q * horizon)
        dl_dm = -f0 * b / q**2
        dl_db = f0 * m / q**2
        common = (level - f_init) * horizon * decay
        return np.array(
            [
                [dl_dm, dl_db],
                [common + dl_dm * (1.0 - decay), common + dl_db * (1.0 - decay)],
            ]
        )

    # Closed-form start: pin the asymptote, then the trajectory equation
    # is scalar and monotone in q.
    ratio = (min_value - target_level) / (f_init - target_level)
    q0 = -math.log(ratio) / horizon
    b0 = target_level * q0 / f0
    x0 = np.array([q0 - b0, b0])

    x, norm = _newton_2x2(residual, jacobian, x0, _decay_feasible)
    if norm > RESIDUAL_TOL:
        scalar = lambda q: (f_init - target_level) * math.exp(-q * horizon) \
            + target_level - min_value
        q = brentq(scalar, 1e-15, max(10.0, 4.0 * q0), xtol=1e-15)
        b = target_level * q / f0
        x = np.array([q - b, b])
        r = residual(x)
        norm = math.hypot(r[0], r[1])
    if norm > RESIDUAL_TOL or x[0] < 0.0 or x[1] < 0.0:
        raise FitFailureError(
            f"decay-phase system unsolved (residual {norm:.3g}, rates {x})",
            residuals=residual(x),
        )
    return ConstantImpacts(malware_impact=float(x[0]),
                           bonware_impact=float(x[1])), norm


def fit_phase2(min_value: float, switch_time: float, f0: float,
               config: FitConfig | None = None
               ) -> tuple[ConstantImpacts, float]:
    """Impacts of the recovery phase after the switching time.

    Solves: (i) the recovery asymptote f0*b/(m+b) equals
    ``recovery_asymptote * f0``, and (ii) the trajectory climbing from
    ``min_value`` reaches ``recovery_level_fraction`` of that asymptote at
    ``recovery_fit_end`` (an absolute mission time).  Same solver strategy
    as :func:`fit_phase1`.
    """
    cfg = config or FitConfig()
    if not math.isfinite(f0) or f0 <= 0.0:
        raise DomainError(f"f0 must be positive and finite, got {f0}")
    if not 0.0 < min_value < f0:
        raise DomainError(f"min_value must lie in (0, f0), got {min_value}")
    horizon = cfg.recovery_fit_end - switch_time
    if horizon <= 0.0:
        raise DomainError(
            f"recovery_fit_end {cfg.recovery_fit_end} must exceed the "
            f"switch time {switch_time}"
        )
    level_target = cfg.recovery_asymptote * f0
    reach_target = cfg.recovery_level_fraction * level_target
    if level_target <= min_value:
        raise FitFailureError(
            f"recovery asymptote {level_target} does not exceed the data "
            f"minimum {min_value}"
        )
    if reach_target <= min_value:
        raise FitFailureError(
            f"recovery target at recovery_fit_end ({reach_target}) does not "
            f"exceed the data minimum {min_value}"
        )

    def residual(x):
        m, b = x
        q = m + b
        level = f0 * b / q
        decay = math.exp(-q * horizon)
        return np.array(
            [
                level - level_target,
                (min_value - level) * decay + level - reach_target,
            ]
        )

    def jacobian(x):
        m, b = x
        q = m + b
        level = f0 * b / q
        decay = math.exp(-q * horizon)
        dl_dm = -f0 * b / q**2
        dl_db = f0 * m / q**2
        common = (level - min_value) * horizon * decay
        return np.array(
            [
                [dl_dm, dl_db],
                [common + dl_dm * (1.0 - decay), common + dl_db * (1.0 - decay)],
            ]
        )

    ratio = (level_target - reach_target) / (level_target - min_value)
    q0 = -math.log(ratio) / horizon
    b0 = level_target * q0 / f0
    x0 = np.array([q0 - b0, b0])

    x, norm = _newton_2x2(residual, jacobian, x0, _decay_feasible)
    if norm > RESIDUAL_TOL:
        scalar = lambda q: (min_value - level_target) * math.exp(-q * horizon) \
            + level_target - reach_target
        q = brentq(scalar, 1e-15, max(10.0, 4.0 * q0), xtol=1e-15)
        b = level_target * q / f0
        x = np.array([q - b, b])
        r = residual(x)
        norm = math.hypot(r[0], r[1])
    if norm > RESIDUAL_TOL or x[0] < 0.0 or x[1] < 0.0:
        raise FitFailureError(
            f"recovery-phase system unsolved (residual {norm:.3g}, rates {x})",
            residuals=residual(x),
        )
    return ConstantImpacts(malware_impact=float(x[0]),
                           bonware_impact=float(x[1])), norm


def _max_effectiveness(impact: float, activity: float) -> float:
    """Invert impact = activity * effectiveness / 2.

    The effectiveness is the uniform bound of the per-event effect, so an
    event averages half of it.  With no counted events the decomposition
    is undefined and NaN is returned.
    """
    if activity <= 0.0:
        return math.nan
    return 2.0 * impact / activity


def fit_piecewise(trace: FunctionalityTrace,
                  config: FitConfig | None = None) -> FitResult:
    """Full two-phase recipe: switch detection, counting, and both fits.

    The returned schedule has two windows split at the switching time and
    spans the trace; residual norms of both solved systems are reported in
    the result.
    """
    cfg = config or FitConfig()
    switch_time = detect_switch_time(trace)
    min_value = float(trace.values.min())
    rates = count_activities(trace, switch_time, cfg.activity_count_end)
    f_init = float(trace.values[0])
    impacts1, res1 = fit_phase1(
        min_value, switch_time - trace.start_time, f_init, trace.f0, cfg
    )
    impacts2, res2 = fit_phase2(min_value, switch_time, trace.f0, cfg)
    phase1 = PhaseEstimate(
        impacts=impacts1,
        malware_activity=rates.malware_phase1,
        bonware_activity=rates.bonware_phase1,
        malware_effectiveness=_max_effectiveness(
            impacts1.malware_impact, rates.malware_phase1
        ),
        bonware_effectiveness=_max_effectiveness(
            impacts1.bonware_impact, rates.bonware_phase1
        ),
    )
    phase2 = PhaseEstimate(
        impacts=impacts2,
        malware_activity=rates.malware_phase2,
        bonware_activity=rates.bonware_phase2,
        malware_effectiveness=_max_effectiveness(
            impacts2.malware_impact, rates.malware_phase2
        ),
        bonware_effectiveness=_max_effectiveness(
            impacts2.bonware_impact, rates.bonware_phase2
        ),
    )
    schedule = PiecewiseConstantSchedule(
        breakpoints=np.array([trace.start_time, switch_time, trace.end_time]),
        segments=(impacts1, impacts2),
    )
    return FitResult(
        switch_time=switch_time,
        phase1=phase1,
        phase2=phase2,
        schedule=schedule,
        phase1_residual=res1,
        phase2_residual=res2,
    )


def _transition_log_density(f_now, f_next, malware_activity, bonware_activity,
                            malware_effectiveness, bonware_effectiveness,
                            f0) -> np.ndarray:
    """Vectorized log density/mass of step transitions.

    Marginalizing the four per-step draws leaves, for the increment
    d = f_next - f_now with a = malware_effectiveness * f_now and
    b = bonware_effectiveness * (f0 - f_now):

    * an atom at 0 with mass (1-tm)(1-tb),
    * Uniform(-a, 0) with mass tm(1-tb),
    * Uniform(0, b) with mass (1-tm)tb,
    * the difference of two uniforms (a trapezoid on (-a, b)) with mass
      tm*tb.

    Components collapse into the atom where their width is zero (f_now at
    either bound).  Increments within ATOM_TOL of zero score log-mass;
    others score log-density, with -inf outside the support.
    """
    f_now = np.asarray(f_now, dtype=float)
    f_next = np.asarray(f_next, dtype=float)
    delta = f_next - f_now
    a = malware_effectiveness * f_now
    b = bonware_effectiveness * (f0 - f_now)
    tm = malware_activity
    tb = bonware_activity
    mal_only = tm * (1.0 - tb)
    bon_only = (1.0 - tm) * tb
    both = tm * tb

    a_gone = a <= 0.0
    b_gone = b <= 0.0
    atom = (
        (1.0 - tm) * (1.0 - tb)
        + np.where(a_gone, mal_only, 0.0)
        + np.where(b_gone, bon_only, 0.0)
        + np.where(a_gone & b_gone, both, 0.0)
    )

    a_safe = np.where(a_gone, 1.0, a)
    b_safe = np.where(b_gone, 1.0, b)
    dens = np.zeros_like(delta)
    dens += np.where(
        (delta < 0.0) & (delta > -a) & ~a_gone, mal_only / a_safe, 0.0
    )
    dens += np.where(
        (delta > 0.0) & (delta < b) & ~b_gone, bon_only / b_safe, 0.0
    )
    if both > 0.0:
        overlap = np.minimum(b, delta + a) - np.maximum(0.0, delta)
        trapezoid = np.where(overlap > 0.0, overlap, 0.0) / (a_safe * b_safe)
        dens += np.where(
            ~a_gone & ~b_gone & (delta > -a) & (delta < b),
            both * trapezoid,
            0.0,
        )
        dens += np.where(
            a_gone & ~b_gone & (delta > 0.0) & (delta < b),
            both / b_safe,
            0.0,
        )
        dens += np.where(
            b_gone & ~a_gone & (delta < 0.0) & (delta > -a),
            both / a_safe,
            0.0,
        )

    is_atom = np.abs(delta) <= ATOM_TOL
    with np.errstate(divide="ignore"):
        log_atom = np.log(atom)
        log_dens = np.log(dens)
    return np.where(is_atom, log_atom, log_dens)


def step_log_density(f_now: float, f_next: float, params: SdeParams,
                     f0: float) -> float:
    """Log density (or log mass at the zero atom) of one step transition.

    Onset times and the interaction cutoff in ``params`` are ignored: the
    density describes a step on which both agents are live.  Increments
    outside the reachable range score -inf rather than raising.
    """
    if not math.isfinite(f0) or f0 <= 0.0:
        raise DomainError(f"f0 must be positive and finite, got {f0}")
    for name, v in (("f_now", f_now), ("f_next", f_next)):
        if not math.isfinite(v) or not 0.0 <= v <= f0:
            raise DomainError(f"{name} must lie in [0, f0], got {v}")
    return float(
        _transition_log_density(
            f_now,
            f_next,
            params.malware_activity,
            params.bonware_activity,
            params.malware_effectiveness,
            params.bonware_effectiveness,
            f0,
        )
    )


@dataclass(frozen=True)
class GridAxis:
    """Inclusive arithmetic range start, start+step, ..., stop."""

    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not (math.isfinite(self.start) and math.isfinite(self.stop)
                and math.isfinite(self.step)):
            raise DomainError("grid axis bounds and step must be finite")
        if self.step <= 0.0:
            raise DomainError(f"grid step must be > 0, got {self.step}")
        if self.stop < self.start:
            raise DomainError(
                f"grid stop {self.stop} is below start {self.start}"
            )

    def values(self) -> np.ndarray:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9))
        return self.start + self.step * np.arange(count + 1)


@dataclass(frozen=True)
class MleGrid:
    """Search ranges for the four stochastic parameters."""

    malware_activity: GridAxis
    bonware_activity: GridAxis
    malware_effectiveness: GridAxis
    bonware_effectiveness: GridAxis

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        act_m = self.malware_activity.values()
        act_b = self.bonware_activity.values()
        eff_m = self.malware_effectiveness.values()
        eff_b = self.bonware_effectiveness.values()
        for name, axis in (("malware_activity", act_m),
                           ("bonware_activity", act_b)):
            if axis.min() < 0.0 or axis.max() > 1.0:
                raise DomainError(f"{name} grid leaves [0, 1]")
        for name, axis in (("malware_effectiveness", eff_m),
                           ("bonware_effectiveness", eff_b)):
            if axis.min() <= 0.0 or axis.max() > 1.0:
                raise DomainError(f"{name} grid leaves (0, 1]")
        return act_m, act_b, eff_m, eff_b


@dataclass(frozen=True)
class MleResult:
    """Grid maximum-likelihood estimate with the best-scoring cells."""

    params: SdeParams
    log_likelihood: float
    top_cells: tuple[tuple[float, SdeParams], ...]
    n_cells: int


def grid_mle(trace: FunctionalityTrace, grid: MleGrid,
             top_k: int = 5) -> MleResult:
    """Exhaustive grid search of the step-transition log likelihood.

    Cells are scored by the summed log density of consecutive-sample
    transitions (the trace must be sampled at the simulator's step).
    Ties, including all-(-inf) surfaces, resolve to the lexicographically
    smallest cell in (malware_activity, bonware_activity,
    malware_effectiveness, bonware_effectiveness) order, so the result is
    independent of enumeration or scheduling order.
    """
    act_m, act_b, eff_m, eff_b = grid.axes()
    n_cells = act_m.size * act_b.size * eff_m.size * eff_b.size
    if n_cells == 0:
        raise DomainError("parameter grid is empty")
    f_now = trace.values[:-1]
    f_next = trace.values[1:]
    scored: list[tuple[float, int, tuple[float, float, float, float]]] = []
    order = 0
    for tm, tb, gm, gb in product(act_m, act_b, eff_m, eff_b):
        ll = float(
            _transition_log_density(f_now, f_next, tm, tb, gm, gb,
                                    trace.f0).sum()
        )
        scored.append((ll, order, (float(tm), float(tb), float(gm), float(gb))))
        order += 1
    scored.sort(key=lambda item: (-item[0], item[1]))

    def cell_params(cell) -> SdeParams:
        tm, tb, gm, gb = cell
        return SdeParams(
            malware_activity=tm,
            bonware_activity=tb,
            malware_effectiveness=gm,
            bonware_effectiveness=gb,
        )

    top = tuple(
        (ll, cell_params(cell)) for ll, _, cell in scored[:max(1, top_k)]
    )
    best_ll, _, best_cell = scored[0]
    return MleResult(
        params=cell_params(best_cell),
        log_likelihood=best_ll,
        top_cells=top,
        n_cells=n_cells,
    )


def _clean_float(x: float):
    return None if math.isnan(x) else x


def fit_result_to_dict(result: FitResult) -> dict:
    """JSON-ready view of a :class:`FitResult`.

    Field names are part of the output contract; undefined effectiveness
    values (phases with no counted events) serialize as null.
    """

    def phase(p: PhaseEstimate) -> dict:
        return {
            "malware_impact": p.impacts.malware_impact,
            "bonware_impact": p.impacts.bonware_impact,
            "malware_activity": p.malware_activity,
            "bonware_activity": p.bonware_activity,
            "malware_effectiveness": _clean_float(p.malware_effectiveness),
            "bonware_effectiveness": _clean_float(p.bonware_effectiveness),
        }

    return {
        "switch_time": result.switch_time,
        "phase1": phase(result.phase1),
        "phase2": phase(result.phase2),
        "schedule": {
            "breakpoints": [float(t) for t in result.schedule.breakpoints],
            "segments": [
                {
                    "malware_impact": seg.malware_impact,
                    "bonware_impact": seg.bonware_impact,
                }
                for seg in result.schedule.segments
            ],
        },
        "diagnostics": {
            "phase1_residual": result.phase1_residual,
            "phase2_residual": result.phase2_residual,
        },
    }


def write_fit_result_json(result: FitResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(fit_result_to_dict(result), fh, indent=2)
        fh.write("\n")
