"""Distance-to-sound mapping: zone classification and membrane parameters.

Raw signed distances pick one of four navigation zones; normalized
distances then drive piecewise-linear parameter ramps per zone. The strike
scheduler turns the current repetition interval into excitation times,
parking-sensor style: a new interval takes hold at the next strike, never
mid-interval.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Callable

# Raw-distance zone thresholds (mm)
PERICARDIUM_NEAR_MM = 5.0
PERICARDIUM_CROSSED_MM = 0.0
MYOCARDIUM_DANGER_MM = 2.0

# Default normalization bounds (mm)
D_TP_BOUNDS = (1.0, 60.0)
D_TM_BOUNDS = (1.0, 30.0)


class ConfigurationError(ValueError):
    pass


class SonificationState(enum.Enum):
    OUTER_PERICARDIAL_ZONE = "S1"
    PRE_PUNCTURE_ZONE = "S2"
    SAFE_PUNCTURE_ZONE = "S3"
    MYOCARDIUM = "S4"


S1 = SonificationState.OUTER_PERICARDIAL_ZONE
S2 = SonificationState.PRE_PUNCTURE_ZONE
S3 = SonificationState.SAFE_PUNCTURE_ZONE
S4 = SonificationState.MYOCARDIUM


@dataclass(frozen=True)
class MembraneControl:
    """Synthesis parameter set published to the membrane voice."""

    f0: float          # fundamental frequency, Hz
    beta: float        # constant loss coefficient
    alpha: float       # frequency-dependent loss coefficient
    delta_t_ms: float  # strike repetition interval
    force: float       # excitation amplitude, constant across states
    state: SonificationState

    def as_dict(self) -> dict:
        return {
            "f0": self.f0,
            "beta": self.beta,
            "alpha": self.alpha,
            "delta_t_ms": self.delta_t_ms,
            "force": self.force,
            "state": self.state.value,
        }


#: Far-field resting control: the engine idles here before navigation input.
DEFAULT_CONTROL = MembraneControl(
    f0=100.0, beta=2.0, alpha=10.0, delta_t_ms=500.0, force=1.0, state=S1
)


@dataclass(frozen=True)
class NormalizedDistances:
    d_tp_hat: float
    d_tm_hat: float


def normalize(d: float, d_min: float, d_max: float) -> float:
    """Clamp ``d`` into [d_min, d_max] and scale linearly onto [0, 1]."""
    if d_max <= d_min:
        raise ConfigurationError("d_max must exceed d_min")
    clipped = min(max(d, d_min), d_max)
    return (clipped - d_min) / (d_max - d_min)


def normalize_pair(
    d_tp: float,
    d_tm: float,
    tp_bounds: tuple[float, float] = D_TP_BOUNDS,
    tm_bounds: tuple[float, float] = D_TM_BOUNDS,
) -> NormalizedDistances:
    return NormalizedDistances(
        d_tp_hat=normalize(d_tp, *tp_bounds),
        d_tm_hat=normalize(d_tm, *tm_bounds),
    )


def classify_state(d_tp: float, d_tm: float) -> SonificationState:
    """Zone from raw signed distances, checked in fixed danger-first order.

    The myocardium proximity test wins over everything; then pericardial
    crossing, then pericardial approach, then the outer zone. Total on all
    float inputs (+inf lands in the outer zone).
    """
    if d_tm <= MYOCARDIUM_DANGER_MM:
        return S4
    if d_tp <= PERICARDIUM_CROSSED_MM:
        return S3
    if d_tp <= PERICARDIUM_NEAR_MM:
        return S2
    return S1


def _ramp(x: float, x_from: float, x_to: float, y_from: float, y_to: float) -> float:
    """Linear ramp y(x) between two anchor points, clamped to the segment.

    ``x_from`` maps to ``y_from`` and ``x_to`` to ``y_to``; inputs outside
    the anchor interval stick to the nearer edge value.
    """
    lo, hi = (x_from, x_to) if x_from < x_to else (x_to, x_from)
    x = min(max(x, lo), hi)
    t = (x - x_from) / (x_to - x_from)
    return y_from + t * (y_to - y_from)


def map_params(
    state: SonificationState,
    norm: NormalizedDistances,
    previous: MembraneControl,
) -> MembraneControl:
    """Zone-dependent parameter update with hold-over for unlisted parameters.

    Each zone pins or ramps f0/beta/alpha/delta_t; the excitation force is
    never zone-listed and carries over unchanged from ``previous``.
    """
    tp, tm = norm.d_tp_hat, norm.d_tm_hat
    if state is S1:
        return replace(
            previous, state=state, f0=100.0, beta=2.0, alpha=10.0,
            delta_t_ms=_ramp(tp, 1.0, 0.5, 500.0, 271.0),
        )
    if state is S2:
        return replace(
            previous, state=state, f0=100.0,
            beta=_ramp(tm, 1.0, 0.5, 2.0, 1.06),
            alpha=_ramp(tm, 1.0, 0.5, 10.0, 5.075),
            delta_t_ms=_ramp(tp, 0.5, 0.0, 270.0, 40.0),
        )
    if state is S3:
        return replace(
            previous, state=state, f0=400.0,
            beta=_ramp(tm, 0.5, 0.0, 1.05, 0.1),
            alpha=_ramp(tm, 0.5, 0.0, 5.075, 0.15),
            delta_t_ms=40.0,
        )
    return replace(
        previous, state=state, f0=1000.0, beta=0.1, alpha=0.15, delta_t_ms=40.0
    )


def control_for_distances(
    d_tp: float, d_tm: float, previous: MembraneControl
) -> MembraneControl:
    """classify + normalize + map in one step (the per-sample hot path)."""
    state = classify_state(d_tp, d_tm)
    return map_params(state, normalize_pair(d_tp, d_tm), previous)


class ExcitationScheduler:
    """Emits strike times spaced by the interval current at each emission.

    ``poll(until, interval_s)`` returns every event time in [next, until);
    ``interval_s`` maps an emission time to the repetition interval then in
    force. Interval changes between strikes never reschedule the pending
    strike.
    """

    def __init__(self, first_event: float = 0.0):
        self._next = float(first_event)

    @property
    def next_event(self) -> float:
        return self._next

    def poll(self, until: float, interval_s: Callable[[float], float] | float) -> list[float]:
        provider = interval_s if callable(interval_s) else (lambda _t: interval_s)
        events = []
        while self._next < until:
            events.append(self._next)
            step = float(provider(self._next))
            if step <= 0:
                raise ConfigurationError("excitation interval must be positive")
            self._next += step
        return events
