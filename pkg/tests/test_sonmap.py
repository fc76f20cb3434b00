import math
from dataclasses import replace

import numpy as np
import pytest

from sonoguide.sonmap import (
    DEFAULT_CONTROL,
    S1,
    S2,
    S3,
    S4,
    ConfigurationError,
    ExcitationScheduler,
    MembraneControl,
    NormalizedDistances,
    classify_state,
    control_for_distances,
    map_params,
    normalize,
    normalize_pair,
)

from oracles import state_oracle


def _norm(tp: float, tm: float) -> NormalizedDistances:
    return NormalizedDistances(d_tp_hat=tp, d_tm_hat=tm)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def test_normalize_clamps_and_scales():
    assert normalize(60.0, 1.0, 60.0) == 1.0
    assert normalize(-3.0, 1.0, 60.0) == 0.0
    assert normalize(30.5, 1.0, 60.0) == pytest.approx(0.5)  # (30.5-1)/59
    assert normalize(1.0, 1.0, 60.0) == 0.0


def test_normalize_bad_bounds():
    with pytest.raises(ConfigurationError):
        normalize(5.0, 10.0, 10.0)


def test_normalize_pair_default_bounds():
    n = normalize_pair(60.0, 30.0)
    assert n.d_tp_hat == 1.0 and n.d_tm_hat == 1.0
    n = normalize_pair(0.0, 0.0)
    assert n.d_tp_hat == 0.0 and n.d_tm_hat == 0.0


# ---------------------------------------------------------------------------
# State classification
# ---------------------------------------------------------------------------

def test_classify_state_zone_cases():
    assert classify_state(10.0, 15.0) is S1
    assert classify_state(-3.0, 1.5) is S4   # danger wins over the crossed sac
    assert classify_state(0.0, 5.0) is S3    # boundary inclusive
    assert classify_state(3.0, 2.5) is S2
    assert classify_state(5.0, 2.5) is S2    # boundary inclusive
    assert classify_state(math.inf, math.inf) is S1
    assert classify_state(math.inf, 1.0) is S4


def test_classify_state_matches_oracle_grid():
    for d_tp in np.arange(-5.0, 70.0, 0.7):
        for d_tm in np.arange(-5.0, 40.0, 0.7):
            assert classify_state(d_tp, d_tm).value == state_oracle(d_tp, d_tm)


# ---------------------------------------------------------------------------
# Parameter mapping
# ---------------------------------------------------------------------------

def test_map_params_zone1_interval():
    prev = DEFAULT_CONTROL
    c = map_params(S1, _norm(1.0, 1.0), prev)
    assert (c.f0, c.beta, c.alpha, c.delta_t_ms) == (100.0, 2.0, 10.0, 500.0)
    c = map_params(S1, _norm(0.5, 1.0), prev)
    assert c.delta_t_ms == pytest.approx(271.0)
    c = map_params(S1, _norm(0.75, 1.0), prev)
    assert c.delta_t_ms == pytest.approx(385.5)  # midpoint of [500, 271]
    # Below the interval the value parks at the near edge.
    c = map_params(S1, _norm(0.1, 1.0), prev)
    assert c.delta_t_ms == pytest.approx(271.0)


def test_map_params_zone2_ramps():
    prev = DEFAULT_CONTROL
    c = map_params(S2, _norm(0.5, 1.0), prev)
    assert (c.f0, c.beta, c.alpha) == (100.0, 2.0, 10.0)
    assert c.delta_t_ms == pytest.approx(270.0)
    c = map_params(S2, _norm(0.0, 0.5), prev)
    assert c.beta == pytest.approx(1.06)
    assert c.alpha == pytest.approx(5.075)
    assert c.delta_t_ms == pytest.approx(40.0)
    c = map_params(S2, _norm(0.25, 0.75), prev)
    assert c.beta == pytest.approx(1.53)      # midpoint of [2, 1.06]
    assert c.alpha == pytest.approx(7.5375)   # midpoint of [10, 5.075]
    assert c.delta_t_ms == pytest.approx(155.0)


def test_map_params_zone3_ramps():
    prev = DEFAULT_CONTROL
    c = map_params(S3, _norm(0.0, 0.5), prev)
    assert c.f0 == 400.0
    assert c.beta == pytest.approx(1.05)
    assert c.alpha == pytest.approx(5.075)
    assert c.delta_t_ms == 40.0
    c = map_params(S3, _norm(0.0, 0.0), prev)
    assert c.beta == pytest.approx(0.1)
    assert c.alpha == pytest.approx(0.15)
    # Above the interval: parked at the 0.5 edge values.
    c = map_params(S3, _norm(0.0, 0.9), prev)
    assert c.beta == pytest.approx(1.05)


def test_map_params_zone4_constants():
    for tp in (0.0, 0.3, 1.0):
        c = map_params(S4, _norm(tp, 0.0), DEFAULT_CONTROL)
        assert (c.f0, c.beta, c.alpha, c.delta_t_ms) == (1000.0, 0.1, 0.15, 40.0)


def test_zone_boundary_beta_step():
    # Crossing S2 -> S3 at d_tm_hat = 0.5 steps beta from 1.06 to 1.05 exactly.
    at_boundary = _norm(0.0, 0.5)
    b2 = map_params(S2, at_boundary, DEFAULT_CONTROL).beta
    b3 = map_params(S3, at_boundary, DEFAULT_CONTROL).beta
    assert b2 == pytest.approx(1.06, abs=1e-12)
    assert b3 == pytest.approx(1.05, abs=1e-12)
    assert b2 - b3 == pytest.approx(0.01, abs=1e-12)


def test_map_params_monotone_within_zones():
    prev = DEFAULT_CONTROL
    grid = np.linspace(0.0, 1.0, 101)
    dt1 = [map_params(S1, _norm(x, 1.0), prev).delta_t_ms for x in grid]
    assert all(a <= b + 1e-12 for a, b in zip(dt1, dt1[1:]))
    beta2 = [map_params(S2, _norm(0.2, x), prev).beta for x in grid]
    assert all(a <= b + 1e-12 for a, b in zip(beta2, beta2[1:]))
    alpha3 = [map_params(S3, _norm(0.0, x), prev).alpha for x in grid]
    assert all(a <= b + 1e-12 for a, b in zip(alpha3, alpha3[1:]))


def test_map_params_continuous_within_zone():
    prev = DEFAULT_CONTROL
    grid = np.linspace(0.0, 1.0, 400)
    prev_val = None
    for x in grid:
        val = map_params(S2, _norm(x, 0.7), prev).delta_t_ms
        if prev_val is not None:
            assert abs(val - prev_val) < 2.0  # small steps for small input steps
        prev_val = val


def test_retention_force_bit_identical(rng):
    control = replace(DEFAULT_CONTROL, force=0.123456789)
    for _ in range(200):
        state = (S1, S2, S3, S4)[rng.integers(0, 4)]
        norm = _norm(float(rng.uniform(0, 1)), float(rng.uniform(0, 1)))
        control = map_params(state, norm, control)
        assert control.force == 0.123456789


def test_map_params_idempotent():
    norm = _norm(0.3, 0.6)
    c1 = map_params(S2, norm, DEFAULT_CONTROL)
    c2 = map_params(S2, norm, c1)
    assert c1 == c2


def test_control_for_distances_pipeline():
    c = control_for_distances(12.5, 20.0, DEFAULT_CONTROL)
    assert c.state is S1
    c = control_for_distances(-0.5, 4.0, c)
    assert c.state is S3
    assert c.f0 == 400.0


# ---------------------------------------------------------------------------
# Excitation scheduling
# ---------------------------------------------------------------------------

def test_scheduler_constant_interval():
    sched = ExcitationScheduler()
    events = sched.poll(2.0001, 0.5)
    assert events == pytest.approx([0.0, 0.5, 1.0, 1.5, 2.0])


def test_scheduler_interval_change_at_boundary():
    sched = ExcitationScheduler()

    def interval(t):
        return 0.5 if t < 0.6 else 0.04

    events = sched.poll(1.1, interval)
    assert events == pytest.approx([0.0, 0.5, 1.0, 1.04, 1.08])


def test_scheduler_holds_last_interval():
    sched = ExcitationScheduler()
    sched.poll(1.0, 0.5)
    later = sched.poll(2.0001, 0.5)  # no new input: same interval keeps firing
    assert later == pytest.approx([1.0, 1.5, 2.0])


def test_scheduler_incremental_polls_match_single_poll():
    a = ExcitationScheduler()
    chunks = []
    for end in np.linspace(0.1, 3.0, 30):
        chunks += a.poll(float(end), 0.27)
    b = ExcitationScheduler()
    assert chunks == pytest.approx(b.poll(3.0, 0.27))


def test_scheduler_rejects_nonpositive_interval():
    with pytest.raises(ConfigurationError):
        ExcitationScheduler().poll(1.0, 0.0)


def test_control_as_dict_shape():
    d = DEFAULT_CONTROL.as_dict()
    assert d["state"] == "S1"
    assert set(d) == {"f0", "beta", "alpha", "delta_t_ms", "force", "state"}
