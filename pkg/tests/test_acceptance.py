"""Acceptance suite: one test per gate criterion, one PASS line each.

Every expected number is either computed by an independent oracle inside
the test (dense sampling, closed-form geometry, pair counting, series
Bessel zeros) or asserted at the tolerance the gate pins.
"""

import hashlib
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.signal import hilbert

from sonoguide.anatomy import PhantomConfig, generate_phantom, icosphere
from sonoguide.membrane import (
    ModalVoice,
    Mode,
    damping_sigma,
    modal_frequencies,
    pcm16,
)
from sonoguide.metrics import (
    chi_square_counts,
    cliffs_delta,
    descriptives,
    mann_whitney_u,
    spearman_rho,
)
from sonoguide.navkernel import NeedlePose, Outcome, axial_distance, log_to_jsonl
from sonoguide.planner import PlanningScene, plan
from sonoguide.session import ScriptedTrajectory, SessionConfig, run_headless
from sonoguide.sonmap import (
    DEFAULT_CONTROL,
    S1,
    S2,
    S3,
    S4,
    ExcitationScheduler,
    NormalizedDistances,
    classify_state,
    map_params,
)

from oracles import (
    cliffs_delta_pairs,
    mwu_pair_count,
    ray_sphere_distance,
    segment_sphere_min_distance,
    signed_axial_sphere,
    state_oracle,
)

FS = 48_000
BLOCK = 256


def _report(name: str):
    print(f"ACCEPTANCE {name}: PASS")


# ---------------------------------------------------------------------------
# 1. Outcome contingency statistic reproduction
# ---------------------------------------------------------------------------

def test_acceptance_chi_square_reproduction():
    t0 = time.perf_counter()
    stat, p = chi_square_counts([[33, 22, 5], [50, 8, 2]])
    elapsed = time.perf_counter() - t0
    assert stat == pytest.approx(11.30, abs=0.01)
    assert p < 0.01
    assert elapsed < 1.0
    _report("chi-square reproduction (11.30 +/- 0.01, p < 0.01)")


# ---------------------------------------------------------------------------
# 2. State classifier == priority-ordered oracle on the full grid
# ---------------------------------------------------------------------------

def test_acceptance_state_classifier_grid():
    t0 = time.perf_counter()
    d_tp_values = np.round(np.arange(-5.0, 70.0 + 1e-9, 0.1), 10)
    d_tm_values = np.round(np.arange(-5.0, 40.0 + 1e-9, 0.1), 10)
    count = 0
    for d_tp in d_tp_values:
        for d_tm in d_tm_values:
            assert classify_state(d_tp, d_tm).value == state_oracle(d_tp, d_tm)
            count += 1
    elapsed = time.perf_counter() - t0
    assert count == len(d_tp_values) * len(d_tm_values)
    assert count > 300_000
    assert elapsed < 10.0
    _report(f"state classifier oracle equivalence ({count} grid points)")


# ---------------------------------------------------------------------------
# 3. Parameter table fidelity: endpoints, monotonicity, retention
# ---------------------------------------------------------------------------

def test_acceptance_parameter_table_fidelity():
    def norm(tp, tm):
        return NormalizedDistances(d_tp_hat=tp, d_tm_hat=tm)

    prev = DEFAULT_CONTROL
    endpoint_checks = [
        (S1, norm(1.0, 1.0), {"f0": 100.0, "beta": 2.0, "alpha": 10.0, "delta_t_ms": 500.0}),
        (S1, norm(0.5, 1.0), {"delta_t_ms": 271.0}),
        (S2, norm(0.5, 1.0), {"f0": 100.0, "beta": 2.0, "alpha": 10.0, "delta_t_ms": 270.0}),
        (S2, norm(0.0, 0.5), {"beta": 1.06, "alpha": 5.075, "delta_t_ms": 40.0}),
        (S3, norm(0.0, 0.5), {"f0": 400.0, "beta": 1.05, "alpha": 5.075, "delta_t_ms": 40.0}),
        (S3, norm(0.0, 0.0), {"beta": 0.1, "alpha": 0.15}),
        (S4, norm(1.0, 0.0), {"f0": 1000.0, "beta": 0.1, "alpha": 0.15, "delta_t_ms": 40.0}),
    ]
    for state, n, expected in endpoint_checks:
        control = map_params(state, n, prev)
        for field_name, value in expected.items():
            assert getattr(control, field_name) == pytest.approx(value, abs=5e-4), (state, field_name)

    # Monotonicity of every ramped parameter within its state.
    grid = np.linspace(0.0, 1.0, 201)
    ramps = [
        (S1, lambda x: map_params(S1, norm(x, 1.0), prev).delta_t_ms),
        (S2, lambda x: map_params(S2, norm(x, 1.0), prev).delta_t_ms),
        (S2, lambda x: map_params(S2, norm(0.2, x), prev).beta),
        (S2, lambda x: map_params(S2, norm(0.2, x), prev).alpha),
        (S3, lambda x: map_params(S3, norm(0.0, x), prev).beta),
        (S3, lambda x: map_params(S3, norm(0.0, x), prev).alpha),
    ]
    for state, fn in ramps:
        values = [fn(x) for x in grid]
        assert all(a <= b + 1e-12 for a, b in zip(values, values[1:])), state

    # Retention across randomized state walks: the strike force is never
    # state-listed, so it must survive bit-exactly; repeated identical
    # inputs must reproduce identical controls.
    rng = np.random.default_rng(11)
    for walk in range(1000):
        force = float(rng.uniform(0.1, 4.0))
        control = replace(DEFAULT_CONTROL, force=force)
        for _ in range(8):
            state = (S1, S2, S3, S4)[rng.integers(0, 4)]
            n = norm(float(rng.uniform(0, 1)), float(rng.uniform(0, 1)))
            control = map_params(state, n, control)
            assert control.force == force
            assert map_params(state, n, control) == control
    _report("parameter table fidelity (endpoints, monotonicity, retention x1000)")


# ---------------------------------------------------------------------------
# 4. Modal spectrum against the frequency-ratio ladder
# ---------------------------------------------------------------------------

def test_acceptance_modal_spectrum():
    t0 = time.perf_counter()
    for f0 in (100.0, 400.0, 1000.0):
        ladder = modal_frequencies(f0, 8)
        modes = [
            Mode(m=m, n=n, frequency=f, sigma=damping_sigma(0.1, 0.05, f), weight=1.0 / r)
            for r, (m, n, f) in enumerate(ladder, start=1)
        ]
        assert max(mode.sigma for mode in modes) <= 0.3
        voice = ModalVoice(modes, sample_rate=FS, master_gain=1.0, limiter=False)
        voice.excite(1.0)
        x = voice.render_block(2 * FS)
        spec = np.abs(np.fft.rfft(x * np.hanning(len(x))))
        df = FS / len(x)
        for m, n, f in ladder:
            lo, hi = int((f - 5.0) / df), int((f + 5.0) / df)
            k = lo + int(np.argmax(spec[lo:hi + 1]))
            a, b, c = np.log(spec[k - 1]), np.log(spec[k]), np.log(spec[k + 1])
            f_est = (k + 0.5 * (a - c) / (a - 2 * b + c)) * df
            assert abs(f_est - f) < 1.0, (f0, (m, n), f, f_est)
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    _report("modal spectrum (24 mode peaks within 1 Hz)")


# ---------------------------------------------------------------------------
# 5. Decay law: fitted envelope rates match the damping model
# ---------------------------------------------------------------------------

def test_acceptance_decay_law():
    for sigma in (0.1, 0.25, 1.0, 3.0):
        mode = Mode(m=0, n=1, frequency=100.0, sigma=damping_sigma(sigma, 0.0, 100.0), weight=1.0)
        assert mode.sigma == sigma  # alpha=0 keeps the constant-loss term only
        voice = ModalVoice([mode], sample_rate=FS, master_gain=1.0, limiter=False)
        voice.excite(1.0)
        x = voice.render_block(2 * FS)
        env = np.abs(hilbert(x))
        lo, hi = int(0.1 * FS), int(1.5 * FS)
        t = np.arange(lo, hi) / FS
        slope = np.polyfit(t, np.log(env[lo:hi]), 1)[0]
        assert slope == pytest.approx(-sigma, rel=0.05), sigma
    _report("decay law (sigma in {0.1, 0.25, 1.0, 3.0} within 5%)")


# ---------------------------------------------------------------------------
# 6. Excitation timing through the scheduler + block pipeline
# ---------------------------------------------------------------------------

def _render_clicks(dt_ms: float, duration: float = 2.5):
    mode = Mode(m=0, n=1, frequency=1000.0, sigma=25.0, weight=1.0)
    voice = ModalVoice([mode], sample_rate=FS, master_gain=1.0, limiter=False)
    scheduler = ExcitationScheduler()
    total = int(duration * FS / BLOCK) * BLOCK
    out = np.empty(total)
    applied = []
    pos = 0
    while pos < total:
        if scheduler.poll((pos + BLOCK) / FS, dt_ms / 1000.0):
            voice.excite(1.0)
            applied.append(pos)
        out[pos:pos + BLOCK] = voice.render_block(BLOCK)
        pos += BLOCK
    return out, np.array(applied)


def _detect_onsets(x, w: int = 48, refractory_s: float = 0.015):
    env = np.abs(hilbert(x))
    padded = np.concatenate([np.zeros(w), env])
    rise = padded[w:] - padded[:-w]
    rise[-BLOCK:] = 0.0  # FFT-Hilbert wraps the attack into the tail
    threshold = 0.5 * rise.max()
    refractory = int(refractory_s * FS)
    onsets, last = [], -(10 ** 9)
    for n in np.flatnonzero(rise > threshold):
        if n - last >= refractory:
            onsets.append(int(n))
            last = n
    return np.array(onsets)


def test_acceptance_excitation_timing():
    for dt_ms in (40.0, 270.0, 500.0):
        x, applied = _render_clicks(dt_ms)
        onsets = _detect_onsets(x)
        assert len(onsets) == len(applied), dt_ms
        # Onsets recover the strike instants to well under one block.
        assert np.abs(onsets - applied).max() <= BLOCK // 2, dt_ms
        # Inter-onset intervals recover the commanded interval within 1 block.
        intervals = np.diff(onsets)
        target = dt_ms / 1000.0 * FS
        assert np.abs(intervals - target).max() <= BLOCK, dt_ms
    _report("excitation timing (dt in {40, 270, 500} ms within +/-1 block)")


# ---------------------------------------------------------------------------
# 7. Geometry against closed-form ray-sphere values
# ---------------------------------------------------------------------------

def test_acceptance_geometry_oracle():
    sphere = icosphere(50.0, 4)
    rng = np.random.default_rng(404)
    checked = 0
    # Distance floor 14 mm: the subdiv-4 surface sits within 0.056 mm of the
    # ideal sphere, so 0.5% relative only makes sense above ~12 mm.
    while checked < 10_000:
        radial = rng.normal(size=3)
        radial /= np.linalg.norm(radial)
        if rng.uniform() < 0.7:
            tip = radial * rng.uniform(64.0, 140.0)
            aim = rng.normal(size=3)
            aim *= rng.uniform(0.0, 10.0) / np.linalg.norm(aim)
            axis = aim - tip
            axis /= np.linalg.norm(axis)
        else:
            tip = radial * rng.uniform(5.0, 36.0)
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
        expected = signed_axial_sphere(tip, axis, (0.0, 0.0, 0.0), 50.0)
        got = axial_distance(NeedlePose(tip=tip, axis=axis), sphere)
        assert got == pytest.approx(expected, rel=5e-3), (tip, axis)
        checked += 1

    # Sign flips exactly once while marching through the surface.
    axis = np.array([0.0, 0.0, -1.0])
    distances = [
        axial_distance(NeedlePose(tip=(2.0, -3.0, z), axis=axis), sphere)
        for z in np.linspace(70.0, 30.0, 161)
    ]
    signs = [1 if d > 0.06 else (-1 if d < -0.06 else 0) for d in distances]
    nonzero = [s for s in signs if s != 0]
    assert nonzero[0] == 1 and nonzero[-1] == -1
    assert sum(1 for a, b in zip(nonzero, nonzero[1:]) if a != b) == 1
    _report("geometry oracle (10^4 poses within 0.5%, single sign flip)")


# ---------------------------------------------------------------------------
# 8. End-to-end scripted trials on the analytic phantom
# ---------------------------------------------------------------------------

SPEED = 25.0
START_Z = 70.2


def test_acceptance_end_to_end_trials():
    phantom_config = PhantomConfig(
        myo_radius_min=40.0, myo_radius_max=44.0, peri_radius=50.0,
        subdivisions=4, cycle_period=1.0, edf_index=0,
    )
    anatomy = generate_phantom(phantom_config)
    config = SessionConfig(control_rate=60.0)
    period = 1.0 / config.control_rate

    cases = [
        (51.0, Outcome.MISSED_TARGET, ["S1", "S2"]),
        (49.0, Outcome.SUCCESSFUL_COMPLETION, ["S1", "S2", "S3"]),
        (41.5, Outcome.CRITICAL_FAILURE, ["S1", "S2", "S3", "S4"]),
    ]
    for z_end, want_outcome, want_states in cases:
        script = ScriptedTrajectory.linear((0, 0, START_Z), (0, 0, z_end), SPEED, dwell_s=0.2)
        hashes = set()
        for _ in range(2):
            log, audio = run_headless(config, script, anatomy=anatomy)
            hashes.add((
                hashlib.sha256(log_to_jsonl(log).encode()).hexdigest(),
                hashlib.sha256(pcm16(audio).tobytes()).hexdigest(),
            ))
        assert len(hashes) == 1, "run-to-run determinism"
        assert log.outcome is want_outcome

        states = [classify_state(s.d_tp, s.d_tm).value for s in log.samples]
        dedup = [states[0]] + [b for a, b in zip(states, states[1:]) if a != b]
        assert dedup == want_states

        # Shell-arithmetic predictions for each zone entry.
        predictions = {}
        if "S2" in want_states:
            predictions["S2"] = (START_Z - 55.0) / SPEED
        if "S3" in want_states:
            predictions["S3"] = (START_Z - 50.0) / SPEED
        if "S4" in want_states:
            for t in np.arange(0.0, script.duration, 1e-4):
                z = START_Z - SPEED * t
                frame = int(20 * (t % 1.0)) % 20
                if z - phantom_config.myo_radius_for_frame(frame) <= 2.0:
                    predictions["S4"] = float(t)
                    break
        for state, t_pred in predictions.items():
            idx = next(i for i, s in enumerate(states) if s == state)
            assert abs(log.samples[idx].time - t_pred) <= period + 1e-9, (state, t_pred)
    _report("end-to-end trials (3 outcomes, transitions within 1 control period, identical hashes)")


# ---------------------------------------------------------------------------
# 9. Planner vs dense-sampling brute-force oracle on random scenes
# ---------------------------------------------------------------------------

def _oracle_pipeline(entries, targets, spheres, myo_radius, needle_length, clearance, step=0.05):
    """Dense-sampling reference: same three filters, same short-circuit order."""
    accepted = []
    counts = [0, 0, 0]
    for entry in entries:
        for target in targets:
            entry_a = np.asarray(entry)
            target_a = np.asarray(target)
            length = float(np.linalg.norm(target_a - entry_a))
            n = max(1, int(np.ceil(length / step)))
            ts = np.linspace(0.0, 1.0, n + 1)
            points = entry_a + ts[:, None] * (target_a - entry_a)
            radii = np.linalg.norm(points, axis=1)
            collided = (radii <= myo_radius).any()
            for center, radius in spheres:
                if (np.linalg.norm(points - center, axis=1) <= radius).any():
                    collided = True
            if collided:
                counts[0] += 1
                continue
            if length > needle_length:
                counts[1] += 1
                continue
            min_clear = np.inf
            for center, radius in spheres:
                d = np.abs(np.linalg.norm(points - center, axis=1) - radius).min()
                min_clear = min(min_clear, float(d))
            if min_clear < clearance:
                counts[2] += 1
                continue
            accepted.append((tuple(entry), tuple(target)))
    return accepted, tuple(counts)


def test_acceptance_planner_oracle():
    rng = np.random.default_rng(99)
    anatomy = generate_phantom(PhantomConfig(subdivisions=3))
    myo_edf = 44.0
    clearance = 5.0
    margin = 0.5

    scenes_checked = 0
    while scenes_checked < 100:
        entries = [
            (float(rng.uniform(-25, 25)), float(rng.uniform(-25, 25)), float(rng.uniform(100, 115)))
            for _ in range(3)
        ]
        targets = [
            (float(rng.uniform(-6, 6)), float(rng.uniform(-6, 6)), 51.0)
            for _ in range(2)
        ]
        needle_length = float(rng.uniform(45, 80))
        spheres = []
        for _ in range(int(rng.integers(2, 4))):
            center = np.array([
                rng.uniform(-35, 35), rng.uniform(-35, 35), rng.uniform(58, 95),
            ])
            radius = float(rng.uniform(5.0, 12.0))
            spheres.append((center, radius))

        # Conditioning: every candidate stays clear of filter boundaries so
        # mesh faceting and sampling granularity cannot flip a verdict.
        def well_conditioned():
            for entry in entries:
                for target in targets:
                    length = float(np.linalg.norm(np.subtract(target, entry)))
                    if abs(length - needle_length) < margin:
                        return False
                    for center, radius in spheres:
                        d = segment_sphere_min_distance(entry, target, center, radius)
                        if abs(d) < margin or abs(d - clearance) < margin:
                            return False
            return True

        if not well_conditioned():
            continue

        obstacles = {
            f"organ{i}": icosphere(radius, 3, center=tuple(center))
            for i, (center, radius) in enumerate(spheres)
        }
        scene = PlanningScene(
            anatomy=anatomy, obstacles=obstacles,
            needle_length=needle_length, clearance=clearance,
        )
        report = plan(scene, entries, targets)
        got = {(e.trajectory.entry, e.trajectory.target) for e in report.accepted}

        want_accepted, want_counts = _oracle_pipeline(
            entries, targets, spheres, myo_edf, needle_length, clearance,
        )
        assert got == set(want_accepted), f"scene {scenes_checked}"
        assert report.rejection_counts == want_counts, f"scene {scenes_checked}"
        scenes_checked += 1
    _report("planner oracle (100 scenes, pass/fail sets and rejection counts exact)")


# ---------------------------------------------------------------------------
# 10. Statistics property suite
# ---------------------------------------------------------------------------

def test_acceptance_statistics_properties():
    rng = np.random.default_rng(31337)
    for _ in range(1000):
        n, m = int(rng.integers(2, 25)), int(rng.integers(2, 25))
        a = rng.integers(0, 8, size=n).astype(float)  # ties included
        b = rng.integers(0, 8, size=m).astype(float)
        ua, ub = mwu_pair_count(a.tolist(), b.tolist())
        assert ua + ub == n * m
        u, _ = mann_whitney_u(a, b)
        assert u == min(ua, ub)

    for _ in range(200):
        a = rng.normal(size=int(rng.integers(2, 20)))
        b = rng.normal(size=int(rng.integers(2, 20)))
        assert cliffs_delta(a, b) == pytest.approx(-cliffs_delta(b, a), abs=1e-12)
        assert cliffs_delta(a, b) == pytest.approx(cliffs_delta_pairs(a.tolist(), b.tolist()), abs=1e-12)

    for _ in range(100):
        x = np.sort(rng.normal(size=int(rng.integers(3, 30))))
        x += np.arange(len(x)) * 1e-9  # strictly increasing
        rho, _ = spearman_rho(x, np.exp(x))
        assert rho == 1.0
        rho, _ = spearman_rho(x, -x ** 3)
        assert rho == -1.0

    for _ in range(100):
        x = rng.normal(size=int(rng.integers(2, 40))) * rng.uniform(0.1, 10)
        shift = float(rng.uniform(-100, 100))
        d0, d1 = descriptives(x), descriptives(x + shift)
        assert d1.median == pytest.approx(d0.median + shift, abs=1e-9)
        assert d1.min == pytest.approx(d0.min + shift, abs=1e-9)
        assert d1.max == pytest.approx(d0.max + shift, abs=1e-9)
        assert d1.mad == pytest.approx(d0.mad, abs=1e-9)
        assert d1.iqr == pytest.approx(d0.iqr, abs=1e-9)
    _report("statistics property suite (U identity, delta antisymmetry, rank extremes, equivariance)")
