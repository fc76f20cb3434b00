"""Engine loops: deterministic offline trials and the live UDP/WebSocket service.

The offline path steps a control clock over a scripted needle motion,
logging navigation samples and rendering audio in lockstep; identical
config + script always yields identical logs and WAV bytes. The live path
ingests poses or distance pairs over UDP (OSC) or a WebSocket command
channel, publishes JSON snapshots at the control rate, and streams PCM
blocks on a second channel.
"""

from __future__ import annotations

import asyncio
import json
import logging
import math
import threading
import time as _time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .anatomy import AnimatedAnatomy, PhantomConfig, frame_at, generate_phantom, load_anatomy
from .geometry import slice_mesh_plane
from .membrane import DEFAULT_MODE_COUNT, ModalVoice, pcm16, write_wav
from .navkernel import (
    NavigationSample,
    NeedlePose,
    TrialLog,
    distance_to_target,
    min_distance_to_pericardium,
    nav_sample,
    update_contacts,
    write_log,
)
from .osc import OscError, decode_message
from .sonmap import (
    DEFAULT_CONTROL,
    ExcitationScheduler,
    MembraneControl,
    control_for_distances,
)

logger = logging.getLogger(__name__)

VALID_AUDIO_RATES = (44100, 48000)
MIN_CONTROL_RATE = 10.0


class SessionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

VALID_INPUT_MODES = ("script", "udp", "websocket")
VALID_AUDIO_MODES = ("wav", "device", "both")


@dataclass
class SessionConfig:
    phantom: PhantomConfig | None = None
    anatomy_manifest: str | None = None
    input_mode: str = "script"
    audio_mode: str = "wav"
    control_rate: float = 60.0
    audio_rate: int = 48000
    block_size: int = 256
    mode_count: int = DEFAULT_MODE_COUNT
    force: float = 1.0
    master_gain: float = 0.2
    limiter: bool = True
    modality: str = "MS"
    trial_id: str = "trial"
    trajectory_id: str | None = None
    target: tuple[float, float, float] | None = None
    wav_path: str | None = None
    log_path: str | None = None
    meta: dict = field(default_factory=dict)
    host: str = "127.0.0.1"
    ws_port: int = 8765
    udp_port: int = 9000
    warmup_periods: int = 2

    def __post_init__(self):
        if self.input_mode not in VALID_INPUT_MODES:
            raise SessionError(f"input mode must be one of {VALID_INPUT_MODES}")
        if self.audio_mode not in VALID_AUDIO_MODES:
            raise SessionError(f"audio mode must be one of {VALID_AUDIO_MODES}")
        if self.control_rate < MIN_CONTROL_RATE:
            raise SessionError(f"control rate must be >= {MIN_CONTROL_RATE} Hz")
        if self.audio_rate not in VALID_AUDIO_RATES:
            raise SessionError(f"audio rate must be one of {VALID_AUDIO_RATES}")
        if self.block_size < 16:
            raise SessionError("block size too small")
        if self.target is not None:
            self.target = tuple(float(x) for x in self.target)

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise SessionError(f"unknown session config keys: {sorted(unknown)}")
        if isinstance(d.get("phantom"), dict):
            d["phantom"] = PhantomConfig.from_dict(d["phantom"])
        return cls(**d)


def build_anatomy(config: SessionConfig) -> AnimatedAnatomy:
    if config.phantom is not None:
        return generate_phantom(config.phantom)
    if config.anatomy_manifest:
        return load_anatomy(config.anatomy_manifest)
    raise SessionError("config needs either a phantom or an anatomy manifest")


# ---------------------------------------------------------------------------
# Scripted needle motion
# ---------------------------------------------------------------------------

@dataclass
class ScriptedTrajectory:
    """Keyframed tip motion with linear interpolation between keys."""

    times: np.ndarray
    tips: np.ndarray
    axes: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.tips = np.asarray(self.tips, dtype=np.float64).reshape(-1, 3)
        self.axes = np.asarray(self.axes, dtype=np.float64).reshape(-1, 3)
        if len(self.times) < 2:
            raise SessionError("a script needs at least 2 keyframes")
        if not (np.diff(self.times) > 0).all():
            raise SessionError("keyframe times must be strictly increasing")
        norms = np.linalg.norm(self.axes, axis=1, keepdims=True)
        if (norms == 0).any():
            raise SessionError("keyframe axes must be nonzero")
        self.axes = self.axes / norms

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def pose_at(self, t: float) -> NeedlePose:
        t = min(max(t, float(self.times[0])), float(self.times[-1]))
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        k = min(max(k, 0), len(self.times) - 2)
        t0, t1 = self.times[k], self.times[k + 1]
        w = (t - t0) / (t1 - t0)
        tip = (1 - w) * self.tips[k] + w * self.tips[k + 1]
        axis = (1 - w) * self.axes[k] + w * self.axes[k + 1]
        return NeedlePose(tip=tip, axis=axis)

    @classmethod
    def linear(cls, start, end, speed_mm_s: float, dwell_s: float = 0.0) -> "ScriptedTrajectory":
        """Straight advance from start to end at constant speed, then hold."""
        start = np.asarray(start, dtype=np.float64)
        end = np.asarray(end, dtype=np.float64)
        direction = end - start
        length = float(np.linalg.norm(direction))
        if length == 0 or speed_mm_s <= 0:
            raise SessionError("linear script needs distinct endpoints and positive speed")
        travel = length / speed_mm_s
        times = [0.0, travel]
        tips = [start, end]
        axes = [direction, direction]
        if dwell_s > 0:
            times.append(travel + dwell_s)
            tips.append(end)
            axes.append(direction)
        return cls(times=np.array(times), tips=np.array(tips), axes=np.array(axes))

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "tips": self.tips.tolist(),
            "axes": self.axes.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScriptedTrajectory":
        return cls(times=d["times"], tips=d["tips"], axes=d["axes"])


# ---------------------------------------------------------------------------
# Offline engine
# ---------------------------------------------------------------------------

def _control_timeline(
    samples: list[NavigationSample], config: SessionConfig
) -> list[tuple[float, MembraneControl]]:
    """Fold navigation samples through the mapper, threading retention."""
    control = replace(DEFAULT_CONTROL, force=config.force)
    timeline = []
    for s in samples:
        control = control_for_distances(s.d_tp, s.d_tm, control)
        timeline.append((s.time, control))
    return timeline


def _control_at(timeline: list[tuple[float, MembraneControl]], t: float, default: MembraneControl) -> MembraneControl:
    chosen = default
    for ts, c in timeline:
        if ts <= t:
            chosen = c
        else:
            break
    return chosen


def _render_timeline(
    timeline: list[tuple[float, MembraneControl]],
    duration: float,
    config: SessionConfig,
) -> np.ndarray:
    """Render audio for a control timeline, excitations included.

    Controls latch at block boundaries; strikes scheduled between blocks are
    applied at the start of the block containing them.
    """
    fs = config.audio_rate
    block = config.block_size
    rest = replace(DEFAULT_CONTROL, force=config.force)
    voice = ModalVoice.from_control(
        rest, sample_rate=fs, mode_count=config.mode_count,
        master_gain=config.master_gain, limiter=config.limiter,
    )
    scheduler = ExcitationScheduler(first_event=0.0)

    def interval_at(t: float) -> float:
        return _control_at(timeline, t, rest).delta_t_ms / 1000.0

    total = int(math.ceil(duration * fs / block)) * block
    out = np.empty(total)
    pos = 0
    while pos < total:
        t_block = pos / fs
        t_next = (pos + block) / fs
        voice.apply_control(_control_at(timeline, t_block, rest))
        for t_event in scheduler.poll(t_next, interval_at):
            voice.excite(_control_at(timeline, t_event, rest).force)
        out[pos:pos + block] = voice.render_block(block)
        pos += block
    return out


def run_headless(
    config: SessionConfig,
    script: ScriptedTrajectory,
    anatomy: AnimatedAnatomy | None = None,
    wav_path=None,
    log_path=None,
) -> tuple[TrialLog, np.ndarray]:
    """Run one scripted trial offline; returns the closed log and the audio.

    Deterministic: the control clock ticks at config.control_rate from 0 to
    the script's end, and audio renders in lockstep from the resulting
    control timeline.
    """
    if anatomy is None:
        anatomy = build_anatomy(config)
    if wav_path is None and config.audio_mode in ("wav", "both"):
        wav_path = config.wav_path
    if log_path is None:
        log_path = config.log_path
    duration = script.duration
    period = 1.0 / config.control_rate
    if duration < config.warmup_periods * period:
        raise SessionError("script shorter than the engine warm-up")

    log = TrialLog(
        trial_id=config.trial_id,
        modality=config.modality,
        trajectory_id=config.trajectory_id,
        start_time=0.0,
        meta=dict(config.meta),
    )
    n_steps = int(math.floor(duration / period))
    for k in range(n_steps + 1):
        t = k * period
        pose = script.pose_at(t)
        sample = nav_sample(pose, anatomy, t)
        log.append(sample)
        update_contacts(log, pose.tip, anatomy)

    timeline = _control_timeline(log.samples, config)
    audio = _render_timeline(timeline, duration, config)

    log.close(stop_time=duration)
    log.min_dist_pericardium = min_distance_to_pericardium(log.final_tip, anatomy)
    if config.target is not None:
        log.dist_to_target = distance_to_target(log.final_tip, config.target)

    if wav_path is not None:
        write_wav(wav_path, audio, config.audio_rate)
    if log_path is not None:
        write_log(log, log_path)
    return log, audio


def replay(log: TrialLog, config: SessionConfig, wav_path=None) -> np.ndarray:
    """Re-render the audio of a logged trial from its recorded distances.

    Uses only the log's sample stream, so the result is byte-identical to
    the original offline render under the same config.
    """
    if not log.samples:
        raise SessionError("cannot replay an empty log")
    if log.stop_time is None:
        raise SessionError("cannot replay an open log")
    timeline = _control_timeline(log.samples, config)
    duration = log.stop_time - log.start_time
    audio = _render_timeline(timeline, duration, config)
    if wav_path is not None:
        write_wav(wav_path, audio, config.audio_rate)
    return audio


# ---------------------------------------------------------------------------
# Live service
# ---------------------------------------------------------------------------

class _OscInlet(asyncio.DatagramProtocol):
    def __init__(self, server: "LiveServer"):
        self.server = server

    def datagram_received(self, data, addr):
        try:
            address, args = decode_message(data)
        except OscError:
            self.server.malformed_packets += 1
            return
        self.server.handle_osc(address, args)


class LiveServer:
    """UDP + WebSocket front end around the control/audio loops.

    WebSocket paths: /state (JSON snapshots out), /audio (binary PCM out),
    /control (JSON commands in). UDP accepts OSC /nav/dtp, /nav/dtm and
    /nav/pose.
    """

    def __init__(self, config: SessionConfig, anatomy: AnimatedAnatomy | None = None):
        self.config = config
        if anatomy is None and (config.phantom is not None or config.anatomy_manifest):
            anatomy = build_anatomy(config)
        self.anatomy = anatomy
        self.malformed_packets = 0
        self.unknown_packets = 0
        self._state_subs: set = set()
        self._audio_subs: set = set()
        self._latest: dict = {
            "pose": None, "d_tp": None, "d_tm": None, "kind": None,
            "arrival": None, "seq": 0, "consumed_seq": -1,
        }
        self._control = replace(DEFAULT_CONTROL, force=config.force)
        self._published: list[tuple[float, MembraneControl]] = []
        self._trial: TrialLog | None = None
        self._last_outcome: str | None = None
        self._last_snapshot: dict | None = None
        self._snapshot_seq = 0
        self._last_latency_ms: float | None = None
        self._scene_msg: str | None = None
        self._stop = asyncio.Event()
        self._t0 = None
        self.ws_port = None
        self.udp_port = None
        self._ws_server = None
        self._udp_transport = None
        self._tasks: list[asyncio.Task] = []
        self.log_dir: Path | None = None

    # -- input ---------------------------------------------------------------

    def handle_osc(self, address: str, args: list) -> None:
        now = _time.monotonic()
        latest = self._latest
        # Whichever input kind arrived last drives the control loop.
        if address == "/nav/dtp" and len(args) >= 1 and isinstance(args[0], float):
            latest["d_tp"] = float(args[0])
            latest["kind"] = "distances"
        elif address == "/nav/dtm" and len(args) >= 1 and isinstance(args[0], float):
            latest["d_tm"] = float(args[0])
            latest["kind"] = "distances"
        elif address == "/nav/pose" and len(args) >= 6:
            try:
                latest["pose"] = NeedlePose(tip=args[0:3], axis=args[3:6])
            except (ValueError, TypeError):
                self.malformed_packets += 1
                return
            latest["kind"] = "pose"
        else:
            self.unknown_packets += 1
            return
        latest["arrival"] = now
        latest["seq"] += 1

    def handle_command(self, msg: dict) -> dict:
        cmd = msg.get("cmd")
        if cmd == "pose":
            try:
                self._latest["pose"] = NeedlePose(tip=msg["tip"], axis=msg["axis"])
            except (KeyError, ValueError, TypeError) as e:
                return {"ok": False, "error": f"bad pose: {e}"}
            self._latest["kind"] = "pose"
            self._latest["arrival"] = _time.monotonic()
            self._latest["seq"] += 1
            return {"ok": True}
        if cmd == "start":
            if self._trial is not None:
                return {"ok": False, "error": "trial already running"}
            self._trial = TrialLog(
                trial_id=str(msg.get("trial_id", f"live-{int(_time.time())}")),
                modality=str(msg.get("modality", self.config.modality)),
                trajectory_id=msg.get("trajectory_id"),
                start_time=self._session_time(),
                meta=dict(msg.get("meta", {})),
            )
            self._trial_target = msg.get("target", self.config.target)
            self._last_outcome = None
            return {"ok": True, "trial_id": self._trial.trial_id}
        if cmd == "stop":
            trial = self._trial
            if trial is None:
                return {"ok": False, "error": "no trial running"}
            self._trial = None
            if not trial.samples:
                return {"ok": False, "error": "trial has no samples"}
            trial.close(stop_time=self._session_time())
            if self.anatomy is not None and trial.final_tip is not None:
                trial.min_dist_pericardium = min_distance_to_pericardium(trial.final_tip, self.anatomy)
            target = getattr(self, "_trial_target", None)
            if target is not None and trial.final_tip is not None:
                trial.dist_to_target = distance_to_target(trial.final_tip, target)
            self._last_outcome = trial.outcome.value
            if self.log_dir is not None:
                self.log_dir.mkdir(parents=True, exist_ok=True)
                write_log(trial, self.log_dir / f"{trial.trial_id}.jsonl")
            return {"ok": True, "outcome": trial.outcome.value}
        return {"ok": False, "error": f"unknown command: {cmd!r}"}

    # -- loops ---------------------------------------------------------------

    def _session_time(self) -> float:
        return _time.monotonic() - self._t0 if self._t0 is not None else 0.0

    async def _control_loop(self):
        period = 1.0 / self.config.control_rate
        next_tick = _time.monotonic()
        while not self._stop.is_set():
            self._control_step()
            next_tick += period
            delay = next_tick - _time.monotonic()
            if delay < 0:
                next_tick = _time.monotonic()
                delay = 0.0
            try:
                await asyncio.wait_for(self._stop.wait(), timeout=delay if delay > 0 else 1e-4)
            except asyncio.TimeoutError:
                pass

    def _control_step(self):
        t = self._session_time()
        latest = self._latest
        pose = latest["pose"]
        d_tp, d_tm, frame = latest["d_tp"], latest["d_tm"], None
        sample = None
        pose_driven = latest["kind"] == "pose" and pose is not None and self.anatomy is not None
        if pose_driven:
            sample = nav_sample(pose, self.anatomy, t)
            d_tp, d_tm, frame = sample.d_tp, sample.d_tm, sample.frame
        elif d_tp is not None and d_tm is not None:
            if self.anatomy is not None:
                frame = frame_at(self.anatomy, t)
            sample = NavigationSample(
                time=t, d_tp=d_tp, d_tm=d_tm, frame=frame if frame is not None else 0,
                tip=tuple(pose.tip) if pose is not None else None,
                axis=tuple(pose.axis) if pose is not None else None,
            )
        if sample is not None:
            self._control = control_for_distances(sample.d_tp, sample.d_tm, self._control)
            self._published.append((t, self._control))
            del self._published[:-256]
            if latest["arrival"] is not None and latest["seq"] != latest["consumed_seq"]:
                latest["consumed_seq"] = latest["seq"]
                self._last_latency_ms = (_time.monotonic() - latest["arrival"]) * 1000.0
            trial = self._trial
            if trial is not None:
                if not trial.samples or sample.time > trial.samples[-1].time:
                    trial.append(sample)
                    if pose_driven:
                        update_contacts(trial, pose.tip, self.anatomy)
        self._broadcast_snapshot(t, sample, frame)

    def _broadcast_snapshot(self, t: float, sample, frame):
        self._snapshot_seq += 1
        latest = self._latest
        trial = self._trial
        pose = latest["pose"]
        age_ms = None
        if latest["arrival"] is not None:
            age_ms = (_time.monotonic() - latest["arrival"]) * 1000.0
        snap = {
            "type": "snapshot",
            "seq": self._snapshot_seq,
            "t": t,
            "pose": {
                "tip": [float(x) for x in pose.tip],
                "axis": [float(x) for x in pose.axis],
            } if pose is not None else None,
            "d_tp": _json_num(sample.d_tp) if sample else None,
            "d_tm": _json_num(sample.d_tm) if sample else None,
            "frame": frame,
            "state": self._control.state.value if sample else None,
            "control": self._control.as_dict(),
            "contacts": {
                "pericardium": any(trial.contact_pericardium) if trial else False,
                "myocardium": any(trial.contact_myocardium) if trial else False,
            },
            "trial": {
                "active": trial is not None,
                "trial_id": trial.trial_id if trial else None,
                "elapsed": (t - trial.start_time) if trial else None,
                "outcome": self._last_outcome,
            },
            "input": {
                "seq": latest["seq"],
                "age_ms": age_ms,
                "latency_ms": self._last_latency_ms,
            },
            "dropped_packets": self.malformed_packets + self.unknown_packets,
        }
        self._last_snapshot = snap
        text = json.dumps(snap)
        for conn in set(self._state_subs):
            self._send_soon(conn, text, self._state_subs)

    async def _audio_loop(self):
        fs = self.config.audio_rate
        block = self.config.block_size
        voice = ModalVoice.from_control(
            self._control, sample_rate=fs, mode_count=self.config.mode_count,
            master_gain=self.config.master_gain, limiter=self.config.limiter,
        )
        scheduler = ExcitationScheduler(first_event=0.0)
        pos = 0
        start = _time.monotonic()
        while not self._stop.is_set():
            control = self._control
            voice.apply_control(control)
            t_next = (pos + block) / fs
            for _ in scheduler.poll(t_next, control.delta_t_ms / 1000.0):
                voice.excite(control.force)
            chunk = pcm16(voice.render_block(block)).tobytes()
            for conn in set(self._audio_subs):
                self._send_soon(conn, chunk, self._audio_subs)
            pos += block
            deadline = start + pos / fs
            delay = deadline - _time.monotonic()
            if delay > 0:
                try:
                    await asyncio.wait_for(self._stop.wait(), timeout=delay)
                except asyncio.TimeoutError:
                    pass

    def _send_soon(self, conn, payload, pool: set):
        async def _send():
            try:
                await conn.send(payload)
            except Exception:
                pool.discard(conn)
        asyncio.get_running_loop().create_task(_send())

    # -- websocket plumbing ----------------------------------------------------

    async def _ws_handler(self, conn):
        path = conn.request.path
        if path == "/state":
            if self._scene_msg is not None:
                await conn.send(self._scene_msg)
            if self._last_snapshot is not None:
                await conn.send(json.dumps(self._last_snapshot))
            self._state_subs.add(conn)
            try:
                async for _ in conn:
                    pass
            finally:
                self._state_subs.discard(conn)
        elif path == "/audio":
            self._audio_subs.add(conn)
            try:
                async for _ in conn:
                    pass
            finally:
                self._audio_subs.discard(conn)
        elif path == "/control":
            async for raw in conn:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await conn.send(json.dumps({"ok": False, "error": "invalid JSON"}))
                    continue
                await conn.send(json.dumps(self.handle_command(msg)))
        else:
            await conn.close(code=4004, reason="unknown path")

    def _build_scene_message(self) -> str:
        if self.anatomy is None:
            return json.dumps({"type": "scene", "frames": [], "cycle_period": None, "edf_index": None})
        center = self.anatomy.pericardium[0].vertices.mean(axis=0)
        loops_cache: dict[int, list] = {}

        def loops_for(mesh):
            if id(mesh) not in loops_cache:
                loops_cache[id(mesh)] = slice_mesh_plane(
                    mesh.vertices, mesh.triangles,
                    origin=center, normal=(1.0, 0.0, 0.0),
                    u_axis=(0.0, 1.0, 0.0), v_axis=(0.0, 0.0, 1.0),
                )
            return loops_cache[id(mesh)]

        frames = [
            {
                "pericardium": loops_for(self.anatomy.pericardium[k]),
                "myocardium": loops_for(self.anatomy.myocardium[k]),
            }
            for k in range(len(self.anatomy.pericardium))
        ]
        return json.dumps({
            "type": "scene",
            "cycle_period": self.anatomy.cycle_period,
            "edf_index": self.anatomy.edf_index,
            "plane": {
                "origin": [float(x) for x in center],
                "axes": ["y", "z"],
            },
            "frames": frames,
        })

    # -- lifecycle ----------------------------------------------------------------

    async def start(self):
        from websockets.asyncio.server import serve as ws_serve

        self._stop = asyncio.Event()
        self._t0 = _time.monotonic()
        self._scene_msg = self._build_scene_message()
        loop = asyncio.get_running_loop()
        self._udp_transport, _ = await loop.create_datagram_endpoint(
            lambda: _OscInlet(self), local_addr=(self.config.host, self.config.udp_port)
        )
        self.udp_port = self._udp_transport.get_extra_info("sockname")[1]
        self._ws_server = await ws_serve(self._ws_handler, self.config.host, self.config.ws_port)
        self.ws_port = next(iter(self._ws_server.sockets)).getsockname()[1]
        self._tasks = [
            asyncio.create_task(self._control_loop()),
            asyncio.create_task(self._audio_loop()),
        ]
        logger.info("serving ws on %s:%d, osc/udp on %d", self.config.host, self.ws_port, self.udp_port)

    async def stop(self):
        self._stop.set()
        for task in self._tasks:
            task.cancel()
        for task in self._tasks:
            try:
                await task
            except (asyncio.CancelledError, Exception):
                pass
        if self._ws_server is not None:
            self._ws_server.close()
            await self._ws_server.wait_closed()
        if self._udp_transport is not None:
            self._udp_transport.close()

    async def run_forever(self):
        await self.start()
        try:
            await self._stop.wait()
        finally:
            await self.stop()


def _json_num(x: float | None):
    if x is None or not math.isfinite(x):
        return None
    return float(x)


class ServerThread:
    """Run a LiveServer on a background event loop (for tests and the CLI UI)."""

    def __init__(self, config: SessionConfig, anatomy: AnimatedAnatomy | None = None, log_dir=None):
        self.server = LiveServer(config, anatomy=anatomy)
        if log_dir is not None:
            self.server.log_dir = Path(log_dir)
        self._loop = asyncio.new_event_loop()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._started = threading.Event()
        self._error: BaseException | None = None

    def _run(self):
        asyncio.set_event_loop(self._loop)
        try:
            self._loop.run_until_complete(self.server.start())
            self._started.set()
            self._loop.run_forever()
        except BaseException as e:
            self._error = e
            self._started.set()
        finally:
            try:
                self._loop.run_until_complete(self.server.stop())
            except Exception:
                pass
            self._loop.close()

    def start(self, timeout: float = 10.0) -> "ServerThread":
        self._thread.start()
        if not self._started.wait(timeout):
            raise SessionError("server did not start in time")
        if self._error is not None:
            raise SessionError(f"server failed to start: {self._error}")
        return self

    @property
    def ws_port(self) -> int:
        return self.server.ws_port

    @property
    def udp_port(self) -> int:
        return self.server.udp_port

    def stop(self):
        if self._loop.is_running():
            self._loop.call_soon_threadsafe(self._loop.stop)
        self._thread.join(timeout=10)
