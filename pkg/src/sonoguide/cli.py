"""Command-line entry point binding the engine's pieces together.

Subcommands: gen-phantom, simulate, replay, plan, serve, analyze. Configs
are JSON files; ``--set key=value`` overrides nest with dotted paths. All
artifact writes are atomic (temp file + rename).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .anatomy import PhantomConfig, generate_phantom, load_anatomy, load_mesh, save_anatomy
from .metrics import analyze_logs, report_markdown
from .navkernel import read_log
from .planner import PlanningScene, plan
from .session import (
    ScriptedTrajectory,
    SessionConfig,
    build_anatomy,
    replay,
    run_headless,
)


class CliError(ValueError):
    pass


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_overrides(config: dict, overrides: list[str]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise CliError(f"override must look like key=value, got {item!r}")
        key, value = item.split("=", 1)
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise CliError(f"cannot override through non-object key {part!r}")
        node[parts[-1]] = _parse_value(value)
    return config


def _load_config(path: str | None, overrides: list[str]) -> dict:
    config: dict = {}
    if path:
        config = json.loads(Path(path).read_text())
        if not isinstance(config, dict):
            raise CliError("config root must be a JSON object")
    return _apply_overrides(config, overrides or [])


def _script_from_config(config: dict) -> ScriptedTrajectory:
    spec = config.get("script")
    if spec is None:
        raise CliError("config is missing a 'script' section")
    if "linear" in spec:
        lin = spec["linear"]
        return ScriptedTrajectory.linear(
            start=lin["start"], end=lin["end"],
            speed_mm_s=float(lin["speed_mm_s"]),
            dwell_s=float(lin.get("dwell_s", 0.0)),
        )
    return ScriptedTrajectory.from_dict(spec)


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_gen_phantom(args) -> int:
    config = _load_config(args.config, args.set)
    phantom = PhantomConfig.from_dict(config.get("phantom", config))
    anatomy = generate_phantom(phantom)
    manifest = save_anatomy(anatomy, args.out)
    print(f"wrote {manifest}")
    return 0


def _cmd_simulate(args) -> int:
    config = _load_config(args.config, args.set)
    if args.seed is not None:
        np.random.seed(args.seed)
    session = SessionConfig.from_dict(config.get("session", {}))
    script = _script_from_config(config)
    log, audio = run_headless(session, script)
    if args.log:
        from .navkernel import log_to_jsonl
        _atomic_write_text(Path(args.log), log_to_jsonl(log))
    if args.wav:
        from .membrane import pcm16
        import io
        import wave as _wave
        buf = io.BytesIO()
        with _wave.open(buf, "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(session.audio_rate)
            w.writeframes(pcm16(audio).tobytes())
        _atomic_write_bytes(Path(args.wav), buf.getvalue())
    print(json.dumps({
        "outcome": log.outcome.value,
        "samples": len(log.samples),
        "duration_s": log.execution_time,
        "min_dist_pericardium_mm": log.min_dist_pericardium,
        "dist_to_target_mm": log.dist_to_target,
    }))
    return 0


def _cmd_replay(args) -> int:
    config = _load_config(args.config, args.set)
    session = SessionConfig.from_dict(config.get("session", {}))
    log = read_log(args.log)
    audio = replay(log, session)
    if args.wav:
        from .membrane import pcm16
        import io
        import wave as _wave
        buf = io.BytesIO()
        with _wave.open(buf, "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(session.audio_rate)
            w.writeframes(pcm16(audio).tobytes())
        _atomic_write_bytes(Path(args.wav), buf.getvalue())
    print(json.dumps({"samples": len(log.samples), "rendered_s": len(audio) / session.audio_rate}))
    return 0


def _cmd_plan(args) -> int:
    scene_cfg = _load_config(args.scene, args.set)
    anat_cfg = scene_cfg.get("anatomy", {})
    if "phantom" in anat_cfg:
        anatomy = generate_phantom(PhantomConfig.from_dict(anat_cfg["phantom"]))
    elif "manifest" in anat_cfg:
        anatomy = load_anatomy(anat_cfg["manifest"])
    else:
        raise CliError("scene.anatomy needs 'phantom' or 'manifest'")
    base = Path(args.scene).parent if args.scene else Path.cwd()
    obstacles = {
        name: load_mesh(base / p if not Path(p).is_absolute() else p)
        for name, p in scene_cfg.get("obstacles", {}).items()
    }
    sensitive = None
    if "sensitive" in scene_cfg:
        sensitive = {
            name: load_mesh(base / p if not Path(p).is_absolute() else p)
            for name, p in scene_cfg["sensitive"].items()
        }
    scene = PlanningScene(
        anatomy=anatomy,
        obstacles=obstacles,
        sensitive=sensitive,
        needle_length=float(scene_cfg.get("needle_length", 150.0)),
        clearance=float(scene_cfg.get("clearance", 5.0)),
    )
    report = plan(scene, scene_cfg["entries"], scene_cfg["targets"])
    payload = {
        "accepted": [
            {
                "entry": list(e.trajectory.entry),
                "target": list(e.trajectory.target),
                "length_mm": e.length,
                "min_clearance_mm": None if e.min_clearance == float("inf") else e.min_clearance,
            }
            for e in report.accepted
        ],
        "rejections": {
            "collision": report.rejected_collision,
            "length": report.rejected_length,
            "clearance": report.rejected_clearance,
        },
    }
    text = json.dumps(payload, indent=2) + "\n"
    if args.report:
        _atomic_write_text(Path(args.report), text)
    else:
        print(text, end="")
    return 0


def _cmd_analyze(args) -> int:
    log_dir = Path(args.logs)
    paths = sorted(log_dir.glob("*.jsonl"))
    if not paths:
        raise CliError(f"no .jsonl logs under {log_dir}")
    logs = [read_log(p) for p in paths]
    report = analyze_logs(logs)
    text = json.dumps(report, indent=2) + "\n"
    if args.report:
        _atomic_write_text(Path(args.report), text)
    else:
        print(text, end="")
    if args.markdown:
        _atomic_write_text(Path(args.markdown), report_markdown(report))
    return 0


def _cmd_serve(args) -> int:
    import asyncio

    config = _load_config(args.config, args.set)
    session = SessionConfig.from_dict(config.get("session", {}))
    from .session import LiveServer

    server = LiveServer(session)
    if args.log_dir:
        server.log_dir = Path(args.log_dir)

    async def _run():
        await server.start()
        print(json.dumps({"ws_port": server.ws_port, "udp_port": server.udp_port}), flush=True)
        try:
            await server._stop.wait()
        except asyncio.CancelledError:
            pass
        finally:
            await server.stop()

    try:
        asyncio.run(_run())
    except KeyboardInterrupt:
        pass
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sonoguide",
        description="Membrane-sonification needle-guidance engine",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-phantom", help="generate the animated shell phantom")
    p.add_argument("--config", help="phantom config JSON")
    p.add_argument("--out", required=True, help="output directory for meshes + manifest")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=_cmd_gen_phantom)

    p = sub.add_parser("simulate", help="run a scripted trial offline")
    p.add_argument("--config", required=True, help="session + script JSON")
    p.add_argument("--wav", help="write rendered audio here")
    p.add_argument("--log", help="write the trial log (JSONL) here")
    p.add_argument("--seed", type=int)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("replay", help="re-render audio from a trial log")
    p.add_argument("--log", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--wav", help="write re-rendered audio here")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("plan", help="screen candidate trajectories")
    p.add_argument("--scene", required=True, help="scene JSON")
    p.add_argument("--report", help="write the plan report here")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("analyze", help="statistics over a directory of trial logs")
    p.add_argument("logs", help="directory containing *.jsonl trial logs")
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--markdown", help="write a Markdown report here")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("serve", help="run the live UDP/WebSocket service")
    p.add_argument("--config", help="session config JSON")
    p.add_argument("--log-dir", help="directory for trial logs from live sessions")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, OSError, json.JSONDecodeError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
