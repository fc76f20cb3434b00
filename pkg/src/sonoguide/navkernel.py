"""Needle-to-surface distances, contact monitoring, and outcome classification.

Axial distances are signed: positive while the tip is outside a watertight
surface, negative once inside (measured back along the needle axis to the
crossed surface), +inf when the axis misses the geometry entirely.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .anatomy import FRAMES_PER_CYCLE, AnimatedAnatomy, Mesh, frame_at
from .geometry import GeometryError

CONTACT_SHELL_MM = 0.05
_SURFACE_TOL = 1e-9


class TrialError(ValueError):
    """Raised for malformed or empty trial logs."""


@dataclass
class NeedlePose:
    """Tip position with unit advancement direction (anatomy coordinates)."""

    tip: np.ndarray
    axis: np.ndarray

    def __post_init__(self):
        self.tip = np.asarray(self.tip, dtype=np.float64).reshape(3)
        self.axis = np.asarray(self.axis, dtype=np.float64).reshape(3)
        n = float(np.linalg.norm(self.axis))
        if abs(n - 1.0) > 1e-9:
            if n == 0.0:
                raise ValueError("needle axis must be a nonzero direction")
            self.axis = self.axis / n


@dataclass(frozen=True)
class NavigationSample:
    """One timestamped pair of signed tip-to-surface distances (mm)."""

    time: float
    d_tp: float
    d_tm: float
    frame: int
    tip: tuple[float, float, float] | None = None
    axis: tuple[float, float, float] | None = None


class Outcome(enum.Enum):
    SUCCESSFUL_COMPLETION = "SuccessfulCompletion"
    MISSED_TARGET = "MissedTarget"
    CRITICAL_FAILURE = "CriticalFailure"


# ---------------------------------------------------------------------------
# Distance queries
# ---------------------------------------------------------------------------

def axial_distance(pose: NeedlePose, mesh: Mesh) -> float:
    """Signed distance from the tip to ``mesh`` along the needle axis.

    Outside: distance to the first surface crossing ahead. Inside: the
    negated distance back along -axis to the surface last crossed. On the
    surface: 0. The axis missing the surface entirely yields +inf.
    """
    if not mesh.watertight:
        raise GeometryError("axial distance needs a watertight mesh for its sign")
    bvh = mesh.bvh
    hits, grazing = bvh.ray_hits(pose.tip, pose.axis)
    if len(hits) and hits[0] <= _SURFACE_TOL:
        return 0.0
    if grazing:
        inside = bvh.contains(pose.tip)
    else:
        inside = bool(len(hits) % 2)
    if not inside:
        return float(hits[0]) if len(hits) else math.inf
    back, _ = bvh.ray_hits(pose.tip, -pose.axis)
    if not len(back):
        raise GeometryError("inside point with no back-crossing; mesh not closed")
    return -float(back[0])


def nav_sample(pose: NeedlePose, anatomy: AnimatedAnatomy, time: float) -> NavigationSample:
    """Signed distances to the animated surfaces at the frame active at ``time``."""
    frame = frame_at(anatomy, time)
    d_tp = axial_distance(pose, anatomy.pericardium[frame])
    d_tm = axial_distance(pose, anatomy.myocardium[frame])
    return NavigationSample(
        time=time,
        d_tp=d_tp,
        d_tm=d_tm,
        frame=frame,
        tip=tuple(float(x) for x in pose.tip),
        axis=tuple(float(x) for x in pose.axis),
    )


def min_distance_to_pericardium(tip, anatomy: AnimatedAnatomy) -> float:
    """Smallest unsigned point-to-surface distance over the 20 frames."""
    tip = np.asarray(tip, dtype=np.float64)
    best = math.inf
    seen: set[int] = set()
    for mesh in anatomy.pericardium:
        if id(mesh) in seen:
            continue
        seen.add(id(mesh))
        best = min(best, mesh.bvh.closest_distance(tip, upper_bound=best))
    return best


def distance_to_target(tip, target) -> float:
    return float(np.linalg.norm(np.asarray(tip, dtype=np.float64) - np.asarray(target, dtype=np.float64)))


def point_contacts(tip, mesh: Mesh, shell: float = CONTACT_SHELL_MM) -> bool:
    """Tip on/inside the surface, with a thin tolerance shell outside it."""
    return mesh.bvh.contains(np.asarray(tip, dtype=np.float64), on_surface_tol=shell)


# ---------------------------------------------------------------------------
# Trial log
# ---------------------------------------------------------------------------

@dataclass
class TrialLog:
    """Complete per-trial record; samples arrive in time order."""

    trial_id: str = "trial"
    modality: str = "MS"
    trajectory_id: str | None = None
    start_time: float = 0.0
    meta: dict = field(default_factory=dict)
    samples: list[NavigationSample] = field(default_factory=list)
    contact_pericardium: list[bool] = field(default_factory=lambda: [False] * FRAMES_PER_CYCLE)
    contact_myocardium: list[bool] = field(default_factory=lambda: [False] * FRAMES_PER_CYCLE)
    stop_time: float | None = None
    final_tip: tuple[float, float, float] | None = None
    outcome: Outcome | None = None
    min_dist_pericardium: float | None = None
    dist_to_target: float | None = None

    @property
    def closed(self) -> bool:
        return self.stop_time is not None

    @property
    def execution_time(self) -> float | None:
        if self.stop_time is None:
            return None
        return self.stop_time - self.start_time

    def append(self, sample: NavigationSample) -> None:
        if self.closed:
            raise TrialError("cannot append to a closed trial")
        if self.samples and sample.time <= self.samples[-1].time:
            raise TrialError("sample times must be strictly increasing")
        self.samples.append(sample)

    def close(self, stop_time: float) -> None:
        if not self.samples:
            raise TrialError("cannot close an empty trial")
        self.stop_time = stop_time
        self.final_tip = self.samples[-1].tip
        self.outcome = classify_outcome(self)


def update_contacts(log: TrialLog, tip, anatomy: AnimatedAnatomy) -> TrialLog:
    """OR the tip's containment against every frame into the accumulators.

    Frames already flagged are skipped; a contact, once observed, stands for
    the rest of the trial.
    """
    if log.closed:
        raise TrialError("trial already closed")
    tip = np.asarray(tip, dtype=np.float64)
    for flags, frames in (
        (log.contact_pericardium, anatomy.pericardium),
        (log.contact_myocardium, anatomy.myocardium),
    ):
        cache: dict[int, bool] = {}
        for k in range(FRAMES_PER_CYCLE):
            if flags[k]:
                continue
            mesh = frames[k]
            if id(mesh) not in cache:
                lo, hi = mesh.bounds
                if ((tip < lo - CONTACT_SHELL_MM) | (tip > hi + CONTACT_SHELL_MM)).any():
                    cache[id(mesh)] = False  # outside the box: cannot touch
                else:
                    cache[id(mesh)] = point_contacts(tip, mesh)
            flags[k] = cache[id(mesh)]
    return log


def classify_outcome(log: TrialLog) -> Outcome:
    """Three-way trial outcome; myocardial contact dominates everything."""
    if not log.samples:
        raise TrialError("cannot classify an empty trial")
    if any(log.contact_myocardium):
        return Outcome.CRITICAL_FAILURE
    if not any(log.contact_pericardium):
        return Outcome.MISSED_TARGET
    return Outcome.SUCCESSFUL_COMPLETION


# ---------------------------------------------------------------------------
# JSONL serialization
# ---------------------------------------------------------------------------

def _num(x: float | None):
    if x is None or not math.isfinite(x):
        return None
    return x


def log_to_jsonl(log: TrialLog) -> str:
    """Serialize: one header line, one line per sample, one footer line."""
    lines = [json.dumps({
        "kind": "header",
        "version": 1,
        "trial_id": log.trial_id,
        "modality": log.modality,
        "trajectory_id": log.trajectory_id,
        "start_time": log.start_time,
        "meta": log.meta,
    })]
    for s in log.samples:
        lines.append(json.dumps({
            "kind": "sample",
            "t": s.time,
            "d_tp": _num(s.d_tp),
            "d_tm": _num(s.d_tm),
            "frame": s.frame,
            "tip": list(s.tip) if s.tip is not None else None,
            "axis": list(s.axis) if s.axis is not None else None,
        }))
    lines.append(json.dumps({
        "kind": "footer",
        "stop_time": log.stop_time,
        "final_tip": list(log.final_tip) if log.final_tip else None,
        "contact_pericardium": log.contact_pericardium,
        "contact_myocardium": log.contact_myocardium,
        "outcome": log.outcome.value if log.outcome else None,
        "execution_time_s": log.execution_time,
        "min_dist_pericardium_mm": _num(log.min_dist_pericardium),
        "dist_to_target_mm": _num(log.dist_to_target),
    }))
    return "\n".join(lines) + "\n"


def log_from_jsonl(text: str) -> TrialLog:
    records = [json.loads(line) for line in text.splitlines() if line.strip()]
    if not records or records[0].get("kind") != "header":
        raise TrialError("log missing header record")
    head = records[0]
    log = TrialLog(
        trial_id=head["trial_id"],
        modality=head["modality"],
        trajectory_id=head.get("trajectory_id"),
        start_time=head["start_time"],
        meta=head.get("meta", {}),
    )
    footer = None
    for rec in records[1:]:
        kind = rec.get("kind")
        if kind == "sample":
            log.samples.append(NavigationSample(
                time=rec["t"],
                d_tp=rec["d_tp"] if rec["d_tp"] is not None else math.inf,
                d_tm=rec["d_tm"] if rec["d_tm"] is not None else math.inf,
                frame=rec["frame"],
                tip=tuple(rec["tip"]) if rec.get("tip") else None,
                axis=tuple(rec["axis"]) if rec.get("axis") else None,
            ))
        elif kind == "footer":
            footer = rec
        else:
            raise TrialError(f"unknown record kind: {kind!r}")
    if footer is None:
        raise TrialError("log missing footer record")
    log.stop_time = footer["stop_time"]
    log.final_tip = tuple(footer["final_tip"]) if footer.get("final_tip") else None
    log.contact_pericardium = list(footer["contact_pericardium"])
    log.contact_myocardium = list(footer["contact_myocardium"])
    log.outcome = Outcome(footer["outcome"]) if footer.get("outcome") else None
    log.min_dist_pericardium = footer.get("min_dist_pericardium_mm")
    log.dist_to_target = footer.get("dist_to_target_mm")
    return log


def write_log(log: TrialLog, path) -> None:
    Path(path).write_text(log_to_jsonl(log))


def read_log(path) -> TrialLog:
    return log_from_jsonl(Path(path).read_text())
