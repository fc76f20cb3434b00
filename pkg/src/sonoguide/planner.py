"""Candidate needle trajectories screened by three sequential filters.

A candidate survives when (1) its entry-to-target segment crosses no
obstacle, (2) it fits the physical needle, and (3) it keeps a minimum
clearance from every sensitive structure. Screening runs against the
end-diastolic frame, the tightest point of the cycle. Survivors rank by
clearance (descending), then by length.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .anatomy import AnimatedAnatomy, Mesh

DEFAULT_NEEDLE_LENGTH_MM = 150.0
DEFAULT_CLEARANCE_MM = 5.0
CLEARANCE_STEP_MM = 0.5


class PlanningError(ValueError):
    pass


@dataclass(frozen=True)
class Trajectory:
    entry: tuple[float, float, float]
    target: tuple[float, float, float]

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.target, self.entry)))

    @property
    def direction(self) -> np.ndarray:
        d = np.subtract(self.target, self.entry, dtype=np.float64)
        n = float(np.linalg.norm(d))
        if n == 0.0:
            raise PlanningError("entry and target coincide")
        return d / n


@dataclass
class PlanningScene:
    anatomy: AnimatedAnatomy
    obstacles: dict[str, Mesh] = field(default_factory=dict)
    sensitive: dict[str, Mesh] | None = None  # defaults to the obstacle set
    needle_length: float = DEFAULT_NEEDLE_LENGTH_MM
    clearance: float = DEFAULT_CLEARANCE_MM

    def __post_init__(self):
        if self.needle_length <= 0:
            raise PlanningError("needle length must be positive")
        if self.clearance < 0:
            raise PlanningError("clearance cannot be negative")
        if self.sensitive is None:
            self.sensitive = dict(self.obstacles)


@dataclass(frozen=True)
class PlanEntry:
    trajectory: Trajectory
    min_clearance: float
    length: float


@dataclass
class PlanReport:
    accepted: list[PlanEntry]
    rejected_collision: int
    rejected_length: int
    rejected_clearance: int

    @property
    def rejection_counts(self) -> tuple[int, int, int]:
        return (self.rejected_collision, self.rejected_length, self.rejected_clearance)


def _segment_points(entry, target, step: float) -> np.ndarray:
    entry = np.asarray(entry, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    length = float(np.linalg.norm(target - entry))
    n = max(1, int(np.ceil(length / step)))
    ts = np.linspace(0.0, 1.0, n + 1)
    return entry + ts[:, None] * (target - entry)


def collision_filter(traj: Trajectory, obstacles: dict[str, Mesh]) -> tuple[bool, str | None]:
    """Pass unless the segment touches or crosses any obstacle; tangency fails."""
    for name, mesh in obstacles.items():
        if mesh.bvh.segment_intersects(traj.entry, traj.target):
            return False, name
    return True, None


def length_filter(traj: Trajectory, needle_length: float = DEFAULT_NEEDLE_LENGTH_MM) -> bool:
    """Pass when the path fits the needle; the exact length is still a pass."""
    return traj.length <= needle_length


def clearance_filter(
    traj: Trajectory,
    structures: dict[str, Mesh],
    clearance: float = DEFAULT_CLEARANCE_MM,
    step: float = CLEARANCE_STEP_MM,
) -> tuple[bool, float]:
    """Minimum sampled segment-to-structure distance against the threshold.

    Samples every ``step`` mm plus both endpoints. Returns (pass, min found);
    an empty structure set passes with +inf clearance.
    """
    if not structures:
        return True, float("inf")
    points = _segment_points(traj.entry, traj.target, step)
    best = float("inf")
    for mesh in structures.values():
        best = min(best, _min_mesh_distance(points, mesh))
    return best >= clearance, best


def _min_mesh_distance(points: np.ndarray, mesh: Mesh) -> float:
    """Exact min point-to-surface distance over a point set.

    Vertex distances bracket the surface distance within one edge length,
    so only sample points whose bracket can reach the minimum need the
    exact (tree descent) evaluation.
    """
    d_vertex, _ = mesh.vertex_tree.query(points)
    reach = mesh.max_edge
    cutoff = float(d_vertex.min())
    candidates = points[d_vertex - reach <= cutoff]
    bvh = mesh.bvh
    best = float("inf")
    for p in candidates:
        d = bvh.closest_distance(p, upper_bound=best)
        if d < best:
            best = d
    return best


def plan(
    scene: PlanningScene,
    entry_candidates,
    target_candidates,
) -> PlanReport:
    """Screen the entry x target Cartesian product through the three filters.

    Filters short-circuit: a candidate rejected by an earlier filter is
    never evaluated by a later one, and counts toward that filter only.
    Survivors sort by descending clearance, ties by ascending length
    (stable, so output order is deterministic).
    """
    entries = list(entry_candidates)
    targets = list(target_candidates)
    if not entries or not targets:
        raise PlanningError("candidate sets must be non-empty")

    # The myocardium at end-diastole (its largest extent) always joins the
    # collision screen; clearance applies to the named sensitive organs only.
    obstacles = dict(scene.obstacles)
    obstacles.setdefault(
        "myocardium", scene.anatomy.myocardium[scene.anatomy.edf_index]
    )

    accepted: list[PlanEntry] = []
    n_collision = n_length = n_clearance = 0
    for entry in entries:
        for target in targets:
            traj = Trajectory(entry=tuple(map(float, entry)), target=tuple(map(float, target)))
            ok, _ = collision_filter(traj, obstacles)
            if not ok:
                n_collision += 1
                continue
            if not length_filter(traj, scene.needle_length):
                n_length += 1
                continue
            ok, min_clear = clearance_filter(traj, scene.sensitive, scene.clearance)
            if not ok:
                n_clearance += 1
                continue
            accepted.append(PlanEntry(trajectory=traj, min_clearance=min_clear, length=traj.length))

    accepted.sort(key=lambda e: (-e.min_clearance, e.length))
    return PlanReport(
        accepted=accepted,
        rejected_collision=n_collision,
        rejected_length=n_length,
        rejected_clearance=n_clearance,
    )
