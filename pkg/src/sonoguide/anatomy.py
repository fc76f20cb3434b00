"""Animated cardiac surfaces: phantom generation, mesh IO, frame timing.

A cardiac cycle is modeled as 20 surface-mesh frames played in a loop.
Phantoms are concentric icosphere shells whose inner (myocardium) radius
pulses sinusoidally, so every distance has an analytic ground truth.
Geometry is in millimeters.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import TriangleBVH

FRAMES_PER_CYCLE = 20


class AnatomyError(ValueError):
    """Configuration or mesh-validity failure."""


class MeshParseError(AnatomyError):
    """Unrecognized or truncated mesh file."""


# ---------------------------------------------------------------------------
# Mesh
# ---------------------------------------------------------------------------

@dataclass
class Mesh:
    """Triangle surface with optional per-triangle outward normals."""

    vertices: np.ndarray          # (V, 3) float64, mm
    triangles: np.ndarray         # (T, 3) int64
    normals: np.ndarray | None = None
    watertight: bool | None = None
    _bvh: TriangleBVH | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(self.triangles) and self.triangles.max() >= len(self.vertices):
            raise AnatomyError("triangle index exceeds vertex count")
        if len(self.triangles) and self.triangles.min() < 0:
            raise AnatomyError("negative triangle index")
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
        if self.watertight is None:
            self.watertight = self._check_watertight()
        if self.normals is None:
            self.normals = self._face_normals()

    def _face_normals(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        length = np.linalg.norm(n, axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            n = np.where(length > 0, n / length, 0.0)
        return n

    def _check_watertight(self) -> bool:
        if len(self.triangles) == 0:
            return False
        edges = np.concatenate([
            self.triangles[:, [0, 1]],
            self.triangles[:, [1, 2]],
            self.triangles[:, [2, 0]],
        ])
        edges.sort(axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        return bool((counts == 2).all())

    @property
    def bvh(self) -> TriangleBVH:
        """Acceleration structure, built lazily on first query and cached."""
        if self._bvh is None:
            self._bvh = TriangleBVH(self.vertices, self.triangles)
        return self._bvh

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box (min, max), cached."""
        if not hasattr(self, "_bounds") or self._bounds is None:
            self._bounds = (self.vertices.min(axis=0), self.vertices.max(axis=0))
        return self._bounds

    @property
    def vertex_tree(self):
        """KD-tree over the vertices; brackets surface distances cheaply."""
        if not hasattr(self, "_vertex_tree") or self._vertex_tree is None:
            from scipy.spatial import cKDTree

            self._vertex_tree = cKDTree(self.vertices)
        return self._vertex_tree

    @property
    def max_edge(self) -> float:
        """Longest triangle edge; bounds any surface point's vertex gap."""
        if not hasattr(self, "_max_edge") or self._max_edge is None:
            v = self.vertices[self.triangles]
            e = np.concatenate([
                np.linalg.norm(v[:, 0] - v[:, 1], axis=1),
                np.linalg.norm(v[:, 1] - v[:, 2], axis=1),
                np.linalg.norm(v[:, 2] - v[:, 0], axis=1),
            ])
            self._max_edge = float(e.max())
        return self._max_edge

    def copy_with_vertices(self, vertices: np.ndarray) -> "Mesh":
        return Mesh(
            vertices=np.asarray(vertices, dtype=np.float64),
            triangles=self.triangles,
            watertight=self.watertight,
        )


# ---------------------------------------------------------------------------
# Icosphere
# ---------------------------------------------------------------------------

def icosphere(radius: float, subdivisions: int, center=(0.0, 0.0, 0.0)) -> Mesh:
    """Watertight unit icosahedron subdivided ``subdivisions`` times, scaled."""
    if radius <= 0:
        raise AnatomyError("icosphere radius must be positive")
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]

    midpoint_cache: dict[tuple[int, int], int] = {}

    def midpoint(i, j):
        key = (i, j) if i < j else (j, i)
        if key not in midpoint_cache:
            m = verts[i] + verts[j]
            verts.append(m / np.linalg.norm(m))
            midpoint_cache[key] = len(verts) - 1
        return midpoint_cache[key]

    for _ in range(subdivisions):
        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces

    v = np.array(verts) * radius + np.asarray(center, dtype=np.float64)
    return Mesh(vertices=v, triangles=np.array(faces, dtype=np.int64), watertight=True)


# ---------------------------------------------------------------------------
# Animated anatomy
# ---------------------------------------------------------------------------

@dataclass
class AnimatedAnatomy:
    """Looping cardiac cycle of paired pericardium/myocardium frames."""

    pericardium: list[Mesh]       # FRAMES_PER_CYCLE meshes, shared topology
    myocardium: list[Mesh]
    cycle_period: float           # seconds
    edf_index: int                # frame of maximum myocardial volume

    def __post_init__(self):
        if len(self.pericardium) != FRAMES_PER_CYCLE or len(self.myocardium) != FRAMES_PER_CYCLE:
            raise AnatomyError(f"anatomy needs exactly {FRAMES_PER_CYCLE} frames per surface")
        if self.cycle_period <= 0:
            raise AnatomyError("cycle_period must be positive")
        if not (0 <= self.edf_index < FRAMES_PER_CYCLE):
            raise AnatomyError("edf_index out of range")
        for frames in (self.pericardium, self.myocardium):
            t0 = frames[0].triangles
            for m in frames[1:]:
                if m.triangles.shape != t0.shape or not (m.triangles == t0).all():
                    raise AnatomyError("all frames must share topology")


def frame_at(anatomy: AnimatedAnatomy, time: float) -> int:
    """Frame index for a wall-clock time; loops continuously over the cycle."""
    fract = time / anatomy.cycle_period
    fract -= math.floor(fract)
    return min(int(FRAMES_PER_CYCLE * fract), FRAMES_PER_CYCLE - 1)


# ---------------------------------------------------------------------------
# Phantom generation
# ---------------------------------------------------------------------------

@dataclass
class PhantomConfig:
    """Concentric-shell phantom: pulsing myocardium inside a pericardial sac."""

    myo_radius_min: float = 40.0
    myo_radius_max: float = 44.0
    peri_radius: float = 50.0
    peri_pulse: float = 0.0       # peak-to-peak pericardial radius variation
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    subdivisions: int = 3
    cycle_period: float = 1.0
    edf_index: int = 0
    myo_radii: tuple[float, ...] | None = None  # explicit per-frame override

    def __post_init__(self):
        if self.myo_radii is not None:
            self.myo_radii = tuple(float(r) for r in self.myo_radii)
            if len(self.myo_radii) != FRAMES_PER_CYCLE:
                raise AnatomyError(f"myo_radii must list {FRAMES_PER_CYCLE} values")
        if min(self.myo_radius_min, self.myo_radius_max) <= 0 or self.peri_radius <= 0:
            raise AnatomyError("radii must be positive")
        if self.peri_radius - self.peri_pulse / 2 <= self.max_myo_radius:
            raise AnatomyError("pericardium radius must exceed the largest myocardium radius")
        if self.cycle_period <= 0:
            raise AnatomyError("cycle_period must be positive")
        if not (0 <= self.edf_index < FRAMES_PER_CYCLE):
            raise AnatomyError("edf_index out of range")

    @property
    def max_myo_radius(self) -> float:
        if self.myo_radii is not None:
            return max(self.myo_radii)
        return max(self.myo_radius_min, self.myo_radius_max)

    def myo_radius_for_frame(self, k: int) -> float:
        if self.myo_radii is not None:
            return self.myo_radii[k]
        lo, hi = self.myo_radius_min, self.myo_radius_max
        c = math.cos(2.0 * math.pi * (k - self.edf_index) / FRAMES_PER_CYCLE)
        return lo + (hi - lo) * (1.0 + c) / 2.0

    def peri_radius_for_frame(self, k: int) -> float:
        # Swings opposite the myocardium so the inter-parietal gap bottoms
        # out exactly at the EDF frame.
        c = math.cos(2.0 * math.pi * (k - self.edf_index) / FRAMES_PER_CYCLE)
        return self.peri_radius + self.peri_pulse / 2.0 - self.peri_pulse * (1.0 + c) / 2.0

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise AnatomyError(f"unknown phantom config keys: {sorted(unknown)}")
        if "center" in d:
            d = dict(d, center=tuple(d["center"]))
        if d.get("myo_radii") is not None:
            d = dict(d, myo_radii=tuple(d["myo_radii"]))
        return cls(**d)


def generate_phantom(config: PhantomConfig) -> AnimatedAnatomy:
    """Build the 20-frame shell phantom described by ``config``.

    Frames share topology (the same icosphere scaled per frame). When the
    pericardium does not pulse, all of its frames reuse one mesh object so
    the acceleration structure is shared.
    """
    base = icosphere(1.0, config.subdivisions)
    unit = base.vertices  # centered at origin, radius 1
    center = np.asarray(config.center, dtype=np.float64)

    myo = [
        base.copy_with_vertices(unit * config.myo_radius_for_frame(k) + center)
        for k in range(FRAMES_PER_CYCLE)
    ]
    if config.peri_pulse == 0.0:
        peri_mesh = base.copy_with_vertices(unit * config.peri_radius + center)
        peri = [peri_mesh] * FRAMES_PER_CYCLE
    else:
        peri = [
            base.copy_with_vertices(unit * config.peri_radius_for_frame(k) + center)
            for k in range(FRAMES_PER_CYCLE)
        ]
    return AnimatedAnatomy(
        pericardium=peri,
        myocardium=myo,
        cycle_period=config.cycle_period,
        edf_index=config.edf_index,
    )


# ---------------------------------------------------------------------------
# Mesh file IO: STL (binary + ASCII) and OBJ (v/f only)
# ---------------------------------------------------------------------------

def _dedup_vertices(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Collapse exactly-equal points; returns (unique_vertices, index_map)."""
    unique, inverse = np.unique(points, axis=0, return_inverse=True)
    return unique, inverse


def load_mesh(path) -> Mesh:
    """Load an STL or OBJ file into a validated Mesh.

    STL facets are deduplicated into an indexed vertex set. A non-manifold
    surface loads fine but carries watertight=False.
    """
    path = Path(path)
    if not path.exists():
        raise MeshParseError(f"no such mesh file: {path}")
    suffix = path.suffix.lower()
    if suffix == ".obj":
        return _load_obj(path)
    if suffix == ".stl":
        data = path.read_bytes()
        if _looks_like_ascii_stl(data):
            return _load_stl_ascii(data, path)
        return _load_stl_binary(data, path)
    raise MeshParseError(f"unrecognized mesh format: {path.name}")


def _looks_like_ascii_stl(data: bytes) -> bool:
    head = data[:512].lstrip()
    if not head.startswith(b"solid"):
        return False
    return b"facet" in data[:4096] or data.strip().endswith(b"endsolid") or len(data) < 84


def _load_stl_binary(data: bytes, path: Path) -> Mesh:
    if len(data) < 84:
        raise MeshParseError(f"truncated binary STL: {path.name}")
    (count,) = struct.unpack_from("<I", data, 80)
    expected = 84 + count * 50
    if len(data) < expected:
        raise MeshParseError(f"truncated binary STL: {path.name}")
    raw = np.frombuffer(data, dtype=np.uint8, count=count * 50, offset=84)
    records = raw.reshape(count, 50)[:, :48].copy().view("<f4").reshape(count, 12)
    points = records[:, 3:12].reshape(-1, 3).astype(np.float64)
    return _mesh_from_facets(points)


def _load_stl_ascii(data: bytes, path: Path) -> Mesh:
    points = []
    in_solid = False
    ended = False
    for line in data.decode("ascii", errors="replace").splitlines():
        tokens = line.split()
        if not tokens:
            continue
        if tokens[0] == "solid":
            in_solid = True
        elif tokens[0] == "vertex":
            if len(tokens) < 4:
                raise MeshParseError(f"malformed vertex line in {path.name}")
            points.append([float(tokens[1]), float(tokens[2]), float(tokens[3])])
        elif tokens[0] == "endsolid":
            ended = True
    if not in_solid or not ended:
        raise MeshParseError(f"truncated ASCII STL: {path.name}")
    if len(points) == 0 or len(points) % 3:
        raise MeshParseError(f"facet vertex count not a multiple of 3 in {path.name}")
    return _mesh_from_facets(np.array(points, dtype=np.float64))


def _mesh_from_facets(points: np.ndarray) -> Mesh:
    vertices, inverse = _dedup_vertices(points)
    triangles = inverse.reshape(-1, 3)
    return Mesh(vertices=vertices, triangles=triangles)


def _load_obj(path: Path) -> Mesh:
    vertices = []
    faces = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        tokens = line.split()
        if not tokens or tokens[0].startswith("#"):
            continue
        if tokens[0] == "v":
            if len(tokens) < 4:
                raise MeshParseError(f"{path.name}:{lineno}: malformed vertex")
            vertices.append([float(t) for t in tokens[1:4]])
        elif tokens[0] == "f":
            idx = [int(t.split("/")[0]) for t in tokens[1:]]
            idx = [i - 1 if i > 0 else len(vertices) + i for i in idx]
            if len(idx) < 3:
                raise MeshParseError(f"{path.name}:{lineno}: face with <3 vertices")
            for k in range(1, len(idx) - 1):  # fan-triangulate
                faces.append((idx[0], idx[k], idx[k + 1]))
    if not vertices or not faces:
        raise MeshParseError(f"no usable geometry in {path.name}")
    return Mesh(
        vertices=np.array(vertices, dtype=np.float64),
        triangles=np.array(faces, dtype=np.int64),
    )


def save_mesh(mesh: Mesh, path, format: str | None = None) -> None:
    """Write a mesh as binary STL, ASCII STL, or OBJ (chosen by extension)."""
    path = Path(path)
    fmt = format or ("obj" if path.suffix.lower() == ".obj" else "stl")
    if fmt == "obj":
        lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices]
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
        path.write_text("\n".join(lines) + "\n")
    elif fmt in ("stl", "stl_binary"):
        tri = mesh.vertices[mesh.triangles].astype("<f4")
        n = mesh.normals.astype("<f4")
        out = bytearray(struct.pack("<80sI", b"sonoguide binary stl", len(tri)))
        rec = np.zeros((len(tri), 50), dtype=np.uint8)
        rec[:, :48] = np.concatenate([n, tri.reshape(len(tri), 9)], axis=1).astype("<f4").view(np.uint8).reshape(len(tri), 48)
        out += rec.tobytes()
        path.write_bytes(bytes(out))
    elif fmt == "stl_ascii":
        lines = ["solid sonoguide"]
        for (a, b, c), n in zip(mesh.vertices[mesh.triangles], mesh.normals):
            lines.append(f"  facet normal {n[0]:.9e} {n[1]:.9e} {n[2]:.9e}")
            lines.append("    outer loop")
            for p in (a, b, c):
                lines.append(f"      vertex {p[0]:.9e} {p[1]:.9e} {p[2]:.9e}")
            lines.append("    endloop")
            lines.append("  endfacet")
        lines.append("endsolid sonoguide")
        path.write_text("\n".join(lines) + "\n")
    else:
        raise AnatomyError(f"unknown mesh format: {fmt}")


# ---------------------------------------------------------------------------
# Anatomy manifest IO (gen-phantom output; mesh-file anatomy input)
# ---------------------------------------------------------------------------

def save_anatomy(anatomy: AnimatedAnatomy, directory) -> Path:
    """Write 20 frame pairs as binary STL plus a JSON manifest; returns manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for k in range(FRAMES_PER_CYCLE):
        peri_name = f"pericardium_{k:02d}.stl"
        myo_name = f"myocardium_{k:02d}.stl"
        save_mesh(anatomy.pericardium[k], directory / peri_name)
        save_mesh(anatomy.myocardium[k], directory / myo_name)
        entries.append({"pericardium": peri_name, "myocardium": myo_name})
    manifest = {
        "cycle_period": anatomy.cycle_period,
        "edf_index": anatomy.edf_index,
        "frames": entries,
    }
    manifest_path = directory / "anatomy.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest_path


def load_anatomy(manifest_path) -> AnimatedAnatomy:
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    peri = [load_mesh(base / f["pericardium"]) for f in manifest["frames"]]
    myo = [load_mesh(base / f["myocardium"]) for f in manifest["frames"]]
    return AnimatedAnatomy(
        pericardium=peri,
        myocardium=myo,
        cycle_period=float(manifest["cycle_period"]),
        edf_index=int(manifest["edf_index"]),
    )
