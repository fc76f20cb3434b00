"""Triangle-mesh spatial queries: ray casting, containment, closest points.

Queries run against a flat bounding-volume hierarchy built once per mesh.
All coordinates are millimeters. Degenerate (zero-area) triangles are
dropped at build time.
"""

from __future__ import annotations

import heapq

import numpy as np

_LEAF_SIZE = 16
_EPS_DET = 1e-12
_EPS_BARY = 1e-10
_EPS_T = 1e-9

# Fallback ray directions for containment parity tests. Chosen away from
# lattice-aligned axes so hits through shared edges/vertices are rare.
_PARITY_DIRECTIONS = np.array(
    [
        [0.287514623, 0.594712301, 0.750698412],
        [-0.613458201, 0.412987632, 0.672839514],
        [0.508213947, -0.703198245, 0.496781203],
        [-0.401289317, -0.516238907, -0.756912384],
    ]
)


class GeometryError(ValueError):
    """Raised when a query cannot be answered for the given geometry."""


def _as_unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise GeometryError("zero-length direction")
    return v / n


def ray_triangle_ts(origin, direction, v0, e1, e2):
    """Moller-Trumbore over triangle arrays.

    Returns (t, near_boundary) where t is np.inf for misses and
    near_boundary flags hits that graze a triangle edge or vertex.
    Intersections behind the origin (t < -_EPS_T) are misses.
    """
    pvec = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > _EPS_DET
    inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = origin - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
    qvec = np.cross(tvec, e1)
    v = np.einsum("j,ij->i", direction, qvec) * inv_det
    w = 1.0 - u - v
    inside = ok & (u >= -_EPS_BARY) & (v >= -_EPS_BARY) & (w >= -_EPS_BARY)
    t = np.einsum("ij,ij->i", e2, qvec) * inv_det
    hit = inside & (t >= -_EPS_T)
    t = np.where(hit, t, np.inf)
    near_boundary = hit & (
        (u <= _EPS_BARY) | (v <= _EPS_BARY) | (w <= _EPS_BARY)
    )
    return t, near_boundary


def point_triangles_dist_sq(p, v0, v1, v2):
    """Squared distance from point p to each triangle (Ericson region clamp)."""
    ab = v1 - v0
    ac = v2 - v0
    ap = p - v0
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - v1
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - v2
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = np.clip(d1 / (d1 - d3), 0.0, 1.0)
        w_ac = np.clip(d2 / (d2 - d6), 0.0, 1.0)
        w_bc = np.clip((d4 - d3) / ((d4 - d3) + (d5 - d6)), 0.0, 1.0)
        denom = va + vb + vc
        v_in = vb / denom
        w_in = vc / denom

    # Region masks, evaluated in the standard order.
    in_a = (d1 <= 0) & (d2 <= 0)
    in_b = (d3 >= 0) & (d4 <= d3)
    in_c = (d6 >= 0) & (d5 <= d6)
    on_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    on_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    on_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)

    closest = v0 + v_in[:, None] * ab + w_in[:, None] * ac
    closest = np.where(on_bc[:, None], v1 + w_bc[:, None] * (v2 - v1), closest)
    closest = np.where(on_ac[:, None], v0 + w_ac[:, None] * ac, closest)
    closest = np.where(on_ab[:, None], v0 + v_ab[:, None] * ab, closest)
    closest = np.where(in_c[:, None], v2, closest)
    closest = np.where(in_b[:, None], v1, closest)
    closest = np.where(in_a[:, None], v0, closest)

    diff = closest - p
    d_sq = np.einsum("ij,ij->i", diff, diff)
    return np.where(np.isfinite(d_sq), d_sq, np.inf)


class TriangleBVH:
    """Median-split BVH over a triangle soup with flat node arrays."""

    def __init__(self, vertices, triangles, leaf_size: int = _LEAF_SIZE):
        vertices = np.asarray(vertices, dtype=np.float64)
        triangles = np.asarray(triangles, dtype=np.int64)
        tri = vertices[triangles]  # (T, 3, 3)

        # Drop zero-area triangles; they never contribute hits or distances.
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        area2 = np.linalg.norm(cross, axis=1)
        scale = max(1.0, float(np.abs(tri).max(initial=1.0)))
        keep = area2 > (1e-12 * scale * scale)
        tri = tri[keep]
        self.degenerate_count = int((~keep).sum())
        if len(tri) == 0:
            raise GeometryError("mesh has no non-degenerate triangles")

        self._v0 = np.ascontiguousarray(tri[:, 0])
        self._v1 = np.ascontiguousarray(tri[:, 1])
        self._v2 = np.ascontiguousarray(tri[:, 2])

        n = len(tri)
        centroids = tri.mean(axis=1)
        tri_min = tri.min(axis=1)
        tri_max = tri.max(axis=1)

        order = np.arange(n)
        max_nodes = 4 * n // leaf_size + 8
        self._bb_min = np.empty((max_nodes, 3))
        self._bb_max = np.empty((max_nodes, 3))
        self._left = np.full(max_nodes, -1, dtype=np.int64)
        self._right = np.full(max_nodes, -1, dtype=np.int64)
        self._start = np.zeros(max_nodes, dtype=np.int64)
        self._count = np.zeros(max_nodes, dtype=np.int64)

        node_count = 1
        stack = [(0, 0, n)]
        while stack:
            node, lo, hi = stack.pop()
            idx = order[lo:hi]
            self._bb_min[node] = tri_min[idx].min(axis=0)
            self._bb_max[node] = tri_max[idx].max(axis=0)
            if hi - lo <= leaf_size:
                self._start[node] = lo
                self._count[node] = hi - lo
                continue
            cen = centroids[idx]
            axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
            mid = (hi - lo) // 2
            part = np.argpartition(cen[:, axis], mid)
            order[lo:hi] = idx[part]
            left, right = node_count, node_count + 1
            node_count += 2
            self._left[node] = left
            self._right[node] = right
            stack.append((left, lo, lo + mid))
            stack.append((right, lo + mid, hi))

        self._bb_min = self._bb_min[:node_count]
        self._bb_max = self._bb_max[:node_count]
        self._left = self._left[:node_count]
        self._right = self._right[:node_count]
        self._start = self._start[:node_count]
        self._count = self._count[:node_count]
        perm = order
        self._v0 = self._v0[perm]
        self._v1 = self._v1[perm]
        self._v2 = self._v2[perm]
        self._e1 = self._v1 - self._v0
        self._e2 = self._v2 - self._v0
        self._diag = float(np.linalg.norm(self._bb_max[0] - self._bb_min[0]))

    # -- ray queries ---------------------------------------------------------

    def _ray_leaf_hits(self, origin, direction):
        """All hits of a ray against the tree; returns (ts, boundary flags)."""
        ts: list[np.ndarray] = []
        flags: list[np.ndarray] = []
        bb_min, bb_max = self._bb_min, self._bb_max
        left, right, count, start = self._left, self._right, self._count, self._start
        with np.errstate(invalid="ignore", divide="ignore"):
            inv = np.where(direction != 0.0, 1.0 / np.where(direction == 0, 1, direction), np.inf)
            stack = [0]
            while stack:
                node = stack.pop()
                t0 = (bb_min[node] - origin) * inv
                t1 = (bb_max[node] - origin) * inv
                tmin = np.minimum(t0, t1).max()
                tmax = np.maximum(t0, t1).min()
                if tmax < max(tmin, -_EPS_T):
                    continue
                cnt = count[node]
                if cnt > 0:
                    s = start[node]
                    t, nb = ray_triangle_ts(
                        origin, direction,
                        self._v0[s:s + cnt], self._e1[s:s + cnt], self._e2[s:s + cnt],
                    )
                    hit = np.isfinite(t)
                    if hit.any():
                        ts.append(t[hit])
                        flags.append(nb[hit])
                else:
                    stack.append(left[node])
                    stack.append(right[node])
        if not ts:
            return np.empty(0), np.empty(0, dtype=bool)
        return np.concatenate(ts), np.concatenate(flags)

    def ray_hits(self, origin, direction):
        """Sorted, deduplicated intersection distances along a unit ray.

        Hits within a relative tolerance of each other collapse to one entry,
        so rays passing exactly through shared edges or vertices count one
        crossing. Returns (ts, any_boundary_grazing).
        """
        origin = np.asarray(origin, dtype=np.float64)
        direction = np.asarray(direction, dtype=np.float64)
        t, nb = self._ray_leaf_hits(origin, direction)
        if len(t) == 0:
            return t, False
        order = np.argsort(t)
        t = t[order]
        nb = nb[order]
        tol = _EPS_T * (1.0 + self._diag)
        groups = np.empty(len(t), dtype=bool)
        groups[0] = True
        groups[1:] = np.diff(t) > tol
        # Any hit grazing a triangle edge or vertex makes the crossing count
        # ambiguous (pass-through and tangency collapse identically), so the
        # caller must not trust parity from this ray.
        grazing = bool(nb.any())
        return t[groups], grazing

    def first_hit(self, origin, direction) -> float:
        """Distance to the nearest intersection, or +inf when the ray misses."""
        ts, _ = self.ray_hits(origin, direction)
        return float(ts[0]) if len(ts) else np.inf

    def contains(self, point, on_surface_tol: float = 0.0) -> bool:
        """Watertight inside test by crossing parity.

        Retries along alternative directions when a ray grazes an edge or
        vertex. With ``on_surface_tol`` > 0, points within that distance of
        the surface count as contained.
        """
        point = np.asarray(point, dtype=np.float64)
        if on_surface_tol > 0.0 and self.closest_distance(point, upper_bound=on_surface_tol) <= on_surface_tol:
            return True
        votes = []
        for d in _PARITY_DIRECTIONS:
            ts, grazing = self.ray_hits(point, d)
            parity = bool(len(ts) % 2)
            if not grazing:
                return parity
            votes.append(parity)
        return sum(votes) * 2 > len(votes)

    # -- distance queries ----------------------------------------------------

    def _box_dist_sq(self, node, p):
        d = np.maximum(self._bb_min[node] - p, 0.0) + np.maximum(p - self._bb_max[node], 0.0)
        return float(d @ d)

    def closest_distance(self, point, upper_bound: float = np.inf) -> float:
        """Unsigned distance to the closest point on the mesh surface.

        Best-first BVH descent; returns a value > upper_bound (not exact)
        when the true distance exceeds upper_bound.
        """
        p = np.asarray(point, dtype=np.float64)
        best_sq = upper_bound * upper_bound if np.isfinite(upper_bound) else np.inf
        found_sq = np.inf
        root = self._box_dist_sq(0, p)
        heap = [(root, 0)] if root <= best_sq else []
        while heap:
            d_sq, node = heapq.heappop(heap)
            if d_sq > best_sq:
                break
            cnt = self._count[node]
            if cnt > 0:
                s = self._start[node]
                d = point_triangles_dist_sq(
                    p, self._v0[s:s + cnt], self._v1[s:s + cnt], self._v2[s:s + cnt]
                ).min()
                if d < found_sq:
                    found_sq = d
                    best_sq = min(best_sq, found_sq)
            else:
                for child in (self._left[node], self._right[node]):
                    cd = self._box_dist_sq(child, p)
                    if cd <= best_sq:
                        heapq.heappush(heap, (cd, child))
        return float(np.sqrt(found_sq))

    def segment_intersects(self, p0, p1) -> bool:
        """True when the closed segment p0..p1 touches or crosses the surface."""
        p0 = np.asarray(p0, dtype=np.float64)
        p1 = np.asarray(p1, dtype=np.float64)
        length = float(np.linalg.norm(p1 - p0))
        if length == 0.0:
            return self.closest_distance(p0, upper_bound=_EPS_T) <= _EPS_T
        direction = (p1 - p0) / length
        ts, _ = self.ray_hits(p0, direction)
        if len(ts) and ts[0] <= length + _EPS_T * (1 + length):
            return True
        # A fully-contained segment crosses nothing; parity of either endpoint
        # settles it.
        return self.contains(p0)


def batch_min_distance(points, vertices, triangles, pair_budget: int = 4_000_000) -> np.ndarray:
    """Min unsigned distance from each point to a triangle soup.

    Brute force over point x triangle pairs, chunked by triangles to bound
    memory; intended for many points against modest meshes where per-point
    tree descent loses to vectorization.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    vertices = np.asarray(vertices, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int64)
    tri = vertices[triangles]
    n_pts = len(points)
    best = np.full(n_pts, np.inf)
    step = max(1, pair_budget // max(1, n_pts))
    for s in range(0, len(tri), step):
        chunk = tri[s:s + step]
        v0 = np.repeat(chunk[None, :, 0], n_pts, axis=0).reshape(-1, 3)
        v1 = np.repeat(chunk[None, :, 1], n_pts, axis=0).reshape(-1, 3)
        v2 = np.repeat(chunk[None, :, 2], n_pts, axis=0).reshape(-1, 3)
        p = np.repeat(points[:, None, :], len(chunk), axis=1).reshape(-1, 3)
        d = point_triangles_dist_sq(p, v0, v1, v2).reshape(n_pts, len(chunk)).min(axis=1)
        np.minimum(best, d, out=best)
    return np.sqrt(best)


def slice_mesh_plane(vertices, triangles, origin, normal, u_axis, v_axis):
    """Cross-section of a mesh by a plane, as 2D polyline loops.

    Intersects each triangle with the plane through ``origin`` with unit
    ``normal``; chains the resulting segments into ordered polylines in the
    (u_axis, v_axis) plane basis. Open chains are returned as-is.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int64)
    normal = _as_unit(normal)
    h = (vertices - np.asarray(origin)) @ normal
    # Nudge on-plane vertices off the plane so every crossing is strictly
    # edge-interior; keeps the chained loops closed at vertex alignments.
    tol = 1e-9 * max(1.0, float(np.abs(vertices).max()))
    h = np.where(np.abs(h) < tol, tol, h)
    segs = []
    tri_h = h[triangles]
    crossing = ~((tri_h > 0).all(axis=1) | (tri_h < 0).all(axis=1))
    for tri in triangles[crossing]:
        pts = []
        for a, b in ((0, 1), (1, 2), (2, 0)):
            ha, hb = h[tri[a]], h[tri[b]]
            if (ha > 0) == (hb > 0):
                continue
            t = ha / (ha - hb)
            pts.append(vertices[tri[a]] + t * (vertices[tri[b]] - vertices[tri[a]]))
        if len(pts) == 2:
            segs.append((pts[0], pts[1]))
    if not segs:
        return []

    u_axis = _as_unit(u_axis)
    v_axis = _as_unit(v_axis)
    pts2 = [
        (
            (float(a @ u_axis), float(a @ v_axis)),
            (float(b @ u_axis), float(b @ v_axis)),
        )
        for a, b in segs
    ]

    def key(p):
        return (round(p[0], 6), round(p[1], 6))

    adj: dict[tuple, list[tuple]] = {}
    for a, b in pts2:
        adj.setdefault(key(a), []).append(b)
        adj.setdefault(key(b), []).append(a)

    loops = []
    visited: set[frozenset] = set()
    for a, b in pts2:
        edge = frozenset((key(a), key(b)))
        if edge in visited:
            continue
        chain = [a, b]
        visited.add(edge)
        while True:
            tail = chain[-1]
            nxt = None
            for cand in adj.get(key(tail), []):
                e = frozenset((key(tail), key(cand)))
                if e not in visited and key(cand) != key(tail):
                    nxt = cand
                    visited.add(e)
                    break
            if nxt is None:
                break
            chain.append(nxt)
            if key(nxt) == key(chain[0]):
                break
        loops.append([(float(x), float(y)) for x, y in chain])
    return loops
