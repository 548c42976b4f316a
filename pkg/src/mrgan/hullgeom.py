"""3D convex-hull geometry and the analytic distance-to-hull measure.

Also provides the synthetic sphere/box cloud sampler and the labeled
dataset generator used to train the hull-distance predictor.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .pointcloud import PointCloud, ingest_dataset

__all__ = [
    "ConvexHull",
    "SyntheticSpec",
    "Sphere",
    "Box",
    "DegenerateCloudError",
    "convex_hull3",
    "distance_to_hull",
    "sample_synthetic",
    "random_spec",
    "make_hull_dataset",
]

COPLANAR_EPS = 1e-9


class DegenerateCloudError(ValueError):
    """All points coincident, collinear or coplanar within tolerance."""


@dataclass
class ConvexHull:
    vertices: np.ndarray  # (V, 3)
    faces: np.ndarray  # (T, 3) indices into vertices
    normals: np.ndarray  # (T, 3) outward unit normals
    offsets: np.ndarray  # (T,) plane offsets, n . x = d on the face plane

    @property
    def edge_count(self) -> int:
        edges = set()
        for a, b, c in self.faces:
            for e in ((a, b), (b, c), (c, a)):
                edges.add((min(e), max(e)))
        return len(edges)


@dataclass
class Sphere:
    center: np.ndarray
    radius: float

    def area(self) -> float:
        return 4.0 * np.pi * self.radius**2


@dataclass
class Box:
    center: np.ndarray
    half_extents: np.ndarray

    def area(self) -> float:
        a, b, c = self.half_extents
        return 8.0 * (a * b + b * c + c * a)


@dataclass
class SyntheticSpec:
    primitives: list
    points_per_cloud: int

    def __post_init__(self):
        if not self.primitives:
            raise ValueError("need at least one primitive")
        for p in self.primitives:
            if isinstance(p, Sphere) and p.radius <= 0:
                raise ValueError("sphere radius must be > 0")
            if isinstance(p, Box) and np.any(np.asarray(p.half_extents) <= 0):
                raise ValueError("box half-extents must be > 0")


def _initial_tetra(pts: np.ndarray) -> list[int]:
    # two extreme points along some axis
    lo = pts.argmin(axis=0)
    hi = pts.argmax(axis=0)
    cand = np.concatenate([lo, hi])
    best, i0, i1 = -1.0, 0, 0
    for a in cand:
        d = np.linalg.norm(pts - pts[a], axis=1)
        j = int(d.argmax())
        if d[j] > best:
            best, i0, i1 = d[j], int(a), j
    if best <= COPLANAR_EPS:
        raise DegenerateCloudError("all points coincident")
    # farthest from the line i0-i1
    u = pts[i1] - pts[i0]
    u = u / np.linalg.norm(u)
    rel = pts - pts[i0]
    perp = rel - np.outer(rel @ u, u)
    dist = np.linalg.norm(perp, axis=1)
    i2 = int(dist.argmax())
    if dist[i2] <= COPLANAR_EPS:
        raise DegenerateCloudError("all points collinear")
    # farthest from the plane i0-i1-i2
    n = np.cross(pts[i1] - pts[i0], pts[i2] - pts[i0])
    n = n / np.linalg.norm(n)
    d = np.abs(rel @ n)
    i3 = int(d.argmax())
    if d[i3] <= COPLANAR_EPS:
        raise DegenerateCloudError("all points coplanar")
    return [i0, i1, i2, i3]


class _Face:
    __slots__ = ("verts", "normal", "offset", "outside", "alive")

    def __init__(self, verts, normal, offset):
        self.verts = verts  # ordered triple, CCW seen from outside
        self.normal = normal
        self.offset = offset
        self.outside: list[int] = []
        self.alive = True


def _make_face(pts, a, b, c, interior) -> _Face:
    n = np.cross(pts[b] - pts[a], pts[c] - pts[a])
    norm = np.linalg.norm(n)
    if norm <= 0.0:
        raise DegenerateCloudError("zero-area hull face")
    n = n / norm
    d = float(n @ pts[a])
    if n @ interior > d:
        n, d = -n, -d
        a, b, c = a, c, b
    return _Face((a, b, c), n, d)


def convex_hull3(points) -> ConvexHull:
    """Quickhull over an Nx3 cloud; raises DegenerateCloudError when flat."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 4:
        raise ValueError(f"need at least 4 points of dimension 3, got {pts.shape}")
    tet = _initial_tetra(pts)
    interior = pts[tet].mean(axis=0)
    faces: list[_Face] = []
    for skip in range(4):
        tri = [tet[i] for i in range(4) if i != skip]
        faces.append(_make_face(pts, *tri, interior))

    def assign(candidates, targets):
        if len(candidates) == 0:
            return
        cand = np.asarray(candidates, dtype=np.intp)
        claimed = np.zeros(len(cand), dtype=bool)
        for f in targets:
            if claimed.all():
                break
            free = cand[~claimed]
            s = pts[free] @ f.normal - f.offset
            hit = s > COPLANAR_EPS
            f.outside.extend(free[hit].tolist())
            claimed[~claimed] |= hit

    assign([i for i in range(len(pts)) if i not in tet], faces)

    pending = [f for f in faces if f.outside]
    while pending:
        face = pending.pop()
        if not face.alive or not face.outside:
            continue
        out = np.asarray(face.outside, dtype=np.intp)
        apex = int(out[np.argmax(pts[out] @ face.normal)])
        visible = [f for f in faces if f.alive and
                   f.normal @ pts[apex] - f.offset > COPLANAR_EPS]
        # horizon: directed edges of visible faces whose neighbor is not visible
        visible_ids = {id(f) for f in visible}
        edge_owner = {}
        for f in faces:
            if f.alive:
                a, b, c = f.verts
                for e in ((a, b), (b, c), (c, a)):
                    edge_owner[e] = f
        horizon = []
        for f in visible:
            a, b, c = f.verts
            for e in ((a, b), (b, c), (c, a)):
                nb = edge_owner.get((e[1], e[0]))
                if nb is None or id(nb) not in visible_ids:
                    horizon.append(e)
        orphans = set()
        for f in visible:
            orphans.update(f.outside)
            f.alive = False
            f.outside = []
        orphans.discard(apex)
        new_faces = [_make_face(pts, a, b, apex, interior) for a, b in horizon]
        assign(sorted(orphans), new_faces)
        faces.extend(new_faces)
        pending.extend(f for f in new_faces if f.outside)

    alive = [f for f in faces if f.alive]
    used = sorted({v for f in alive for v in f.verts})
    remap = {v: i for i, v in enumerate(used)}
    hull = ConvexHull(
        vertices=pts[used].copy(),
        faces=np.array([[remap[v] for v in f.verts] for f in alive], dtype=np.intp),
        normals=np.array([f.normal for f in alive]),
        offsets=np.array([f.offset for f in alive]),
    )
    v, t = len(used), len(alive)
    if v - hull.edge_count + t != 2:
        raise DegenerateCloudError("hull is not a closed 2-manifold")
    return hull


def distance_to_hull(points) -> float:
    """Mean over points of the distance to the nearest hull face plane."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    hull = convex_hull3(pts)
    total = _kernels.min_plane_distance_sum(pts, hull.normals, hull.offsets)
    return max(total / len(pts), 0.0)


# ---------------------------------------------------------------------------
# synthetic clouds


def _sample_sphere(sph: Sphere, n: int, rng) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.asarray(sph.center) + sph.radius * v


def _sample_box(box: Box, n: int, rng) -> np.ndarray:
    h = np.asarray(box.half_extents, dtype=np.float64)
    face_areas = np.array([h[1] * h[2], h[1] * h[2], h[0] * h[2],
                           h[0] * h[2], h[0] * h[1], h[0] * h[1]])
    which = rng.choice(6, size=n, p=face_areas / face_areas.sum())
    u = rng.uniform(-1.0, 1.0, size=(n, 3)) * h
    for f in range(6):
        axis, side = f // 2, 1.0 if f % 2 == 0 else -1.0
        sel = which == f
        u[sel, axis] = side * h[axis]
    return np.asarray(box.center) + u


def sample_synthetic(spec: SyntheticSpec, seed=None, rng=None) -> PointCloud:
    """Uniform sample over the union of primitive surfaces."""
    if rng is None:
        rng = np.random.default_rng(seed)
    areas = np.array([p.area() for p in spec.primitives])
    counts = rng.multinomial(spec.points_per_cloud, areas / areas.sum())
    chunks = []
    for prim, k in zip(spec.primitives, counts):
        if k == 0:
            continue
        if isinstance(prim, Sphere):
            chunks.append(_sample_sphere(prim, k, rng))
        else:
            chunks.append(_sample_box(prim, k, rng))
    return PointCloud(np.concatenate(chunks, axis=0))


def random_spec(points_per_cloud: int, rng) -> SyntheticSpec:
    """One or two primitives with random placement and size."""
    prims = []
    for _ in range(int(rng.integers(1, 3))):
        center = rng.uniform(-0.5, 0.5, size=3)
        if rng.random() < 0.5:
            prims.append(Sphere(center, float(rng.uniform(0.2, 0.6))))
        else:
            prims.append(Box(center, rng.uniform(0.2, 0.6, size=3)))
    return SyntheticSpec(prims, points_per_cloud)


def make_hull_dataset(count: int, n_points: int, seed: int,
                      source: str = "synthetic",
                      cloud_dir=None) -> list[tuple[PointCloud, float]]:
    """Labeled (cloud, analytic distance-to-hull) pairs.

    source is "synthetic", "dir" (requires cloud_dir) or "mixed".
    Degenerate random draws are re-drawn.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if source not in ("synthetic", "dir", "mixed"):
        raise ValueError(f"unknown source {source!r}")
    rng = np.random.default_rng(seed)
    from_dir = []
    if source in ("dir", "mixed"):
        ds = ingest_dataset(cloud_dir, n_points, seed)
        from_dir = ds.clouds
    out = []
    i = 0
    while len(out) < count:
        use_dir = source == "dir" or (source == "mixed" and i % 2 == 1 and from_dir)
        if use_dir:
            cloud = from_dir[int(rng.integers(len(from_dir)))]
        else:
            cloud = sample_synthetic(random_spec(n_points, rng), rng=rng)
        i += 1
        try:
            label = distance_to_hull(cloud.points)
        except DegenerateCloudError:
            continue
        out.append((cloud, label))
    return out


def save_hull_dataset(pairs, directory) -> None:
    """One cloud file per sample plus an index of "filename label" lines."""
    from .pointcloud import save_cloud

    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "index.txt"), "w") as idx:
        for i, (cloud, label) in enumerate(pairs):
            name = f"hull_{i:06d}.xyz"
            save_cloud(cloud, os.path.join(directory, name))
            idx.write(f"{name} {label:.9g}\n")
