"""Point-cloud data model, text file I/O, normalization and dataset ingestion.

File format: first non-comment line is the point count N, followed by N
lines of "x y z" or "x y z label". Lines starting with '#' are comments.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PointCloud",
    "Dataset",
    "CloudFormatError",
    "load_cloud",
    "save_cloud",
    "normalize_unit_sphere",
    "subsample",
    "ingest_dataset",
]


class CloudFormatError(ValueError):
    """Malformed cloud file."""


@dataclass
class PointCloud:
    points: np.ndarray  # (N, 3) float64
    labels: np.ndarray | None = None  # (N,) int, optional part indices

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise CloudFormatError(f"points must be Nx3, got {self.points.shape}")
        if self.points.shape[0] < 1:
            raise CloudFormatError("empty cloud")
        if not np.isfinite(self.points).all():
            raise CloudFormatError("non-finite coordinates")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.points.shape[0],):
                raise CloudFormatError("labels length must match point count")

    @property
    def n(self) -> int:
        return self.points.shape[0]


@dataclass
class Dataset:
    clouds: list[PointCloud]
    class_name: str
    n_points: int

    def __post_init__(self):
        if not self.clouds:
            raise CloudFormatError("empty dataset")
        for c in self.clouds:
            if c.n != self.n_points:
                raise CloudFormatError(
                    f"dataset cloud has {c.n} points, expected {self.n_points}")


def load_cloud(path) -> PointCloud:
    rows, labels = [], []
    expected = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if expected is None:
                if len(parts) != 1:
                    raise CloudFormatError(f"{path}:{lineno}: expected point count")
                try:
                    expected = int(parts[0])
                except ValueError as e:
                    raise CloudFormatError(f"{path}:{lineno}: bad point count") from e
                continue
            if len(parts) not in (3, 4):
                raise CloudFormatError(
                    f"{path}:{lineno}: expected 3 or 4 columns, got {len(parts)}")
            try:
                rows.append([float(v) for v in parts[:3]])
            except ValueError as e:
                raise CloudFormatError(f"{path}:{lineno}: bad coordinate") from e
            if len(parts) == 4:
                try:
                    labels.append(int(parts[3]))
                except ValueError as e:
                    raise CloudFormatError(f"{path}:{lineno}: bad label") from e
            elif labels:
                raise CloudFormatError(f"{path}:{lineno}: inconsistent label column")
    if expected is None:
        raise CloudFormatError(f"{path}: missing point count header")
    if expected == 0 or not rows:
        raise CloudFormatError(f"{path}: empty cloud")
    if len(rows) != expected:
        raise CloudFormatError(
            f"{path}: header says {expected} points but file has {len(rows)}")
    if labels and len(labels) != len(rows):
        raise CloudFormatError(f"{path}: label column present on only some rows")
    return PointCloud(np.array(rows), np.array(labels) if labels else None)


def save_cloud(cloud: PointCloud, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{cloud.n}\n")
        for i in range(cloud.n):
            x, y, z = cloud.points[i]
            line = f"{x:.9g} {y:.9g} {z:.9g}"
            if cloud.labels is not None:
                line += f" {cloud.labels[i]}"
            fh.write(line + "\n")


def normalize_unit_sphere(cloud: PointCloud) -> PointCloud:
    """Center at the origin and scale so the farthest point has norm 1."""
    pts = cloud.points - cloud.points.mean(axis=0)
    r = float(np.linalg.norm(pts, axis=1).max())
    if r > 0.0:
        pts = pts / r
    return PointCloud(pts, cloud.labels)


def subsample(cloud: PointCloud, n: int, seed: int) -> PointCloud:
    """Uniform sample of n points: without replacement when n <= N, else with."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    idx = rng.choice(cloud.n, size=n, replace=n > cloud.n)
    return PointCloud(cloud.points[idx],
                      cloud.labels[idx] if cloud.labels is not None else None)


def ingest_dataset(directory, n_points: int, seed: int,
                   class_name: str | None = None) -> Dataset:
    """Load every cloud file in a directory, normalized and subsampled.

    Files are processed in lexicographic name order for stable output.
    """
    names = sorted(f for f in os.listdir(directory)
                   if not f.startswith(".") and
                   os.path.isfile(os.path.join(directory, f)))
    if not names:
        raise CloudFormatError(f"no cloud files in {directory}")
    clouds = []
    for i, name in enumerate(names):
        try:
            cloud = load_cloud(os.path.join(directory, name))
        except CloudFormatError:
            raise
        except Exception as e:
            raise CloudFormatError(f"{name}: {e}") from e
        cloud = normalize_unit_sphere(cloud)
        clouds.append(subsample(cloud, n_points, seed + i))
    return Dataset(clouds, class_name or os.path.basename(str(directory)), n_points)
