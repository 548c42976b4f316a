"""Evaluation suite: Chamfer, EMD, JSD, MMD, coverage, the part-modification
disentanglement ratio, and per-point locality heatmaps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import _kernels

__all__ = [
    "MetricReport",
    "DisentanglementReport",
    "chamfer",
    "emd",
    "jsd",
    "mmd",
    "coverage",
    "evaluate",
    "disentanglement",
    "locality_heatmap",
    "export_heatmap",
    "EMD_EXACT_LIMIT",
]

EMD_EXACT_LIMIT = 512


@dataclass
class MetricReport:
    jsd: float
    mmd_cd: float
    mmd_emd: float
    cov_cd: float
    cov_emd: float
    n_gen: int
    n_ref: int
    emd_approx: bool = False

    def to_csv(self) -> str:
        keys = ("jsd", "mmd_cd", "mmd_emd", "cov_cd", "cov_emd",
                "n_gen", "n_ref", "emd_approx")
        head = ",".join(keys)
        row = ",".join(str(getattr(self, k)) for k in keys)
        return f"{head}\n{row}\n"

    def to_text(self) -> str:
        lines = [f"JSD       {self.jsd:.6f}",
                 f"MMD-CD    {self.mmd_cd:.6f}",
                 f"MMD-EMD   {self.mmd_emd:.6f}{' (auction approx)' if self.emd_approx else ''}",
                 f"COV-CD    {self.cov_cd:.1f}%",
                 f"COV-EMD   {self.cov_emd:.1f}%",
                 f"clouds    {self.n_gen} generated vs {self.n_ref} reference"]
        return "\n".join(lines) + "\n"


@dataclass
class DisentanglementReport:
    frac_modified: float
    frac_unmodified: float
    ratio: float
    threshold: float
    n_trials: int

    def to_text(self) -> str:
        return ("modified-part fraction    "
                f"{self.frac_modified:.4f}\n"
                "unmodified-part fraction  "
                f"{self.frac_unmodified:.4f}\n"
                f"ratio                     {self.ratio:.4f}\n"
                f"threshold                 {self.threshold:.6f}\n"
                f"trials                    {self.n_trials}\n")


def _pts(cloud) -> np.ndarray:
    if hasattr(cloud, "points"):
        cloud = cloud.points
    return np.ascontiguousarray(cloud, dtype=np.float64)


def chamfer(a, b) -> float:
    """Symmetric mean of squared nearest-neighbor distances."""
    a, b = _pts(a), _pts(b)
    return (_kernels.nn_sqdist_sum(a, b) / len(a)
            + _kernels.nn_sqdist_sum(b, a) / len(b))


def _emd_exact(a: np.ndarray, b: np.ndarray) -> float:
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(d)
    return float(d[rows, cols].mean())


def _emd_auction(a: np.ndarray, b: np.ndarray, rel_tol: float = 1e-3) -> float:
    """Forward auction with epsilon scaling; cost within ~rel_tol of optimal."""
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    n = len(a)
    benefit = -d  # auction maximizes
    scale = max(d.max(), 1e-12)
    eps = scale / 2.0
    eps_final = rel_tol * scale
    prices = np.zeros(n)
    owner = np.full(n, -1)
    assignment = np.full(n, -1)
    while True:
        owner[:] = -1
        assignment[:] = -1
        unassigned = list(range(n))
        while unassigned:
            i = unassigned.pop()
            values = benefit[i] - prices
            j = int(values.argmax())
            best = values[j]
            values[j] = -np.inf
            second = values.max()
            prices[j] += best - second + eps
            prev = owner[j]
            owner[j] = i
            assignment[i] = j
            if prev >= 0:
                assignment[prev] = -1
                unassigned.append(prev)
        if eps <= eps_final:
            break
        eps = max(eps / 4.0, eps_final)
    return float(d[np.arange(n), assignment].mean())


def emd(a, b) -> float:
    """Optimal-bijection mean distance; exact up to EMD_EXACT_LIMIT points,
    auction approximation above."""
    a, b = _pts(a), _pts(b)
    if len(a) != len(b):
        raise ValueError(f"EMD needs equal sizes, got {len(a)} vs {len(b)}")
    if len(a) <= EMD_EXACT_LIMIT:
        return _emd_exact(a, b)
    return _emd_auction(a, b)


def _occupancy(clouds, grid_res: int) -> np.ndarray:
    counts = np.zeros(grid_res**3)
    for c in clouds:
        pts = _pts(c)
        idx = np.floor((pts + 1.0) / 2.0 * grid_res).astype(np.intp)
        idx = np.clip(idx, 0, grid_res - 1)
        flat = (idx[:, 0] * grid_res + idx[:, 1]) * grid_res + idx[:, 2]
        np.add.at(counts, flat, 1.0)
    return counts / counts.sum()


def jsd(gen_set, ref_set, grid_res: int = 28) -> float:
    """Jensen-Shannon divergence between aggregate voxel occupancies
    over [-1,1]^3, in nats."""
    if not gen_set or not ref_set:
        raise ValueError("jsd needs non-empty cloud sets")
    p = _occupancy(gen_set, grid_res)
    q = _occupancy(ref_set, grid_res)
    m = 0.5 * (p + q)

    def kl(x, y):
        mask = x > 0
        return float(np.sum(x[mask] * np.log(x[mask] / y[mask])))

    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


def _dist_fn(dist: str):
    if dist == "cd":
        return chamfer
    if dist == "emd":
        return emd
    raise ValueError(f"unknown distance {dist!r}, expected 'cd' or 'emd'")


def mmd(gen_set, ref_set, dist: str = "cd") -> float:
    """Mean over reference clouds of the distance to their closest generated cloud."""
    fn = _dist_fn(dist)
    return float(np.mean([min(fn(r, g) for g in gen_set) for r in ref_set]))


def coverage(gen_set, ref_set, dist: str = "cd") -> float:
    """Percent of reference clouds that are the nearest neighbor of some
    generated cloud."""
    fn = _dist_fn(dist)
    matched = set()
    for g in gen_set:
        dists = [fn(g, r) for r in ref_set]
        matched.add(int(np.argmin(dists)))
    return 100.0 * len(matched) / len(ref_set)


def evaluate(gen_set, ref_set, grid_res: int = 28) -> MetricReport:
    approx = any(len(_pts(c)) > EMD_EXACT_LIMIT for c in list(gen_set) + list(ref_set))
    return MetricReport(
        jsd=jsd(gen_set, ref_set, grid_res),
        mmd_cd=mmd(gen_set, ref_set, "cd"),
        mmd_emd=mmd(gen_set, ref_set, "emd"),
        cov_cd=coverage(gen_set, ref_set, "cd"),
        cov_emd=coverage(gen_set, ref_set, "emd"),
        n_gen=len(gen_set),
        n_ref=len(ref_set),
        emd_approx=approx,
    )


# ---------------------------------------------------------------------------
# disentanglement


def disentanglement(generate, roots: int, points_per_root: int,
                    n_pairs: int = 2500, n_trials: int = 100,
                    seed: int = 0, z_dim: int = 96,
                    threshold: float | None = None) -> DisentanglementReport:
    """Fraction of points meaningfully moved inside vs outside a modified root.

    `generate` maps an (R, z_dim) latent matrix to an (R*points_per_root, 3)
    cloud. The meaningful-change threshold is the mean per-point displacement
    under index correspondence across `n_pairs` random shape pairs (or the
    explicit `threshold` override); each trial then resamples one random
    root's latent and flags points whose displacement exceeds the threshold.
    """
    rng = np.random.default_rng(seed)
    if threshold is None:
        total = 0.0
        for _ in range(n_pairs):
            za = rng.normal(size=(roots, z_dim))
            zb = rng.normal(size=(roots, z_dim))
            disp = np.linalg.norm(generate(za) - generate(zb), axis=1)
            total += disp.mean()
        threshold = total / n_pairs
    frac_mod = 0.0
    frac_unmod = 0.0
    block = np.arange(roots * points_per_root) // points_per_root
    for _ in range(n_trials):
        z = rng.normal(size=(roots, z_dim))
        r = int(rng.integers(roots))
        z2 = z.copy()
        z2[r] = rng.normal(size=z_dim)
        disp = np.linalg.norm(generate(z2) - generate(z), axis=1)
        flags = disp > threshold
        inside = block == r
        frac_mod += flags[inside].mean()
        if roots > 1:
            frac_unmod += flags[~inside].mean()
    frac_mod /= n_trials
    frac_unmod /= n_trials
    ratio = frac_mod / frac_unmod if frac_unmod > 0 else float("inf")
    return DisentanglementReport(frac_mod, frac_unmod, ratio, threshold, n_trials)


# ---------------------------------------------------------------------------
# locality heatmap


def locality_heatmap(before, after) -> np.ndarray:
    """Per-point displacement under index correspondence."""
    a, b = _pts(before), _pts(after)
    if a.shape != b.shape:
        raise ValueError(f"heatmap needs equal shapes, got {a.shape} vs {b.shape}")
    return np.linalg.norm(b - a, axis=1)


def export_heatmap(before, after, path) -> np.ndarray:
    """Cloud file with the displacement as a float fourth column, plus
    min/max comment lines for color scaling."""
    d = locality_heatmap(before, after)
    pts = _pts(after)
    with open(path, "w") as fh:
        fh.write(f"# min {d.min():.9g}\n# max {d.max():.9g}\n")
        fh.write(f"{len(pts)}\n")
        for (x, y, z), dist in zip(pts, d):
            fh.write(f"{x:.9g} {y:.9g} {z:.9g} {dist:.9g}\n")
    return d
