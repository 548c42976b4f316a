"""The five training objectives and their weighted combination.

Every loss returns a scalar graph node so gradients reach whichever
network the caller is updating. Each auxiliary term can be toggled off
for ablations; a disabled term contributes exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = [
    "LossWeights",
    "wgan_d_loss",
    "wgan_g_loss",
    "convexity_loss",
    "root_drop_loss",
    "triplet_loss",
    "recon_loss",
    "total_g_loss",
    "ROOT_DROP_EPS",
]

ROOT_DROP_EPS = 1e-6


@dataclass
class LossWeights:
    lam_h: float = 1.0
    lam_rd: float = 0.1
    lam_t: float = 1.0
    lam_rec: float = 1.0
    lam_gp: float = 10.0
    enable_h: bool = True
    enable_rd: bool = True
    enable_t: bool = True
    enable_rec: bool = True

    def __post_init__(self):
        for name in ("lam_h", "lam_rd", "lam_t", "lam_rec", "lam_gp"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def _scalar(t: Tensor) -> Tensor:
    return ad.mean_all(t)


def wgan_d_loss(disc, real, fake, lam_gp: float = 10.0, rng=None) -> Tensor:
    """Critic loss D(fake) - D(real) plus the unit-gradient-norm penalty.

    The penalty point interpolates real and fake per point with uniform
    weights; its critic gradient is taken through a differentiable backward
    pass so the penalty trains the critic parameters.
    """
    real = np.ascontiguousarray(real, dtype=np.float64)
    fake = np.ascontiguousarray(fake, dtype=np.float64)
    if real.shape != fake.shape:
        raise ad.DimensionError(f"real {real.shape} vs fake {fake.shape}")
    s_fake = _scalar(disc.forward(Tensor(fake))[0])
    s_real = _scalar(disc.forward(Tensor(real))[0])
    loss = ad.sub(s_fake, s_real)
    if lam_gp > 0.0:
        rng = rng or np.random.default_rng()
        u = rng.uniform(size=(real.shape[0], 1))
        x_hat = Tensor(u * fake + (1.0 - u) * real, requires_grad=True)
        s_hat = _scalar(disc.forward(x_hat)[0])
        (g,) = ad.grad(s_hat, [x_hat])
        norm = ad.power(ad.add_scalar(ad.sum_all(ad.mul(g, g)), 1e-12), 0.5)
        pen = ad.power(ad.add_scalar(norm, -1.0), 2.0)
        loss = ad.add(loss, ad.scale(pen, lam_gp))
    return loss


def wgan_g_loss(disc, fake: Tensor) -> Tensor:
    """Generator side: -D(fake), with gradients through the generated cloud."""
    return ad.neg(_scalar(disc.forward(fake)[0]))


def convexity_loss(hullnet, fake: Tensor, points_per_root: int) -> Tensor:
    """Mean predicted distance-to-hull over the per-root point blocks."""
    preds = hullnet.forward(fake, block=points_per_root)
    return ad.mean_all(preds)


def root_drop_loss(disc, fake: Tensor, points_per_root: int,
                   eps: float = ROOT_DROP_EPS) -> Tensor | None:
    """Score retained after dropping each root block, normalized by the
    full-shape score. Returns None (term skipped) when |D(full)| <= eps."""
    n = fake.data.shape[0]
    r = n // points_per_root
    s_full = _scalar(disc.forward(fake)[0])
    if abs(s_full.data.item()) <= eps:
        return None
    inv = ad.power(s_full, -1.0)
    terms = []
    for i in range(r):
        keep = np.concatenate([np.arange(0, i * points_per_root),
                               np.arange((i + 1) * points_per_root, n)])
        dropped = ad.gather_rows(fake, keep)
        s_i = _scalar(disc.forward(dropped)[0])
        terms.append(ad.mul(ad.sub(s_full, s_i), inv))
    total = terms[0]
    for t in terms[1:]:
        total = ad.add(total, t)
    return ad.scale(total, 1.0 / r)


def triplet_loss(fake: Tensor, points_per_root: int, margin: float = 0.2,
                 n_triplets: int = 512, rng=None) -> Tensor:
    """Hinge over sampled (anchor, same-root positive, other-root negative)
    point triplets, computed on output coordinates."""
    n = fake.data.shape[0]
    r = n // points_per_root
    if r < 2:
        raise ValueError("triplet loss needs at least two roots")
    rng = rng or np.random.default_rng()
    a_root = rng.integers(r, size=n_triplets)
    n_root = (a_root + rng.integers(1, r, size=n_triplets)) % r
    ai = a_root * points_per_root + rng.integers(points_per_root, size=n_triplets)
    pi = a_root * points_per_root + rng.integers(points_per_root, size=n_triplets)
    ni = n_root * points_per_root + rng.integers(points_per_root, size=n_triplets)
    a = ad.gather_rows(fake, ai)
    p = ad.gather_rows(fake, pi)
    neg = ad.gather_rows(fake, ni)

    def dist(x, y):
        d = ad.sub(x, y)
        return ad.power(ad.add_scalar(ad.sum_axis(ad.mul(d, d), 1), 1e-18), 0.5)

    hinge = ad.relu(ad.add_scalar(ad.sub(dist(a, p), dist(a, neg)), margin))
    return ad.mean_all(hinge)


def recon_loss(z: np.ndarray, recon: Tensor) -> Tensor:
    """Mean squared error between sampled latents and their reconstruction."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    if z.shape != recon.data.shape:
        raise ad.DimensionError(f"latents {z.shape} vs reconstruction {recon.data.shape}")
    d = ad.sub(recon, Tensor(z))
    return ad.mean_all(ad.mul(d, d))


def total_g_loss(parts: dict, weights: LossWeights) -> Tensor:
    """Weighted sum of the generator objectives; disabled or skipped terms
    contribute exactly zero."""
    total = parts["wgan"]
    pieces = (("h", weights.enable_h, weights.lam_h),
              ("rd", weights.enable_rd, weights.lam_rd),
              ("t", weights.enable_t, weights.lam_t),
              ("rec", weights.enable_rec, weights.lam_rec))
    for key, enabled, lam in pieces:
        term = parts.get(key)
        if enabled and term is not None and lam != 0.0:
            total = ad.add(total, ad.scale(term, lam))
    return total
