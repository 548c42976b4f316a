"""The four networks: multi-rooted generator, discriminator, latent
reconstruction head and hull-distance predictor.

The generator grows all roots jointly: level 0 holds the R AdaIN-modulated
root constants, and each tree layer propagates features from a node and its
ancestors, then branches every node into `degree` children. Child rows stay
block-contiguous per root, so root i always owns output rows
[i*points_per_root, (i+1)*points_per_root).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor

__all__ = [
    "GeneratorConfig",
    "DiscriminatorConfig",
    "ReconHeadConfig",
    "HullNetConfig",
    "LatentBundle",
    "PartitionedCloud",
    "Generator",
    "treegcn_forward",
    "Discriminator",
    "ReconHead",
    "HullNet",
    "adain",
]

MIXING_STRATEGIES = ("uniform", "half", "single", "independent")


@dataclass
class LatentBundle:
    """R per-root latent codes plus the mixing strategy that produced them."""

    z: np.ndarray  # (R, z_dim)
    strategy: str = "independent"

    def __post_init__(self):
        self.z = np.ascontiguousarray(self.z, dtype=np.float64)
        if self.z.ndim != 2:
            raise ValueError(f"latents must be R x z_dim, got {self.z.shape}")
        if self.strategy not in MIXING_STRATEGIES:
            raise ValueError(f"unknown mixing strategy {self.strategy!r}")


@dataclass
class PartitionedCloud:
    """Generator output: R contiguous blocks of points_per_root points."""

    points: np.ndarray  # (R * points_per_root, 3)
    points_per_root: int

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        if self.points.shape[0] % self.points_per_root != 0:
            raise ValueError("point count is not a multiple of points_per_root")

    @property
    def roots(self) -> int:
        return self.points.shape[0] // self.points_per_root

    @property
    def root_of_point(self) -> np.ndarray:
        return np.arange(self.points.shape[0]) // self.points_per_root

    def block(self, i: int) -> np.ndarray:
        ppr = self.points_per_root
        return self.points[i * ppr:(i + 1) * ppr]


@dataclass
class GeneratorConfig:
    roots: int
    z_dim: int = 96
    root_dim: int = 256
    branching: tuple = (2, 2, 2, 2, 16)
    features: int = 128
    out_dim: int = 3
    share_dim: int = 16
    slope: float = 0.2
    feature_sharing: bool = True  # identity when False (causality probes)

    def __post_init__(self):
        self.branching = tuple(int(b) for b in self.branching)
        if self.roots < 1:
            raise ValueError("need at least one root")
        if not self.branching:
            raise ValueError("need at least one tree layer")

    @property
    def points_per_root(self) -> int:
        return math.prod(self.branching)

    @property
    def n_points(self) -> int:
        return self.roots * self.points_per_root

    @property
    def level_dims(self) -> list[int]:
        n = len(self.branching)
        return [self.root_dim] + [self.features] * (n - 1) + [self.out_dim]


@dataclass
class DiscriminatorConfig:
    conv: tuple = (64, 128, 512, 1024)
    dense: tuple = (1024, 512, 512)
    slope: float = 0.2


@dataclass
class ReconHeadConfig:
    dense: tuple = (512, 128, 128)
    z_dim: int = 96
    slope: float = 0.2


@dataclass
class HullNetConfig:
    conv: tuple = (64, 128, 256, 512)
    dense: tuple = (512, 256, 128, 64, 31)
    slope: float = 0.2


def _init_w(rng, fin: int, fout: int) -> np.ndarray:
    return 0.02 * rng.normal(size=(fin, fout))


class _Net:
    prefix = "net"

    def __init__(self):
        self.params: dict[str, Parameter] = {}

    def _p(self, name: str, arr) -> Parameter:
        p = Parameter(np.asarray(arr, dtype=np.float64), f"{self.prefix}/{name}")
        self.params[name] = p
        return p

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def set_trainable(self, flag: bool):
        for p in self.params.values():
            p.requires_grad = flag


def treegcn_forward(levels: list[Tensor], w_loop: Tensor, w_ancs: list[Tensor],
                    b: Tensor, branch_mats: list[Tensor]) -> Tensor:
    """One tree-GCN layer: ancestor-aware propagation followed by branching.

    `levels[d]` holds the features of all depth-d nodes; the last entry is the
    current leaf level. Each leaf aggregates its own features through `w_loop`
    and each ancestor's through the per-depth matrix `w_ancs[d]`, then spawns
    one child per branching matrix. Children of leaf p occupy rows
    p*degree .. p*degree+degree-1, preserving block-contiguous subtrees.
    """
    x = levels[-1]
    p = x.data.shape[0]
    v = ad.matmul(x, w_loop)
    for d, w in enumerate(w_ancs):
        stride = p // levels[d].data.shape[0]
        anc = ad.gather_rows(levels[d], np.arange(p) // stride)
        v = ad.add(v, ad.matmul(anc, w))
    v = ad.add(v, ad.broadcast_to(b, v.data.shape))
    degree = len(branch_mats)
    children = [ad.matmul(v, bj) for bj in branch_mats]
    stacked = ad.concat(children, axis=0)
    perm = (np.arange(degree)[None, :] * p + np.arange(p)[:, None]).ravel()
    return ad.gather_rows(stacked, perm)


def adain(root: Tensor, scale: Tensor, bias: Tensor) -> Tensor:
    """Row-wise instance normalization of root constants, re-modulated.

    out = scale * (root - mu) / sigma + bias, with mu/sigma taken over each
    row's channels and sigma floored at 1e-6.
    """
    r, f = root.data.shape
    mu = ad.scale(ad.sum_axis(root, 1), 1.0 / f)
    centered = ad.sub(root, ad.broadcast_to(mu, (r, f)))
    var = ad.scale(ad.sum_axis(ad.mul(centered, centered), 1), 1.0 / f)
    sigma = ad.power(ad.add_scalar(var, 1e-12), 0.5)
    sigma = ad.add_scalar(ad.relu(ad.add_scalar(sigma, -1e-6)), 1e-6)
    norm = ad.mul(centered, ad.broadcast_to(ad.power(sigma, -1.0), (r, f)))
    return ad.add(ad.mul(scale, norm), bias)


class Generator(_Net):
    prefix = "gen"

    def __init__(self, config: GeneratorConfig, rng):
        super().__init__()
        self.config = config
        c = config
        self._p("root_const", 0.1 * rng.normal(size=(c.roots, c.root_dim)))
        # mapping MLP: z -> hidden -> (scale_raw, bias); zero raw = identity scale
        self._p("map/W1", _init_w(rng, c.z_dim, c.root_dim))
        self._p("map/b1", np.zeros(c.root_dim))
        self._p("map/W2", _init_w(rng, c.root_dim, 2 * c.root_dim))
        self._p("map/b2", np.zeros(2 * c.root_dim))
        dims = c.level_dims
        for l, degree in enumerate(c.branching):
            fin, fout = dims[l], dims[l + 1]
            self._p(f"tree{l}/W_loop", _init_w(rng, fin, fout))
            for d in range(l):
                self._p(f"tree{l}/W_anc{d}", _init_w(rng, dims[d], fout))
            self._p(f"tree{l}/b", np.zeros(fout))
            for j in range(degree):
                self._p(f"tree{l}/B{j}", _init_w(rng, fout, fout))
        f = c.features
        self._p("share/W_dense", _init_w(rng, f, c.share_dim))
        self._p("share/b_dense", np.zeros(c.share_dim))
        self._p("share/W_conv", _init_w(rng, f + c.share_dim, f))
        self._p("share/b_conv", np.zeros(f))

    def mapping_forward(self, z: Tensor) -> tuple[Tensor, Tensor]:
        """Latent rows -> per-root (scale, bias) modulation vectors."""
        c = self.config
        h = ad.leaky_relu(ad.affine(z, self.params["map/W1"], self.params["map/b1"]),
                          c.slope)
        out = ad.affine(h, self.params["map/W2"], self.params["map/b2"])
        raw_scale = ad.slice_cols(out, 0, c.root_dim)
        bias = ad.slice_cols(out, c.root_dim, 2 * c.root_dim)
        return ad.add_scalar(raw_scale, 1.0), bias

    def feature_share(self, x: Tensor, per_shape: int) -> Tensor:
        c = self.config
        if not c.feature_sharing:
            return x
        n = x.data.shape[0]
        pooled = ad.block_pool(x, per_shape, mode="max")
        h = ad.affine(pooled, self.params["share/W_dense"], self.params["share/b_dense"])
        rep = ad.gather_rows(h, np.repeat(np.arange(n // per_shape), per_shape))
        cat = ad.concat([x, rep], axis=1)
        return ad.leaky_relu(
            ad.affine(cat, self.params["share/W_conv"], self.params["share/b_conv"]),
            c.slope)

    def forward(self, z: Tensor, batch: int = 1) -> Tensor:
        """(batch*R) x z_dim latents -> (batch*R*points_per_root) x 3 points."""
        c = self.config
        if z.data.shape != (batch * c.roots, c.z_dim):
            raise ad.DimensionError(
                f"latents must be {(batch * c.roots, c.z_dim)}, got {z.data.shape}")
        scale, bias = self.mapping_forward(z)
        roots = ad.gather_rows(self.params["root_const"],
                               np.tile(np.arange(c.roots), batch))
        levels = [adain(roots, scale, bias)]
        for l, degree in enumerate(c.branching):
            out = treegcn_forward(
                levels,
                self.params[f"tree{l}/W_loop"],
                [self.params[f"tree{l}/W_anc{d}"] for d in range(l)],
                self.params[f"tree{l}/b"],
                [self.params[f"tree{l}/B{j}"] for j in range(degree)],
            )
            if l == 0:
                out = self.feature_share(out, per_shape=c.roots * degree)
            if l == len(c.branching) - 1:
                out = ad.leaky_relu(out, c.slope)
            levels.append(out)
        return levels[-1]

    def generate(self, bundle: LatentBundle) -> PartitionedCloud:
        out = self.forward(Tensor(bundle.z))
        return PartitionedCloud(out.data.copy(), self.config.points_per_root)


class Discriminator(_Net):
    prefix = "disc"

    def __init__(self, config: DiscriminatorConfig, rng):
        super().__init__()
        self.config = config
        dims = [3] + list(config.conv)
        for i in range(len(config.conv)):
            self._p(f"conv{i}/W", _init_w(rng, dims[i], dims[i + 1]))
            self._p(f"conv{i}/b", np.zeros(dims[i + 1]))
        ddims = [config.conv[-1]] + list(config.dense) + [1]
        for i in range(len(ddims) - 1):
            self._p(f"dense{i}/W", _init_w(rng, ddims[i], ddims[i + 1]))
            self._p(f"dense{i}/b", np.zeros(ddims[i + 1]))

    def forward(self, cloud: Tensor, block: int | None = None
                ) -> tuple[Tensor, Tensor]:
        """Stacked clouds of `block` points each -> (score per cloud, pre-pool features)."""
        c = self.config
        if block is None:
            block = cloud.data.shape[0]
        h = cloud
        for i in range(len(c.conv)):
            h = ad.leaky_relu(
                ad.affine(h, self.params[f"conv{i}/W"], self.params[f"conv{i}/b"]),
                c.slope)
        last_conv = h
        h = ad.block_pool(h, block, mode="max")
        for i in range(len(c.dense) + 1):
            h = ad.affine(h, self.params[f"dense{i}/W"], self.params[f"dense{i}/b"])
        return h, last_conv

    def score(self, points: np.ndarray) -> float:
        s, _ = self.forward(Tensor(points))
        return float(s.data.ravel()[0])


class ReconHead(_Net):
    prefix = "recon"

    def __init__(self, config: ReconHeadConfig, feature_dim: int, rng):
        super().__init__()
        self.config = config
        dims = [feature_dim] + list(config.dense) + [config.z_dim]
        for i in range(len(dims) - 1):
            self._p(f"dense{i}/W", _init_w(rng, dims[i], dims[i + 1]))
            self._p(f"dense{i}/b", np.zeros(dims[i + 1]))

    def forward(self, last_conv: Tensor, points_per_root: int) -> Tensor:
        """Per-root pooled discriminator features -> (R per cloud) x z_dim."""
        c = self.config
        if last_conv.data.shape[0] % points_per_root != 0:
            raise ad.DimensionError(
                f"point count {last_conv.data.shape[0]} is not a multiple of "
                f"points_per_root {points_per_root}")
        h = ad.block_pool(last_conv, points_per_root, mode="max")
        n = len(c.dense) + 1
        for i in range(n):
            h = ad.affine(h, self.params[f"dense{i}/W"], self.params[f"dense{i}/b"])
            h = ad.tanh(h) if i == n - 1 else ad.leaky_relu(h, c.slope)
        return h


class HullNet(_Net):
    prefix = "hull"

    def __init__(self, config: HullNetConfig, rng):
        super().__init__()
        self.config = config
        dims = [3] + list(config.conv)
        for i in range(len(config.conv)):
            self._p(f"conv{i}/W", _init_w(rng, dims[i], dims[i + 1]))
            self._p(f"conv{i}/b", np.zeros(dims[i + 1]))
        ddims = [2 * config.conv[-1]] + list(config.dense) + [1]
        for i in range(len(ddims) - 1):
            self._p(f"dense{i}/W", _init_w(rng, ddims[i], ddims[i + 1]))
            self._p(f"dense{i}/b", np.zeros(ddims[i + 1]))

    def forward(self, cloud: Tensor, block: int | None = None) -> Tensor:
        """Stacked clouds of `block` points each -> one distance estimate per cloud."""
        c = self.config
        if block is None:
            block = cloud.data.shape[0]
        h = cloud
        for i in range(len(c.conv)):
            h = ad.leaky_relu(
                ad.affine(h, self.params[f"conv{i}/W"], self.params[f"conv{i}/b"]),
                c.slope)
        h = ad.concat([ad.block_pool(h, block, mode="min"),
                       ad.block_pool(h, block, mode="max")], axis=1)
        for i in range(len(c.dense) + 1):
            h = ad.leaky_relu(
                ad.affine(h, self.params[f"dense{i}/W"], self.params[f"dense{i}/b"]),
                c.slope)
        return h

    def predict(self, points: np.ndarray) -> float:
        return float(self.forward(Tensor(points)).data.ravel()[0])
