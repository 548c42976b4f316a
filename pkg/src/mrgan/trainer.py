"""Training: root-mixing latent sampler, the 8:1 critic/generator loop,
hull-net pretraining, checkpointing and the plain-text config format.

Checkpoint layout: magic "MRGF", u32 format version, u64 step counter,
a length-prefixed name -> (shape, little-endian f64 payload) table holding
every parameter and optimizer moment, then the config text and the json
RNG state, each length-prefixed.
"""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile
import typing
from dataclasses import dataclass, field, fields, is_dataclass, replace

import numpy as np

from . import autodiff as ad
from . import losses as L
from .autodiff import Adam, Tensor
from .hullgeom import make_hull_dataset
from .models import (Discriminator, DiscriminatorConfig, Generator,
                     GeneratorConfig, HullNet, HullNetConfig, LatentBundle,
                     MIXING_STRATEGIES, ReconHead, ReconHeadConfig)

__all__ = [
    "TrainConfig",
    "HullTrainConfig",
    "Checkpoint",
    "ModelBundle",
    "NumericFailure",
    "CheckpointError",
    "sample_mixing",
    "build_models",
    "train_gan",
    "train_hullnet",
    "save_checkpoint",
    "load_checkpoint",
    "config_to_text",
    "config_from_text",
]

MAGIC = b"MRGF"
FORMAT_VERSION = 1


class NumericFailure(RuntimeError):
    """A loss went non-finite; carries a diagnostic dump of the step."""

    def __init__(self, message: str, dump: dict):
        super().__init__(message)
        self.dump = dump


class CheckpointError(ValueError):
    """Unreadable, truncated or version-mismatched checkpoint file."""


@dataclass
class HullTrainConfig:
    batches: int = 20000
    batch_size: int = 64
    points: int = 256
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    source: str = "synthetic"  # synthetic | dir | mixed
    cloud_dir: str | None = None
    pool: int = 4096  # distinct labeled clouds cycled over during training
    holdout: int = 256

    def __post_init__(self):
        if self.batches < 0 or self.batch_size < 1 or self.points < 4:
            raise ValueError("invalid hull training sizes")


LossWeightsT = L.LossWeights


@dataclass
class TrainConfig:
    roots: int = 5
    branching: tuple = (2, 2, 2, 2, 16)
    features: int = 128
    root_dim: int = 256
    epochs: int = 500
    g_steps: int = 0  # when > 0, overrides epochs-derived step count
    batch_size: int = 16
    d_steps_per_g: int = 8
    lr: float = 1e-4
    beta1: float = 0.0
    beta2: float = 0.99
    seed: int = 0
    dataset: str = ""
    desk_scale: bool = False
    checkpoint_every: int = 500
    triplet_margin: float = 0.2
    triplet_count: int = 512
    feature_sharing: bool = True
    disc_conv: tuple = (64, 128, 512, 1024)
    disc_dense: tuple = (1024, 512, 512)
    recon_dense: tuple = (512, 128, 128)
    hull_conv: tuple = (64, 128, 256, 512)
    hull_dense: tuple = (512, 256, 128, 64, 31)
    weights: LossWeightsT = None  # type: ignore[name-defined]
    hull: HullTrainConfig = None  # type: ignore[assignment]

    _DESK = {
        "features": 32,
        "root_dim": 64,
        "disc_conv": (32, 64),
        "disc_dense": (64, 32),
        "recon_dense": (32, 32),
        "hull_conv": (32, 64),
        "hull_dense": (64, 32),
    }

    def __post_init__(self):
        if self.d_steps_per_g < 1:
            raise ValueError("d_steps_per_g must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        self.branching = tuple(int(b) for b in self.branching)
        self.disc_conv = tuple(int(v) for v in self.disc_conv)
        self.disc_dense = tuple(int(v) for v in self.disc_dense)
        self.recon_dense = tuple(int(v) for v in self.recon_dense)
        self.hull_conv = tuple(int(v) for v in self.hull_conv)
        self.hull_dense = tuple(int(v) for v in self.hull_dense)
        if self.weights is None:
            self.weights = L.LossWeights()
        if self.hull is None:
            self.hull = HullTrainConfig()
        if self.desk_scale:
            defaults = {f.name: f.default for f in fields(TrainConfig)}
            for key, value in self._DESK.items():
                if getattr(self, key) == defaults[key]:
                    setattr(self, key, value)

    @property
    def points_per_root(self) -> int:
        return math.prod(self.branching)

    @property
    def n_points(self) -> int:
        return self.roots * self.points_per_root


@dataclass
class ModelBundle:
    generator: Generator
    discriminator: Discriminator
    recon: ReconHead
    hullnet: HullNet

    def nets(self):
        return (self.generator, self.discriminator, self.recon, self.hullnet)

    def named_parameters(self) -> dict[str, ad.Parameter]:
        out = {}
        for net in self.nets():
            for p in net.parameters():
                out[p.name] = p
        return out

    def zero_grad(self):
        for net in self.nets():
            net.zero_grad()


@dataclass
class Checkpoint:
    config: TrainConfig
    tensors: dict  # name -> float64 ndarray (params and optimizer state)
    rng_state: dict
    step: int = 0
    version: int = FORMAT_VERSION


def build_models(config: TrainConfig, rng) -> ModelBundle:
    gen = Generator(GeneratorConfig(
        roots=config.roots, branching=config.branching,
        features=config.features, root_dim=config.root_dim,
        feature_sharing=config.feature_sharing), rng)
    disc = Discriminator(DiscriminatorConfig(
        conv=config.disc_conv, dense=config.disc_dense), rng)
    recon = ReconHead(ReconHeadConfig(dense=config.recon_dense),
                      config.disc_conv[-1], rng)
    hull = HullNet(HullNetConfig(conv=config.hull_conv,
                                 dense=config.hull_dense), rng)
    return ModelBundle(gen, disc, recon, hull)


# ---------------------------------------------------------------------------
# root mixing


def sample_mixing(r: int, rng) -> LatentBundle:
    """One of the four root-mixing strategies, chosen uniformly."""
    if r < 1:
        raise ValueError("need at least one root")
    strategy = MIXING_STRATEGIES[int(rng.integers(4))]
    if strategy == "uniform":
        z = np.tile(rng.normal(size=(1, 96)), (r, 1))
    elif strategy == "half":
        z1, z2 = rng.normal(size=(2, 96))
        perm = rng.permutation(r)
        z = np.empty((r, 96))
        half = (r + 1) // 2
        z[perm[:half]] = z1
        z[perm[half:]] = z2
    elif strategy == "single":
        z1, z2 = rng.normal(size=(2, 96))
        pick = int(rng.integers(r))
        z = np.tile(z2, (r, 1))
        z[pick] = z1
    else:
        z = rng.normal(size=(r, 96))
    return LatentBundle(z, strategy)


# ---------------------------------------------------------------------------
# config text format


_TUPLE_FIELDS = {"branching", "disc_conv", "disc_dense", "recon_dense",
                 "hull_conv", "hull_dense"}


def _field_types(cls) -> dict:
    hints = typing.get_type_hints(cls)
    return {f.name: hints.get(f.name, str) for f in fields(cls)}


def _format_value(name: str, value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_to_text(config: TrainConfig) -> str:
    lines = []
    for section, obj in (("", config), ("weights.", config.weights),
                         ("hull.", config.hull)):
        for f in fields(obj):
            if f.name in ("weights", "hull") or f.name.startswith("_"):
                continue
            lines.append(f"{section}{f.name} = {_format_value(f.name, getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def _parse_value(raw: str, name: str, kind) -> object:
    raw = raw.strip()
    try:
        return _convert_value(raw, name, kind)
    except (ValueError, TypeError) as exc:
        raise CheckpointError(f"bad config value for {name}: {exc}") from exc


def _convert_value(raw: str, name: str, kind) -> object:
    if name in _TUPLE_FIELDS or kind is tuple:
        return tuple(int(v) for v in raw.split(",") if v)
    origin = typing.get_origin(kind)
    if origin is typing.Union or str(kind).startswith("str |") or "None" in str(kind):
        if raw.lower() == "none":
            return None
        kind = str
    if kind is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"bad boolean {raw!r} for {name}")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def config_from_text(text: str) -> TrainConfig:
    top = _field_types(TrainConfig)
    wtypes = _field_types(L.LossWeights)
    htypes = _field_types(HullTrainConfig)
    values, wvalues, hvalues = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CheckpointError(f"config line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        if key.startswith("weights."):
            name = key[len("weights."):]
            if name not in wtypes:
                raise CheckpointError(f"config line {lineno}: unknown key {key!r}")
            wvalues[name] = _parse_value(val, name, wtypes[name])
        elif key.startswith("hull."):
            name = key[len("hull."):]
            if name not in htypes:
                raise CheckpointError(f"config line {lineno}: unknown key {key!r}")
            hvalues[name] = _parse_value(val, name, htypes[name])
        else:
            if key not in top or key in ("weights", "hull"):
                raise CheckpointError(f"config line {lineno}: unknown key {key!r}")
            values[key] = _parse_value(val, key, top[key])
    config = TrainConfig(**values,
                         weights=L.LossWeights(**wvalues),
                         hull=HullTrainConfig(**hvalues))
    return config


# ---------------------------------------------------------------------------
# checkpoint I/O


def _collect_tensors(models: ModelBundle, opts: dict[str, Adam]) -> dict:
    out = {name: p.data.copy() for name, p in models.named_parameters().items()}
    for tag, opt in opts.items():
        out[f"opt/{tag}/t"] = np.asarray(float(opt.t))
        for p, m, v in zip(opt.params, opt.m, opt.v):
            out[f"opt/{tag}/m/{p.name}"] = m.copy()
            out[f"opt/{tag}/v/{p.name}"] = v.copy()
    return out


def make_checkpoint(config: TrainConfig, models: ModelBundle, rng,
                    opts: dict[str, Adam] | None = None, step: int = 0) -> Checkpoint:
    return Checkpoint(config=config,
                      tensors=_collect_tensors(models, opts or {}),
                      rng_state=rng.bit_generator.state,
                      step=step)


def restore_models(ckpt: Checkpoint) -> ModelBundle:
    """Rebuild all four networks with the checkpoint's parameters."""
    models = build_models(ckpt.config, np.random.default_rng(0))
    named = models.named_parameters()
    for name, p in named.items():
        if name not in ckpt.tensors:
            raise CheckpointError(f"checkpoint missing parameter {name!r}")
        if ckpt.tensors[name].shape != p.data.shape:
            raise CheckpointError(
                f"checkpoint shape mismatch for {name!r}: "
                f"{ckpt.tensors[name].shape} vs {p.data.shape}")
        p.data = ckpt.tensors[name].copy()
    return models


def restore_optimizer(ckpt: Checkpoint, tag: str, opt: Adam) -> None:
    key = f"opt/{tag}/t"
    if key not in ckpt.tensors:
        return
    opt.t = int(ckpt.tensors[key])
    for i, p in enumerate(opt.params):
        opt.m[i] = ckpt.tensors[f"opt/{tag}/m/{p.name}"].copy()
        opt.v[i] = ckpt.tensors[f"opt/{tag}/v/{p.name}"].copy()


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    payload = bytearray()
    payload += MAGIC
    payload += struct.pack("<IQ", ckpt.version, ckpt.step)
    payload += struct.pack("<I", len(ckpt.tensors))
    for name in sorted(ckpt.tensors):
        # asarray keeps 0-d shapes; tobytes() already emits C order
        arr = np.asarray(ckpt.tensors[name], dtype="<f8")
        nb = name.encode()
        payload += struct.pack("<H", len(nb)) + nb
        payload += struct.pack("<B", arr.ndim)
        payload += struct.pack(f"<{arr.ndim}I", *arr.shape)
        payload += arr.tobytes()
    cfg = config_to_text(ckpt.config).encode()
    payload += struct.pack("<I", len(cfg)) + cfg
    rng = json.dumps(ckpt.rng_state).encode()
    payload += struct.pack("<I", len(rng)) + rng
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError("truncated checkpoint file")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        buf = fh.read()
    r = _Reader(buf)
    if r.take(4) != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version, step = r.unpack("<IQ")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {version}, expected {FORMAT_VERSION}")
    (count,) = r.unpack("<I")
    tensors = {}
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode()
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I") if ndim else ()
        size = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(r.take(8 * size), dtype="<f8").reshape(shape)
        tensors[name] = arr.astype(np.float64)
    (clen,) = r.unpack("<I")
    config = config_from_text(r.take(clen).decode())
    (rlen,) = r.unpack("<I")
    rng_state = json.loads(r.take(rlen).decode())
    return Checkpoint(config=config, tensors=tensors, rng_state=rng_state,
                      step=step, version=version)


def rng_from_state(state: dict):
    rng = np.random.default_rng(0)
    rng.bit_generator.state = state
    return rng


# ---------------------------------------------------------------------------
# metrics log


class MetricsLog:
    """CSV log: step,loss_name,value. Also keeps rows in memory."""

    def __init__(self, path=None):
        self.rows: list[tuple[int, str, float]] = []
        self._fh = open(path, "w") if path else None
        if self._fh:
            self._fh.write("step,loss_name,value\n")

    def add(self, step: int, name: str, value: float):
        self.rows.append((step, name, float(value)))
        if self._fh:
            self._fh.write(f"{step},{name},{value!r}\n")

    def close(self):
        if self._fh:
            self._fh.close()
            self._fh = None


def _check_finite(step: int, terms: dict):
    bad = {k: v for k, v in terms.items() if not np.isfinite(v)}
    if bad:
        raise NumericFailure(
            f"non-finite loss at step {step}: {sorted(bad)}",
            {"step": step, "losses": {k: float(v) for k, v in terms.items()}})


# ---------------------------------------------------------------------------
# GAN training


def _scalar_value(t) -> float:
    return float(t.data.ravel()[0])


def train_gan(config: TrainConfig, dataset, log_path=None,
              checkpoint_path=None, resume: Checkpoint | None = None,
              hull_ckpt: Checkpoint | None = None,
              extra_steps: int | None = None):
    """Alternating critic/generator loop; returns (Checkpoint, MetricsLog).

    The critic and its reconstruction head train jointly during critic
    steps; the hull-distance net stays frozen throughout. Fully
    deterministic per seed; resuming from a checkpoint is bitwise
    equivalent to an uninterrupted run.
    """
    ppr = config.points_per_root
    n_points = config.n_points
    clouds = [np.ascontiguousarray(c.points, dtype=np.float64) for c in dataset.clouds]
    if any(c.shape[0] != n_points for c in clouds):
        raise ValueError(f"dataset clouds must have {n_points} points")

    if resume is not None:
        models = restore_models(resume)
        rng = rng_from_state(resume.rng_state)
        start_step = resume.step
    else:
        rng = np.random.default_rng(config.seed)
        models = build_models(config, rng)
        start_step = 0
    gen, disc, recon, hull = models.nets()
    if hull_ckpt is not None and resume is None:
        for name, p in hull.params.items():
            full = f"{hull.prefix}/{name}"
            if full in hull_ckpt.tensors:
                p.data = hull_ckpt.tensors[full].copy()
    hull.set_trainable(False)

    opt_g = Adam(gen.parameters(), lr=config.lr, beta1=config.beta1,
                 beta2=config.beta2)
    opt_d = Adam(disc.parameters() + recon.parameters(), lr=config.lr,
                 beta1=config.beta1, beta2=config.beta2)
    if resume is not None:
        restore_optimizer(resume, "g", opt_g)
        restore_optimizer(resume, "d", opt_d)

    if extra_steps is not None:
        total_g = start_step // (config.d_steps_per_g + 1) + extra_steps
    elif config.g_steps > 0:
        total_g = config.g_steps
    else:
        total_g = config.epochs * max(1, len(clouds) // config.batch_size)

    log = MetricsLog(log_path)
    w = config.weights
    step = start_step
    g_done = start_step // (config.d_steps_per_g + 1)

    def d_step():
        nonlocal step
        step += 1
        batch_terms = {"d_wgan_gp": 0.0, "d_recon": 0.0, "d_total": 0.0}
        total = None
        for _ in range(config.batch_size):
            real = clouds[int(rng.integers(len(clouds)))]
            bundle = sample_mixing(config.roots, rng)
            fake = gen.forward(Tensor(bundle.z)).data.copy()
            d_loss = L.wgan_d_loss(disc, real, fake, lam_gp=w.lam_gp, rng=rng)
            _, lc = disc.forward(Tensor(fake))
            rec = L.recon_loss(bundle.z, recon.forward(lc, ppr))
            sample_loss = ad.add(d_loss, rec)
            total = sample_loss if total is None else ad.add(total, sample_loss)
            batch_terms["d_wgan_gp"] += _scalar_value(d_loss)
            batch_terms["d_recon"] += _scalar_value(rec)
        total = ad.scale(total, 1.0 / config.batch_size)
        batch_terms = {k: v / config.batch_size for k, v in batch_terms.items()}
        batch_terms["d_total"] = batch_terms["d_wgan_gp"] + batch_terms["d_recon"]
        _check_finite(step, batch_terms)
        models.zero_grad()
        total.backward()
        opt_d.step()
        models.zero_grad()
        for k, v in batch_terms.items():
            log.add(step, k, v)

    def g_step():
        nonlocal step
        step += 1
        names = ("g_wgan", "g_h", "g_rd", "g_t", "g_rec", "g_total")
        sums = dict.fromkeys(names, 0.0)
        rd_seen = 0
        total = None
        for _ in range(config.batch_size):
            bundle = sample_mixing(config.roots, rng)
            fake = gen.forward(Tensor(bundle.z))
            parts = {"wgan": L.wgan_g_loss(disc, fake)}
            if w.enable_h:
                parts["h"] = L.convexity_loss(hull, fake, ppr)
            if w.enable_rd and config.roots > 1:
                parts["rd"] = L.root_drop_loss(disc, fake, ppr)
            if w.enable_t and config.roots > 1:
                parts["t"] = L.triplet_loss(fake, ppr, config.triplet_margin,
                                            config.triplet_count, rng)
            if w.enable_rec:
                _, lc = disc.forward(fake)
                parts["rec"] = L.recon_loss(bundle.z, recon.forward(lc, ppr))
            sample_total = L.total_g_loss(parts, w)
            total = sample_total if total is None else ad.add(total, sample_total)
            sums["g_wgan"] += _scalar_value(parts["wgan"])
            for key, name in (("h", "g_h"), ("t", "g_t"), ("rec", "g_rec")):
                if key in parts:
                    sums[name] += _scalar_value(parts[key])
            if parts.get("rd") is not None:
                sums["g_rd"] += _scalar_value(parts["rd"])
                rd_seen += 1
            sums["g_total"] += _scalar_value(sample_total)
        total = ad.scale(total, 1.0 / config.batch_size)
        terms = {k: v / config.batch_size for k, v in sums.items()}
        if rd_seen:
            terms["g_rd"] = sums["g_rd"] / rd_seen
        _check_finite(step, terms)
        models.zero_grad()
        total.backward()
        opt_g.step()
        models.zero_grad()
        for k, v in terms.items():
            log.add(step, k, v)

    ckpt = None
    while g_done < total_g:
        for _ in range(config.d_steps_per_g):
            d_step()
        g_step()
        g_done += 1
        if checkpoint_path and config.checkpoint_every > 0 and \
                step % ((config.d_steps_per_g + 1) * config.checkpoint_every) == 0:
            ckpt = make_checkpoint(config, models, rng,
                                   {"g": opt_g, "d": opt_d}, step)
            save_checkpoint(ckpt, checkpoint_path)

    log.close()
    ckpt = make_checkpoint(config, models, rng, {"g": opt_g, "d": opt_d}, step)
    if checkpoint_path:
        save_checkpoint(ckpt, checkpoint_path)
    return ckpt, log


# ---------------------------------------------------------------------------
# hull-net pretraining


def train_hullnet(config: TrainConfig, log_path=None, checkpoint_path=None):
    """Train the hull-distance net on analytically labeled clouds.

    Returns (Checkpoint, MetricsLog, holdout Pearson r). A fixed labeled
    pool is generated once and batches are drawn from it; the holdout
    split never enters training.
    """
    hc = config.hull
    rng = np.random.default_rng(config.seed)
    models = build_models(config, rng)
    hull = models.hullnet
    pairs = make_hull_dataset(hc.pool + hc.holdout, hc.points, config.seed + 1,
                              source=hc.source, cloud_dir=hc.cloud_dir)
    train_pairs = pairs[:hc.pool]
    hold_pairs = pairs[hc.pool:]
    opt = Adam(hull.parameters(), lr=hc.lr, beta1=hc.beta1, beta2=hc.beta2)
    log = MetricsLog(log_path)
    for step in range(1, hc.batches + 1):
        idx = rng.integers(len(train_pairs), size=hc.batch_size)
        stacked = np.concatenate([train_pairs[i][0].points for i in idx], axis=0)
        labels = np.array([[train_pairs[i][1]] for i in idx])
        preds = hull.forward(Tensor(stacked), block=hc.points)
        diff = ad.sub(preds, Tensor(labels))
        loss = ad.mean_all(ad.mul(diff, diff))
        value = _scalar_value(loss)
        _check_finite(step, {"hull_l2": value})
        hull.zero_grad()
        loss.backward()
        opt.step()
        hull.zero_grad()
        log.add(step, "hull_l2", value)
    pearson = hullnet_holdout_pearson(hull, hold_pairs, hc.points)
    log.add(hc.batches, "holdout_pearson", pearson)
    log.close()
    ckpt = make_checkpoint(config, models, rng, {"hull": opt}, hc.batches)
    if checkpoint_path:
        save_checkpoint(ckpt, checkpoint_path)
    return ckpt, log, pearson


def hullnet_holdout_pearson(hull: HullNet, pairs, points: int) -> float:
    stacked = np.concatenate([c.points for c, _ in pairs], axis=0)
    preds = hull.forward(Tensor(stacked), block=points).data.ravel()
    labels = np.array([lab for _, lab in pairs])
    if preds.std() == 0 or labels.std() == 0:
        return 0.0
    return float(np.corrcoef(preds, labels)[0, 1])
