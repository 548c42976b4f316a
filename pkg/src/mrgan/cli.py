"""Command-line entry point for every workflow: data prep, hull-net
pretraining, GAN training, generation, part mixing, interpolation, root
dropping, evaluation, disentanglement reports, heatmaps, and serving.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import metrics as M
from . import trainer as T
from .hullgeom import DegenerateCloudError
from .models import LatentBundle
from .pointcloud import (CloudFormatError, Dataset, PointCloud, ingest_dataset,
                         load_cloud, save_cloud)

__all__ = ["main"]

log = logging.getLogger("mrgan")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with code 2
        raise UsageError(message)


def _setup_logging() -> None:
    level = os.environ.get("MRGAN_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO,
              "debug": logging.DEBUG}
    if level not in levels:
        raise UsageError(f"MRGAN_LOG must be one of {sorted(levels)}, got {level!r}")
    logging.basicConfig(level=levels[level],
                        format="%(levelname)s %(name)s: %(message)s")


# ---------------------------------------------------------------------------
# shared helpers


def _parse_int_list(raw: str, flag: str) -> list[int]:
    try:
        return [int(v) for v in raw.split(",") if v != ""]
    except ValueError as exc:
        raise UsageError(f"{flag} expects comma-separated integers: {exc}")


def _load_config(args) -> T.TrainConfig:
    if getattr(args, "config", None):
        with open(args.config) as fh:
            config = T.config_from_text(fh.read())
    else:
        config = T.TrainConfig(desk_scale=getattr(args, "desk_scale", False))
    for flag, field in (("seed", "seed"), ("roots", "roots"),
                        ("steps", "g_steps")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(config, field, value)
    if getattr(args, "branching", None):
        config.branching = tuple(_parse_int_list(args.branching, "--branching"))
    for term in getattr(args, "disable_loss", None) or []:
        setattr(config.weights, f"enable_{term}", False)
    return config


def _load_models(path):
    ckpt = T.load_checkpoint(path)
    return ckpt, T.restore_models(ckpt)


def _seed_bundle(roots: int, z_dim: int, seed: int) -> LatentBundle:
    """One latent broadcast to every root: a 'pure' (unmixed) shape."""
    z = np.random.default_rng(seed).normal(size=z_dim)
    return LatentBundle(np.tile(z, (roots, 1)), "uniform")


def _root_bundle(roots: int, z_dim: int, seed: int) -> LatentBundle:
    """Independent per-root latents from one seed."""
    z = np.random.default_rng(seed).normal(size=(roots, z_dim))
    return LatentBundle(z, "independent")


def _save_partitioned(cloud, path) -> None:
    save_cloud(PointCloud(cloud.points, cloud.root_of_point), path)


def _load_cloud_dir(directory) -> list[np.ndarray]:
    names = sorted(f for f in os.listdir(directory)
                   if f.endswith((".xyz", ".txt")))
    if not names:
        raise CloudFormatError(f"no cloud files in {directory}")
    return [load_cloud(os.path.join(directory, n)).points for n in names]


def _outdir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args) -> int:
    ds = ingest_dataset(args.src, args.n, args.seed)
    out = _outdir(args.out)
    for i, cloud in enumerate(ds.clouds):
        save_cloud(cloud, os.path.join(out, f"{args.prefix}_{i:05d}.xyz"))
    print(f"ingested {len(ds.clouds)} clouds of {args.n} points into {out}")
    return EXIT_OK


def cmd_hullnet_train(args) -> int:
    config = _load_config(args)
    if args.steps is not None:
        config.hull.batches = args.steps
    _, _, pearson = T.train_hullnet(config, log_path=args.log,
                                    checkpoint_path=args.out)
    print(f"hullnet trained for {config.hull.batches} batches; "
          f"holdout pearson {pearson:.4f}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _load_config(args)
    if args.dataset:
        config.dataset = args.dataset
    resume = hull = None
    if args.ckpt:
        resume = T.load_checkpoint(args.ckpt)
        config = resume.config
        if args.steps is None:
            raise UsageError("--steps is required when resuming from --ckpt")
    if args.hull_ckpt:
        hull = T.load_checkpoint(args.hull_ckpt)
    if not config.dataset:
        raise UsageError("a training dataset directory is required "
                         "(--dataset or config file)")
    clouds = [PointCloud(p) for p in _load_cloud_dir(config.dataset)]
    ds = Dataset(clouds, os.path.basename(os.path.normpath(config.dataset)),
                 clouds[0].n)
    ckpt, _ = T.train_gan(config, ds, log_path=args.log,
                          checkpoint_path=args.out, resume=resume,
                          hull_ckpt=hull,
                          extra_steps=args.steps if resume else None)
    print(f"trained to step {ckpt.step}; checkpoint at {args.out}")
    return EXIT_OK


def cmd_generate(args) -> int:
    _, models = _load_models(args.ckpt)
    gen = models.generator
    out = _outdir(args.out)
    for i in range(args.n):
        bundle = _seed_bundle(gen.config.roots, gen.config.z_dim,
                              args.seed + i)
        cloud = gen.generate(bundle)
        _save_partitioned(cloud, os.path.join(out, f"{args.prefix}_{i:05d}.xyz"))
    print(f"wrote {args.n} shapes to {out}")
    return EXIT_OK


def cmd_mix(args) -> int:
    _, models = _load_models(args.ckpt)
    gen = models.generator
    r, zd = gen.config.roots, gen.config.z_dim
    out = _outdir(args.out)
    if args.grid:
        k = args.grid
        parents_a = [_seed_bundle(r, zd, args.seed_a + j) for j in range(k)]
        parents_b = [_seed_bundle(r, zd, args.seed_b + i) for i in range(k)]
        half = (r + 1) // 2
        for j, pa in enumerate(parents_a):
            _save_partitioned(gen.generate(pa),
                              os.path.join(out, f"{args.prefix}_r0_c{j + 1}.xyz"))
        for i, pb in enumerate(parents_b):
            _save_partitioned(gen.generate(pb),
                              os.path.join(out, f"{args.prefix}_r{i + 1}_c0.xyz"))
        for i, pb in enumerate(parents_b):
            for j, pa in enumerate(parents_a):
                z = pb.z.copy()
                z[:half] = pa.z[:half]
                cloud = gen.generate(LatentBundle(z, "half"))
                _save_partitioned(cloud, os.path.join(
                    out, f"{args.prefix}_r{i + 1}_c{j + 1}.xyz"))
        print(f"wrote {(k + 1) * (k + 1) - 1} grid cells to {out}")
        return EXIT_OK
    roots_from_b = _parse_int_list(args.roots_from_b, "--roots-from-b")
    if any(i < 0 or i >= r for i in roots_from_b):
        raise UsageError(f"--roots-from-b indices must be in [0,{r})")
    za = _seed_bundle(r, zd, args.seed_a).z.copy()
    zb = _seed_bundle(r, zd, args.seed_b).z
    za[roots_from_b] = zb[roots_from_b]
    cloud = gen.generate(LatentBundle(za, "half"))
    path = os.path.join(out, f"{args.prefix}_00000.xyz")
    _save_partitioned(cloud, path)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_interpolate(args) -> int:
    _, models = _load_models(args.ckpt)
    gen = models.generator
    r, zd = gen.config.roots, gen.config.z_dim
    if args.root is not None and not 0 <= args.root < r:
        raise UsageError(f"--root must be in [0,{r})")
    za = _seed_bundle(r, zd, args.seed_a).z
    zb = _seed_bundle(r, zd, args.seed_b).z
    out = _outdir(args.out)
    k = args.steps
    for i in range(k):
        t = i / (k - 1) if k > 1 else 0.0
        z = za.copy()
        if args.root is None:
            z = (1.0 - t) * za + t * zb
        else:
            z[args.root] = (1.0 - t) * za[args.root] + t * zb[args.root]
        cloud = gen.generate(LatentBundle(z, "half"))
        _save_partitioned(cloud, os.path.join(out, f"{args.prefix}_{i:05d}.xyz"))
    print(f"wrote {k} interpolation steps to {out}")
    return EXIT_OK


def cmd_rootdrop(args) -> int:
    _, models = _load_models(args.ckpt)
    gen = models.generator
    r = gen.config.roots
    if not 0 <= args.root < r:
        raise UsageError(f"--root must be in [0,{r})")
    cloud = gen.generate(_seed_bundle(r, gen.config.z_dim, args.seed))
    keep = cloud.root_of_point != args.root
    out = _outdir(args.out)
    path = os.path.join(out, f"{args.prefix}_00000.xyz")
    save_cloud(PointCloud(cloud.points[keep], cloud.root_of_point[keep]), path)
    print(f"wrote {path} (root {args.root} dropped)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    gen_set = _load_cloud_dir(args.gen_dir)
    ref_set = _load_cloud_dir(args.ref_dir)
    report = M.evaluate(gen_set, ref_set, grid_res=args.grid_res)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_csv())
    print(report.to_text(), end="")
    return EXIT_OK


def cmd_disentangle(args) -> int:
    _, models = _load_models(args.ckpt)
    gen = models.generator

    def generate(z):
        return gen.generate(LatentBundle(z, "independent")).points

    report = M.disentanglement(
        generate, gen.config.roots, gen.config.points_per_root,
        n_pairs=args.pairs, n_trials=args.trials, seed=args.seed,
        z_dim=gen.config.z_dim)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_text())
    print(report.to_text(), end="")
    return EXIT_OK


def cmd_heatmap(args) -> int:
    _, models = _load_models(args.ckpt)
    gen = models.generator
    r, zd = gen.config.roots, gen.config.z_dim
    if not 0 <= args.root < r:
        raise UsageError(f"--root must be in [0,{r})")
    za = _seed_bundle(r, zd, args.seed_a).z
    zb = _seed_bundle(r, zd, args.seed_b).z
    before = gen.generate(LatentBundle(za, "uniform")).points
    z = za.copy()
    z[args.root] = zb[args.root]
    after = gen.generate(LatentBundle(z, "half")).points
    d = M.export_heatmap(before, after, args.out)
    print(f"wrote {args.out} (displacement range "
          f"[{d.min():.6g}, {d.max():.6g}])")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve
    host, _, port = args.addr.rpartition(":")
    if not host or not port.isdigit():
        raise UsageError(f"--addr must be host:port, got {args.addr!r}")
    serve(args.ckpt, host, int(port))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> _Parser:
    p = _Parser(prog="mrgan", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    def add(name, fn, help):
        sp = sub.add_parser(name, help=help)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("ingest", cmd_ingest, "normalize and resample a cloud directory")
    sp.add_argument("src", help="directory of raw cloud files")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n", type=int, default=1280, help="points per cloud")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--prefix", default="cloud")

    for name, fn, help in (
            ("hullnet-train", cmd_hullnet_train,
             "pretrain the hull-distance predictor"),
            ("train", cmd_train, "train the GAN")):
        sp = add(name, fn, help)
        sp.add_argument("--config", help="config text file")
        sp.add_argument("--out", required=True, help="checkpoint output path")
        sp.add_argument("--log", help="metrics CSV path")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--steps", type=int,
                        help="batches (hullnet) or generator steps (train)")
        sp.add_argument("--roots", type=int)
        sp.add_argument("--branching", help="comma-separated, e.g. 2,2,4")
        sp.add_argument("--desk-scale", action="store_true")
        if name == "train":
            sp.add_argument("--dataset", help="training cloud directory")
            sp.add_argument("--ckpt", help="resume from this checkpoint")
            sp.add_argument("--hull-ckpt",
                            help="pretrained hull-distance checkpoint")
            sp.add_argument("--disable-loss", action="append",
                            choices=("h", "rd", "t", "rec"),
                            help="ablate a generator loss term (repeatable)")

    sp = add("generate", cmd_generate, "sample shapes from a checkpoint")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--prefix", default="shape")

    sp = add("mix", cmd_mix, "mix roots between two seeded parents")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed-a", type=int, required=True)
    sp.add_argument("--seed-b", type=int, required=True)
    sp.add_argument("--roots-from-b", default="",
                    help="comma-separated root indices taken from parent B")
    sp.add_argument("--grid", type=int,
                    help="emit a (k+1)x(k+1) mixing grid instead")
    sp.add_argument("--prefix", default="mix")

    sp = add("interpolate", cmd_interpolate,
             "interpolate one root (or all) between two parents")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed-a", type=int, required=True)
    sp.add_argument("--seed-b", type=int, required=True)
    sp.add_argument("--root", type=int, help="root index; omit for all roots")
    sp.add_argument("--steps", type=int, default=5)
    sp.add_argument("--prefix", default="interp")

    sp = add("rootdrop", cmd_rootdrop, "emit a shape minus one root block")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--root", type=int, required=True)
    sp.add_argument("--prefix", default="drop")

    sp = add("evaluate", cmd_evaluate,
             "metric report of a generated dir vs a reference dir")
    sp.add_argument("gen_dir")
    sp.add_argument("--ref-dir", required=True)
    sp.add_argument("--grid-res", type=int, default=28)
    sp.add_argument("--out", help="CSV report path")

    sp = add("disentangle", cmd_disentangle,
             "part-modification disentanglement report")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--pairs", type=int, default=2500)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--out", help="text report path")

    sp = add("heatmap", cmd_heatmap,
             "per-point displacement export for a one-root edit")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed-a", type=int, required=True)
    sp.add_argument("--seed-b", type=int, required=True)
    sp.add_argument("--root", type=int, required=True)

    sp = add("serve", cmd_serve, "run the HTTP studio service")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--addr", default="127.0.0.1:8087")

    return p


def main(argv=None) -> int:
    try:
        _setup_logging()
        parser = _build_parser()
        args = parser.parse_args(argv)
        if not getattr(args, "fn", None):
            parser.print_help()
            return EXIT_USAGE
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (T.NumericFailure, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CloudFormatError, T.CheckpointError, DegenerateCloudError,
            FileNotFoundError, NotADirectoryError, IsADirectoryError,
            ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
