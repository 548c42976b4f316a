import numpy as np
import pytest

from mrgan import trainer as T
from mrgan.hullgeom import Sphere, SyntheticSpec, sample_synthetic
from mrgan.pointcloud import Dataset


def two_sphere_spec(n_points: int) -> SyntheticSpec:
    return SyntheticSpec(
        [Sphere(np.array([-0.5, 0.0, 0.0]), 0.4),
         Sphere(np.array([0.5, 0.0, 0.0]), 0.4)], n_points)


def smoke_config(**overrides) -> T.TrainConfig:
    base = dict(roots=2, branching=(2, 2, 4), desk_scale=True, seed=3,
                g_steps=2, batch_size=2, checkpoint_every=10_000)
    base.update(overrides)
    return T.TrainConfig(**base)


def two_sphere_dataset(config: T.TrainConfig, count: int = 16,
                       seed: int = 0) -> Dataset:
    spec = two_sphere_spec(config.n_points)
    rng = np.random.default_rng(seed)
    clouds = [sample_synthetic(spec, rng=rng) for _ in range(count)]
    return Dataset(clouds, "two-sphere", config.n_points)


@pytest.fixture(scope="session")
def smoke_checkpoint(tmp_path_factory):
    """A briefly trained small checkpoint shared across tests."""
    config = smoke_config()
    ckpt, _ = T.train_gan(config, two_sphere_dataset(config))
    path = tmp_path_factory.mktemp("ckpt") / "smoke.ckpt"
    T.save_checkpoint(ckpt, path)
    return path


@pytest.fixture(scope="session")
def identity_checkpoint(tmp_path_factory):
    """Untrained checkpoint with feature sharing disabled, so each root
    block depends only on its own latent (exact block causality)."""
    config = smoke_config(feature_sharing=False)
    models = T.build_models(config, np.random.default_rng(config.seed))
    ckpt = T.make_checkpoint(config, models, np.random.default_rng(0), {}, 0)
    path = tmp_path_factory.mktemp("ckpt") / "identity.ckpt"
    T.save_checkpoint(ckpt, path)
    return path
