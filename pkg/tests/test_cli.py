"""End-to-end CLI workflows: exit codes, seeded determinism, and the
generation/mixing/evaluation subcommands against a small checkpoint."""

import numpy as np
import pytest

from mrgan.cli import main
from mrgan.pointcloud import load_cloud


def run(*argv) -> int:
    return main(list(argv))


class TestExitCodes:
    def test_no_command_is_usage_error(self, capsys):
        assert run() == 1

    def test_unknown_command(self):
        assert run("transmogrify") == 1

    def test_unknown_flag(self):
        assert run("generate", "--ckpt", "x", "--out", "y", "--warp", "9") == 1

    def test_missing_checkpoint_is_data_error(self, tmp_path):
        assert run("generate", "--ckpt", str(tmp_path / "no.ckpt"),
                   "--out", str(tmp_path)) == 2

    def test_corrupt_checkpoint_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"not a checkpoint at all")
        assert run("generate", "--ckpt", str(bad), "--out", str(tmp_path)) == 2

    def test_help_lists_subcommands(self, capsys):
        with pytest.raises(SystemExit) as e:
            run("--help")
        assert e.value.code == 0
        out = capsys.readouterr().out
        for cmd in ("ingest", "hullnet-train", "train", "generate", "mix",
                    "interpolate", "rootdrop", "evaluate", "disentangle",
                    "heatmap", "serve"):
            assert cmd in out

    def test_bad_log_level_env(self, monkeypatch):
        monkeypatch.setenv("MRGAN_LOG", "verbose")
        assert run("generate", "--ckpt", "x", "--out", "y") == 1


class TestGenerate:
    def test_deterministic_files(self, smoke_checkpoint, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run("generate", "--ckpt", str(smoke_checkpoint),
                   "--out", str(a), "--n", "2", "--seed", "7") == 0
        assert run("generate", "--ckpt", str(smoke_checkpoint),
                   "--out", str(b), "--n", "2", "--seed", "7") == 0
        for i in range(2):
            name = f"shape_{i:05d}.xyz"
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_labeled_output(self, smoke_checkpoint, tmp_path):
        out = tmp_path / "g"
        assert run("generate", "--ckpt", str(smoke_checkpoint),
                   "--out", str(out), "--seed", "1") == 0
        cloud = load_cloud(out / "shape_00000.xyz")
        assert cloud.labels is not None
        np.testing.assert_array_equal(np.unique(cloud.labels), [0, 1])


class TestMix:
    def test_block_causality_with_identity_checkpoint(self, identity_checkpoint,
                                                      tmp_path):
        out = tmp_path / "m"
        assert run("mix", "--ckpt", str(identity_checkpoint), "--out", str(out),
                   "--seed-a", "1", "--seed-b", "2", "--roots-from-b", "1") == 0
        ga = tmp_path / "ga"
        gb = tmp_path / "gb"
        assert run("generate", "--ckpt", str(identity_checkpoint),
                   "--out", str(ga), "--seed", "1") == 0
        assert run("generate", "--ckpt", str(identity_checkpoint),
                   "--out", str(gb), "--seed", "2") == 0
        mixed = load_cloud(out / "mix_00000.xyz").points
        a = load_cloud(ga / "shape_00000.xyz").points
        b = load_cloud(gb / "shape_00000.xyz").points
        ppr = len(a) // 2
        np.testing.assert_array_equal(mixed[:ppr], a[:ppr])
        np.testing.assert_array_equal(mixed[ppr:], b[ppr:])

    def test_grid_layout(self, smoke_checkpoint, tmp_path):
        out = tmp_path / "grid"
        assert run("mix", "--ckpt", str(smoke_checkpoint), "--out", str(out),
                   "--seed-a", "1", "--seed-b", "2", "--grid", "2") == 0
        names = sorted(p.name for p in out.iterdir())
        assert len(names) == 8  # 3x3 minus the empty corner

    def test_bad_root_index(self, smoke_checkpoint, tmp_path):
        assert run("mix", "--ckpt", str(smoke_checkpoint),
                   "--out", str(tmp_path), "--seed-a", "1", "--seed-b", "2",
                   "--roots-from-b", "7") == 1


class TestOtherWorkflows:
    def test_interpolate_endpoints(self, identity_checkpoint, tmp_path):
        out = tmp_path / "i"
        assert run("interpolate", "--ckpt", str(identity_checkpoint),
                   "--out", str(out), "--seed-a", "1", "--seed-b", "2",
                   "--root", "0", "--steps", "3") == 0
        ga = tmp_path / "ga"
        run("generate", "--ckpt", str(identity_checkpoint), "--out", str(ga),
            "--seed", "1")
        first = load_cloud(out / "interp_00000.xyz").points
        pure_a = load_cloud(ga / "shape_00000.xyz").points
        np.testing.assert_array_equal(first, pure_a)  # t = 0 reproduces A

    def test_rootdrop_removes_one_block(self, smoke_checkpoint, tmp_path):
        out = tmp_path / "d"
        assert run("rootdrop", "--ckpt", str(smoke_checkpoint),
                   "--out", str(out), "--seed", "3", "--root", "0") == 0
        cloud = load_cloud(out / "drop_00000.xyz")
        assert cloud.n == 16  # one of two 16-point roots removed
        np.testing.assert_array_equal(np.unique(cloud.labels), [1])

    def test_evaluate_identity(self, smoke_checkpoint, tmp_path, capsys):
        gen = tmp_path / "gen"
        run("generate", "--ckpt", str(smoke_checkpoint), "--out", str(gen),
            "--n", "2", "--seed", "5")
        report = tmp_path / "rep.csv"
        assert run("evaluate", str(gen), "--ref-dir", str(gen),
                   "--grid-res", "16", "--out", str(report)) == 0
        row = report.read_text().splitlines()[1].split(",")
        assert float(row[0]) == 0.0  # jsd
        assert float(row[3]) == 100.0  # cov_cd

    def test_disentangle_runs(self, smoke_checkpoint, tmp_path, capsys):
        assert run("disentangle", "--ckpt", str(smoke_checkpoint),
                   "--pairs", "5", "--trials", "5",
                   "--out", str(tmp_path / "d.txt")) == 0
        assert "ratio" in (tmp_path / "d.txt").read_text()

    def test_heatmap_export(self, smoke_checkpoint, tmp_path):
        out = tmp_path / "hm.xyz"
        assert run("heatmap", "--ckpt", str(smoke_checkpoint),
                   "--out", str(out), "--seed-a", "1", "--seed-b", "2",
                   "--root", "1") == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# min")

    def test_ingest(self, tmp_path):
        from mrgan.pointcloud import PointCloud, save_cloud

        src = tmp_path / "src"
        src.mkdir()
        rng = np.random.default_rng(1)
        for i in range(3):
            save_cloud(PointCloud(rng.normal(size=(40, 3))), src / f"{i}.xyz")
        out = tmp_path / "ing"
        assert run("ingest", str(src), "--out", str(out), "--n", "16",
                   "--seed", "0") == 0
        files = sorted(out.iterdir())
        assert len(files) == 3
        assert load_cloud(files[0]).n == 16


class TestTrainCli:
    def test_train_and_resume(self, tmp_path):
        from mrgan.pointcloud import save_cloud
        from conftest import smoke_config, two_sphere_dataset

        cfg = smoke_config()
        data = tmp_path / "data"
        data.mkdir()
        for i, c in enumerate(two_sphere_dataset(cfg, count=4).clouds):
            save_cloud(c, data / f"c_{i:03d}.xyz")
        ckpt = tmp_path / "t.ckpt"
        assert run("train", "--dataset", str(data), "--out", str(ckpt),
                   "--roots", "2", "--branching", "2,2,4", "--desk-scale",
                   "--seed", "3", "--steps", "1",
                   "--disable-loss", "rd") == 0
        ckpt2 = tmp_path / "t2.ckpt"
        assert run("train", "--ckpt", str(ckpt), "--dataset", str(data),
                   "--out", str(ckpt2), "--steps", "1") == 0
        assert ckpt2.exists()

    def test_resume_requires_steps(self, tmp_path, smoke_checkpoint):
        assert run("train", "--ckpt", str(smoke_checkpoint),
                   "--out", str(tmp_path / "x.ckpt")) == 1

    def test_hullnet_train_tiny(self, tmp_path):
        import mrgan.trainer as T

        out = tmp_path / "h.ckpt"
        cfg_path = tmp_path / "cfg.txt"
        cfg = T.TrainConfig(desk_scale=True, seed=1)
        cfg.hull.pool = 30
        cfg.hull.holdout = 8
        cfg.hull.points = 32
        cfg.hull.batches = 2
        cfg_path.write_text(T.config_to_text(cfg))
        assert run("hullnet-train", "--config", str(cfg_path),
                   "--out", str(out)) == 0
        assert out.exists()
