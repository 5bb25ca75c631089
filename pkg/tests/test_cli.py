import numpy as np
import pytest
import torch
from click.testing import CliRunner
from PIL import Image

from aotinpaint.cli import (
    EXIT_BAD_CHECKPOINT,
    EXIT_MISSING_FILE,
    EXIT_SHAPE_MISMATCH,
    EXIT_USAGE,
    main,
)
from aotinpaint.masks import generate_free_form_mask, RatioBucket, save_mask

from conftest import synthetic_images


@pytest.fixture()
def runner():
    return CliRunner()


def write_image_png(path, size=32, seed=0):
    img = synthetic_images(1, size, seed=seed)
    arr = (((img[0].numpy() + 1) / 2) * 255).round().astype(np.uint8).transpose(1, 2, 0)
    Image.fromarray(arr).save(path)
    return arr


class TestGenmask:
    def test_writes_png(self, runner, tmp_path):
        out = tmp_path / "m.png"
        result = runner.invoke(
            main, ["--seed", "3", "genmask", "--height", "64", "--width", "64",
                   "--bucket", "20-30", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        arr = np.asarray(Image.open(out))
        assert arr.shape == (64, 64)
        ratio = (arr == 255).mean()
        assert 0.2 <= ratio <= 0.3

    def test_seed_reproducible(self, runner, tmp_path):
        args = ["--seed", "5", "genmask", "--height", "64", "--width", "64",
                "--bucket", "30-40"]
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        assert runner.invoke(main, args + ["--out", str(a)]).exit_code == 0
        assert runner.invoke(main, args + ["--out", str(b)]).exit_code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_multiple_masks(self, runner, tmp_path):
        out = tmp_path / "masks"
        result = runner.invoke(
            main, ["genmask", "--height", "64", "--width", "64", "--count", "3",
                   "--out", str(out)],
        )
        assert result.exit_code == 0
        assert len(list(out.glob("*.png"))) == 3


class TestInfer:
    def test_round_trip_and_known_pixels(self, runner, tmp_path, toy_checkpoint):
        img_path = tmp_path / "in.png"
        input_arr = write_image_png(img_path, size=32, seed=1)
        mask = generate_free_form_mask(32, 32, RatioBucket(0.3, 0.5), seed=2)
        mask_path = tmp_path / "m.png"
        save_mask(mask, mask_path)
        out_path = tmp_path / "out.png"
        result = runner.invoke(
            main, ["infer", "--checkpoint", str(toy_checkpoint), "--image", str(img_path),
                   "--mask", str(mask_path), "--out", str(out_path)],
        )
        assert result.exit_code == 0, result.output
        out_arr = np.asarray(Image.open(out_path))
        known = mask[0, 0].numpy() == 0
        assert np.array_equal(out_arr[known], input_arr[known])

    def test_zero_mask_gives_identical_bytes(self, runner, tmp_path, toy_checkpoint):
        img_path = tmp_path / "in.png"
        input_arr = write_image_png(img_path, size=32, seed=3)
        mask_path = tmp_path / "zero.png"
        save_mask(torch.zeros(1, 1, 32, 32), mask_path)
        out_path = tmp_path / "out.png"
        result = runner.invoke(
            main, ["infer", "--checkpoint", str(toy_checkpoint), "--image", str(img_path),
                   "--mask", str(mask_path), "--out", str(out_path)],
        )
        assert result.exit_code == 0, result.output
        assert np.array_equal(np.asarray(Image.open(out_path)), input_arr)

    def test_missing_checkpoint_exit_code(self, runner, tmp_path):
        img_path = tmp_path / "in.png"
        write_image_png(img_path)
        mask_path = tmp_path / "m.png"
        save_mask(torch.zeros(1, 1, 32, 32), mask_path)
        result = runner.invoke(
            main, ["infer", "--checkpoint", str(tmp_path / "none.pt"), "--image", str(img_path),
                   "--mask", str(mask_path), "--out", str(tmp_path / "o.png")],
        )
        assert result.exit_code == EXIT_MISSING_FILE
        assert "error:" in result.output

    def test_shape_mismatch_exit_code(self, runner, tmp_path, toy_checkpoint):
        img_path = tmp_path / "in.png"
        write_image_png(img_path, size=32)
        mask_path = tmp_path / "m.png"
        save_mask(torch.zeros(1, 1, 64, 64), mask_path)
        result = runner.invoke(
            main, ["infer", "--checkpoint", str(toy_checkpoint), "--image", str(img_path),
                   "--mask", str(mask_path), "--out", str(tmp_path / "o.png")],
        )
        assert result.exit_code == EXIT_SHAPE_MISMATCH

    def test_corrupt_checkpoint_exit_code(self, runner, tmp_path):
        bad = tmp_path / "bad.pt"
        bad.write_bytes(b"garbage")
        img_path = tmp_path / "in.png"
        write_image_png(img_path)
        mask_path = tmp_path / "m.png"
        save_mask(torch.zeros(1, 1, 32, 32), mask_path)
        result = runner.invoke(
            main, ["infer", "--checkpoint", str(bad), "--image", str(img_path),
                   "--mask", str(mask_path), "--out", str(tmp_path / "o.png")],
        )
        assert result.exit_code == EXIT_BAD_CHECKPOINT

    def test_non_multiple_of_four_size(self, runner, tmp_path, toy_checkpoint):
        img_path = tmp_path / "odd.png"
        arr = np.full((30, 34, 3), 128, dtype=np.uint8)
        Image.fromarray(arr).save(img_path)
        mask_path = tmp_path / "m.png"
        mask_arr = np.zeros((30, 34), dtype=np.uint8)
        mask_arr[8:20, 8:20] = 255
        Image.fromarray(mask_arr).save(mask_path)
        out_path = tmp_path / "o.png"
        result = runner.invoke(
            main, ["infer", "--checkpoint", str(toy_checkpoint), "--image", str(img_path),
                   "--mask", str(mask_path), "--out", str(out_path)],
        )
        assert result.exit_code == 0, result.output
        out_arr = np.asarray(Image.open(out_path))
        assert out_arr.shape == (30, 34, 3)
        assert np.array_equal(out_arr[mask_arr == 0], arr[mask_arr == 0])


class TestInferPerformance:
    def test_512px_under_regression_bound(self, runner, tmp_path, desk_checkpoint):
        import time

        img_path = tmp_path / "big.png"
        write_image_png(img_path, size=512, seed=2)
        mask = generate_free_form_mask(512, 512, RatioBucket(0.4, 0.5), seed=1)
        mask_path = tmp_path / "big-mask.png"
        save_mask(mask, mask_path)
        out_path = tmp_path / "big-out.png"
        t0 = time.perf_counter()
        result = runner.invoke(
            main, ["infer", "--checkpoint", str(desk_checkpoint), "--image", str(img_path),
                   "--mask", str(mask_path), "--out", str(out_path)],
        )
        elapsed = time.perf_counter() - t0
        assert result.exit_code == 0, result.output
        assert elapsed < 10.0, f"512px inference took {elapsed:.1f}s (bound 10s)"


class TestEval:
    def test_writes_reports_deterministically(self, runner, tmp_path, toy_checkpoint):
        from test_data import write_corpus

        corpus = write_corpus(tmp_path / "corpus", n=4, size=32)
        args = ["--seed", "4", "eval", "--checkpoint", str(toy_checkpoint),
                "--corpus", str(corpus), "--buckets", "10-20", "--out"]
        r1 = runner.invoke(main, args + [str(tmp_path / "r1")])
        assert r1.exit_code == 0, r1.output
        r2 = runner.invoke(main, args + [str(tmp_path / "r2")])
        assert r2.exit_code == 0
        csv1 = (tmp_path / "r1" / "metrics.csv").read_bytes()
        csv2 = (tmp_path / "r2" / "metrics.csv").read_bytes()
        assert csv1 == csv2
        assert (tmp_path / "r1" / "metrics.txt").exists()

    def test_zero_hole_bucket_gives_zero_l1_row(self, runner, tmp_path, toy_checkpoint):
        from test_data import write_corpus

        corpus = write_corpus(tmp_path / "corpus", n=3, size=32)
        result = runner.invoke(
            main, ["eval", "--checkpoint", str(toy_checkpoint), "--corpus", str(corpus),
                   "--buckets", "0-0.0000001", "--out", str(tmp_path / "rep")],
        )
        assert result.exit_code == 0, result.output
        row = (tmp_path / "rep" / "metrics.csv").read_text().splitlines()[1].split(",")
        assert float(row[1]) == 0.0  # L1
        assert float(row[2]) == 100.0  # PSNR cap
        assert float(row[3]) == 1.0  # SSIM

    def test_paper_buckets_row_order(self, runner, tmp_path, toy_checkpoint):
        from test_data import write_corpus

        corpus = write_corpus(tmp_path / "corpus", n=2, size=32)
        result = runner.invoke(
            main, ["eval", "--checkpoint", str(toy_checkpoint), "--corpus", str(corpus),
                   "--buckets", "paper", "--out", str(tmp_path / "rep")],
        )
        assert result.exit_code == 0, result.output
        lines = (tmp_path / "rep" / "metrics.csv").read_text().splitlines()
        labels = [line.split(",")[0] for line in lines[1:]]
        assert labels == ["1-10%", "10-20%", "20-30%", "30-40%", "40-50%", "50-60%"]


class TestConfigHandling:
    def test_unknown_config_key_rejected(self, runner, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("train:\n  bogus_key: 1\n")
        result = runner.invoke(
            main, ["--config", str(cfg), "genmask", "--out", str(tmp_path / "m.png")],
        )
        # genmask does not read the config; use eval path through train instead
        result = runner.invoke(
            main, ["--config", str(cfg), "train", "--data", str(tmp_path), "--out", str(tmp_path)],
        )
        assert result.exit_code == EXIT_USAGE
        assert "bogus_key" in result.output

    def test_unknown_override_rejected(self, runner, tmp_path):
        result = runner.invoke(
            main, ["--override", "train.nope=3", "train", "--data", str(tmp_path),
                   "--out", str(tmp_path)],
        )
        assert result.exit_code == EXIT_USAGE

    def test_train_desk_preset_with_overrides(self, runner, tmp_path):
        from test_data import write_corpus

        corpus = write_corpus(tmp_path / "corpus", n=3, size=48)
        out = tmp_path / "run"
        result = runner.invoke(
            main,
            ["--override", "train.steps=1", "--override", "train.batch_size=2",
             "--override", "train.image_size=32",
             "--override", "train.generator.base_width=16",
             "--override", "train.generator.num_blocks=1",
             "--override", "train.generator.rates=[1,2]",
             "--override", "train.masks.buckets=['20-40']",
             "train", "--data", str(corpus), "--out", str(out), "--preset", "desk"],
        )
        assert result.exit_code == 0, result.output
        assert (out / "checkpoint-final.pt").exists()
        assert (out / "loss_history.csv").exists()


class TestExportWeights:
    def test_generator_export(self, runner, tmp_path, toy_checkpoint):
        out = tmp_path / "gen.npz"
        result = runner.invoke(
            main, ["export-weights", "--checkpoint", str(toy_checkpoint), "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        archive = np.load(out)
        keys = list(archive.keys())
        assert "__meta_json__" in keys
        tensor_keys = [k for k in keys if k != "__meta_json__"]
        assert all(archive[k].dtype == np.float32 for k in tensor_keys)
        assert any(k.startswith("encoder.") for k in tensor_keys)
        import json

        meta = json.loads(archive["__meta_json__"].tobytes().decode())
        assert meta["config"]["generator"]["base_width"] == 16

    def test_extractor_export_round_trip(self, runner, tmp_path):
        out = tmp_path / "fx.npz"
        result = runner.invoke(
            main, ["export-weights", "--what", "extractor", "--extractor-seed", "2",
                   "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        from aotinpaint.features import FeatureExtractor

        reference = FeatureExtractor(source="fixed_random", seed=2)
        loaded = FeatureExtractor(source="pretrained_file", weights_path=out)
        assert loaded.fingerprint() == reference.fingerprint()
