"""
Integration Tests for the command line

Runs every command through main.main() on a small synthetic dataset and
checks the files each one leaves behind.
"""

import csv
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

# Add parent directory to path to import the packages
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from data_pipeline.image_io import from_uint8, list_images, load_image, to_uint8
from data_pipeline.manifest import load_manifest
from evaluation.inference import derain
from main import EXIT_CONFIGURATION, EXIT_FAILURE, EXIT_OK, main
from tools.derain_tool import load_model

MICRO = [
    "--set", "data.patch=16", "--set", "data.batch_size=2",
    "--set", "model.channels=4", "--set", "model.rrn_blocks=1", "--set", "model.drn_blocks=1",
    "--set", "model.se_reduction=2", "--set", "contrastive.encoder_arch=tiny",
]

pytestmark = pytest.mark.integration


@pytest.fixture
def temp_dir():
    """Create a temporary working directory"""
    temp_path = tempfile.mkdtemp()
    yield Path(temp_path)
    import shutil
    shutil.rmtree(temp_path, ignore_errors=True)


@pytest.fixture
def dataset(temp_dir):
    """Four labeled pairs and four unlabeled images of 24x24"""
    out = temp_dir / "data"
    assert main(["synth", "--out", str(out), "--count", "4", "--size", "24", "--seed", "1"]) == EXIT_OK
    return out / "manifest.json"


@pytest.fixture
def trained(dataset, temp_dir):
    """A one-epoch run directory"""
    run = temp_dir / "run"
    code = main(["train", "--labeled", str(dataset), "--out", str(run), "--epochs", "1", *MICRO])
    assert code == EXIT_OK
    return run


class TestSynthCommand:
    """Test `synth`"""

    def test_layout(self, dataset):
        """Test the labeled/unlabeled directories and manifest"""
        root = dataset.parent
        assert len(list_images(root / "labeled" / "rainy")) == 4
        assert len(list_images(root / "labeled" / "clean")) == 4
        assert len(list_images(root / "unlabeled")) == 4
        assert load_image(root / "labeled" / "rainy" / "0000.png").shape == (24, 24, 3)

    def test_deterministic(self, temp_dir):
        """Test equal seeds write identical files"""
        for name in ("a", "b"):
            assert main(["synth", "--out", str(temp_dir / name), "--count", "2", "--size", "20"]) == EXIT_OK
        for path in sorted((temp_dir / "a").rglob("*.png")):
            twin = temp_dir / "b" / path.relative_to(temp_dir / "a")
            assert path.read_bytes() == twin.read_bytes()

    def test_ok_line(self, temp_dir, capsys):
        """Test the success summary"""
        main(["synth", "--out", str(temp_dir / "s"), "--count", "1", "--size", "16"])
        assert capsys.readouterr().out.strip().splitlines()[-1].startswith("ok manifest=")

    def test_ingest_existing_folders(self, dataset, temp_dir):
        """Test --from-* flags index user images into a manifest"""
        root = dataset.parent
        out = temp_dir / "indexed"
        assert main(["synth", "--out", str(out), "--from-rainy", str(root / "labeled" / "rainy"),
                     "--from-clean", str(root / "labeled" / "clean"),
                     "--from-unlabeled", str(root / "unlabeled")]) == EXIT_OK
        manifest = load_manifest(out / "manifest.json")
        assert len(manifest.labeled) == 4 and len(manifest.unlabeled) == 4
        assert all(rainy.name == clean.name for rainy, clean in manifest.labeled)

    def test_ingest_needs_both_labeled_folders(self, dataset, temp_dir, capsys):
        """Test --from-rainy without --from-clean is a configuration error"""
        code = main(["synth", "--out", str(temp_dir / "x"),
                     "--from-rainy", str(dataset.parent / "labeled" / "rainy")])
        assert code == EXIT_CONFIGURATION
        assert "error kind=configuration" in capsys.readouterr().err


class TestTrainCommand:
    """Test `train`"""

    def test_run_directory(self, trained):
        """Test config.echo, loss.csv and the epoch checkpoint"""
        assert (trained / "config.echo").exists()
        assert (trained / "ck-epoch-1").exists()
        with open(trained / "loss.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert [r["phase"] for r in rows] == ["labeled", "unlabeled", "labeled", "unlabeled"]

    def test_supervised_only(self, dataset, temp_dir):
        """Test --supervised-only drops unlabeled steps"""
        run = temp_dir / "sup"
        assert main(["train", "--labeled", str(dataset), "--out", str(run), "--epochs", "1",
                     "--supervised-only", *MICRO]) == EXIT_OK
        echo = (run / "config.echo").read_text(encoding="utf-8")
        assert "semi_supervised = false" in echo and "lambda_unsup = 0" in echo
        with open(run / "loss.csv", newline="") as f:
            assert {r["phase"] for r in csv.DictReader(f)} == {"labeled"}

    def test_resume(self, trained, dataset, capsys):
        """Test continuing a run appends to its log"""
        code = main(["train", "--labeled", str(dataset), "--out", str(trained), "--epochs", "2",
                     "--resume", str(trained / "ck-epoch-1"), *MICRO])
        assert code == EXIT_OK
        assert "epochs=2" in capsys.readouterr().out
        with open(trained / "loss.csv", newline="") as f:
            assert len(list(csv.DictReader(f))) == 8

    def test_resume_with_bank_matches_straight_run(self, dataset, temp_dir):
        """Test a resumed run logs the losses of an uninterrupted one"""
        keep_bank = ["--set", "train.save_bank=true", *MICRO]
        split, straight = temp_dir / "split", temp_dir / "straight"
        assert main(["train", "--labeled", str(dataset), "--out", str(split), "--epochs", "1", *keep_bank]) == EXIT_OK
        assert main(["train", "--labeled", str(dataset), "--out", str(split), "--epochs", "2",
                     "--resume", str(split / "ck-epoch-1"), *keep_bank]) == EXIT_OK
        assert main(["train", "--labeled", str(dataset), "--out", str(straight), "--epochs", "2",
                     *keep_bank]) == EXIT_OK
        logs = []
        for run in (split, straight):
            with open(run / "loss.csv", newline="") as f:
                logs.append(list(csv.DictReader(f)))
        assert len(logs[0]) == len(logs[1]) == 8
        for a, b in zip(*logs):
            assert a["step"] == b["step"]
            assert float(a["total"]) == pytest.approx(float(b["total"]), abs=1e-7)

    def test_bad_config_value(self, dataset, temp_dir, capsys):
        """Test configuration errors exit with 2 and one error line"""
        code = main(["train", "--labeled", str(dataset), "--out", str(temp_dir / "x"),
                     "--set", "optim.decay=2", *MICRO])
        assert code == EXIT_CONFIGURATION
        err = capsys.readouterr().err.strip().splitlines()
        assert err[-1].startswith("error kind=configuration message=")

    def test_malformed_override(self, dataset, temp_dir):
        """Test a --set without a section"""
        assert main(["train", "--labeled", str(dataset), "--out", str(temp_dir / "x"),
                     "--set", "epochs=3"]) == EXIT_CONFIGURATION


class TestDerainCommand:
    """Test `derain`"""

    def test_matches_library(self, trained, dataset, temp_dir):
        """Test written PNGs equal the library output quantized to 8 bits"""
        inputs = dataset.parent / "unlabeled"
        out = temp_dir / "derained"
        assert main(["derain", "--checkpoint", str(trained / "ck-epoch-1"), "--input", str(inputs),
                     "--out", str(out)]) == EXIT_OK
        model = load_model(str(trained / "ck-epoch-1"))
        for path in list_images(inputs):
            expected = from_uint8(to_uint8(derain(load_image(path), model)))
            assert np.array_equal(load_image(out / f"{path.stem}.png"), expected)

    def test_missing_checkpoint(self, dataset, temp_dir, capsys):
        """Test an unreadable checkpoint exits with 1"""
        code = main(["derain", "--checkpoint", str(temp_dir / "absent"), "--input",
                     str(dataset.parent / "unlabeled"), "--out", str(temp_dir / "o")])
        assert code == EXIT_FAILURE
        assert "error kind=io" in capsys.readouterr().err


class TestEvalCommand:
    """Test `eval`"""

    def test_metrics_csv(self, trained, dataset):
        """Test one row per labeled pair plus the mean"""
        assert main(["eval", "--checkpoint", str(trained / "ck-epoch-1"), "--manifest", str(dataset),
                     "--out", str(trained)]) == EXIT_OK
        with open(trained / "metrics.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 5
        assert rows[-1]["name"] == "mean"


class TestInspectRfCommand:
    """Test `inspect-rf`"""

    def test_table(self, capsys):
        """Test the dilation-7 column reaches 227 at depth 16"""
        assert main(["inspect-rf"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "227" in out
        assert out.strip().splitlines()[-1].startswith("ok")

    def test_verify(self, capsys):
        """Test the impulse check agrees with the formula"""
        assert main(["inspect-rf", "--dilations", "1,3", "--blocks", "4", "--verify"]) == EXIT_OK
        assert "mismatches=[]" in capsys.readouterr().out
