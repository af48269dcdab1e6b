"""
Unit Tests for the training engine

This test suite covers:
- Config parsing, presets, validation and override precedence
- The learning-rate schedule
- Loss assembly and its reports
- Optimizer steps, determinism and the lambda_unsup = 0 case
- Checkpoint files, resume and divergence handling

Runs on micro models (M=4, one block per branch) with the tiny encoder.
"""

import csv
import logging
import os
import sys
import tempfile
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest
import torch

# Add parent directory to path to import the packages
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from contrastive.losses import supervised_dual_loss
from contrastive.memory_bank import MemoryBank, RainOrigin
from data_pipeline.batches import make_batches
from data_pipeline.types import LabeledBatch, LabeledSample, UnlabeledSample
from evaluation.inference import derain
from training.checkpoint import (
    CHECKPOINT_MAGIC,
    checkpoint_from_bytes,
    load_checkpoint,
    save_checkpoint,
)
from training.config import PRESETS, OptimConfig, TrainConfig, load_train_config
from training.engine import LOSS_LOG, Trainer, TrainingCallback, checkpoint_name, step_seed, train
from training.losses import LABELED, UNLABELED, LossReport, contrastive_weights, supervised_loss, unsupervised_loss
from training.schedule import lr_at
from utils.config_loader import parse_config_text
from utils.errors import CheckpointFormatError, ConfigurationError, TrainingDivergenceError
from utils.tensor_records import encode_records

pytestmark = pytest.mark.unit

MICRO_RAW = {
    "data": {"batch_size": "2", "patch": "16"},
    "model": {"channels": "4", "rrn_blocks": "1", "drn_blocks": "1", "se_reduction": "2", "dilations": "1, 2"},
    "contrastive": {"encoder_arch": "tiny", "bank_capacity": "8"},
    "train": {"epochs": "1", "seed": "3", "log_every": "1"},
}


def micro_config(**sections):
    raw = {name: dict(values) for name, values in MICRO_RAW.items()}
    for name, values in sections.items():
        raw.setdefault(name, {}).update({k: str(v).lower() if isinstance(v, bool) else str(v)
                                         for k, v in values.items()})
    return TrainConfig.from_raw(raw)


def pools(labeled=4, unlabeled=3, size=20, seed=0):
    rng = np.random.default_rng(seed)
    clean = [rng.random((size, size, 3), dtype=np.float32) * 0.7 for _ in range(labeled)]
    pairs = [LabeledSample.from_pair(np.clip(c + rng.random(c.shape, dtype=np.float32) * 0.3, 0, 1), c,
                                     name=f"l{i}") for i, c in enumerate(clean)]
    rainy = [UnlabeledSample(rainy=rng.random((size, size, 3), dtype=np.float32), name=f"u{i}")
             for i in range(unlabeled)]
    return pairs, rainy


def first_batches(cfg, seed=0):
    labeled, unlabeled = pools()
    stream = make_batches(labeled, unlabeled, cfg.data.batch_size, cfg.data.patch, seed=seed)
    return next(stream), next(stream)


def parameters(model):
    return {name: p.detach().clone() for name, p in model.named_parameters()}


@pytest.fixture
def temp_dir():
    """Create a temporary run directory"""
    temp_path = tempfile.mkdtemp()
    yield Path(temp_path)
    import shutil
    shutil.rmtree(temp_path, ignore_errors=True)


class TestTrainConfig:
    """Test the typed run configuration"""

    def test_defaults(self):
        """Test the documented defaults"""
        cfg = TrainConfig()
        assert cfg.data.batch_size == 8 and cfg.data.patch == 100
        assert cfg.model.channels == 64 and cfg.model.rrn_blocks == 16 and cfg.model.drn_blocks == 16
        assert cfg.model.dilations == (1, 3, 5)
        assert cfg.contrastive.omegas == (0.2, 0.5, 1.0) and cfg.contrastive.negatives == 4
        assert cfg.optim.lr == 1e-3 and cfg.optim.milestones == (30, 50, 80) and cfg.optim.decay == 0.2
        assert cfg.train.epochs == 150 and cfg.train.lambda_unsup == 1.0
        assert cfg.train.lambda_r == 0.5 and cfg.train.lambda_dual == 0.5

    def test_typed_values(self):
        """Test bools, ints, floats and tuples are converted"""
        cfg = micro_config(model={"rrn_se": "off"}, optim={"milestones": "2, 4", "lr": "5e-4"})
        assert cfg.model.rrn_se is False
        assert cfg.model.dilations == (1, 2)
        assert cfg.optim.milestones == (2, 4)
        assert cfg.optim.lr == pytest.approx(5e-4)

    def test_unknown_names_rejected(self):
        """Test unknown sections and keys"""
        with pytest.raises(ConfigurationError):
            TrainConfig.from_raw({"solver": {"lr": "1"}})
        with pytest.raises(ConfigurationError):
            TrainConfig.from_raw({"model": {"width": "8"}})
        with pytest.raises(ConfigurationError):
            TrainConfig.from_raw({"data": {"batch_size": "eight"}})

    @pytest.mark.parametrize("section,key,value", [
        ("optim", "milestones", "50, 30"),
        ("optim", "decay", "1.0"),
        ("train", "lambda_r", "-1"),
        ("contrastive", "negatives", "0"),
        ("contrastive", "pair_floor", "-1"),
        ("model", "se_reduction", "3"),
        ("model", "drn_block", "dense"),
    ])
    def test_validation(self, section, key, value):
        """Test constraint violations are configuration errors"""
        with pytest.raises(ConfigurationError):
            micro_config(**{section: {key: value}})

    def test_echo_round_trip(self):
        """Test the echoed INI text parses back to the same config"""
        cfg = micro_config(train={"lambda_dual": "0.25"})
        assert TrainConfig.from_raw(parse_config_text(cfg.echo())) == cfg
        assert cfg.config_hash() == TrainConfig.from_raw(parse_config_text(cfg.echo())).config_hash()

    def test_presets(self):
        """Test ablation and grid presets"""
        baseline = load_train_config(preset="BL", environ={})
        assert not baseline.model.drn_enabled and not baseline.model.rrn_se
        assert baseline.train.lambda_dual == 0 and not baseline.data.semi_supervised
        assert load_train_config(preset="BL+SE+RB", environ={}).model.drn_block == "residual"
        grid = load_train_config(preset="D8-M32", environ={})
        assert (grid.model.rrn_blocks, grid.model.drn_blocks, grid.model.channels) == (8, 8, 32)
        assert len([name for name in PRESETS if name.startswith("D")]) == 9
        with pytest.raises(ConfigurationError):
            load_train_config(preset="BL+XL", environ={})

    def test_layer_precedence(self, temp_dir):
        """Test preset < file < environment < CLI"""
        path = temp_dir / "run.cfg"
        path.write_text("[model]\nchannels = 16\n[train]\nseed = 5\nepochs = 3\n", encoding="utf-8")
        with patch.dict(os.environ, {"SEMIDRD_SEED": "11"}):
            cfg = load_train_config(str(path), preset="D8-M32", overrides=[("train", "epochs", "7")])
        assert cfg.model.channels == 16
        assert cfg.model.rrn_blocks == 8
        assert cfg.train.seed == 11
        assert cfg.train.epochs == 7

    def test_missing_file(self, temp_dir):
        """Test a missing config file is a configuration error"""
        with pytest.raises(ConfigurationError):
            load_train_config(str(temp_dir / "absent.cfg"), environ={})

    def test_replace_validates(self):
        """Test replace() returns a validated copy"""
        cfg = micro_config()
        assert cfg.replace("train", lambda_r=0.0).train.lambda_r == 0.0
        assert cfg.train.lambda_r == 0.5
        with pytest.raises(ConfigurationError):
            cfg.replace("optim", lr=0.0)


class TestSchedule:
    """Test the piecewise-constant learning rate"""

    @pytest.mark.parametrize("epoch,expected", [
        (0, 1e-3), (29, 1e-3), (30, 2e-4), (49, 2e-4), (50, 4e-5), (80, 8e-6), (149, 8e-6),
    ])
    def test_default_schedule(self, epoch, expected):
        """Test decay by 0.2 at epochs 30, 50 and 80"""
        assert lr_at(epoch, OptimConfig()) == pytest.approx(expected, rel=1e-12)

    def test_nonincreasing(self):
        """Test the rate never grows"""
        rates = [lr_at(e, OptimConfig()) for e in range(150)]
        assert all(a >= b for a, b in zip(rates, rates[1:]))


class TestLossAssembly:
    """Test L_sup, L_unsup and their reports"""

    def test_sup_equals_detail_loss_without_extras(self):
        """Test L_sup = L_d when lambda_r = lambda_dual = 0"""
        cfg = micro_config(train={"lambda_r": 0, "lambda_dual": 0})
        trainer = Trainer(cfg)
        batch, _ = first_batches(cfg)
        loss, report = supervised_loss(batch, trainer.model, trainer.encoder, trainer.bank, cfg)
        assert report.sup == report.d
        assert float(loss) == report.d
        assert report.phase == LABELED

    def test_perfect_predictions_give_zero_pixel_losses(self):
        """Test L_r = L_d = 0 when the untrained model is already exact"""
        cfg = micro_config(train={"lambda_dual": 0})
        trainer = Trainer(cfg)
        rainy = torch.rand(2, 3, 16, 16)
        batch = LabeledBatch(rainy=rainy, clean=rainy.clone(), streaks=torch.zeros_like(rainy))
        loss, report = supervised_loss(batch, trainer.model, trainer.encoder, trainer.bank, cfg)
        assert report.r == 0.0 and report.d == 0.0
        assert float(loss) == 0.0

    def test_matches_hand_chained_composition(self):
        """Test L_sup against the model outputs and the dual loss composed by hand"""
        cfg = micro_config()
        trainer = Trainer(cfg)
        with torch.no_grad():
            torch.nn.init.normal_(trainer.model.rrn.out.weight, std=0.05)
        trainer.bank.push(torch.rand(3, 3, 16, 16) * 0.1, RainOrigin.REAL)
        batch, _ = first_batches(cfg)
        expected_bank = MemoryBank(8)
        expected_bank.load_state(trainer.bank.state())

        outputs = trainer.model(batch.rainy)
        loss_r = (outputs.rain - batch.streaks).abs().mean()
        loss_d = (outputs.derained - batch.clean).abs().mean()
        dual = supervised_dual_loss(outputs.derained, batch.clean, batch.rainy, expected_bank, trainer.encoder,
                                    contrastive_weights(cfg), seed=9)
        expected = loss_d + 0.5 * loss_r + 0.5 * dual

        loss, _ = supervised_loss(batch, trainer.model, trainer.encoder, trainer.bank, cfg, seed=9)
        assert float(loss) == pytest.approx(float(expected), abs=1e-6)

    def test_total_decomposition(self):
        """Test total = L_d + lambda_r * L_r + lambda_dual * L_dual(sup)"""
        cfg = micro_config(train={"lambda_r": 0.3, "lambda_dual": 0.7})
        trainer = Trainer(cfg)
        trainer.bank.push(torch.rand(2, 3, 16, 16) * 0.1, RainOrigin.SYNTHETIC)
        batch, _ = first_batches(cfg)
        _, report = supervised_loss(batch, trainer.model, trainer.encoder, trainer.bank, cfg, seed=1)
        expected = report.d + 0.3 * report.r + 0.7 * report.dual_sup
        assert report.total == pytest.approx(expected, rel=1e-6)
        assert report.dual_sup > 0

    def test_losses_push_rain_into_bank(self):
        """Test each phase pushes its rain estimate with its origin"""
        cfg = micro_config()
        trainer = Trainer(cfg)
        labeled, unlabeled = first_batches(cfg)
        supervised_loss(labeled, trainer.model, trainer.encoder, trainer.bank, cfg)
        unsupervised_loss(unlabeled, trainer.model, trainer.encoder, trainer.bank, cfg)
        assert trainer.bank.count(RainOrigin.SYNTHETIC) == 2
        assert trainer.bank.count(RainOrigin.REAL) == 2

    def test_empty_bank_fallback_is_finite(self):
        """Test the very first unlabeled step uses the rainy input as negatives"""
        cfg = micro_config()
        trainer = Trainer(cfg)
        _, unlabeled = first_batches(cfg)
        _, report = unsupervised_loss(unlabeled, trainer.model, trainer.encoder, trainer.bank, cfg)
        assert report.is_finite()
        assert report.phase == UNLABELED
        assert report.total == pytest.approx(cfg.train.lambda_unsup * report.unsup)

    def test_non_finite_loss_raises(self):
        """Test a NaN output becomes a divergence error carrying the report"""
        cfg = micro_config(train={"lambda_dual": 0})
        trainer = Trainer(cfg)
        with torch.no_grad():
            trainer.model.rrn.out.bias.fill_(float("nan"))
        batch, _ = first_batches(cfg)
        with pytest.raises(TrainingDivergenceError) as info:
            supervised_loss(batch, trainer.model, trainer.encoder, trainer.bank, cfg)
        assert isinstance(info.value.report, LossReport)
        assert len(trainer.bank) == 0


class TestTrainer:
    """Test optimizer steps and epochs"""

    def test_labeled_step_updates_parameters(self):
        """Test one Adam step changes the weights"""
        cfg = micro_config()
        trainer = Trainer(cfg)
        before = parameters(trainer.model)
        batch, _ = first_batches(cfg)
        report = trainer.train_step(batch, lr=1e-3)
        assert report.step == 0 and trainer.step == 1
        after = parameters(trainer.model)
        assert any(not torch.equal(before[k], after[k]) for k in before)

    def test_zero_unsup_weight_leaves_parameters_unchanged(self):
        """Test lambda_unsup = 0 makes an unlabeled step a no-op on the weights"""
        cfg = micro_config(train={"lambda_unsup": 0})
        trainer = Trainer(cfg)
        before = parameters(trainer.model)
        _, unlabeled = first_batches(cfg)
        report = trainer.train_step(unlabeled, lr=1e-3)
        after = parameters(trainer.model)
        assert all(torch.equal(before[k], after[k]) for k in before)
        assert report.total == 0.0
        assert not trainer.optimizer.state

    def test_zero_unsup_weight_leaves_model_state_and_bank_unchanged(self):
        """Test batch-norm buffers, inference output and the bank survive an unlabeled step"""
        cfg = micro_config(train={"lambda_unsup": 0})
        trainer = Trainer(cfg)
        labeled, unlabeled = first_batches(cfg)
        trainer.train_step(labeled, lr=1e-3)
        image = np.random.default_rng(4).random((16, 16, 3), dtype=np.float32)
        state = {k: v.detach().clone() for k, v in trainer.model.state_dict().items()}
        output = derain(image, trainer.model)
        bank_size = len(trainer.bank)

        report = trainer.train_step(unlabeled, lr=1e-3)

        assert report.phase == UNLABELED and report.is_finite()
        after = trainer.model.state_dict()
        assert set(after) == set(state)
        for name, tensor in state.items():
            assert torch.equal(after[name], tensor), name
        assert np.array_equal(derain(image, trainer.model), output)
        assert len(trainer.bank) == bank_size

    def test_supervised_only_runs_without_encoder(self):
        """Test the fully supervised configuration"""
        cfg = micro_config(data={"semi_supervised": False}, train={"lambda_unsup": 0, "lambda_dual": 0})
        trainer = Trainer(cfg)
        assert trainer.encoder is None
        labeled, _ = pools()
        reports = trainer.run_epoch(labeled, [])
        assert [r.phase for r in reports] == [LABELED, LABELED]

    def test_epoch_alternates_phases(self):
        """Test L, U, L, U with consecutive step numbers"""
        cfg = micro_config()
        labeled, unlabeled = pools()
        reports = Trainer(cfg).run_epoch(labeled, unlabeled)
        assert [r.phase for r in reports] == [LABELED, UNLABELED, LABELED, UNLABELED]
        assert [r.step for r in reports] == [0, 1, 2, 3]
        assert all(r.lr == pytest.approx(cfg.optim.lr) for r in reports)

    def test_same_seed_same_run(self):
        """Test two runs with one seed produce identical losses and weights"""
        cfg = micro_config()
        labeled, unlabeled = pools()
        a, b = Trainer(cfg), Trainer(cfg)
        reports_a = a.run_epoch(labeled, unlabeled)
        reports_b = b.run_epoch(labeled, unlabeled)
        assert [r.row() for r in reports_a] == [r.row() for r in reports_b]
        pa, pb = parameters(a.model), parameters(b.model)
        assert all(torch.equal(pa[k], pb[k]) for k in pa)

    def test_step_seeds_differ(self):
        """Test per-step sampling seeds"""
        assert step_seed(0, 0) != step_seed(0, 1)
        assert step_seed(0, 5) == step_seed(0, 5)


class TestCheckpoint:
    """Test checkpoint files"""

    def test_round_trip_is_bit_exact(self, temp_dir):
        """Test model, optimizer, counters and config survive a save/load"""
        cfg = micro_config()
        trainer = Trainer(cfg)
        labeled, unlabeled = pools()
        trainer.run_epoch(labeled, unlabeled)
        ck = trainer.checkpoint()
        loaded = load_checkpoint(save_checkpoint(ck, temp_dir / checkpoint_name(1)))
        assert loaded.epoch == 1 and loaded.step == 4
        assert set(loaded.model_state) == set(ck.model_state)
        for name, tensor in ck.model_state.items():
            assert torch.equal(loaded.model_state[name].to(tensor.dtype), tensor), name
        for index, slots in ck.optimizer_state["state"].items():
            for key, value in slots.items():
                assert torch.equal(loaded.optimizer_state["state"][index][key], torch.as_tensor(value))
        assert torch.equal(loaded.rng_state, ck.rng_state)
        assert loaded.config() == cfg
        assert loaded.encoder["arch"] == "tiny"
        assert loaded.bank is None

    def test_bank_saved_on_request(self, temp_dir):
        """Test save_bank stores the memory bank"""
        cfg = micro_config(train={"save_bank": True})
        trainer = Trainer(cfg)
        trainer.bank.push(torch.rand(3, 3, 16, 16), RainOrigin.REAL)
        loaded = load_checkpoint(save_checkpoint(trainer.checkpoint(), temp_dir / "ck"))
        restored = MemoryBank(8)
        restored.load_state(loaded.bank)
        assert restored.count(RainOrigin.REAL) == 3

    def test_truncated_file(self, temp_dir):
        """Test truncation is a format error"""
        path = save_checkpoint(Trainer(micro_config()).checkpoint(), temp_dir / "ck")
        data = path.read_bytes()
        for cut in (4, len(data) // 2, len(data) - 1):
            with pytest.raises(CheckpointFormatError):
                checkpoint_from_bytes(data[:cut])

    def test_other_version(self, temp_dir):
        """Test an unknown format version is rejected"""
        data = bytearray(save_checkpoint(Trainer(micro_config()).checkpoint(), temp_dir / "ck").read_bytes())
        data[8:12] = (99).to_bytes(4, "little")
        with pytest.raises(CheckpointFormatError):
            checkpoint_from_bytes(bytes(data))

    def test_missing_fields(self):
        """Test a well-formed file without model records or counters"""
        with pytest.raises(CheckpointFormatError):
            checkpoint_from_bytes(encode_records(CHECKPOINT_MAGIC, 1, {"epoch": 1}, {}))


class TestTrainLoop:
    """Test train() with run directories"""

    def test_writes_loss_log_and_checkpoints(self, temp_dir):
        """Test loss.csv rows and one checkpoint per epoch"""
        cfg = micro_config(train={"epochs": 2})
        labeled, unlabeled = pools()
        final = train(cfg, labeled, unlabeled, run_dir=temp_dir)
        assert final.epoch == 2 and final.step == 8
        assert (temp_dir / "ck-epoch-1").exists() and (temp_dir / "ck-epoch-2").exists()
        with open(temp_dir / LOSS_LOG, newline="") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 8
        assert list(rows[0]) == list(LossReport.FIELDS)

    def test_resume_matches_uninterrupted_run(self, temp_dir):
        """Test 1 epoch + resume + 1 epoch equals 2 straight epochs"""
        labeled, unlabeled = pools()
        straight = train(micro_config(train={"epochs": 2, "save_bank": True}), labeled, unlabeled)

        train(micro_config(train={"epochs": 1, "save_bank": True}), labeled, unlabeled, run_dir=temp_dir)
        resumed = train(micro_config(train={"epochs": 2, "save_bank": True}), labeled, unlabeled,
                        resume=load_checkpoint(temp_dir / "ck-epoch-1"))
        assert resumed.step == straight.step
        for name, tensor in straight.model_state.items():
            assert torch.allclose(resumed.model_state[name], tensor, atol=1e-7), name

    def test_resume_reproduces_next_epoch_losses(self, temp_dir):
        """Test a saved and reloaded trainer logs the same losses as the one that kept running"""
        cfg = micro_config(train={"epochs": 2, "save_bank": True})
        labeled, unlabeled = pools()
        running = Trainer(cfg)
        running.run_epoch(labeled, unlabeled)
        path = save_checkpoint(running.checkpoint(), temp_dir / checkpoint_name(1))
        expected = running.run_epoch(labeled, unlabeled)

        resumed = Trainer(cfg)
        resumed.restore(load_checkpoint(path))
        actual = resumed.run_epoch(labeled, unlabeled)
        assert [r.step for r in actual] == [r.step for r in expected]
        for a, b in zip(actual, expected):
            assert a.total == pytest.approx(b.total, abs=1e-7)

    def test_bankless_resume_warns(self, caplog):
        """Test restoring a checkpoint without a bank warns when a dual term needs one"""
        cfg = micro_config()
        ck = Trainer(cfg).checkpoint()
        assert ck.bank is None
        with caplog.at_level(logging.WARNING, logger="training.engine"):
            Trainer(cfg).restore(ck)
        assert any("no memory bank" in r.getMessage() for r in caplog.records)

    def test_bankless_resume_is_quiet_without_dual_terms(self, caplog):
        """Test the supervised-only configuration does not warn about a missing bank"""
        cfg = micro_config(data={"semi_supervised": False}, train={"lambda_unsup": 0, "lambda_dual": 0})
        ck = Trainer(cfg).checkpoint()
        with caplog.at_level(logging.WARNING, logger="training.engine"):
            Trainer(cfg).restore(ck)
        assert not any("no memory bank" in r.getMessage() for r in caplog.records)

    def test_divergence_reports_last_checkpoint(self, temp_dir):
        """Test the error names the last good checkpoint"""
        cfg = micro_config(train={"epochs": 2, "lambda_dual": 0})
        trainer = Trainer(cfg)

        class Poison(TrainingCallback):
            def on_epoch_end(self, epoch, checkpoint, path):
                with torch.no_grad():
                    trainer.model.rrn.out.bias.fill_(float("nan"))

        labeled, unlabeled = pools()
        with pytest.raises(TrainingDivergenceError) as info:
            train(cfg, labeled, unlabeled, callbacks=[Poison()], run_dir=temp_dir, trainer=trainer)
        assert info.value.last_checkpoint.endswith("ck-epoch-1")
