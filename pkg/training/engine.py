"""
Semi-supervised training loop.

Each epoch alternates labeled and unlabeled batches (L, U, L, U, ...). A
labeled step minimizes L_sup, an unlabeled step minimizes
lambda_unsup * L_unsup. With lambda_unsup = 0 unlabeled steps are still
evaluated and logged, but in inference mode and without a bank push: neither
the model (batch-norm statistics included) nor the bank changes. A checkpoint
is produced at the end of every epoch.
"""

import copy
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
import torch

from contrastive.encoder import PerceptualEncoder, build_encoder
from contrastive.memory_bank import MemoryBank
from data_pipeline.batches import epoch_seed, make_batches
from data_pipeline.types import LabeledBatch, LabeledSample, UnlabeledSample
from networks.model import SemiDRDNet
from training.checkpoint import Checkpoint, save_checkpoint
from training.config import TrainConfig
from training.losses import LossReport, supervised_loss, unsupervised_loss
from training.schedule import apply_lr, lr_at
from utils.artifacts import CsvAppender
from utils.errors import ConfigurationError, TrainingDivergenceError

logger = logging.getLogger(__name__)

LOSS_LOG = "loss.csv"


def checkpoint_name(epoch: int) -> str:
    return f"ck-epoch-{epoch}"


def step_seed(seed: int, step: int) -> int:
    """Sampling seed of one optimizer step."""
    return int(np.random.SeedSequence([int(seed), int(step), 1]).generate_state(1, dtype=np.uint64)[0])


class TrainingCallback:
    """Hooks called by train(); override what you need."""

    def on_step(self, report: LossReport) -> None:
        pass

    def on_epoch_end(self, epoch: int, checkpoint: Checkpoint, path: Optional[Path]) -> None:
        pass


class LossCsvCallback(TrainingCallback):
    """Appends every LossReport to a CSV file."""

    def __init__(self, path: Union[str, Path]):
        self.log = CsvAppender(path, LossReport.FIELDS)

    def on_step(self, report: LossReport) -> None:
        self.log.append(report.row())

    def close(self) -> None:
        self.log.close()


class Trainer:
    """
    Owns the model, encoder, optimizer and memory bank of one run.

    Args:
        cfg: Effective configuration.
        model: Optional prebuilt model; by default built from cfg.model and cfg.train.seed.
        encoder: Optional prebuilt encoder; by default built from cfg.contrastive when a
                 contrastive term is active.
    """

    def __init__(self, cfg: TrainConfig, model: Optional[SemiDRDNet] = None,
                 encoder: Optional[PerceptualEncoder] = None) -> None:
        self.cfg = cfg
        seed = cfg.train.seed
        self.model = model if model is not None else SemiDRDNet.from_config(cfg.model, seed)
        if encoder is None and (cfg.train.lambda_dual > 0 or cfg.data.semi_supervised):
            encoder = build_encoder(cfg.contrastive, seed)
        self.encoder = encoder
        o = cfg.optim
        self.optimizer = torch.optim.Adam(self.model.parameters(), lr=o.lr, betas=(o.beta1, o.beta2),
                                          eps=o.adam_eps)
        self.bank = MemoryBank(cfg.contrastive.bank_capacity)
        self.epoch = 0
        self.step = 0
        self.last_checkpoint: Optional[Path] = None

    # -- state ---------------------------------------------------------------

    def uses_bank(self) -> bool:
        t = self.cfg.train
        return t.lambda_dual > 0 or (self.cfg.data.semi_supervised and t.lambda_unsup > 0)

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(
            model_state={k: v.detach().clone() for k, v in self.model.state_dict().items()},
            optimizer_state=copy.deepcopy(self.optimizer.state_dict()),
            epoch=self.epoch,
            step=self.step,
            rng_state=torch.get_rng_state(),
            config_text=self.cfg.echo(),
            config_hash=self.cfg.config_hash(),
            encoder=dict(self.encoder.source) if self.encoder is not None else {},
            bank=self.bank.state() if self.cfg.train.save_bank else None,
        )

    def restore(self, ck: Checkpoint) -> None:
        """Continues from a checkpoint produced by a run with the same model layout."""
        try:
            self.model.load_state_dict(ck.model_state)
            self.optimizer.load_state_dict(ck.optimizer_state)
        except (RuntimeError, ValueError, KeyError) as e:
            raise ConfigurationError(f"checkpoint does not match the configured model: {e}")
        if ck.bank is not None:
            self.bank.load_state(ck.bank)
        elif self.uses_bank():
            logger.warning("Checkpoint carries no memory bank; negatives restart from the rainy-input "
                           "fallback, so this run will not reproduce an uninterrupted one "
                           "(set train.save_bank = true to keep the bank)")
        torch.set_rng_state(ck.rng_state)
        self.epoch, self.step = ck.epoch, ck.step
        if ck.config_hash and ck.config_hash != self.cfg.config_hash():
            logger.warning("Resuming with a configuration that differs from the checkpoint's")
        logger.info("Resumed at epoch %d, step %d", self.epoch, self.step)

    # -- steps ---------------------------------------------------------------

    def train_step(self, batch, lr: float) -> LossReport:
        """One optimizer step on a labeled or unlabeled batch."""
        cfg = self.cfg
        seed = step_seed(cfg.train.seed, self.step)
        labeled = isinstance(batch, LabeledBatch)
        update = labeled or cfg.train.lambda_unsup > 0
        # A step that will not update runs with frozen batch-norm statistics.
        self.model.train(update)
        with torch.set_grad_enabled(update):
            if labeled:
                loss, report = supervised_loss(batch, self.model, self.encoder, self.bank, cfg, seed=seed,
                                               step=self.step, epoch=self.epoch, lr=lr)
            else:
                loss, report = unsupervised_loss(batch, self.model, self.encoder, self.bank, cfg, seed=seed,
                                                 step=self.step, epoch=self.epoch, lr=lr, push=update)
                loss = cfg.train.lambda_unsup * loss
        if update:
            self.optimizer.zero_grad(set_to_none=True)
            loss.backward()
            if cfg.optim.clip_grad_norm > 0:
                torch.nn.utils.clip_grad_norm_(self.model.parameters(), cfg.optim.clip_grad_norm)
            self.optimizer.step()
        self.step += 1
        return report

    def run_epoch(self, labeled: Sequence[LabeledSample], unlabeled: Sequence[UnlabeledSample],
                  callbacks: Iterable[TrainingCallback] = ()) -> List[LossReport]:
        cfg = self.cfg
        lr = lr_at(self.epoch, cfg.optim)
        apply_lr(self.optimizer, lr)
        reports = []
        batches = make_batches(list(labeled), list(unlabeled), cfg.data.batch_size, cfg.data.patch,
                               seed=epoch_seed(cfg.train.seed, self.epoch),
                               semi_supervised=cfg.data.semi_supervised)
        for batch in batches:
            try:
                report = self.train_step(batch, lr)
            except TrainingDivergenceError as e:
                e.last_checkpoint = str(self.last_checkpoint) if self.last_checkpoint else None
                logger.error("Training diverged at step %d; last good checkpoint: %s",
                             self.step, e.last_checkpoint)
                raise
            reports.append(report)
            for callback in callbacks:
                callback.on_step(report)
            if report.step % cfg.train.log_every == 0:
                logger.info("epoch %d step %d %s total=%.6f lr=%.2e",
                            report.epoch, report.step, report.phase, report.total, lr)
        self.epoch += 1
        return reports


def train(cfg: TrainConfig, labeled: Sequence[LabeledSample], unlabeled: Sequence[UnlabeledSample] = (),
          callbacks: Iterable[TrainingCallback] = (), run_dir: Optional[Union[str, Path]] = None,
          resume: Optional[Checkpoint] = None, trainer: Optional[Trainer] = None) -> Checkpoint:
    """
    Trains until cfg.train.epochs epochs are complete.

    Args:
        cfg: Effective configuration.
        labeled: Paired pool.
        unlabeled: Unpaired pool (needed when cfg.data.semi_supervised).
        callbacks: Step and epoch hooks.
        run_dir: When given, loss.csv is appended to and ck-epoch-N written here.
        resume: Checkpoint to continue from.
        trainer: Prebuilt trainer (e.g. with a custom encoder).

    Returns:
        The checkpoint after the last epoch.

    Raises:
        TrainingDivergenceError: a loss became non-finite; carries the last checkpoint path.
    """
    torch.use_deterministic_algorithms(True, warn_only=True)
    trainer = trainer or Trainer(cfg)
    if resume is not None:
        trainer.restore(resume)
    callbacks = list(callbacks)
    loss_log = None
    if run_dir is not None:
        run_dir = Path(run_dir)
        loss_log = LossCsvCallback(run_dir / LOSS_LOG)
        callbacks.insert(0, loss_log)

    logger.info("Training %d epoch(s) from epoch %d on %d labeled / %d unlabeled images",
                cfg.train.epochs, trainer.epoch, len(labeled), len(unlabeled))
    try:
        while trainer.epoch < cfg.train.epochs:
            reports = trainer.run_epoch(labeled, unlabeled, callbacks)
            checkpoint = trainer.checkpoint()
            path = None
            if run_dir is not None:
                path = save_checkpoint(checkpoint, run_dir / checkpoint_name(trainer.epoch))
                trainer.last_checkpoint = path
            mean_total = sum(r.total for r in reports) / max(len(reports), 1)
            logger.info("Finished epoch %d (step %d), mean total loss %.6f", trainer.epoch, trainer.step, mean_total)
            for callback in callbacks:
                callback.on_epoch_end(trainer.epoch, checkpoint, path)
    finally:
        if loss_log is not None:
            loss_log.close()
    return trainer.checkpoint()
