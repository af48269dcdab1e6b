from training.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from training.config import PRESETS, TrainConfig, load_train_config
from training.engine import Trainer, TrainingCallback, train
from training.losses import LossReport, supervised_loss, unsupervised_loss
from training.schedule import lr_at
