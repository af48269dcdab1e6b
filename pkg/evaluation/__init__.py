from evaluation.inference import derain, model_from_checkpoint
from evaluation.metrics import psnr, ssim
from evaluation.report import MetricsReport, evaluate, write_metrics_csv
