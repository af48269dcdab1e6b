from data_pipeline.batches import make_batches
from data_pipeline.patches import crop_patch
from data_pipeline.synthesis import composite, synthesize_streaks
from data_pipeline.types import LabeledBatch, LabeledSample, StreakParams, UnlabeledBatch, UnlabeledSample
