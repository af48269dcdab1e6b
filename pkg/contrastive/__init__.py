from contrastive.augment import augment_negatives, domain_transform, fit_to_shape, get_domain_transform
from contrastive.encoder import PerceptualEncoder, build_encoder, save_encoder_weights
from contrastive.losses import ContrastiveWeights, contrastive_loss, supervised_dual_loss, unsupervised_dual_loss
from contrastive.memory_bank import MemoryBank, RainOrigin
