"""LOMIT: exemplar-guided local-mask image translation."""

__version__ = "0.1.0"

from .hadain import AffineParams, adain, channel_stats, downsample_mask, hadain, split_by_mask
from .networks import LOMITModel, NetConfig, TranslationResult
from .objectives import LossReport, LossWeights
from .training import TrainConfig, load_checkpoint, load_model, save_checkpoint, train, train_step

__all__ = [
    "AffineParams",
    "adain",
    "channel_stats",
    "downsample_mask",
    "hadain",
    "split_by_mask",
    "LOMITModel",
    "NetConfig",
    "TranslationResult",
    "LossReport",
    "LossWeights",
    "TrainConfig",
    "load_checkpoint",
    "load_model",
    "save_checkpoint",
    "train",
    "train_step",
    "__version__",
]
