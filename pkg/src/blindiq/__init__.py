"""blindiq: lightweight dual-branch blind image quality assessment.

Two mobile CNN encoders (one tuned for authentic capture distortions, one
for synthetic degradations) feed spline-activation regression heads that
fuse into a single quality score.  The package also ships the training,
evaluation, and complexity-profiling machinery around that model.
"""

from .colorspace import Image, LAB, RGB, SPACES, YUV, rgb_to_lab, rgb_to_yuv, to_network_range
from .encoder import Encoder, make_encoder_spec
from .errors import BlindIQError
from .kan import KanLayer, KanStack, bspline_bases
from .losses import LossConfig, acc_loss, color_space_loss, total_loss
from .metrics import EvalReport, evaluate, krcc, plcc, srcc
from .mlp import MlpStack, build_matched_mlp
from .model import DualBranchModel, build_model, load_weights, save_weights
from .preprocess import BranchPreprocessConfig, center_crop, prepare, resize_bilinear
from .trainer import (
    FoldPlan,
    TrainConfig,
    kfold,
    lr_at,
    multi_task_train,
    train_dual_head,
    train_head,
)

__version__ = "0.1.0"

__all__ = [
    "BlindIQError",
    "BranchPreprocessConfig",
    "DualBranchModel",
    "Encoder",
    "EvalReport",
    "FoldPlan",
    "Image",
    "KanLayer",
    "KanStack",
    "LossConfig",
    "MlpStack",
    "TrainConfig",
    "acc_loss",
    "bspline_bases",
    "build_matched_mlp",
    "build_model",
    "center_crop",
    "color_space_loss",
    "evaluate",
    "kfold",
    "krcc",
    "load_weights",
    "lr_at",
    "make_encoder_spec",
    "multi_task_train",
    "plcc",
    "prepare",
    "resize_bilinear",
    "rgb_to_lab",
    "rgb_to_yuv",
    "save_weights",
    "srcc",
    "to_network_range",
    "total_loss",
    "train_dual_head",
    "train_head",
]
