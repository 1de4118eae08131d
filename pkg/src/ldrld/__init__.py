"""Local dense relational logit distillation on a minimal autodiff stack."""

from .data import Dataset, load_delimited, load_idx, make_blobs
from .losses import (
    DistillConfig,
    LossBreakdown,
    cross_entropy,
    kl_two_point,
    ldrld_objective,
    ldrld_total,
    llki_loss,
    pair_loss,
    rntk_loss,
    vanilla_kd_loss,
)
from .models import Mlp, MlpSpec, load_checkpoint, save_checkpoint
from .pairs import AdwParams, PairSet, adw, build_pair_set, erd, generate_pairs, irw
from .ranking import RankOrder, TopSplit, rank_by_student, split_top_d
from .tensor import NonFiniteError, Tape, Tensor
from .training import TrainRecord, TrainSpec, distill, evaluate, train_supervised

__version__ = "0.1.0"

__all__ = [
    "AdwParams",
    "Dataset",
    "DistillConfig",
    "LossBreakdown",
    "Mlp",
    "MlpSpec",
    "NonFiniteError",
    "PairSet",
    "RankOrder",
    "Tape",
    "Tensor",
    "TopSplit",
    "TrainRecord",
    "TrainSpec",
    "adw",
    "build_pair_set",
    "cross_entropy",
    "distill",
    "erd",
    "evaluate",
    "generate_pairs",
    "irw",
    "kl_two_point",
    "ldrld_objective",
    "ldrld_total",
    "llki_loss",
    "load_checkpoint",
    "load_delimited",
    "load_idx",
    "make_blobs",
    "pair_loss",
    "rank_by_student",
    "rntk_loss",
    "save_checkpoint",
    "split_top_d",
    "train_supervised",
    "vanilla_kd_loss",
]
