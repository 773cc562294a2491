"""Loss-sorted dynamic batch training for desk-scale segmentation experiments."""

from dybat._core import (
    HD95_PENALTY,
    batch_conditional_loss,
    dice,
    directed_hd,
    evaluate,
    evaluate_regions,
    false_positive_focal_loss,
    focal_loss,
    gen_corpus,
    hd95,
    loss_gradient,
    mean_false_positive_loss,
    one_hot,
    partition_slices,
    report,
    train,
    zscore_normalize,
)

__all__ = [
    "HD95_PENALTY",
    "batch_conditional_loss",
    "dice",
    "directed_hd",
    "evaluate",
    "evaluate_regions",
    "false_positive_focal_loss",
    "focal_loss",
    "gen_corpus",
    "hd95",
    "loss_gradient",
    "mean_false_positive_loss",
    "one_hot",
    "partition_slices",
    "report",
    "train",
    "zscore_normalize",
]
