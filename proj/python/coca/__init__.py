"""Confidence-first segmented GRPO lab.

Thin Python surface over the C++ core: reward and metric primitives plus the
train/eval drivers. See the project README for the CLI and file formats.
"""

from ._core import (
    accuracy,
    auroc,
    brier_confidence_reward,
    brier_score,
    default_config_json,
    ece,
    gesr,
    group_normalize,
    joint_reward,
    majority_vote_confidence,
    parse_confidence,
    reliability_table,
    rlcr_reward,
    run_eval,
    run_train,
    success_rate,
    true_solvability,
)

__all__ = [
    "accuracy",
    "auroc",
    "brier_confidence_reward",
    "brier_score",
    "default_config_json",
    "ece",
    "gesr",
    "group_normalize",
    "joint_reward",
    "majority_vote_confidence",
    "parse_confidence",
    "reliability_table",
    "rlcr_reward",
    "run_eval",
    "run_train",
    "success_rate",
    "true_solvability",
]
