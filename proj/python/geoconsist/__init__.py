"""Geometry-consistent photometric objective for monocular depth and ego-motion."""

from ._geoconsist import (
    GeoconsistError,
    Intrinsics,
    LossWeights,
    Snippet,
    bilinear_sample,
    chain_snippets,
    check_gradients,
    compute_warp,
    depth_consistency,
    load_snippet,
    median_ape,
    nearest_rank_percentile,
    nudge_off_kinks,
    perturb_snippet,
    read_kitti_poses,
    refine,
    rotation_from_vector,
    rotation_to_vector,
    scenario_names,
    sequence_ate,
    slice_snippet,
    synthetic_snippet,
    total_loss,
    translation_error,
    uncertainty_vs_baseline,
    write_kitti_poses,
    write_sequence,
)

TERMS = ("pixel", "ssim", "smooth", "epi", "reproj", "depth", "multi")

__all__ = [name for name in dir() if not name.startswith("_")]
