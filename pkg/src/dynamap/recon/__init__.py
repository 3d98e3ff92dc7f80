"""Object-frame reconstruction: clouds, registration, and the map."""

from .cloud import (
    ColoredCloud,
    backproject_mask,
    estimate_normals,
    intensity,
    intensity_gradients,
    project_points,
    voxel_downsample,
    voxel_downsample_indices,
    voxel_keys,
)
from .mapping import (
    Keyframe,
    ObjectBaseFrame,
    ObjectMap,
    initialize_object_frame,
    integrate_frame,
    keyframe_overlap,
    select_keyframes,
)
from .register import (
    PreparedTarget,
    Registration,
    coarse_register,
    kabsch,
    pca_alignment,
    prepare_target,
    refine_colored_icp,
)

__all__ = [
    "ColoredCloud",
    "Keyframe",
    "ObjectBaseFrame",
    "ObjectMap",
    "PreparedTarget",
    "Registration",
    "backproject_mask",
    "coarse_register",
    "estimate_normals",
    "initialize_object_frame",
    "integrate_frame",
    "intensity",
    "intensity_gradients",
    "kabsch",
    "keyframe_overlap",
    "pca_alignment",
    "prepare_target",
    "project_points",
    "refine_colored_icp",
    "select_keyframes",
    "voxel_downsample",
    "voxel_downsample_indices",
    "voxel_keys",
]
