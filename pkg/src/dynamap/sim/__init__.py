"""Headless simulator: scenes, moving rigid objects, a discrete agent,
and a pinhole ray-cast camera."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidStateError
from ..se3 import Pose, yaw_rotation
from .agent import (
    CAMERA_HEIGHT,
    N_YAW_BINS,
    STEP_LENGTH,
    Action,
    AgentState,
    apply_agent_action,
    camera_pose,
    look_at,
)
from .assets import OBJECT_NAMES, SCENE_NAMES, get_object, get_scene
from .camera import Frame, Intrinsics, cast_rays_reference, render_frame
from .objects import (
    MotionPattern,
    ObjectModel,
    RigidObject,
    load_object,
    save_object,
    step_object,
)
from .scene import (
    NavGrid,
    Scene,
    load_scene,
    make_scene,
    save_scene,
    segment_segment_distance,
)

MAX_RESET_ATTEMPTS = 1000


def reset_episode(
    scene: Scene,
    model: ObjectModel,
    rng: np.random.Generator,
) -> tuple[AgentState, RigidObject]:
    """Place the agent at a random navigable pose and the object in front
    of it: forward distance U[1.0, 2.5], lateral offset U[-0.5, 0.5],
    own yaw U[0, 360). Placement retries until the object sits clear of
    geometry with line of sight from the agent."""
    free_cells = np.argwhere(scene.nav.free)
    if len(free_cells) == 0:
        raise InvalidStateError("scene has no navigable cells")
    for _ in range(MAX_RESET_ATTEMPTS):
        cell = free_cells[int(rng.integers(len(free_cells)))]
        yaw_bin = int(rng.integers(N_YAW_BINS))
        agent = AgentState(scene.nav.center(cell[0], cell[1]), yaw_bin)
        dist = rng.uniform(1.0, 2.5)
        lateral = rng.uniform(-0.5, 0.5)
        obj_yaw = rng.uniform(0.0, 2.0 * np.pi)
        heading_angle = rng.uniform(0.0, 2.0 * np.pi)

        fwd = agent.forward2()
        left = np.array([-fwd[1], fwd[0]])
        center = agent.position + dist * fwd + lateral * left

        lo, hi = scene.bounds[0, :2], scene.bounds[1, :2]
        r = model.radius
        if not (np.all(center - r >= lo) and np.all(center + r <= hi)):
            continue
        static = np.stack([center, center])
        if segment_segment_distance(static, scene.obstacle_segments) - r < 0.01:
            continue
        sight = np.stack([agent.position, center])
        if segment_segment_distance(sight, scene.obstacle_segments) < 0.05:
            continue

        pose = Pose(yaw_rotation(obj_yaw), np.array([center[0], center[1], 0.0]))
        heading = np.array([np.cos(heading_angle), np.sin(heading_angle)])
        return agent, RigidObject(model=model, pose=pose, heading=heading)
    raise InvalidStateError("could not place agent and object")
