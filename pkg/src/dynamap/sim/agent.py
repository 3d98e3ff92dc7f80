"""Discrete agent: 0.15 m forward steps and +-10 degree yaw turns on a
36-bin heading wheel, with a fixed-height forward camera."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..se3 import Pose
from .scene import Scene

STEP_LENGTH = 0.15
TURN_DEG = 10
N_YAW_BINS = 36
CAMERA_HEIGHT = 1.25


class Action(Enum):
    FORWARD = "forward"
    ROTATE_LEFT = "rotate_left"
    ROTATE_RIGHT = "rotate_right"


@dataclass
class AgentState:
    position: np.ndarray  # world xy
    yaw_bin: int  # heading = yaw_bin * 10 degrees, CCW from +x

    @property
    def yaw(self) -> float:
        return np.radians(self.yaw_bin * TURN_DEG)

    def forward2(self) -> np.ndarray:
        return np.array([np.cos(self.yaw), np.sin(self.yaw)])

    def copy(self) -> "AgentState":
        return AgentState(self.position.copy(), self.yaw_bin)


def apply_agent_action(
    agent: AgentState, action: Action, scene: Scene
) -> tuple[AgentState, bool]:
    """One action; forward into a non-navigable cell is a no-op flagged blocked."""
    if action is Action.ROTATE_LEFT:
        return AgentState(agent.position.copy(), (agent.yaw_bin + 1) % N_YAW_BINS), False
    if action is Action.ROTATE_RIGHT:
        return AgentState(agent.position.copy(), (agent.yaw_bin - 1) % N_YAW_BINS), False
    target = agent.position + STEP_LENGTH * agent.forward2()
    if not scene.nav.is_free_xy(target):
        return agent.copy(), True
    return AgentState(target, agent.yaw_bin), False


def look_at(position: np.ndarray, target: np.ndarray, up=None) -> Pose:
    """Camera pose with columns (right, down, forward), forward toward target."""
    up = np.array([0.0, 0.0, 1.0]) if up is None else np.asarray(up, dtype=float)
    forward = np.asarray(target, dtype=float) - position
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ValueError("look_at target coincides with position")
    forward = forward / norm
    right = np.cross(forward, up)
    rnorm = np.linalg.norm(right)
    if rnorm < 1e-9:  # looking straight along up: pick any horizontal right
        right = np.array([1.0, 0.0, 0.0])
        rnorm = 1.0
    right = right / rnorm
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward], axis=1)
    return Pose(rot, np.asarray(position, dtype=float).copy())


def camera_pose(agent: AgentState, height: float = CAMERA_HEIGHT) -> Pose:
    """World pose of the agent's pitch-free forward camera."""
    origin = np.array([agent.position[0], agent.position[1], height])
    fwd = agent.forward2()
    return look_at(origin, origin + np.array([fwd[0], fwd[1], 0.0]))
