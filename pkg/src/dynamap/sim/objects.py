"""Rigid object models and their scripted motion patterns.

Patterns (all planar, +z up):

* ``bb``  - straight segments at constant speed with a constant own-axis
            spin; wall contact resamples the heading uniformly.
* ``cbb`` - bb plus a per-segment curvature (the heading turns every
            step); contact also resamples curvature and a speed scale.
* ``fb``  - straight line, no spin; contact reverses the heading.
* ``sg``  - bb dynamics alternating ``move_steps`` moving with
            ``pause_steps`` fully stationary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidStateError, SceneFormatError
from ..se3 import Pose, yaw_rotation
from .scene import Scene, _parse_records, segment_segment_distance

PATTERNS = ("bb", "cbb", "fb", "sg")
MAX_HEADING_RETRIES = 50


@dataclass
class ObjectModel:
    name: str
    triangles: np.ndarray  # (M, 3, 3), model frame, resting on z=0
    colors: np.ndarray  # (M, 3)
    gt_points: np.ndarray  # (G, 3) dense ground-truth surface samples
    gt_colors: np.ndarray  # (G, 3)
    radius: float = 0.0  # xy footprint radius

    def __post_init__(self):
        if self.radius == 0.0 and len(self.triangles):
            self.radius = float(
                np.linalg.norm(self.triangles[:, :, :2].reshape(-1, 2), axis=1).max()
            )


@dataclass
class MotionPattern:
    kind: str = "bb"
    speed: float = 0.05  # m per step
    spin: float = np.radians(10.0)  # rad per step about own z
    curvature_max: float = np.radians(10.0)  # cbb heading turn cap, rad/step
    move_steps: int = 100  # sg
    pause_steps: int = 100  # sg

    def __post_init__(self):
        if self.kind not in PATTERNS:
            raise ValueError(f"unknown motion pattern {self.kind!r}")


@dataclass
class RigidObject:
    model: ObjectModel
    pose: Pose
    heading: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))
    speed_scale: float = 1.0
    curvature: float = 0.0
    phase: int = 0  # step counter driving sg move/pause alternation

    def world_triangles(self) -> np.ndarray:
        flat = self.model.triangles.reshape(-1, 3)
        return self.pose.apply(flat).reshape(-1, 3, 3)


def _rotate2(v: np.ndarray, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _clearance(scene: Scene, p0: np.ndarray, p1: np.ndarray, radius: float) -> float:
    seg = np.stack([p0, p1])
    return segment_segment_distance(seg, scene.obstacle_segments) - radius


def _inside_bounds(scene: Scene, p: np.ndarray, radius: float) -> bool:
    lo, hi = scene.bounds[0, :2], scene.bounds[1, :2]
    return bool(np.all(p - radius >= lo) and np.all(p + radius <= hi))


def _move_blocked(scene: Scene, obj: RigidObject, target: np.ndarray) -> bool:
    p = obj.pose.translation[:2]
    return (
        not _inside_bounds(scene, target, obj.model.radius)
        or _clearance(scene, p, target, obj.model.radius) < 0.0
    )


def step_object(
    obj: RigidObject, pattern: MotionPattern, scene: Scene, rng: np.random.Generator
) -> RigidObject:
    """Advance the object one step in place (mutates and returns ``obj``)."""
    p = obj.pose.translation[:2]
    if (
        _clearance(scene, p, p, obj.model.radius) < 0.0
        or not _inside_bounds(scene, p, obj.model.radius)
    ):
        raise InvalidStateError("object overlaps scene geometry")

    paused = False
    if pattern.kind == "sg":
        cycle = pattern.move_steps + pattern.pause_steps
        paused = (obj.phase % cycle) >= pattern.move_steps
        obj.phase += 1
    if paused:
        return obj  # fully stationary: no advance, no spin

    if pattern.kind == "cbb":
        obj.heading = _rotate2(obj.heading, obj.curvature)

    step_len = pattern.speed * obj.speed_scale
    target = p + step_len * obj.heading
    if _move_blocked(scene, obj, target):
        if pattern.kind == "fb":
            obj.heading = -obj.heading
            target = p + step_len * obj.heading
            if not _move_blocked(scene, obj, target):
                p = target
        else:
            for _ in range(MAX_HEADING_RETRIES):
                angle = rng.uniform(0.0, 2.0 * np.pi)
                heading = np.array([np.cos(angle), np.sin(angle)])
                if pattern.kind == "cbb":
                    curvature = rng.uniform(-pattern.curvature_max, pattern.curvature_max)
                    speed_scale = rng.uniform(0.5, 1.5)
                else:
                    curvature, speed_scale = obj.curvature, obj.speed_scale
                candidate = p + pattern.speed * speed_scale * heading
                if not _move_blocked(scene, obj, candidate):
                    obj.heading = heading
                    obj.curvature = curvature
                    obj.speed_scale = speed_scale
                    p = candidate
                    break
    else:
        p = target

    translation = obj.pose.translation.copy()
    translation[:2] = p
    spin = pattern.spin if pattern.kind != "fb" else 0.0
    obj.pose = Pose(obj.pose.rotation @ yaw_rotation(spin), translation)
    return obj


def load_object(path: str) -> ObjectModel:
    _, tris, colors, pts, pt_colors = _parse_records(str(path), allow_points=True)
    if len(pts) == 0:
        raise SceneFormatError(str(path), 0, "object file has no gt sample points")
    return ObjectModel(str(path), tris, colors, pts, pt_colors)


def save_object(model: ObjectModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tri, col in zip(model.triangles, model.colors):
            fh.write(
                "tri "
                + " ".join(f"{v:.6f}" for v in tri.ravel())
                + " "
                + " ".join(f"{v:.6f}" for v in col)
                + "\n"
            )
        for pt, col in zip(model.gt_points, model.gt_colors):
            fh.write(
                "pt "
                + " ".join(f"{v:.6f}" for v in pt)
                + " "
                + " ".join(f"{v:.6f}" for v in col)
                + "\n"
            )
