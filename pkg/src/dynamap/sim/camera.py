"""Pinhole ray-cast renderer.

Intrinsics are square: fx = fy = cx = cy = res/2 (a 90 degree field of
view). Pixel (u, v) casts the camera-frame direction
((u - cx)/fx, (v - cy)/fy, 1), so the returned depth is the camera-frame
z of the first hit, which back-projection inverts exactly.

The hot Moller-Trumbore loop is JIT-compiled; ``cast_rays_reference``
is the plain-numpy twin with identical arithmetic, kept as the oracle
the kernel is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..se3 import Pose
from .objects import RigidObject
from .scene import Scene

DET_EPS = 1e-12
T_MIN = 1e-9
T_MISS = 1e30
SCENE_CACHE_LIMIT = 400


@dataclass(frozen=True)
class Intrinsics:
    res: int = 128

    @property
    def fx(self) -> float:
        return self.res / 2.0

    @property
    def fy(self) -> float:
        return self.res / 2.0

    @property
    def cx(self) -> float:
        return self.res / 2.0

    @property
    def cy(self) -> float:
        return self.res / 2.0


@dataclass
class Frame:
    depth: np.ndarray  # (res, res) camera-z depth, 0 where no hit
    color: np.ndarray  # (res, res, 3)
    mask: np.ndarray  # (res, res) bool, True on object pixels
    cam_pose: Pose
    step: int = 0

    @property
    def res(self) -> int:
        return self.depth.shape[0]


@njit(cache=True)
def cast_rays(origin, dirs, v0, e1, e2):  # pragma: no cover - exercised via wrapper
    n_rays = dirs.shape[0]
    n_tri = v0.shape[0]
    t_hit = np.full(n_rays, T_MISS)
    index = np.full(n_rays, -1, np.int64)
    for r in range(n_rays):
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        best = T_MISS
        best_i = -1
        for i in range(n_tri):
            px = dy * e2[i, 2] - dz * e2[i, 1]
            py = dz * e2[i, 0] - dx * e2[i, 2]
            pz = dx * e2[i, 1] - dy * e2[i, 0]
            det = e1[i, 0] * px + e1[i, 1] * py + e1[i, 2] * pz
            if -DET_EPS < det < DET_EPS:
                continue
            inv = 1.0 / det
            sx = origin[0] - v0[i, 0]
            sy = origin[1] - v0[i, 1]
            sz = origin[2] - v0[i, 2]
            u = (sx * px + sy * py + sz * pz) * inv
            if u < 0.0 or u > 1.0:
                continue
            qx = sy * e1[i, 2] - sz * e1[i, 1]
            qy = sz * e1[i, 0] - sx * e1[i, 2]
            qz = sx * e1[i, 1] - sy * e1[i, 0]
            v = (dx * qx + dy * qy + dz * qz) * inv
            if v < 0.0 or u + v > 1.0:
                continue
            t = (e2[i, 0] * qx + e2[i, 1] * qy + e2[i, 2] * qz) * inv
            if T_MIN < t < best:
                best = t
                best_i = i
        t_hit[r] = best
        index[r] = best_i
    return t_hit, index


def cast_rays_reference(origin, dirs, v0, e1, e2):
    """Vectorized numpy twin of :func:`cast_rays`.

    Every product and sum is written out componentwise in the same
    order as the kernel so the two agree bit for bit (einsum and
    np.cross accumulate in a different order and drift by an ulp).
    """
    if len(v0) == 0:
        return np.full(len(dirs), T_MISS), np.full(len(dirs), -1, np.int64)
    dx, dy, dz = dirs[:, 0:1], dirs[:, 1:2], dirs[:, 2:3]
    e1x, e1y, e1z = e1[None, :, 0], e1[None, :, 1], e1[None, :, 2]
    e2x, e2y, e2z = e2[None, :, 0], e2[None, :, 1], e2[None, :, 2]
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    ok = ~((-DET_EPS < det) & (det < DET_EPS))
    inv = 1.0 / np.where(ok, det, 1.0)
    sx = (origin[0] - v0[:, 0])[None, :]
    sy = (origin[1] - v0[:, 1])[None, :]
    sz = (origin[2] - v0[:, 2])[None, :]
    u = (sx * px + sy * py + sz * pz) * inv
    ok &= ~((u < 0.0) | (u > 1.0))
    qx = sy * e1z - sz * e1y
    qy = sz * e1x - sx * e1z
    qz = sx * e1y - sy * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    ok &= ~((v < 0.0) | (u + v > 1.0))
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    ok &= t > T_MIN
    t = np.where(ok, t, T_MISS)
    idx = np.argmin(t, axis=1)
    best = t[np.arange(len(dirs)), idx]
    return best, np.where(best < T_MISS, idx, -1)


def mesh_arrays(triangles: np.ndarray):
    tris = np.ascontiguousarray(triangles, dtype=np.float64)
    if len(tris) == 0:
        z = np.zeros((0, 3))
        return z, z.copy(), z.copy()
    v0 = np.ascontiguousarray(tris[:, 0])
    e1 = np.ascontiguousarray(tris[:, 1] - tris[:, 0])
    e2 = np.ascontiguousarray(tris[:, 2] - tris[:, 0])
    return v0, e1, e2


_DIRS_CACHE: dict[int, np.ndarray] = {}


def camera_directions(intr: Intrinsics) -> np.ndarray:
    dirs = _DIRS_CACHE.get(intr.res)
    if dirs is None:
        v, u = np.mgrid[0 : intr.res, 0 : intr.res]
        dirs = np.stack(
            [
                (u.ravel() - intr.cx) / intr.fx,
                (v.ravel() - intr.cy) / intr.fy,
                np.ones(intr.res * intr.res),
            ],
            axis=1,
        )
        _DIRS_CACHE[intr.res] = dirs
    return dirs


def _aabb_cull(origin, dirs, lo, hi):
    """Conservative slab test; True where the ray may hit the box."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = (lo[None, :] - 1e-9 - origin[None, :]) / dirs
        t1 = (hi[None, :] + 1e-9 - origin[None, :]) / dirs
    tmin = np.nanmax(np.minimum(t0, t1), axis=1)
    tmax = np.nanmin(np.maximum(t0, t1), axis=1)
    inside = np.all((origin >= lo - 1e-9) & (origin <= hi + 1e-9))
    if inside:
        return np.ones(len(dirs), dtype=bool)
    return tmax >= np.maximum(tmin, 0.0)


def _scene_layer(scene: Scene, cam_pose: Pose, intr: Intrinsics, dirs_world):
    cache = scene._caches.setdefault("render", {})
    key = (intr.res, cam_pose.rotation.tobytes(), cam_pose.translation.tobytes())
    hitdata = cache.get(key)
    if hitdata is None:
        mesh = scene._caches.get("mesh")
        if mesh is None or mesh[3] != len(scene.triangles):
            mesh = (*mesh_arrays(scene.triangles), len(scene.triangles))
            scene._caches["mesh"] = mesh
        t, idx = cast_rays(cam_pose.translation, dirs_world, mesh[0], mesh[1], mesh[2])
        if len(cache) >= SCENE_CACHE_LIMIT:
            cache.pop(next(iter(cache)))
        cache[key] = hitdata = (t, idx)
    return hitdata


def render_frame(
    scene: Scene,
    obj: RigidObject | None,
    cam_pose: Pose,
    intr: Intrinsics = Intrinsics(),
    step: int = 0,
) -> Frame:
    """Ray-cast scene and object layers and composite by depth."""
    dirs_cam = camera_directions(intr)
    dirs_world = np.ascontiguousarray(dirs_cam @ cam_pose.rotation.T)
    origin = cam_pose.translation

    scene_t, scene_idx = _scene_layer(scene, cam_pose, intr, dirs_world)

    n = len(dirs_cam)
    obj_t = np.full(n, T_MISS)
    obj_idx = np.full(n, -1, np.int64)
    if obj is not None and len(obj.model.triangles):
        world_tris = obj.world_triangles()
        flat = world_tris.reshape(-1, 3)
        maybe = _aabb_cull(origin, dirs_world, flat.min(axis=0), flat.max(axis=0))
        if maybe.any():
            v0, e1, e2 = mesh_arrays(world_tris)
            sub_t, sub_idx = cast_rays(
                origin, np.ascontiguousarray(dirs_world[maybe]), v0, e1, e2
            )
            obj_t[maybe] = sub_t
            obj_idx[maybe] = sub_idx

    object_wins = obj_t < scene_t
    depth = np.where(object_wins, obj_t, scene_t)
    mask = object_wins & (obj_t < T_MISS)
    hit_any = depth < T_MISS

    color = np.zeros((n, 3))
    scene_hits = hit_any & ~object_wins & (scene_idx >= 0)
    if scene_hits.any():
        color[scene_hits] = scene.colors[scene_idx[scene_hits]]
    if mask.any():
        color[mask] = obj.model.colors[obj_idx[mask]]

    depth = np.where(hit_any, depth, 0.0)
    res = intr.res
    return Frame(
        depth=depth.reshape(res, res),
        color=color.reshape(res, res, 3),
        mask=mask.reshape(res, res),
        cam_pose=cam_pose.copy(),
        step=step,
    )
