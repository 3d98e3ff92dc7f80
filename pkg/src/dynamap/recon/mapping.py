"""Object-frame map: base-frame initialization, frame integration,
and keyframe bookkeeping.

All accumulated geometry lives in the base frame fixed at first
detection (translation = cloud centroid, z = world up, x = the
ground-plane principal direction pointed toward the camera). Each new
masked frame is back-projected, moved to the base frame with the pose
the base had at detection, and registered against the accumulated
cloud; the recovered alignment both merges the new points and yields an
absolute pose measurement for the motion filter:

    raw    = base_from_world . world_from_cam . cloud_cam
    model += T_align . raw
    world_from_object_meas = world_from_base . inverse(T_align)

(The alignment maps the raw cloud onto the model, so the object's
motion since detection is its inverse.)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..errors import InsufficientPointsError
from ..se3 import Pose
from .cloud import (
    ColoredCloud,
    backproject_mask,
    estimate_normals,
    intensity,
    intensity_gradients,
    project_points,
    voxel_downsample,
    voxel_keys,
)
from .register import (
    COLOR_CUTOFF,
    PreparedTarget,
    Registration,
    coarse_register,
    prepare_target,
    refine_colored_icp,
)

MERGE_VOXEL = 0.01
COARSE_VOXEL = 0.02
MIN_INIT_POINTS = 10
PCA_RATIO_MIN = 1.05
KEYFRAME_CAP = 200
OVERLAP_MIN = 0.5
OVERLAP_TOP = 20
TAU_D = 0.02


@dataclass
class ObjectBaseFrame:
    world_from_base: Pose
    detection_step: int
    degenerate: bool = False  # ground-plane PCA was ambiguous


@dataclass
class Keyframe:
    id: int
    step: int
    cloud_in_base: ColoredCloud
    cam_pose: Pose
    align: Pose
    last_eta: float = 1.0


def initialize_object_frame(
    cloud_cam: ColoredCloud, cam_pose: Pose, step: int = 0
) -> ObjectBaseFrame:
    """Base frame from the first masked cloud: centroid + ground-plane PCA."""
    if len(cloud_cam) < MIN_INIT_POINTS:
        raise InsufficientPointsError("object frame needs >= 10 points")
    world_pts = cam_pose.apply(cloud_cam.points)
    centroid = world_pts.mean(axis=0)
    flat = world_pts[:, :2] - centroid[:2]
    cov = flat.T @ flat
    vals, vecs = np.linalg.eigh(cov)
    degenerate = vals[0] > 0.0 and vals[1] / max(vals[0], 1e-30) < PCA_RATIO_MIN
    if degenerate:
        # ambiguous footprint: use the camera forward direction instead
        fwd = cam_pose.rotation[:2, 2]
        x2 = fwd / max(np.linalg.norm(fwd), 1e-12)
    else:
        x2 = vecs[:, 1]  # dominant ground-plane direction
        toward_cam = cam_pose.translation[:2] - centroid[:2]
        if float(x2 @ toward_cam) < 0.0:
            x2 = -x2
    x_axis = np.array([x2[0], x2[1], 0.0])
    z_axis = np.array([0.0, 0.0, 1.0])
    y_axis = np.cross(z_axis, x_axis)
    rot = np.stack([x_axis, y_axis, z_axis], axis=1)
    return ObjectBaseFrame(Pose(rot, centroid), step, degenerate)


@dataclass
class ObjectMap:
    base: ObjectBaseFrame
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    colors: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    normals: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    intens: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gradients: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    keyframes: list = field(default_factory=list)
    _fine_voxels: set = field(default_factory=set)
    _coarse_idx: list = field(default_factory=list)
    _coarse_voxels: set = field(default_factory=set)
    _target: PreparedTarget | None = None
    _coarse_target: PreparedTarget | None = None
    _next_kf: int = 0

    def __len__(self) -> int:
        return len(self.points)

    def cloud(self) -> ColoredCloud:
        return ColoredCloud(self.points.copy(), self.colors.copy(), self.normals.copy())

    def coarse_cloud(self) -> ColoredCloud:
        idx = np.asarray(self._coarse_idx, dtype=np.int64)
        return ColoredCloud(self.points[idx], self.colors[idx])

    def merge(self, cloud_in_base: ColoredCloud) -> int:
        """Insert points whose 1 cm voxel is new; returns how many."""
        if len(cloud_in_base) == 0:
            return 0
        keys = voxel_keys(cloud_in_base.points, MERGE_VOXEL)
        fresh = []
        for row, key in enumerate(map(tuple, keys)):
            if key not in self._fine_voxels:
                self._fine_voxels.add(key)
                fresh.append(row)
        if not fresh:
            return 0
        fresh = np.asarray(fresh, dtype=np.int64)
        start = len(self.points)
        self.points = np.concatenate([self.points, cloud_in_base.points[fresh]])
        self.colors = np.concatenate([self.colors, cloud_in_base.colors[fresh]])
        self.intens = np.concatenate(
            [self.intens, intensity(cloud_in_base.colors[fresh])]
        )
        ckeys = voxel_keys(self.points[start:], COARSE_VOXEL)
        for row, key in enumerate(map(tuple, ckeys)):
            if key not in self._coarse_voxels:
                self._coarse_voxels.add(key)
                self._coarse_idx.append(start + row)
        # normals and the local color model for the new points, against
        # the merged cloud; existing points keep theirs (the surface
        # they describe has not changed)
        tree = cKDTree(self.points)
        new_idx = np.arange(start, len(self.points))
        normals = estimate_normals(self.points, tree=tree, query=new_idx)
        self.normals = np.concatenate([self.normals, normals])
        grads = intensity_gradients(
            self.points, self.intens, self.normals, tree=tree, query=new_idx
        )
        self.gradients = np.concatenate([self.gradients, grads])
        self._target = PreparedTarget(
            self.points, self.normals, self.intens, self.gradients, tree
        )
        return len(fresh)

    def target(self) -> PreparedTarget:
        if self._target is None or self._target.points is not self.points:
            tree = cKDTree(self.points)
            self._target = PreparedTarget(
                self.points, self.normals, self.intens, self.gradients, tree
            )
        return self._target

    def coarse_target(self) -> PreparedTarget:
        """Prepared 2 cm subset, reusing the per-point map attributes."""
        if self._coarse_target is None or len(self._coarse_target.points) != len(
            self._coarse_idx
        ):
            idx = np.asarray(self._coarse_idx, dtype=np.int64)
            self._coarse_target = PreparedTarget(
                self.points[idx],
                self.normals[idx],
                self.intens[idx],
                self.gradients[idx],
                cKDTree(self.points[idx]),
            )
        return self._coarse_target

    def add_keyframe(self, step: int, cloud_in_base: ColoredCloud, cam_pose: Pose, align: Pose) -> Keyframe:
        kf = Keyframe(self._next_kf, step, cloud_in_base, cam_pose, align)
        self._next_kf += 1
        self.keyframes.append(kf)
        if len(self.keyframes) > KEYFRAME_CAP:
            victim = min(self.keyframes, key=lambda f: (f.last_eta, f.step))
            self.keyframes.remove(victim)
        return kf


def integrate_frame(
    omap: ObjectMap,
    frame,
    intr,
    cam_pose: Pose,
    predicted_world_pose: Pose,
    step: int = 0,
    merge: bool = True,
):
    """Register one masked frame into the map.

    Returns (pose measurement or None, Registration or None). The
    measurement is withheld when registration fails; the map is then
    left untouched and the filter should run predict-only.

    ``merge=False`` registers and measures without growing the map or
    keyframe store. The controller passes the confidence gate here:
    while the filter is still converging its velocity estimate the
    motion priors (and hence occasional measurements) can be tens of
    millimetres off, and points merged at such offsets would corrupt
    the map permanently, whereas the filter itself absorbs a bad
    measurement within its noise model.
    """
    cloud_cam = backproject_mask(frame, intr)
    if len(cloud_cam) == 0:
        return None, None
    base = omap.base.world_from_base
    cam_in_base = base.inverse().compose(cam_pose)
    raw = cloud_cam.transformed(cam_in_base)
    fine = voxel_downsample(raw, MERGE_VOXEL)
    if len(omap) == 0:
        omap.merge(fine)
        omap.add_keyframe(step, fine, cam_pose, Pose.identity())
        return base.copy(), Registration(Pose.identity(), 0.0, 1.0, True)
    prior = predicted_world_pose.inverse().compose(base)
    coarse_src = voxel_downsample(raw, COARSE_VOXEL)
    dst_coarse = omap.coarse_cloud()
    try:
        coarse = coarse_register(coarse_src, dst_coarse, prior)
    except InsufficientPointsError:
        return None, None
    refined = refine_colored_icp(
        fine, omap.cloud(), coarse.transform, target=omap.target(), alt_inits=(prior,)
    )
    if not refined.converged:
        return None, None
    align = refined.transform
    if merge:
        omap.merge(fine.transformed(align))
        omap.add_keyframe(step, fine.transformed(align), cam_pose, align)
    measurement = base.compose(align.inverse())
    return measurement, refined


def keyframe_overlap(
    kf: Keyframe,
    frame,
    intr,
    cam_pose: Pose,
    meas_pose: Pose,
    tau_d: float = TAU_D,
) -> float:
    """Fraction of the current mask explained by the keyframe's points."""
    mask_px = int(frame.mask.sum())
    if mask_px == 0 or len(kf.cloud_in_base) == 0:
        return 0.0
    world = meas_pose.apply(kf.cloud_in_base.points)
    cam = cam_pose.inverse().apply(world)
    u, v, z = project_points(cam, intr)
    ui = np.rint(u).astype(np.int64)
    vi = np.rint(v).astype(np.int64)
    res = frame.res
    ok = (z > 0.0) & (ui >= 0) & (ui < res) & (vi >= 0) & (vi < res)
    if not ok.any():
        return 0.0
    ui, vi, z = ui[ok], vi[ok], z[ok]
    hit = frame.mask[vi, ui] & (np.abs(z - frame.depth[vi, ui]) <= tau_d)
    covered = np.unique(vi[hit] * res + ui[hit])
    return min(1.0, len(covered) / mask_px)


def select_keyframes(
    store: list,
    frame,
    intr,
    cam_pose: Pose,
    meas_pose: Pose,
    current_id: int | None = None,
) -> list:
    """Keyframes with overlap >= 0.5, best first, capped at 20."""
    scored = []
    for kf in store:
        if current_id is not None and kf.id == current_id:
            continue
        eta = keyframe_overlap(kf, frame, intr, cam_pose, meas_pose)
        kf.last_eta = eta
        if eta >= OVERLAP_MIN:
            scored.append((eta, kf.step, kf))
    scored.sort(key=lambda t: (-t[0], -t[1]))
    return [kf for _, _, kf in scored[:OVERLAP_TOP]]
