"""Colored point clouds and the basic geometry ops on them.

Back-projection inverts the renderer's pinhole model exactly:
pixel (u, v) with depth z maps to ((u - cx) z / fx, (v - cy) z / fy, z)
in the camera frame. Voxel downsampling keeps the first point seen in
each voxel so results are order-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree


@dataclass
class ColoredCloud:
    points: np.ndarray  # (N, 3) meters
    colors: np.ndarray  # (N, 3) rgb in [0, 1]
    normals: np.ndarray | None = None  # (N, 3) unit vectors when present

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.colors = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        if len(self.points) != len(self.colors):
            raise ValueError("points and colors length mismatch")

    def __len__(self) -> int:
        return len(self.points)

    @staticmethod
    def empty() -> "ColoredCloud":
        return ColoredCloud(np.zeros((0, 3)), np.zeros((0, 3)))

    def transformed(self, pose) -> "ColoredCloud":
        pts = pose.apply(self.points) if len(self.points) else self.points
        nrm = self.normals @ pose.rotation.T if self.normals is not None else None
        return ColoredCloud(pts, self.colors.copy(), nrm)


def backproject_mask(frame, intr) -> ColoredCloud:
    """Camera-frame cloud of the masked pixels (empty mask -> empty cloud)."""
    vs, us = np.nonzero(frame.mask & (frame.depth > 0.0))
    if len(vs) == 0:
        return ColoredCloud.empty()
    z = frame.depth[vs, us]
    pts = np.stack(
        [(us - intr.cx) * z / intr.fx, (vs - intr.cy) * z / intr.fy, z], axis=1
    )
    return ColoredCloud(pts, frame.color[vs, us])


def project_points(points: np.ndarray, intr):
    """Pinhole forward map: (N,3) camera-frame points -> (u, v, z) arrays."""
    z = points[:, 2]
    safe = np.where(z > 0.0, z, 1.0)
    u = points[:, 0] / safe * intr.fx + intr.cx
    v = points[:, 1] / safe * intr.fy + intr.cy
    return u, v, z


def voxel_keys(points: np.ndarray, voxel: float) -> np.ndarray:
    return np.floor(points / voxel).astype(np.int64)


def voxel_downsample_indices(points: np.ndarray, voxel: float) -> np.ndarray:
    """Indices of the first point in each occupied voxel, in input order."""
    if len(points) == 0:
        return np.zeros(0, dtype=np.int64)
    keys = voxel_keys(points, voxel)
    _, first = np.unique(keys, axis=0, return_index=True)
    return np.sort(first)


def voxel_downsample(cloud: ColoredCloud, voxel: float) -> ColoredCloud:
    idx = voxel_downsample_indices(cloud.points, voxel)
    normals = cloud.normals[idx] if cloud.normals is not None else None
    return ColoredCloud(cloud.points[idx], cloud.colors[idx], normals)


def intensity(colors: np.ndarray) -> np.ndarray:
    return colors.mean(axis=1)


def estimate_normals(
    points: np.ndarray,
    k: int = 12,
    viewpoint: np.ndarray | None = None,
    tree: cKDTree | None = None,
    query: np.ndarray | None = None,
) -> np.ndarray:
    """Plane-fit normals from the k nearest neighbors.

    ``query`` restricts the computation to a subset of indices while the
    neighborhoods still come from the full cloud. Orientation is flipped
    toward ``viewpoint`` when given; registration residuals are squared,
    so orientation never changes them.
    """
    if tree is None:
        tree = cKDTree(points)
    idx = np.arange(len(points)) if query is None else query
    if len(idx) == 0:
        return np.zeros((0, 3))
    kk = min(k, len(points))
    _, nbr = tree.query(points[idx], k=kk)
    nbr = nbr.reshape(len(idx), kk)
    local = points[nbr]  # (Q, kk, 3)
    centered = local - local.mean(axis=1, keepdims=True)
    cov = np.einsum("qki,qkj->qij", centered, centered)
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]  # smallest-eigenvalue direction
    if viewpoint is not None:
        toward = viewpoint[None, :] - points[idx]
        flip = np.einsum("qi,qi->q", normals, toward) < 0.0
        normals[flip] *= -1.0
    return normals


def intensity_gradients(
    points: np.ndarray,
    intens: np.ndarray,
    normals: np.ndarray,
    k: int = 12,
    tree: cKDTree | None = None,
    query: np.ndarray | None = None,
) -> np.ndarray:
    """Per-point tangent-plane gradient of intensity.

    Least-squares fit of c_j - c_i against the neighbor offsets projected
    into the tangent plane at point i; the gradient itself is constrained
    to the plane by projecting out the normal component. The fit keeps
    the raw sample as its anchor on purpose: re-anchoring at a local
    linear fit smears hard texture edges over the neighborhood radius
    and washes out the color signal that pins sliding directions.
    """
    if tree is None:
        tree = cKDTree(points)
    idx = np.arange(len(points)) if query is None else query
    if len(idx) == 0:
        return np.zeros((0, 3))
    kk = min(k, len(points))
    _, nbr = tree.query(points[idx], k=kk)
    nbr = nbr.reshape(len(idx), kk)
    offsets = points[nbr] - points[idx][:, None, :]  # (Q, kk, 3)
    n = normals[: len(points)][idx] if query is not None else normals
    # project offsets into each tangent plane
    along = np.einsum("qkj,qj->qk", offsets, n)
    tang = offsets - along[..., None] * n[:, None, :]
    dc = intens[nbr] - intens[idx][:, None]
    ata = np.einsum("qki,qkj->qij", tang, tang) + 1e-9 * np.eye(3)[None]
    atb = np.einsum("qki,qk->qi", tang, dc)
    grad = np.linalg.solve(ata, atb[..., None])[..., 0]
    along_n = np.einsum("qi,qi->q", grad, n)
    return grad - along_n[:, None] * n
