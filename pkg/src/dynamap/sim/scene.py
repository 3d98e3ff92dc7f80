"""Scene representation: triangle soup, axis-aligned bounds, and the
derived navigation grid.

File format (one record per line, '#' comments allowed):

    bounds xmin ymin zmin xmax ymax zmax
    tri x1 y1 z1 x2 y2 z2 x3 y3 z3 r g b

Object files use the same ``tri`` records plus ground-truth surface
samples:

    pt x y z r g b

Coordinates are meters, colors are floats in [0, 1], +z is up.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SceneFormatError

CELL_SIZE = 0.15
AGENT_RADIUS = 0.3
# obstacle triangles are those crossing the body height band
BODY_BAND = (0.05, 1.6)


@dataclass
class NavGrid:
    origin: np.ndarray  # world xy of the (0, 0) cell corner
    cell: float
    free: np.ndarray  # (ny, nx) bool

    def cell_of(self, xy) -> tuple[int, int]:
        ix = int(np.floor((xy[0] - self.origin[0]) / self.cell))
        iy = int(np.floor((xy[1] - self.origin[1]) / self.cell))
        return iy, ix

    def center(self, iy: int, ix: int) -> np.ndarray:
        return self.origin + (np.array([ix, iy]) + 0.5) * self.cell

    def in_grid(self, iy: int, ix: int) -> bool:
        return 0 <= iy < self.free.shape[0] and 0 <= ix < self.free.shape[1]

    def is_free_xy(self, xy) -> bool:
        iy, ix = self.cell_of(xy)
        return self.in_grid(iy, ix) and bool(self.free[iy, ix])


@dataclass
class Scene:
    triangles: np.ndarray  # (N, 3, 3)
    colors: np.ndarray  # (N, 3)
    bounds: np.ndarray  # (2, 3) min/max corners
    nav: NavGrid
    name: str = ""
    obstacle_segments: np.ndarray = field(default=None, repr=False)  # (S, 2, 2)
    _caches: dict = field(default_factory=dict, repr=False)


def obstacle_segments_2d(triangles: np.ndarray) -> np.ndarray:
    """xy edge segments of triangles that intersect the body height band."""
    if len(triangles) == 0:
        return np.zeros((0, 2, 2))
    zmin = triangles[:, :, 2].min(axis=1)
    zmax = triangles[:, :, 2].max(axis=1)
    keep = (zmax > BODY_BAND[0]) & (zmin < BODY_BAND[1])
    tris = triangles[keep][:, :, :2]
    edges = np.concatenate(
        [tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=0
    )
    return edges


def point_segment_distance(points: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Pairwise xy distances, points (P, 2) x segments (S, 2, 2) -> (P, S)."""
    a = segments[:, 0]
    ab = segments[:, 1] - a
    ap = points[:, None, :] - a[None, :, :]
    denom = np.einsum("sk,sk->s", ab, ab)
    denom = np.where(denom < 1e-18, 1.0, denom)
    t = np.clip(np.einsum("psk,sk->ps", ap, ab) / denom, 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    return np.linalg.norm(points[:, None, :] - closest, axis=-1)


def segment_segment_distance(seg: np.ndarray, others: np.ndarray) -> float:
    """Exact min distance between one segment (2,2) and many (S,2,2)."""
    if len(others) == 0:
        return float(np.inf)

    def cross(o, a, b):
        return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (
            a[..., 1] - o[..., 1]
        ) * (b[..., 0] - o[..., 0])

    p0, p1 = seg[0], seg[1]
    q0, q1 = others[:, 0], others[:, 1]
    d1 = cross(p0[None], p1[None], q0)
    d2 = cross(p0[None], p1[None], q1)
    d3 = cross(q0, q1, np.broadcast_to(p0, q0.shape))
    d4 = cross(q0, q1, np.broadcast_to(p1, q0.shape))
    intersects = ((d1 * d2) < 0) & ((d3 * d4) < 0)
    if intersects.any():
        return 0.0
    d_end = point_segment_distance(np.stack([p0, p1]), others).min()
    d_other = point_segment_distance(others.reshape(-1, 2), seg[None, :, :]).min()
    return float(min(d_end, d_other))


def build_nav_grid(
    triangles: np.ndarray, bounds: np.ndarray, cell: float = CELL_SIZE
) -> NavGrid:
    origin = bounds[0, :2].copy()
    extent = bounds[1, :2] - bounds[0, :2]
    nx = max(1, int(np.ceil(extent[0] / cell)))
    ny = max(1, int(np.ceil(extent[1] / cell)))
    ys, xs = np.mgrid[0:ny, 0:nx]
    centers = origin[None, :] + (np.stack([xs.ravel(), ys.ravel()], axis=1) + 0.5) * cell
    segments = obstacle_segments_2d(triangles)
    if len(segments):
        dist = point_segment_distance(centers, segments).min(axis=1)
        free = dist >= AGENT_RADIUS
    else:
        free = np.ones(len(centers), dtype=bool)
    inside = (
        (centers[:, 0] >= bounds[0, 0])
        & (centers[:, 0] <= bounds[1, 0])
        & (centers[:, 1] >= bounds[0, 1])
        & (centers[:, 1] <= bounds[1, 1])
    )
    return NavGrid(origin, cell, (free & inside).reshape(ny, nx))


def make_scene(
    triangles: np.ndarray, colors: np.ndarray, bounds: np.ndarray, name: str = ""
) -> Scene:
    triangles = np.asarray(triangles, dtype=float).reshape(-1, 3, 3)
    colors = np.asarray(colors, dtype=float).reshape(-1, 3)
    bounds = np.asarray(bounds, dtype=float).reshape(2, 3)
    return Scene(
        triangles=triangles,
        colors=colors,
        bounds=bounds,
        nav=build_nav_grid(triangles, bounds),
        name=name,
        obstacle_segments=obstacle_segments_2d(triangles),
    )


def _parse_records(path: str, allow_points: bool):
    bounds = None
    tris, tri_colors, pts, pt_colors = [], [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            tag, values = fields[0], fields[1:]
            try:
                numbers = [float(v) for v in values]
            except ValueError:
                raise SceneFormatError(path, lineno, f"non-numeric field in {tag!r} record")
            if tag == "bounds":
                if len(numbers) != 6:
                    raise SceneFormatError(path, lineno, "bounds needs 6 numbers")
                bounds = np.array(numbers).reshape(2, 3)
            elif tag == "tri":
                if len(numbers) != 12:
                    raise SceneFormatError(path, lineno, "tri needs 9 coords + rgb")
                tris.append(np.array(numbers[:9]).reshape(3, 3))
                tri_colors.append(numbers[9:])
            elif tag == "pt":
                if not allow_points:
                    raise SceneFormatError(path, lineno, "pt record not valid in a scene file")
                if len(numbers) != 6:
                    raise SceneFormatError(path, lineno, "pt needs xyz + rgb")
                pts.append(numbers[:3])
                pt_colors.append(numbers[3:])
            else:
                raise SceneFormatError(path, lineno, f"unknown record {tag!r}")
    if not tris:
        raise SceneFormatError(path, 0, "no triangles")
    return bounds, np.array(tris), np.array(tri_colors), np.array(pts), np.array(pt_colors)


def load_scene(path: str) -> Scene:
    bounds, tris, colors, _, _ = _parse_records(str(path), allow_points=False)
    if bounds is None:
        raise SceneFormatError(str(path), 0, "missing bounds record")
    scene = make_scene(tris, colors, bounds, name=str(path))
    if not scene.nav.free.any():
        raise SceneFormatError(str(path), 0, "no navigable cells")
    return scene


def save_scene(scene: Scene, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        b = scene.bounds
        fh.write("bounds " + " ".join(f"{v:.6f}" for v in b.ravel()) + "\n")
        for tri, col in zip(scene.triangles, scene.colors):
            fh.write(
                "tri "
                + " ".join(f"{v:.6f}" for v in tri.ravel())
                + " "
                + " ".join(f"{v:.6f}" for v in col)
                + "\n"
            )
