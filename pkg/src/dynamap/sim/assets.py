"""Procedurally built bundled scenes and object models.

Three scenes with increasing clutter (an empty room, a pillared hall,
and a divided yard with narrow passages) and two asymmetric, distinctly
colored objects. Everything is deterministic: no RNG is involved, so
repeated construction is bit-identical. Ground-truth surface samples
are laid out on a 2 mm lattice per triangle.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .objects import ObjectModel
from .scene import Scene, make_scene

WALL_HEIGHT = 2.0
GT_SPACING = 0.002

SCENE_NAMES = ("open_room", "pillar_hall", "narrow_yard")
OBJECT_NAMES = ("tower", "drum")

# muted wall tones, cycled per wall segment
_WALL_TONES = [
    (0.62, 0.60, 0.58),
    (0.55, 0.58, 0.62),
    (0.66, 0.63, 0.55),
    (0.58, 0.62, 0.57),
]

# saturated object face palette, cycled per face
_FACE_TONES = [
    (0.85, 0.20, 0.15),
    (0.15, 0.65, 0.25),
    (0.15, 0.35, 0.85),
    (0.90, 0.75, 0.10),
    (0.10, 0.70, 0.75),
    (0.80, 0.25, 0.75),
    (0.95, 0.50, 0.15),
    (0.35, 0.20, 0.80),
]


def _quad(a, b, c, d):
    """Two triangles covering the quad a-b-c-d (in order)."""
    return [np.array([a, b, c]), np.array([a, c, d])]


def _wall(x0, y0, x1, y1, color, z0=0.0, z1=WALL_HEIGHT):
    tris = _quad(
        (x0, y0, z0), (x1, y1, z0), (x1, y1, z1), (x0, y0, z1)
    )
    return tris, [color, color]


def _tile_shade(base, i, j):
    """Deterministic per-tile brightness modulation (gives in-face texture)."""
    f = 0.82 + 0.12 * ((i + j) % 2) + 0.04 * (i % 2)
    return tuple(min(1.0, c * f) for c in base)


def _tiled_quad(corner, eu, ev, color, nu=2, nv=2):
    """Quad spanned by corner + u*eu + v*ev split into shaded tiles."""
    corner = np.asarray(corner, dtype=float)
    eu = np.asarray(eu, dtype=float)
    ev = np.asarray(ev, dtype=float)
    tris, cols = [], []
    for i in range(nu):
        for j in range(nv):
            a = corner + eu * (i / nu) + ev * (j / nv)
            b = corner + eu * ((i + 1) / nu) + ev * (j / nv)
            c = corner + eu * ((i + 1) / nu) + ev * ((j + 1) / nv)
            d = corner + eu * (i / nu) + ev * ((j + 1) / nv)
            tris += _quad(a, b, c, d)
            shade = _tile_shade(color, i, j)
            cols += [shade, shade]
    return tris, cols


def _pillar(cx, cy, half, tone):
    tris, cols = [], []
    corners = [
        (cx - half, cy - half),
        (cx + half, cy - half),
        (cx + half, cy + half),
        (cx - half, cy + half),
    ]
    for k in range(4):
        x0, y0 = corners[k]
        x1, y1 = corners[(k + 1) % 4]
        t, c = _wall(x0, y0, x1, y1, tone)
        tris += t
        cols += c
    return tris, cols


def _room(width, depth):
    tris, cols = [], []
    ring = [(0, 0, width, 0), (width, 0, width, depth), (width, depth, 0, depth), (0, depth, 0, 0)]
    for k, (x0, y0, x1, y1) in enumerate(ring):
        t, c = _wall(x0, y0, x1, y1, _WALL_TONES[k % len(_WALL_TONES)])
        tris += t
        cols += c
    return tris, cols


def _build_open_room() -> Scene:
    tris, cols = _room(8.0, 6.0)
    return make_scene(tris, cols, [[0, 0, 0], [8, 6, WALL_HEIGHT]], name="open_room")


def _build_pillar_hall() -> Scene:
    tris, cols = _room(9.0, 7.0)
    for k, (cx, cy) in enumerate([(2.6, 2.1), (6.3, 4.8), (4.6, 1.4), (2.3, 5.2)]):
        t, c = _pillar(cx, cy, 0.25, _WALL_TONES[(k + 1) % len(_WALL_TONES)])
        tris += t
        cols += c
    return make_scene(tris, cols, [[0, 0, 0], [9, 7, WALL_HEIGHT]], name="pillar_hall")


def _build_narrow_yard() -> Scene:
    tris, cols = _room(10.0, 5.0)
    dividers = [
        (3.4, 0.0, 3.4, 3.1),
        (6.6, 5.0, 6.6, 1.9),
        (8.4, 0.0, 8.4, 2.3),
    ]
    for k, (x0, y0, x1, y1) in enumerate(dividers):
        t, c = _wall(x0, y0, x1, y1, _WALL_TONES[(k + 2) % len(_WALL_TONES)])
        tris += t
        cols += c
    return make_scene(tris, cols, [[0, 0, 0], [10, 5, WALL_HEIGHT]], name="narrow_yard")


def _box_faces(cx, cy, z0, z1, sx, sy, tone_offset=0, skip_bottom=True):
    """Axis-aligned box as tiled faces (bottom omitted: it rests on the floor)."""
    hx, hy = sx / 2.0, sy / 2.0
    tris, cols = [], []
    faces = [
        ((cx + hx, cy - hy, z0), (0, 2 * hy, 0), (0, 0, z1 - z0)),  # +x
        ((cx - hx, cy + hy, z0), (0, -2 * hy, 0), (0, 0, z1 - z0)),  # -x
        ((cx - hx, cy - hy, z0), (2 * hx, 0, 0), (0, 0, z1 - z0)),  # -y
        ((cx + hx, cy + hy, z0), (-2 * hx, 0, 0), (0, 0, z1 - z0)),  # +y
        ((cx - hx, cy - hy, z1), (2 * hx, 0, 0), (0, 2 * hy, 0)),  # top
    ]
    if not skip_bottom:
        faces.append(((cx - hx, cy + hy, z0), (2 * hx, 0, 0), (0, -2 * hy, 0)))
    for k, (corner, eu, ev) in enumerate(faces):
        t, c = _tiled_quad(corner, eu, ev, _FACE_TONES[(k + tone_offset) % len(_FACE_TONES)])
        tris += t
        cols += c
    return tris, cols


def _build_tower() -> ObjectModel:
    tris, cols = _box_faces(0.0, 0.0, 0.0, 0.5, 0.56, 0.44, tone_offset=0)
    t, c = _box_faces(0.08, 0.02, 0.5, 1.05, 0.36, 0.30, tone_offset=3)
    tris += t
    cols += c
    # wedge nose on the +x face of the base box
    apex0 = (0.44, -0.10, 0.02)
    apex1 = (0.44, 0.10, 0.02)
    base = [(0.28, -0.14, 0.0), (0.28, 0.14, 0.0), (0.28, 0.14, 0.34), (0.28, -0.14, 0.34)]
    wedge_tone = _FACE_TONES[6]
    wedge = [
        np.array([base[0], base[1], apex1]),
        np.array([base[0], apex1, apex0]),
        np.array([base[3], apex0, apex1]),
        np.array([base[3], apex1, base[2]]),
        np.array([base[0], apex0, base[3]]),
        np.array([base[1], base[2], apex1]),
    ]
    tris += wedge
    cols += [wedge_tone] * len(wedge)
    return _finish_object("tower", tris, cols)


def _build_drum() -> ObjectModel:
    tris, cols = [], []
    n_side = 8
    radius = 0.28
    height = 0.85
    angles = np.linspace(0.0, 2 * np.pi, n_side, endpoint=False)
    rim = [(radius * np.cos(a), radius * np.sin(a)) for a in angles]
    for k in range(n_side):
        x0, y0 = rim[k]
        x1, y1 = rim[(k + 1) % n_side]
        t, c = _tiled_quad(
            (x0, y0, 0.0),
            (x1 - x0, y1 - y0, 0.0),
            (0.0, 0.0, height),
            _FACE_TONES[k % len(_FACE_TONES)],
        )
        tris += t
        cols += c
    apex = np.array([0.07, -0.05, 1.02])  # off-center roof apex for asymmetry
    for k in range(n_side):
        x0, y0 = rim[k]
        x1, y1 = rim[(k + 1) % n_side]
        tris.append(np.array([(x0, y0, height), (x1, y1, height), apex]))
        cols.append(_tile_shade(_FACE_TONES[(k + 3) % len(_FACE_TONES)], k, 0))
    # fin sticking out along +x
    t, c = _box_faces(0.36, 0.0, 0.25, 0.62, 0.18, 0.08, tone_offset=5)
    tris += t
    cols += c
    return _finish_object("drum", tris, cols)


def sample_triangle_lattice(tri: np.ndarray, spacing: float = GT_SPACING) -> np.ndarray:
    """Evenly spaced surface samples on one triangle via an in-plane lattice."""
    a, b, c = tri
    e1, e2 = b - a, c - a
    n1 = np.linalg.norm(e1)
    if n1 < 1e-12:
        return np.zeros((0, 3))
    x_hat = e1 / n1
    e2_perp = e2 - np.dot(e2, x_hat) * x_hat
    n2 = np.linalg.norm(e2_perp)
    if n2 < 1e-12:
        return np.zeros((0, 3))
    y_hat = e2_perp / n2
    # triangle corners in the local plane basis
    p2 = np.array([np.dot(e2, x_hat), n2])
    xs = np.arange(spacing / 2, max(n1, p2[0] + 1e-9), spacing)
    ys = np.arange(spacing / 2, p2[1], spacing)
    if len(xs) == 0 or len(ys) == 0:
        return (a + (b - a) / 3.0 + (c - a) / 3.0)[None, :]
    gx, gy = np.meshgrid(xs, ys)
    pts2 = np.stack([gx.ravel(), gy.ravel()], axis=1)
    # barycentric inside test in the plane
    denom = n1 * p2[1]
    v = pts2[:, 1] / p2[1]
    u = (pts2[:, 0] - v * p2[0]) / n1
    keep = (u >= 0) & (v >= 0) & (u + v <= 1)
    pts2 = pts2[keep]
    return a[None, :] + pts2[:, :1] * x_hat[None, :] + pts2[:, 1:] * y_hat[None, :]


def _finish_object(name: str, tris, cols) -> ObjectModel:
    triangles = np.array(tris, dtype=float)
    colors = np.array(cols, dtype=float)
    pts, pcols = [], []
    for tri, col in zip(triangles, colors):
        p = sample_triangle_lattice(tri)
        pts.append(p)
        pcols.append(np.tile(col, (len(p), 1)))
    return ObjectModel(
        name,
        triangles,
        colors,
        np.concatenate(pts, axis=0),
        np.concatenate(pcols, axis=0),
    )


_SCENE_BUILDERS = {
    "open_room": _build_open_room,
    "pillar_hall": _build_pillar_hall,
    "narrow_yard": _build_narrow_yard,
}

_OBJECT_BUILDERS = {"tower": _build_tower, "drum": _build_drum}


@lru_cache(maxsize=None)
def get_scene(name: str) -> Scene:
    try:
        return _SCENE_BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown scene {name!r}; bundled: {sorted(_SCENE_BUILDERS)}")


@lru_cache(maxsize=None)
def get_object(name: str) -> ObjectModel:
    try:
        return _OBJECT_BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown object {name!r}; bundled: {sorted(_OBJECT_BUILDERS)}")
