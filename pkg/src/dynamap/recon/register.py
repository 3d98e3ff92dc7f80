"""Pairwise cloud registration.

Two stages, both returning a transform that maps the source cloud onto
the target: ``coarse_register`` is a prior-seeded trimmed ICP (the prior
comes from the motion filter, so global feature matching is
unnecessary), and ``refine_colored_icp`` polishes it with a joint
point-to-plane + color objective. The color term resolves translations
that slide along geometrically flat regions, where point-to-plane alone
is blind.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..errors import AngleSingularityError, InsufficientPointsError
from ..se3 import Pose, se3_exp, se3_log, yaw_rotation
from .cloud import ColoredCloud, estimate_normals, intensity, intensity_gradients

TRIM_FRACTION = 0.70
COARSE_ITERS = 30
COARSE_RETRY_RMS = 0.03
COLOR_WEIGHT = 0.25
COLOR_CUTOFF = 0.03
COLOR_ITERS = 50
CONVERGED_RMS = 0.02
HUBER_GEO = 0.01
HUBER_COLOR = 0.01
FAST_ACCEPT_RMS = 0.012
COLOR_SCORE_WEIGHT = 0.05  # meters of score per unit rgb mismatch
YAW_STARTS = (45.0, 90.0, 135.0, 180.0, 225.0, 270.0, 315.0)


@dataclass
class Registration:
    transform: Pose
    rms_residual: float
    inlier_fraction: float
    converged: bool
    objective_trace: list = field(default_factory=list)


@dataclass
class PreparedTarget:
    """Target-side quantities reused across many registrations."""

    points: np.ndarray
    normals: np.ndarray
    intens: np.ndarray
    gradients: np.ndarray
    tree: cKDTree


def prepare_target(cloud: ColoredCloud, k: int = 12) -> PreparedTarget:
    """Precompute target-side registration quantities."""
    tree = cKDTree(cloud.points)
    normals = (
        cloud.normals
        if cloud.normals is not None
        else estimate_normals(cloud.points, k=k, tree=tree)
    )
    raw = intensity(cloud.colors)
    grads = intensity_gradients(cloud.points, raw, normals, k=k, tree=tree)
    return PreparedTarget(cloud.points, normals, raw, grads, tree)


def kabsch(src: np.ndarray, dst: np.ndarray) -> Pose:
    """Least-squares rigid transform with dst ~= R src + t."""
    sc, dc = src.mean(axis=0), dst.mean(axis=0)
    h = (src - sc).T @ (dst - dc)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return Pose(rot, dc - rot @ sc)


def _pca_axes(points: np.ndarray) -> np.ndarray:
    centered = points - points.mean(axis=0)
    _, vecs = np.linalg.eigh(centered.T @ centered)
    axes = vecs[:, ::-1]  # descending variance
    # fix each axis sign by third moment so the frame is reproducible
    for i in range(3):
        m3 = float(np.sum((centered @ axes[:, i]) ** 3))
        if m3 < 0.0:
            axes[:, i] *= -1.0
    if np.linalg.det(axes) < 0.0:
        axes[:, 2] *= -1.0
    return axes


def pca_alignment(src: np.ndarray, dst: np.ndarray) -> Pose:
    """Centroid + principal-axes seed used when the prior fails."""
    rot = _pca_axes(dst) @ _pca_axes(src).T
    return Pose(rot, dst.mean(axis=0) - rot @ src.mean(axis=0))


def _trimmed_rms(src: np.ndarray, tree: cKDTree, pose: Pose) -> float:
    dist, _ = tree.query(pose.apply(src))
    keep = max(3, int(np.ceil(TRIM_FRACTION * len(src))))
    return float(np.sqrt(np.mean(np.sort(dist)[:keep] ** 2)))


def _trimmed_icp(src: np.ndarray, tree: cKDTree, dst: np.ndarray, init: Pose):
    pose = init.copy()
    for _ in range(COARSE_ITERS):
        moved = pose.apply(src)
        dist, idx = tree.query(moved)
        keep = max(3, int(np.ceil(TRIM_FRACTION * len(src))))
        order = np.argsort(dist, kind="stable")[:keep]
        step = kabsch(moved[order], dst[idx[order]])
        if np.abs(step.as_matrix() - np.eye(4)).max() < 1e-9:
            break
        pose_next = step.compose(pose)
        # extrapolated step (doubled twist): point-to-point steps badly
        # undershoot large offsets, so take the doubled one when it
        # scores a lower trimmed rms
        try:
            doubled = se3_exp(2.0 * se3_log(step)).compose(pose)
            if _trimmed_rms(src, tree, doubled) < _trimmed_rms(src, tree, pose_next):
                pose_next = doubled
        except AngleSingularityError:
            pass
        pose = pose_next
    return pose, _trimmed_rms(src, tree, pose)


def _color_rms(src: ColoredCloud, tree: cKDTree, dst: ColoredCloud, pose: Pose) -> float:
    dist, idx = tree.query(pose.apply(src.points))
    keep = max(3, int(np.ceil(TRIM_FRACTION * len(src.points))))
    order = np.argsort(dist, kind="stable")[:keep]
    diff = src.colors[order] - dst.colors[idx[order]]
    return float(np.sqrt(np.mean(np.sum(diff**2, axis=1))))


def _yaw_about(center: np.ndarray, degrees: float) -> Pose:
    rot = yaw_rotation(np.radians(degrees))
    return Pose(rot, center - rot @ center)


def coarse_register(src: ColoredCloud, dst: ColoredCloud, prior: Pose) -> Registration:
    """Trimmed ICP seeded from the motion prior.

    When the prior-seeded attempt lands badly (trimmed rms above the
    fast-accept bar), a deterministic multi-start kicks in:
    centroid-matched prior, centroid + principal axes, and a yaw grid.
    Those candidates are ranked by trimmed rms plus a color-mismatch
    penalty, since near-symmetric shapes need color to break the tie.
    """
    if len(src) < 30 or len(dst) < 30:
        raise InsufficientPointsError("coarse registration needs >= 30 points per cloud")
    tree = cKDTree(dst.points)

    def attempt(init: Pose):
        pose, rms = _trimmed_icp(src.points, tree, dst.points, init)
        return pose, rms, rms + COLOR_SCORE_WEIGHT * _color_rms(src, tree, dst, pose)

    pose, rms, score = attempt(prior)
    if rms > FAST_ACCEPT_RMS:
        src_c = src.points.mean(axis=0)
        dst_c = dst.points.mean(axis=0)
        matched = Pose(prior.rotation, dst_c - prior.rotation @ src_c)
        starts = [matched, pca_alignment(src.points, dst.points)]
        starts += [_yaw_about(dst_c, deg).compose(matched) for deg in YAW_STARTS]
        for init in starts:
            alt = attempt(init)
            if alt[2] < score:
                pose, rms, score = alt
    dist, _ = tree.query(pose.apply(src.points))
    inlier = float(np.mean(dist <= COARSE_RETRY_RMS))
    return Registration(pose, rms, inlier, rms <= COARSE_RETRY_RMS)


def _colored_residuals(moved, src_intens, target: PreparedTarget, pairs):
    idx_src, idx_dst, n_eff = pairs
    s = moved[idx_src]
    q = target.points[idx_dst]
    n_q = target.normals[idx_dst]
    g = target.gradients[idx_dst]
    # plane residual against the source/target averaged normal: normal
    # estimation errors on the two sides cancel to first order
    r_geo = np.einsum("ij,ij->i", s - q, n_eff)
    off_q = np.einsum("ij,ij->i", s - q, n_q)
    proj = s - off_q[:, None] * n_q  # s dropped onto the target tangent plane
    r_col = src_intens[idx_src] - (
        target.intens[idx_dst] + np.einsum("ij,ij->i", g, proj - q)
    )
    return s, n_eff, g, r_geo, r_col




def _huber(r: np.ndarray, delta: float) -> np.ndarray:
    """Huber cost: quadratic within delta, linear beyond."""
    a = np.abs(r)
    return np.where(a <= delta, r**2, 2.0 * delta * a - delta**2)


def _huber_weights(r: np.ndarray, delta: float) -> np.ndarray:
    """IRLS weights for the Huber cost (1 inside, delta/|r| outside)."""
    return np.minimum(1.0, delta / np.maximum(np.abs(r), 1e-30))


def refine_colored_icp(
    src: ColoredCloud,
    dst: ColoredCloud,
    init: Pose,
    target: PreparedTarget | None = None,
    color_weight: float = COLOR_WEIGHT,
    alt_inits: tuple = (),
    cutoff: float = COLOR_CUTOFF,
    huber_geo: float = HUBER_GEO,
) -> Registration:
    """Gauss-Newton on (1-lambda) point-to-plane^2 + lambda color^2.

    ``alt_inits`` offers extra starting poses. Every start (``init`` and
    each alternative) is refined to convergence and the result with the
    lowest final objective wins; callers pass the raw motion prior
    alongside the coarse result, whose trimmed point-to-point optimum
    can sit tens of millimetres off on self-similar partial views while
    the prior still lies inside the true basin.

    Both residuals run through a Huber cost (IRLS weights in the normal
    equations) so that novel-surface points matched against map edges and
    hard texture boundaries do not drag the minimum. The plane residual
    uses the average of the source and target normals, which cancels
    single-sided normal-estimation bias on curved or creased surfaces.

    Each candidate step is scored with correspondences recomputed at the
    candidate pose and accepted only if that score does not increase, so
    the recorded objective is monotone in the as-associated cost itself.
    The score averages over ALL source points, charging each point
    without a correspondence the Huber cost it would have at exactly the
    cutoff distance: without that floor, a candidate pose could lower
    the mean by sliding disagreeing points (silhouettes, corners) past
    the cutoff, which is precisely how lattice-period ghost alignments
    on tiled textures win.
    """
    if target is None:
        target = prepare_target(dst)
    src_intens = intensity(src.colors)
    src_normals = (
        src.normals if src.normals is not None else estimate_normals(src.points)
    )
    w_g, w_c = 1.0 - color_weight, color_weight

    def assoc(p: Pose, moved):
        dist, idx = target.tree.query(moved, distance_upper_bound=cutoff)
        valid = np.nonzero(np.isfinite(dist))[0]
        idx_dst = idx[valid]
        ns = src_normals[valid] @ p.rotation.T
        nq = target.normals[idx_dst]
        sign = np.where(np.einsum("ij,ij->i", ns, nq) < 0.0, -1.0, 1.0)
        n_eff = nq + sign[:, None] * ns
        norm = np.linalg.norm(n_eff, axis=1, keepdims=True)
        n_eff = np.where(norm > 1e-6, n_eff / np.maximum(norm, 1e-30), nq)
        return valid, idx_dst, n_eff

    n_src = len(src)
    unmatched_cost = w_g * float(_huber(np.array([cutoff]), huber_geo)[0])

    def objective(moved, pairs) -> float:
        if len(pairs[0]) == 0:
            return np.inf
        _, _, _, r_geo, r_col = _colored_residuals(moved, src_intens, target, pairs)
        cost = w_g * _huber(r_geo, huber_geo) + w_c * _huber(r_col, HUBER_COLOR)
        slack = (n_src - len(pairs[0])) * unmatched_cost
        return float((np.sum(cost) + slack) / n_src)

    def evaluate(p: Pose):
        moved = p.apply(src.points)
        pairs = assoc(p, moved)
        return moved, pairs, objective(moved, pairs)

    def run_from(start: Pose):
        pose = start.copy()
        trace: list = []
        moved, pairs, e_here = evaluate(pose)
        for _ in range(COLOR_ITERS):
            if len(pairs[0]) < 6:
                break
            trace.append(e_here)
            s, n, g, r_geo, r_col = _colored_residuals(moved, src_intens, target, pairs)
            j_geo = np.concatenate([n, np.cross(s, n)], axis=1)  # d r_geo / d (dt, dth)
            j_col = np.concatenate([-g, -np.cross(s, g)], axis=1)
            hw_g = _huber_weights(r_geo, huber_geo)
            hw_c = _huber_weights(r_col, HUBER_COLOR)
            h = w_g * (j_geo * hw_g[:, None]).T @ j_geo + w_c * (j_col * hw_c[:, None]).T @ j_col
            b = -(w_g * j_geo.T @ (hw_g * r_geo) + w_c * j_col.T @ (hw_c * r_col))
            h += 1e-12 * np.trace(h) * np.eye(6)
            try:
                delta = np.linalg.solve(h, b)
            except np.linalg.LinAlgError:
                break
            if np.abs(delta).max() < 1e-10:
                break
            accepted = False
            for alpha in (1.0, 0.5, 0.25, 0.125):
                cand = se3_exp(alpha * delta).compose(pose)
                cand_moved, cand_pairs, e_cand = evaluate(cand)
                if e_cand <= e_here + 1e-18:
                    pose, moved, pairs = cand, cand_moved, cand_pairs
                    accepted = True
                    break
            if not accepted or e_here - e_cand <= 1e-12 * max(e_here, 1e-30):
                break
            e_here = e_cand
        return pose, e_here, trace

    pose, e_best, trace = run_from(init)
    for alt in alt_inits:
        alt_pose, e_alt, alt_trace = run_from(alt)
        if e_alt < e_best:
            pose, e_best, trace = alt_pose, e_alt, alt_trace

    moved = pose.apply(src.points)
    final = assoc(pose, moved)
    if len(final[0]) == 0:
        return Registration(pose, np.inf, 0.0, False, trace)
    dist = np.linalg.norm(moved[final[0]] - target.points[final[1]], axis=1)
    rms = float(np.sqrt(np.mean(dist**2)))
    inlier = len(final[0]) / len(src)
    return Registration(pose, rms, inlier, rms <= CONVERGED_RMS, trace)
