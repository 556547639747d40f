"""Masked backprojection, point-to-point ICP and the 3D consistency loss.

Both stereo views are lifted to point clouds in the left camera frame (the
right cloud is shifted by +baseline along X), registered with ICP, and the
loss is the symmetric mean correspondence distance after alignment. For
differentiation, the subsampled pixel selection, the correspondences and the
rigid transform are all held constant (stop-gradient); only the chain
residual -> point -> depth -> disparity is analytic. The freeze is recomputed
on every fresh call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateGeometryError, InvalidArgumentError
from .fields import ZERO_DISPARITY_EPS, BinaryMask, CameraRig, DisparityField
from .photometric import TermValueGrad

LEFT = "left"
RIGHT = "right"


@dataclass(frozen=True)
class PointCloud:
    """3D points with per-point source-pixel provenance (row, col)."""

    points: np.ndarray
    source_pixel: np.ndarray
    excluded_count: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        px = np.asarray(self.source_pixel, dtype=np.intp).reshape(-1, 2)
        if len(pts) != len(px):
            raise InvalidArgumentError("points and source pixels must align")
        if len(pts) and (not np.all(np.isfinite(pts)) or pts[:, 2].min() <= 0):
            raise InvalidArgumentError("points must be finite with Z > 0")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "source_pixel", px)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-9:
            raise InvalidArgumentError("rotation must be orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise InvalidArgumentError("rotation must be proper (det = +1)")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation

    def angle(self) -> float:
        """Rotation angle in radians."""
        c = (np.trace(self.rotation) - 1.0) / 2.0
        return float(np.arccos(np.clip(c, -1.0, 1.0)))


@dataclass(frozen=True)
class IcpResult:
    transform: RigidTransform
    residual: float
    correspondences: np.ndarray
    iterations_used: int
    converged: bool
    residuals: tuple = ()


@dataclass(frozen=True)
class GcConfig:
    """Settings for the 3D consistency term."""

    n_points: int = 1000
    icp_max_iter: int = 20
    icp_tol: float = 1e-9
    seed: int = 0


@dataclass(frozen=True)
class GcFreeze:
    """Stop-gradient snapshot: sampled pixels, correspondences, transform."""

    pixels_l: np.ndarray
    pixels_r: np.ndarray
    transform: RigidTransform
    corr_lr: np.ndarray
    corr_rl: np.ndarray


def backproject(
    d: DisparityField, rig: CameraRig, mask: BinaryMask, view: str
) -> PointCloud:
    """Lift mask-in pixels to 3D in the left camera frame.

    Z = baseline*focal/d, X = (j - cx)*Z/focal, Y = (i - cy)*Z/focal; right-view
    points are shifted by +baseline along X so consistent stereo clouds
    coincide. Mask-in pixels with sub-epsilon disparity are excluded and
    counted instead of producing infinities.
    """
    if view not in (LEFT, RIGHT):
        raise InvalidArgumentError(f"unknown view {view!r}")
    if (d.height, d.width) != (rig.height, rig.width):
        raise InvalidArgumentError("disparity dims must match rig dims")
    if (mask.height, mask.width) != (d.height, d.width):
        raise InvalidArgumentError("mask dims must match disparity dims")

    sel = mask.as_bool()
    ok = d.values >= ZERO_DISPARITY_EPS
    excluded = int((sel & ~ok).sum())
    sel = sel & ok

    ii, jj = np.nonzero(sel)
    z = rig.baseline * rig.focal / d.values[sel]
    x = (jj - rig.cx) * z / rig.focal
    y = (ii - rig.cy) * z / rig.focal
    if view == RIGHT:
        x = x + rig.baseline
    pts = np.column_stack([x, y, z])
    return PointCloud(pts, np.column_stack([ii, jj]), excluded_count=excluded)


def subsample(cloud: PointCloud, n: int, seed: int) -> PointCloud:
    """Uniform sample without replacement; identity when the cloud is small."""
    if n < 1:
        raise InvalidArgumentError("subsample size must be >= 1")
    if len(cloud) <= n:
        return cloud
    idx = np.random.default_rng(seed).choice(len(cloud), size=n, replace=False)
    return PointCloud(cloud.points[idx], cloud.source_pixel[idx],
                      excluded_count=cloud.excluded_count)


def _check_spread(points: np.ndarray, name: str) -> None:
    if len(points) < 3:
        raise DegenerateGeometryError(f"{name} cloud has fewer than 3 points")
    s = np.linalg.svd(points - points.mean(axis=0), compute_uv=False)
    if s[1] <= 1e-12 * max(s[0], 1e-300):
        raise DegenerateGeometryError(f"{name} cloud is collinear (rank < 2 spread)")


def _fit_rigid(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    """Least-squares rigid transform src -> dst (SVD, reflection-guarded)."""
    c_src = src.mean(axis=0)
    c_dst = dst.mean(axis=0)
    h = (src - c_src).T @ (dst - c_dst)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    t = c_dst - r @ c_src
    return RigidTransform(r, t)


def icp(source: PointCloud, target: PointCloud, max_iter: int = 20, tol: float = 1e-9) -> IcpResult:
    """Point-to-point ICP with exact nearest neighbors and SVD updates.

    Alternates nearest-neighbor matching against a k-d tree on the target
    with a closed-form rigid refit. Only improving steps are accepted, so the
    recorded residual sequence is non-increasing by construction; iteration
    stops once the improvement drops below `tol`.
    """
    _check_spread(source.points, "source")
    _check_spread(target.points, "target")

    tree = cKDTree(target.points)
    transform = RigidTransform.identity()
    dist, idx = tree.query(source.points)
    residuals = [float(dist.mean())]
    iterations_used = 0
    converged = False

    for it in range(1, max_iter + 1):
        iterations_used = it
        candidate = _fit_rigid(source.points, target.points[idx])
        dist_new, idx_new = tree.query(candidate.apply(source.points))
        res_new = float(dist_new.mean())
        improvement = residuals[-1] - res_new
        if res_new < residuals[-1]:
            transform, idx = candidate, idx_new
            residuals.append(res_new)
        if improvement < tol:
            converged = True
            break

    corr = np.column_stack([np.arange(len(source)), idx])
    return IcpResult(
        transform=transform,
        residual=residuals[-1],
        correspondences=corr,
        iterations_used=iterations_used,
        converged=converged,
        residuals=tuple(residuals),
    )


def freeze_correspondences(
    dl: DisparityField,
    dr: DisparityField,
    rig: CameraRig,
    mask_l: BinaryMask,
    mask_r: BinaryMask,
    cfg: GcConfig = GcConfig(),
):
    """Build the stop-gradient snapshot for the 3D term.

    Returns None when either masked cloud is empty. Both clouds are
    subsampled with the same seed, so equal-size clouds from a geometrically
    consistent scene keep pointwise correspondence.
    """
    cloud_l = backproject(dl, rig, mask_l, LEFT)
    cloud_r = backproject(dr, rig, mask_r, RIGHT)
    if len(cloud_l) == 0 or len(cloud_r) == 0:
        return None
    sub_l = subsample(cloud_l, cfg.n_points, cfg.seed)
    sub_r = subsample(cloud_r, cfg.n_points, cfg.seed)

    result = icp(sub_l, sub_r, max_iter=cfg.icp_max_iter, tol=cfg.icp_tol)
    corr_lr = result.correspondences[:, 1]
    tree_src = cKDTree(result.transform.apply(sub_l.points))
    _, corr_rl = tree_src.query(sub_r.points)
    return GcFreeze(
        pixels_l=sub_l.source_pixel,
        pixels_r=sub_r.source_pixel,
        transform=result.transform,
        corr_lr=corr_lr,
        corr_rl=corr_rl,
    )


def _points_from_pixels(values: np.ndarray, pixels: np.ndarray, rig: CameraRig, view: str):
    ii = pixels[:, 0].astype(np.float64)
    jj = pixels[:, 1].astype(np.float64)
    dpx = values[pixels[:, 0], pixels[:, 1]]
    z = rig.baseline * rig.focal / dpx
    x = (jj - rig.cx) * z / rig.focal
    y = (ii - rig.cy) * z / rig.focal
    if view == RIGHT:
        x = x + rig.baseline
    return np.column_stack([x, y, z]), dpx, (jj - rig.cx) / rig.focal, (ii - rig.cy) / rig.focal


def _frozen_chamfer(dl_values, dr_values, rig, freeze, want_grad):
    """Symmetric mean correspondence distance under a frozen alignment.

    Distances of exactly zero contribute no gradient (the norm is not
    differentiable there and the contribution is already optimal).
    """
    p, d_l, xn_l, yn_l = _points_from_pixels(dl_values, freeze.pixels_l, rig, LEFT)
    q, d_r, xn_r, yn_r = _points_from_pixels(dr_values, freeze.pixels_r, rig, RIGHT)
    rot = freeze.transform.rotation
    tp = p @ rot.T + freeze.transform.translation

    r1 = tp - q[freeze.corr_lr]
    n1 = np.linalg.norm(r1, axis=1)
    r2 = q - tp[freeze.corr_rl]
    n2 = np.linalg.norm(r2, axis=1)
    value = 0.5 * (n1.mean() + n2.mean())
    if not want_grad:
        return value, None, None

    grad_dl = np.zeros_like(dl_values)
    grad_dr = np.zeros_like(dr_values)

    def scatter(grad, pixels, g_pts, dpx, xn, yn):
        # chain: distance -> point -> Z -> disparity; dZ/dd = -Z/d
        z = rig.baseline * rig.focal / dpx
        coeff = (g_pts[:, 0] * xn + g_pts[:, 1] * yn + g_pts[:, 2]) * (-z / dpx)
        np.add.at(grad, (pixels[:, 0], pixels[:, 1]), coeff)

    # Residuals at rounding level carry no direction information; their
    # "unit vectors" would be noise, so they contribute no gradient.
    scale = max(float(np.abs(p).max(initial=0.0)), float(np.abs(q).max(initial=0.0)), 1.0)
    tiny = 1e-12 * scale
    k1, k2 = len(n1), len(n2)
    u1 = np.zeros_like(r1)
    nz1 = n1 > tiny
    u1[nz1] = r1[nz1] / n1[nz1, None]
    u2 = np.zeros_like(r2)
    nz2 = n2 > tiny
    u2[nz2] = r2[nz2] / n2[nz2, None]

    # direction 1: |T p_i - q_c(i)|
    g_p = (u1 @ rot) * (0.5 / k1)
    g_q = np.zeros_like(q)
    np.add.at(g_q, freeze.corr_lr, -u1 * (0.5 / k1))
    # direction 2: |q_j - T p_c'(j)|
    g_q += u2 * (0.5 / k2)
    g_p2 = np.zeros((len(p), 3))
    np.add.at(g_p2, freeze.corr_rl, -(u2 @ rot) * (0.5 / k2))
    g_p += g_p2

    scatter(grad_dl, freeze.pixels_l, g_p, d_l, xn_l, yn_l)
    scatter(grad_dr, freeze.pixels_r, g_q, d_r, xn_r, yn_r)
    return value, grad_dl, grad_dr


def frozen_consistency_value(
    dl: DisparityField, dr: DisparityField, rig: CameraRig, freeze: GcFreeze
) -> float:
    """Loss value with selection, correspondences and transform held fixed."""
    v, _, _ = _frozen_chamfer(dl.values, dr.values, rig, freeze, want_grad=False)
    return float(v)


def geometric_consistency_loss(
    dl: DisparityField,
    dr: DisparityField,
    rig: CameraRig,
    mask_l: BinaryMask,
    mask_r: BinaryMask,
    cfg: GcConfig = GcConfig(),
    freeze: GcFreeze | None = None,
) -> TermValueGrad:
    """Post-alignment symmetric chamfer distance between the stereo clouds.

    A fresh freeze (subsample + ICP) is computed unless one is supplied;
    gradients treat the frozen quantities as constants.
    """
    if freeze is None:
        freeze = freeze_correspondences(dl, dr, rig, mask_l, mask_r, cfg)
    if freeze is None:
        z = np.zeros_like(dl.values)
        return TermValueGrad(0.0, z, z.copy(), warnings=("empty_cloud",))
    value, grad_dl, grad_dr = _frozen_chamfer(
        dl.values, dr.values, rig, freeze, want_grad=True
    )
    return TermValueGrad(float(value), grad_dl, grad_dr)
