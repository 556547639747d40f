"""Synthetic rectified stereo scenes with analytically known ground truth.

Textures are sums of seeded random sinusoids, so both views can be rendered
by exact evaluation at continuous coordinates (no resampling error). Ground
truth disparity fields are made mutually consistent under bilinear sampling
of the discrete grids, which is the sampling the losses use; a fronto-parallel
plane with integer disparity reproduces exactly under warping.

An optional occluder band (a closer fronto-parallel strip spanning full
height) creates genuinely occluded background pixels, the failure mode the
3D term and masking are meant to mitigate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .fields import CameraRig, DepthMap, DisparityField, ImagePlane, disparity_to_depth
from .warping import project_disparity

PLANE = "plane"
SLANT = "slant"
SINE = "sine"


@dataclass(frozen=True)
class SurfaceSpec:
    """Scene surface in disparity terms (depth follows from the rig).

    plane: constant depth.
    slant: disparity linear in x (equivalent to a 3D plane): tilt px/px.
    sine:  disparity relief d = bf/depth + amp*sin(2*pi*(fx*x + fy*y)).
    """

    kind: str = PLANE
    depth: float = 40.0
    tilt: float = 0.05
    amp: float = 1.0
    fx: float = 1.0 / 24.0
    fy: float = 1.0 / 40.0

    def __post_init__(self):
        if self.kind not in (PLANE, SLANT, SINE):
            raise InvalidArgumentError(f"unknown surface kind {self.kind!r}")
        if self.depth <= 0:
            raise InvalidArgumentError("surface depth must be positive")
        if abs(self.tilt) > 0.5:
            raise InvalidArgumentError("slant tilt must satisfy |tilt| <= 0.5")


@dataclass(frozen=True)
class TextureSpec:
    octaves: int = 3
    base_cycles: float = 1.5  # cycles across the image width at octave 0
    persistence: float = 0.55
    contrast: tuple = (0.1, 0.9)
    channels: int = 1

    def __post_init__(self):
        if self.octaves < 1:
            raise InvalidArgumentError("need at least one texture octave")
        lo, hi = self.contrast
        if not (0.0 <= lo < hi <= 1.0):
            raise InvalidArgumentError("contrast bounds must satisfy 0 <= lo < hi <= 1")


@dataclass(frozen=True)
class OccluderSpec:
    """Closer fronto-parallel band over left-image columns [x0, x1)."""

    x0: int
    x1: int
    depth: float

    def __post_init__(self):
        if self.x1 <= self.x0:
            raise InvalidArgumentError("occluder band must have positive width")
        if self.depth <= 0:
            raise InvalidArgumentError("occluder depth must be positive")


@dataclass(frozen=True)
class SyntheticScene:
    """Scene plus imaging nuisances.

    edge_artifact_px > 0 overwrites that many columns at the left edge of the
    left view and the right edge of the right view with junk content, the way
    rectification leaves bands with no cross-view correspondent in real rigs.
    Keep it no wider than the blind region or it corrupts valid pixels.
    """

    surface: SurfaceSpec
    texture: TextureSpec
    rig: CameraRig
    occluder: OccluderSpec | None = None
    edge_artifact_px: int = 0


@dataclass(frozen=True)
class SceneSample:
    left: ImagePlane
    right: ImagePlane
    disp_l: DisparityField
    disp_r: DisparityField
    depth_l: DepthMap
    depth_r: DepthMap
    rig: CameraRig


class SinusoidTexture:
    """Seeded band-limited texture, exactly evaluable at continuous (x, y)."""

    def __init__(self, spec: TextureSpec, width: int, seed: int):
        rng = np.random.default_rng(seed)
        n_waves = 4
        freqs, amps, phases, angles = [], [], [], []
        total = 0.0
        for k in range(spec.octaves):
            f = spec.base_cycles * (2.0**k) / width
            a = spec.persistence**k
            for _ in range(n_waves):
                freqs.append(f)
                amps.append(a)
                phases.append(rng.uniform(0, 2 * np.pi))
                angles.append(rng.uniform(0, 2 * np.pi))
                total += a
        lo, hi = spec.contrast
        scale = 0.5 * (hi - lo) / total
        self.center = 0.5 * (hi + lo)
        self.amps = np.asarray(amps) * scale
        self.fx = np.asarray(freqs) * np.cos(angles)
        self.fy = np.asarray(freqs) * np.sin(angles)
        self.phases = np.asarray(phases)
        self.channels = spec.channels
        self.channel_shift = rng.uniform(0, 2 * np.pi, size=spec.channels)

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        out = np.zeros(x.shape + (self.channels,))
        for c in range(self.channels):
            acc = np.full(x.shape, self.center)
            for a, fx, fy, ph in zip(self.amps, self.fx, self.fy, self.phases):
                acc = acc + a * np.sin(
                    2 * np.pi * (fx * x + fy * y) + ph + self.channel_shift[c]
                )
            out[..., c] = acc
        return out


def _base_disparity_left(surface: SurfaceSpec, rig: CameraRig) -> np.ndarray:
    h, w = rig.height, rig.width
    j = np.arange(w, dtype=np.float64)[None, :]
    i = np.arange(h, dtype=np.float64)[:, None]
    d0 = rig.baseline * rig.focal / surface.depth
    if surface.kind == PLANE:
        d = np.full((h, w), d0)
    elif surface.kind == SLANT:
        d = d0 + surface.tilt * (j - rig.cx) + np.zeros((h, 1))
    else:
        d = d0 + surface.amp * np.sin(2 * np.pi * (surface.fx * j + surface.fy * i))
    if d.min() <= 0:
        raise InvalidArgumentError("surface reaches non-positive disparity (behind camera)")
    return d


def make_consistent_pair(d_left: np.ndarray):
    """Left/right ground-truth disparities consistent under bilinear sampling.

    The right field solves its projection equation against the bilinear
    interpolant of the left grid, so the right-view consistency identity holds
    at machine precision. Fields linear in x (plane, slant) then satisfy the
    mirrored left-view identity exactly as well; curved relief satisfies it to
    second order in the grid spacing (bilinear interpolants of the two grids
    cannot both reproduce a curved correspondence exactly).
    """
    dl = d_left.copy()
    dr = project_disparity(dl, +1.0, iters=80)
    return dl, dr


def synth_scene(scene: SyntheticScene, seed: int) -> SceneSample:
    """Render a stereo pair with exact ground truth for the given scene."""
    rig = scene.rig
    h, w = rig.height, rig.width
    dl_base, dr_base = make_consistent_pair(_base_disparity_left(scene.surface, rig))

    tex = SinusoidTexture(scene.texture, w, seed)
    jj = np.arange(w, dtype=np.float64)[None, :] + np.zeros((h, 1))
    ii = np.arange(h, dtype=np.float64)[:, None] + np.zeros((1, w))

    if scene.occluder is None:
        dl, dr = dl_base, dr_base
        left = tex(jj, ii)
        right = tex(jj + dr, ii)
    else:
        occ = scene.occluder
        d_occ = rig.baseline * rig.focal / occ.depth
        if d_occ <= dl_base.max():
            raise InvalidArgumentError("occluder must be closer than the base surface")
        occ_tex = SinusoidTexture(scene.texture, w, seed + 1)

        band_l = (jj >= occ.x0) & (jj < occ.x1)
        band_r = (jj >= occ.x0 - d_occ) & (jj < occ.x1 - d_occ)
        dl = np.where(band_l, d_occ, dl_base)
        dr = np.where(band_r, d_occ, dr_base)
        left = np.where(band_l[:, :, None], occ_tex(jj, ii), tex(jj, ii))
        right = np.where(
            band_r[:, :, None], occ_tex(jj + d_occ, ii), tex(jj + dr_base, ii)
        )

    if scene.edge_artifact_px > 0:
        k = scene.edge_artifact_px
        rng = np.random.default_rng(seed + 7919)
        stripes_l = 0.05 + 0.25 * rng.random((h, k, left.shape[2]))
        stripes_r = 0.05 + 0.25 * rng.random((h, k, right.shape[2]))
        left[:, :k, :] = stripes_l
        right[:, w - k :, :] = stripes_r

    disp_l = DisparityField(dl)
    disp_r = DisparityField(dr)
    return SceneSample(
        left=ImagePlane(left),
        right=ImagePlane(right),
        disp_l=disp_l,
        disp_r=disp_r,
        depth_l=disparity_to_depth(disp_l, rig),
        depth_r=disparity_to_depth(disp_r, rig),
        rig=rig,
    )


def occluded_left_columns(scene: SyntheticScene) -> np.ndarray:
    """Left-image columns whose right-view correspondent is hidden by the band.

    Analytic visibility: background pixel j maps to right column j - d_bg(j);
    it is occluded iff that column lies in the band's right-image extent.
    Returns a boolean (h, w) array (False everywhere without an occluder).
    """
    rig = scene.rig
    h, w = rig.height, rig.width
    if scene.occluder is None:
        return np.zeros((h, w), dtype=bool)
    occ = scene.occluder
    d_occ = rig.baseline * rig.focal / occ.depth
    dl_base, _ = make_consistent_pair(_base_disparity_left(scene.surface, rig))
    jj = np.arange(w, dtype=np.float64)[None, :] + np.zeros((h, 1))
    band_l = (jj >= occ.x0) & (jj < occ.x1)
    xr = jj - dl_base
    covered = (xr >= occ.x0 - d_occ) & (xr < occ.x1 - d_occ)
    return covered & ~band_l
