"""Weighted total objective over a stereo pair and direct field optimization.

The two disparity fields are parameterized through a scaled sigmoid,
d = d_max * sigmoid(raw), and optimized directly. This stands in for a CNN
predictor at desk scale: the objective is the same differentiable function a
network would train against, and the coarse-to-fine optimizer mirrors the
spatial coherence a shared-weight predictor imposes (see optimize()).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DivergenceError, InvalidArgumentError, NumericalFailureError
from .fields import BinaryMask, CameraRig, DisparityField, ImagePlane
from .geometry3d import GcConfig, GcFreeze, geometric_consistency_loss
from .photometric import (
    DEFAULT_GAMMA,
    SsimParams,
    appearance_loss,
    lr_consistency_one_sided,
    smoothness_loss,
)
from .warping import (
    LEFT_VIEW,
    RIGHT_VIEW,
    TOWARD_LEFT,
    TOWARD_RIGHT,
    blind_mask,
    project_disparity,
    warp_horizontal,
)


@dataclass(frozen=True)
class LossWeights:
    """Coefficients of the combined objective."""

    alpha_ap: float = 1.0
    alpha_ds: float = 0.5
    alpha_lr2d: float = 1.0
    beta: float = 0.001

    def __post_init__(self):
        vals = (self.alpha_ap, self.alpha_ds, self.alpha_lr2d, self.beta)
        if not all(np.isfinite(v) and v >= 0 for v in vals):
            raise InvalidArgumentError("loss weights must be finite and >= 0")


@dataclass(frozen=True)
class ObjectiveConfig:
    """Everything besides the weights that shapes the objective."""

    gamma: float = DEFAULT_GAMMA
    ssim: SsimParams = field(default_factory=SsimParams)
    gc: GcConfig = field(default_factory=GcConfig)
    use_blind_mask: bool = True


@dataclass(frozen=True)
class DisparityParams:
    """Unconstrained per-pixel parameters; disparity = d_max * sigmoid(raw)."""

    raw_l: np.ndarray
    raw_r: np.ndarray
    d_max: float

    def __post_init__(self):
        rl = np.asarray(self.raw_l, dtype=np.float64)
        rr = np.asarray(self.raw_r, dtype=np.float64)
        if rl.ndim != 2 or rl.shape != rr.shape:
            raise InvalidArgumentError("raw parameter fields must be matching 2-D arrays")
        if self.d_max <= 0:
            raise InvalidArgumentError("d_max must be positive")
        object.__setattr__(self, "raw_l", rl)
        object.__setattr__(self, "raw_r", rr)

    def disparities(self) -> tuple[DisparityField, DisparityField]:
        dl = DisparityField(self.d_max * _sigmoid(self.raw_l), d_max=self.d_max)
        dr = DisparityField(self.d_max * _sigmoid(self.raw_r), d_max=self.d_max)
        return dl, dr


@dataclass(frozen=True)
class LossBreakdown:
    """Per-term values plus gradients of the total w.r.t. the raw parameters."""

    total: float
    ap_l: float
    ap_r: float
    ds_l: float
    ds_r: float
    lr2d_l: float
    lr2d_r: float
    gc3d: float
    grad_raw_l: np.ndarray
    grad_raw_r: np.ndarray

    def term_dict(self) -> dict:
        return {
            "ap_l": self.ap_l, "ap_r": self.ap_r,
            "ds_l": self.ds_l, "ds_r": self.ds_r,
            "lr2d_l": self.lr2d_l, "lr2d_r": self.lr2d_r,
            "gc3d": self.gc3d, "total": self.total,
        }

    def grad_norm(self) -> float:
        with np.errstate(over="ignore"):
            return float(np.sqrt((self.grad_raw_l**2).sum() + (self.grad_raw_r**2).sum()))


@dataclass(frozen=True)
class OptimizerConfig:
    """Coarse-to-fine line-search descent settings.

    `iterations` caps the total number of outer descent steps (each records
    one trace entry); line-search trials within a step are extra function
    evaluations, bounded by max_backtracks. `step` seeds the warm-started
    line-search scale.
    """

    iterations: int
    step: float = 1.0
    seed: int = 0
    init_sigmoid: float = 0.1
    init_noise_sigma: float = 0.01
    divergence_factor: float = 1e6
    armijo_c: float = 1e-4
    max_backtracks: int = 18
    stall_limit: int = 2
    d_floor: float = 0.05
    scan_points: int = 40


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    breakdown_scalars: dict
    grad_norm: float


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def default_d_max(width: int) -> float:
    return 0.3 * width


def init_params(height: int, width: int, d_max: float, cfg: OptimizerConfig) -> DisparityParams:
    """Uniform small-disparity start plus seeded noise to break symmetry."""
    rng = np.random.default_rng(cfg.seed)
    base = float(np.log(cfg.init_sigmoid / (1.0 - cfg.init_sigmoid)))
    raw_l = base + cfg.init_noise_sigma * rng.standard_normal((height, width))
    raw_r = base + cfg.init_noise_sigma * rng.standard_normal((height, width))
    return DisparityParams(raw_l, raw_r, d_max)


def params_from_disparities(dl: np.ndarray, dr: np.ndarray, d_max: float) -> DisparityParams:
    """Raw parameters that reproduce the given disparities exactly."""
    def logit(d):
        p = np.clip(np.asarray(d, dtype=np.float64) / d_max, 1e-12, 1.0 - 1e-12)
        return np.log(p / (1.0 - p))

    return DisparityParams(logit(dl), logit(dr), d_max)


def _require_finite(term: str, *values: float) -> None:
    if not all(np.isfinite(v) for v in values):
        raise NumericalFailureError(term)


def total_loss(
    images: tuple[ImagePlane, ImagePlane],
    params: DisparityParams,
    rig: CameraRig,
    w: LossWeights = LossWeights(),
    cfg: ObjectiveConfig = ObjectiveConfig(),
    gc_freeze: GcFreeze | None = None,
) -> LossBreakdown:
    """Evaluate the combined objective and its gradients.

    The 3D term is evaluated only when beta > 0 (it is the costly term); its
    internal alignment is recomputed unless `gc_freeze` pins it, which is the
    stop-gradient contract used by the finite-difference checks.
    """
    left, right = images
    if (left.height, left.width) != (right.height, right.width):
        raise InvalidArgumentError("stereo pair dims must match")
    if params.raw_l.shape != (left.height, left.width):
        raise InvalidArgumentError("parameter dims must match image dims")

    dl, dr = params.disparities()
    if cfg.use_blind_mask:
        ml = blind_mask(dl, LEFT_VIEW)
        mr = blind_mask(dr, RIGHT_VIEW)
    else:
        ml = BinaryMask.full(left.height, left.width)
        mr = BinaryMask.full(left.height, left.width)

    warp_l = warp_horizontal(right, dl, TOWARD_LEFT)
    warp_r = warp_horizontal(left, dr, TOWARD_RIGHT)

    ap_l = appearance_loss(left, warp_l, ml, cfg.gamma, cfg.ssim)
    ap_r = appearance_loss(right, warp_r, mr, cfg.gamma, cfg.ssim)
    _require_finite("appearance", ap_l.value, ap_r.value)

    ds_l = smoothness_loss(dl, left, slot="dl")
    ds_r = smoothness_loss(dr, right, slot="dr")
    _require_finite("smoothness", ds_l.value, ds_r.value)

    lr_l = lr_consistency_one_sided(dl, dr, ml, mr, LEFT_VIEW)
    lr_r = lr_consistency_one_sided(dl, dr, ml, mr, RIGHT_VIEW)
    _require_finite("lr_consistency", lr_l.value, lr_r.value)

    if w.beta > 0:
        gc = geometric_consistency_loss(dl, dr, rig, ml, mr, cfg.gc, freeze=gc_freeze)
        _require_finite("geometric_consistency", gc.value)
        gc_value = gc.value
        gc_grad_dl, gc_grad_dr = gc.grad_dl, gc.grad_dr
    else:
        gc_value = 0.0
        gc_grad_dl = np.zeros_like(dl.values)
        gc_grad_dr = np.zeros_like(dr.values)

    terms_2d = (ap_l, ap_r, ds_l, ds_r, lr_l, lr_r)
    grad_dl = w.beta * gc_grad_dl
    grad_dr = w.beta * gc_grad_dr
    for weight, term in zip(
        (w.alpha_ap, w.alpha_ap, w.alpha_ds, w.alpha_ds, w.alpha_lr2d, w.alpha_lr2d),
        terms_2d,
    ):
        grad_dl = grad_dl + weight * term.grad_dl
        grad_dr = grad_dr + weight * term.grad_dr

    total = (
        w.alpha_ap * (ap_l.value + ap_r.value)
        + w.alpha_ds * (ds_l.value + ds_r.value)
        + w.alpha_lr2d * (lr_l.value + lr_r.value)
        + w.beta * gc_value
    )
    _require_finite("total", total)

    # chain rule through the sigmoid parameterization
    sig_l = _sigmoid(params.raw_l)
    sig_r = _sigmoid(params.raw_r)
    grad_raw_l = grad_dl * params.d_max * sig_l * (1.0 - sig_l)
    grad_raw_r = grad_dr * params.d_max * sig_r * (1.0 - sig_r)
    _require_finite("gradient", float(np.abs(grad_raw_l).max(initial=0.0)),
                    float(np.abs(grad_raw_r).max(initial=0.0)))

    return LossBreakdown(
        total=float(total),
        ap_l=ap_l.value, ap_r=ap_r.value,
        ds_l=ds_l.value, ds_r=ds_r.value,
        lr2d_l=lr_l.value, lr2d_r=lr_r.value,
        gc3d=gc_value,
        grad_raw_l=grad_raw_l, grad_raw_r=grad_raw_r,
    )


def _up_coords(n_out: int, n_in: int):
    if n_in == 1:
        return np.zeros(n_out, dtype=np.intp), np.zeros(n_out)
    t = np.arange(n_out) * (n_in - 1) / (n_out - 1)
    i0 = np.minimum(t.astype(np.intp), n_in - 2)
    return i0, t - i0


def upsample_grid(c: np.ndarray, h: int, w: int) -> np.ndarray:
    """Bilinear (align-corners) upsample of a control grid to h x w."""
    hc, wc = c.shape
    i0, fi = _up_coords(h, hc)
    j0, fj = _up_coords(w, wc)
    i1 = np.minimum(i0 + 1, hc - 1)
    j1 = np.minimum(j0 + 1, wc - 1)
    fi_ = fi[:, None]
    fj_ = fj[None, :]
    return (
        c[np.ix_(i0, j0)] * (1 - fi_) * (1 - fj_)
        + c[np.ix_(i0, j1)] * (1 - fi_) * fj_
        + c[np.ix_(i1, j0)] * fi_ * (1 - fj_)
        + c[np.ix_(i1, j1)] * fi_ * fj_
    )


def upsample_grid_adjoint(g: np.ndarray, hc: int, wc: int) -> np.ndarray:
    """Exact adjoint of upsample_grid; pulls a dense gradient onto the grid."""
    h, w = g.shape
    i0, fi = _up_coords(h, hc)
    j0, fj = _up_coords(w, wc)
    i1 = np.minimum(i0 + 1, hc - 1)
    j1 = np.minimum(j0 + 1, wc - 1)
    fi_ = fi[:, None]
    fj_ = fj[None, :]
    out = np.zeros((hc, wc))
    ii0 = np.broadcast_to(i0[:, None], (h, w))
    jj0 = np.broadcast_to(j0[None, :], (h, w))
    ii1 = np.broadcast_to(i1[:, None], (h, w))
    jj1 = np.broadcast_to(j1[None, :], (h, w))
    np.add.at(out, (ii0, jj0), g * (1 - fi_) * (1 - fj_))
    np.add.at(out, (ii0, jj1), g * (1 - fi_) * fj_)
    np.add.at(out, (ii1, jj0), g * fi_ * (1 - fj_))
    np.add.at(out, (ii1, jj1), g * fi_ * fj_)
    return out


def _phase_grids(h: int, w: int):
    """Control-grid schedule: shared coarse phases, then split fine phases."""
    shared = [(1, 1)]
    hc, wc = 2, max(2, round(2 * w / h))
    while hc < max(h // 4, 2):
        shared.append((hc, wc))
        hc, wc = min(hc * 2, h), min(wc * 2, w)
    split = [(max(h // 2, 1), max(w // 2, 1)), (h, w)]
    return shared, split


def optimize(
    images: tuple[ImagePlane, ImagePlane],
    rig: CameraRig,
    w: LossWeights = LossWeights(),
    opt_cfg: OptimizerConfig = OptimizerConfig(iterations=1000),
    obj_cfg: ObjectiveConfig = ObjectiveConfig(),
    params: DisparityParams | None = None,
):
    """First-order descent on the disparity fields, coarse to fine.

    Direct per-pixel descent on this objective stalls: the consistency term
    is a V-groove around mutually consistent field pairs and the L1 terms
    grow one-sidedly along any rough direction, so raw gradient steps from a
    smooth iterate are rejected at first order. A predictor network escapes
    this through shared parameters that move both fields coherently. The
    desk-scale equivalent used here: optimize a shared control grid whose
    right-view field is derived by the projection identity (the groove
    floor), refine the grid resolution progressively, then release the two
    full-resolution fields. Every accepted move passes a backtracking Armijo
    line search on the true objective, so the per-phase trace of totals is
    non-increasing and the whole run is deterministic given the seed.

    Returns (trace, params); one trace entry per outer step. Raises
    DivergenceError (trace attached) if the objective turns non-finite or
    exceeds divergence_factor x the initial total.
    """
    left, _ = images
    h, wd = left.height, left.width
    if params is None:
        params = init_params(h, wd, default_d_max(wd), opt_cfg)
    d_max = params.d_max
    lo, hi = opt_cfg.d_floor, d_max * (1.0 - 1e-3)

    trace: list[TraceEntry] = []
    state = {"outer": 0, "initial": None}

    def evaluate(d_l, d_r, want_grad=True):
        p = DisparityParams(
            np.log(d_l / (d_max - d_l)), np.log(d_r / (d_max - d_r)), d_max
        )
        # fresh 3D subsample per outer step, distinct per run seed
        gc_seed = obj_cfg.gc.seed + 1000003 * opt_cfg.seed + state["outer"]
        cfg = replace(obj_cfg, gc=replace(obj_cfg.gc, seed=gc_seed))
        try:
            bd = total_loss(images, p, rig, w, cfg)
        except NumericalFailureError as e:
            raise DivergenceError(f"objective became non-finite in '{e.term}'", trace) from e
        if state["initial"] is None:
            state["initial"] = bd.total
        if bd.total > opt_cfg.divergence_factor * max(state["initial"], 1e-300):
            raise DivergenceError(
                f"total loss {bd.total:.3e} exceeded {opt_cfg.divergence_factor:.0e} x initial",
                trace,
            )
        if not want_grad:
            return bd.total, None, None, p
        sig_l = d_l / d_max
        sig_r = d_r / d_max
        gd_l = bd.grad_raw_l / (d_max * sig_l * (1 - sig_l))
        gd_r = bd.grad_raw_r / (d_max * sig_r * (1 - sig_r))
        return bd, gd_l, gd_r, p

    def run_phase(fields_of, apply_step, budget):
        """Line-search descent over one control parameterization."""
        alpha = opt_cfg.step
        stalls = 0
        used = 0
        while used < budget and stalls < opt_cfg.stall_limit:
            state["outer"] += 1
            used += 1
            d_l, d_r = fields_of(None)
            bd, gd_l, gd_r, _ = evaluate(d_l, d_r)
            trace.append(TraceEntry(state["outer"], bd.term_dict(), bd.grad_norm()))
            direction, gnorm2 = apply_step(gd_l, gd_r, None)
            if not np.isfinite(gnorm2):
                raise DivergenceError("gradient norm overflowed", trace)
            if gnorm2 <= 0:
                break
            alpha = min(alpha * 2.0, 1e8)
            accepted = False
            for _ in range(opt_cfg.max_backtracks):
                d_l_t, d_r_t = fields_of((direction, alpha))
                f_t, _, _, _ = evaluate(d_l_t, d_r_t, want_grad=False)
                if f_t <= bd.total - opt_cfg.armijo_c * alpha * gnorm2:
                    accepted = True
                    break
                alpha *= 0.5
            if accepted:
                apply_step(gd_l, gd_r, (direction, alpha))
                stalls = 0
            else:
                stalls += 1
        return used

    # ---- scalar scan: photometric autocorrelation has texture-dependent
    # secondary minima along the constant direction, so the single-DOF level
    # is located by a deterministic grid scan rather than local descent
    shared, split = _phase_grids(h, wd)
    dl0, _ = params.disparities()
    best_c = float(np.clip(dl0.values.mean(), lo, hi))
    if opt_cfg.scan_points > 1 and opt_cfg.iterations > 0:
        best_f = None
        for cand in np.linspace(lo, hi, opt_cfg.scan_points):
            d_c = np.full((h, wd), cand)
            f_c, _, _, _ = evaluate(d_c, d_c.copy(), want_grad=False)
            if best_f is None or f_c < best_f:
                best_f, best_c = f_c, float(cand)
    control = np.array([[best_c]])

    def shared_fields(trial):
        c = control if trial is None else np.clip(control - trial[1] * trial[0], lo, hi)
        d_l = np.clip(upsample_grid(c, h, wd), lo, hi)
        d_r = np.clip(project_disparity(d_l, +1.0), lo, hi)
        return d_l, d_r

    def shared_step(gd_l, gd_r, commit):
        nonlocal control
        if commit is not None:
            control = np.clip(control - commit[1] * commit[0], lo, hi)
            return None, None
        g = upsample_grid_adjoint(gd_l + gd_r, *control.shape)
        with np.errstate(over="ignore"):
            return g, float((g**2).sum())

    budget_left = opt_cfg.iterations
    n_phases = len(shared) + len(split)
    for hc, wc in shared:
        if budget_left <= 0:
            break
        if control.shape != (hc, wc):
            control = np.clip(upsample_grid(control, hc, wc), lo, hi)
        budget = max(min(budget_left, opt_cfg.iterations // n_phases + 1), 1)
        budget_left -= run_phase(shared_fields, shared_step, budget)

    d_l, d_r = shared_fields(None)

    # ---- split phases: both fields free at progressive resolution
    for hc, wc in split:
        if budget_left <= 0:
            break
        ones = upsample_grid_adjoint(np.ones((h, wd)), hc, wc)
        grids = [
            np.clip(upsample_grid_adjoint(d_l, hc, wc) / ones, lo, hi),
            np.clip(upsample_grid_adjoint(d_r, hc, wc) / ones, lo, hi),
        ]

        def split_fields(trial, grids=grids):
            if trial is None:
                cl, cr = grids
            else:
                (gl, gr), a = trial
                cl = np.clip(grids[0] - a * gl, lo, hi)
                cr = np.clip(grids[1] - a * gr, lo, hi)
            return (
                np.clip(upsample_grid(cl, h, wd), lo, hi),
                np.clip(upsample_grid(cr, h, wd), lo, hi),
            )

        def split_step(gd_l, gd_r, commit, grids=grids, hc=hc, wc=wc):
            if commit is not None:
                (gl, gr), a = commit
                grids[0] = np.clip(grids[0] - a * gl, lo, hi)
                grids[1] = np.clip(grids[1] - a * gr, lo, hi)
                return None, None
            gl = upsample_grid_adjoint(gd_l, hc, wc)
            gr = upsample_grid_adjoint(gd_r, hc, wc)
            with np.errstate(over="ignore"):
                return (gl, gr), float((gl**2).sum() + (gr**2).sum())

        is_last = (hc, wc) == (h, wd)
        budget = budget_left if is_last else max(min(budget_left, opt_cfg.iterations // n_phases + 1), 1)
        budget_left -= run_phase(split_fields, split_step, budget)
        d_l, d_r = split_fields(None)

    final = DisparityParams(
        np.log(d_l / (d_max - d_l)), np.log(d_r / (d_max - d_r)), d_max
    )
    if opt_cfg.iterations == 0:
        return trace, params
    return trace, final


def eval_objective_profile(
    images: tuple[ImagePlane, ImagePlane],
    rig: CameraRig,
    w: LossWeights,
    params: DisparityParams,
    direction: tuple[np.ndarray, np.ndarray],
    steps,
    obj_cfg: ObjectiveConfig = ObjectiveConfig(),
    gc_freeze: GcFreeze | None = None,
) -> np.ndarray:
    """Total loss sampled along params + t * direction for each t in steps."""
    dir_l, dir_r = direction
    if dir_l.shape != params.raw_l.shape or dir_r.shape != params.raw_r.shape:
        raise InvalidArgumentError("direction dims must match parameter dims")
    out = []
    for t in np.asarray(steps, dtype=np.float64):
        shifted = DisparityParams(
            params.raw_l + t * dir_l, params.raw_r + t * dir_r, params.d_max
        )
        bd = total_loss(images, shifted, rig, w, obj_cfg, gc_freeze=gc_freeze)
        out.append(bd.total)
    return np.asarray(out)
