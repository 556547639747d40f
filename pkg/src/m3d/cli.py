"""Command-line surface: synth | optimize | eval | sl-decode | icp-register | mask | ablate.

Every command is deterministic given --seed and writes a manifest.txt with
the fully resolved configuration (excluding the output path, so repeated runs
into different directories produce byte-identical artifacts). Exit codes:
0 success, 1 usage error, 2 IO error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    DegenerateGeometryError,
    DivergenceError,
    EmptyEvaluationError,
    InvalidArgumentError,
    NumericalFailureError,
)
from .fields import BinaryMask, CameraRig, DepthMap, DisparityField, disparity_to_depth
from .formats import (
    read_flat_config,
    read_pfm,
    read_ply,
    write_csv,
    write_flat_config,
    write_pfm,
    write_ply,
    write_png,
)
from .geometry3d import GcConfig, PointCloud, icp
from .metrics import CSV_COLUMNS, compute_metrics, median_scale
from .objective import (
    LossWeights,
    ObjectiveConfig,
    OptimizerConfig,
    default_d_max,
    optimize,
    params_from_disparities,
    total_loss,
)
from .photometric import SsimParams
from .structlight import (
    DEFAULT_CONTRAST_EPS,
    DEFAULT_MODULATION_THRESHOLD,
    PhasePatternSet,
    ProjectorModel,
    decode_gray,
    generate_gray_patterns,
    modulation_depth,
    render_gray_captures,
    render_phase_captures,
    triangulate,
)
from .synthetic import (
    OccluderSpec,
    SurfaceSpec,
    SyntheticScene,
    TextureSpec,
    synth_scene,
)
from .warping import LEFT_VIEW, RIGHT_VIEW, blind_mask

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def worker_count() -> int:
    """Worker cap for batch fan-out, from M3D_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("M3D_THREADS", "1")))
    except ValueError:
        return 1


# ------------------------------------------------------------ scenes

ABLATION_SCENE_SEED = 0


def canonical_scene(name: str, height: int, width: int, focal: float, baseline: float) -> SyntheticScene:
    rig = CameraRig(
        focal=focal, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        baseline=baseline, height=height, width=width,
    )
    rich = TextureSpec(octaves=5, base_cycles=2.0, persistence=0.85, contrast=(0.02, 0.98))
    if name == "plane":
        return SyntheticScene(SurfaceSpec(kind="plane", depth=52.5), TextureSpec(), rig)
    if name == "slant":
        return SyntheticScene(SurfaceSpec(kind="slant", depth=42.0, tilt=0.05), rich, rig)
    if name == "sine":
        return SyntheticScene(
            SurfaceSpec(kind="sine", depth=42.0, amp=1.0, fx=1 / 24, fy=1 / 40), rich, rig
        )
    if name == "slant-occluded":
        return SyntheticScene(
            SurfaceSpec(kind="slant", depth=42.0, tilt=0.05),
            rich,
            rig,
            occluder=OccluderSpec(x0=34, x1=46, depth=35.0),
            edge_artifact_px=8,
        )
    raise UsageError(f"unknown synthetic scene {name!r}")


def _write_manifest(out: Path, command: str, entries: dict) -> None:
    meta = {
        "tool": "m3d",
        "version": __version__,
        "numpy": np.__version__,
        "python": ".".join(str(v) for v in sys.version_info[:3]),
        "command": command,
    }
    meta.update(entries)
    write_flat_config(out / "manifest.txt", meta)


def _write_rig(out: Path, rig: CameraRig) -> None:
    write_flat_config(
        out / "calib.txt",
        {
            "focal": rig.focal, "cx": rig.cx, "cy": rig.cy,
            "baseline": rig.baseline, "height": rig.height, "width": rig.width,
        },
    )


def _read_rig(path) -> CameraRig:
    entries = read_flat_config(path, known_keys={"focal", "cx", "cy", "baseline", "height", "width"})
    return CameraRig(
        focal=float(entries["focal"]), cx=float(entries["cx"]), cy=float(entries["cy"]),
        baseline=float(entries["baseline"]), height=int(entries["height"]), width=int(entries["width"]),
    )


# ------------------------------------------------------------ synth

def _add_scene_flags(p):
    p.add_argument("--synth", default="plane",
                   help="plane | slant | sine | slant-occluded")
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=80)
    p.add_argument("--focal", type=float, default=100.0)
    p.add_argument("--baseline", type=float, default=4.2)


def cmd_synth(args) -> int:
    out = Path(args.out)
    scene = canonical_scene(args.synth, args.height, args.width, args.focal, args.baseline)
    sample = synth_scene(scene, args.seed)
    (out / "left").mkdir(parents=True, exist_ok=True)
    (out / "right").mkdir(exist_ok=True)
    (out / "gt_depth").mkdir(exist_ok=True)

    left32 = sample.left.data.astype(np.float32)
    right32 = sample.right.data.astype(np.float32)
    write_pfm(out / "left" / "000000.pfm", left32)
    write_pfm(out / "right" / "000000.pfm", right32)
    write_png(out / "left" / "000000.png", sample.left.data)
    write_png(out / "right" / "000000.png", sample.right.data)
    depth = np.where(sample.depth_l.valid, sample.depth_l.values, np.inf)
    write_pfm(out / "gt_depth" / "000000.pfm", depth.astype(np.float32))
    write_pfm(out / "gt_disp_l.pfm", sample.disp_l.values.astype(np.float32))
    write_pfm(out / "gt_disp_r.pfm", sample.disp_r.values.astype(np.float32))
    _write_rig(out, sample.rig)

    if args.sl_width:
        sl = out / "sl"
        sl.mkdir(exist_ok=True)
        proj = ProjectorModel(width=args.sl_width, baseline=args.baseline / 2.0)
        gs = generate_gray_patterns(args.sl_width, height=max(args.height // 4, 1))
        patterns_dir = sl / "patterns"
        patterns_dir.mkdir(exist_ok=True)
        for k, (p_img, i_img) in enumerate(zip(gs.patterns, gs.inverses)):
            write_png(patterns_dir / f"gray_{k:02d}.png", p_img.data)
            write_png(patterns_dir / f"gray_{k:02d}_inv.png", i_img.data)
        depth_field = np.where(sample.depth_l.valid, sample.depth_l.values, sample.depth_l.values.max())
        caps, invs, _ = render_gray_captures(depth_field, sample.rig, proj, gs)
        for k, (c, i) in enumerate(zip(caps, invs)):
            write_pfm(sl / f"gray_{k:02d}.pfm", c.data[:, :, 0].astype(np.float32))
            write_pfm(sl / f"gray_{k:02d}_inv.pfm", i.data[:, :, 0].astype(np.float32))
        phases = render_phase_captures(0.4, sample.rig, depth_field, proj)
        for k, img in enumerate((phases.i1, phases.i2, phases.i3), start=1):
            write_pfm(sl / f"phase_{k}.pfm", img.data[:, :, 0].astype(np.float32))
        write_flat_config(sl / "projector.txt", {
            "width": proj.width, "baseline": proj.baseline,
            "focal": sample.rig.focal, "principal_col": sample.rig.cx,
        })

    _write_manifest(out, "synth", {
        "scene": args.synth, "seed": args.seed,
        "height": args.height, "width": args.width,
        "focal": args.focal, "baseline": args.baseline,
        "sl_width": args.sl_width or 0,
    })
    return EXIT_OK


# ------------------------------------------------------------ optimize

CONFIG_KEYS = {
    "gamma", "alpha_ap", "alpha_ds", "alpha_lr2d", "beta", "d_max",
    "enable_3gc", "enable_blind_mask", "gc_points", "gc_max_iter", "gc_tol",
    "iters", "seed",
}


@dataclass
class RunSettings:
    weights: LossWeights
    objective: ObjectiveConfig
    iters: int
    seed: int
    d_max: float | None
    gamma: float

    def manifest_entries(self) -> dict:
        return {
            "gamma": self.gamma,
            "alpha_ap": self.weights.alpha_ap,
            "alpha_ds": self.weights.alpha_ds,
            "alpha_lr2d": self.weights.alpha_lr2d,
            "beta": self.weights.beta,
            "enable_blind_mask": int(self.objective.use_blind_mask),
            "enable_3gc": int(self.weights.beta > 0),
            "gc_points": self.objective.gc.n_points,
            "gc_max_iter": self.objective.gc.icp_max_iter,
            "gc_tol": self.objective.gc.icp_tol,
            "iters": self.iters,
            "seed": self.seed,
            "d_max": "auto" if self.d_max is None else self.d_max,
        }


def _settings_from_args(args) -> RunSettings:
    file_cfg = {}
    if getattr(args, "config", None):
        file_cfg = read_flat_config(args.config, known_keys=CONFIG_KEYS)

    def pick(flag_value, key, cast, default):
        if flag_value is not None:
            return flag_value
        if key in file_cfg:
            return cast(file_cfg[key])
        return default

    gamma = pick(args.gamma, "gamma", float, 0.85)
    beta = pick(args.beta, "beta", float, 0.001)
    enable_3gc = pick(
        None if args.no_3gc is None else (not args.no_3gc), "enable_3gc",
        lambda v: bool(int(v)), True,
    )
    blind = pick(
        None if args.no_blind_mask is None else (not args.no_blind_mask),
        "enable_blind_mask", lambda v: bool(int(v)), True,
    )
    weights = LossWeights(
        alpha_ap=pick(args.alpha_ap, "alpha_ap", float, 1.0),
        alpha_ds=pick(args.alpha_ds, "alpha_ds", float, 0.5),
        alpha_lr2d=pick(args.alpha_lr2d, "alpha_lr2d", float, 1.0),
        beta=beta if enable_3gc else 0.0,
    )
    gc = GcConfig(
        n_points=pick(args.gc_points, "gc_points", int, 1000),
        icp_max_iter=pick(args.gc_max_iter, "gc_max_iter", int, 20),
        icp_tol=pick(args.gc_tol, "gc_tol", float, 1e-9),
    )
    objective = ObjectiveConfig(gamma=gamma, ssim=SsimParams(), gc=gc, use_blind_mask=blind)
    return RunSettings(
        weights=weights,
        objective=objective,
        iters=pick(args.iters, "iters", int, 150),
        seed=pick(args.seed, "seed", int, 0),
        d_max=args.d_max,
        gamma=gamma,
    )


def _load_pair(args):
    if args.data:
        from .dataset import ingest_dataset

        ingest = ingest_dataset(args.data)
        for sample in ingest.samples():
            return (sample.left, sample.right), sample.rig, None, None
        raise InvalidArgumentError(f"no readable samples under {args.data}")
    scene = canonical_scene(args.synth, args.height, args.width, args.focal, args.baseline)
    s = synth_scene(scene, args.scene_seed)
    return (s.left, s.right), s.rig, s.disp_l, s.disp_r


def cmd_optimize(args) -> int:
    settings = _settings_from_args(args)
    images, rig, gt_l, gt_r = _load_pair(args)
    d_max = settings.d_max if settings.d_max else default_d_max(rig.width)

    params = None
    if args.init == "gt":
        if gt_l is None:
            raise UsageError("--init gt requires a synthetic scene")
        params = params_from_disparities(gt_l.values, gt_r.values, d_max)

    opt_cfg = OptimizerConfig(iterations=settings.iters, seed=settings.seed)
    if settings.iters == 0:
        if params is None:
            from .objective import init_params

            params = init_params(rig.height, rig.width, d_max, opt_cfg)
        bd = total_loss(images, params, rig, settings.weights, settings.objective)
        trace = [type("T", (), {"iteration": 0, "breakdown_scalars": bd.term_dict(),
                                "grad_norm": bd.grad_norm()})()]
    else:
        trace, params = optimize(images, rig, settings.weights, opt_cfg, settings.objective, params)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dl, dr = params.disparities()
    write_pfm(out / "disp_l.pfm", dl.values.astype(np.float32))
    write_pfm(out / "disp_r.pfm", dr.values.astype(np.float32))
    depth_l = disparity_to_depth(dl, rig)
    write_pfm(out / "depth_l.pfm", np.where(depth_l.valid, depth_l.values, np.inf).astype(np.float32))
    if args.depth_png_scale:
        write_png(out / "depth_l.png", np.where(depth_l.valid, depth_l.values, 0.0),
                  bit_depth=16, scale=args.depth_png_scale)
    if args.export_clouds:
        from .geometry3d import backproject

        ml = blind_mask(dl, LEFT_VIEW)
        mr = blind_mask(dr, RIGHT_VIEW)
        write_ply(out / "cloud_l.ply", backproject(dl, rig, ml, "left").points)
        write_ply(out / "cloud_r.ply", backproject(dr, rig, mr, "right").points)

    header = ["iteration", "ap_l", "ap_r", "ds_l", "ds_r", "lr2d_l", "lr2d_r", "gc3d", "total", "grad_norm"]
    rows = [
        [t.iteration] + [t.breakdown_scalars[k] for k in header[1:-1]] + [t.grad_norm]
        for t in trace
    ]
    write_csv(out / "trace.csv", header, rows)
    _write_rig(out, rig)
    entries = settings.manifest_entries()
    entries.update({"init": args.init, "source": args.data or args.synth,
                    "scene_seed": args.scene_seed,
                    "depth_png_scale": args.depth_png_scale})
    _write_manifest(out, "optimize", entries)
    return EXIT_OK


# ------------------------------------------------------------ eval

def _depth_from_pfm(path) -> DepthMap:
    values = read_pfm(path).astype(np.float64)
    if values.ndim == 3:
        values = values[:, :, 0]
    valid = np.isfinite(values) & (values > 0)
    return DepthMap(np.where(valid, values, 0.0), valid)


def cmd_eval(args) -> int:
    pred = _depth_from_pfm(args.pred)
    gt = _depth_from_pfm(args.gt)
    valid = None
    if args.valid:
        valid = BinaryMask((read_pfm(args.valid) > 0.5).astype(np.uint8))
    if args.cap:
        capped = np.minimum(pred.values, args.cap)
        pred = DepthMap(np.where(pred.valid, capped, 0.0), pred.valid)
    scale = 1.0
    if args.median_scale:
        pred, scale = median_scale(pred, gt, valid)
    report = compute_metrics(pred, gt, valid)

    row = [repr(v) for v in report.as_row()]
    print(",".join(CSV_COLUMNS))
    print(",".join(row))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "metrics.csv", CSV_COLUMNS, [report.as_row()])
        _write_manifest(out, "eval", {
            "pred": Path(args.pred).name, "gt": Path(args.gt).name,
            "median_scale": int(args.median_scale), "scale": scale,
            "cap": args.cap or 0, "pixel_count": report.pixel_count,
        })
    return EXIT_OK


# ------------------------------------------------------------ sl-decode

def cmd_sl_decode(args) -> int:
    cap_dir = Path(args.captures)
    if not cap_dir.is_dir():
        raise InvalidArgumentError(f"captures directory {cap_dir} not found")
    from .fields import ImagePlane

    grays, invs = [], []
    k = 0
    while (cap_dir / f"gray_{k:02d}.pfm").exists():
        grays.append(ImagePlane(np.clip(read_pfm(cap_dir / f"gray_{k:02d}.pfm"), 0, 1).astype(np.float64)))
        inv_path = cap_dir / f"gray_{k:02d}_inv.pfm"
        if not inv_path.exists():
            raise InvalidArgumentError(f"missing inverse capture {inv_path}")
        invs.append(ImagePlane(np.clip(read_pfm(inv_path), 0, 1).astype(np.float64)))
        k += 1
    if not grays:
        raise InvalidArgumentError(f"no gray_XX.pfm captures under {cap_dir}")

    corr = decode_gray(grays, invs, args.width, contrast_eps=args.contrast_eps)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_pfm(out / "columns.pfm", corr.columns.astype(np.float32))
    write_pfm(out / "certainty.pfm", corr.certain.bits.astype(np.float32))
    write_png(out / "certainty.png", corr.certain.bits.astype(np.float64))

    entries = {
        "width": args.width, "bits": len(grays),
        "contrast_eps": args.contrast_eps, "threshold": args.threshold,
        "certain_fraction": float(corr.certain.bits.mean()),
    }

    phase_paths = [cap_dir / f"phase_{i}.pfm" for i in (1, 2, 3)]
    if all(p.exists() for p in phase_paths):
        caps = [ImagePlane(np.clip(read_pfm(p), 0, 1).astype(np.float64)) for p in phase_paths]
        t_map, certain = modulation_depth(
            PhasePatternSet(caps[0], caps[1], caps[2], threshold=args.threshold)
        )
        write_pfm(out / "modulation.pfm", t_map.astype(np.float32))
        write_png(out / "modulation_certainty.png", certain.bits.astype(np.float64))
        entries["modulation_certain_fraction"] = float(certain.bits.mean())

    proj_cfg = cap_dir / "projector.txt"
    calib = cap_dir.parent / "calib.txt"
    if proj_cfg.exists() and calib.exists():
        rig = _read_rig(calib)
        pc = read_flat_config(proj_cfg, known_keys={"width", "baseline", "focal", "principal_col"})
        proj = ProjectorModel(
            width=int(float(pc["width"])), baseline=float(pc["baseline"]),
            focal=float(pc["focal"]), principal_col=float(pc["principal_col"]),
        )
        depth = triangulate(corr, rig, proj)
        write_pfm(out / "depth.pfm", np.where(depth.valid, depth.values, np.inf).astype(np.float32))
        entries["triangulated"] = 1

    _write_manifest(out, "sl-decode", entries)
    return EXIT_OK


# ------------------------------------------------------------ icp-register

def cmd_icp_register(args) -> int:
    src_pts = read_ply(args.source)
    tgt_pts = read_ply(args.target)
    px = np.zeros((len(src_pts), 2), dtype=np.intp)
    result = icp(
        PointCloud(src_pts, px),
        PointCloud(tgt_pts, np.zeros((len(tgt_pts), 2), dtype=np.intp)),
        max_iter=args.max_iter,
        tol=args.tol,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    r = result.transform.rotation
    t = result.transform.translation
    lines = ["# rows: rotation matrix (3x3), then translation (1x3)"]
    for row in r:
        lines.append(" ".join(repr(float(v)) for v in row))
    lines.append(" ".join(repr(float(v)) for v in t))
    (out / "transform.txt").write_text("\n".join(lines) + "\n")
    write_csv(out / "residuals.csv", ["iteration", "residual"],
              list(enumerate(result.residuals)))
    write_ply(out / "aligned.ply", result.transform.apply(src_pts))
    _write_manifest(out, "icp-register", {
        "source": Path(args.source).name, "target": Path(args.target).name,
        "max_iter": args.max_iter, "tol": args.tol,
        "residual": result.residual, "iterations_used": result.iterations_used,
        "converged": int(result.converged),
    })
    return EXIT_OK


# ------------------------------------------------------------ mask

def cmd_mask(args) -> int:
    disp = read_pfm(args.disp).astype(np.float64)
    if disp.ndim == 3:
        disp = disp[:, :, 0]
    view = LEFT_VIEW if args.view == "left" else RIGHT_VIEW
    mask = blind_mask(DisparityField(np.clip(disp, 0, None)), view)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_pfm(out / "mask.pfm", mask.bits.astype(np.float32))
    write_png(out / "mask.png", mask.bits.astype(np.float64))
    _write_manifest(out, "mask", {
        "disp": Path(args.disp).name, "view": args.view,
        "masked_in_fraction": float(mask.bits.mean()),
    })
    return EXIT_OK


# ------------------------------------------------------------ ablate

ABLATION_CONFIGS = (
    ("2d-only", False, False),
    ("3gc", True, False),
    ("3gc+mask", True, True),
)


def _ablate_run(task):
    images, rig, gt_depth, name, enable_3gc, enable_mask, iters, seed = task
    weights = LossWeights(beta=0.001 if enable_3gc else 0.0)
    objective = ObjectiveConfig(use_blind_mask=enable_mask)
    _, params = optimize(images, rig, weights, OptimizerConfig(iterations=iters, seed=seed), objective)
    dl, _ = params.disparities()
    pred = disparity_to_depth(dl, rig)
    report = compute_metrics(pred, gt_depth)
    return (name, seed, report)


def cmd_ablate(args) -> int:
    scene = canonical_scene(args.synth, args.height, args.width, args.focal, args.baseline)
    s = synth_scene(scene, ABLATION_SCENE_SEED)
    tasks = [
        ((s.left, s.right), s.rig, s.depth_l, name, g3, bm, args.iters, seed)
        for seed in range(args.seeds)
        for (name, g3, bm) in ABLATION_CONFIGS
    ]
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_ablate_run, tasks))
    else:
        results = [_ablate_run(t) for t in tasks]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = ["config", "seed"] + list(CSV_COLUMNS)
    rows = [[name, seed] + list(report.as_row()) for (name, seed, report) in results]
    write_csv(out / "ablation.csv", header, rows)

    summary_rows = []
    for (name, _, _) in ABLATION_CONFIGS:
        vals = np.array([r.as_row() for (n, _, r) in results if n == name])
        summary_rows.append([name] + [float(np.median(vals[:, k])) for k in range(vals.shape[1])])
    write_csv(out / "summary.csv", ["config"] + list(CSV_COLUMNS), summary_rows)
    _write_manifest(out, "ablate", {
        "scene": args.synth, "scene_seed": ABLATION_SCENE_SEED,
        "seeds": args.seeds, "iters": args.iters,
        "height": args.height, "width": args.width,
        "focal": args.focal, "baseline": args.baseline,
    })
    return EXIT_OK


# ------------------------------------------------------------ parser

def build_parser() -> _Parser:
    p = _Parser(prog="m3d", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="render a synthetic stereo scene with ground truth")
    _add_scene_flags(sp)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--sl-width", type=int, default=0,
                    help="also emit structured-light captures for this projector width")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    op = sub.add_parser("optimize", help="optimize disparity fields against the objective")
    _add_scene_flags(op)
    op.add_argument("--scene-seed", type=int, default=0)
    op.add_argument("--data", help="dataset directory (overrides --synth)")
    op.add_argument("--config", help="flat key = value config file")
    op.add_argument("--iters", type=int, default=None)
    op.add_argument("--seed", type=int, default=None)
    op.add_argument("--gamma", type=float, default=None)
    op.add_argument("--alpha-ap", type=float, default=None)
    op.add_argument("--alpha-ds", type=float, default=None)
    op.add_argument("--alpha-lr2d", type=float, default=None)
    op.add_argument("--beta", type=float, default=None)
    op.add_argument("--d-max", type=float, default=None)
    op.add_argument("--gc-points", type=int, default=None)
    op.add_argument("--gc-max-iter", type=int, default=None)
    op.add_argument("--gc-tol", type=float, default=None)
    op.add_argument("--no-3gc", action="store_true", default=None)
    op.add_argument("--no-blind-mask", action="store_true", default=None)
    op.add_argument("--init", choices=("default", "gt"), default="default")
    op.add_argument("--export-clouds", action="store_true",
                    help="write masked backprojected clouds as ASCII PLY")
    op.add_argument("--depth-png-scale", type=float, default=0.0,
                    help="also write depth as 16-bit PNG at this units-per-step scale")
    op.add_argument("--out", required=True)
    op.set_defaults(func=cmd_optimize)

    ev = sub.add_parser("eval", help="compare a predicted depth map against ground truth")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--gt", required=True)
    ev.add_argument("--valid")
    ev.add_argument("--median-scale", action="store_true")
    ev.add_argument("--cap", type=float, default=None)
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_eval)

    sl = sub.add_parser("sl-decode", help="decode structured-light captures")
    sl.add_argument("--captures", required=True)
    sl.add_argument("--width", type=int, required=True)
    sl.add_argument("--contrast-eps", type=float, default=DEFAULT_CONTRAST_EPS)
    sl.add_argument("--threshold", type=float, default=DEFAULT_MODULATION_THRESHOLD)
    sl.add_argument("--out", required=True)
    sl.set_defaults(func=cmd_sl_decode)

    ic = sub.add_parser("icp-register", help="rigidly align two point clouds")
    ic.add_argument("--source", required=True)
    ic.add_argument("--target", required=True)
    ic.add_argument("--max-iter", type=int, default=50)
    ic.add_argument("--tol", type=float, default=1e-9)
    ic.add_argument("--out", required=True)
    ic.set_defaults(func=cmd_icp_register)

    mk = sub.add_parser("mask", help="blind mask of a disparity field")
    mk.add_argument("--disp", required=True)
    mk.add_argument("--view", choices=("left", "right"), required=True)
    mk.add_argument("--out", required=True)
    mk.set_defaults(func=cmd_mask)

    ab = sub.add_parser("ablate", help="ablation table over the component toggles")
    ab.add_argument("--synth", default="slant-occluded")
    ab.add_argument("--seeds", type=int, default=5)
    ab.add_argument("--iters", type=int, default=150)
    ab.add_argument("--height", type=int, default=64)
    ab.add_argument("--width", type=int, default=80)
    ab.add_argument("--focal", type=float, default=100.0)
    ab.add_argument("--baseline", type=float, default=4.2)
    ab.add_argument("--out", required=True)
    ab.set_defaults(func=cmd_ablate)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if hasattr(args, "out") and args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, InvalidArgumentError) as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO
    except (NumericalFailureError, DivergenceError, DegenerateGeometryError, EmptyEvaluationError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
