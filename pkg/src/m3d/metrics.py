"""Depth-map evaluation: the seven standard criteria plus report plumbing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyEvaluationError, InvalidArgumentError
from .fields import BinaryMask, DepthMap

CSV_COLUMNS = ("abs_rel", "sq_rel", "rmse", "rmse_log", "delta1", "delta2", "delta3")


@dataclass(frozen=True)
class MetricReport:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    delta1: float
    delta2: float
    delta3: float
    pixel_count: int

    def as_row(self) -> tuple:
        return (self.abs_rel, self.sq_rel, self.rmse, self.rmse_log,
                self.delta1, self.delta2, self.delta3)

    def as_dict(self) -> dict:
        return dict(zip(CSV_COLUMNS, self.as_row()))


def compute_metrics(pred: DepthMap, gt: DepthMap, valid: BinaryMask | None = None) -> MetricReport:
    """Error and threshold-accuracy statistics over jointly valid pixels.

    abs_rel = mean |p-g|/g, sq_rel = mean (p-g)^2/g, rmse, rmse_log (natural
    log), and delta_k = fraction with max(p/g, g/p) < 1.25^k (strict).
    """
    if pred.values.shape != gt.values.shape:
        raise InvalidArgumentError("prediction and ground truth dims must match")
    sel = pred.valid & gt.valid
    if valid is not None:
        if (valid.height, valid.width) != pred.values.shape:
            raise InvalidArgumentError("validity mask dims must match maps")
        sel = sel & valid.as_bool()
    n = int(sel.sum())
    if n == 0:
        raise EmptyEvaluationError("no valid pixels to evaluate")

    p = pred.values[sel]
    g = gt.values[sel]
    if g.min() <= 0:
        raise InvalidArgumentError("ground-truth depths must be positive on valid pixels")

    diff = p - g
    ratio = np.maximum(p / g, g / p)
    return MetricReport(
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff**2 / g)),
        rmse=float(np.sqrt(np.mean(diff**2))),
        rmse_log=float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25**2)),
        delta3=float(np.mean(ratio < 1.25**3)),
        pixel_count=n,
    )


def median_scale(pred: DepthMap, gt: DepthMap, valid: BinaryMask | None = None):
    """Rescale pred so its median matches gt's over the valid pixels.

    Off by default in the pipeline (stereo disparities are metric given the
    rig); provided for scale-ambiguous monocular comparisons. Returns the
    scaled map and the factor.
    """
    sel = pred.valid & gt.valid
    if valid is not None:
        sel = sel & valid.as_bool()
    if not sel.any():
        raise EmptyEvaluationError("no valid pixels for median scaling")
    med_pred = float(np.median(pred.values[sel]))
    if med_pred == 0:
        raise InvalidArgumentError("median of prediction is zero")
    scale = float(np.median(gt.values[sel])) / med_pred
    return DepthMap(pred.values * scale, pred.valid), scale
