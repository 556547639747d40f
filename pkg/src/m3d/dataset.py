"""Dataset ingestion over a normalized on-disk layout.

Layout (one directory per sequence under the root):

    root/<sequence>/calib.txt          flat config: focal, cx, cy, baseline,
                                       height, width
    root/<sequence>/left/<name>.pfm    or .png
    root/<sequence>/right/<name>.pfm   matching names
    root/<sequence>/gt_depth/<name>.pfm        optional per sample
    root/<sequence>/gt_certainty/<name>.pfm    latte-like only, optional

"scared-like" and "latte-like" share this structure; the latte-like layout
additionally applies the structured-light certainty mask to the ground truth
when present. Sequences without a readable calibration are skipped and
reported; unreadable samples are skipped and reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .fields import BinaryMask, CameraRig, DepthMap, ImagePlane
from .formats import read_flat_config, read_pfm, read_png

SCARED_LIKE = "scared-like"
LATTE_LIKE = "latte-like"

CALIB_KEYS = {"focal", "cx", "cy", "baseline", "height", "width"}


@dataclass(frozen=True)
class DatasetSample:
    sequence: str
    name: str
    left: ImagePlane
    right: ImagePlane
    rig: CameraRig
    gt_depth: DepthMap | None = None
    gt_certainty: BinaryMask | None = None


@dataclass
class IngestReport:
    sequences: int = 0
    yielded: int = 0
    skipped_sequences: list = field(default_factory=list)
    skipped_samples: list = field(default_factory=list)


class DatasetIngest:
    """Lazy iterator over samples plus a report filled during iteration."""

    def __init__(self, root, layout: str = SCARED_LIKE):
        if layout not in (SCARED_LIKE, LATTE_LIKE):
            raise InvalidArgumentError(f"unknown layout {layout!r}")
        self.root = Path(root)
        if not self.root.is_dir():
            raise InvalidArgumentError(f"dataset root {root} is not a directory")
        self.layout = layout
        self.report = IngestReport()

    def samples(self):
        for seq_dir in sorted(p for p in self.root.iterdir() if p.is_dir()):
            self.report.sequences += 1
            try:
                rig = self._read_calib(seq_dir / "calib.txt")
            except Exception as e:
                self.report.skipped_sequences.append((seq_dir.name, str(e)))
                continue
            left_dir = seq_dir / "left"
            if not left_dir.is_dir():
                self.report.skipped_sequences.append((seq_dir.name, "missing left/"))
                continue
            names = sorted({p.stem for p in left_dir.iterdir() if p.suffix in (".pfm", ".png")})
            for name in names:
                try:
                    yield self._load_sample(seq_dir, name, rig)
                    self.report.yielded += 1
                except Exception as e:
                    self.report.skipped_samples.append((seq_dir.name, name, str(e)))

    def _read_calib(self, path: Path) -> CameraRig:
        entries = read_flat_config(path, known_keys=CALIB_KEYS)
        missing = CALIB_KEYS - entries.keys()
        if missing:
            raise InvalidArgumentError(f"calibration missing keys {sorted(missing)}")
        return CameraRig(
            focal=float(entries["focal"]),
            cx=float(entries["cx"]),
            cy=float(entries["cy"]),
            baseline=float(entries["baseline"]),
            height=int(entries["height"]),
            width=int(entries["width"]),
        )

    def _load_sample(self, seq_dir: Path, name: str, rig: CameraRig) -> DatasetSample:
        left = ImagePlane(self._read_image(seq_dir / "left", name))
        right = ImagePlane(self._read_image(seq_dir / "right", name))
        gt = None
        certainty = None
        depth_path = seq_dir / "gt_depth" / f"{name}.pfm"
        if depth_path.exists():
            values = read_pfm(depth_path).astype(np.float64)
            valid = np.isfinite(values) & (values > 0)
            gt = DepthMap(np.where(valid, values, 0.0), valid)
            if self.layout == LATTE_LIKE:
                cert_path = seq_dir / "gt_certainty" / f"{name}.pfm"
                if cert_path.exists():
                    certainty = BinaryMask((read_pfm(cert_path) > 0.5).astype(np.uint8))
        return DatasetSample(
            sequence=seq_dir.name, name=name, left=left, right=right,
            rig=rig, gt_depth=gt, gt_certainty=certainty,
        )

    @staticmethod
    def _read_image(directory: Path, name: str) -> np.ndarray:
        pfm = directory / f"{name}.pfm"
        if pfm.exists():
            return np.clip(read_pfm(pfm).astype(np.float64), 0.0, 1.0)
        png = directory / f"{name}.png"
        if png.exists():
            return read_png(png)
        raise InvalidArgumentError(f"no {name}.pfm or {name}.png under {directory}")


def ingest_dataset(root, layout: str = SCARED_LIKE) -> DatasetIngest:
    return DatasetIngest(root, layout)
