"""Self-supervised stereo depth objective with analytic gradients.

2D photometric, consistency and smoothness terms, blind masking, an
ICP-based 3D geometric-consistency term, direct disparity-field optimization,
structured-light ground-truth tooling and the standard depth metrics.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateGeometryError,
    DivergenceError,
    EmptyEvaluationError,
    InvalidArgumentError,
    NumericalFailureError,
)
from .fields import (
    BinaryMask,
    CameraRig,
    DepthMap,
    DisparityField,
    ImagePlane,
    PixelGrid,
    depth_to_disparity,
    disparity_to_depth,
    make_meshgrid,
)
from .geometry3d import (
    GcConfig,
    IcpResult,
    PointCloud,
    RigidTransform,
    backproject,
    geometric_consistency_loss,
    icp,
    subsample,
)
from .metrics import MetricReport, compute_metrics, median_scale
from .objective import (
    DisparityParams,
    LossBreakdown,
    LossWeights,
    ObjectiveConfig,
    OptimizerConfig,
    eval_objective_profile,
    optimize,
    total_loss,
)
from .photometric import (
    SsimParams,
    TermValueGrad,
    appearance_loss,
    lr_consistency_loss,
    smoothness_loss,
    ssim_map,
)
from .synthetic import (
    OccluderSpec,
    SceneSample,
    SurfaceSpec,
    SyntheticScene,
    TextureSpec,
    synth_scene,
)
from .warping import WarpResult, blind_mask, warp_horizontal
