"""Self-organizing Gaussian mixture models for depth-intensity point clouds."""

from .core import (
    CameraIntrinsics,
    ConditionalGaussianTerms,
    EmConfig,
    GaussianComponent4,
    Gmm4,
    ImagePair,
    MeanShiftConfig,
    depth_to_pointcloud,
    extract_depth_intensity,
)
from .estimators import SOGMM, MeanShiftModes
from .fit import KInitResult, em_fit, fit_sogmm, kmeans_pp_seed, run_em
from .io import export_ply, load_image_pair, load_model, save_model
from .meanshift import (
    ModeSet,
    PriDiagnostics,
    estimate_num_components,
    flat_kernel,
    gaussian_kernel,
    kde_density,
    mean_shift_step,
    pri_objective,
    run_mean_shift,
)
from .metrics import mean_reconstruction_error, model_memory_bytes, psnr
from .recon import reconstruct, sample_gmm
from .regress import (
    conditional_intensity_density,
    conditional_weights,
    expected_intensity,
    regress_image,
)

__version__ = "0.1.0"
