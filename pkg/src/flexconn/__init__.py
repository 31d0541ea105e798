"""FLEXCONN: fully convolutional lesion-membership regression for multi-contrast MRI.

Submodules
----------
numerics   conv2d / ReLU / MSE / Adam / Gaussian kernels with analytic gradients
network    per-contrast pathways, fusion pathway and membership head
targets    membership targets and lesion-centred patch extraction
training   mini-batch Adam training loop
inference  slice-by-slice prediction, rater averaging, thresholding, sweeps
metrics    Dice, LFPR, LTPR, PPV, VD, challenge score, Wilcoxon test
volio      NIfTI-1 subset and model-file I/O
phantom    synthetic two-contrast phantoms with ground-truth lesions
cli        ``flexconn`` command line
"""
from .inference import (
    InferenceConfig,
    average_memberships,
    normalize_intensity,
    predict_membership,
    segment,
    sweep_threshold,
    threshold_membership,
)
from .metrics import (
    MetricsReport,
    challenge_score,
    connected_components_18,
    dice,
    evaluate_pair,
    lfpr,
    ltpr,
    ppv,
    volume_difference,
    wilcoxon_signed_rank,
)
from .network import (
    Network,
    NetworkConfig,
    PathwayConfig,
    build_network,
    count_parameters,
    forward_slice,
    forward_training,
)
from .phantom import PhantomCase, PhantomSpec, generate_cohort, generate_phantom
from .targets import PatchSet, extract_patches, make_membership_target, split_train_validation
from .training import TrainingConfig, TrainingLog, train, train_two_raters
from .volio import load_model, read_volume, save_model, write_volume
from .volume import Volume

__version__ = "0.1.0"
