"""Spatiotemporal causal inference on gridded diffusion data.

The package has three layers. The data layer simulates coupled
confounder/treatment/outcome diffusion on a regular grid and emits
paired factual and counterfactual trajectories, so every dataset
carries its own ground-truth treatment effects. The model layer is a
potential-outcome network that combines a convolutional LSTM over the
current treatment and confounder, a latent factor model summarizing
their recent history, and an attention-gated U-Net decoder that maps
the fused features to a future outcome field. The evaluation layer
estimates direct, indirect, and overall effects from factual and
counterfactual outcome pairs and scores predictions with rooted PEHE
and RMSE against the oracle.

Heavy grid stencils run through a compiled extension when it is
available and fall back to a pure NumPy implementation otherwise; see
`stci.kernels.BACKEND`.
"""

from .core import (
    CausalDataset,
    ConfigError,
    DivergenceError,
    GridSpec,
    InterventionSpec,
    MissingFileError,
    PersistenceError,
    SchemaError,
    StciError,
    TruncationError,
    ValidationError,
    read_dataset,
    region_mask,
    write_dataset,
)
from .datagen import DiffusionParams, apply_intervention, generate, step, true_effects
from .effects import (
    REPORT_KEYS,
    EffectEstimates,
    estimate_all,
    estimate_date,
    estimate_iate,
    estimate_late,
    evaluation_report,
    rmse,
    sqrt_pehe,
)
from .kernels import BACKEND, laplacian, neighborhood_mean
from .stcinet import (
    VARIANTS,
    ModelConfig,
    STCINet,
    TrainedModel,
    load_checkpoint,
    make_variant,
    predict_counterfactual,
    save_checkpoint,
    total_loss,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CausalDataset",
    "REPORT_KEYS",
    "ConfigError",
    "DiffusionParams",
    "DivergenceError",
    "EffectEstimates",
    "GridSpec",
    "InterventionSpec",
    "MissingFileError",
    "ModelConfig",
    "PersistenceError",
    "STCINet",
    "SchemaError",
    "StciError",
    "TrainedModel",
    "TruncationError",
    "VARIANTS",
    "ValidationError",
    "apply_intervention",
    "estimate_all",
    "estimate_date",
    "estimate_iate",
    "estimate_late",
    "evaluation_report",
    "generate",
    "laplacian",
    "load_checkpoint",
    "make_variant",
    "neighborhood_mean",
    "predict_counterfactual",
    "read_dataset",
    "region_mask",
    "rmse",
    "save_checkpoint",
    "sqrt_pehe",
    "step",
    "total_loss",
    "train",
    "true_effects",
    "write_dataset",
]
