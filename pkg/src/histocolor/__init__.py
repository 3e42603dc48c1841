"""Grayscale colorization by per-pixel color-histogram prediction.

A small fully-convolutional network predicts, for every pixel of a
grayscale image, a distribution over binned color values (hue/chroma or
CIELAB); decoding those distributions against the input lightness yields a
colorization.  The package also provides histogram transfer toward a
reference image, sampled colorizations with uncertainty maps, and an
evaluation harness, all behind a deterministic command line.
"""

from .colorspace import (
    desaturate,
    huechroma_to_rgb,
    lab_to_rgb,
    lightness_correct,
    replicate_gray,
    rgb_to_alphabeta,
    rgb_to_huechroma,
    rgb_to_lab,
)
from .histo import (
    BinSpec,
    BinTable,
    JointBinTable,
    LossConfig,
    build_bins,
    empirical_histogram,
    kl_hist_loss,
    target_histogram,
)
from .net import (
    ConvSpec,
    HeadSpec,
    HistogramField,
    Model,
    NetConfig,
    forward_features,
    gather_hypercolumn,
    head_predict,
    init_model,
    predict_field,
    predict_values,
    rebalance,
    train_step,
)
from .decode import DecodePolicy, HueEstimate, chromatic_fade, circular_hue_expectation, decode_scalar_channel, render
from .transfer import TransferConfig, biased_samples, energy_minimize, quantile_match, symmetric_chi2, uncertainty_map
from .metrics import EvalReport, cumulative_curve, evaluate, psnr, rmse_ab
from .imageio import load_image, save_image
from .checkpoint import load_checkpoint, load_field, save_checkpoint, save_field
from .config import PipelineConfig, canonical_text, load_config, parse_config

__version__ = "0.1.0"

__all__ = [
    "BinSpec",
    "BinTable",
    "ConvSpec",
    "DecodePolicy",
    "EvalReport",
    "HeadSpec",
    "HistogramField",
    "HueEstimate",
    "JointBinTable",
    "LossConfig",
    "Model",
    "NetConfig",
    "PipelineConfig",
    "TransferConfig",
    "biased_samples",
    "build_bins",
    "canonical_text",
    "chromatic_fade",
    "circular_hue_expectation",
    "cumulative_curve",
    "decode_scalar_channel",
    "desaturate",
    "empirical_histogram",
    "energy_minimize",
    "evaluate",
    "forward_features",
    "gather_hypercolumn",
    "head_predict",
    "huechroma_to_rgb",
    "init_model",
    "kl_hist_loss",
    "lab_to_rgb",
    "lightness_correct",
    "load_checkpoint",
    "load_config",
    "load_field",
    "load_image",
    "parse_config",
    "predict_field",
    "predict_values",
    "psnr",
    "quantile_match",
    "rebalance",
    "render",
    "replicate_gray",
    "rgb_to_alphabeta",
    "rgb_to_huechroma",
    "rgb_to_lab",
    "rmse_ab",
    "save_checkpoint",
    "save_field",
    "save_image",
    "symmetric_chi2",
    "target_histogram",
    "train_step",
    "uncertainty_map",
]
