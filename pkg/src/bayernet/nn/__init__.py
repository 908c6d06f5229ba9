"""Minimal NHWC tensor engine for the demosaicking sub-networks."""
from .layers import batch_norm_infer, conv2d, relu
from .network import (
    HIDDEN,
    INPUT,
    NETWORK_NAMES,
    OUTPUT,
    LayerSpec,
    NetworkSpec,
    NetworkWeights,
    SpecError,
    build_spec,
    count_flops,
    count_params,
    default_spec,
    forward,
    reduced_spec,
    with_dilation,
)

__all__ = [
    "HIDDEN",
    "INPUT",
    "NETWORK_NAMES",
    "OUTPUT",
    "LayerSpec",
    "NetworkSpec",
    "NetworkWeights",
    "SpecError",
    "batch_norm_infer",
    "build_spec",
    "conv2d",
    "count_flops",
    "count_params",
    "default_spec",
    "forward",
    "reduced_spec",
    "relu",
    "with_dilation",
]
