"""Parallelized liquid state machine: LIF kernels, liquid construction and simulation,
spatio-temporal 3-D convolutional readout, semantic masking and benchmarks."""

from ._core import (
    BuildConfig,
    ConfigError,
    ExperimentConfig,
    FormatError,
    LifParams,
    Liquid,
    ReadoutConfig,
    ReadoutModel,
    RuntimeFailure,
    Topology,
    ValidationError,
    build,
    connection_probability,
    cross_entropy,
    decode_sequence,
    default_config,
    encode,
    load_config,
    load_model,
    load_topology,
    mask_for,
    parse_config,
    run_bench,
    run_experiment,
    run_lif,
    softmax,
    windowed_cube,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
