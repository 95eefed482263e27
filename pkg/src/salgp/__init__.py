"""Safe active learning for Gaussian-process models of time-varying
systems, with closed-form integrated-variance acquisition functions."""

from .acquisition import (
    AcquisitionWorkspace,
    Entropy,
    Imspe,
    TimspeNx,
    TimspeTimeInput,
    build_workspace,
)
from .backend import backend_name
from .engine import ExperimentRecord, SalConfig, initial_design, jump_back, run
from .errors import (
    ConfigError,
    DegenerateCandidateError,
    DimensionMismatchError,
    NotFittedError,
    NumericalError,
    ResourceLimitError,
    UnsupportedMarginalError,
)
from .geometry import Box
from .gp import GpModel, HyperPriors, SeArdKernel, softplus, softplus_inv
from .marginals import MarginalKernel
from .measures import (
    DiagGaussian,
    DiracPoint,
    FiniteMeasure,
    ProductMeasure,
    UniformBox,
    WeightedSum,
    discrete_time_window,
    indicator_box,
    mass,
    power,
    product_time_space,
)
from .oracle import AdaptiveSimpson, GaussHermite, GaussLegendre, imspe_bruteforce, integrate
from .safeopt import BoxStep, EllipseStep, SafetyConfig, safety_probability, select_next
from .testbeds import (
    DriftSystem,
    RailSurrogate,
    SeasonalSystem,
    eval_drift,
    eval_seasonal,
    mccormick,
    modified_rosenbrock,
    random_safe_trajectory,
    safe_area_test_grid,
)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionWorkspace",
    "AdaptiveSimpson",
    "Box",
    "BoxStep",
    "ConfigError",
    "DegenerateCandidateError",
    "DiagGaussian",
    "DimensionMismatchError",
    "DiracPoint",
    "DriftSystem",
    "EllipseStep",
    "Entropy",
    "ExperimentRecord",
    "FiniteMeasure",
    "GaussHermite",
    "GaussLegendre",
    "GpModel",
    "HyperPriors",
    "Imspe",
    "MarginalKernel",
    "NotFittedError",
    "NumericalError",
    "ProductMeasure",
    "RailSurrogate",
    "ResourceLimitError",
    "SalConfig",
    "SafetyConfig",
    "SeArdKernel",
    "SeasonalSystem",
    "TimspeNx",
    "TimspeTimeInput",
    "UniformBox",
    "UnsupportedMarginalError",
    "WeightedSum",
    "backend_name",
    "build_workspace",
    "discrete_time_window",
    "eval_drift",
    "eval_seasonal",
    "imspe_bruteforce",
    "indicator_box",
    "initial_design",
    "integrate",
    "jump_back",
    "mass",
    "mccormick",
    "modified_rosenbrock",
    "power",
    "product_time_space",
    "random_safe_trajectory",
    "run",
    "safe_area_test_grid",
    "safety_probability",
    "select_next",
    "softplus",
    "softplus_inv",
]
