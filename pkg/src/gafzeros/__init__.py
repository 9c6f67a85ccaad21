"""Zeros of hyperbolic Gaussian analytic functions: simulation, exact laws and verification."""

from .experiments import ExperimentConfig, RunReport, known_experiments, run_experiment
from .kernels import build_bundle, joint_intensity_det, joint_intensity_perm, permanent
from .laws import CountLaw, count_pmf, hole_probability
from .model import CoefficientVector, Conditioning, DomainKind, SeriesSpec, sample_coefficients
from .rng import RandomStream
from .zeros import ZeroSet, find_zeros, find_zeros_batch

__version__ = "0.1.0"

__all__ = [
    "CoefficientVector",
    "Conditioning",
    "CountLaw",
    "DomainKind",
    "ExperimentConfig",
    "RandomStream",
    "RunReport",
    "SeriesSpec",
    "ZeroSet",
    "build_bundle",
    "count_pmf",
    "find_zeros",
    "find_zeros_batch",
    "hole_probability",
    "joint_intensity_det",
    "joint_intensity_perm",
    "known_experiments",
    "permanent",
    "run_experiment",
    "sample_coefficients",
]
