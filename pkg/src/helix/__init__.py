"""Spectral Galerkin simulation of magnetic induction under shell transport noise on the 3-torus."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .lattice import SpectralField, abc_field, beltrami_field, random_field, sobolev_norm
from .noise import Regime, RegimeParams, validate_regime
from .solver import GalerkinSystem, SolverConfig, simulate

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "GalerkinSystem",
    "Regime",
    "RegimeParams",
    "SolverConfig",
    "SpectralField",
    "abc_field",
    "beltrami_field",
    "load_config",
    "parse_config",
    "random_field",
    "simulate",
    "sobolev_norm",
    "validate_regime",
]
