"""Spectral-Galerkin simulator for a compressible MHD fluid filling a cavity
inside a freely moving rigid body, written in the body frame."""

__version__ = "0.1.0"

from .basis import BoxCavity, SpectralResolution, BasisSet, build_bases  # noqa: E402
from .config import RunConfig, load_config, parse_config  # noqa: E402
from .state import (FluidState, PhysParams, RegParams, RigidParams, RigidState,  # noqa: E402
                    SystemState, rest_state)
from .solvers import StepConfig, coupled_step  # noqa: E402

__all__ = ["BoxCavity", "SpectralResolution", "BasisSet", "build_bases", "RunConfig",
           "load_config", "parse_config", "FluidState", "PhysParams", "RegParams",
           "RigidParams", "RigidState", "SystemState", "rest_state", "StepConfig",
           "coupled_step", "__version__"]
