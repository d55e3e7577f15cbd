"""Spatial stochastic simulation of reaction-diffusion systems.

Exact samplers (per-voxel SSA, diffusion SSA, next-subvolume method),
first-order operator-split solvers with an exact or lookup-table diffusion
propagator, conditional local splitting-error estimators, an adaptive
timestep controller, and a dense-generator oracle for verification.
"""

from .model import (
    MeshGraph,
    ModelSystem,
    Reaction,
    SpeciesSet,
    apply_diffusion_jump,
    apply_reaction,
    build_cartesian_mesh,
)
from .propensity import PropensityModel, total_diffusion_rate

__version__ = "0.1.0"

__all__ = [
    "MeshGraph",
    "ModelSystem",
    "Reaction",
    "SpeciesSet",
    "PropensityModel",
    "apply_diffusion_jump",
    "apply_reaction",
    "build_cartesian_mesh",
    "total_diffusion_rate",
    "__version__",
]
