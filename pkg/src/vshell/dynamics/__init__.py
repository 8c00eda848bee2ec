"""Particle dynamics in reduced coordinates (r, w, L)."""

from ..ensemble import ParticleEnsemble, bin_density
from .integrator import (
    FIELD_MODES,
    DiagnosticsRecord,
    EvolveConfig,
    accelerations,
    default_dt,
    deposit_density,
    diagnose,
    evolve,
    particle_energy,
    self_enclosed_mass,
    statistical_floor,
    step,
)
from .kernels import BACKEND_NAME
from .picard import PicardResult, phase_gap, picard_iterate
from .sampling import sample_shell, sampling_box

__all__ = [
    "BACKEND_NAME",
    "FIELD_MODES",
    "DiagnosticsRecord",
    "EvolveConfig",
    "ParticleEnsemble",
    "PicardResult",
    "accelerations",
    "bin_density",
    "default_dt",
    "deposit_density",
    "diagnose",
    "evolve",
    "field_bound_check",
    "particle_energy",
    "phase_gap",
    "picard_iterate",
    "sample_shell",
    "sampling_box",
    "self_enclosed_mass",
    "statistical_floor",
    "step",
]


def field_bound_check(density):
    """sup m/r² over the bound 3(2π)^{2/3} ‖ρ‖₁^{1/3} ‖ρ‖_∞^{2/3}."""
    from ..radial_poisson import field_bound_ratio

    return field_bound_ratio(density)
