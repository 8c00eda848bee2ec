"""Weighted particle ensembles in reduced coordinates (r, w, L)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ShellParams, grid_from_radii
from .errors import InvalidArgument
from .radial_poisson import PointShellField, RadialDensity, make_density

__all__ = ["ParticleEnsemble", "bin_density"]


@dataclass(eq=False)
class ParticleEnsemble:
    """Particles with radius ``r``, radial velocity ``w``, squared angular
    momentum ``L``, mass ``weight`` and the phase-space density ``f_value``
    they carry. ``L``, ``weight`` and ``f_value`` never change in time."""

    r: np.ndarray
    w: np.ndarray
    L: np.ndarray
    weight: np.ndarray
    f_value: np.ndarray
    total_mass: float
    seed: int = 0
    params: ShellParams | None = None
    order: np.ndarray | None = field(default=None, repr=False)
    last_mass: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        # copies: r and w are advanced in place, the rest is frozen
        arrays = [np.array(a, dtype=np.float64, order="C") for a in
                  (self.r, self.w, self.L, self.weight, self.f_value)]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise InvalidArgument("particle arrays must be one-dimensional and equally long")
        self.r, self.w, self.L, self.weight, self.f_value = arrays
        for a in (self.L, self.weight, self.f_value):
            a.setflags(write=False)

    @property
    def count(self) -> int:
        return self.r.size

    def speeds(self):
        return np.sqrt(self.w * self.w + self.L / (self.r * self.r))

    def copy(self) -> "ParticleEnsemble":
        return ParticleEnsemble(self.r, self.w, self.L, self.weight, self.f_value,
                                self.total_mass, self.seed, self.params,
                                None if self.order is None else self.order.copy())

    def with_phase(self, r, w) -> "ParticleEnsemble":
        """Same particles at new positions and velocities."""
        return ParticleEnsemble(np.array(r, dtype=float), np.array(w, dtype=float), self.L, self.weight,
                                self.f_value, self.total_mass, self.seed, self.params)

    def sorted_order(self):
        if self.order is None or self.order.size != self.count:
            self.order = np.argsort(self.r, kind="stable")
        return self.order

    def shell_field(self, Mc=0.0) -> PointShellField:
        return PointShellField.from_particles(self.r, self.weight, Mc, np.argsort(self.r, kind="stable"))


def bin_density(ensemble: ParticleEnsemble, bins: int) -> RadialDensity:
    """Bin-averaged ρ on geometric radial bins spanning the particles."""
    if ensemble.count == 0:
        raise InvalidArgument("cannot deposit an empty ensemble")
    if bins < 2:
        raise InvalidArgument("need at least two bins")
    lo, hi = float(ensemble.r.min()), float(ensemble.r.max())
    if not hi > lo:
        lo, hi = 0.9 * lo, 1.1 * hi
    edges = np.geomspace(lo * (1 - 1e-9), hi * (1 + 1e-9), bins + 1)
    mass, _ = np.histogram(ensemble.r, edges, weights=ensemble.weight)
    volume = 4.0 * math.pi / 3.0 * (edges[1:] ** 3 - edges[:-1] ** 3)
    centers = np.sqrt(edges[1:] * edges[:-1])
    return make_density(grid_from_radii(centers), mass / volume)
