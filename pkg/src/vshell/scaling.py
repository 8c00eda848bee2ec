"""The rescaling f -> a f(b r, c w, b²c² L - (b²c² - 1) L0) and its uses.

An ansatz state stays an ansatz state under the map: amplitude
``a A c^{2k} (bc)^{2l}``, bracket ``g(b r)/c²``, density ``a c^{-3} ρ(b r)``.
:func:`direct_state` builds that state explicitly so every functional can be
computed by plain quadrature, while :func:`rescaled_functionals` uses the
closed-form scaling laws applied to the base functionals.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import ScalingTriple, grid_from_radii
from .errors import InvalidArgument, WitnessFailure
from .functionals import (
    AnalyticState,
    FunctionalReport,
    _rho_power_integral,
    casimir,
    density_of,
    kinetic_energy,
)
from .radial_poisson import FOUR_PI, field_energy, field_from_density

__all__ = [
    "RescaledState",
    "rescaled_mass",
    "direct_state",
    "rescaled_functionals",
    "negative_energy_witness",
    "unit_mass_template",
]

log = logging.getLogger(__name__)


def rescaled_mass(M: float, triple: ScalingTriple) -> float:
    return triple.a * (triple.b * triple.c) ** -3 * M


@dataclass(frozen=True, eq=False)
class _BaseMoments:
    e_kin: float
    casimir: float
    square: float  # ∫ m²/r² dr
    r_rho: float  # ∫ r ρ dr
    rho: float  # ∫ ρ dr
    rho_power: float  # ∫ ρ^{1+1/n} r^{-2l/n} 4πr² dr
    mass: float


@dataclass(frozen=True, eq=False)
class RescaledState:
    base: AnalyticState
    triple: ScalingTriple

    @cached_property
    def moments(self) -> _BaseMoments:
        s = self.base
        density = density_of(s)
        r = density.grid.radii
        return _BaseMoments(
            kinetic_energy(s),
            casimir(s),
            2.0 * field_energy(field_from_density(density)),
            density.grid.integrate(r * density.rho),
            density.grid.integrate(density.rho),
            _rho_power_integral(density, s.params),
            density.total_mass,
        )

    def f(self, r, w, L):
        """The transformed phase-space density, evaluated literally."""
        a, b, c = self.triple.a, self.triple.b, self.triple.c
        L0 = self.base.params.L0
        bc2 = (b * c) ** 2
        return a * self.base.f(b * np.asarray(r), c * np.asarray(w), bc2 * np.asarray(L) - (bc2 - 1.0) * L0)


def direct_state(state: RescaledState, grid=None) -> AnalyticState:
    """The rescaled state as an ansatz state, by default on the grid ``radii / b``."""
    base, (a, b, c) = state.base, (state.triple.a, state.triple.b, state.triple.c)
    p = base.params
    amplitude = a * base.amplitude * c ** (2.0 * p.k) * (b * c) ** (2.0 * p.l)
    if grid is None:
        grid = grid_from_radii(base.grid.radii / b)
    inner = base.bracket_fn
    return AnalyticState(p, grid, amplitude, lambda r: inner(b * np.asarray(r)) / (c * c))


def rescaled_functionals(state: RescaledState) -> FunctionalReport:
    """Functionals of the rescaled state from the scaling laws."""
    return _scaled_report(state.moments, state.base.params, state.triple)


def _scaled_report(mo: _BaseMoments, p, triple: ScalingTriple) -> FunctionalReport:
    a, b, c = triple.a, triple.b, triple.c
    k, n = p.k, p.n
    bc = b * c
    e_kin = a * b**-3 * c**-5 * (mo.e_kin + (bc * bc - 1.0) * p.L0 * 2.0 * math.pi * mo.rho)
    cas = a ** (1.0 + 1.0 / k) * bc ** (-3.0 + 2.0 * p.l / k) * mo.casimir
    e_pot = -0.5 * a * a * b**-5 * c**-6 * mo.square - FOUR_PI * p.Mc * a * b**-2 * c**-3 * mo.r_rho
    mass = a * bc**-3 * mo.mass
    rho_power = (a * c**-3) ** (1.0 + 1.0 / n) * b ** (2.0 * p.l / n - 3.0) * mo.rho_power
    return FunctionalReport.build(e_kin, e_pot, cas, mass, k, rho_power ** (n / (n + 1.0)))


def unit_mass_template(state: AnalyticState) -> AnalyticState:
    """``state`` with its amplitude scaled to unit mass."""
    mass = density_of(state).total_mass
    if not mass > 0.0:
        raise InvalidArgument("template has zero mass")
    return state.scaled(1.0 / mass)


def negative_energy_witness(M: float, template: AnalyticState, eta: float, b_start: float = 0.5,
                            b_floor: float = 1e-8):
    """Halve b until the mass-M rescaling with c = b^{-η/2} has H_C < 0.

    The template must have unit mass. Returns ``(b, report)``.
    """
    if not M > 0.0:
        raise InvalidArgument(f"M must be positive, got {M}")
    p = template.params
    probe = ScalingTriple(1.0, 1.0, 1.0, eta)
    if not probe.witness_admissible(p.k, p.l):
        raise InvalidArgument(f"eta = {eta} is not admissible for k = {p.k}, l = {p.l}")
    mass = density_of(template).total_mass
    if abs(mass - 1.0) > 1e-9:
        raise InvalidArgument(f"template must have unit mass, got {mass}")
    moments = RescaledState(template, probe).moments
    b = b_start
    while b >= b_floor:
        c = b ** (-eta / 2.0)
        triple = ScalingTriple(M * (b * c) ** 3, b, c, eta)
        report = _scaled_report(moments, p, triple)
        if report.h_c < 0.0:
            if not b * c < 1.0:
                raise WitnessFailure(f"witness at b = {b} has bc = {b * c} >= 1")
            log.info("witness found at b = %.3e, H_C = %.6g", b, report.h_c)
            return b, report
        b *= 0.5
    raise WitnessFailure(f"H_C stayed nonnegative down to b = {b_floor}")
