"""Energies, Casimir, norms and the stability distance.

All phase-space integrals use the reduced measure ``4π² dr dw dL``. For
ansatz-type states ``f = A (g(r) - ½w² - (L-L0)/(2r²))_+^k (L-L0)_+^l`` the
velocity integrals are done in closed form through

    Ĩ_p(r) = ∫∫ (g - ½w² - (L-L0)/(2r²))_+^p (L-L0)_+^l dw dL
           = C(p, l)/π · r^{2l+2} g_+^{p+l+3/2},

which leaves one radial quadrature per functional.
"""

from __future__ import annotations

import logging
import math
import weakref
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .core import RadialGrid, ShellParams, shell_constant
from .ensemble import ParticleEnsemble, bin_density
from .errors import ConstraintViolation, InvalidArgument
from .radial_poisson import (
    FOUR_PI,
    RadialDensity,
    field_energy,
    field_energy_within,
    field_from_density,
    make_density,
)
from .steady_state import ShellModel, _moment_array, bracket

__all__ = [
    "AnalyticState",
    "FunctionalReport",
    "ansatz_state",
    "model_state",
    "density_of",
    "mass_of",
    "reference_values",
    "kinetic_energy",
    "potential_energy",
    "casimir",
    "energy_casimir",
    "knorm",
    "rhonorm",
    "interpolation_check",
    "epot_bound_check",
    "distance_d",
    "norm_distance",
]

DEFAULT_BINS = 200

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AnalyticState:
    """``f = amplitude · (g(r) - ½w² - (L-L0)/(2r²))_+^k (L-L0)_+^l``.

    ``bracket_fn`` gives g at arbitrary radii; radial quadratures run on
    ``grid``, which must cover the support.
    """

    params: ShellParams
    grid: RadialGrid
    amplitude: float
    bracket_fn: Callable[[np.ndarray], np.ndarray]

    @cached_property
    def bracket(self) -> np.ndarray:
        return np.asarray(self.bracket_fn(self.grid.radii), dtype=float)

    def f(self, r, w, L):
        p = self.params
        r = np.asarray(r, dtype=float)
        lam = np.asarray(L, dtype=float) - p.L0
        x = self.bracket_fn(r) - 0.5 * np.asarray(w) ** 2 - lam / (2.0 * r * r)
        lam = np.maximum(lam, 0.0)
        return np.where(lam > 0.0, self.amplitude * np.maximum(x, 0.0) ** p.k * lam**p.l, 0.0)

    def moment(self, p):
        return _moment_array(p, self.params.l, self.grid.radii, self.bracket)

    def scaled(self, factor: float) -> "AnalyticState":
        return AnalyticState(self.params, self.grid, self.amplitude * factor, self.bracket_fn)


def ansatz_state(params: ShellParams, fld, grid: RadialGrid, amplitude=None) -> AnalyticState:
    """Ansatz state in the (static) potential ``fld``."""
    amp = params.A if amplitude is None else amplitude
    return AnalyticState(params, grid, amp, lambda r: bracket(params, r, fld.potential_at(r)))


_model_states = weakref.WeakKeyDictionary()


def model_state(model: ShellModel) -> AnalyticState:
    state = _model_states.get(model)
    if state is None:
        state = ansatz_state(model.params, model.field0, model.grid)
        _model_states[model] = state
    return state


@dataclass(frozen=True)
class FunctionalReport:
    e_kin: float
    e_pot: float
    casimir: float
    h_c: float
    mass: float
    knorm: float
    rhonorm: float

    @classmethod
    def build(cls, e_kin, e_pot, cas, mass, k, rho_norm):
        e_kin, e_pot, cas = float(e_kin), float(e_pot), float(cas)
        return cls(e_kin, e_pot, cas, e_kin + e_pot + cas, float(mass), _knorm(cas, k), float(rho_norm))

    def as_dict(self):
        return dict(e_kin=self.e_kin, e_pot=self.e_pot, casimir=self.casimir, h_c=self.h_c,
                    mass=self.mass, knorm=self.knorm, rhonorm=self.rhonorm)


def _is_particles(state):
    return isinstance(state, ParticleEnsemble)


def density_of(state, bins: int = DEFAULT_BINS) -> RadialDensity:
    if _is_particles(state):
        return bin_density(state, bins)
    p = state.params
    r = state.grid.radii
    g = np.maximum(state.bracket, 0.0)
    rho = state.amplitude * shell_constant(p.k, p.l) * r ** (2.0 * p.l) * g**p.n
    return make_density(state.grid, rho)


def mass_of(state) -> float:
    if _is_particles(state):
        return float(np.sum(state.weight))
    return density_of(state).total_mass


def kinetic_energy(state) -> float:
    """½ ∫∫ |v|² f dv dx."""
    if _is_particles(state):
        return float(np.sum(0.5 * state.weight * (state.w * state.w + state.L / (state.r * state.r))))
    if state.amplitude == 0.0:
        return 0.0
    p = state.params
    r = state.grid.radii
    g = np.maximum(state.bracket, 0.0)
    integrand = (2.0 * g + p.L0 / (r * r)) * state.moment(p.k) - 2.0 * state.moment(p.k + 1.0)
    return 2.0 * math.pi**2 * state.amplitude * state.grid.integrate(integrand)


def casimir(state, params: ShellParams | None = None) -> float:
    """∫∫ f^{1+1/k} (L-L0)_+^{-l/k} dv dx."""
    if _is_particles(state):
        p = params or state.params
        lam = state.L - p.L0
        if np.any(lam <= 0.0):
            raise InvalidArgument("particles with L <= L0 carry an undefined Casimir weight",
                                  reason="invalid-state")
        return float(np.sum(state.weight * state.f_value ** (1.0 / p.k) * lam ** (-p.l / p.k)))
    if state.amplitude == 0.0:
        return 0.0
    p = state.params
    coeff = 4.0 * math.pi**2 * state.amplitude ** (1.0 + 1.0 / p.k)
    return coeff * state.grid.integrate(state.moment(p.k + 1.0))


def _central_interaction(density: RadialDensity, Mc: float) -> float:
    """∫ (Mc/|x|) ρ dx = 4π Mc ∫ r ρ dr."""
    return FOUR_PI * Mc * density.grid.integrate(density.grid.radii * density.rho)


def potential_energy(state, params: ShellParams | None = None) -> float:
    """-(1/8π) ∫ |∇U|² dx - ∫ (Mc/|x|) ρ dx."""
    if _is_particles(state):
        p = params or state.params
        Mc = p.Mc if p is not None else 0.0
        return float(-field_energy(state.shell_field()) - np.sum(state.weight * Mc / state.r))
    density = density_of(state)
    return float(-field_energy(field_from_density(density)) - _central_interaction(density, state.params.Mc))


def _knorm(cas, k):
    return max(cas, 0.0) ** (k / (k + 1.0))


def knorm(state, params: ShellParams | None = None) -> float:
    p = params or state.params
    return _knorm(casimir(state, p), p.k)


def _rho_power_integral(density: RadialDensity, params: ShellParams) -> float:
    n = params.n
    r = density.grid.radii
    return density.grid.integrate(density.rho ** (1.0 + 1.0 / n) * r ** (-2.0 * params.l / n) * FOUR_PI * r * r)


def rhonorm(density: RadialDensity, params: ShellParams) -> float:
    """(∫ ρ^{1+1/n} |x|^{-2l/n} dx)^{n/(n+1)}."""
    n = params.n
    return _rho_power_integral(density, params) ** (n / (n + 1.0))


def energy_casimir(state, params: ShellParams | None = None, bins: int = DEFAULT_BINS) -> FunctionalReport:
    p = params or state.params
    density = density_of(state, bins)
    if _is_particles(state):
        e_kin = kinetic_energy(state)
        e_pot = potential_energy(state, p)
        cas = casimir(state, p)
        mass = mass_of(state)
    else:
        e_kin = kinetic_energy(state)
        cas = casimir(state)
        e_pot = float(-field_energy(field_from_density(density)) - _central_interaction(density, p.Mc))
        mass = density.total_mass
    return FunctionalReport.build(e_kin, e_pot, cas, mass, p.k, rhonorm(density, p))


def interpolation_check(state, params: ShellParams | None = None, bins: int = DEFAULT_BINS):
    """(∫ρ^{1+1/n}|x|^{-2l/n}dx, C(f) + E_kin(f), ratio)."""
    p = params or state.params
    lhs = _rho_power_integral(density_of(state, bins), p)
    rhs = casimir(state, p) + kinetic_energy(state)
    return lhs, rhs, (lhs / rhs if rhs > 0.0 else 0.0)


def _zeta(R, params):
    q1 = params.l - params.k + 0.5
    q2 = 4.0 * params.l + 5.0 - params.n
    return R**q1 if R <= 1.0 else R**q2


def epot_bound_check(density: RadialDensity, Mc: float, R: float, params: ShellParams | None = None,
                     zeta_constant: float = 1.0):
    """Terms of -E_pot(ρ) <= ½∫_0^R (m²/r² + 8π Mc r ρ) dr + (M² + 2 M Mc)/(2R).

    Returns ``(lhs, mid, rhs)``; ``rhs`` is the ζ(R)-form bound evaluated with
    ``zeta_constant`` and is for reporting only.
    """
    if R <= 0.0:
        raise InvalidArgument("R must be positive")
    fld = field_from_density(density)
    M = density.total_mass
    lhs = field_energy(fld) + _central_interaction(density, Mc)
    r = density.grid.radii
    cum = density.grid.cumulative(r * density.rho)
    inner_interaction = float(np.interp(R, r, cum, left=0.0, right=cum[-1]))
    mid = field_energy_within(fld, R) + FOUR_PI * Mc * inner_interaction + (M * M + 2.0 * M * Mc) / (2.0 * R)
    rhs = float("nan")
    if params is not None:
        norm_term = 1.0 + _rho_power_integral(density, params)
        rhs = zeta_constant * _zeta(R, params) * norm_term + (M * M + 2.0 * M * Mc) / (2.0 * R)
    return float(lhs), float(mid), float(rhs)


@dataclass(frozen=True)
class _ModelReference:
    e_kin: float
    casimir: float
    energy_integral: float  # ∫∫ E f0 dv dx
    mass: float


_references = weakref.WeakKeyDictionary()


def _reference(model: ShellModel) -> _ModelReference:
    ref = _references.get(model)
    if ref is None:
        state = model_state(model)
        density = density_of(state)
        e_kin = kinetic_energy(state)
        r = model.grid.radii
        external = density.grid.integrate((model.field0.potential_at(r) - model.params.Mc / r)
                                          * density.rho * FOUR_PI * r * r)
        ref = _ModelReference(e_kin, casimir(state), e_kin + external, density.total_mass)
        _references[model] = ref
    return ref


def _check_mass(mass, ref_mass, rtol):
    if abs(mass - ref_mass) > rtol * ref_mass:
        raise ConstraintViolation(f"mass {mass!r} differs from the model mass {ref_mass!r}")


def distance_d(state, model: ShellModel, estimator: str = "pointwise", mass_rtol: float = 1e-6,
               raw: bool = False, tol: float = 1e-8) -> float:
    """Stability distance, clamped at zero unless ``raw``; see :func:`_distance_raw`."""
    value = _distance_raw(state, model, estimator, mass_rtol)
    if raw:
        return value
    if value < 0.0:
        level = logging.WARNING if value < -tol else logging.DEBUG
        log.log(level, "raw distance %.3e clamped to 0", value)
    return max(value, 0.0)


def _distance_raw(state, model, estimator, mass_rtol):
    """d(f, f0) = ∫∫ [(f^{1+1/k} - f0^{1+1/k})(L-L0)^{-l/k} + (E - E0)(f - f0)] dv dx.

    E uses the model potential. For analytic states everything reduces to
    radial quadratures. For particles the default ``pointwise`` estimator
    averages the integrand divided by f over the particles, each carrying its
    own f; it is nonnegative term by term. ``global`` instead subtracts the
    exact f0 integrals from particle sums, which is unbiased but noisy.
    """
    p = model.params
    ref = _reference(model)
    if _is_particles(state):
        mass = float(np.sum(state.weight))
        _check_mass(mass, ref.mass, max(mass_rtol, 1e-12))
        lam = state.L - p.L0
        if np.any(lam <= 0.0):
            raise ConstraintViolation("particles with L <= L0 are outside the admissible class")
        E = model.energy(state.r, state.w, state.L)
        f = state.f_value
        if estimator == "global":
            cas = float(np.sum(state.weight * f ** (1.0 / p.k) * lam ** (-p.l / p.k)))
            return (cas - ref.casimir) + (float(np.sum(state.weight * E)) - ref.energy_integral) \
                - p.E0 * (mass - ref.mass)
        if estimator != "pointwise":
            raise InvalidArgument(f"unknown estimator {estimator!r}")
        f0 = p.A * np.maximum(p.E0 - E, 0.0) ** p.k * lam**p.l
        weight_lam = lam ** (-p.l / p.k)
        term = (f ** (1.0 / p.k) - f0 ** (1.0 + 1.0 / p.k) / f) * weight_lam + (E - p.E0) * (1.0 - f0 / f)
        return float(np.sum(state.weight * term))
    density = density_of(state)
    _check_mass(density.total_mass, ref.mass, max(mass_rtol, 1e-5))
    r = density.grid.radii
    ext = density.grid.integrate((model.field0.potential_at(r) - p.Mc / r) * density.rho * FOUR_PI * r * r)
    return (casimir(state) - ref.casimir) + (kinetic_energy(state) + ext - ref.energy_integral) \
        - p.E0 * (density.total_mass - ref.mass)


def norm_distance(ensemble: ParticleEnsemble, model: ShellModel) -> float:
    """Particle estimate of ‖f - f0‖_{k,l} over the support of f."""
    p = model.params
    lam = ensemble.L - p.L0
    f0 = model.f0(ensemble.r, ensemble.w, ensemble.L)
    f = ensemble.f_value
    term = np.abs(f - f0) ** (1.0 + 1.0 / p.k) * lam ** (-p.l / p.k) / f
    return float(np.sum(ensemble.weight * term)) ** (p.k / (p.k + 1.0))


def reference_values(model: ShellModel) -> _ModelReference:
    return _reference(model)
