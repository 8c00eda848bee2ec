"""Self-consistent static shells.

The steady state is ``f0 = A (E0 - E)_+^k (L - L0)_+^l`` with microscopic
energy ``E = ½(w² + L/r²) + U0(r) - Mc/r``. Integrating over velocities,

    ρ0(r) = A C(k, l) r^{2l} g(r)_+^{n},   g(r) = E0 - U0(r) + Mc/r - L0/(2 r²),

with ``n = k + l + 3/2``. The potential is found by damped fixed-point
iteration ``ρ -> U -> ρ``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import RadialGrid, ShellParams, shell_constant
from .errors import (
    BracketingFailure,
    E0Nonnegative,
    EmptyShell,
    InvalidArgument,
    NonConvergence,
    SolverError,
)
from .radial_poisson import RadialDensity, RadialField, field_from_density, make_density

__all__ = [
    "SolveOptions",
    "ShellModel",
    "ELResidual",
    "bracket",
    "shell_density_from_potential",
    "solve_shell",
    "support_radii",
    "euler_lagrange_residual",
    "moment_integral",
    "inner_orbit_period",
]

log = logging.getLogger(__name__)

MODES = ("fixed-E0", "fixed-mass")


@dataclass(frozen=True)
class SolveOptions:
    relaxation: float = 0.5
    max_iterations: int = 20000
    tolerance: float = 1e-10
    mode: str = "fixed-E0"
    target_mass: float | None = None
    bisection_tolerance: float = 1e-10
    initial_mass_guess: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.relaxation <= 1.0):
            raise InvalidArgument(f"relaxation must lie in (0, 1], got {self.relaxation}")
        if self.tolerance <= 0.0 or self.bisection_tolerance <= 0.0:
            raise InvalidArgument("tolerances must be positive")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise InvalidArgument("max_iterations must be a positive integer")
        if self.mode not in MODES:
            raise InvalidArgument(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "fixed-mass" and not (self.target_mass and self.target_mass > 0.0):
            raise InvalidArgument("fixed-mass mode needs a positive target_mass")


def bracket(params: ShellParams, r, U):
    """E0 - U(r) + Mc/r - L0/(2 r²)."""
    r = np.asarray(r, dtype=float)
    return params.E0 - U + params.Mc / r - params.L0 / (2.0 * r * r)


def _density_values(params, r, U):
    g = np.maximum(bracket(params, r, np.asarray(U, dtype=float)), 0.0)
    return params.A * shell_constant(params.k, params.l) * r ** (2.0 * params.l) * g**params.n


def shell_density_from_potential(params: ShellParams, grid: RadialGrid, U) -> RadialDensity:
    """ρ(r_i) = A C(k, l) r_i^{2l} g(r_i)_+^n for the potential values U."""
    return make_density(grid, _density_values(params, grid.radii, U))


def moment_integral(params: ShellParams, p: float, r: float, g: float) -> float:
    """∫∫ (g - ½w² - (L-L0)/(2r²))_+^p (L-L0)_+^l dw dL in closed form."""
    if p <= 0 or r <= 0 or g < 0:
        raise InvalidArgument(f"need p > 0, r > 0, g >= 0 (got {p}, {r}, {g})")
    return shell_constant(p, params.l) / math.pi * r ** (2.0 * params.l + 2.0) * g ** (p + params.l + 1.5)


def _moment_array(p, l, r, g):
    g = np.maximum(g, 0.0)
    return shell_constant(p, l) / math.pi * r ** (2.0 * l + 2.0) * g ** (p + l + 1.5)


@dataclass(frozen=True, eq=False)
class ShellModel:
    """A solved shell. ``generating_field`` is the potential whose bracket
    produced ``rho0``; at convergence it agrees with ``field0`` to the solver
    tolerance."""

    params: ShellParams
    grid: RadialGrid
    rho0: RadialDensity
    field0: RadialField
    R1: float
    R2: float
    mass: float
    generating_field: RadialField = field(repr=False, default=None)
    iterations: int = 0

    def bracket_at(self, r):
        r = np.asarray(r, dtype=float)
        return bracket(self.params, r, self.field0.potential_at(r))

    def energy(self, r, w, L, fld=None):
        fld = self.field0 if fld is None else fld
        r = np.asarray(r, dtype=float)
        return 0.5 * (w * w + L / (r * r)) + fld.potential_at(r) - self.params.Mc / r

    def f0(self, r, w, L):
        p = self.params
        lam = np.maximum(np.asarray(L, dtype=float) - p.L0, 0.0)
        x = np.maximum(p.E0 - self.energy(r, w, L), 0.0)
        return p.A * x**p.k * lam**p.l


def _support_from_bracket(radii, g):
    pos = np.flatnonzero(g > 0.0)
    if pos.size == 0:
        return None
    i, j = pos[0], pos[-1]
    if i == 0 or j == radii.size - 1:
        return "truncated"
    # linear sign-change location between neighbouring nodes
    R1 = radii[i - 1] + (radii[i] - radii[i - 1]) * (-g[i - 1]) / (g[i] - g[i - 1])
    R2 = radii[j] + (radii[j + 1] - radii[j]) * g[j] / (g[j] - g[j + 1])
    return float(R1), float(R2)


def support_radii(model: ShellModel):
    g = bracket(model.params, model.grid.radii, model.field0.U)
    out = _support_from_bracket(model.grid.radii, g)
    if out is None or out == "truncated":
        raise SolverError("model has no interior support", reason="bad-model")
    return out


def _solve_fixed_e0(params, grid, opts):
    if params.E0 >= 0.0:
        raise E0Nonnegative(f"E0 = {params.E0} >= 0 gives a shell of infinite mass")
    r = grid.radii
    theta = opts.relaxation
    rho = _density_values(params, r, -opts.initial_mass_guess / r)
    if not np.any(rho > 0.0):
        raise EmptyShell(f"bracket empty on the grid for E0 = {params.E0}")
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(1, int(opts.max_iterations) + 1):
            if not np.all(np.isfinite(rho)):
                raise NonConvergence(f"iteration diverged at step {it} (mass runaway)", reason="diverged")
            gen = field_from_density(make_density(grid, rho), params.Mc)
            new = _density_values(params, r, gen.U)
            scale = new.max()
            if not np.isfinite(scale) or not np.isfinite(gen.total_mass):
                raise NonConvergence(f"iteration diverged at step {it} (mass runaway)", reason="diverged")
            if scale <= 0.0:
                raise EmptyShell(f"support vanished at step {it}")
            change = float(np.max(np.abs(new - rho)) / scale)
            if change < opts.tolerance:
                return new, gen, it
            rho = (1.0 - theta) * rho + theta * new
    raise NonConvergence(
        f"no convergence after {opts.max_iterations} iterations (last change {change:.3e})",
        reason="max-iterations",
    )


def _build_model(params, grid, rho, gen, iterations):
    rho0 = make_density(grid, rho)
    field0 = field_from_density(rho0, params.Mc)
    g = bracket(params, grid.radii, field0.U)
    support = _support_from_bracket(grid.radii, g)
    if support is None:
        raise EmptyShell("no support at termination")
    if support == "truncated":
        raise SolverError("support reaches the grid boundary; enlarge the grid", reason="support-truncated")
    R1, R2 = support
    return ShellModel(params, grid, rho0, field0, R1, R2, rho0.total_mass, gen, iterations)


def _solve_e0(params, grid, opts):
    rho, gen, it = _solve_fixed_e0(params, grid, opts)
    return _build_model(params, grid, rho, gen, it)


def _solve_fixed_mass(params, grid, opts):
    target = opts.target_mass
    tol = opts.bisection_tolerance

    def attempt(E0):
        if E0 >= 0.0:
            return None
        try:
            return _solve_e0(params.replace(E0=E0), grid, opts)
        except (NonConvergence, EmptyShell):
            return None

    E = min(params.E0, -tol)
    model = attempt(E)
    if model is None:
        raise BracketingFailure(f"starting E0 = {E} does not give a shell")
    # mass grows with E0 on the branch reached by the iteration; walk towards
    # the target with a growing step, halving it whenever a solve fails
    upward = model.mass < target
    sign = 1.0 if upward else -1.0
    lo = hi = (E, model)
    step = 0.05 * abs(E)
    while True:
        if step < tol:
            raise BracketingFailure(f"could not bracket target mass {target} (search from E0 = {params.E0})")
        trial = attempt(E + sign * step)
        if trial is None:
            step *= 0.5
            continue
        if (trial.mass >= target) == upward:
            if upward:
                hi = (E + sign * step, trial)
            else:
                lo = (E + sign * step, trial)
            break
        E += sign * step
        if upward:
            lo = (E, trial)
        else:
            hi = (E, trial)
        step *= 2.0
    (E_lo, m_lo), (E_hi, m_hi) = lo, hi
    while E_hi - E_lo > tol:
        mid = 0.5 * (E_lo + E_hi)
        trial = attempt(mid)
        if trial is None:
            raise BracketingFailure(f"solve failed inside the bracket at E0 = {mid}")
        if not (m_lo.mass <= trial.mass <= m_hi.mass):
            raise BracketingFailure("mass is not monotone in E0 inside the bracket", reason="non-monotone")
        if trial.mass < target:
            E_lo, m_lo = mid, trial
        else:
            E_hi, m_hi = mid, trial
    best = m_lo if abs(m_lo.mass - target) <= abs(m_hi.mass - target) else m_hi
    log.info("fixed-mass solve: E0 = %.12g, mass = %.12g", best.params.E0, best.mass)
    return best


def solve_shell(params: ShellParams, grid: RadialGrid, opts: SolveOptions | None = None) -> ShellModel:
    """Solve for the self-consistent shell.

    ``fixed-E0`` runs damped Picard iteration on ρ; ``fixed-mass`` bisects E0
    over such solves until the mass matches ``opts.target_mass``.
    """
    opts = SolveOptions() if opts is None else opts
    if params.E0 >= 0.0 and opts.mode == "fixed-E0":
        raise E0Nonnegative(f"E0 = {params.E0} >= 0 gives a shell of infinite mass")
    if opts.mode == "fixed-mass":
        return _solve_fixed_mass(params, grid, opts)
    return _solve_e0(params, grid, opts)


def inner_orbit_period(model: ShellModel) -> float:
    """Circular orbit period at the inner support radius (only Mc inside)."""
    mc = model.params.Mc + float(model.field0.mass_at(model.R1))
    return 2.0 * math.pi * math.sqrt(model.R1**3 / mc)


@dataclass(frozen=True)
class ELResidual:
    max: float
    mean: float
    samples: int
    outside_violations: int
    outside_samples: int


def euler_lagrange_residual(model: ShellModel, sample_count: int = 10_000, seed: int = 0,
                            amplitude: float | None = None) -> ELResidual:
    """Relative residual of Φ'((L-L0)^{-l} f0) + E - E0 on the support.

    ``f0`` is evaluated with the potential that generated ``rho0`` and ``E``
    with the potential of ``rho0`` itself, so the residual measures the
    fixed-point error of the solve. ``amplitude`` overrides A in f0 only.
    """
    if not isinstance(model, ShellModel) or model.generating_field is None:
        raise InvalidArgument("euler_lagrange_residual needs a solved ShellModel")
    p = model.params
    A = p.A if amplitude is None else amplitude
    rng = np.random.default_rng(seed)
    gen = model.generating_field
    r = rng.uniform(model.R1, model.R2, size=4 * sample_count)
    g_gen = bracket(p, r, gen.potential_at(r))
    r, g_gen = r[g_gen > 0.0][:sample_count], g_gen[g_gen > 0.0][:sample_count]
    w = np.sqrt(2.0 * g_gen) * rng.uniform(-1.0, 1.0, r.size)
    lam = 2.0 * r * r * (g_gen - 0.5 * w * w) * rng.uniform(0.0, 1.0, r.size)
    keep = lam > 0.0
    r, w, lam, g_gen = r[keep], w[keep], lam[keep], g_gen[keep]
    L = p.L0 + lam
    x_gen = g_gen - 0.5 * w * w - lam / (2.0 * r * r)
    f0 = A * np.maximum(x_gen, 0.0) ** p.k * lam**p.l
    y = f0 * lam ** (-p.l)
    res = (1.0 + 1.0 / p.k) * y ** (1.0 / p.k) + model.energy(r, w, L) - p.E0
    res = np.abs(res) / abs(p.E0)

    # where f0 = 0 with L >= L0 the energy must be at least E0
    ro = rng.uniform(0.5 * model.R1, 1.5 * model.R2, sample_count)
    wmax = math.sqrt(2.0 * max(float(np.max(model.bracket_at(model.grid.radii))), 0.0)) + 1.0
    wo = rng.uniform(-wmax, wmax, sample_count)
    Lo = p.L0 + rng.uniform(0.0, 2.0 * (1.5 * model.R2) ** 2 * wmax**2, sample_count)
    outside = model.f0(ro, wo, Lo) == 0.0
    violations = int(np.count_nonzero(model.energy(ro, wo, Lo)[outside] < p.E0))
    return ELResidual(float(res.max()), float(res.mean()), int(res.size), violations, int(outside.sum()))
