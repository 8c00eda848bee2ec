"""Kick-drift-kick integration of the reduced characteristics.

    ṙ = w,   ẇ = L/r³ - (m(r) + Mc)/r²

In self-consistent mode m comes from the particles themselves: sorted radii
and a running sum of weights, a particle seeing half of the weight that sits
exactly at its own radius (its own included). That choice makes the force the
exact gradient of the point-shell potential energy used in the diagnostics.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields

import numpy as np

from ..ensemble import ParticleEnsemble, bin_density
from ..errors import ConstraintViolation, IntegratorBlowup, InvalidArgument
from ..functionals import distance_d
from ..radial_poisson import PointShellField, RadialDensity, field_bound_ratio, field_distance, field_energy
from ..steady_state import ShellModel
from . import kernels

__all__ = [
    "FIELD_MODES",
    "EvolveConfig",
    "DiagnosticsRecord",
    "deposit_density",
    "self_enclosed_mass",
    "accelerations",
    "step",
    "default_dt",
    "evolve",
    "particle_energy",
    "statistical_floor",
]

log = logging.getLogger(__name__)

FIELD_MODES = ("frozen", "self-consistent", "picard")


@dataclass(frozen=True)
class EvolveConfig:
    dt: float
    t_end: float
    output_every: int = 10
    field_mode: str = "self-consistent"
    deposition_bins: int = 200
    picard_iterations: int = 4
    snapshot_every: int = 1

    def __post_init__(self):
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise InvalidArgument(f"dt must be positive, got {self.dt}")
        if not (self.t_end >= self.dt):
            raise InvalidArgument(f"t_end must be at least dt, got {self.t_end} < {self.dt}")
        for name in ("output_every", "deposition_bins", "picard_iterations", "snapshot_every"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidArgument(f"{name} must be a positive integer, got {value}")
        if self.field_mode not in FIELD_MODES:
            raise InvalidArgument(f"field_mode must be one of {FIELD_MODES}, got {self.field_mode!r}")

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    H: float
    E_kin: float
    E_pot: float
    casimir: float
    mass: float
    R_min: float
    P_max: float
    d_f_f0: float
    field_dist: float
    field_bound_ratio: float

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def row(self):
        return [getattr(self, name) for name in self.columns()]


def _order(ensemble: ParticleEnsemble) -> np.ndarray:
    if ensemble.order is None or ensemble.order.size != ensemble.count:
        ensemble.order = np.argsort(ensemble.r, kind="stable")
    else:
        kernels.sort_order(ensemble.r, ensemble.order)
    return ensemble.order


def self_enclosed_mass(ensemble: ParticleEnsemble) -> np.ndarray:
    """Per-particle enclosed mass with the half-weight tie rule."""
    return kernels.enclosed_mass(ensemble.r, ensemble.weight, _order(ensemble))


def deposit_density(ensemble: ParticleEnsemble, bins: int) -> tuple[RadialDensity, PointShellField]:
    """Bin-averaged density (diagnostics) and the exact point-shell field."""
    if ensemble.count == 0:
        raise InvalidArgument("cannot deposit an empty ensemble")
    order = _order(ensemble)
    Mc = ensemble.params.Mc if ensemble.params is not None else 0.0
    return bin_density(ensemble, bins), PointShellField.from_particles(ensemble.r, ensemble.weight, Mc, order)


def _check_radii(r, t):
    if not np.all(r > 0.0):
        raise IntegratorBlowup(f"particle reached r <= 0 at t = {t:.6g}", time=t)


def accelerations(ensemble: ParticleEnsemble, field=None, Mc: float | None = None) -> np.ndarray:
    """ẇ = L/r³ - (m(r) + Mc)/r²; the ensemble's own field when ``field`` is None."""
    _check_radii(ensemble.r, float("nan"))
    if field is None:
        m = self_enclosed_mass(ensemble)
        Mc = (ensemble.params.Mc if ensemble.params is not None else 0.0) if Mc is None else Mc
    else:
        m = np.asarray(field.mass_at(ensemble.r), dtype=float)
        Mc = field.Mc if Mc is None else Mc
    acc = np.zeros(ensemble.count)
    kernels.kick(acc, ensemble.r, ensemble.L, np.ascontiguousarray(m), float(Mc), 1.0)
    return acc


def step(ensemble: ParticleEnsemble, field_mode: str, dt: float, field=None, t: float = 0.0,
         mass_fn=None, Mc: float | None = None, start_mass=None) -> ParticleEnsemble:
    """One KDK step, in place.

    ``frozen`` uses ``field``; ``self-consistent`` rebuilds the particle field
    after the drift; ``picard`` calls ``mass_fn(t, r)`` for a time-dependent
    enclosed mass. ``start_mass`` may pass the enclosed masses at the current
    positions (from the previous step), which leaves one field rebuild per
    step; the end-of-step masses are left in ``ensemble.last_mass``.
    """
    if not dt > 0.0:
        raise InvalidArgument(f"dt must be positive, got {dt}")
    if field_mode not in FIELD_MODES:
        raise InvalidArgument(f"unknown field mode {field_mode!r}")
    if Mc is None:
        if field is not None:
            Mc = field.Mc
        else:
            Mc = ensemble.params.Mc if ensemble.params is not None else 0.0
    Mc = float(Mc)

    def mass(time):
        if field_mode == "self-consistent":
            return self_enclosed_mass(ensemble)
        if field_mode == "picard":
            return np.ascontiguousarray(mass_fn(time, ensemble.r), dtype=float)
        if field is None:
            raise InvalidArgument("frozen mode needs a field")
        return np.ascontiguousarray(field.mass_at(ensemble.r), dtype=float)

    h = 0.5 * dt
    m = mass(t) if start_mass is None else start_mass
    kernels.kick(ensemble.w, ensemble.r, ensemble.L, m, Mc, h)
    low = kernels.drift(ensemble.r, ensemble.w, dt)
    if not low > 0.0:
        raise IntegratorBlowup(f"particle reached r <= 0 at t = {t + dt:.6g}", time=t + dt)
    m = mass(t + dt)
    kernels.kick(ensemble.w, ensemble.r, ensemble.L, m, Mc, h)
    ensemble.last_mass = m
    return ensemble


def default_dt(ensemble: ParticleEnsemble, fraction: float = 0.01) -> float:
    """``fraction`` of the shortest circular-orbit period 2π√(r³/(m+Mc)) over particles."""
    Mc = ensemble.params.Mc if ensemble.params is not None else 0.0
    m = self_enclosed_mass(ensemble) + Mc
    r = ensemble.r
    period = 2.0 * math.pi * np.sqrt(r**3 / np.maximum(m, np.finfo(float).tiny))
    return fraction * float(period.min())


def particle_energy(ensemble: ParticleEnsemble, field_energy_value: float | None = None) -> tuple[float, float, float]:
    """(E_kin, E_pot, H) of the ensemble with its own point-shell field."""
    Mc = ensemble.params.Mc if ensemble.params is not None else 0.0
    r = ensemble.r
    e_kin = float(np.sum(0.5 * ensemble.weight * (ensemble.w * ensemble.w + ensemble.L / (r * r))))
    if field_energy_value is None:
        field_energy_value = field_energy(PointShellField.from_particles(r, ensemble.weight, Mc, _order(ensemble)))
    e_pot = -field_energy_value - float(np.sum(ensemble.weight * Mc / r))
    return e_kin, e_pot, e_kin + e_pot


def _casimir_sum(ensemble):
    p = ensemble.params
    lam = ensemble.L - p.L0
    return float(np.sum(ensemble.weight * ensemble.f_value ** (1.0 / p.k) * lam ** (-p.l / p.k)))


def diagnose(ensemble: ParticleEnsemble, model: ShellModel, t: float, bins: int,
             reference_mass: float | None = None, casimir_value: float | None = None) -> DiagnosticsRecord:
    """One diagnostics row; raises if the monitored invariants fail."""
    p = model.params
    density, shells = deposit_density(ensemble, bins)
    fe = field_energy(shells)
    e_kin, e_pot, H = particle_energy(ensemble, fe)
    cas = _casimir_sum(ensemble) if casimir_value is None else casimir_value
    mass = float(np.sum(ensemble.weight))
    speeds = ensemble.speeds()
    R_min, P_max = float(ensemble.r.min()), float(speeds.max())
    if R_min * P_max < math.sqrt(p.L0) * (1.0 - 1e-12):
        raise ConstraintViolation(f"R_min * P = {R_min * P_max} < sqrt(L0) at t = {t:.6g}")
    if reference_mass is not None and mass != reference_mass:
        raise ConstraintViolation(f"mass changed from {reference_mass!r} to {mass!r} at t = {t:.6g}")
    d = distance_d(ensemble, model, raw=True, mass_rtol=1e-6)
    return DiagnosticsRecord(
        t=t,
        H=H,
        E_kin=e_kin,
        E_pot=e_pot,
        casimir=cas,
        mass=mass,
        R_min=R_min,
        P_max=P_max,
        d_f_f0=d,
        field_dist=field_distance(shells, model.field0),
        field_bound_ratio=field_bound_ratio(density),
    )


def evolve(ensemble: ParticleEnsemble, model: ShellModel, config: EvolveConfig, field=None,
           callback=None) -> list[DiagnosticsRecord]:
    """Advance ``ensemble`` in place to ``config.t_end``, recording diagnostics.

    Frozen mode integrates in ``field`` (default: the model's field).
    """
    mode = config.field_mode
    if mode == "picard":
        raise InvalidArgument("use picard_iterate for the Picard scheme")
    if ensemble.params is None:
        ensemble.params = model.params
    if mode == "frozen" and field is None:
        field = model.field0
    reference_mass = float(np.sum(ensemble.weight))
    L_initial = ensemble.L.copy()
    records = [diagnose(ensemble, model, 0.0, config.deposition_bins, reference_mass)]
    if callback:
        callback(records[-1])
    t = 0.0
    m = None
    for n in range(1, config.steps + 1):
        step(ensemble, mode, config.dt, field=field, t=t, Mc=model.params.Mc, start_mass=m)
        m = ensemble.last_mass
        t = n * config.dt
        if n % config.output_every == 0 or n == config.steps:
            rec = diagnose(ensemble, model, t, config.deposition_bins, reference_mass)
            records.append(rec)
            if callback:
                callback(rec)
            log.debug("t = %.4g H = %.10g d = %.3e", t, rec.H, rec.d_f_f0)
    if not np.array_equal(L_initial, ensemble.L):
        raise ConstraintViolation("angular momenta changed during evolution")
    return records


def statistical_floor(ensemble: ParticleEnsemble) -> float:
    """Expected field distance between an N-particle sample and its parent.

    For independent draws Var m_N(r) = M² F(1 - F)/N_eff with F the enclosed
    mass fraction, so E[½ ∫ (m_N - m)²/r² dr] = ½ ∫ M² F(1-F)/(N_eff r²) dr.
    F is estimated from the ensemble itself (a step function between
    consecutive radii, integrated exactly).
    """
    order = np.argsort(ensemble.r, kind="stable")
    r = ensemble.r[order]
    weight = ensemble.weight[order]
    M = float(weight.sum())
    if ensemble.count < 2 or M <= 0.0:
        return 0.0
    n_eff = M * M / float(np.sum(weight * weight))
    F = np.cumsum(weight)[:-1] / M
    seg = F * (1.0 - F) * (1.0 / r[:-1] - 1.0 / r[1:])
    return 0.5 * M * M * float(np.sum(seg)) / n_eff
