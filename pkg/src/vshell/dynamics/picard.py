"""Picard iteration over particle trajectories.

Iterate 0 moves the particles through the field of the initial ensemble held
fixed in time. Iterate n+1 moves the same initial particles through the
time-dependent field recorded from iterate n, interpolated linearly in time
between snapshots. The gap between consecutive iterates is the largest
(r, w) distance of any particle at the horizon.

By default the recorded fields are smoothed: the enclosed mass is sampled on
fixed geometric knots with each particle spread linearly over one local knot
spacing, and interpolated linearly in r. That field depends Lipschitz
continuously on the particle positions, which the contraction needs. The
exact point-shell field (``field="shells"``) jumps by one particle weight
whenever two trajectories swap order, so consecutive iterates stop
contracting at a floor set by such crossings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..ensemble import ParticleEnsemble
from ..errors import InvalidArgument
from ..radial_poisson import PointShellField
from .integrator import step

__all__ = ["PicardResult", "FieldHistory", "SmoothShellField", "picard_iterate", "phase_gap", "make_knots"]


@dataclass(frozen=True, eq=False)
class SmoothShellField:
    """Piecewise-linear enclosed mass on ``knots`` (cloud-in-cell smoothing)."""

    knots: np.ndarray
    m: np.ndarray
    Mc: float = 0.0

    @classmethod
    def from_particles(cls, r, weight, knots, Mc=0.0):
        order = np.argsort(r, kind="stable")
        rs, ws = r[order], weight[order]
        cw = np.concatenate(([0.0], np.cumsum(ws)))
        cwr = np.concatenate(([0.0], np.cumsum(ws * rs)))
        spacing = np.gradient(knots)
        lo = np.searchsorted(rs, knots - 0.5 * spacing, side="left")
        hi = np.searchsorted(rs, knots + 0.5 * spacing, side="left")
        # particles inside the window contribute the ramp (k + h/2 - r)/h
        inside_w = cw[hi] - cw[lo]
        inside_wr = cwr[hi] - cwr[lo]
        m = cw[lo] + ((knots + 0.5 * spacing) * inside_w - inside_wr) / spacing
        return cls(knots, np.maximum.accumulate(m), Mc)

    @property
    def total_mass(self):
        return float(self.m[-1])

    def mass_at(self, r):
        return np.interp(r, self.knots, self.m, left=0.0, right=self.total_mass)


def make_knots(ensemble: ParticleEnsemble, count: int = 256) -> np.ndarray:
    lo, hi = float(ensemble.r.min()), float(ensemble.r.max())
    return np.geomspace(0.5 * lo, 2.0 * hi, count)


@dataclass
class FieldHistory:
    """Fields at times ``n * spacing``."""

    spacing: float
    fields: list

    def mass_at(self, t, r):
        u = t / self.spacing
        i = int(math.floor(u + 1e-9))
        theta = u - i
        last = len(self.fields) - 1
        if i >= last:
            return self.fields[last].mass_at(r)
        if abs(theta) < 1e-9:
            return self.fields[i].mass_at(r)
        return (1.0 - theta) * self.fields[i].mass_at(r) + theta * self.fields[i + 1].mass_at(r)


@dataclass
class PicardResult:
    iterates: list  # ensembles at the horizon, iterate 0 first
    gaps: list  # gaps[n-1] = distance between iterates n and n-1
    last_history: FieldHistory


def _snapshot(ensemble, Mc, knots):
    if knots is None:
        return PointShellField.from_particles(ensemble.r, ensemble.weight, Mc)
    return SmoothShellField.from_particles(ensemble.r, ensemble.weight, knots, Mc)


def phase_gap(a: ParticleEnsemble, b: ParticleEnsemble) -> float:
    return float(np.max(np.hypot(a.r - b.r, a.w - b.w)))


def _run(initial, steps, dt, snapshot_every, Mc, knots, mass_fn=None, frozen=None):
    ens = initial.copy()
    ens.order = None
    fields = [_snapshot(ens, Mc, knots)]
    m = None
    for n in range(steps):
        if mass_fn is None:
            step(ens, "frozen", dt, field=frozen, t=n * dt, Mc=Mc, start_mass=m)
        else:
            step(ens, "picard", dt, t=n * dt, mass_fn=mass_fn, Mc=Mc, start_mass=m)
        m = ens.last_mass
        if (n + 1) % snapshot_every == 0:
            fields.append(_snapshot(ens, Mc, knots))
    if steps % snapshot_every:
        # final partial interval: keep the last state as an extra snapshot
        fields.append(_snapshot(ens, Mc, knots))
    return ens, FieldHistory(dt * snapshot_every, fields)


def picard_iterate(initial: ParticleEnsemble, horizon: float, iterations: int, dt: float,
                   snapshot_every: int = 1, Mc: float | None = None, field: str = "smooth",
                   knot_count: int = 256) -> PicardResult:
    """Iterates 0..``iterations`` at time ``horizon`` and the gaps between them."""
    if field not in ("smooth", "shells"):
        raise InvalidArgument(f"field must be 'smooth' or 'shells', got {field!r}")
    if not horizon >= dt > 0.0:
        raise InvalidArgument(f"need horizon >= dt > 0, got horizon={horizon}, dt={dt}")
    if int(iterations) != iterations or iterations < 1:
        raise InvalidArgument(f"iterations must be a positive integer, got {iterations}")
    if int(snapshot_every) != snapshot_every or snapshot_every < 1:
        raise InvalidArgument("snapshot_every must be a positive integer")
    if Mc is None:
        Mc = initial.params.Mc if initial.params is not None else 0.0
    steps = int(round(horizon / dt))
    knots = make_knots(initial, knot_count) if field == "smooth" else None
    frozen = _snapshot(initial, Mc, knots)
    current, history = _run(initial, steps, dt, snapshot_every, Mc, knots, frozen=frozen)
    iterates, gaps = [current], []
    for _ in range(int(iterations)):
        current, history = _run(initial, steps, dt, snapshot_every, Mc, knots, mass_fn=history.mass_at)
        gaps.append(phase_gap(current, iterates[-1]))
        iterates.append(current)
    return PicardResult(iterates, gaps, history)
