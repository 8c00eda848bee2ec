"""Enclosed mass, potential and field energies of spherically symmetric densities.

Units have G = 1. A density lives on a :class:`~vshell.core.RadialGrid` and is
taken to vanish below ``radii[0]``. Fields come in two flavours sharing one
interface:

* :class:`RadialField` (grid based, ``m`` piecewise linear between nodes),
* :class:`PointShellField` (a set of infinitely thin shells, ``m`` a step
  function), used for particle ensembles.

Field energies and distances are integrated exactly for both
representations by splitting ``(0, ∞)`` at the union of their breakpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import RadialGrid
from .errors import InvalidArgument

__all__ = [
    "RadialDensity",
    "RadialField",
    "PointShellField",
    "make_density",
    "enclosed_mass",
    "potential_from_mass",
    "field_from_density",
    "effective_radial_force",
    "field_energy",
    "field_energy_within",
    "field_distance",
    "pairing_identity_check",
    "field_bound_ratio",
]

FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True, eq=False)
class RadialDensity:
    grid: RadialGrid
    rho: np.ndarray = field(repr=False)
    total_mass: float = 0.0

    @property
    def radii(self):
        return self.grid.radii

    @property
    def sup(self) -> float:
        return float(self.rho.max()) if self.rho.size else 0.0


def make_density(grid: RadialGrid, rho) -> RadialDensity:
    rho = np.array(rho, dtype=float)
    if rho.shape != grid.radii.shape:
        raise InvalidArgument("density and grid sizes differ")
    if not np.all(np.isfinite(rho)):
        raise InvalidArgument("density has non-finite entries")
    if np.any(rho < 0.0):
        raise InvalidArgument("density must be nonnegative")
    rho.setflags(write=False)
    mass = grid.integrate(FOUR_PI * grid.radii**2 * rho)
    return RadialDensity(grid, rho, mass)


def enclosed_mass(density: RadialDensity) -> np.ndarray:
    """m(r_i) = 4π ∫_0^{r_i} s² ρ(s) ds by cumulative trapezoid."""
    if np.any(density.rho < 0.0):
        raise InvalidArgument("density must be nonnegative")
    r = density.grid.radii
    m = density.grid.cumulative(FOUR_PI * r * r * density.rho)
    # rounding can not break monotonicity for ρ >= 0, but keep it exact
    return np.maximum.accumulate(m)


def _segment_coefficients(radii, m):
    """m(r) = alpha + beta r on each [radii[i], radii[i+1]]."""
    beta = np.diff(m) / np.diff(radii)
    alpha = m[:-1] - beta * radii[:-1]
    return alpha, beta


def _inverse_square_integral(alpha, beta, a, b):
    """∫_a^b (alpha + beta s)/s² ds."""
    return alpha * (1.0 / a - 1.0 / b) + beta * np.log(b / a)


def potential_from_mass(grid: RadialGrid, m) -> np.ndarray:
    """U(r_i) = -∫_{r_i}^{r_cut} m(s)/s² ds - M/r_cut, m piecewise linear."""
    m = np.asarray(m, dtype=float)
    r = grid.radii
    alpha, beta = _segment_coefficients(r, m)
    seg = _inverse_square_integral(alpha, beta, r[:-1], r[1:])
    U = np.empty_like(m)
    U[-1] = -m[-1] / r[-1]
    U[:-1] = U[-1] - np.cumsum(seg[::-1])[::-1]
    return U


class _FieldMixin:
    Mc: float

    def force_at(self, r):
        """Radial acceleration -(m(r) + Mc)/r², centrifugal term excluded."""
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0.0):
            raise InvalidArgument("force evaluated at r <= 0")
        return -(self.mass_at(r) + self.Mc) / (r * r)


@dataclass(frozen=True, eq=False)
class RadialField(_FieldMixin):
    """m and U on grid nodes. U excludes the central mass term -Mc/r."""

    grid: RadialGrid
    m: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)
    Mc: float = 0.0

    def __post_init__(self):
        alpha, beta = _segment_coefficients(self.grid.radii, self.m)
        object.__setattr__(self, "_alpha", alpha)
        object.__setattr__(self, "_beta", beta)

    @property
    def total_mass(self) -> float:
        return float(self.m[-1])

    @property
    def breakpoints(self):
        return self.grid.radii

    def pieces(self, mid):
        r = self.grid.radii
        idx = np.searchsorted(r, mid) - 1
        inside = (idx >= 0) & (idx < r.size - 1)
        j = np.clip(idx, 0, r.size - 2)
        alpha = np.where(inside, self._alpha[j], np.where(idx < 0, 0.0, self.total_mass))
        beta = np.where(inside, self._beta[j], 0.0)
        return alpha, beta

    def mass_at(self, r):
        return np.interp(r, self.grid.radii, self.m, left=0.0, right=self.total_mass)

    def potential_at(self, r):
        r = np.asarray(r, dtype=float)
        radii = self.grid.radii
        j = np.clip(np.searchsorted(radii, r, side="right") - 1, 0, radii.size - 2)
        rj = radii[j]
        inner = self.U[j] + _inverse_square_integral(self._alpha[j], self._beta[j], rj, np.maximum(r, rj))
        out = np.where(r < radii[0], self.U[0], inner)
        return np.where(r > radii[-1], -self.total_mass / np.maximum(r, radii[-1]), out)


@dataclass(frozen=True, eq=False)
class PointShellField(_FieldMixin):
    """Field of thin shells at ``radii`` (sorted) with masses ``weights``."""

    radii: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    Mc: float = 0.0

    def __post_init__(self):
        prefix = np.empty(self.radii.size + 1)
        prefix[0] = 0.0
        np.cumsum(self.weights, out=prefix[1:])
        # suffix[i] = Σ_{j >= i} w_j / r_j
        suffix = np.zeros(self.radii.size + 1)
        if self.radii.size:
            suffix[:-1] = np.cumsum((self.weights / self.radii)[::-1])[::-1]
        object.__setattr__(self, "_prefix", prefix)
        object.__setattr__(self, "_suffix", suffix)

    @classmethod
    def from_particles(cls, r, weight, Mc=0.0, order=None):
        if order is None:
            order = np.argsort(r, kind="stable")
        return cls(np.ascontiguousarray(r[order]), np.ascontiguousarray(weight[order]), Mc)

    @property
    def total_mass(self) -> float:
        return float(self._prefix[-1])

    @property
    def breakpoints(self):
        return self.radii

    def pieces(self, mid):
        idx = np.searchsorted(self.radii, mid, side="left")
        return self._prefix[idx], np.zeros_like(np.asarray(mid, dtype=float))

    def mass_at(self, r):
        """Mass strictly inside r."""
        return self._prefix[np.searchsorted(self.radii, r, side="left")]

    def potential_at(self, r):
        r = np.asarray(r, dtype=float)
        idx = np.searchsorted(self.radii, r, side="left")
        return -self._prefix[idx] / r - self._suffix[idx]


def field_from_density(density: RadialDensity, Mc: float = 0.0) -> RadialField:
    m = enclosed_mass(density)
    U = potential_from_mass(density.grid, m)
    m.setflags(write=False)
    U.setflags(write=False)
    return RadialField(density.grid, m, U, float(Mc))


def effective_radial_force(fld, r):
    """-(m(r) + Mc)/r²; raises for r <= 0."""
    out = fld.force_at(np.asarray(r, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def _merged_segments(*fields):
    breaks = np.unique(np.concatenate([np.asarray(f.breakpoints, dtype=float) for f in fields]))
    a, b = breaks[:-1], breaks[1:]
    return breaks, a, b, 0.5 * (a + b)


def _square_integral(fld1, fld2=None):
    """½ ∫_0^∞ (m1 - m2)² / r² dr, exact for the piecewise representations."""
    fields = (fld1,) if fld2 is None else (fld1, fld2)
    breaks, a, b, mid = _merged_segments(*fields)
    if breaks.size == 0:
        return 0.0
    c, beta = fld1.pieces(mid)
    tail = fld1.total_mass
    if fld2 is not None:
        c2, beta2 = fld2.pieces(mid)
        c, beta = c - c2, beta - beta2
        tail = tail - fld2.total_mass
    seg = c * c * (1.0 / a - 1.0 / b) + 2.0 * c * beta * np.log(b / a) + beta * beta * (b - a)
    return 0.5 * (float(np.sum(seg)) + tail * tail / breaks[-1])


def field_energy(fld) -> float:
    """(1/8π) ∫ |∇U|² dx = ½ ∫ m²/r² dr, with the exterior tail M²/(2 r_cut)."""
    return max(_square_integral(fld), 0.0)


def field_energy_within(fld, R: float) -> float:
    """½ ∫_0^R m²/r² dr, exact for the piecewise representation."""
    breaks = np.asarray(fld.breakpoints, dtype=float)
    if breaks.size == 0 or R <= breaks[0]:
        return 0.0
    inner = breaks[breaks < R]
    points = np.append(inner, min(R, float(breaks[-1])))
    a, b = points[:-1], points[1:]
    total = 0.0
    if a.size:
        c, beta = fld.pieces(0.5 * (a + b))
        total = float(np.sum(c * c * (1.0 / a - 1.0 / b) + 2.0 * c * beta * np.log(b / a) + beta * beta * (b - a)))
    if R > breaks[-1]:
        M = fld.total_mass
        total += M * M * (1.0 / breaks[-1] - 1.0 / R)
    return 0.5 * total


def field_distance(fld1, fld2) -> float:
    """(1/8π) ∫ |∇U1 - ∇U2|² dx; symmetric, zero for identical fields."""
    return max(_square_integral(fld1, fld2), 0.0)


def _product_integral(fld1, fld2):
    """∫_0^∞ m1 m2 / r² dr."""
    breaks, a, b, mid = _merged_segments(fld1, fld2)
    a1, b1 = fld1.pieces(mid)
    a2, b2 = fld2.pieces(mid)
    seg = a1 * a2 * (1.0 / a - 1.0 / b) + (a1 * b2 + a2 * b1) * np.log(b / a) + b1 * b2 * (b - a)
    return float(np.sum(seg)) + fld1.total_mass * fld2.total_mass / breaks[-1]


def _segment_potential_integral(fld, a, b):
    """∫_a^b U(r) dr for segments lying inside one piece of ``fld``."""
    alpha, beta = fld.pieces(0.5 * (a + b))
    log_ratio = np.log(b / a)
    inner = alpha * (b * (1.0 / a - 1.0 / b) - log_ratio) + beta * (b * log_ratio - (b - a))
    return fld.potential_at(a) * (b - a) + inner


def pairing_identity_check(rho1: RadialDensity, rho2: RadialDensity, method: str = "exact"):
    """Both sides of ∫∇U1·∇U2 dx = -4π ∫ U1 ρ2 dx.

    lhs is the shell integral 4π ∫ m1 m2 / r² dr. For ``exact`` the rhs uses
    4π r² ρ2 = dm2/dr as represented on the grid (constant per segment) and
    integrates U1 against it segment by segment in closed form; for
    ``trapezoid`` it is a plain trapezoidal volume integral, accurate to O(h²).
    """
    f1 = field_from_density(rho1)
    f2 = field_from_density(rho2)
    lhs = FOUR_PI * _product_integral(f1, f2)
    if method == "trapezoid":
        r = rho2.grid.radii
        rhs = -FOUR_PI * rho2.grid.integrate(f1.potential_at(r) * rho2.rho * FOUR_PI * r * r)
    elif method == "exact":
        breaks, a, b, mid = _merged_segments(f1, f2)
        _, slope = f2.pieces(mid)
        rhs = -FOUR_PI * float(np.sum(slope * _segment_potential_integral(f1, a, b)))
    else:
        raise InvalidArgument(f"unknown method {method!r}")
    return float(lhs), float(rhs)


def field_bound_ratio(density: RadialDensity) -> float:
    """sup m/r² divided by 3 (2π)^{2/3} ‖ρ‖₁^{1/3} ‖ρ‖_∞^{2/3}; sup over nodes."""
    rho_inf = density.sup
    if rho_inf <= 0.0 or density.total_mass <= 0.0:
        return 0.0
    m = enclosed_mass(density)
    sup_field = float(np.max(m / density.grid.radii**2))
    bound = 3.0 * (2.0 * math.pi) ** (2.0 / 3.0) * density.total_mass ** (1.0 / 3.0) * rho_inf ** (2.0 / 3.0)
    return sup_field / bound
