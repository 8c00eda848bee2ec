"""Shared parameter types, radial grids and the shell constant C(k, l)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import InvalidArgument

__all__ = [
    "ShellParams",
    "RadialGrid",
    "ScalingTriple",
    "make_log_grid",
    "grid_from_radii",
    "shell_constant",
    "shell_constant_quadrature",
    "variational_amplitude",
]


def variational_amplitude(k: float) -> float:
    """Amplitude for which the ansatz solves the Euler-Lagrange relation."""
    return (k / (k + 1.0)) ** k


@dataclass(frozen=True)
class ShellParams:
    """Parameters of the polytropic shell ansatz.

    ``f0 = A (E0 - E)_+^k (L - L0)_+^l``. When ``A`` is omitted the
    variational value ``(k/(k+1))**k`` is used.
    """

    k: float
    l: float
    L0: float
    Mc: float
    E0: float
    A: float | None = None

    def __post_init__(self):
        for name in ("k", "l", "L0", "Mc", "E0"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise InvalidArgument(f"{name} must be a finite real, got {value!r}")
        if not (0.0 < self.k <= self.l):
            raise InvalidArgument(f"need 0 < k <= l, got k={self.k}, l={self.l}")
        if self.L0 <= 0.0:
            raise InvalidArgument(f"L0 must be positive, got {self.L0}")
        if self.Mc < 0.0:
            raise InvalidArgument(f"Mc must be nonnegative, got {self.Mc}")
        if self.A is None:
            object.__setattr__(self, "A", variational_amplitude(self.k))
        elif not (self.A > 0.0 and math.isfinite(self.A)):
            raise InvalidArgument(f"A must be positive, got {self.A}")

    @property
    def n(self) -> float:
        return self.k + self.l + 1.5

    def replace(self, **changes) -> "ShellParams":
        values = dict(k=self.k, l=self.l, L0=self.L0, Mc=self.Mc, E0=self.E0, A=self.A)
        values.update(changes)
        return ShellParams(**values)

    def to_dict(self) -> dict:
        return dict(k=self.k, l=self.l, L0=self.L0, Mc=self.Mc, E0=self.E0, A=self.A)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Strictly increasing radii with trapezoidal weights for ``∫ · dr``.

    The quadrature covers ``[radii[0], r_cut]`` with ``r_cut = radii[-1]``;
    it integrates constants and linear functions exactly.
    """

    radii: np.ndarray
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.radii, self.weights):
            arr.setflags(write=False)

    @property
    def r_cut(self) -> float:
        return float(self.radii[-1])

    @property
    def size(self) -> int:
        return self.radii.size

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def cumulative(self, values) -> np.ndarray:
        """Running trapezoidal integral from ``radii[0]``; starts at 0."""
        values = np.asarray(values, dtype=float)
        seg = 0.5 * (values[1:] + values[:-1]) * np.diff(self.radii)
        out = np.empty_like(values)
        out[0] = 0.0
        np.cumsum(seg, out=out[1:])
        return out


def grid_from_radii(radii) -> RadialGrid:
    radii = np.array(radii, dtype=float)
    if radii.ndim != 1 or radii.size < 2:
        raise InvalidArgument("a grid needs at least two radii")
    if not np.all(radii > 0.0):
        raise InvalidArgument("grid radii must be positive")
    h = np.diff(radii)
    if not np.all(h > 0.0):
        raise InvalidArgument("grid radii must be strictly increasing")
    weights = np.empty_like(radii)
    weights[0] = 0.5 * h[0]
    weights[-1] = 0.5 * h[-1]
    weights[1:-1] = 0.5 * (h[1:] + h[:-1])
    return RadialGrid(radii, weights)


def make_log_grid(r_min: float, r_max: float, count: int) -> RadialGrid:
    """Geometrically spaced grid on ``[r_min, r_max]``."""
    if not (r_min > 0.0):
        raise InvalidArgument(f"r_min must be positive, got {r_min}")
    if not (r_min < r_max):
        raise InvalidArgument(f"need r_min < r_max, got {r_min} >= {r_max}")
    if int(count) != count or count < 2:
        raise InvalidArgument(f"count must be an integer >= 2, got {count}")
    radii = np.geomspace(r_min, r_max, int(count))
    radii[0], radii[-1] = r_min, r_max
    return grid_from_radii(radii)


@dataclass(frozen=True)
class ScalingTriple:
    """Rescaling ``f -> a f(b r, c w, b²c² L - (b²c² - 1) L0)``."""

    a: float
    b: float
    c: float
    eta: float | None = None

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.c > 0):
            raise InvalidArgument(f"scaling factors must be positive: {self}")
        if self.eta is not None and not (1.0 < self.eta < 2.0):
            raise InvalidArgument(f"eta must lie in (1, 2), got {self.eta}")

    @classmethod
    def mass_preserving(cls, b: float, c: float) -> "ScalingTriple":
        return cls((b * c) ** 3, b, c)

    def witness_admissible(self, k: float, l: float) -> bool:
        return self.eta is not None and (1.0 - self.eta / 2.0) * (2.0 * l + 3.0) / k > 1.0


def _check_kl(k, l):
    if not (k > 0 and l > 0):
        raise InvalidArgument(f"need k > 0 and l > 0, got k={k}, l={l}")


def shell_constant(k: float, l: float) -> float:
    """C(k, l) = 2^{l+3/2} π B(l+1, 1/2) B(l+3/2, k+1).

    Collapsing the Beta functions gives
    ``2^{l+3/2} π^{3/2} Γ(k+1) Γ(l+1) / Γ(k+l+5/2)``.
    """
    _check_kl(k, l)
    log_c = (
        (l + 1.5) * math.log(2.0)
        + 1.5 * math.log(math.pi)
        + math.lgamma(k + 1.0)
        + math.lgamma(l + 1.0)
        - math.lgamma(k + l + 2.5)
    )
    return math.exp(log_c)


def shell_constant_quadrature(k: float, l: float) -> float:
    """C(k, l) from adaptive quadrature of the two defining integrals."""
    _check_kl(k, l)
    # algebraic-weight rules absorb the endpoint singularities
    first, _ = integrate.quad(lambda s: 1.0, 0.0, 1.0, weight="alg", wvar=(l, -0.5),
                              epsabs=0.0, epsrel=1e-13, limit=200)
    second, _ = integrate.quad(lambda s: 1.0, 0.0, 1.0, weight="alg", wvar=(l + 0.5, k),
                               epsabs=0.0, epsrel=1e-13, limit=200)
    return 2.0 ** (l + 1.5) * math.pi * first * second
