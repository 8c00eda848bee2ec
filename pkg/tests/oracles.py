"""Independent reference computations used by the tests.

None of these call into the package's own quadrature or solver code; they
share only the problem definition (ansatz, bracket, G = 1).
"""

from __future__ import annotations

import math

import mpmath
import numpy as np
from scipy import integrate, optimize


def shell_constant_mp(k, l, dps=30):
    """C(k, l) from mpmath quadrature of the two defining integrals."""
    with mpmath.workdps(dps):
        k, l = mpmath.mpf(k), mpmath.mpf(l)
        first = mpmath.quad(lambda s: s**l * (1 - s) ** mpmath.mpf(-0.5), [0, 1])
        second = mpmath.quad(lambda s: s ** (l + mpmath.mpf(0.5)) * (1 - s) ** k, [0, 1])
        return float(2 ** (l + mpmath.mpf(1.5)) * mpmath.pi * first * second)


def shot_shell(k, l, L0, Mc, E0, A, r_lo=0.02, r_hi=2.0, rtol=1e-12):
    """Steady shell by shooting on the hollow-core potential value.

    Integrates U' = m/r², m' = 4πr²ρ(r, U) outward from r_lo with m = 0 and
    U = Uc, and tunes Uc so that U(r_hi) = -m(r_hi)/r_hi (vacuum outside).
    Returns a dict with the dense solution, mass and support edges, for the
    low-mass root found by scanning Uc upward from zero.
    """
    C = shell_constant_mp(k, l)
    n = k + l + 1.5

    def rho(r, U):
        g = E0 - U + Mc / r - L0 / (2.0 * r * r)
        return A * C * r ** (2 * l) * max(g, 0.0) ** n

    def rhs(r, y):
        return [y[1] / (r * r), 4.0 * math.pi * r * r * rho(r, y[0])]

    def run(Uc):
        return integrate.solve_ivp(rhs, (r_lo, r_hi), [Uc, 0.0], method="DOP853", rtol=rtol, atol=1e-14,
                                   dense_output=True)

    def miss(Uc):
        sol = run(Uc)
        U, m = sol.y[:, -1]
        return U + m / r_hi

    # Uc < 0 always; scan from just below zero to find the first sign change
    grid = -np.geomspace(1e-4, 5.0, 60)
    values = [miss(u) for u in grid]
    for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if fa * fb < 0.0:
            Uc = optimize.brentq(miss, b, a, xtol=1e-15, rtol=1e-15)
            break
    else:
        raise RuntimeError("no shooting root")
    sol = run(Uc)

    def g_at(r):
        U = sol.sol(r)[0]
        return E0 - U + Mc / r - L0 / (2.0 * r * r)

    rs = np.linspace(r_lo, r_hi, 20001)
    gs = g_at(rs)
    pos = np.flatnonzero(gs > 0.0)
    R1 = optimize.brentq(g_at, rs[pos[0] - 1], rs[pos[0]], xtol=1e-15)
    R2 = optimize.brentq(g_at, rs[pos[-1]], rs[pos[-1] + 1], xtol=1e-15)
    return dict(Uc=Uc, mass=float(sol.y[1, -1]), R1=R1, R2=R2, solution=sol, g=g_at)


def brute_force_functionals(f0, R1, R2, g, L0, nodes=(200, 24, 24)):
    """E_kin, Casimir (k = l = 1) and mass by 3D Gauss-Legendre over (r, w, L).

    ``f0(r, w, L)`` is evaluated pointwise; ``g`` is the bracket whose
    positive region bounds the velocity domain. The r range is split into
    panels so the endpoint behaviour g^{n} does not dominate the error.
    """
    xr, wr = np.polynomial.legendre.leggauss(nodes[0])
    xw, ww = np.polynomial.legendre.leggauss(nodes[1])
    xl, wl = np.polynomial.legendre.leggauss(nodes[2])
    edges = np.linspace(R1, R2, 9)
    e_kin = cas = mass = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        r = 0.5 * (b - a) * xr + 0.5 * (a + b)
        jr = 0.5 * (b - a) * wr
        gr = np.maximum(g(r), 0.0)
        lam_max = 2.0 * r * r * gr
        for ri, jri, gi, lmax in zip(r, jr, gr, lam_max):
            if lmax <= 0.0:
                continue
            lam = 0.5 * lmax * (xl + 1.0)
            jl = 0.5 * lmax * wl
            wmax = np.sqrt(np.maximum(2.0 * (gi - lam / (2.0 * ri * ri)), 0.0))
            W = wmax[:, None] * xw[None, :]
            J = jl[:, None] * wmax[:, None] * ww[None, :]
            L = L0 + lam[:, None] * np.ones_like(W)
            f = f0(np.full_like(W, ri), W, L)
            weight = 4.0 * math.pi**2 * jri * J
            e_kin += float(np.sum(weight * f * 0.5 * (W * W + L / (ri * ri))))
            cas += float(np.sum(weight * f * f / (L - L0)))
            mass += float(np.sum(weight * f))
    return e_kin, cas, mass


def uniform_shell(R_in, R_out, M):
    """Enclosed mass and potential of a uniform shell of mass M."""
    vol = 4.0 / 3.0 * math.pi * (R_out**3 - R_in**3)
    rho = M / vol

    def m(r):
        r = np.asarray(r, dtype=float)
        inner = 4.0 / 3.0 * math.pi * rho * (np.clip(r, R_in, R_out) ** 3 - R_in**3)
        return inner

    def U(r):
        r = np.asarray(r, dtype=float)
        out = -M / r
        inside = -2.0 * math.pi * rho * (R_out**2 - R_in**2)
        mid = -(m(r) / r) - 2.0 * math.pi * rho * (R_out**2 - r * r)
        return np.where(r >= R_out, out, np.where(r <= R_in, inside, mid))

    return rho, m, U


def kepler_energy_drift(r, w, L, Mc, T, periods, steps_per_period):
    """Max |E(t) - E(0)| for one particle under leapfrog KDK in -Mc/r."""
    dt = T / steps_per_period
    E0 = 0.5 * (w * w + L / (r * r)) - Mc / r
    worst = 0.0
    acc = L / r**3 - Mc / r**2
    for _ in range(int(periods * steps_per_period)):
        w += 0.5 * dt * acc
        r += dt * w
        acc = L / r**3 - Mc / r**2
        w += 0.5 * dt * acc
        worst = max(worst, abs(0.5 * (w * w + L / (r * r)) - Mc / r - E0))
    return worst
