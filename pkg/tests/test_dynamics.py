import math

import numpy as np
import pytest

from oracles import kepler_energy_drift
from vshell.dynamics import (
    EvolveConfig,
    accelerations,
    default_dt,
    deposit_density,
    evolve,
    particle_energy,
    picard_iterate,
    sample_shell,
    sampling_box,
    self_enclosed_mass,
    statistical_floor,
    step,
)
from vshell.dynamics import _kernels_py, kernels
from vshell.dynamics.picard import FieldHistory, SmoothShellField
from vshell.ensemble import ParticleEnsemble, bin_density
from vshell.errors import IntegratorBlowup, InvalidArgument
from vshell.functionals import kinetic_energy, model_state
from vshell.radial_poisson import PointShellField, field_distance

try:
    from vshell.dynamics import _kernels as compiled
except ImportError:  # pragma: no cover - extension not built
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")
VACUUM = PointShellField.from_particles(np.array([]), np.array([]), 1.0)


def _particles(r, w, L, weight=None, params=None):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    weight = np.full(r.size, 1e-30) if weight is None else weight
    return ParticleEnsemble(r, w, L, weight, np.ones(r.size), float(np.sum(weight)), params=params)


@needs_compiled
def test_compiled_kernels_bit_identical():
    rng = np.random.default_rng(0)
    n = 5000
    r = rng.uniform(0.1, 2.0, n)
    r[::50] = r[1::50]  # ties
    weight = rng.uniform(0.5, 1.5, n) / n
    order_c = np.argsort(rng.permutation(n)).astype(np.int64)
    order_p = order_c.copy()
    compiled.sort_order(r, order_c)
    _kernels_py.sort_order(r, order_p)
    assert np.all(np.diff(r[order_c]) >= 0)
    m_c = compiled.enclosed_mass(r, weight, order_c)
    m_p = _kernels_py.enclosed_mass(r, weight, order_p)
    np.testing.assert_array_equal(m_c, m_p)
    L = rng.uniform(0.1, 0.2, n)
    w_c, w_p = rng.normal(size=n), None
    w_p = w_c.copy()
    compiled.kick(w_c, r, L, m_c, 1.0, 0.01)
    _kernels_py.kick(w_p, r, L, m_p, 1.0, 0.01)
    np.testing.assert_array_equal(w_c, w_p)
    r_c, r_p = r.copy(), r.copy()
    assert compiled.drift(r_c, w_c, 0.01) == _kernels_py.drift(r_p, w_p, 0.01)
    np.testing.assert_array_equal(r_c, r_p)


@needs_compiled
def test_compiled_sort_fallback_on_scrambled_order():
    rng = np.random.default_rng(1)
    r = rng.uniform(size=20000)
    order = rng.permutation(20000).astype(np.int64)
    compiled.sort_order(r, order)
    np.testing.assert_array_equal(r[order], np.sort(r))


def test_tie_rule():
    single = _particles([1.0], [0.0], [1.0], weight=np.array([2.0]))
    assert self_enclosed_mass(single)[0] == 1.0
    pair = _particles([1.0, 1.0, 2.0], [0, 0, 0], [1, 1, 1], weight=np.array([1.0, 1.0, 4.0]))
    np.testing.assert_array_equal(self_enclosed_mass(pair), [1.0, 1.0, 4.0])


def test_point_shell_step():
    f = PointShellField.from_particles(np.array([1.5]), np.array([3.0]))
    np.testing.assert_array_equal(f.mass_at(np.array([1.0, 1.49, 1.51, 9.0])), [0.0, 0.0, 3.0, 3.0])


def test_accelerations_vacuum():
    e = _particles([1.0, 2.0], [0.0, 0.0], [1.0, 1.0])
    np.testing.assert_allclose(accelerations(e, VACUUM), [0.0, -0.125], atol=1e-15)
    hollow = PointShellField.from_particles(np.array([3.0]), np.array([1.0]), 0.0)
    e = _particles([0.5], [0.0], [0.2])
    assert accelerations(e, hollow)[0] == pytest.approx(0.2 / 0.125)


def test_circular_orbit_and_single_step():
    e = _particles([1.0], [0.0], [1.0])
    for _ in range(1000):
        step(e, "frozen", 2 * math.pi / 1000, field=VACUUM)
    assert abs(e.r[0] - 1.0) < 1e-14
    empty = PointShellField.from_particles(np.array([]), np.array([]), 0.0)
    dt = 1e-3
    e = _particles([1.0], [0.0], [0.5])
    step(e, "frozen", dt, field=empty)
    assert abs(e.r[0] - 1.0) < dt * dt
    assert e.w[0] == pytest.approx(dt * 0.5, rel=10 * dt)


def test_kepler_second_order():
    r0 = np.array([1.0, 1.2])
    w0 = np.array([0.3, -0.2])
    L = np.array([0.8, 0.7])
    E = 0.5 * (w0 * w0 + L / r0**2) - 1 / r0
    T = 2 * math.pi * (-1 / (2 * E)) ** 1.5

    def drift(steps):
        e = _particles(r0, w0, L)
        dt = T.min() / steps
        worst = np.zeros(2)
        for _ in range(int(round(20 * T.max() / dt))):
            step(e, "frozen", dt, field=VACUUM)
            worst = np.maximum(worst, abs(0.5 * (e.w**2 + e.L / e.r**2) - 1 / e.r - E))
        return worst

    ratio = drift(100) / drift(200)
    assert np.all((ratio > 3.2) & (ratio < 4.8))
    # the package integrator and an independent loop agree
    ref = kepler_energy_drift(1.0, 0.3, 0.8, 1.0, T[0], 2, 100)
    e = _particles([1.0], [0.3], [0.8])
    worst = 0.0
    for _ in range(200):
        step(e, "frozen", T[0] / 100, field=VACUUM)
        worst = max(worst, abs(0.5 * (e.w[0] ** 2 + 0.8 / e.r[0] ** 2) - 1 / e.r[0] - E[0]))
    assert worst == pytest.approx(ref, rel=1e-6)


def test_frozen_model_field_energy_order(reference_model):
    ens = sample_shell(reference_model, 200, 3)
    E0 = reference_model.energy(ens.r, ens.w, ens.L)
    T = 20 * default_dt(ens, 0.01) * 100

    def drift(frac):
        e = ens.copy()
        dt = default_dt(ens, frac)
        worst = np.zeros(e.count)
        for _ in range(int(round(T / dt))):
            step(e, "frozen", dt, field=reference_model.field0)
            worst = np.maximum(worst, abs(reference_model.energy(e.r, e.w, e.L) - E0))
        return worst

    coarse, fine = drift(0.02), drift(0.01)
    ratio = np.median(coarse / fine)
    assert 3.0 < ratio < 5.0


def test_step_errors():
    e = _particles([0.01], [-10.0], [1e-12])
    empty = PointShellField.from_particles(np.array([]), np.array([]), 0.0)
    with pytest.raises(IntegratorBlowup) as info:
        step(e, "frozen", 0.01, field=empty)
    assert info.value.time == pytest.approx(0.01)
    with pytest.raises(InvalidArgument):
        step(_particles([1.0], [0.0], [1.0]), "frozen", 0.0, field=empty)
    with pytest.raises(InvalidArgument):
        step(_particles([1.0], [0.0], [1.0]), "frozen", 0.1)
    with pytest.raises(InvalidArgument):
        step(_particles([1.0], [0.0], [1.0]), "sideways", 0.1, field=empty)


def test_evolve_config_validation():
    with pytest.raises(InvalidArgument):
        EvolveConfig(dt=0.0, t_end=1.0)
    with pytest.raises(InvalidArgument):
        EvolveConfig(dt=1.0, t_end=0.5)
    with pytest.raises(InvalidArgument):
        EvolveConfig(dt=0.1, t_end=1.0, field_mode="other")
    with pytest.raises(InvalidArgument):
        EvolveConfig(dt=0.1, t_end=1.0, output_every=0)
    assert EvolveConfig(dt=0.1, t_end=1.0).steps == 10


def test_sampling_contract(reference_model):
    m = reference_model
    ens = sample_shell(m, 20_000, 0)
    assert ens.count == 20_000
    assert float(np.sum(ens.weight)) == pytest.approx(m.mass, rel=1e-12)
    assert ens.total_mass == m.mass
    assert np.all(ens.L > m.params.L0)
    assert np.all((ens.r >= m.R1) & (ens.r <= m.R2))
    np.testing.assert_array_equal(ens.f_value, m.f0(ens.r, ens.w, ens.L))
    again = sample_shell(m, 20_000, 0)
    np.testing.assert_array_equal(ens.r, again.r)
    assert not np.array_equal(ens.r, sample_shell(m, 20_000, 1).r)
    w_max, L_max, f_max = sampling_box(m)
    assert np.all(np.abs(ens.w) <= w_max) and np.all(ens.L <= L_max) and np.all(ens.f_value < f_max)
    with pytest.raises(InvalidArgument):
        sample_shell(m, 10, -1)
    with pytest.raises(InvalidArgument):
        sample_shell(m, 0, 1)


def test_sampled_kinetic_energy(reference_model):
    m = reference_model
    ens = sample_shell(m, 50_000, 5)
    e = 0.5 * (ens.w**2 + ens.L / ens.r**2)
    se = e.std(ddof=1) / math.sqrt(e.size)
    assert abs(e.mean() - kinetic_energy(model_state(m)) / m.mass) < 3 * se


def test_statistical_floor_matches_realised_mean(reference_model):
    n = 2000
    realised, expected = [], []
    for seed in range(30):
        ens = sample_shell(reference_model, n, seed)
        _, shells = deposit_density(ens, 100)
        realised.append(field_distance(shells, reference_model.field0))
        expected.append(statistical_floor(ens))
    # mean of 30 chi-square-like draws with about 3 degrees of freedom
    assert np.mean(realised) == pytest.approx(np.mean(expected), rel=0.3)


def test_field_distance_decays_like_inverse_n(reference_model):
    floors = [statistical_floor(sample_shell(reference_model, n, 0)) for n in (1000, 10_000, 100_000)]
    assert floors[0] / floors[1] == pytest.approx(10, rel=0.15)
    assert floors[1] / floors[2] == pytest.approx(10, rel=0.15)


def test_self_consistent_short_run(reference_model):
    ens = sample_shell(reference_model, 3000, 2)
    L0 = ens.L.copy()
    dt = default_dt(ens)
    records = evolve(ens, reference_model, EvolveConfig(dt=dt, t_end=100 * dt, output_every=20))
    assert len(records) == 6
    assert [r.t for r in records] == [n * 20 * dt for n in range(6)]
    H0 = records[0].H
    sqrt_l0 = math.sqrt(reference_model.params.L0)
    for r in records:
        assert abs(r.H - H0) < 1e-4 * abs(H0)
        assert r.casimir == records[0].casimir
        assert r.mass == records[0].mass
        assert r.R_min * r.P_max >= sqrt_l0
        assert r.field_bound_ratio <= 1.05
    np.testing.assert_array_equal(ens.L, L0)


def test_particle_energy_matches_shell_field(reference_model):
    ens = sample_shell(reference_model, 1000, 0)
    e_kin, e_pot, H = particle_energy(ens)
    assert H == e_kin + e_pot
    assert e_kin == pytest.approx(kinetic_energy(ens), rel=1e-14)


def test_force_is_energy_gradient():
    # the tie-rule force is minus the derivative of the discrete energy
    rng = np.random.default_rng(2)
    r = rng.uniform(0.5, 1.5, 6)
    weight = rng.uniform(0.1, 0.3, 6)
    e = _particles(r, np.zeros(6), np.full(6, 0.3), weight=weight)
    e.params = None
    acc = accelerations(e, Mc=0.0)
    eps = 1e-7
    for i in range(6):
        plus, minus = r.copy(), r.copy()
        plus[i] += eps
        minus[i] -= eps
        ep = particle_energy(_particles(plus, np.zeros(6), np.full(6, 0.3), weight=weight))[2]
        em = particle_energy(_particles(minus, np.zeros(6), np.full(6, 0.3), weight=weight))[2]
        assert -(ep - em) / (2 * eps) == pytest.approx(weight[i] * acc[i], rel=1e-6)


def test_threads_do_not_change_results(reference_model):
    out = []
    for threads in (1, 3):
        kernels.set_threads(threads)
        ens = sample_shell(reference_model, 5000, 1)
        dt = default_dt(ens)
        records = evolve(ens, reference_model, EvolveConfig(dt=dt, t_end=30 * dt, output_every=10))
        out.append((ens.r.copy(), [r.row() for r in records]))
    kernels.set_threads(1)
    np.testing.assert_array_equal(out[0][0], out[1][0])
    assert out[0][1] == out[1][1]


def test_smooth_field_is_continuous_in_positions():
    knots = np.geomspace(0.1, 2.0, 64)
    w = np.array([0.5, 0.5])
    values = []
    for x in np.linspace(0.3, 0.31, 101):
        values.append(SmoothShellField.from_particles(np.array([x, 1.0]), w, knots).m)
    jumps = np.abs(np.diff(values, axis=0)).max()
    assert jumps < 0.05  # a point-shell field would jump by a full weight 0.5
    f = SmoothShellField.from_particles(np.array([0.3, 1.0]), w, knots)
    assert f.total_mass == pytest.approx(1.0)
    assert f.mass_at(0.05) == 0.0 and f.mass_at(5.0) == pytest.approx(1.0)


def test_field_history_interpolation():
    a = PointShellField.from_particles(np.array([1.0]), np.array([1.0]))
    b = PointShellField.from_particles(np.array([1.0]), np.array([3.0]))
    h = FieldHistory(0.5, [a, b])
    assert h.mass_at(0.0, np.array([2.0]))[0] == 1.0
    assert h.mass_at(0.25, np.array([2.0]))[0] == pytest.approx(2.0)
    assert h.mass_at(0.5, np.array([2.0]))[0] == 3.0
    assert h.mass_at(9.0, np.array([2.0]))[0] == 3.0


def test_picard_contracts(reference_ensemble_small):
    ens = reference_ensemble_small
    dt = default_dt(ens)
    res = picard_iterate(ens, 30 * dt, 3, dt)
    assert len(res.iterates) == 4 and len(res.gaps) == 3
    assert res.gaps[0] > res.gaps[1] > res.gaps[2]
    short = picard_iterate(ens, 5 * dt, 1, dt)
    assert short.gaps[0] < res.gaps[0]
    tiny = picard_iterate(ens, dt, 1, dt)
    assert tiny.gaps[0] < short.gaps[0]
    shells = picard_iterate(ens, 30 * dt, 2, dt, field="shells")
    assert shells.gaps[0] > shells.gaps[1]
    with pytest.raises(InvalidArgument):
        picard_iterate(ens, 30 * dt, 0, dt)
    with pytest.raises(InvalidArgument):
        picard_iterate(ens, 0.5 * dt, 1, dt)
    with pytest.raises(InvalidArgument):
        picard_iterate(ens, 30 * dt, 1, dt, field="grid")


def test_picard_does_not_touch_input(reference_ensemble_small):
    ens = reference_ensemble_small
    r = ens.r.copy()
    picard_iterate(ens, 10 * default_dt(ens), 1, default_dt(ens))
    np.testing.assert_array_equal(ens.r, r)


def test_bin_density_mass(reference_ensemble_small):
    d = bin_density(reference_ensemble_small, 50)
    assert d.grid.size == 50
    with pytest.raises(InvalidArgument):
        bin_density(reference_ensemble_small, 1)


BACKEND_SCRIPT = """
import hashlib, numpy as np
from vshell.core import ShellParams, make_log_grid
from vshell.steady_state import solve_shell
from vshell.dynamics import EvolveConfig, default_dt, evolve, kernels, sample_shell
m = solve_shell(ShellParams(1.0, 1.0, 0.1, 1.0, -2.0), make_log_grid(0.02, 2.0, 2000))
e = sample_shell(m, 4000, 3)
dt = default_dt(e)
rows = [r.row() for r in evolve(e, m, EvolveConfig(dt=dt, t_end=40 * dt, output_every=10))]
print(kernels.BACKEND_NAME, hashlib.sha256(repr(rows).encode() + e.r.tobytes() + e.w.tobytes()).hexdigest())
"""


@needs_compiled
def test_backends_agree_bitwise():
    import os
    import subprocess
    import sys

    out = {}
    for choice in ("python", "compiled"):
        env = dict(os.environ, VSHELL_KERNELS=choice)
        res = subprocess.run([sys.executable, "-c", BACKEND_SCRIPT], env=env, capture_output=True, text=True,
                             check=True)
        name, digest = res.stdout.split()
        assert name == choice
        out[choice] = digest
    assert out["python"] == out["compiled"]
