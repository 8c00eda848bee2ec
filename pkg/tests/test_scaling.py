import math

import numpy as np
import pytest

from vshell.core import ScalingTriple, grid_from_radii, make_log_grid
from vshell.errors import InvalidArgument
from vshell.functionals import ansatz_state, casimir, energy_casimir, kinetic_energy, mass_of
from vshell.scaling import (
    RescaledState,
    direct_state,
    negative_energy_witness,
    rescaled_functionals,
    rescaled_mass,
    unit_mass_template,
)


@pytest.fixture(scope="module")
def base(reference_model):
    m = reference_model
    pad = 0.02 * (m.R2 - m.R1)
    return ansatz_state(m.params, m.field0, make_log_grid(m.R1 - pad, m.R2 + pad, 20001))


def test_rescaled_mass():
    assert rescaled_mass(3.0, ScalingTriple(1, 1, 1)) == 3.0
    assert rescaled_mass(3.0, ScalingTriple(8, 2, 1)) == 3.0
    assert rescaled_mass(1.0, ScalingTriple(1, 0.5, 0.5)) == 64.0


def test_identity_triple(base):
    rs = RescaledState(base, ScalingTriple(1, 1, 1))
    assert rescaled_functionals(rs) == energy_casimir(base)
    assert energy_casimir(direct_state(rs)) == energy_casimir(base)


def test_casimir_ratio_for_b2(base):
    rs = RescaledState(base, ScalingTriple(1.0, 2.0, 1.0))
    closed = rescaled_functionals(rs).casimir
    assert closed / casimir(base) == pytest.approx(0.5, rel=1e-14)
    lo, hi = base.grid.radii[0], base.grid.radii[-1]
    fresh = grid_from_radii(np.linspace(lo / 2, hi / 2, 20011))
    assert casimir(direct_state(rs, fresh)) / casimir(base) == pytest.approx(0.5, rel=1e-7)


@pytest.mark.parametrize("seed", range(3))
def test_closed_form_matches_fresh_grid(base, seed):
    a, b, c = np.random.default_rng(seed).uniform(0.5, 2.0, 3)
    rs = RescaledState(base, ScalingTriple(a, b, c))
    closed = rescaled_functionals(rs).as_dict()
    lo, hi = base.grid.radii[0], base.grid.radii[-1]
    direct = energy_casimir(direct_state(rs, grid_from_radii(np.linspace(lo / b, hi / b, 20011)))).as_dict()
    for key in ("e_kin", "e_pot", "casimir", "mass", "rhonorm"):
        assert closed[key] == pytest.approx(direct[key], rel=1e-7), key


def test_literal_f_matches_direct_state(base):
    rs = RescaledState(base, ScalingTriple(1.3, 0.8, 1.2))
    ds = direct_state(rs)
    rng = np.random.default_rng(0)
    r = rng.uniform(base.grid.radii[0] / 0.8, base.grid.radii[-1] / 0.8, 500)
    w = rng.normal(0, 0.5, 500)
    L = base.params.L0 + rng.uniform(0, 0.05, 500)
    np.testing.assert_allclose(rs.f(r, w, L), ds.f(r, w, L), rtol=1e-10, atol=1e-14)


def test_kinetic_bound_for_bc_below_one(base):
    for a, b, c in [(1.0, 0.5, 1.5), (2.0, 0.9, 0.8), (0.7, 1.5, 0.5)]:
        t = ScalingTriple(a, b, c)
        assert b * c < 1
        assert rescaled_functionals(RescaledState(base, t)).e_kin <= a * b**-3 * c**-5 * kinetic_energy(base)


def test_witness(base):
    template = unit_mass_template(base)
    assert mass_of(template) == pytest.approx(1.0, rel=1e-14)
    for M in (1.0, 0.054, 10.0):
        b, report = negative_energy_witness(M, template, 1.5)
        assert report.h_c < 0.0
        assert b >= 1e-8
        assert b * b ** (-0.75) < 1.0
        assert report.mass == pytest.approx(M, rel=1e-12)


def test_witness_direct_quadrature(base):
    template = unit_mass_template(base)
    b, report = negative_energy_witness(1.0, template, 1.5)
    c = b**-0.75
    rs = RescaledState(template, ScalingTriple((b * c) ** 3, b, c))
    lo, hi = template.grid.radii[0], template.grid.radii[-1]
    direct = energy_casimir(direct_state(rs, grid_from_radii(np.linspace(lo / b, hi / b, 20011))))
    assert direct.h_c < 0.0
    assert direct.mass == pytest.approx(1.0, rel=1e-7)
    assert direct.h_c == pytest.approx(report.h_c, rel=1e-6)


def test_witness_rejects(base):
    template = unit_mass_template(base)
    with pytest.raises(InvalidArgument):
        negative_energy_witness(1.0, template, 1.9)
    with pytest.raises(InvalidArgument):
        negative_energy_witness(1.0, base, 1.5)
    with pytest.raises(InvalidArgument):
        negative_energy_witness(0.0, template, 1.5)
    with pytest.raises(InvalidArgument):
        unit_mass_template(base.scaled(0.0))
