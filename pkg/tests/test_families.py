import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagflow import core
from lagflow import families as fam
from lagflow.errors import BadParams, WrongFamily
from lagflow.surface import Cell, surface_diameter

COPRIME = [(m, n) for m in range(1, 5) for n in range(1, 5) if math.gcd(m, n) == 1]


def _lattice_surfaces():
    out = [fam.make_clifford(-0.5), fam.make_cylinder(-1.0)]
    out += [fam.make_psi_mn(-0.5, m, n) for m, n in COPRIME]
    out += [fam.make_phi_pq(0.5, p, q) for p, q in COPRIME if p > q]
    out += [fam.make_upsilon_pq(-0.5, p, q) for p, q in COPRIME if p < q]
    return out


@pytest.mark.parametrize("surface", _lattice_surfaces(), ids=lambda s: s.name)
def test_lattice_generators_are_symmetries(surface):
    diam = surface_diameter(surface)
    for gen in surface.lattice.generators:
        assert fam.invariance_defect(surface, gen) <= 1e-10 * diam, gen


@pytest.mark.parametrize("mn", COPRIME)
def test_klein_parity(mn):
    m, n = mn
    lat = fam.make_psi_mn(-0.5, m, n).lattice
    assert bool(lat.glides) == ((m + n) % 2 == 1)
    assert lat.quotient_label == ("klein" if (m + n) % 2 else "torus")
    assert all(g.orientation_reversing for g in lat.glides)


@pytest.mark.parametrize("pq", [pq for pq in COPRIME if pq[0] != pq[1]])
def test_moebius_parity(pq):
    p, q = pq
    surface = fam.make_phi_pq(1.0, p, q) if p > q else fam.make_upsilon_pq(-1.0, p, q)
    assert bool(surface.lattice.glides) == (p % 2 == 1 and q % 2 == 0)


def test_glide_is_not_a_translation_symmetry_alone():
    # the glide of Psi_{1,2} maps the surface to itself only with its reflection
    surface = fam.make_psi_mn(-0.5, 1, 2)
    glide = surface.lattice.glides[0]
    shifted = fam.translation(*glide.b)
    assert fam.invariance_defect(surface, shifted) > 1e-2


def test_rational_cells():
    phi = fam.make_phi_pq(0.25, 2, 1)
    assert phi.cell.periodic == (True, False)
    assert phi.cell.e1[0] == pytest.approx(2 * math.pi * math.sqrt(2))
    odd = fam.make_psi_mn(-0.5, 1, 1)
    assert odd.cell.jacobian == pytest.approx(2 * math.pi ** 2)
    even = fam.make_psi_mn(-0.5, 1, 2)
    assert even.cell.jacobian == pytest.approx(4 * math.pi ** 2 * math.sqrt(2))


def test_detect_rational():
    assert fam.detect_rational(1.5) == (3, 2)
    assert fam.detect_rational(math.pi, max_den=100) is None
    # large-denominator forms keep the lattice but are sampled on a window cell
    s = fam.make_psi(-1.0, 1.2)
    assert s.spec.rational_form is not None and max(s.spec.rational_form) > fam.MAX_CELL_DENOMINATOR
    assert s.cell.periodic == (True, False)


@given(st.floats(0.05, 3.0))
@settings(max_examples=40, deadline=None)
def test_psi_dual_parameter(nu):
    dual = fam.psi_dual_parameter(nu)
    assert math.sinh(dual) * math.sinh(nu) == pytest.approx(1.0, rel=1e-12)
    assert fam.psi_dual_parameter(dual) == pytest.approx(nu, rel=1e-10)


# -- closed forms ---------------------------------------------------------------------

@pytest.mark.parametrize("mn", [(1, 1), (1, 2), (1, 3), (2, 3)])
def test_closed_form_area_and_willmore(mn):
    surface = fam.make_psi_mn(-0.5, *mn)
    area = core.area_integral(surface, n=256)
    will = core.willmore_integral(surface, n=256)
    assert area == pytest.approx(fam.closed_form_area(surface.spec), rel=1e-6)
    assert will == pytest.approx(fam.closed_form_willmore(surface.spec), rel=1e-6)


def test_closed_form_values():
    a = -0.5
    t11 = fam.make_clifford(a).spec
    t12 = fam.make_psi_mn(a, 1, 2).spec
    assert fam.closed_form_area(t11) == pytest.approx(4 * math.pi ** 2, rel=1e-14)
    assert fam.closed_form_willmore(t11) == pytest.approx(2 * math.pi ** 2, rel=1e-14)
    assert fam.closed_form_area(t12) == pytest.approx(9 * math.sqrt(2) * math.pi ** 2, rel=1e-14)
    assert fam.closed_form_willmore(t12) == pytest.approx(9 * math.pi ** 2 / math.sqrt(2), rel=1e-14)
    for spec in (t11, t12):
        assert fam.closed_form_area(spec) == pytest.approx(-fam.closed_form_willmore(spec) / a, rel=1e-9)
    with pytest.raises(WrongFamily):
        fam.closed_form_area(fam.make_phi(1.0, 1.0).spec)


# -- Lee-Wang presentations -------------------------------------------------------------

def test_lee_wang_constraints():
    phi = fam.lee_wang_form(fam.make_phi_pq(0.25, 2, 1))
    assert phi.rhs == pytest.approx(-2.0)
    assert phi.quadric_defect() <= 1e-10
    psi = fam.lee_wang_form(fam.make_psi_mn(-0.5, 1, 2))
    assert psi.rhs == pytest.approx(3.0)
    assert psi.quadric_defect(w_range=(0.0, 2 * math.pi)) <= 1e-10
    ups = fam.lee_wang_form(fam.make_upsilon_pq(-0.5, 1, 3))
    assert ups.quadric_defect() <= 1e-10
    with pytest.raises(WrongFamily):
        fam.lee_wang_form(fam.make_phi(1.0, 1.0, rational=None))


# -- asymptotic cones ---------------------------------------------------------------------

def test_cone_decay_rate_is_e_to_minus_one():
    surface = fam.make_phi(1.0, 1.0)
    cone = fam.asymptotic_cone(surface.spec)
    d = [fam.cone_distance(surface, cone, t) for t in (4.0, 5.0, 6.0)]
    ratios = np.array(d[1:]) / np.array(d[:-1])
    np.testing.assert_allclose(ratios, math.exp(-1), rtol=1e-3)


def test_cone_is_hsl_away_from_vertex():
    cone = fam.asymptotic_cone(fam.make_phi(1.0, 1.0).spec)
    x2 = np.linspace(0.5, 3, 7)
    assert np.max(cone.quadric_defect(cone.c * x2, x2)) < 1e-14
    sheet = cone.surface()
    s, t = sheet.cell.grid(16, 16)
    j = sheet.jet(s, t)
    assert np.max(np.abs(core.lagrangian_defect(j))) <= 1e-10
    ups = fam.asymptotic_cone(fam.make_upsilon(-1.0, 0.7).spec)
    assert ups.sign == -1
    with pytest.raises(WrongFamily):
        fam.asymptotic_cone(fam.make_psi(-0.5, 1.0).spec)


# -- double points ---------------------------------------------------------------------------

def test_scan_finds_no_double_points_on_clifford():
    assert fam.self_intersection_scan(fam.make_psi_mn(-0.5, 1, 1), 256) == []


def test_scan_finds_double_points_on_t12():
    found = fam.self_intersection_scan(fam.make_psi_mn(-0.5, 1, 2), 256)
    assert found
    surface = fam.make_psi_mn(-0.5, 1, 2)
    diam = surface_diameter(surface)
    for dp in found:
        assert np.linalg.norm(surface(*dp.p) - surface(*dp.q)) <= 1e-9 * diam


def test_strip_embedded_iff_q_is_one():
    assert fam.self_intersection_scan(fam.make_phi_pq(1.0, 2, 1), 128) == []
    assert fam.self_intersection_scan(fam.make_phi_pq(1.0, 3, 2), 128)


def test_irrational_phi_window_has_double_points():
    # the t = 0 curve of Phi_delta is a circle of period 2 pi cosh(delta) in s, for every delta;
    # on [0, 20] with cosh(delta) ~ 1.272 it wraps more than twice
    golden = (1 + math.sqrt(5)) / 2
    delta = math.acosh(math.sqrt(1 + 1 / golden))
    surface = fam.make_phi(1.0, delta)
    found = fam.self_intersection_scan(surface, 256, cell=Cell.rect(0, 20, -3, 3))
    assert found
    period = 2 * math.pi * math.cosh(delta)
    for dp in found:
        assert abs(dp.p[1]) < 1e-6 and abs(dp.q[1]) < 1e-6
        gap = abs(dp.q[0] - dp.p[0]) / period
        assert abs(gap - round(gap)) < 1e-6


def test_scan_rejects_low_resolution():
    with pytest.raises(ValueError):
        fam.self_intersection_scan(fam.make_clifford(-0.5), 32)


# -- spec strings ------------------------------------------------------------------------------

@pytest.mark.parametrize("text", [
    "torus:a=-1", "psi:nu=1", "psi:a=-1,nu", "psi:a=-1,nu=x", "psi:a=-1,nu=1,nu=2",
    "psi:a=0.5,nu=1", "phi:a=-1,delta=1", "phi:a=1,p=1,q=2", "psi:a=-1,m=2,n=4", "garbage",
    "upsilon:a=-1,gamma=2", "clifford:a=0",
])
def test_bad_specs(text):
    with pytest.raises(BadParams):
        fam.surface_from_string(text)


def test_spec_roundtrip():
    s = fam.surface_from_string("psi:a=-0.5,m=1,n=2")
    assert s.spec.rational_form == (1, 2)
    assert s.spec.shape_param == pytest.approx(math.asinh(math.sqrt(0.5)))
    assert fam.from_spec(s.spec).name == s.name
