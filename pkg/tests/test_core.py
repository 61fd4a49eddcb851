import math

import numpy as np
import pytest

from lagflow import core
from lagflow import families as fam
from lagflow.cli import beta_harmonic_residual
from lagflow.errors import DegenerateMetric, NotConformal, NotLagrangian
from lagflow.surface import Cell, Jet, point

from conftest import scale_component


def _grid_jet(surface, n=64):
    s, t = surface.cell.grid(n, n)
    return surface.jet(s, t)


# -- oracles written independently of the library ------------------------------

def test_clifford_oracle_mean_curvature():
    # product of two unit circles: each circle contributes curvature vector -z, H is half the trace
    surface = fam.make_clifford(-0.5)
    j = _grid_jet(surface, 16)
    np.testing.assert_allclose(core.mean_curvature(j), -0.5 * j.phi, atol=1e-14)


def test_clifford_oracle_liouville_and_angle():
    # phi = (e^{is}, e^{it}): <J phi, phi_s> = Re(i e^{is} conj(i e^{is})) = 1, halved
    surface = fam.make_clifford(-0.5)
    j = _grid_jet(surface, 8)
    ls, lt = core.liouville_pullback(j)
    np.testing.assert_allclose(ls, 0.5, atol=1e-15)
    np.testing.assert_allclose(lt, 0.5, atol=1e-15)
    # det_C(i e^{is} e1, i e^{it} e2) = -e^{i(s+t)}
    beta = core.lagrangian_angle(j)
    expected = np.angle(-np.exp(1j * (j.s + j.t)))
    np.testing.assert_allclose(np.exp(1j * beta), np.exp(1j * expected), atol=1e-14)


def test_hermitian_conventions():
    z = point(1 + 1j, 2)
    w = point(1j, 1 - 1j)
    h = core.hermitian_product(z, w)
    assert core.inner(z, w) == pytest.approx(h.real)
    assert core.omega(z, w) == pytest.approx(-h.imag)
    # omega(v, w) = <J v, w>
    assert core.omega(z, w) == pytest.approx(core.inner(core.J(z), w))


# -- family identities -----------------------------------------------------------

def test_family_identities(family_surface):
    surface = family_surface
    j = _grid_jet(surface)
    m = core.metric(j)
    scale = m.g11
    assert np.max(np.abs(core.lagrangian_defect(j)) / scale) <= 1e-12
    assert np.max(m.conformality_defect()) <= 1e-10
    assert np.max(core.self_similar_residual(j, surface.a, m) / (1 + core.norm(j.phi))) <= 1e-8
    s, t = j.s, j.t
    dbeta = surface.dbeta(s, t)
    assert np.max(core.monotonicity_defect(j, dbeta, surface.a)) <= 1e-8
    assert np.max(core.angle_gradient_identity_defect(j, dbeta, m)) <= 1e-8
    H = core.mean_curvature(j, m)
    assert np.max(core.normality_defect(j, m)) <= 1e-8 * max(1.0, np.max(core.norm(H) * np.sqrt(m.g11)))


def test_fd_dbeta_matches_closed_form(family_surface):
    s, t = family_surface.cell.grid(6, 6)
    bs, bt = core.fd_dbeta(family_surface, s, t)
    es, et = family_surface.dbeta(s, t)
    assert max(np.max(np.abs(bs - es)), np.max(np.abs(bt - et))) < 1e-6


def test_beta_is_harmonic(family_surface):
    assert beta_harmonic_residual(family_surface, 64) <= 1e-4


def test_hopf_h_constant(family_surface):
    f, h = core.hopf_forms(_grid_jet(family_surface, 16))
    assert np.max(np.abs(h - h.flat[0])) <= 1e-8 * max(1.0, abs(h.flat[0]))


def test_trace_of_second_fundamental_form(family_surface):
    j = _grid_jet(family_surface, 12)
    np.testing.assert_allclose(core.second_fundamental_trace(j), 2 * core.mean_curvature(j), atol=1e-10)
    C = core.second_fundamental_cubic(j)
    assert np.max(C.symmetry_defect) < 1e-10


@pytest.mark.parametrize("spec", ["phi:a=0.25,delta=0.9", "psi:a=-0.5,nu=0.7", "clifford:a=-0.5"])
def test_divergence_identity(spec):
    surface = fam.surface_from_string(spec)
    s, t = surface.cell.grid(5, 5)
    assert np.max(core.divergence_identity_defect(surface, (s, t), surface.a)) < 1e-5


@pytest.mark.parametrize("spec", ["clifford:a=-0.5", "cylinder:a=-1"])
def test_products_have_parallel_mean_curvature(spec):
    surface = fam.surface_from_string(spec)
    s, t = surface.cell.grid(5, 5)
    assert np.max(core.parallel_mean_curvature_defect(surface, (s, t))) < 1e-6


def test_phi_mean_curvature_is_not_parallel():
    surface = fam.make_phi(0.25, 0.9)
    s, t = surface.cell.grid(5, 5)
    assert np.max(core.parallel_mean_curvature_defect(surface, (s, t))) > 1e-2


def test_liouville_is_a_primitive_of_omega():
    # d(lambda)(d_s, d_t) = d_s lambda_t - d_t lambda_s = omega(phi_s, phi_t) on any immersion
    surface = scale_component(fam.make_psi(-0.5, 0.8), 1, 1.3)
    s, t, h = np.array(0.4), np.array(0.3), 1e-4

    def lam(ss, tt):
        return core.liouville_pullback(surface.jet(ss, tt))

    dlt_ds = (lam(s + h, t)[1] - lam(s - h, t)[1]) / (2 * h)
    dls_dt = (lam(s, t + h)[0] - lam(s, t - h)[0]) / (2 * h)
    om = core.omega(surface.jet(s, t).phi_s, surface.jet(s, t).phi_t)
    assert dlt_ds - dls_dt == pytest.approx(om, abs=1e-7)


def test_mean_curvature_normality_on_non_lagrangian():
    surface = scale_component(fam.make_phi(1.0, 1.0), 0, 1.2)
    j = _grid_jet(surface, 12)
    m = core.metric(j, tol_conf=1.0)
    H = core.mean_curvature(j, m)
    assert np.max(core.normality_defect(j, m)) <= 1e-8 * np.max(core.norm(H) * np.sqrt(m.g11))


# -- guards ------------------------------------------------------------------------

def test_guards_raise():
    surface = scale_component(fam.make_psi(-0.5, 0.8))
    j = _grid_jet(surface, 8)
    with pytest.raises(NotLagrangian):
        core.lagrangian_angle(j)
    rough = scale_component(fam.make_phi(1.0, 1.0), 0, 1.2)
    with pytest.raises(NotConformal):
        core.hopf_forms(_grid_jet(rough, 8))
    zero = np.zeros((3, 2), dtype=complex)
    flat = Jet(np.zeros(3), np.zeros(3), zero, zero, zero, zero, zero, zero)
    with pytest.raises(DegenerateMetric):
        core.metric(flat)


# -- quadrature --------------------------------------------------------------------

@pytest.mark.parametrize("which", ["area", "willmore"])
def test_quadrature_order_on_nonperiodic_cell(which):
    # |H|^2 sqrt(g) is constant on the families (h is constant), so use a perturbed
    # immersion on a window that is not a period: the trapezoid rule is then second order
    surface = scale_component(fam.make_psi(-0.5, 0.9), 1, 1.2)
    cell = Cell.rect(0.1, 1.7, 0.0, 1.0)
    fn = core.area_integral if which == "area" else core.willmore_integral
    ref = fn(surface, cell, n=2049)
    ns = np.array([17, 33, 65])
    errs = np.array([abs(fn(surface, cell, n=n) - ref) for n in ns])
    order = -np.diff(np.log(errs)) / np.diff(np.log(ns - 1.0))
    assert np.all(order >= 2.0), (errs, order)


def test_quadrature_spectral_on_torus():
    surface = fam.make_clifford(-0.5)
    assert core.area_integral(surface, n=16) == pytest.approx(4 * math.pi ** 2, rel=1e-14)
    assert core.willmore_integral(surface, n=16) == pytest.approx(2 * math.pi ** 2, rel=1e-14)


def test_quadrature_rejects_tiny_grids():
    with pytest.raises(ValueError):
        core.area_integral(fam.make_clifford(-0.5), n=4)


def test_report_ordering_is_deterministic():
    s, t = Cell.rect(0, 1, 0, 1).grid(3, 3)
    rep = core.GeometryReport.from_arrays(t, s, {"b": s + t, "a": s})
    assert [r["p"] for r in rep.records] == sorted(r["p"] for r in rep.records)
    assert list(rep.aggregates) == ["a", "b"]
    assert rep.aggregates["b"]["max"] == pytest.approx(2.0)
