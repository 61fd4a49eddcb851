"""Pointwise differential geometry of surfaces in C^2 from second-order jets.

Conventions: the Hermitian product is (z, w) = z1 conj(w1) + z2 conj(w2); the
Euclidean metric is its real part and the Kaehler form is omega = -Im(., .) =
<J., .>, where J is multiplication by i.  The mean curvature vector is half the
trace of the second fundamental form, so 2H = Laplacian(phi).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateMetric, NotConformal, NotLagrangian
from .surface import Cell, Jet, SurfaceModel

TOL_DEGEN = 1e-12
TOL_CONF = 1e-8
TOL_LAGRANGIAN_ANGLE = 1e-8


# ---------------------------------------------------------------------------
# ambient structure
# ---------------------------------------------------------------------------

def hermitian_product(z, w):
    return np.sum(np.asarray(z) * np.conj(w), axis=-1)


def inner(z, w):
    return hermitian_product(z, w).real


def omega(z, w):
    return -hermitian_product(z, w).imag


def J(z):
    return 1j * np.asarray(z)


def norm(z):
    return np.sqrt(inner(z, z))


# ---------------------------------------------------------------------------
# metric and projections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricData:
    g11: np.ndarray
    g12: np.ndarray
    g22: np.ndarray
    det: np.ndarray
    conformal_factor: Optional[np.ndarray] = None

    def inverse(self):
        return self.g22 / self.det, -self.g12 / self.det, self.g11 / self.det

    @property
    def area_element(self):
        return np.sqrt(self.det)

    def conformality_defect(self):
        """max(|g11 - g22|, |g12|) relative to g11."""
        return np.maximum(np.abs(self.g11 - self.g22), np.abs(self.g12)) / self.g11


def metric(j: Jet, tol_degen: float = TOL_DEGEN, tol_conf: float = TOL_CONF) -> MetricData:
    g11 = inner(j.phi_s, j.phi_s)
    g12 = inner(j.phi_s, j.phi_t)
    g22 = inner(j.phi_t, j.phi_t)
    det = g11 * g22 - g12 * g12
    bad = det <= tol_degen * (g11 + g22) ** 2
    if np.any(bad):
        idx = np.argwhere(np.atleast_1d(bad))[0]
        pt = (np.atleast_1d(j.s)[tuple(idx)], np.atleast_1d(j.t)[tuple(idx)]) if np.ndim(bad) else (j.s, j.t)
        raise DegenerateMetric(f"metric degenerates at parameter point {tuple(map(float, pt))}", pt)
    conformal = np.all(np.abs(g11 - g22) <= tol_conf * g11) and np.all(np.abs(g12) <= tol_conf * g11)
    cf = 0.5 * (g11 + g22) if conformal else None
    return MetricData(g11, g12, g22, det, cf)


def _tangent_coeffs(j: Jet, m: MetricData, v):
    """Coefficients (c_s, c_t) of the tangential projection of v."""
    b1 = inner(v, j.phi_s)
    b2 = inner(v, j.phi_t)
    i11, i12, i22 = m.inverse()
    return i11 * b1 + i12 * b2, i12 * b1 + i22 * b2


def _tangential(j: Jet, m: MetricData, v):
    c1, c2 = _tangent_coeffs(j, m, v)
    return c1[..., None] * j.phi_s + c2[..., None] * j.phi_t


def normal_part(j: Jet, v, m: Optional[MetricData] = None):
    m = metric(j) if m is None else m
    return v - _tangential(j, m, v)


def tangent_normal_split(j: Jet, m: Optional[MetricData] = None):
    m = metric(j) if m is None else m
    tan = _tangential(j, m, j.phi)
    return tan, j.phi - tan


def lagrangian_defect(j: Jet):
    return omega(j.phi_s, j.phi_t)


def mean_curvature(j: Jet, m: Optional[MetricData] = None):
    """H = (1/2) Laplace-Beltrami(phi): the normal part of g^{ij} phi_ij, halved."""
    m = metric(j) if m is None else m
    i11, i12, i22 = m.inverse()
    trace = i11[..., None] * j.phi_ss + 2 * i12[..., None] * j.phi_st + i22[..., None] * j.phi_tt
    return 0.5 * normal_part(j, trace, m)


def self_similar_residual(j: Jet, a: float, m: Optional[MetricData] = None):
    m = metric(j) if m is None else m
    _, nrm = tangent_normal_split(j, m)
    return norm(mean_curvature(j, m) - a * nrm)


def complex_det(j: Jet):
    return j.phi_s[..., 0] * j.phi_t[..., 1] - j.phi_s[..., 1] * j.phi_t[..., 0]


def lagrangian_angle(j: Jet, tol: float = TOL_LAGRANGIAN_ANGLE, m: Optional[MetricData] = None):
    """Principal value of beta in (-pi, pi], from phi*Omega = e^{i beta} area form."""
    m = metric(j) if m is None else m
    d = complex_det(j)
    area = np.sqrt(m.det)
    if np.any(np.abs(np.abs(d) - area) > tol * area):
        raise NotLagrangian("|det_C(phi_s, phi_t)| differs from the area element")
    beta = np.angle(d)
    return np.where(beta <= -np.pi, beta + 2 * np.pi, beta)


def gradient(j: Jet, covector, m: Optional[MetricData] = None):
    """Metric-raised gradient of a function with differential (f_s, f_t)."""
    m = metric(j) if m is None else m
    fs, ft = covector
    i11, i12, i22 = m.inverse()
    cs = i11 * fs + i12 * ft
    ct = i12 * fs + i22 * ft
    return np.asarray(cs)[..., None] * j.phi_s + np.asarray(ct)[..., None] * j.phi_t


def angle_gradient_identity_defect(j: Jet, dbeta, m: Optional[MetricData] = None):
    """|J grad(beta) - 2H|."""
    m = metric(j) if m is None else m
    return norm(J(gradient(j, dbeta, m)) - 2 * mean_curvature(j, m))


def fd_dbeta(surface: SurfaceModel, s, t, h: float = 1e-4, mode: str = "analytic"):
    """Branch-insensitive central differences of the Lagrangian angle."""
    def beta_at(ss, tt):
        return np.angle(complex_det(surface.jet(ss, tt, mode)))

    def wrapped(d):
        return (d + np.pi) % (2 * np.pi) - np.pi

    bs = wrapped(beta_at(s + h, t) - beta_at(s - h, t)) / (2 * h)
    bt = wrapped(beta_at(s, t + h) - beta_at(s, t - h)) / (2 * h)
    return bs, bt


def liouville_pullback(j: Jet):
    """(lambda_s, lambda_t) with lambda_p(v) = <J p, v> / 2.

    This primitive satisfies d(lambda) = omega, the normalization under which
    a Lagrangian self-similar surface obeys d(beta) = -4a phi*lambda given
    J grad(beta) = 2H.  Double it for the primitive of 2 omega.
    """
    jp = J(j.phi)
    return 0.5 * inner(jp, j.phi_s), 0.5 * inner(jp, j.phi_t)


def monotonicity_defect(j: Jet, dbeta, a: float):
    """Componentwise max of |d(beta) + 4a phi*lambda|."""
    ls, lt = liouville_pullback(j)
    return np.maximum(np.abs(dbeta[0] + 4 * a * ls), np.abs(dbeta[1] + 4 * a * lt))


def normality_defect(j: Jet, m: Optional[MetricData] = None):
    m = metric(j) if m is None else m
    H = mean_curvature(j, m)
    return np.abs(inner(H, j.phi_s)) + np.abs(inner(H, j.phi_t))


@dataclass(frozen=True)
class CubicForm:
    """Coefficients of C(v, w, x) = <sigma(v, w), J x> on the coordinate basis."""

    sss: np.ndarray
    sst: np.ndarray
    stt: np.ndarray
    ttt: np.ndarray
    symmetry_defect: np.ndarray


def second_fundamental_cubic(j: Jet, m: Optional[MetricData] = None, check: bool = True,
                             tol: float = 1e-8) -> CubicForm:
    m = metric(j) if m is None else m
    if check:
        scale = m.g11
        if np.any(np.abs(lagrangian_defect(j)) > tol * scale):
            raise NotLagrangian("cubic form requires a Lagrangian jet")
    sig_ss = normal_part(j, j.phi_ss, m)
    sig_st = normal_part(j, j.phi_st, m)
    sig_tt = normal_part(j, j.phi_tt, m)
    js, jt = J(j.phi_s), J(j.phi_t)
    sss = inner(sig_ss, js)
    sst = inner(sig_ss, jt)
    sts = inner(sig_st, js)
    stt = inner(sig_st, jt)
    tts = inner(sig_tt, js)
    ttt = inner(sig_tt, jt)
    sym = np.maximum(np.abs(sst - sts), np.abs(stt - tts))
    return CubicForm(sss, sst, stt, ttt, sym)


def second_fundamental_trace(j: Jet, m: Optional[MetricData] = None):
    """g^{ij} sigma_ij, computed independently of ``mean_curvature``'s shortcut."""
    m = metric(j) if m is None else m
    i11, i12, i22 = m.inverse()
    sig = [normal_part(j, v, m) for v in (j.phi_ss, j.phi_st, j.phi_tt)]
    return i11[..., None] * sig[0] + 2 * i12[..., None] * sig[1] + i22[..., None] * sig[2]


def hopf_forms(j: Jet, check: bool = True, m: Optional[MetricData] = None):
    """(f, h) with f = 4C(d_z, d_z, d_z) and h = 2 omega(d_zbar, H), z = s + i t.

    Requires (s, t) to be isothermal; ``check=False`` skips the conformality and
    Lagrangian guards for diagnostic use on non-HSL jets.
    """
    m = metric(j, tol_conf=TOL_CONF) if m is None else m
    if check and m.conformal_factor is None:
        raise NotConformal("hopf forms need isothermal coordinates")
    C = second_fundamental_cubic(j, m, check=check)
    f = 0.5 * (C.sss - 3j * C.sst - 3 * C.stt + 1j * C.ttt)
    H = mean_curvature(j, m)
    h = omega(j.phi_s, H) + 1j * omega(j.phi_t, H)
    return f, h


# ---------------------------------------------------------------------------
# identities needing a neighbourhood of the point
# ---------------------------------------------------------------------------

def divergence_identity_defect(surface: SurfaceModel, p, a: float, step: float = 1e-3,
                               mode: str = "analytic"):
    """|div(phi^T) - 2(1 + |H|^2 / a)| with the divergence by central differences.

    div X = (1/sqrt(det g)) d_i(sqrt(det g) X^i), using the tangential
    coefficients of the position vector at the four stencil neighbours.
    """
    s, t = (np.asarray(x, dtype=float) for x in p)

    def flux(ss, tt):
        j = surface.jet(ss, tt, mode)
        m = metric(j)
        c1, c2 = _tangent_coeffs(j, m, j.phi)
        w = np.sqrt(m.det)
        return w * c1, w * c2

    fs_p, _ = flux(s + step, t)
    fs_m, _ = flux(s - step, t)
    _, ft_p = flux(s, t + step)
    _, ft_m = flux(s, t - step)
    j0 = surface.jet(s, t, mode)
    m0 = metric(j0)
    div = ((fs_p - fs_m) + (ft_p - ft_m)) / (2 * step) / np.sqrt(m0.det)
    H = mean_curvature(j0, m0)
    rhs = 2 * (1 + inner(H, H) / a)
    return np.abs(div - rhs)


def parallel_mean_curvature_defect(surface: SurfaceModel, p, step: float = 1e-4,
                                   mode: str = "analytic"):
    """max |(dH/ds)^perp|, |(dH/dt)^perp|: normal-bundle derivative of H by central differences."""
    s, t = (np.asarray(x, dtype=float) for x in p)

    def H_at(ss, tt):
        return mean_curvature(surface.jet(ss, tt, mode))

    j0 = surface.jet(s, t, mode)
    m0 = metric(j0)
    dHs = (H_at(s + step, t) - H_at(s - step, t)) / (2 * step)
    dHt = (H_at(s, t + step) - H_at(s, t - step)) / (2 * step)
    return np.maximum(norm(normal_part(j0, dHs, m0)), norm(normal_part(j0, dHt, m0)))


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def _trapezoid_weights(n: int, periodic: bool):
    if periodic:
        return np.full(n, 1.0 / n)
    w = np.full(n, 1.0 / (n - 1))
    w[0] = w[-1] = 0.5 / (n - 1)
    return w


def _integrate(surface: SurfaceModel, cell: Optional[Cell], n, integrand, mode: str):
    cell = surface.cell if cell is None else cell
    n1, n2 = (n, n) if np.isscalar(n) else n
    if min(n1, n2) < 8:
        raise ValueError("quadrature needs at least 8 nodes per axis")
    u, v = cell.axes(n1, n2)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    s, t = cell.to_param(uu, vv)
    j = surface.jet(s, t, mode)
    m = metric(j)
    w = np.outer(_trapezoid_weights(n1, cell.periodic[0]), _trapezoid_weights(n2, cell.periodic[1]))
    return float(np.sum(w * integrand(j, m)) * cell.jacobian)


def area_integral(surface: SurfaceModel, cell: Optional[Cell] = None, n=64, mode: str = "analytic"):
    """Composite trapezoid quadrature of sqrt(det g) over a parameter cell.

    Periodic cell axes use the periodic rule (far endpoint dropped), which is
    spectrally accurate for smooth integrands over a full period.
    """
    return _integrate(surface, cell, n, lambda j, m: np.sqrt(m.det), mode)


def willmore_integral(surface: SurfaceModel, cell: Optional[Cell] = None, n=64, mode: str = "analytic"):
    def integrand(j, m):
        H = mean_curvature(j, m)
        return inner(H, H) * np.sqrt(m.det)
    return _integrate(surface, cell, n, integrand, mode)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class GeometryReport:
    records: list
    aggregates: dict
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_arrays(cls, s, t, residuals: dict, metadata: Optional[dict] = None) -> "GeometryReport":
        s = np.ravel(s)
        t = np.ravel(t)
        flat = {k: np.ravel(np.broadcast_to(v, np.shape(s) if np.ndim(v) == 0 else np.shape(v)))
                for k, v in residuals.items()}
        order = np.lexsort((t, s))
        records = [
            {"p": [float(s[i]), float(t[i])], "residuals": {k: float(flat[k][i]) for k in sorted(flat)}}
            for i in order
        ]
        aggregates = {}
        for k in sorted(flat):
            vals = flat[k][order]
            aggregates[k] = {"max": float(np.max(vals)), "rms": float(np.sqrt(np.mean(vals ** 2)))}
        return cls(records, aggregates, dict(metadata or {}))

    def to_dict(self, include_records: bool = False) -> dict:
        out = {"aggregates": self.aggregates, "metadata": self.metadata}
        if include_records:
            out["records"] = self.records
        return out
