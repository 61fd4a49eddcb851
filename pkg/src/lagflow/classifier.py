"""Profile data, structure equations and reconstruction of HSL self-similar surfaces.

Every Hamiltonian stationary Lagrangian self-similar surface has a constant
Hopf coefficient h.  After rotating the isothermal coordinates so that h is
real and positive (h = mu), the squared norm g = |phi|^2 and the conformal
factor e^{2u} depend on the second coordinate y only.  The ODE data
(a, mu, alpha = e^{2u(0)}, E) then decide which family the surface belongs to.

Coordinates used below: the *profile frame* at a base parameter point p0 is
(x, y) with (s, t) = p0 + x d_x + y d_y, where d_x = (cos th, sin th) and
d_y = (-sin th, cos th) for th = arg h.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from . import families as fam
from .congruence import unitary_procrustes
from .core import J, hopf_forms, inner
from .errors import NoExtremum, NotHSL, OutOfRange, StepTooLarge, WrongFamily
from .surface import Cell, Jet, SurfaceModel, point

CASE_A = "CaseA_Epos"
CYLINDER = "Cylinder_Ezero"
CASE_B = "CaseB_Eneg"
CLIFFORD = "Clifford_EminusMuSq"

EPS_E = 1e-9          # branch collar, relative to mu^2
TOL_H_CONST = 1e-8    # relative constancy tolerance for h
FD_STEP = 1e-3        # base step for Richardson differences of profile fields
FRENET_TOL = 1e-6     # admissible error estimate per unit length
SEARCH_WINDOW = 2 * math.pi  # max |y| scanned for a critical point of u

LABELS = {
    "a": "Theorem1(a)",
    "cylinder": "Theorem1(b)(i)",
    "clifford": "Theorem1(b)(ii)",
    "upsilon": "Theorem1(b)(iii)",
    "psi": "Theorem1(b)(iv)",
}


def energy(a: float, mu: float, alpha: float) -> float:
    """First-integral energy from the data at a critical point of u."""
    return a * alpha * (2 + a * alpha / mu ** 2)


def branch_of(E: float, mu: float, a: float) -> str:
    eps = EPS_E * mu * mu
    if abs(E + mu * mu) <= eps:
        branch = CLIFFORD
    elif abs(E) <= eps:
        branch = CYLINDER
    elif E > eps:
        branch = CASE_A
    elif -mu * mu + eps < E < -eps:
        branch = CASE_B
    else:
        raise OutOfRange(f"energy E={E!r} below -mu^2={-mu * mu!r}")
    if branch != CASE_A and a > 0:
        raise OutOfRange(f"branch {branch} requires a < 0 (a={a!r})")
    return branch


def discriminant(ps: "ProfileState") -> float:
    """Discriminant of P(g) = 4E g^2 - (8 mu^2 / a) g - 4 mu^2 / a^2."""
    A, B, C = 4 * ps.E, -8 * ps.mu ** 2 / ps.a, -4 * ps.mu ** 2 / ps.a ** 2
    return B * B - 4 * A * C


def first_integral(ps: "ProfileState", g):
    g = np.asarray(g, dtype=float)
    return 4 * ps.E * g * g - 8 * ps.mu ** 2 / ps.a * g - 4 * ps.mu ** 2 / ps.a ** 2


# ---------------------------------------------------------------------------
# closed-form solution of the reduced Frenet system
# ---------------------------------------------------------------------------

def _cs(E: float):
    """(C, S, C', S') with C'' = E C, C(0) = 1, C'(0) = 0 and S' = C, S(0) = 0."""
    if E > 0:
        k = math.sqrt(E)
        return (lambda y: np.cosh(k * y), lambda y: np.sinh(k * y) / k,
                lambda y: k * np.sinh(k * y), lambda y: np.cosh(k * y))
    if E < 0:
        k = math.sqrt(-E)
        return (lambda y: np.cos(k * y), lambda y: np.sin(k * y) / k,
                lambda y: -k * np.sin(k * y), lambda y: np.cos(k * y))
    return (np.ones_like, lambda y: np.asarray(y, dtype=float),
            np.zeros_like, np.ones_like)


def closed_form_surface(a: float, mu: float, alpha: float, E: Optional[float] = None) -> SurfaceModel:
    """phi(x, y) = (i mu/(a sqrt(alpha)) C(y) e^{-i a alpha x/mu}, sqrt(alpha) S(y) e^{i mu E x/(a alpha)}).

    One expression covers E > 0 (cosh/sinh), E < 0 (cos/sin) and E = 0
    (1, y).  The frame at the origin is phi_x = (sqrt(alpha), 0),
    phi_y = (0, sqrt(alpha)).
    """
    E = energy(a, mu, alpha) if E is None else E
    Cf, Sf, dC, dS = _cs(E)
    A1 = 1j * mu / (a * math.sqrt(alpha))
    A2 = math.sqrt(alpha)
    w1 = -a * alpha / mu
    w2 = mu * E / (a * alpha)

    def jet_func(x, y):
        e1, e2 = np.exp(1j * w1 * x), np.exp(1j * w2 * x)
        c, sn, cp, sp = Cf(y), Sf(y), dC(y), dS(y)
        c = np.broadcast_to(c, np.shape(x + y))
        sn = np.broadcast_to(sn, np.shape(x + y))
        cp = np.broadcast_to(cp, np.shape(x + y))
        sp = np.broadcast_to(sp, np.shape(x + y))
        z1, z2 = A1 * c * e1, A2 * sn * e2
        z1x, z2x = 1j * w1 * z1, 1j * w2 * z2
        z1y, z2y = A1 * cp * e1, A2 * sp * e2
        return Jet(x, y, point(z1, z2), point(z1x, z2x), point(z1y, z2y),
                   point(-w1 * w1 * z1, -w2 * w2 * z2), point(1j * w1 * z1y, 1j * w2 * z2y),
                   point(E * z1, E * z2))

    def func(x, y):
        return jet_func(np.asarray(x, float), np.asarray(y, float)).phi

    return SurfaceModel(f"frenet(a={a!r},mu={mu!r},alpha={alpha!r})", func,
                        Cell.rect(0.0, 1.0, 0.0, 1.0), jet_func, a)


# ---------------------------------------------------------------------------
# profile extraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProfileState:
    """ODE data of an HSL self-similar surface at a critical point of u."""

    a: float
    mu: float
    alpha: float
    E: float
    branch: str
    g: Callable = field(repr=False)
    g_prime: Callable = field(repr=False)
    base: tuple = (0.0, 0.0)
    theta: float = 0.0
    surface: Optional[SurfaceModel] = field(default=None, repr=False)

    @classmethod
    def from_parameters(cls, a: float, mu: float, alpha: float) -> "ProfileState":
        """Profile of the closed-form solution with the given data."""
        E = energy(a, mu, alpha)
        branch = branch_of(E, mu, a)
        Cf, Sf, dC, dS = _cs(E)
        b = mu * mu / (a * a * alpha)

        def g(y):
            return b * Cf(y) ** 2 + alpha * Sf(y) ** 2

        def g_prime(y):
            return 2 * b * Cf(y) * dC(y) + 2 * alpha * Sf(y) * dS(y)

        return cls(a, mu, alpha, E, branch, g, g_prime, (0.0, 0.0), 0.0, closed_form_surface(a, mu, alpha, E))

    @property
    def frame(self):
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([c, s]), np.array([-s, c])

    def to_param(self, x, y):
        """Parameter point (s, t) of profile coordinates (x, y)."""
        dx, dy = self.frame
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.base[0] + x * dx[0] + y * dy[0], self.base[1] + x * dx[1] + y * dy[1]

    def jet(self, x, y) -> Jet:
        s, t = self.to_param(x, y)
        return self.surface.jet(s, t).rotated(self.theta)

    @property
    def g0(self) -> float:
        return float(self.g(0.0))


def _profile_fields(j: Jet):
    """Pointwise fields in the profile frame of an already rotated jet."""
    e2u = inner(j.phi_s, j.phi_s)
    g = inner(j.phi, j.phi)
    return {
        "e2u": e2u,
        "u": 0.5 * np.log(e2u),
        "ux": inner(j.phi_s, j.phi_ss) / e2u,
        "uy": inner(j.phi_s, j.phi_st) / e2u,
        "g": g,
        "gx": 2 * inner(j.phi, j.phi_s),
        "gy": 2 * inner(j.phi, j.phi_t),
        "gxx": 2 * (inner(j.phi_s, j.phi_s) + inner(j.phi, j.phi_ss)),
        "gxy": 2 * (inner(j.phi_s, j.phi_t) + inner(j.phi, j.phi_st)),
        "gyy": 2 * (inner(j.phi_t, j.phi_t) + inner(j.phi, j.phi_tt)),
    }


def _constant_h(surface: SurfaceModel, n: int = 16):
    s, t = surface.cell.grid(n, n)
    _, h = hopf_forms(surface.jet(s, t))
    h0 = complex(np.mean(h))
    spread = float(np.max(np.abs(h - h0)))
    if not np.all(np.isfinite(h)) or spread > TOL_H_CONST * (1 + abs(h0)):
        raise NotHSL(f"h is not constant on the cell (spread {spread:.3e})")
    if abs(h0) < TOL_H_CONST:
        raise NotHSL("h vanishes; the surface is not a self-similar solution with a != 0")
    return h0


def _find_critical(uy: Callable, y_max: float, n: int = 801) -> float:
    """Zero of u'(y) nearest to y = 0 on [-y_max, y_max]."""
    ys = np.linspace(-y_max, y_max, n)
    vals = uy(ys)
    scale = float(np.max(np.abs(vals)))
    if scale <= 1e-12:
        return 0.0  # u constant: every point is critical
    if abs(float(uy(0.0))) <= 1e-14 * scale:
        return 0.0
    roots = []
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0):
        lo, hi = ys[i], ys[i + 1]
        if vals[i] == 0:
            roots.append(lo)
        elif vals[i + 1] == 0:
            roots.append(hi)
        else:
            roots.append(brentq(uy, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    if not roots:
        raise NoExtremum(f"u' has no zero on [-{y_max}, {y_max}]")
    return float(min(roots, key=abs))


def profile_from_family(surface: SurfaceModel, base=None) -> ProfileState:
    """Extract (mu, alpha, E, g) from a surface with constant h.

    The profile line passes through ``base`` (default: the parameter origin)
    along the direction in which u varies; the base point is moved along that
    line to the critical point of u closest to it.
    """
    if surface.a is None:
        raise WrongFamily("surface carries no self-similarity constant a")
    a = float(surface.a)
    h0 = _constant_h(surface)
    mu, theta = abs(h0), float(np.angle(h0))
    p = (0.0, 0.0) if base is None else (float(base[0]), float(base[1]))
    probe = ProfileState(a, mu, 1.0, 0.0, CASE_A, None, None, p, theta, surface)

    def uy(y):
        return _profile_fields(probe.jet(np.zeros_like(np.asarray(y, float)), y))["uy"]

    cell = surface.cell
    y_max = 0.5 * math.hypot(cell.e1[0] + cell.e2[0], cell.e1[1] + cell.e2[1])
    y0 = _find_critical(uy, min(max(y_max, 1.0), SEARCH_WINDOW))
    p0 = probe.to_param(0.0, y0)
    p0 = (float(p0[0]), float(p0[1]))
    frame = ProfileState(a, mu, 1.0, 0.0, CASE_A, None, None, p0, theta, surface)
    alpha = float(_profile_fields(frame.jet(0.0, 0.0))["e2u"])
    E = energy(a, mu, alpha)

    def g(y):
        y = np.asarray(y, dtype=float)
        return _profile_fields(frame.jet(np.zeros_like(y), y))["g"]

    def g_prime(y):
        y = np.asarray(y, dtype=float)
        return _profile_fields(frame.jet(np.zeros_like(y), y))["gy"]

    return ProfileState(a, mu, alpha, E, branch_of(E, mu, a), g, g_prime, p0, theta, surface)


# ---------------------------------------------------------------------------
# structure equations
# ---------------------------------------------------------------------------

def _richardson(fun, h):
    """Central derivative of fun(step) -> value at step 0, Richardson-extrapolated."""
    d1 = (fun(h) - fun(-h)) / (2 * h)
    d2 = (fun(h / 2) - fun(-h / 2)) / h
    return (4 * d2 - d1) / 3


def structure_defects(surface: SurfaceModel, p, profile: Optional[ProfileState] = None,
                      step: float = FD_STEP, frenet: bool = True, printed_12c: bool = False) -> dict:
    """Absolute residuals of the HSL self-similar structure equations at p.

    Keys ``eq12a`` ... ``eq24`` (and ``eq25a/b/c`` when ``frenet``).  Jets are
    analytic; derivatives of u, h and f are Richardson central differences of
    their analytic values along the profile frame.

    ``eq12c`` is the compatibility condition f_zbar = e^{2u}(h_z - 2 u_z conj(h)),
    the form consistent with f = mu(e^{2u} - 2E/a).
    """
    ps = profile_from_family(surface) if profile is None else profile
    a, mu, E = ps.a, ps.mu, ps.E
    th = ps.theta
    dx, dy = ps.frame
    s0, t0 = (np.asarray(v, dtype=float) for v in p)

    def fields_at(ex, ey):
        j = surface.jet(s0 + ex * dx[0] + ey * dy[0], t0 + ex * dx[1] + ey * dy[1]).rotated(th)
        out = _profile_fields(j)
        f, h = hopf_forms(j, check=False)  # residuals must stay finite on non-HSL input
        out["f"], out["h"] = f, h
        return out, j

    F, j = fields_at(0.0, 0.0)

    def d(name, axis):
        if axis == 0:
            return _richardson(lambda e: fields_at(e, 0.0)[0][name], step)
        return _richardson(lambda e: fields_at(0.0, e)[0][name], step)

    e2u, u, ux, uy = F["e2u"], F["u"], F["ux"], F["uy"]
    g, gx, gy, gxx, gxy, gyy = F["g"], F["gx"], F["gy"], F["gxx"], F["gxy"], F["gyy"]
    f, h = F["f"], F["h"]
    lap_u = d("ux", 0) + d("uy", 1)
    uyy = d("uy", 1)
    hx, hy = d("h", 0), d("h", 1)
    fx, fy = d("f", 0), d("f", 1)
    h_z, h_zb = 0.5 * (hx - 1j * hy), 0.5 * (hx + 1j * hy)
    f_z, f_zb = 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)
    u_z, u_zb = 0.5 * (ux - 1j * uy), 0.5 * (ux + 1j * uy)
    g_z = 0.5 * (gx - 1j * gy)
    g_zz = 0.25 * (gxx - 2j * gxy - gyy)
    g_zzb = 0.25 * (gxx + gyy)
    e4u = e2u * e2u

    res = {
        "eq12a": lap_u + 0.5 * (np.abs(h) ** 2 - np.abs(f) ** 2 / e4u),
        "eq12b": np.imag(h_z),
        "eq12c": f_zb - e2u * (h_z - 2 * u_z * np.conj(h)),
        "eq13": h_z + a * np.real(h * g_z),
        "eq14": g_zzb - (np.abs(h) ** 2 / a + e2u),
        "eq15": g_zz - 2 * u_z * g_z - (np.conj(h) ** 2 + f * h / e2u) / (2 * a),
        "eq16": gyy - 4 * (mu ** 2 / a + e2u),
        "eq17": f - e2u / mu * (a * uy * gy - 0.5 * a * gyy - mu ** 2),
        "eq18": g - (gy ** 2 / 4 + mu ** 2 / a ** 2) / e2u,
        "eq19": a ** 2 * (g * gyy - gy ** 2) - 4 * mu ** 2 * (1 + a * g),
        "eq20": gy ** 2 - first_integral(ps, g),
        "eq21": e2u - (E * g - 2 * mu ** 2 / a),
        "eq22": uy ** 2 - 2 * mu ** 2 * E / a / e2u + mu ** 2 * E ** 2 / a ** 2 / e4u - E,
        "eq23": uyy + 2 * mu ** 2 * E / a / e2u - 2 * mu ** 2 * E ** 2 / a ** 2 / e4u,
        "eq24": f - mu * (e2u - 2 * E / a),
    }
    if printed_12c:
        # the sign-reversed variant conj(f)_zbar = e^{2u}(h_zbar - 2 u_zbar h); fails wherever u' != 0
        res["eq12c_printed"] = np.conj(f_z) - e2u * (h_zb - 2 * u_zb * h)
    if frenet:
        k = mu * E / a / e2u
        res["eq25a"] = j.phi_ss - (-uy[..., None] * j.phi_t + (2 * mu - k)[..., None] * J(j.phi_s))
        res["eq25b"] = j.phi_st - (uy[..., None] * j.phi_s + k[..., None] * J(j.phi_t))
        res["eq25c"] = j.phi_tt - (uy[..., None] * j.phi_t + k[..., None] * J(j.phi_s))
        for key in ("eq25a", "eq25b", "eq25c"):
            res[key] = np.sqrt(np.sum(np.abs(res[key]) ** 2, axis=-1))
    return {k: np.abs(v) for k, v in res.items()}


# ---------------------------------------------------------------------------
# Frenet integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrenetPatch:
    x: np.ndarray
    y: np.ndarray
    points: np.ndarray        # (nx, ny, 2) complex
    error_estimate: float     # step-doubling estimate, max over the patch


def _rk4(rhs, state, h, n, record):
    out = [record(state)]
    for _ in range(n):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * h * k1)
        k3 = rhs(state + 0.5 * h * k2)
        k4 = rhs(state + h * k3)
        state = state + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(record(state))
    return out


def _frenet_rhs(ps: ProfileState):
    a, mu, E = ps.a, ps.mu, ps.E

    def rhs_y(z):
        # z = (phi, phi_x, phi_y, u, u') with u, u' stored as complex with zero imaginary part
        px, py = z[2:4], z[4:6]
        u, up = z[6].real, z[7].real
        k = mu * E / a * math.exp(-2 * u)
        upp = -2 * mu ** 2 * E / a * math.exp(-2 * u) + 2 * mu ** 2 * E ** 2 / a ** 2 * math.exp(-4 * u)
        return np.concatenate([py, up * px + k * J(py), up * py + k * J(px), [up, upp]])

    return rhs_y


def _integrate(ps: ProfileState, x0, x1, y0, y1, nx, ny):
    a, mu, E, alpha = ps.a, ps.mu, ps.E, ps.alpha
    r = math.sqrt(alpha)
    phi_x0 = np.array([r, 0.0], dtype=complex)
    phi_y0 = np.array([0.0, r], dtype=complex)
    z = np.concatenate([mu / (a * alpha) * J(phi_x0), phi_x0, phi_y0, [0.5 * math.log(alpha), 0.0]])
    rhs_y = _frenet_rhs(ps)
    hy = (y1 - y0) / ny
    if y0 != 0.0:  # carry the initial frame from y = 0 to y0 with a comparable step
        n0 = max(1, int(math.ceil(abs(y0) / abs(hy))))
        z = _rk4(rhs_y, z, y0 / n0, n0, lambda w: w)[-1]
    col = np.array(_rk4(rhs_y, z, hy, ny, lambda w: w.copy()))   # (ny+1, 8)
    up = col[:, 7].real
    k = mu * E / a * np.exp(-2 * col[:, 6].real)

    # along x the coefficients depend on y only: one linear system per row
    def rhs_x(w):
        px, py = w[:, 2:4], w[:, 4:6]
        pxx = -up[:, None] * py + (2 * mu - k)[:, None] * J(px)
        pxy = up[:, None] * px + k[:, None] * J(py)
        return np.concatenate([px, pxx, pxy], axis=1)

    rows = col[:, :6]
    hx = (x1 - x0) / nx
    if x0 != 0.0:
        n0 = max(1, int(math.ceil(abs(x0) / abs(hx))))
        rows = _rk4(rhs_x, rows, x0 / n0, n0, lambda w: w)[-1]
    out = _rk4(rhs_x, rows, hx, nx, lambda w: w[:, 0:2].copy())
    return np.stack(out, axis=0)                                 # (nx+1, ny+1, 2)


def integrate_frenet(ps: ProfileState, domain=((0.0, 1.0), (0.0, 1.0)), step: float = 1e-3) -> FrenetPatch:
    """Integrate the reduced Frenet system from the frame at the critical point.

    Initial data: phi_x = (sqrt(alpha), 0), phi_y = (0, sqrt(alpha)) and
    phi = (mu / (a alpha)) J phi_x at (0, 0).  Classical RK4 along y (with u
    carried as an ODE) and then along x for every row.  The error estimate
    compares against a run with doubled step.
    """
    (x0, x1), (y0, y1) = domain
    nx = max(2, int(round((x1 - x0) / step)))
    ny = max(2, int(round((y1 - y0) / step)))
    nx += nx % 2
    ny += ny % 2
    fine = _integrate(ps, x0, x1, y0, y1, nx, ny)
    coarse = _integrate(ps, x0, x1, y0, y1, nx // 2, ny // 2)
    err = float(np.max(np.abs(fine[::2, ::2] - coarse))) / 15.0
    length = max(x1 - x0, y1 - y0)
    if err > FRENET_TOL * length:
        raise StepTooLarge(f"error estimate {err:.3e} exceeds {FRENET_TOL} per unit length")
    return FrenetPatch(np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1), fine, err)


def closed_form(ps: ProfileState) -> Callable:
    """phi(x, y) of the explicit solution with the same data and initial frame."""
    return closed_form_surface(ps.a, ps.mu, ps.alpha, ps.E).func


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Classification:
    label: str
    branch: str
    family: str
    shape_name: Optional[str]
    shape_param: Optional[float]
    g0: float


def classify(ps: ProfileState) -> Classification:
    a, g0 = ps.a, ps.g0
    if ps.branch == CYLINDER:
        return Classification(LABELS["cylinder"], ps.branch, fam.CYLINDER, None, None, g0)
    if ps.branch == CLIFFORD:
        return Classification(LABELS["clifford"], ps.branch, fam.CLIFFORD, None, None, g0)
    if ps.branch == CASE_A:
        b = g0
        if a > 0:
            if b <= 0:
                raise OutOfRange(f"b = g(0) = {b!r} must be positive")
            delta = math.asinh(math.sqrt(2 * a * b))
            return Classification(LABELS["a"], ps.branch, fam.PHI, "delta", delta, g0)
        if not 0 < b < -1 / (2 * a):
            raise OutOfRange(f"b = g(0) = {b!r} outside (0, {-1 / (2 * a)!r})")
        gamma = math.asin(math.sqrt(-2 * a * b))
        return Classification(LABELS["upsilon"], ps.branch, fam.UPSILON, "gamma", gamma, g0)
    c = g0
    if not c > -1 / (2 * a):
        raise OutOfRange(f"c = g(0) = {c!r} must exceed {-1 / (2 * a)!r}")
    nu = math.acosh(math.sqrt(-2 * a * c))
    return Classification(LABELS["psi"], ps.branch, fam.PSI, "nu", nu, g0)


def rebuild(cls: Classification, a: float) -> SurfaceModel:
    """The family member named by a classification."""
    if cls.family == fam.PHI:
        return fam.make_phi(a, cls.shape_param, rational=None)
    if cls.family == fam.UPSILON:
        return fam.make_upsilon(a, cls.shape_param, rational=None)
    if cls.family == fam.PSI:
        return fam.make_psi(a, cls.shape_param, rational=None)
    if cls.family == fam.CLIFFORD:
        return fam.make_clifford(a)
    return fam.make_cylinder(a)


def roundtrip_congruence(surface: SurfaceModel, n: int = 24, extent: float = 1.0):
    """Profile, classify, rebuild and match; returns (residual / diameter, classification).

    The input and the rebuilt surface are sampled on the same profile-frame
    patch [-extent, extent]^2 (scaled by 1/mu), the rebuilt coordinates scaled
    by mu_in / mu_out.  The best of the four axis reflections is reported.
    """
    ps_in = profile_from_family(surface)
    cls = classify(ps_in)
    rebuilt = rebuild(cls, ps_in.a)
    ps_out = profile_from_family(rebuilt)
    k = ps_in.mu / ps_out.mu
    w = extent / ps_in.mu
    x, y = np.meshgrid(np.linspace(-w, w, n), np.linspace(-w, w, n), indexing="ij")
    P = surface(*ps_in.to_param(x, y))
    best = math.inf
    for sx in (1, -1):
        for sy in (1, -1):
            Q = rebuilt(*ps_out.to_param(sx * k * x, sy * k * y))
            best = min(best, unitary_procrustes(P, Q).relative)
    return best, cls
