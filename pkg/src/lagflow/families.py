"""Closed-form Hamiltonian stationary Lagrangian self-similar surfaces.

Three one-parameter families plus the two product examples:

* ``make_phi``      expanders (a > 0), plane / cylinder / Moebius strip
* ``make_upsilon``  shrinkers (a < 0), plane / cylinder / Moebius strip
* ``make_psi``      shrinkers (a < 0), cylinder / torus / Klein bottle
* ``make_clifford`` and ``make_cylinder``, radius 1/sqrt(-2a)

Every constructor returns a :class:`SurfaceModel` with closed-form jets, the
closed-form Lagrangian-angle covector and its symmetry lattice.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import BadParams, WrongFamily
from .surface import Cell, Jet, SurfaceModel, as_real, diameter

MAX_DENOMINATOR = 10 ** 6
RATIONAL_TOL = 1e-12
# Rational forms with a larger denominator keep their lattice, but are sampled on
# the local window cell: their fundamental cells are too long to resolve.
MAX_CELL_DENOMINATOR = 1000

PHI, UPSILON, PSI, CLIFFORD, CYLINDER, CONE = (
    "PhiExpander", "UpsilonShrinker", "PsiShrinker", "CliffordTorus", "RightCylinder", "Cone")


# ---------------------------------------------------------------------------
# specs, rationality, lattices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FamilySpec:
    kind: str
    a: float
    shape_param: Optional[float] = None
    rational_form: Optional[tuple] = None

    def __post_init__(self):
        a = self.a
        if not np.isfinite(a) or a == 0:
            raise BadParams("a must be a finite nonzero number")
        if self.kind in (PHI,) and a <= 0:
            raise BadParams(f"{self.kind} requires a > 0")
        if self.kind in (UPSILON, PSI, CLIFFORD, CYLINDER) and a >= 0:
            raise BadParams(f"{self.kind} requires a < 0")


def detect_rational(x: float, max_den: int = MAX_DENOMINATOR, tol: float = RATIONAL_TOL):
    """(p, q) coprime with |x - p/q| <= tol and q <= max_den, else None."""
    fr = Fraction(x).limit_denominator(max_den)
    if abs(float(fr) - x) <= tol:
        return fr.numerator, fr.denominator
    return None


@dataclass(frozen=True)
class Generator:
    """Affine map (s, t) -> A (s, t) + b of the parameter plane."""

    kind: str  # "translation" | "glide"
    A: tuple
    b: tuple

    @property
    def orientation_reversing(self) -> bool:
        (a11, a12), (a21, a22) = self.A
        return a11 * a22 - a12 * a21 < 0

    def __call__(self, s, t):
        (a11, a12), (a21, a22) = self.A
        return a11 * s + a12 * t + self.b[0], a21 * s + a22 * t + self.b[1]


def translation(ds: float, dt: float) -> Generator:
    return Generator("translation", ((1.0, 0.0), (0.0, 1.0)), (ds, dt))


@dataclass(frozen=True)
class SymmetryLattice:
    generators: tuple
    quotient_label: str

    @property
    def translations(self):
        return [g for g in self.generators if g.kind == "translation"]

    @property
    def glides(self):
        return [g for g in self.generators if g.kind == "glide"]


def invariance_defect(surface: SurfaceModel, gen: Generator, n: int = 32, cell: Optional[Cell] = None) -> float:
    """max |surface(g(p)) - surface(p)| over an n x n sample."""
    s, t, pts = surface.sample(n, n, cell)
    gs, gt = gen(s, t)
    return float(np.max(np.abs(surface(gs, gt) - pts)))


# ---------------------------------------------------------------------------
# separable immersions: each component is A * f(w) * exp(i omega v)
# ---------------------------------------------------------------------------

_PROFILES = {
    "cosh": (np.cosh, np.sinh, np.cosh),
    "sinh": (np.sinh, np.cosh, np.sinh),
    "cos": (np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)),
    "sin": (np.sin, np.cos, lambda x: -np.sin(x)),
    "one": (np.ones_like, np.zeros_like, np.zeros_like),
    "id": (lambda x: x, np.ones_like, np.zeros_like),
}


@dataclass(frozen=True)
class _Component:
    amp: complex
    profile: str
    omega: float
    phase_axis: int  # 0: phase varies with s, amplitude with t; 1: the reverse

    def jet(self, s, t):
        v, w = (s, t) if self.phase_axis == 0 else (t, s)
        f, df, ddf = _PROFILES[self.profile]
        e = self.amp * np.exp(1j * self.omega * v)
        io = 1j * self.omega
        val = e * f(w)
        d_v = io * val
        d_w = e * df(w)
        d_vv = io * io * val
        d_vw = io * d_w
        d_ww = e * ddf(w)
        if self.phase_axis == 0:
            return val, d_v, d_w, d_vv, d_vw, d_ww
        return val, d_w, d_v, d_ww, d_vw, d_vv


def _separable(c1: _Component, c2: _Component):
    def jet_func(s, t):
        parts = [np.stack(z, axis=-1) for z in zip(c1.jet(s, t), c2.jet(s, t))]
        return Jet(s, t, *parts, mode="analytic")

    def func(s, t):
        return np.stack([c1.jet(s, t)[0], c2.jet(s, t)[0]], axis=-1)

    return func, jet_func


def _const_dbeta(bs: float, bt: float):
    def dbeta(s, t):
        shape = np.broadcast(np.asarray(s), np.asarray(t)).shape
        return np.full(shape, float(bs)), np.full(shape, float(bt))
    return dbeta


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def _resolve_rational(value: float, rational):
    if rational == "auto":
        return detect_rational(value)
    if rational is None or rational is False:
        return None
    p, q = rational
    if math.gcd(p, q) != 1:
        raise BadParams(f"rational form {rational} is not coprime")
    if abs(p / q - value) > 1e-9:
        raise BadParams(f"rational form {rational} does not match {value}")
    return int(p), int(q)


def _resolvable(pq) -> bool:
    return pq is not None and max(pq) <= MAX_CELL_DENOMINATOR


def _strip_lattice(pq):
    """Lattice of Phi_{p,q} / Upsilon_{p,q}: s-period 2 pi sqrt(pq); glide when p odd and q even."""
    if pq is None:
        return SymmetryLattice((), "plane")
    p, q = pq
    L = 2 * math.pi * math.sqrt(p * q)
    gens = [translation(L, 0.0)]
    label = "cylinder"
    if p % 2 == 1 and q % 2 == 0:
        gens.append(Generator("glide", ((1.0, 0.0), (0.0, -1.0)), (L / 2, 0.0)))
        label = "moebius"
    return SymmetryLattice(tuple(gens), label)


def make_phi(a: float, delta: float, rational="auto", t_range=(-2.0, 2.0)) -> SurfaceModel:
    """Self-expander (1/sqrt(2a)) (i sinh(d) cosh t e^{-is/cosh d}, tanh(d) sinh t e^{i cosh(d) s})."""
    if not (delta > 0 and np.isfinite(delta)):
        raise BadParams("Phi requires delta > 0")
    FamilySpec(PHI, a, float(delta))
    sd, cd, td = math.sinh(delta), math.cosh(delta), math.tanh(delta)
    pq = _resolve_rational(cd * cd, rational)
    if pq is not None and not pq[0] > pq[1]:
        raise BadParams("Phi rational form needs p > q")
    k = 1 / math.sqrt(2 * a)
    func, jet_func = _separable(_Component(1j * k * sd, "cosh", -1 / cd, 0),
                                _Component(k * td, "sinh", cd, 0))
    lattice = _strip_lattice(pq)
    period = lattice.translations[0].b[0] if _resolvable(pq) else 2 * math.pi * cd
    cell = Cell.rect(0.0, period, *t_range, periodic=(_resolvable(pq), False))
    spec = FamilySpec(PHI, a, float(delta), pq)
    return SurfaceModel(f"phi(a={a!r},delta={delta!r})", func, cell, jet_func, a, spec, lattice,
                        _const_dbeta(sd * sd / cd, 0.0))


def make_phi_pq(a: float, p: int, q: int, **kw) -> SurfaceModel:
    if not (p > q > 0):
        raise BadParams("Phi_{p,q} needs p > q > 0")
    return make_phi(a, math.acosh(math.sqrt(p / q)), rational=(p, q), **kw)


def make_upsilon(a: float, gamma: float, rational="auto", t_range=(-2.0, 2.0)) -> SurfaceModel:
    """Self-shrinker (1/sqrt(-2a)) (-i sin(g) cosh t e^{is/cos g}, tan(g) sinh t e^{-i cos(g) s})."""
    if not (0 < gamma < math.pi / 2):
        raise BadParams("Upsilon requires 0 < gamma < pi/2")
    FamilySpec(UPSILON, a, float(gamma))
    sg, cg, tg = math.sin(gamma), math.cos(gamma), math.tan(gamma)
    pq = _resolve_rational(cg * cg, rational)
    if pq is not None and not pq[0] < pq[1]:
        raise BadParams("Upsilon rational form needs p < q")
    k = 1 / math.sqrt(-2 * a)
    func, jet_func = _separable(_Component(-1j * k * sg, "cosh", 1 / cg, 0),
                                _Component(k * tg, "sinh", -cg, 0))
    lattice = _strip_lattice(pq)
    period = lattice.translations[0].b[0] if _resolvable(pq) else 2 * math.pi / cg
    cell = Cell.rect(0.0, period, *t_range, periodic=(_resolvable(pq), False))
    spec = FamilySpec(UPSILON, a, float(gamma), pq)
    # beta_s = (1/c - c) from det_C = e^{2u} e^{i s (1/c - c)} up to a constant phase
    return SurfaceModel(f"upsilon(a={a!r},gamma={gamma!r})", func, cell, jet_func, a, spec, lattice,
                        _const_dbeta(1 / cg - cg, 0.0))


def make_upsilon_pq(a: float, p: int, q: int, **kw) -> SurfaceModel:
    if not (0 < p < q):
        raise BadParams("Upsilon_{p,q} needs 0 < p < q")
    return make_upsilon(a, math.acos(math.sqrt(p / q)), rational=(p, q), **kw)


def psi_lattice(mn) -> SymmetryLattice:
    if mn is None:
        return SymmetryLattice((translation(2 * math.pi, 0.0),), "cylinder")
    m, n = mn
    r = math.pi * math.sqrt(m * n)
    gens = [translation(2 * math.pi, 0.0)]
    if m % 2 == 1 and n % 2 == 1:
        gens.append(translation(math.pi, r))
    else:
        gens.append(translation(0.0, 2 * r))
    label = "torus"
    if m % 2 == 1 and n % 2 == 0:
        gens.append(Generator("glide", ((-1.0, 0.0), (0.0, 1.0)), (2 * math.pi, r)))
        label = "klein"
    elif m % 2 == 0 and n % 2 == 1:
        gens.append(Generator("glide", ((-1.0, 0.0), (0.0, 1.0)), (math.pi, r)))
        label = "klein"
    return SymmetryLattice(tuple(gens), label)


def make_psi(a: float, nu: float, rational="auto", t_range=(-math.pi, math.pi)) -> SurfaceModel:
    """Self-shrinker (1/sqrt(-2a)) (cosh(nu) cos s e^{it/sinh nu}, coth(nu) sin s e^{i sinh(nu) t})."""
    if not (nu > 0 and np.isfinite(nu)):
        raise BadParams("Psi requires nu > 0")
    FamilySpec(PSI, a, float(nu))
    sn, cn = math.sinh(nu), math.cosh(nu)
    tn = cn / sn
    mn = _resolve_rational(sn * sn, rational)
    k = 1 / math.sqrt(-2 * a)
    func, jet_func = _separable(_Component(k * cn, "cos", 1 / sn, 1),
                                _Component(k * tn, "sin", sn, 1))
    lattice = psi_lattice(mn)
    if not _resolvable(mn):
        cell = Cell.rect(0.0, 2 * math.pi, *t_range, periodic=(True, False))
    else:
        g1, g2 = lattice.translations
        cell = Cell((0.0, 0.0), g1.b, g2.b, (True, True))
    spec = FamilySpec(PSI, a, float(nu), mn)
    return SurfaceModel(f"psi(a={a!r},nu={nu!r})", func, cell, jet_func, a, spec, lattice,
                        _const_dbeta(0.0, cn * cn / sn))


def make_psi_mn(a: float, m: int, n: int, **kw) -> SurfaceModel:
    if m <= 0 or n <= 0 or math.gcd(m, n) != 1:
        raise BadParams("Psi_{m,n} needs coprime positive m, n")
    return make_psi(a, math.asinh(math.sqrt(m / n)), rational=(m, n), **kw)


def psi_dual_parameter(nu: float) -> float:
    """nu_hat = log(coth(nu / 2)); Psi_{nu_hat} is congruent to Psi_nu."""
    return math.log(1 / math.tanh(nu / 2))


def make_clifford(a: float) -> SurfaceModel:
    FamilySpec(CLIFFORD, a)
    r = 1 / math.sqrt(-2 * a)
    func, jet_func = _separable(_Component(r, "one", 1.0, 0), _Component(r, "one", 1.0, 1))
    lattice = SymmetryLattice((translation(2 * math.pi, 0.0), translation(0.0, 2 * math.pi)), "torus")
    cell = Cell.rect(0.0, 2 * math.pi, 0.0, 2 * math.pi, periodic=(True, True))
    return SurfaceModel(f"clifford(a={a!r})", func, cell, jet_func, a, FamilySpec(CLIFFORD, a, None, (1, 1)),
                        lattice, _const_dbeta(1.0, 1.0))


def make_cylinder(a: float, t_range=(-2.0, 2.0)) -> SurfaceModel:
    """(r e^{is}, r t): isothermal parametrization of S^1(r) x R."""
    FamilySpec(CYLINDER, a)
    r = 1 / math.sqrt(-2 * a)
    func, jet_func = _separable(_Component(r, "one", 1.0, 0), _Component(r, "id", 0.0, 0))
    lattice = SymmetryLattice((translation(2 * math.pi, 0.0),), "cylinder")
    cell = Cell.rect(0.0, 2 * math.pi, *t_range, periodic=(True, False))
    return SurfaceModel(f"cylinder(a={a!r})", func, cell, jet_func, a, FamilySpec(CYLINDER, a),
                        lattice, _const_dbeta(1.0, 0.0))


def from_spec(spec: FamilySpec) -> SurfaceModel:
    if spec.kind == PHI:
        return make_phi(spec.a, spec.shape_param, rational=spec.rational_form)
    if spec.kind == UPSILON:
        return make_upsilon(spec.a, spec.shape_param, rational=spec.rational_form)
    if spec.kind == PSI:
        return make_psi(spec.a, spec.shape_param, rational=spec.rational_form)
    if spec.kind == CLIFFORD:
        return make_clifford(spec.a)
    if spec.kind == CYLINDER:
        return make_cylinder(spec.a)
    raise WrongFamily(f"cannot build a surface for {spec.kind}")


# ---------------------------------------------------------------------------
# asymptotic cones
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConeSpec:
    """{(sign*i x1 e^{-sign*is/c}, x2 e^{sign*i c s}) : x1^2 = c^2 x2^2}."""

    sign: int
    c: float

    def point(self, x1, x2, s):
        x1, x2, s = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, s)))
        z1 = self.sign * 1j * x1 * np.exp(-self.sign * 1j * s / self.c)
        z2 = x2 * np.exp(self.sign * 1j * self.c * s)
        return np.stack([z1, z2], axis=-1)

    def branch_point(self, x2, s, branch: int = 1):
        return self.point(branch * self.c * np.asarray(x2, dtype=float), x2, s)

    def quadric_defect(self, x1, x2):
        return np.abs(np.asarray(x1) ** 2 - self.c ** 2 * np.asarray(x2) ** 2)

    def surface(self, branch: int = 1, x_range=(0.5, 3.0)) -> SurfaceModel:
        """The cone sheet x1 = branch*c*x2 parametrized by (s, x2)."""
        sg, c = self.sign, self.c
        func, jet_func = _separable(_Component(sg * 1j * branch * c, "id", -sg / c, 0),
                                    _Component(1.0, "id", sg * c, 0))
        cell = Cell.rect(0.0, 2 * math.pi * c, *x_range)
        return SurfaceModel(f"cone(sign={sg},c={c!r})", func, cell, jet_func, None, None, None)


def asymptotic_cone(spec: FamilySpec) -> ConeSpec:
    if spec.kind == PHI:
        return ConeSpec(1, math.cosh(spec.shape_param))
    if spec.kind == UPSILON:
        return ConeSpec(-1, math.cos(spec.shape_param))
    raise WrongFamily(f"{spec.kind} has no asymptotic cone")


def _distance_to_cone(cone: ConeSpec, X: np.ndarray) -> float:
    from scipy.optimize import least_squares

    best = np.inf
    target = as_real(X)
    for branch in (1, -1):
        # linear least squares in x2 at matched phase, then refine (x2, s)
        # component 1 has phase -sign*s/c after removing sign*i*branch
        phase1 = np.angle(X[0] / (cone.sign * 1j * branch))
        s0 = -cone.sign * cone.c * phase1

        def resid(v):
            return as_real(cone.branch_point(v[0], v[1], branch)) - target

        def x2_guess(s):
            d = cone.branch_point(1.0, s, branch)
            return float(np.real(np.vdot(d, X)) / np.real(np.vdot(d, d)))

        for shift in (0.0, 2 * math.pi * cone.c, -2 * math.pi * cone.c):
            s_init = s0 + shift
            sol = least_squares(resid, [x2_guess(s_init), s_init], xtol=1e-15, ftol=1e-15, gtol=1e-15)
            best = min(best, float(np.linalg.norm(sol.fun)))
    return best


def cone_distance(surface: SurfaceModel, cone: ConeSpec, t: float, n_s: int = 64) -> float:
    """max over s in one period of the Euclidean distance from surface(s, t) to the cone."""
    spec = surface.spec
    if spec is None or spec.kind not in (PHI, UPSILON):
        raise WrongFamily("cone distance is defined for Phi and Upsilon surfaces")
    c = math.cosh(spec.shape_param) if spec.kind == PHI else math.cos(spec.shape_param)
    period = 2 * math.pi * c if spec.kind == PHI else 2 * math.pi / c
    s = np.linspace(0.0, period, n_s, endpoint=False)
    pts = surface(s, np.full_like(s, t))
    return max(_distance_to_cone(cone, X) for X in pts)


# ---------------------------------------------------------------------------
# Lee-Wang presentations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LeeWangForm:
    """U . surface(theta_map(theta, w)) = (x1 e^{i k1 theta}, x2 e^{i k2 theta}) with quadric c1 x1^2 + c2 x2^2 = rhs."""

    surface: SurfaceModel
    unitary: np.ndarray
    k1: int
    k2: int
    c1: float
    c2: float
    rhs: float
    profile_axis: int  # parameter of the surface that is not theta (1: t for Phi/Upsilon, 0: s for Psi)
    theta_scale: float

    def param(self, theta, w):
        theta = np.asarray(theta, dtype=float)
        w = np.asarray(w, dtype=float)
        if self.profile_axis == 1:
            return self.theta_scale * theta, w
        return w, self.theta_scale * theta

    def coordinates(self, theta, w):
        """(x1, x2) read off the presentation; x1, x2 real."""
        z = np.einsum("ij,...j->...i", self.unitary, self.surface(*self.param(theta, w)))
        theta = np.asarray(theta, dtype=float)
        x1 = z[..., 0] * np.exp(-1j * self.k1 * theta)
        x2 = z[..., 1] * np.exp(-1j * self.k2 * theta)
        return x1, x2

    def quadric_defect(self, n: int = 64, w_range=(-2.0, 2.0)) -> float:
        theta = np.linspace(0, 2 * math.pi, n, endpoint=False)
        w = np.linspace(*w_range, n)
        tt, ww = np.meshgrid(theta, w, indexing="ij")
        x1, x2 = self.coordinates(tt, ww)
        imag = max(np.max(np.abs(x1.imag)), np.max(np.abs(x2.imag)))
        q = self.c1 * x1.real ** 2 + self.c2 * x2.real ** 2 - self.rhs
        return float(max(np.max(np.abs(q)), imag))


def lee_wang_form(surface: SurfaceModel) -> LeeWangForm:
    spec = surface.spec
    if spec is None or spec.rational_form is None or spec.kind not in (PHI, UPSILON, PSI):
        raise WrongFamily("Lee-Wang form needs a rational Phi, Upsilon or Psi surface")
    a = spec.a
    p, q = spec.rational_form
    root = math.sqrt(p * q)
    if spec.kind == PHI:
        U = np.diag([-1j, 1.0])
        return LeeWangForm(surface, U, -q, p, -q, p, (q - p) / (2 * a), 1, root)
    if spec.kind == UPSILON:
        U = np.diag([1j, 1.0])
        return LeeWangForm(surface, U, q, -p, q, -p, (q - p) / (-2 * a), 1, root)
    m, n = p, q
    return LeeWangForm(surface, np.eye(2, dtype=complex), n, m, n, m, (m + n) / (-2 * a), 0, root)


# ---------------------------------------------------------------------------
# double points
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class DoublePoint:
    p: tuple
    q: tuple
    distance: float = field(compare=False)


def _cell_separation(cell: Cell, du, dv):
    """Parameter distance of cell-coordinate differences, wrapped along periodic edges."""
    du = np.asarray(du, dtype=float)
    dv = np.asarray(dv, dtype=float)
    if cell.periodic[0]:
        du = du - np.round(du)
    if cell.periodic[1]:
        dv = dv - np.round(dv)
    ds = du * cell.e1[0] + dv * cell.e2[0]
    dt = du * cell.e1[1] + dv * cell.e2[1]
    return np.hypot(ds, dt)


def self_intersection_scan(surface: SurfaceModel, resolution: int = 256, cell: Optional[Cell] = None,
                           max_refine: int = 64, match_rel: float = 1e-9, min_sep_cells: float = 3.0):
    """Double points of the immersed quotient cell -> C^2.

    Parameter points that differ by a periodic edge of the cell (a lattice
    translation) are identified; glide images are not, so a torus covering a
    Klein bottle reports its covering pairs.  Candidates are grid pairs whose
    images are within about two grid spacings, far apart in the parameter
    domain; each is refined by least squares on (p, q) and kept when the image
    distance falls below ``match_rel`` times the diameter.
    """
    from scipy.optimize import least_squares
    from scipy.spatial import cKDTree

    if resolution < 64:
        raise ValueError("resolution must be at least 64")
    cell = surface.cell if cell is None else cell
    u, v = cell.axes(resolution, resolution)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    s, t = cell.to_param(uu, vv)
    pts = surface(s, t)
    X = as_real(pts)
    diam = diameter(pts)
    # per-node search radius from the adjacent edge lengths; a single global
    # radius explodes the candidate count where the image spacing varies a lot
    e0 = np.linalg.norm(np.diff(X, axis=0), axis=-1)
    e1 = np.linalg.norm(np.diff(X, axis=1), axis=-1)
    local = np.zeros(X.shape[:2])
    local[:-1] = np.maximum(local[:-1], e0)
    local[1:] = np.maximum(local[1:], e0)
    local[:, :-1] = np.maximum(local[:, :-1], e1)
    local[:, 1:] = np.maximum(local[:, 1:], e1)
    flat = X.reshape(-1, 4)
    tree = cKDTree(flat)
    hits = tree.query_ball_point(flat, 2.0 * local.ravel(), return_sorted=False)
    pairs = [(i, j) for i, row in enumerate(hits) for j in row if j > i]
    del hits
    if len(pairs) == 0:
        return []
    pairs = np.asarray(pairs, dtype=np.intp)
    uf, vf = uu.ravel(), vv.ravel()
    du_cell, dv_cell = cell.spacing(resolution, resolution)
    cell_step = min(np.hypot(du_cell * cell.e1[0], du_cell * cell.e1[1]),
                    np.hypot(dv_cell * cell.e2[0], dv_cell * cell.e2[1]))
    sep = _cell_separation(cell, uf[pairs[:, 0]] - uf[pairs[:, 1]], vf[pairs[:, 0]] - vf[pairs[:, 1]])
    pairs = pairs[sep > min_sep_cells * cell_step]
    if len(pairs) == 0:
        return []
    d = np.linalg.norm(flat[pairs[:, 0]] - flat[pairs[:, 1]], axis=1)
    pairs = pairs[np.argsort(d, kind="stable")]

    # greedy: take the closest remaining pair, drop every pair touching its neighbourhood
    chosen = []
    radius = 4 * min_sep_cells * cell_step
    while len(pairs) and len(chosen) < max_refine:
        ci, cj = pairs[0]
        chosen.append((ci, cj))
        near = np.zeros(len(pairs), dtype=bool)
        for c in (ci, cj):
            for col in (0, 1):
                k = pairs[:, col]
                near |= _cell_separation(cell, uf[k] - uf[c], vf[k] - vf[c]) < radius
        pairs = pairs[~near]

    sf, tf = s.ravel(), t.ravel()
    found = []
    for i, j in chosen:
        def resid(x):
            return as_real(surface(x[0], x[1]) - surface(x[2], x[3]))

        def jac(x):
            jp = surface.jet(np.array(x[0]), np.array(x[1]))
            jq = surface.jet(np.array(x[2]), np.array(x[3]))
            cols = [jp.phi_s, jp.phi_t, -jq.phi_s, -jq.phi_t]
            return np.stack([as_real(c) for c in cols], axis=-1)

        x0 = np.array([sf[i], tf[i], sf[j], tf[j]])
        sol = least_squares(resid, x0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        dist = float(np.linalg.norm(sol.fun))
        if dist > match_rel * diam:
            continue
        pu, pv = cell.to_cell(sol.x[0], sol.x[1])
        qu, qv = cell.to_cell(sol.x[2], sol.x[3])
        if _cell_separation(cell, pu - qu, pv - qv) <= min_sep_cells * cell_step / 2:
            continue
        p = _canonical(cell, pu, pv)
        q = _canonical(cell, qu, qv)
        p, q = sorted([p, q])
        found.append(DoublePoint(p, q, dist))
    return sorted(found)


def _canonical(cell: Cell, u, v):
    if cell.periodic[0]:
        u = u % 1.0
    if cell.periodic[1]:
        v = v % 1.0
    s, t = cell.to_param(u, v)
    return (round(float(s), 12), round(float(t), 12))


# ---------------------------------------------------------------------------
# closed-form area and Willmore energy
# ---------------------------------------------------------------------------

def _torus_mn(spec: FamilySpec):
    if spec.kind == CLIFFORD:
        return 1, 1
    if spec.kind == PSI and spec.rational_form is not None:
        return spec.rational_form
    raise WrongFamily(f"{spec.kind} has no compact torus quotient")


def closed_form_area(spec: FamilySpec) -> float:
    m, n = _torus_mn(spec)
    num = (m + n) ** 2 * math.pi ** 2
    if m % 2 == 1 and n % 2 == 1:
        return num / (-2 * spec.a * math.sqrt(m * n))
    return num / (-spec.a * math.sqrt(m * n))


def closed_form_willmore(spec: FamilySpec) -> float:
    m, n = _torus_mn(spec)
    num = (m + n) ** 2 * math.pi ** 2
    if m % 2 == 1 and n % 2 == 1:
        return num / (2 * math.sqrt(m * n))
    return num / math.sqrt(m * n)


# ---------------------------------------------------------------------------
# family-spec strings:  kind:key=value,key=value
# ---------------------------------------------------------------------------

_KEYS = {
    "phi": {"a", "delta", "p", "q"},
    "upsilon": {"a", "gamma", "p", "q"},
    "psi": {"a", "nu", "m", "n"},
    "clifford": {"a"},
    "cylinder": {"a"},
    "cone": {"a", "delta", "gamma"},
}

_SPEC_RE = re.compile(r"^\s*([a-z]+)\s*:\s*(.*?)\s*$")


def parse_family_spec(text: str):
    """Parse ``kind:key=value,...`` into (kind, params)."""
    m = _SPEC_RE.match(text or "")
    if not m:
        raise BadParams(f"malformed family spec {text!r}; expected kind:key=value,...")
    kind, body = m.group(1), m.group(2)
    if kind not in _KEYS:
        raise BadParams(f"unknown family {kind!r}; expected one of {sorted(_KEYS)}")
    params = {}
    for item in filter(None, (x.strip() for x in body.split(","))):
        if "=" not in item:
            raise BadParams(f"malformed parameter {item!r}")
        key, val = (x.strip() for x in item.split("=", 1))
        if key not in _KEYS[kind]:
            raise BadParams(f"unknown parameter {key!r} for {kind}")
        if key in params:
            raise BadParams(f"duplicate parameter {key!r}")
        try:
            params[key] = int(val) if key in ("p", "q", "m", "n") else float(val)
        except ValueError:
            raise BadParams(f"parameter {key!r} is not a number: {val!r}") from None
    if "a" not in params:
        raise BadParams(f"{kind} needs the self-similarity constant a")
    return kind, params


def surface_from_string(text: str):
    """Build a SurfaceModel (or a cone sheet) from a family-spec string."""
    kind, p = parse_family_spec(text)
    a = p["a"]
    if kind == "phi":
        if "delta" in p:
            return make_phi(a, p["delta"])
        if {"p", "q"} <= p.keys():
            return make_phi_pq(a, p["p"], p["q"])
    elif kind == "upsilon":
        if "gamma" in p:
            return make_upsilon(a, p["gamma"])
        if {"p", "q"} <= p.keys():
            return make_upsilon_pq(a, p["p"], p["q"])
    elif kind == "psi":
        if "nu" in p:
            return make_psi(a, p["nu"])
        if {"m", "n"} <= p.keys():
            return make_psi_mn(a, p["m"], p["n"])
    elif kind == "clifford":
        return make_clifford(a)
    elif kind == "cylinder":
        return make_cylinder(a)
    elif kind == "cone":
        if "delta" in p:
            spec = FamilySpec(PHI, a, p["delta"])
            cone = asymptotic_cone(spec)
            return cone.surface()
        if "gamma" in p:
            return asymptotic_cone(FamilySpec(UPSILON, a, p["gamma"])).surface()
    raise BadParams(f"{kind} spec is missing its shape parameter")
