"""Immersions of parameter domains into C^2 and their second-order jets.

Points of C^2 are complex numpy arrays whose trailing axis has length 2
(``z1, z2``).  Everything is vectorized over leading axes, so a ``Jet`` may
describe a single parameter point or a whole grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

DEFAULT_FD_STEP = 1e-4


def point(z1, z2) -> np.ndarray:
    """Pack two complex coordinates into a PointC2 array."""
    z1, z2 = np.broadcast_arrays(np.asarray(z1, dtype=complex), np.asarray(z2, dtype=complex))
    return np.stack([z1, z2], axis=-1)


@dataclass(frozen=True)
class Jet:
    """Value and first/second partials of an immersion at parameter points."""

    s: np.ndarray
    t: np.ndarray
    phi: np.ndarray
    phi_s: np.ndarray
    phi_t: np.ndarray
    phi_ss: np.ndarray
    phi_st: np.ndarray
    phi_tt: np.ndarray
    mode: str = "analytic"
    step: Optional[float] = None

    @property
    def p(self):
        return self.s, self.t

    def swapped(self) -> "Jet":
        """Same jet with the roles of the two parameters exchanged."""
        return Jet(self.t, self.s, self.phi, self.phi_t, self.phi_s,
                   self.phi_tt, self.phi_st, self.phi_ss, self.mode, self.step)

    def rotated(self, theta: float) -> "Jet":
        """Jet in coordinates (x, y) with s + i t = e^{i theta} (x + i y).

        Rotations preserve isothermal coordinates; the jet still reports the
        original parameter point.
        """
        c, sn = np.cos(theta), np.sin(theta)
        px = c * self.phi_s + sn * self.phi_t
        py = -sn * self.phi_s + c * self.phi_t
        pxx = c * c * self.phi_ss + 2 * c * sn * self.phi_st + sn * sn * self.phi_tt
        pxy = -c * sn * self.phi_ss + (c * c - sn * sn) * self.phi_st + c * sn * self.phi_tt
        pyy = sn * sn * self.phi_ss - 2 * c * sn * self.phi_st + c * c * self.phi_tt
        return Jet(self.s, self.t, self.phi, px, py, pxx, pxy, pyy, self.mode, self.step)


def fd_jet(func: Callable, s, t, h: float = DEFAULT_FD_STEP) -> Jet:
    """Central-difference jet of an evaluation map ``func(s, t) -> (..., 2)``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    f0 = func(s, t)
    fsp, fsm = func(s + h, t), func(s - h, t)
    ftp, ftm = func(s, t + h), func(s, t - h)
    fpp, fpm = func(s + h, t + h), func(s + h, t - h)
    fmp, fmm = func(s - h, t + h), func(s - h, t - h)
    return Jet(
        s, t, f0,
        (fsp - fsm) / (2 * h),
        (ftp - ftm) / (2 * h),
        (fsp - 2 * f0 + fsm) / (h * h),
        (fpp - fpm - fmp + fmm) / (4 * h * h),
        (ftp - 2 * f0 + ftm) / (h * h),
        mode="finite-difference",
        step=h,
    )


def fd_mixed_ts(func: Callable, s, t, h: float = DEFAULT_FD_STEP) -> np.ndarray:
    """The t-then-s mixed stencil, built from nested first differences."""
    def d_t(ss):
        return (func(ss, t + h) - func(ss, t - h)) / (2 * h)
    return (d_t(s + h) - d_t(s - h)) / (2 * h)


@dataclass(frozen=True)
class Cell:
    """A parallelogram of the parameter plane: origin + u*e1 + v*e2, u, v in [0, 1].

    ``periodic`` flags the edges that are lattice translations, i.e. along
    which the immersion wraps around.
    """

    origin: tuple
    e1: tuple
    e2: tuple
    periodic: tuple = (False, False)

    @classmethod
    def rect(cls, s0, s1, t0, t1, periodic=(False, False)) -> "Cell":
        return cls((float(s0), float(t0)), (float(s1 - s0), 0.0), (0.0, float(t1 - t0)), tuple(periodic))

    @property
    def jacobian(self) -> float:
        return abs(self.e1[0] * self.e2[1] - self.e1[1] * self.e2[0])

    @property
    def is_rect(self) -> bool:
        return self.e1[1] == 0.0 and self.e2[0] == 0.0

    def to_param(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        s = self.origin[0] + u * self.e1[0] + v * self.e2[0]
        t = self.origin[1] + u * self.e1[1] + v * self.e2[1]
        return s, t

    def to_cell(self, s, t):
        m = np.array([[self.e1[0], self.e2[0]], [self.e1[1], self.e2[1]]])
        inv = np.linalg.inv(m)
        ds = np.asarray(s, dtype=float) - self.origin[0]
        dt = np.asarray(t, dtype=float) - self.origin[1]
        return inv[0, 0] * ds + inv[0, 1] * dt, inv[1, 0] * ds + inv[1, 1] * dt

    def axes(self, n1: int, n2: int):
        """Cell coordinates of an n1 x n2 node grid; periodic axes omit the far endpoint."""
        u = np.linspace(0.0, 1.0, n1, endpoint=not self.periodic[0])
        v = np.linspace(0.0, 1.0, n2, endpoint=not self.periodic[1])
        return u, v

    def grid(self, n1: int, n2: Optional[int] = None):
        """Parameter grid (s, t), each of shape (n1, n2)."""
        n2 = n1 if n2 is None else n2
        u, v = self.axes(n1, n2)
        uu, vv = np.meshgrid(u, v, indexing="ij")
        return self.to_param(uu, vv)

    def spacing(self, n1: int, n2: int):
        u, v = self.axes(n1, n2)
        return u[1] - u[0], v[1] - v[0]


@dataclass(frozen=True)
class SurfaceModel:
    """An immersion (s, t) -> C^2, immutable after construction.

    ``jet_func`` is the closed-form second-order jet when available; without it
    every jet is computed by central differences of ``func``.  ``dbeta``, when
    present, returns the closed-form Lagrangian-angle covector (beta_s, beta_t).
    """

    name: str
    func: Callable
    cell: Cell
    jet_func: Optional[Callable] = None
    a: Optional[float] = None
    spec: object = None
    lattice: object = None
    dbeta: Optional[Callable] = None
    meta: dict = field(default_factory=dict)

    def __call__(self, s, t) -> np.ndarray:
        return self.func(np.asarray(s, dtype=float), np.asarray(t, dtype=float))

    def jet(self, s, t, mode: str = "analytic", h: float = DEFAULT_FD_STEP) -> Jet:
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if mode == "analytic" and self.jet_func is not None:
            return self.jet_func(s, t)
        if mode not in ("analytic", "fd", "finite-difference"):
            raise ValueError(f"unknown jet mode {mode!r}")
        return fd_jet(self.func, s, t, h)

    def sample(self, n1: int, n2: Optional[int] = None, cell: Optional[Cell] = None):
        cell = self.cell if cell is None else cell
        s, t = cell.grid(n1, n2)
        return s, t, self(s, t)

    def with_cell(self, cell: Cell) -> "SurfaceModel":
        return replace(self, cell=cell)


def as_real(points: np.ndarray) -> np.ndarray:
    """(..., 2) complex -> (..., 4) real as (x1, y1, x2, y2)."""
    pts = np.asarray(points)
    return np.stack([pts[..., 0].real, pts[..., 0].imag, pts[..., 1].real, pts[..., 1].imag], axis=-1)


def diameter(points: np.ndarray, max_points: int = 2048) -> float:
    """Max pairwise distance of a point cloud (deterministically subsampled when large)."""
    from scipy.spatial.distance import pdist

    x = as_real(points).reshape(-1, 4)
    if len(x) > max_points:
        idx = np.linspace(0, len(x) - 1, max_points).round().astype(int)
        x = x[idx]
    if len(x) < 2:
        return 0.0
    return float(pdist(x).max())


def surface_diameter(surface: SurfaceModel, n: int = 32, cell: Optional[Cell] = None) -> float:
    _, _, pts = surface.sample(n, n, cell)
    return diameter(pts)
