"""Explicit parametric mean curvature flow d/dt F = H on structured grids.

H is half the discrete Laplace-Beltrami of the position.  Periodic grid axes
wrap by lattice translations of the surface's fundamental cell; non-compact
axes are pinned to the exact self-similar solution sqrt(2at + 1) phi.
Klein-bottle and Moebius quotients are flowed on their orientable double
cover, whose cell is spanned by translations only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .discrete import laplace_beltrami, mesh_area, node_metric
from .errors import BadResolution, Blowup, ScaleCollapse, StepTooLarge
from .surface import Cell, SurfaceModel, as_real, diameter

CFL_FACTOR = 0.2
MIN_RESOLUTION = 32
BLOWUP_H = 1e6
EXTINCTION_AREA = 1e-6
DISTORTION_LIMIT = 100.0
CHECK_EVERY = 10          # steps between CFL / distortion checks
DEFAULT_DT_FRACTION = 0.5  # default dt as a fraction of the initial CFL bound
PERIODIC, PINNED = "periodic", "pinned"


@dataclass(frozen=True)
class FlowState:
    grid: np.ndarray            # (n1, n2, 2) complex node positions
    time: float
    h_param: tuple              # parameter spacings (d1, d2) of the cell axes
    dt: float
    boundary: tuple             # per axis: "periodic" or "pinned"
    surface: SurfaceModel = field(repr=False)
    cell: Cell = field(repr=False)
    s: np.ndarray = field(repr=False)
    t: np.ndarray = field(repr=False)
    distortion0: float = 1.0

    @property
    def periodic(self):
        return tuple(b == PERIODIC for b in self.boundary)

    @property
    def scale(self) -> float:
        a = self.surface.a
        return math.sqrt(2 * a * self.time + 1)


def _distortion(X, d1, d2, periodic) -> float:
    g11, g12, g22 = node_metric(X, d1, d2, periodic)
    det = g11 * g22 - g12 * g12
    return float(np.min(det) / np.mean(det))


def cfl_limit(X, d1, d2, periodic) -> float:
    """CFL_FACTOR * min(spacing)^2 * min(conformal factor), measured on the grid."""
    g11, g12, g22 = node_metric(X, d1, d2, periodic)
    lam = 0.5 * (g11 + g22) - np.sqrt(0.25 * (g11 - g22) ** 2 + g12 ** 2)
    return CFL_FACTOR * min(d1, d2) ** 2 * float(np.min(lam))


def init_flow(surface: SurfaceModel, resolution=(64, 64), boundary="auto", dt: Optional[float] = None,
              cell: Optional[Cell] = None) -> FlowState:
    """Sample the surface on its fundamental cell.

    ``boundary="auto"`` makes lattice-periodic axes periodic and pins the
    rest.  The cell is rescaled to unit cell coordinates internally; the
    spacings reported in ``h_param`` are the parameter-length spacings
    |e1|/n1 and |e2|/n2.
    """
    cell = surface.cell if cell is None else cell
    n1, n2 = (resolution, resolution) if np.isscalar(resolution) else resolution
    if boundary == "auto":
        boundary = tuple(PERIODIC if p else PINNED for p in cell.periodic)
    elif isinstance(boundary, str):
        boundary = (boundary, boundary)
    for n, b in zip((n1, n2), boundary):
        if b == PERIODIC and n < MIN_RESOLUTION:
            raise BadResolution(f"compact directions need at least {MIN_RESOLUTION} points, got {n}")
        if n < 3:
            raise BadResolution("every direction needs at least 3 points")
    # sample on cell coordinates; spacings in the cell's own (u, v) units times edge lengths
    per = tuple(b == PERIODIC for b in boundary)
    sample_cell = Cell(cell.origin, cell.e1, cell.e2, per)
    s, t = sample_cell.grid(n1, n2)
    X = surface(s, t)
    du, dv = sample_cell.spacing(n1, n2)
    d1 = du * math.hypot(*cell.e1)
    d2 = dv * math.hypot(*cell.e2)
    # the operator works in cell coordinates (u, v) scaled to arc-length units of the edges
    limit = cfl_limit(X, d1, d2, per)
    dt = DEFAULT_DT_FRACTION * limit if dt is None else float(dt)
    if dt > limit:
        raise StepTooLarge(f"dt={dt!r} exceeds the CFL bound {limit:.3e}")
    return FlowState(X, 0.0, (d1, d2), dt, tuple(boundary), surface, sample_cell, s, t,
                     _distortion(X, d1, d2, per))


def discrete_H(state: FlowState) -> np.ndarray:
    """H = (1/2) discrete Laplace-Beltrami of the position."""
    d1, d2 = state.h_param
    return 0.5 * laplace_beltrami(state.grid, d1, d2, state.periodic)


def _exact(state: FlowState, time: float):
    a = state.surface.a
    lam2 = 2 * a * time + 1
    if lam2 <= 0:
        raise ScaleCollapse(f"2at + 1 = {lam2!r} <= 0")
    return math.sqrt(lam2) * state.surface(state.s, state.t)


def step(state: FlowState, H: Optional[np.ndarray] = None, dt: Optional[float] = None) -> FlowState:
    """One forward-Euler step (of ``dt``, default state.dt); pinned rows are reset to the exact solution."""
    H = discrete_H(state) if H is None else H
    dt = state.dt if dt is None else dt
    X = state.grid + dt * H
    t_new = state.time + dt
    if not all(state.periodic):
        exact = _exact(state, t_new)
        if state.boundary[0] == PINNED:
            X[[0, -1]] = exact[[0, -1]]
        if state.boundary[1] == PINNED:
            X[:, [0, -1]] = exact[:, [0, -1]]
    return replace(state, grid=X, time=t_new)


def area(state: FlowState) -> float:
    """Piecewise-linear area of the node mesh."""
    return mesh_area(state.grid, state.periodic)


@dataclass
class Trajectory:
    time: list
    area: list
    max_H: list
    ss_error: list
    extinct: bool = False
    T_est: Optional[float] = None
    reason: str = "t_end"
    final: Optional[FlowState] = None

    def rows(self):
        return list(zip(self.time, self.area, self.max_H, self.ss_error))


def extinction_estimate(times, areas, k: int = 10) -> float:
    """Zero of the least-squares line through the last k (time, area) samples."""
    tt = np.asarray(times[-k:], dtype=float)
    aa = np.asarray(areas[-k:], dtype=float)
    slope, icpt = np.polyfit(tt, aa, 1)
    return float(-icpt / slope)


def run(state: FlowState, t_end: float, sample_dt: Optional[float] = None, ss_every: int = 1,
        track_ss: bool = True, interior: int = 0) -> Trajectory:
    """Step until t_end, extinction, CFL violation or blowup.

    The CFL bound and the mesh distortion (min over mean metric determinant)
    are re-measured every CHECK_EVERY steps.

    A sample (time, area, max|H|, self-similarity error) is recorded every
    ``sample_dt`` (default: t_end / 100); the self-similarity error is computed
    on every ``ss_every``-th sample and is NaN otherwise, and NaN once
    2at + 1 <= 0.
    """
    sample_dt = t_end / 100 if sample_dt is None else sample_dt
    a0 = area(state)
    traj = Trajectory([], [], [], [])
    next_sample = 0.0
    n_samples = n_steps = 0
    a = state.surface.a
    while True:
        H = discrete_H(state)
        maxH = float(np.max(np.sqrt(np.sum(np.abs(H) ** 2, axis=-1))))
        if not np.isfinite(maxH) or maxH > BLOWUP_H:
            raise Blowup(f"max |H| = {maxH:.3e} at t = {state.time:.6f}")
        if state.time >= next_sample - 1e-12 or state.time >= t_end - 1e-12:
            ar = area(state)
            err = math.nan
            if track_ss and n_samples % ss_every == 0 and 2 * a * state.time + 1 > 0:
                err = self_similarity_error(state, state.surface, a, interior=interior)
            traj.time.append(state.time)
            traj.area.append(ar)
            traj.max_H.append(maxH)
            traj.ss_error.append(err)
            n_samples += 1
            next_sample += sample_dt
            if ar < EXTINCTION_AREA * a0:
                traj.extinct, traj.reason = True, "extinction"
                break
        if state.time >= t_end - 1e-12:
            break
        if n_steps % CHECK_EVERY == 0:
            d1, d2 = state.h_param
            if state.dt > cfl_limit(state.grid, d1, d2, state.periodic):
                traj.reason = "cfl"
                break
            dist = _distortion(state.grid, d1, d2, state.periodic)
            if dist * DISTORTION_LIMIT < state.distortion0:
                raise Blowup(f"mesh distortion degraded by more than {DISTORTION_LIMIT:g}x "
                             f"at t = {state.time:.6f}")
        state = step(state, H, min(state.dt, t_end - state.time))
        n_steps += 1
    traj.final = state
    if a < 0 and len(traj.time) >= 10:
        traj.T_est = extinction_estimate(traj.time, traj.area)
    return traj


def project_to_scaled(surface: SurfaceModel, lam: float, X: np.ndarray, s0, t0, iters: int = 8):
    """Distances from points X to lam * surface, by batched Gauss-Newton from (s0, t0)."""
    s, t = np.array(s0, dtype=float), np.array(t0, dtype=float)
    for _ in range(iters):
        j = surface.jet(s, t)
        r = as_real(lam * j.phi - X)
        A = np.stack([as_real(lam * j.phi_s), as_real(lam * j.phi_t)], axis=-1)   # (..., 4, 2)
        AtA = np.einsum("...ki,...kj->...ij", A, A)
        Atr = np.einsum("...ki,...k->...i", A, r)
        delta = np.linalg.solve(AtA, Atr[..., None])[..., 0]
        s, t = s - delta[..., 0], t - delta[..., 1]
    return np.sqrt(np.sum(as_real(lam * surface(s, t) - X) ** 2, axis=-1))


def self_similarity_error(state: FlowState, surface: SurfaceModel, a: float, oversample: int = 2,
                          interior: int = 0) -> float:
    """Max distance from grid nodes to sqrt(2at + 1) * surface, over the current diameter.

    Each node is matched to its nearest sample of the scaled surface on an
    oversampled cell grid and then projected onto the surface by a
    Gauss-Newton parameter solve.  ``interior`` drops that many rows at
    pinned edges.
    """
    lam2 = 2 * a * state.time + 1
    if lam2 <= 0:
        raise ScaleCollapse(f"2at + 1 = {lam2!r} <= 0")
    lam = math.sqrt(lam2)
    X = state.grid
    if interior:
        sl = [slice(None), slice(None)]
        for ax, b in enumerate(state.boundary):
            if b == PINNED:
                sl[ax] = slice(interior, -interior)
        X = X[tuple(sl)]
    n1, n2 = state.grid.shape[:2]
    cell = state.cell
    S, T = cell.grid(oversample * n1, oversample * n2)
    ref = lam * surface(S, T)
    tree = cKDTree(as_real(ref).reshape(-1, 4))
    pts = X.reshape(-1, 2)
    _, idx = tree.query(as_real(pts))
    dist = project_to_scaled(surface, lam, pts, S.reshape(-1)[idx], T.reshape(-1)[idx])
    worst = float(np.max(dist))
    diam = diameter(state.grid)
    return worst / diam if diam > 0 else worst
