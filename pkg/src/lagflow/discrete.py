"""Conservative Laplace-Beltrami operator on structured parameter grids.

The grid is a (n1, n2, ...) array of node values over a parallelogram of the
parameter plane with uniform spacings (d1, d2).  Fluxes sqrt(g) g^{ij} F_j are
evaluated at half nodes and differenced, which keeps the scheme second order
and exactly annihilates constants.
"""
from __future__ import annotations

import numpy as np

from .core import TOL_DEGEN, inner
from .errors import DegenerateMetric


def pad(X: np.ndarray, periodic) -> np.ndarray:
    """One ghost layer per side: wrap on periodic axes, extrapolate otherwise."""
    out = X
    for axis, per in enumerate(periodic):
        first = np.take(out, [0], axis=axis)
        last = np.take(out, [-1], axis=axis)
        if per:
            lo, hi = last, first
        else:
            # quadratic extrapolation: central differences at the edge become
            # the second-order one-sided stencil
            lo = 3 * first - 3 * np.take(out, [1], axis=axis) + np.take(out, [2], axis=axis)
            hi = 3 * last - 3 * np.take(out, [-2], axis=axis) + np.take(out, [-3], axis=axis)
        out = np.concatenate([lo, out, hi], axis=axis)
    return out


def _expand(m, F):
    return m.reshape(m.shape + (1,) * (F.ndim - 2))


def node_metric(X: np.ndarray, d1: float, d2: float, periodic):
    """(g11, g12, g22) at nodes from central differences."""
    Xp = pad(X, periodic)
    Xu = (Xp[2:, 1:-1] - Xp[:-2, 1:-1]) / (2 * d1)
    Xv = (Xp[1:-1, 2:] - Xp[1:-1, :-2]) / (2 * d2)
    return inner(Xu, Xu), inner(Xu, Xv), inner(Xv, Xv)


def _check(det, scale, where_offset=(0, 0)):
    bad = det <= TOL_DEGEN * scale * scale
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise DegenerateMetric(f"degenerate metric at grid node {(int(i), int(j))}",
                               point=(int(i) + where_offset[0], int(j) + where_offset[1]))


def laplace_beltrami(X: np.ndarray, d1: float, d2: float, periodic=(True, True), F=None) -> np.ndarray:
    """Discrete Laplace-Beltrami of F (default: the positions X) on the grid X.

    X has shape (n1, n2, 2) complex.  F may be real or complex with shape
    (n1, n2, ...).
    """
    Xp = pad(X, periodic)
    F, Fp = (X, Xp) if F is None else (F, pad(F, periodic))

    # fluxes across faces normal to the first axis, at (i + 1/2, j)
    Xu = (Xp[1:, 1:-1] - Xp[:-1, 1:-1]) / d1
    Xv = (Xp[1:, 2:] - Xp[1:, :-2] + Xp[:-1, 2:] - Xp[:-1, :-2]) / (4 * d2)
    Fu = (Fp[1:, 1:-1] - Fp[:-1, 1:-1]) / d1
    Fv = (Fp[1:, 2:] - Fp[1:, :-2] + Fp[:-1, 2:] - Fp[:-1, :-2]) / (4 * d2)
    g11, g12, g22 = inner(Xu, Xu), inner(Xu, Xv), inner(Xv, Xv)
    det = g11 * g22 - g12 * g12
    _check(det, g11 + g22)
    w = 1 / np.sqrt(det)
    flux1 = _expand(w * g22, F) * Fu - _expand(w * g12, F) * Fv

    # fluxes across faces normal to the second axis, at (i, j + 1/2)
    Xv = (Xp[1:-1, 1:] - Xp[1:-1, :-1]) / d2
    Xu = (Xp[2:, 1:] - Xp[:-2, 1:] + Xp[2:, :-1] - Xp[:-2, :-1]) / (4 * d1)
    Fv = (Fp[1:-1, 1:] - Fp[1:-1, :-1]) / d2
    Fu = (Fp[2:, 1:] - Fp[:-2, 1:] + Fp[2:, :-1] - Fp[:-2, :-1]) / (4 * d1)
    g11, g12, g22 = inner(Xu, Xu), inner(Xu, Xv), inner(Xv, Xv)
    det = g11 * g22 - g12 * g12
    _check(det, g11 + g22)
    w = 1 / np.sqrt(det)
    flux2 = _expand(w * g11, F) * Fv - _expand(w * g12, F) * Fu

    div = (flux1[1:] - flux1[:-1]) / d1 + (flux2[:, 1:] - flux2[:, :-1]) / d2
    Xu = (Xp[2:, 1:-1] - Xp[:-2, 1:-1]) / (2 * d1)
    Xv = (Xp[1:-1, 2:] - Xp[1:-1, :-2]) / (2 * d2)
    n11, n12, n22 = inner(Xu, Xu), inner(Xu, Xv), inner(Xv, Xv)
    ndet = n11 * n22 - n12 * n12
    _check(ndet, n11 + n22)
    return div / _expand(np.sqrt(ndet), F)


def grid_area(X: np.ndarray, d1: float, d2: float, periodic) -> float:
    """Trapezoid (periodic rule on wrapped axes) of sqrt(det g) over the grid."""
    g11, g12, g22 = node_metric(X, d1, d2, periodic)
    dens = np.sqrt(np.maximum(g11 * g22 - g12 * g12, 0.0))
    w1 = np.ones(X.shape[0])
    w2 = np.ones(X.shape[1])
    if not periodic[0]:
        w1[[0, -1]] = 0.5
    if not periodic[1]:
        w2[[0, -1]] = 0.5
    return float(np.einsum("i,j,ij->", w1, w2, dens) * d1 * d2)


def mesh_area(X: np.ndarray, periodic) -> float:
    """Area of the piecewise-linear surface through the nodes (two triangles per quad).

    Unlike ``grid_area`` this stays accurate when node spacing is uneven, as
    happens next to pinned rows during a flow.
    """
    R = np.stack([X[..., 0].real, X[..., 0].imag, X[..., 1].real, X[..., 1].imag], axis=-1)
    if periodic[0]:
        R = np.concatenate([R, R[:1]], axis=0)
    if periodic[1]:
        R = np.concatenate([R, R[:, :1]], axis=1)
    A, B, C, D = R[:-1, :-1], R[1:, :-1], R[:-1, 1:], R[1:, 1:]

    def tri(p, q, r):
        u, v = q - p, r - p
        uu, vv, uv = (u * u).sum(-1), (v * v).sum(-1), (u * v).sum(-1)
        return 0.5 * np.sqrt(np.maximum(uu * vv - uv * uv, 0.0))

    return float(np.sum(tri(A, B, D) + tri(A, D, C)))


def unwrap_angle(beta: np.ndarray) -> np.ndarray:
    """Continuous branch of a grid of principal angles (rows first, then columns)."""
    return np.unwrap(np.unwrap(beta, axis=1), axis=0)
