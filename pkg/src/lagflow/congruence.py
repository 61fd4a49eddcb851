"""Least-squares unitary congruence of matched point clouds in C^2."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .surface import diameter


@dataclass(frozen=True)
class UnitaryFit:
    U: np.ndarray
    translation: np.ndarray
    residual: float  # max pointwise misfit
    relative: float  # residual / diameter of the target cloud


def unitary_procrustes(P, Q, translate: bool = True) -> UnitaryFit:
    """Best P ~ U Q + c with U in U(2), for matched rows of P and Q.

    U is the unitary polar factor of the centred cross-covariance sum P_k Q_k^H,
    which minimizes the summed squared misfit over U(2).
    """
    P = np.asarray(P, dtype=complex).reshape(-1, 2)
    Q = np.asarray(Q, dtype=complex).reshape(-1, 2)
    if translate:
        pc, qc = P.mean(axis=0), Q.mean(axis=0)
    else:
        pc = qc = np.zeros(2, dtype=complex)
    M = (P - pc).T @ np.conj(Q - qc)
    W, _, Vh = np.linalg.svd(M)
    U = W @ Vh
    c = pc - U @ qc
    misfit = np.abs(P - (Q @ U.T + c))
    res = float(np.max(np.sqrt(np.sum(misfit ** 2, axis=1))))
    diam = diameter(P)
    return UnitaryFit(U, c, res, res / diam if diam > 0 else res)
