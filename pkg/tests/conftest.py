"""Shared family fixtures for the test suite."""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from lagflow import families as fam
from lagflow.surface import Jet


def identity_fixtures():
    """(id, surface) pairs covering every family and shape regime."""
    out = []
    for a in (0.25, 1.0):
        for d in (0.5, math.acosh(math.sqrt(2)), 1.5):
            out.append((f"phi-a{a}-d{d:.4f}", fam.make_phi(a, d)))
    for a in (-0.5, -1.0):
        for g in (math.pi / 6, math.pi / 3):
            out.append((f"upsilon-a{a}-g{g:.4f}", fam.make_upsilon(a, g)))
    for a in (-0.5, -1.0):
        for nu in (0.5, math.asinh(1.0), 1.2):
            out.append((f"psi-a{a}-nu{nu:.4f}", fam.make_psi(a, nu)))
    out.append(("clifford", fam.make_clifford(-0.5)))
    out.append(("cylinder", fam.make_cylinder(-0.5)))
    return out


IDENTITY_FIXTURES = identity_fixtures()


def scale_component(surface, index: int = 1, factor: float = 1.01):
    """Negative control: multiply one complex coordinate of the immersion by ``factor``.

    The result is still an immersion with closed-form jets, but it is neither
    Lagrangian nor self-similar.
    """
    w = np.ones(2)
    w[index] = factor

    def func(s, t):
        return surface.func(s, t) * w

    def jet_func(s, t):
        j = surface.jet_func(s, t)
        return Jet(j.s, j.t, j.phi * w, j.phi_s * w, j.phi_t * w,
                   j.phi_ss * w, j.phi_st * w, j.phi_tt * w, j.mode, j.step)

    return replace(surface, name=surface.name + "*perturbed", func=func, jet_func=jet_func, dbeta=None)


@pytest.fixture(params=IDENTITY_FIXTURES, ids=[name for name, _ in IDENTITY_FIXTURES])
def family_surface(request):
    return request.param[1]
