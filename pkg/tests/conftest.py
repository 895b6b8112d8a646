"""Shared fixtures and small-problem builders for the test suite."""

import numpy as np
import pytest

from mselast.assembly import CoefficientField
from mselast.grid import Patch, build_fine_mesh
from mselast.spectral import build_local_eigproblem


def make_patch_problem(n, kind, eta, solids, nu=0.3, dirichlet_nodes=()):
    """A pure-Neumann n x n patch with soft background 1/eta and unit-stiff
    axis-aligned rectangles (fractional coordinates)."""
    mesh = build_fine_mesh(n, n, h=1.0 / n)
    E = np.full(mesh.n_elements, 1.0 / eta)
    c = mesh.element_centroids()
    for x0, x1, y0, y1 in solids:
        inside = (c[:, 0] >= x0) & (c[:, 0] < x1) & (c[:, 1] >= y0) & (c[:, 1] < y1)
        E[inside] = 1.0
    coeff = CoefficientField(E, nu, 1.0 / eta, 1.0)
    return build_local_eigproblem(mesh, coeff, Patch(0, n, 0, n), kind, dirichlet_nodes)


# rectangle sets reused across eigensolver tests
PATCH_GEOMETRIES = {
    "homogeneous": [],
    "one-inclusion": [(0.3, 0.6, 0.3, 0.6)],
    "two-inclusions": [(0.1, 0.35, 0.1, 0.35), (0.55, 0.9, 0.55, 0.9)],
    "channel": [(0.0, 1.0, 0.4, 0.6)],
    "three-blobs": [(0.1, 0.3, 0.1, 0.3), (0.6, 0.85, 0.15, 0.4), (0.3, 0.55, 0.6, 0.9)],
}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
