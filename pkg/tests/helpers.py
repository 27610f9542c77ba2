"""Shared builders for the test suite."""

import numpy as np

from rte2d import DGSolution, build_mesh, build_structured_unit_square


def perturbed_mesh(n, seed=0, amp=0.25):
    """Structured mesh with interior vertices jiggled; stays conforming/CCW.

    amp is the displacement as a fraction of the grid spacing (keep < 0.3).
    """
    base = build_structured_unit_square(n)
    rng = np.random.RandomState(seed)
    verts = base.vertices.copy()
    inner = (
        (verts[:, 0] > 1e-12)
        & (verts[:, 0] < 1 - 1e-12)
        & (verts[:, 1] > 1e-12)
        & (verts[:, 1] < 1 - 1e-12)
    )
    verts[inner] += rng.uniform(-amp / n, amp / n, size=(inner.sum(), 2))
    return build_mesh(verts, np.asarray(base.triangles), level=base.level)


def random_solution(mesh, quad, seed=0, scale=1.0):
    rng = np.random.RandomState(seed)
    coeffs = scale * rng.standard_normal((quad.n_directions, mesh.n_triangles, 3))
    return DGSolution(coeffs, mesh, quad)


def unit_direction(theta):
    return np.array([np.cos(theta), np.sin(theta)])
