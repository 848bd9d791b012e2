"""Piecewise linear trial space with homogeneous Dirichlet data.

Degrees of freedom live at interior mesh nodes; values at boundary
nodes are identically zero.  Functions here never build the piecewise
constant test space explicitly: testing against the characteristic
function of a control volume is realized by the flux loops in
``assembly`` and by the lumped inner product, which weights nodal
values with control volume areas.
"""

import numpy as np


class LocationError(ValueError):
    """A point could not be located inside any triangle."""


class EvaluationError(ValueError):
    """A user supplied function produced a non-finite value."""


class P1Space:
    """Continuous piecewise linear functions vanishing on the boundary."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.dof_to_node = mesh.interior_nodes
        node_to_dof = np.full(mesh.n_nodes, -1, dtype=np.int64)
        node_to_dof[mesh.interior_nodes] = np.arange(mesh.n_interior)
        node_to_dof.setflags(write=False)
        self.node_to_dof = node_to_dof
        self.dof_count = mesh.n_interior
        self.gradients = _basis_gradients(mesh)
        self.gradients.setflags(write=False)


def _basis_gradients(mesh):
    # gradient of the hat function at local vertex l: rotate the opposite
    # edge by 90 degrees and divide by twice the area
    pts = mesh.nodes[mesh.triangles]            # (T, 3, 2)
    opp = np.roll(pts, -2, axis=1) - np.roll(pts, -1, axis=1)   # P_{l+2} - P_{l+1}
    grads = np.empty_like(opp)
    grads[:, :, 0] = -opp[:, :, 1]
    grads[:, :, 1] = opp[:, :, 0]
    grads /= (2.0 * mesh.areas)[:, None, None]
    return grads


class NodalField:
    """Coefficient vector of a trial space function (interior nodes only)."""

    __slots__ = ("values",)

    def __init__(self, values):
        self.values = np.ascontiguousarray(values, dtype=float)
        if self.values.ndim != 1:
            raise ValueError("nodal values must form a vector")

    def copy(self):
        return NodalField(self.values.copy())


def sample_at_points(fn, xs, ys, *extra):
    """Evaluate fn at many points, vectorized when the function allows it."""
    try:
        out = np.asarray(fn(xs, ys, *extra), dtype=float)
        if out.shape != xs.shape:
            out = np.broadcast_to(out, xs.shape).astype(float)
        return out
    except (TypeError, ValueError):
        return np.array([float(fn(x, y, *extra)) for x, y in zip(xs, ys)])


def interpolate(space, g):
    """Nodal interpolant of g: values at interior nodes, zero on the boundary."""
    pts = space.mesh.nodes[space.dof_to_node]
    if pts.shape[0] == 0:
        return NodalField(np.zeros(0))
    values = sample_at_points(g, pts[:, 0], pts[:, 1])
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        node = int(space.dof_to_node[bad[0]])
        raise EvaluationError(f"non-finite interpolation value at node {node} "
                              f"({pts[bad[0], 0]}, {pts[bad[0], 1]})")
    return NodalField(values)


def full_values(space, field):
    """Expand interior coefficients to a vector over all mesh nodes."""
    if field.values.shape[0] != space.dof_count:
        raise ValueError(
            f"field has {field.values.shape[0]} values, space has {space.dof_count} dofs"
        )
    out = np.zeros(space.mesh.n_nodes)
    out[space.dof_to_node] = field.values
    return out


def evaluate(space, field, point):
    """Value of the piecewise linear function at an arbitrary point."""
    mesh = space.mesh
    values = full_values(space, field)
    pt = np.asarray(point, dtype=float)
    p0 = mesh.nodes[mesh.triangles[:, 0]]
    v1 = mesh.nodes[mesh.triangles[:, 1]] - p0
    v2 = mesh.nodes[mesh.triangles[:, 2]] - p0
    w = pt[None, :] - p0
    denom = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
    b1 = (w[:, 0] * v2[:, 1] - w[:, 1] * v2[:, 0]) / denom
    b2 = (v1[:, 0] * w[:, 1] - v1[:, 1] * w[:, 0]) / denom
    b0 = 1.0 - b1 - b2
    tol = -1e-12
    hits = np.flatnonzero((b0 >= tol) & (b1 >= tol) & (b2 >= tol))
    if hits.size == 0:
        raise LocationError(f"point ({pt[0]}, {pt[1]}) lies outside the mesh")
    k = int(hits[0])
    bary = np.array([b0[k], b1[k], b2[k]])
    return float(bary @ values[mesh.triangles[k]])


class DiscreteNorms:
    __slots__ = ("l2h", "h1_semi", "h1h")

    def __init__(self, l2h, h1_semi, h1h):
        self.l2h = l2h
        self.h1_semi = h1_semi
        self.h1h = h1h


def discrete_norms(space, field):
    """Lumped L2 norm, H1 seminorm and full H1 norm of a trial function."""
    return discrete_norms_of_values(space.mesh, full_values(space, field),
                                    gradients=space.gradients)


def discrete_norms_of_values(mesh, values, gradients=None):
    """Same norms for an arbitrary vector of per-node values.

    The seminorm of a piecewise linear function is computed exactly from
    its constant per-triangle gradient.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_nodes,):
        raise ValueError("expected one value per mesh node")
    if gradients is None:
        gradients = _basis_gradients(mesh)
    tri_vals = values[mesh.triangles]           # (T, 3)
    l2h_sq = np.sum((mesh.areas / 3.0) * np.sum(tri_vals ** 2, axis=1))
    grad = np.einsum("tl,tlj->tj", tri_vals, gradients)
    semi_sq = np.sum(mesh.areas * np.sum(grad ** 2, axis=1))
    l2h = float(np.sqrt(l2h_sq))
    semi = float(np.sqrt(semi_sq))
    return DiscreteNorms(l2h, semi, float(np.sqrt(l2h_sq + semi_sq)))


def consistent_l2_norm(space, field):
    """Non-lumped L2 norm via the edge midpoint rule (exact for quadratics)."""
    mesh = space.mesh
    values = full_values(space, field)
    tri_vals = values[mesh.triangles]
    mid_vals = 0.5 * (tri_vals + np.roll(tri_vals, -1, axis=1))
    return float(np.sqrt(np.sum((mesh.areas / 3.0) * np.sum(mid_vals ** 2, axis=1))))
