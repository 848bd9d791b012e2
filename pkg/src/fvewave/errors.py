"""Error measures against exact solutions and convergence-rate bookkeeping."""

import math

import numpy as np

from .space import full_values

NORMS = ("max", "l2", "h1")


def nodal_max_error(space, field, exact, t):
    """Largest pointwise error over interior nodes."""
    pts = space.mesh.nodes[space.dof_to_node]
    if pts.shape[0] == 0:
        return 0.0
    target = np.asarray(exact(pts[:, 0], pts[:, 1], t), dtype=float)
    return float(np.abs(field.values - target).max())


def _edge_midpoints(mesh):
    pts = mesh.nodes[mesh.triangles]            # (T, 3, 2)
    return 0.5 * (pts + np.roll(pts, -1, axis=1))


def l2_error(space, field, exact, t):
    """L2 error by the edge midpoint rule on each triangle."""
    mesh = space.mesh
    values = full_values(space, field)
    tri_vals = values[mesh.triangles]
    approx = 0.5 * (tri_vals + np.roll(tri_vals, -1, axis=1))
    mids = _edge_midpoints(mesh)
    target = np.asarray(exact(mids[..., 0], mids[..., 1], t), dtype=float)
    return float(np.sqrt(np.sum((mesh.areas / 3.0)
                                * np.sum((target - approx) ** 2, axis=1))))


def h1_error(space, field, exact, exact_gradient, t):
    """Full H1 error: L2 part plus the gradient misfit, both by midpoints."""
    mesh = space.mesh
    values = full_values(space, field)
    grad_h = np.einsum("tl,tlj->tj", values[mesh.triangles], space.gradients)
    mids = _edge_midpoints(mesh)
    gx, gy = exact_gradient(mids[..., 0], mids[..., 1], t)
    dx = np.asarray(gx, dtype=float) - grad_h[:, None, 0]
    dy = np.asarray(gy, dtype=float) - grad_h[:, None, 1]
    semi_sq = np.sum((mesh.areas / 3.0) * np.sum(dx ** 2 + dy ** 2, axis=1))
    l2 = l2_error(space, field, exact, t)
    return float(np.sqrt(l2 ** 2 + semi_sq))


def eoc(errors, hs):
    """Observed orders between consecutive levels; None where undefined."""
    if len(errors) != len(hs):
        raise ValueError("errors and mesh sizes must have equal length")
    if len(errors) < 2:
        raise ValueError("need at least two levels for a rate")
    if any(h <= 0.0 for h in hs):
        raise ValueError("mesh sizes must be positive")
    rates = []
    for (e0, e1), (h0, h1) in zip(zip(errors, errors[1:]), zip(hs, hs[1:])):
        if h0 == h1:
            raise ValueError("consecutive levels must have distinct mesh sizes")
        if e0 is None or e1 is None or e0 <= 0.0 or e1 <= 0.0:
            rates.append(None)
        else:
            rates.append(math.log(e0 / e1) / math.log(h0 / h1))
    return rates


def loglog_slope(hs, errors):
    """Least squares slope of log(error) against log(h)."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if hs.size != errors.size or hs.size < 2:
        raise ValueError("need two or more matching (h, error) pairs")
    if np.any(hs <= 0.0) or np.any(errors <= 0.0):
        raise ValueError("slope needs positive mesh sizes and errors")
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])


class LevelResult:
    """Errors and timing of one refinement level."""

    __slots__ = ("n", "h", "k", "err_max", "err_l2", "err_h1", "runtime_seconds")

    def __init__(self, n, h, k, err_max=None, err_l2=None, err_h1=None,
                 runtime_seconds=0.0):
        self.n = n
        self.h = h
        self.k = k
        self.err_max = err_max
        self.err_l2 = err_l2
        self.err_h1 = err_h1
        self.runtime_seconds = runtime_seconds

    def error(self, norm):
        return {"max": self.err_max, "l2": self.err_l2, "h1": self.err_h1}[norm]


class ConvergenceReport:
    """Per-level errors plus observed orders for each reported norm."""

    def __init__(self, problem, levels, norms=NORMS):
        self.problem = problem
        self.levels = list(levels)
        self.norms = tuple(norms)
        hs = [lvl.h for lvl in self.levels]
        self.rates = {}
        for norm in NORMS:
            errs = [lvl.error(norm) for lvl in self.levels]
            if norm in self.norms and len(self.levels) >= 2:
                self.rates[norm] = eoc(errs, hs)
            else:
                self.rates[norm] = [None] * max(len(self.levels) - 1, 0)

    def slope(self, norm, last=3):
        """Least squares slope over the final ``last`` levels."""
        tail = self.levels[-last:]
        hs = [lvl.h for lvl in tail]
        errs = [lvl.error(norm) for lvl in tail]
        return loglog_slope(hs, errs)
