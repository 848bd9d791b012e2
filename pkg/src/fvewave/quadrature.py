"""Quadrature rules used by the discrete scheme.

Three small rules carry the whole method: the vertex rule on triangles
(exact for linears, and the source of the lumped mass matrix), the
two-point trapezoid rule along dual segments, and the composite
midpoint rule in time for the memory convolution.
"""

import numpy as np


class TimeGrid:
    """Uniform time levels t_n = n*step for n = 0..num_steps."""

    __slots__ = ("step", "num_steps")

    def __init__(self, step, num_steps):
        if not step > 0.0:
            raise ValueError(f"time step must be positive, got {step}")
        if num_steps < 0:
            raise ValueError(f"number of steps must be nonnegative, got {num_steps}")
        self.step = float(step)
        self.num_steps = int(num_steps)

    @property
    def final_time(self):
        return self.step * self.num_steps

    def time(self, n):
        return n * self.step

    def half_time(self, j):
        """Midpoint of the interval (t_j, t_{j+1})."""
        return (j + 0.5) * self.step


def vertex_rule(vertices, phi):
    """Integrate phi over a triangle by averaging its vertex values.

    Exact for affine integrands.
    """
    vertices = np.asarray(vertices, dtype=float)
    if vertices.shape != (3, 2):
        raise ValueError("expected three 2D vertices")
    d1 = vertices[1] - vertices[0]
    d2 = vertices[2] - vertices[0]
    area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
    total = sum(float(phi(x, y)) for x, y in vertices)
    return area / 3.0 * total


def segment_rule(segment, v):
    """Two-point trapezoid rule along a dual segment.

    Evaluates v at the two endpoints (edge midpoint and barycenter);
    exact for integrands affine along the segment.
    """
    (mx, my), (qx, qy) = segment.endpoints
    return 0.5 * segment.length * (float(v(mx, my)) + float(v(qx, qy)))


def memory_sum(grid, n, g):
    """Composite midpoint approximation of the integral of g over (0, t_n).

    Returns step * sum of g at the interval midpoints t_{j+1/2}, j < n.
    """
    if n < 0 or n > grid.num_steps:
        raise ValueError(f"level {n} outside the grid (0..{grid.num_steps})")
    return grid.step * sum(float(g(grid.half_time(j))) for j in range(n))
