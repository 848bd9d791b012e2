"""Problem definitions: coefficients, memory kernels, manufactured data.

A problem couples a symmetric positive definite diffusion coefficient,
an optional memory kernel under the time convolution, a forcing term
and initial data.  The two built-in problems carry closed-form exact
solutions (separable in time), hand-derived forcings, and a symbolic
description used by :func:`pde_residual` to verify that the forcing
actually matches the equation.
"""

import numpy as np
import sympy as sp

from .assembly import CoefficientField

_X, _Y, _T, _S = sp.symbols("x y t s", real=True)

# sixth order central difference weights for d2/dt2 and d/dt, offsets -3..3
_D2_RATIOS = ((1, 90), (-3, 20), (3, 2), (-49, 18), (3, 2), (-3, 20), (1, 90))
_D2_WEIGHTS = np.array([p / q for p, q in _D2_RATIOS])
_D1_WEIGHTS = np.array([-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60])
_FD_OFFSETS = np.arange(-3, 4)


class ProblemValidationError(ValueError):
    """Problem data failed a consistency check; names the worst point."""


class ExponentialKernel:
    """Separable kernel scale*exp(rate*(t-s)) times a fixed matrix field.

    The pure exponential form admits a one-term recursion for the memory
    sum, so the solver can avoid storing history for these kernels.
    """

    __slots__ = ("rate", "base", "scale")

    def __init__(self, rate, base, scale=1.0):
        self.rate = float(rate)
        self.base = base
        self.scale = float(scale)

    def factor(self, tau):
        return self.scale * np.exp(self.rate * tau)


class SeparableKernel:
    """Kernel factor(t-s) times a fixed matrix field, factor arbitrary."""

    __slots__ = ("factor", "base")

    def __init__(self, factor, base):
        self.factor = factor
        self.base = base


class GeneralKernel:
    """Fully general kernel: entries_at(t, s) returns a matrix field."""

    __slots__ = ("entries_at",)

    def __init__(self, entries_at):
        self.entries_at = entries_at


class SymbolicProblem:
    """Symbolic mirror of a manufactured problem, consumed by the residual check."""

    __slots__ = ("solution", "coeff", "kernel_factor", "kernel_base")

    def __init__(self, solution, coeff, kernel_factor=None, kernel_base=None):
        self.solution = solution
        self.coeff = coeff
        self.kernel_factor = kernel_factor
        self.kernel_base = kernel_base


class ProblemSpec:
    """Everything the solver needs, plus optional exact-solution data.

    forcing(x, y, t), u0(x, y) and u1(x, y) accept numpy arrays.  When
    present, exact(x, y, t) is the solution and exact_gradient(x, y, t)
    returns the pair of its spatial derivatives.
    """

    __slots__ = ("name", "coeff", "kernel", "forcing", "u0", "u1",
                 "exact", "exact_gradient", "final_time", "symbolic")

    def __init__(self, name, coeff, kernel, forcing, u0, u1,
                 exact=None, exact_gradient=None, final_time=1.0, symbolic=None):
        self.name = name
        self.coeff = coeff
        self.kernel = kernel
        self.forcing = forcing
        self.u0 = u0
        self.u1 = u1
        self.exact = exact
        self.exact_gradient = exact_gradient
        self.final_time = float(final_time)
        self.symbolic = symbolic


def example1():
    """Unit coefficients: u = e^t sin(pi x) sin(pi y) on the unit square."""
    pi = np.pi

    def shape(x, y):
        return np.sin(pi * x) * np.sin(pi * y)

    def exact(x, y, t):
        return np.exp(t) * shape(x, y)

    def exact_gradient(x, y, t):
        amp = np.exp(t) * pi
        return (amp * np.cos(pi * x) * np.sin(pi * y),
                amp * np.sin(pi * x) * np.cos(pi * y))

    def forcing(x, y, t):
        return (1.0 + 2.0 * pi ** 2 * (1.0 + t)) * np.exp(t) * shape(x, y)

    identity = CoefficientField.identity()
    symbolic = SymbolicProblem(
        solution=sp.exp(_T) * sp.sin(sp.pi * _X) * sp.sin(sp.pi * _Y),
        coeff=sp.eye(2),
        kernel_factor=sp.exp(_T - _S),
        kernel_base=sp.eye(2),
    )
    return ProblemSpec(
        name="example1",
        coeff=identity,
        kernel=ExponentialKernel(rate=1.0, base=identity),
        forcing=forcing,
        u0=shape,
        u1=shape,
        exact=exact,
        exact_gradient=exact_gradient,
        symbolic=symbolic,
    )


def example2():
    """Variable diagonal coefficient (1+x^2), u = e^t x y (x-1)(y-1)."""

    def shape(x, y):
        return x * y * (x - 1.0) * (y - 1.0)

    def exact(x, y, t):
        return np.exp(t) * shape(x, y)

    def exact_gradient(x, y, t):
        amp = np.exp(t)
        return (amp * (2.0 * x - 1.0) * y * (y - 1.0),
                amp * x * (x - 1.0) * (2.0 * y - 1.0))

    def elliptic_part(x, y):
        # divergence of (1+x^2) grad of the shape function
        return (2.0 * x * (2.0 * x - 1.0) * y * (y - 1.0)
                + (1.0 + x ** 2) * (2.0 * y * (y - 1.0) + 2.0 * x * (x - 1.0)))

    def forcing(x, y, t):
        return np.exp(t) * (shape(x, y) - (1.0 + t) * elliptic_part(x, y))

    def entries(x, y):
        a = 1.0 + np.asarray(x) ** 2
        return ((a, 0.0), (0.0, a))

    coeff = CoefficientField.from_function(entries, note="diag(1+x^2), smooth")
    a_sym = sp.Matrix([[1 + _X ** 2, 0], [0, 1 + _X ** 2]])
    symbolic = SymbolicProblem(
        solution=sp.exp(_T) * _X * _Y * (_X - 1) * (_Y - 1),
        coeff=a_sym,
        kernel_factor=sp.exp(_T - _S),
        kernel_base=a_sym,
    )
    return ProblemSpec(
        name="example2",
        coeff=coeff,
        kernel=ExponentialKernel(rate=1.0, base=coeff),
        forcing=forcing,
        u0=shape,
        u1=shape,
        exact=exact,
        exact_gradient=exact_gradient,
        symbolic=symbolic,
    )


BUILTIN_PROBLEMS = {"example1": example1, "example2": example2}


def get_problem(name):
    try:
        return BUILTIN_PROBLEMS[name]()
    except KeyError:
        known = ", ".join(sorted(BUILTIN_PROBLEMS))
        raise KeyError(f"unknown problem {name!r}; available: {known}") from None


def _flux_divergence(matrix, scalar):
    gx = sp.diff(scalar, _X)
    gy = sp.diff(scalar, _Y)
    fx = matrix[0, 0] * gx + matrix[0, 1] * gy
    fy = matrix[1, 0] * gx + matrix[1, 1] * gy
    return sp.diff(fx, _X) + sp.diff(fy, _Y)


def pde_residual(spec, points, dt=1e-3):
    """Pointwise defect of the forcing against the governing equation.

    The second time derivative of the exact solution is formed by a
    sixth order central difference; the elliptic term and the memory
    convolution are differentiated (and integrated in s) symbolically
    from the problem's symbolic description.  Small residuals certify
    that the hand-coded forcing, the exact solution and the symbolic
    data all describe the same equation.

    points: array of (x, y, t) rows.  Returns one residual per row.
    """
    if spec.symbolic is None or spec.exact is None:
        raise ValueError("problem carries no symbolic description to check against")
    sym = spec.symbolic

    elliptic = _flux_divergence(sym.coeff, sym.solution)
    if sym.kernel_factor is not None:
        integrand = sym.kernel_factor * _flux_divergence(
            sym.kernel_base, sym.solution.subs(_T, _S)
        )
        memory = sp.integrate(integrand, (_S, 0, _T))
    else:
        memory = sp.Integer(0)
    space_terms = sp.lambdify((_X, _Y, _T), elliptic + memory, "numpy")

    points = np.asarray(points, dtype=float)
    xs, ys, ts = points[:, 0], points[:, 1], points[:, 2]
    # The stencil divides by dt**2, which amplifies rounding of u by 1e6;
    # extended precision keeps that noise well below the residual scale.
    xl, yl, tl = (v.astype(np.longdouble) for v in (xs, ys, ts))
    dtl = np.longdouble(dt)
    utt = np.zeros_like(tl)
    for (p, q), off in zip(_D2_RATIOS, _FD_OFFSETS):
        w = np.longdouble(p) / np.longdouble(q)
        utt += w * spec.exact(xl, yl, tl + off * dtl)
    utt /= dtl ** 2
    return utt.astype(float) - space_terms(xs, ys, ts) - spec.forcing(xs, ys, ts)


class ValidationReport:
    __slots__ = ("max_u0_mismatch", "max_u1_mismatch", "spd_checked")

    def __init__(self, max_u0_mismatch, max_u1_mismatch, spd_checked):
        self.max_u0_mismatch = max_u0_mismatch
        self.max_u1_mismatch = max_u1_mismatch
        self.spd_checked = spd_checked


def validate(spec, domain=(0.0, 0.0, 1.0, 1.0), n_points=20, seed=7, tol=1e-10,
             dt=1e-3):
    """Consistency checks between initial data, exact solution and coefficient.

    Raises :class:`ProblemValidationError` naming the worst point when
    u0 or u1 disagrees with the exact solution at t = 0, or when the
    coefficient is not symmetric positive definite at a sample point.
    """
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = domain
    xs = rng.uniform(x0, x1, n_points)
    ys = rng.uniform(y0, y1, n_points)

    from .assembly import AssemblyError, _check_spd, evaluate_matrix_field

    try:
        _check_spd(evaluate_matrix_field(spec.coeff, xs, ys), xs, ys)
    except AssemblyError as exc:
        raise ProblemValidationError(str(exc)) from None

    max_u0 = max_u1 = 0.0
    if spec.exact is not None:
        diff0 = np.abs(np.asarray(spec.u0(xs, ys), dtype=float)
                       - spec.exact(xs, ys, 0.0))
        max_u0 = float(diff0.max())
        if max_u0 > tol:
            k = int(np.argmax(diff0))
            raise ProblemValidationError(
                f"u0 disagrees with the exact solution at t=0 by {max_u0:.3e} "
                f"at ({xs[k]}, {ys[k]})"
            )
        dudt = np.zeros(n_points)
        for w, off in zip(_D1_WEIGHTS, _FD_OFFSETS):
            dudt += w * spec.exact(xs, ys, off * dt)
        dudt /= dt
        diff1 = np.abs(np.asarray(spec.u1(xs, ys), dtype=float) - dudt)
        max_u1 = float(diff1.max())
        if max_u1 > tol:
            k = int(np.argmax(diff1))
            raise ProblemValidationError(
                f"u1 disagrees with the exact time derivative at t=0 by "
                f"{max_u1:.3e} at ({xs[k]}, {ys[k]})"
            )
    return ValidationReport(max_u0, max_u1, n_points)
