"""Explicit time integration of the semidiscrete flux balance.

The scheme is the classical three-level central difference ("leapfrog")
update driven by the lumped mass matrix, plus a composite midpoint
discretization of the memory convolution: at level n the convolution is
approximated by step * sum over j < n of kernel(t_n, t_{j+1/2}) applied
to the stored half-level averages (U_j + U_{j+1}) / 2.

Memory handling comes in two flavors:
  * history path: half-level fields are stored and the sum is formed
    each step; separable kernels store the matrix-vector products once,
    general kernels assemble a fresh matrix per (t_n, t_{j+1/2}) pair,
  * accumulator path: for pure exponential factors the sum satisfies a
    one-term recursion, so a single vector replaces the history.

Being explicit, the update is only stable for time steps below
2/sqrt(largest generalized eigenvalue of the stiffness against the
mass); the estimate comes from a power iteration and is enforced unless
explicitly overridden.
"""

import numpy as np

from .assembly import (assemble_load, assemble_lumped_mass, assemble_memory_matrix,
                       assemble_stiffness)
from .mesh import build_dual_mesh
from .problems import ExponentialKernel, GeneralKernel, SeparableKernel
from .space import NodalField, P1Space, interpolate, sample_at_points

HISTORY = "history"
ACCUMULATOR = "accumulator"


class DivergenceError(RuntimeError):
    """The solution blew up; carries the step and the max magnitude."""

    def __init__(self, step, max_magnitude):
        super().__init__(
            f"solution diverged at step {step} (max magnitude {max_magnitude:.3e})"
        )
        self.step = step
        self.max_magnitude = max_magnitude


class StabilityError(RuntimeError):
    """The spectral estimate did not converge."""


class CflViolationError(RuntimeError):
    """Requested time step exceeds the stable limit."""

    def __init__(self, step, estimate):
        super().__init__(
            f"time step {step:.6e} exceeds the stable limit {estimate.k_max:.6e}; "
            "reduce the step or explicitly allow unstable runs"
        )
        self.estimate = estimate


class StabilityEstimate:
    """Largest generalized eigenvalue and the induced step limit."""

    __slots__ = ("lambda_max", "k_max", "safety", "recommended_k", "cfl_ratio",
                 "iterations")

    def __init__(self, lambda_max, k_max, safety, recommended_k, cfl_ratio,
                 iterations):
        self.lambda_max = lambda_max
        self.k_max = k_max
        self.safety = safety
        self.recommended_k = recommended_k
        self.cfl_ratio = cfl_ratio
        self.iterations = iterations


def estimate_stable_dt(mass, stiffness, k=None, safety=0.9, tol=1e-8,
                       max_iter=5000, seed=20160309):
    """Power iteration for the largest eigenvalue of mass^{-1} stiffness.

    Works on the symmetrized operator D^{-1/2} A D^{-1/2}, whose
    spectrum is the same; converged when the Rayleigh quotient changes
    by less than tol relative between iterates.
    """
    n = mass.dim
    if n == 0:
        raise StabilityError("mesh has no interior nodes, nothing to estimate")
    inv_sqrt = 1.0 / np.sqrt(mass.diagonal)

    def apply_sym(vec):
        return inv_sqrt * stiffness.apply(inv_sqrt * vec)

    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(n)
    vec /= np.linalg.norm(vec)
    lam = 0.0
    for iteration in range(1, max_iter + 1):
        new = apply_sym(vec)
        norm = np.linalg.norm(new)
        if norm == 0.0:
            raise StabilityError("operator annihilated the iterate")
        vec = new / norm
        lam_new = float(vec @ apply_sym(vec))
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            lam = lam_new
            break
        lam = lam_new
    else:
        raise StabilityError(
            f"power iteration did not converge within {max_iter} iterations"
        )
    if lam <= 0.0:
        raise StabilityError(f"non-positive dominant eigenvalue {lam:.3e}")
    k_max = 2.0 / np.sqrt(lam)
    ratio = None if k is None else float(k) / k_max
    return StabilityEstimate(lam, k_max, safety, safety * k_max, ratio, iteration)


class SeparableMemory:
    """Assembled base matrix plus the scalar time factor."""

    __slots__ = ("matrix", "factor", "exponential_rate", "scale")

    def __init__(self, matrix, factor, exponential_rate=None, scale=1.0):
        self.matrix = matrix
        self.factor = factor
        self.exponential_rate = exponential_rate
        self.scale = scale


class GeneralMemory:
    """Assembles the kernel matrix on demand for a frozen (t, s) pair."""

    __slots__ = ("assemble",)

    def __init__(self, assemble):
        self.assemble = assemble


class DiscreteSystem:
    """Mesh, spaces and assembled operators for one problem instance."""

    __slots__ = ("problem", "mesh", "dual", "space", "mass", "stiffness", "memory")

    def __init__(self, problem, mesh, dual, space, mass, stiffness, memory):
        self.problem = problem
        self.mesh = mesh
        self.dual = dual
        self.space = space
        self.mass = mass
        self.stiffness = stiffness
        self.memory = memory


def discretize(problem, mesh, mode="quadrature"):
    """Assemble the operators of a problem on a given mesh."""
    dual = build_dual_mesh(mesh)
    space = P1Space(mesh)
    mass = assemble_lumped_mass(space, dual)
    stiffness = assemble_stiffness(space, dual, problem.coeff, mode=mode)

    kernel = problem.kernel
    if kernel is None:
        memory = None
    elif isinstance(kernel, ExponentialKernel):
        base = assemble_memory_matrix(space, dual, kernel.base, mode=mode)
        memory = SeparableMemory(base, kernel.factor,
                                 exponential_rate=kernel.rate, scale=kernel.scale)
    elif isinstance(kernel, SeparableKernel):
        base = assemble_memory_matrix(space, dual, kernel.base, mode=mode)
        memory = SeparableMemory(base, kernel.factor)
    elif isinstance(kernel, GeneralKernel):
        memory = GeneralMemory(
            lambda t, s: assemble_memory_matrix(space, dual,
                                                kernel.entries_at(t, s), mode=mode)
        )
    else:
        raise TypeError(f"unsupported kernel type {type(kernel).__name__}")
    return DiscreteSystem(problem, mesh, dual, space, mass, stiffness, memory)


class SolverState:
    """Mutable state of the time loop.

    u_prev and u_curr hold the two newest time levels (u_curr is level
    ``step``).  Depending on the memory path, either the half-level
    fields (and, for separable kernels, their matrix products) or the
    running accumulator is maintained.
    """

    __slots__ = ("step", "u_prev", "u_curr", "memory_path", "half_levels",
                 "base_products", "accumulator", "stored", "divergence_limit")

    def __init__(self, step, u_prev, u_curr, memory_path, capacity,
                 divergence_limit, dof_count):
        self.step = step
        self.u_prev = u_prev
        self.u_curr = u_curr
        self.memory_path = memory_path
        self.half_levels = np.zeros((capacity, dof_count))
        self.base_products = None
        self.accumulator = None
        self.stored = 0
        self.divergence_limit = divergence_limit


def startup_step(mass, stiffness, u0, u1, load0, k):
    """First time level from a second order Taylor expansion at t = 0."""
    return u0 + k * u1 + 0.5 * k * k * mass.solve(load0 - stiffness.apply(u0))


def _check_finite(vec, step, limit):
    if vec.size == 0:
        return
    mag = float(np.abs(vec).max())
    if not np.isfinite(mag) or mag > limit:
        raise DivergenceError(step, mag)


def _memory_term(state, disc, grid):
    """Memory sum at the current level (without the leading factor of k)."""
    memory = disc.memory
    if memory is None or state.memory_path is None:
        return 0.0
    n = state.step
    if state.memory_path == ACCUMULATOR:
        return state.accumulator
    t_n = grid.time(n)
    if isinstance(memory, SeparableMemory):
        coeffs = np.array([memory.factor(t_n - grid.half_time(j)) for j in range(n)])
        return coeffs @ state.base_products[:n]
    total = np.zeros_like(state.u_curr)
    for j in range(n):
        matrix = memory.assemble(t_n, grid.half_time(j))
        total += matrix.apply(state.half_levels[j])
    return total


def _push_half_level(state, disc, grid, half):
    memory = disc.memory
    if memory is None or state.memory_path is None:
        return
    j = state.stored
    state.half_levels[j] = half
    if state.memory_path == ACCUMULATOR:
        k = grid.step
        decay = np.exp(memory.exponential_rate * k)
        inject = memory.scale * np.exp(memory.exponential_rate * 0.5 * k)
        product = memory.matrix.apply(half)
        if state.accumulator is None:
            state.accumulator = inject * product
        else:
            state.accumulator = decay * state.accumulator + inject * product
    elif isinstance(memory, SeparableMemory):
        if state.base_products is None:
            state.base_products = np.zeros_like(state.half_levels)
        state.base_products[j] = memory.matrix.apply(half)
    state.stored = j + 1


def leapfrog_step(state, disc, grid):
    """Advance one level: central differences around the current time."""
    n = state.step
    k = grid.step
    mem = _memory_term(state, disc, grid)
    load = assemble_load(disc.space, disc.dual, disc.problem.forcing, grid.time(n))
    rhs = load - disc.stiffness.apply(state.u_curr) - k * mem
    u_next = 2.0 * state.u_curr - state.u_prev + k * k * disc.mass.solve(rhs)
    _check_finite(u_next, n + 1, state.divergence_limit)
    _push_half_level(state, disc, grid, 0.5 * (state.u_curr + u_next))
    state.u_prev = state.u_curr
    state.u_curr = u_next
    state.step = n + 1
    return state


def leapfrog_energy(mass, stiffness, u_next, u_curr, k):
    """Discrete energy of the homogeneous scheme, conserved exactly.

    Sum of the mass norm of the difference quotient and the stiffness
    pairing of consecutive levels.
    """
    rate = (u_next - u_curr) / k
    return float(rate @ mass.apply(rate) + stiffness.apply(u_next) @ u_curr)


class RunResult:
    __slots__ = ("state", "snapshots", "stability", "grid")

    def __init__(self, state, snapshots, stability, grid):
        self.state = state
        self.snapshots = snapshots
        self.stability = stability
        self.grid = grid

    @property
    def final_field(self):
        return NodalField(self.state.u_curr.copy())


def run(disc, grid, memory_path="auto", allow_unstable=False, safety=0.9,
        snapshot_steps=(), divergence_factor=1e6, stability=None, on_step=None):
    """Integrate a discretized problem over a time grid.

    snapshot_steps are whole level indices whose fields are copied into
    the result.  The divergence guard trips on non-finite values or
    when the max norm exceeds divergence_factor times the initial scale.
    """
    problem = disc.problem
    space = disc.space
    u0 = interpolate(space, problem.u0).values

    wanted = set(int(s) for s in snapshot_steps)
    for s in wanted:
        if s < 0 or s > grid.num_steps:
            raise ValueError(f"snapshot step {s} outside 0..{grid.num_steps}")
    snapshots = {}
    if 0 in wanted:
        snapshots[0] = u0.copy()

    if grid.num_steps == 0:
        state = SolverState(0, u0.copy(), u0, None, 0, np.inf, space.dof_count)
        return RunResult(state, snapshots, stability, grid)

    if space.dof_count == 0:
        raise StabilityError("cannot step a system without interior nodes")
    if stability is None:
        stability = estimate_stable_dt(disc.mass, disc.stiffness, k=grid.step,
                                       safety=safety)
    if grid.step > stability.k_max and not allow_unstable:
        raise CflViolationError(grid.step, stability)

    if memory_path == "auto":
        fast = (isinstance(disc.memory, SeparableMemory)
                and disc.memory.exponential_rate is not None)
        memory_path = ACCUMULATOR if fast else HISTORY
    if memory_path == ACCUMULATOR and (
            not isinstance(disc.memory, SeparableMemory)
            or disc.memory.exponential_rate is None):
        raise ValueError("accumulator path requires an exponential kernel")
    if disc.memory is None:
        memory_path = None

    k = grid.step
    pts = space.mesh.nodes[space.dof_to_node]
    u1_nodal = sample_at_points(problem.u1, pts[:, 0], pts[:, 1])
    load0 = assemble_load(space, disc.dual, problem.forcing, 0.0)
    u_first = startup_step(disc.mass, disc.stiffness, u0, u1_nodal, load0, k)

    initial_scale = max(1.0, float(np.abs(u0).max(initial=0.0)),
                        float(np.abs(u_first).max(initial=0.0)))
    limit = divergence_factor * initial_scale
    _check_finite(u_first, 1, limit)

    state = SolverState(1, u0, u_first, memory_path, grid.num_steps,
                        limit, space.dof_count)
    _push_half_level(state, disc, grid, 0.5 * (u0 + u_first))
    if 1 in wanted:
        snapshots[1] = u_first.copy()
    if on_step is not None:
        on_step(state)

    while state.step < grid.num_steps:
        leapfrog_step(state, disc, grid)
        if state.step in wanted:
            snapshots[state.step] = state.u_curr.copy()
        if on_step is not None:
            on_step(state)
    return RunResult(state, snapshots, stability, grid)
