"""Control volume solver for 2D linear hyperbolic problems with memory.

Piecewise linear trial functions on a triangulation are tested against
characteristic functions of barycentric control volumes; time stepping
is an explicit central difference scheme with a composite midpoint rule
for the memory convolution.
"""

from .assembly import (AssembledOperator, AssemblyError, CoefficientField,
                       DiagonalOperator, assemble_load, assemble_lumped_mass,
                       assemble_memory_matrix, assemble_stiffness, dump_operator)
from .cli import ConfigError, StudyConfig, mesh_info, parse_config, run_single, \
    run_study
from .errors import (ConvergenceReport, LevelResult, eoc, h1_error, l2_error,
                     loglog_slope, nodal_max_error)
from .mesh import (ControlVolumeSegment, DualMesh, MeshError, MeshFileError,
                   PrimalMesh, build_dual_mesh, build_uniform_triangulation,
                   quasi_uniformity_report, read_mesh_file, write_mesh_file)
from .problems import (ExponentialKernel, GeneralKernel, ProblemSpec,
                       ProblemValidationError, SeparableKernel, SymbolicProblem,
                       example1, example2, get_problem, pde_residual, validate)
from .quadrature import TimeGrid, memory_sum, segment_rule, vertex_rule
from .space import (DiscreteNorms, EvaluationError, LocationError, NodalField,
                    P1Space, consistent_l2_norm, discrete_norms,
                    discrete_norms_of_values, evaluate, full_values, interpolate)
from .stepper import (CflViolationError, DiscreteSystem, DivergenceError,
                      SolverState, StabilityError, StabilityEstimate, discretize,
                      estimate_stable_dt, leapfrog_energy, leapfrog_step, run,
                      startup_step)

__version__ = "0.1.0"
