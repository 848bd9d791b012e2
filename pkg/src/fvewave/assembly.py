"""Matrix and vector assembly for the control volume scheme.

The test functions are characteristic functions of control volumes, so
every equation is a flux balance: the row of a node collects line
integrals of (coefficient * gradient of trial function) over the
boundary segments of its control volume.  Trial gradients are constant
per triangle, which reduces each segment integral to the average of the
coefficient matrix along the segment.

Two averaging modes are supported:
  * ``exact``: closed form for constant coefficients, two-point Gauss
    (exact through cubics) for varying ones,
  * ``quadrature``: endpoint average (edge midpoint and barycenter),
    the rule the fully discrete scheme is built on.

Dirichlet rows and columns are eliminated, so all operators act on
interior nodes only.
"""

import numpy as np
import scipy.sparse as sparse

_GAUSS2_OFFSET = 0.5 / np.sqrt(3.0)
_SYM_TOL = 1e-12


class AssemblyError(RuntimeError):
    """Assembly failed (bad coefficient, non-finite data, ...)."""


class CoefficientField:
    """A 2x2 matrix valued coefficient on the domain.

    ``entries(x, y)`` returns a nested 2x2 structure whose entries may be
    scalars or arrays broadcasting against x and y.  ``constant`` is set
    when the field does not vary, which unlocks the closed-form segment
    integral.
    """

    __slots__ = ("entries", "constant", "note")

    def __init__(self, entries, constant=None, note=""):
        self.entries = entries
        self.constant = None if constant is None else np.asarray(constant, dtype=float)
        self.note = note

    @classmethod
    def from_constant(cls, matrix, note=""):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (2, 2):
            raise ValueError("constant coefficient must be a 2x2 matrix")
        return cls(lambda x, y: matrix, constant=matrix, note=note)

    @classmethod
    def identity(cls):
        return cls.from_constant(np.eye(2), note="identity")

    @classmethod
    def from_function(cls, entries, note=""):
        return cls(entries, constant=None, note=note)


def evaluate_matrix_field(field_or_entries, xs, ys):
    """Evaluate a matrix field at many points, returning (P, 2, 2)."""
    entries = getattr(field_or_entries, "entries", field_or_entries)
    raw = entries(xs, ys)
    out = np.empty(xs.shape + (2, 2))
    for i in range(2):
        for j in range(2):
            out[..., i, j] = np.broadcast_to(raw[i][j], xs.shape)
    return out


def _check_spd(mats, xs, ys):
    """Symmetry and positive definiteness of sampled 2x2 matrices."""
    scale = np.abs(mats).max(initial=1.0)
    asym = np.abs(mats[..., 0, 1] - mats[..., 1, 0])
    bad = np.flatnonzero(asym > _SYM_TOL * scale)
    if bad.size:
        k = bad[0]
        raise AssemblyError(
            f"coefficient matrix is not symmetric at ({xs.flat[k]}, {ys.flat[k]})"
        )
    a = mats[..., 0, 0]
    c = mats[..., 1, 1]
    b = 0.5 * (mats[..., 0, 1] + mats[..., 1, 0])
    lam_min = 0.5 * (a + c) - np.sqrt((0.5 * (a - c)) ** 2 + b ** 2)
    bad = np.flatnonzero(lam_min <= 0.0)
    if bad.size:
        k = bad[0]
        raise AssemblyError(
            "coefficient matrix is not positive definite at "
            f"({xs.flat[k]}, {ys.flat[k]}), smallest eigenvalue {lam_min.flat[k]:.3e}"
        )


def _segment_averages(dual, field, mode, spd_check):
    """Average coefficient matrix along every dual segment, (S, 2, 2)."""
    n_seg = dual.n_segments
    if getattr(field, "constant", None) is not None:
        mat = field.constant
        if spd_check:
            _check_spd(mat[None, :, :], np.zeros(1), np.zeros(1))
        return np.broadcast_to(mat, (n_seg, 2, 2))

    if mode == "quadrature":
        points = np.stack([dual.seg_start, dual.seg_end])          # (2, S, 2)
    else:
        mid = 0.5 * (dual.seg_start + dual.seg_end)
        half = dual.seg_end - dual.seg_start
        points = np.stack([mid - _GAUSS2_OFFSET * half, mid + _GAUSS2_OFFSET * half])
    xs = points[..., 0]
    ys = points[..., 1]
    mats = evaluate_matrix_field(field, xs, ys)                    # (2, S, 2, 2)
    if not np.all(np.isfinite(mats)):
        raise AssemblyError("coefficient matrix produced non-finite entries")
    if spd_check:
        _check_spd(mats, xs, ys)
    return 0.5 * (mats[0] + mats[1])


def _flux_matrix(space, dual, field, mode, spd_check):
    if mode not in ("exact", "quadrature"):
        raise ValueError(f"unknown assembly mode {mode!r}")
    mesh = space.mesh
    averaged = _segment_averages(dual, field, mode, spd_check)

    grads = space.gradients[dual.seg_triangle]                     # (S, 3, 2)
    # flux of hat function l through a segment: -len * n . (A grad_l)
    values = -np.einsum("s,si,sij,slj->sl", dual.seg_length,
                        dual.seg_normal, averaged, grads)

    rows_nodes = np.repeat(dual.seg_owner, 3)
    cols_nodes = mesh.triangles[dual.seg_triangle].ravel()
    data = values.ravel()
    rows = space.node_to_dof[rows_nodes]
    cols = space.node_to_dof[cols_nodes]
    keep = (rows >= 0) & (cols >= 0)

    n = space.dof_count
    matrix = sparse.coo_matrix(
        (data[keep], (rows[keep], cols[keep])), shape=(n, n)
    ).tocsr()
    matrix.sum_duplicates()
    matrix.eliminate_zeros()
    return matrix


class AssembledOperator:
    """Sparse operator on interior nodes with a symmetry diagnostic."""

    __slots__ = ("matrix", "symmetric")

    def __init__(self, matrix, symmetric):
        self.matrix = matrix
        self.symmetric = symmetric

    @property
    def dim(self):
        return self.matrix.shape[0]

    def apply(self, vec):
        return self.matrix @ vec


class DiagonalOperator:
    """Diagonal operator (the lumped mass matrix)."""

    __slots__ = ("diagonal",)

    def __init__(self, diagonal):
        diagonal = np.ascontiguousarray(diagonal, dtype=float)
        if diagonal.size and diagonal.min(initial=np.inf) <= 0.0:
            k = int(np.argmin(diagonal))
            raise AssemblyError(f"non-positive diagonal entry {diagonal[k]:.3e} "
                                f"at position {k}")
        self.diagonal = diagonal

    @property
    def dim(self):
        return self.diagonal.shape[0]

    def apply(self, vec):
        return self.diagonal * vec

    def solve(self, vec):
        return vec / self.diagonal


def _symmetry_flag(matrix):
    if matrix.nnz == 0:
        return True
    diff = (matrix - matrix.T).tocoo()
    if diff.nnz == 0:
        return True
    scale = np.abs(matrix.data).max()
    return bool(np.abs(diff.data).max() <= _SYM_TOL * scale)


def assemble_lumped_mass(space, dual):
    """Diagonal mass matrix of control volume areas at interior nodes."""
    volumes = dual.control_volume_areas[space.dof_to_node]
    zero = np.flatnonzero(volumes <= 0.0)
    if zero.size:
        node = int(space.dof_to_node[zero[0]])
        raise AssemblyError(f"zero control volume at node {node}")
    return DiagonalOperator(volumes)


def assemble_stiffness(space, dual, coeff, mode="exact"):
    """Flux matrix of a symmetric positive definite coefficient."""
    matrix = _flux_matrix(space, dual, coeff, mode, spd_check=True)
    return AssembledOperator(matrix, _symmetry_flag(matrix))


def assemble_memory_matrix(space, dual, matrix_field, mode="exact"):
    """Flux matrix of a memory kernel frozen at one (t, s) pair.

    Kernel matrices need not be definite, so no SPD check is applied.
    """
    matrix = _flux_matrix(space, dual, matrix_field, mode, spd_check=False)
    return AssembledOperator(matrix, _symmetry_flag(matrix))


def assemble_load(space, dual, f, t):
    """Load vector: f at each interior node times its control volume area."""
    from .space import sample_at_points

    pts = space.mesh.nodes[space.dof_to_node]
    if pts.shape[0] == 0:
        return np.zeros(0)
    values = sample_at_points(f, pts[:, 0], pts[:, 1], t)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        node = int(space.dof_to_node[bad[0]])
        raise AssemblyError(f"non-finite load value at node {node}, time {t}")
    return values * dual.control_volume_areas[space.dof_to_node]


def dump_operator(op, path):
    """Write an operator as 'i j value' lines (diagonals included)."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        if isinstance(op, DiagonalOperator):
            for i, v in enumerate(op.diagonal):
                handle.write(f"{i} {i} {float(v)!r}\n")
            return
        coo = op.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            handle.write(f"{i} {j} {float(v)!r}\n")
