"""Coefficient-space models of truncated Hardy spaces.

A ``DegreeGrid`` fixes a truncation of H^2(D^n) (or of a vector-valued
one-variable space H^2_W(D) via ``fiber_dim``).  Elements are stored as flat
complex coefficient arrays in a fixed order:

    flat = (((k_n * N_{n-1} + k_{n-1}) * ... ) * N_1 + k_1) * fiber_dim + f

i.e. the fiber index varies fastest, then the variable-1 degree, with the
variable-n degree slowest.  The JSON wire format depends on this order.

The monomial basis is orthonormal, so inner products and norms are plain
coefficient sums (Parseval).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, GridOverflowError

#: relative singular-value threshold used for numerical ranks
DEFAULT_RANK_TOL = 1e-8


@dataclass(frozen=True)
class DegreeGrid:
    """Truncation grid: per-variable degrees 0..N_v-1 and a coefficient fiber."""

    nvars: int
    trunc: tuple[int, ...]
    fiber_dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "trunc", tuple(int(t) for t in self.trunc))
        if self.nvars < 1 or len(self.trunc) != self.nvars:
            raise ValueError("trunc must list one degree bound per variable")
        if any(t < 1 for t in self.trunc) or self.fiber_dim < 1:
            raise ValueError("degree bounds and fiber dimension must be positive")

    @property
    def size(self) -> int:
        return self.fiber_dim * int(np.prod(self.trunc))

    @property
    def shape(self) -> tuple[int, ...]:
        # nd view: axes (var n, ..., var 1, fiber); C-order ravel gives the flat order
        return tuple(reversed(self.trunc)) + (self.fiber_dim,)

    def axis(self, var: int) -> int:
        """nd-view axis carrying variable ``var`` (1-based)."""
        if not 1 <= var <= self.nvars:
            raise ValueError(f"variable index {var} out of range")
        return self.nvars - var

    def flat_index(self, powers, fiber: int = 0) -> int:
        powers = tuple(int(p) for p in powers)
        if len(powers) != self.nvars:
            raise ValueError("one exponent per variable required")
        idx = 0
        for v in range(self.nvars, 0, -1):
            k = powers[v - 1]
            if not 0 <= k < self.trunc[v - 1]:
                raise ValueError(f"degree {k} outside grid in variable {v}")
            idx = idx * self.trunc[v - 1] + k
        return idx * self.fiber_dim + fiber

    def degrees(self) -> np.ndarray:
        """(size, nvars) int array: per flat index, the degree in each variable."""
        return _degrees(self)

    def fibers(self) -> np.ndarray:
        return _fibers(self)

    def monomial(self, powers, fiber: int = 0) -> "PolyVec":
        coeffs = np.zeros(self.size, dtype=complex)
        coeffs[self.flat_index(powers, fiber)] = 1.0
        return PolyVec(self, coeffs)

    def zero(self) -> "PolyVec":
        return PolyVec(self, np.zeros(self.size, dtype=complex))

    def window_mask(self, shift) -> np.ndarray:
        """Boolean mask of flat indices whose image stays on the grid.

        ``shift`` gives, per variable, the largest degree increase of the
        operator word under consideration; an index qualifies when every
        degree is at most N_v - 1 - shift_v.
        """
        shift = np.broadcast_to(np.asarray(shift, dtype=int), (self.nvars,))
        deg = self.degrees()
        bound = np.asarray(self.trunc) - 1 - np.clip(shift, 0, None)
        return np.all(deg <= bound, axis=1)

    def graded_lex_order(self) -> np.ndarray:
        """Flat indices sorted by (total degree, k_1..k_n, fiber), ascending."""
        return _graded_lex_order(self)

    def to_json(self) -> dict:
        return {"nvars": self.nvars, "trunc": list(self.trunc), "fiber_dim": self.fiber_dim}

    @classmethod
    def from_json(cls, obj: dict) -> "DegreeGrid":
        return cls(int(obj["nvars"]), tuple(obj["trunc"]), int(obj.get("fiber_dim", 1)))


@functools.lru_cache(maxsize=None)
def _degrees(grid: DegreeGrid) -> np.ndarray:
    idx = np.indices(grid.shape).reshape(grid.nvars + 1, grid.size)
    # axes run (var n, ..., var 1, fiber); reorder to columns (var 1, ..., var n)
    out = np.empty((grid.size, grid.nvars), dtype=int)
    for v in range(1, grid.nvars + 1):
        out[:, v - 1] = idx[grid.axis(v)]
    return out


@functools.lru_cache(maxsize=None)
def _fibers(grid: DegreeGrid) -> np.ndarray:
    return np.indices(grid.shape).reshape(grid.nvars + 1, grid.size)[-1]


@functools.lru_cache(maxsize=None)
def _graded_lex_order(grid: DegreeGrid) -> np.ndarray:
    deg = grid.degrees()
    keys = [grid.fibers()] + [deg[:, v] for v in range(grid.nvars - 1, -1, -1)]
    keys.append(deg.sum(axis=1))
    return np.lexsort(keys)


@dataclass(frozen=True, eq=False)
class PolyVec:
    """A truncated Hardy-space element: flat coefficient array over a grid."""

    grid: DegreeGrid
    coeffs: np.ndarray
    truncated: bool = False

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        if arr.size != self.grid.size:
            raise ValueError("coefficient array does not match the grid")
        object.__setattr__(self, "coeffs", arr)

    @property
    def nd(self) -> np.ndarray:
        return self.coeffs.reshape(self.grid.shape)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __add__(self, other: "PolyVec") -> "PolyVec":
        _check_grids(self.grid, other.grid)
        return PolyVec(self.grid, self.coeffs + other.coeffs,
                       self.truncated or other.truncated)

    def __sub__(self, other: "PolyVec") -> "PolyVec":
        _check_grids(self.grid, other.grid)
        return PolyVec(self.grid, self.coeffs - other.coeffs,
                       self.truncated or other.truncated)

    def __mul__(self, scalar) -> "PolyVec":
        return PolyVec(self.grid, self.coeffs * scalar, self.truncated)

    __rmul__ = __mul__

    def to_json(self) -> dict:
        return {
            "grid": self.grid.to_json(),
            "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PolyVec":
        grid = DegreeGrid.from_json(obj["grid"])
        coeffs = np.array([complex(re, im) for re, im in obj["coeffs"]], dtype=complex)
        return cls(grid, coeffs)


def _check_grids(a: DegreeGrid, b: DegreeGrid):
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


def inner_product(f: PolyVec, g: PolyVec) -> complex:
    """H^2 inner product, linear in the first argument."""
    _check_grids(f.grid, g.grid)
    return complex(np.vdot(g.coeffs, f.coeffs))


def shift_apply(var: int, f: PolyVec, mode: str = "strict") -> PolyVec:
    """Multiply by the coordinate z_var (degree index up-shift)."""
    ax = f.grid.axis(var)
    nd = f.nd
    top = np.take(nd, -1, axis=ax)
    lost = bool(np.any(top != 0))
    if lost and mode == "strict":
        raise GridOverflowError(f"shift in variable {var} leaves the grid")
    out = np.zeros_like(nd)
    src = [slice(None)] * nd.ndim
    dst = [slice(None)] * nd.ndim
    src[ax] = slice(0, -1)
    dst[ax] = slice(1, None)
    out[tuple(dst)] = nd[tuple(src)]
    return PolyVec(f.grid, out.reshape(-1), f.truncated or lost)


def shift_adjoint_apply(var: int, f: PolyVec) -> PolyVec:
    """Adjoint of the coordinate shift (degree index down-shift); always exact."""
    ax = f.grid.axis(var)
    nd = f.nd
    out = np.zeros_like(nd)
    src = [slice(None)] * nd.ndim
    dst = [slice(None)] * nd.ndim
    src[ax] = slice(1, None)
    dst[ax] = slice(0, -1)
    out[tuple(dst)] = nd[tuple(src)]
    return PolyVec(f.grid, out.reshape(-1), f.truncated)


def shift_matrix(grid: DegreeGrid, var: int) -> np.ndarray:
    """Dense compression of multiplication by z_var onto the grid."""
    N = grid.trunc[var - 1]
    return op_on_variable(grid, var, np.eye(N, k=-1))


def op_on_variable(grid: DegreeGrid, var: int, block: np.ndarray) -> np.ndarray:
    """Expand a one-variable operator to the full grid (identity elsewhere)."""
    mat = np.array([[1.0 + 0j]])
    for v in range(grid.nvars, 0, -1):
        mat = np.kron(mat, block if v == var else np.eye(grid.trunc[v - 1]))
    if grid.fiber_dim > 1:
        mat = np.kron(mat, np.eye(grid.fiber_dim))
    return mat


def tensor_columns(grid: DegreeGrid, blocks) -> np.ndarray:
    """Column basis of a tensor-product subspace from per-variable bases.

    ``blocks[v-1]`` is an (N_v, d_v) matrix; the result is (size, prod d_v)
    in the grid's flat-index convention (scalar fiber only).
    """
    if grid.fiber_dim != 1 or len(blocks) != grid.nvars:
        raise ValueError("tensor_columns expects a scalar grid and one block per variable")
    mat = np.array([[1.0 + 0j]])
    for v in range(grid.nvars, 0, -1):
        mat = np.kron(mat, np.asarray(blocks[v - 1], dtype=complex))
    return mat


def support_in_mask(columns: np.ndarray, mask: np.ndarray, rel: float = 1e-12) -> np.ndarray:
    """Per column: does essentially all mass sit inside the masked indices?"""
    columns = np.atleast_2d(np.asarray(columns, dtype=complex))
    off = np.linalg.norm(columns[~mask, :], axis=0)
    full = np.linalg.norm(columns, axis=0)
    return off <= rel * np.maximum(full, 1e-300)


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """Orthonormal column basis of a subspace of a truncated Hardy space."""

    grid: DegreeGrid
    matrix: np.ndarray
    window: tuple[int, ...] = field(default=None)  # per-variable exactness bound

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != self.grid.size:
            raise ValueError("basis matrix must be (grid.size, dim)")
        object.__setattr__(self, "matrix", mat)
        if self.window is None:
            object.__setattr__(self, "window", tuple(t - 1 for t in self.grid.trunc))

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def projector(self) -> np.ndarray:
        return self.matrix @ self.matrix.conj().T

    def columns(self) -> list[PolyVec]:
        return [PolyVec(self.grid, self.matrix[:, j]) for j in range(self.dim)]

    def orthonormality_residual(self) -> float:
        gram = self.matrix.conj().T @ self.matrix
        return float(np.max(np.abs(gram - np.eye(self.dim)))) if self.dim else 0.0

    def contains_residual(self, f: PolyVec) -> float:
        _check_grids(self.grid, f.grid)
        rem = f.coeffs - self.matrix @ (self.matrix.conj().T @ f.coeffs)
        return float(np.linalg.norm(rem))

    def complement(self, gs_tol: float = DEFAULT_RANK_TOL) -> "SubspaceBasis":
        proj = np.eye(self.grid.size) - self.projector()
        return canonical_basis(self.grid, proj, gs_tol=gs_tol)


def subspace_from_span(vectors, rank_tol: float = DEFAULT_RANK_TOL) -> SubspaceBasis:
    """Orthonormalize a spanning set; rank decided by singular values."""
    vectors = list(vectors)
    if not vectors:
        raise ValueError("empty spanning set")
    grid = vectors[0].grid
    for v in vectors[1:]:
        _check_grids(grid, v.grid)
    mat = np.column_stack([v.coeffs for v in vectors])
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    if s.size == 0 or s[0] <= 0:
        raise ValueError("all spanning vectors are zero")
    rank = int(np.sum(s > rank_tol * s[0]))
    if rank == 0:
        raise ValueError("all spanning vectors are zero")
    return SubspaceBasis(grid, _fix_column_phases(grid, u[:, :rank]))


def project(S: SubspaceBasis, f: PolyVec) -> PolyVec:
    """Orthogonal projection of f onto the subspace."""
    _check_grids(S.grid, f.grid)
    return PolyVec(f.grid, S.matrix @ (S.matrix.conj().T @ f.coeffs), f.truncated)


def canonical_columns(projector: np.ndarray, order: np.ndarray,
                      gs_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Deterministic orthonormal basis of the range of an orthogonal projector.

    Gram-Schmidt over projected coordinate vectors in the given order, with
    each vector's leading coefficient made real positive, so repeated runs are
    reproducible bit for bit and monomial subspaces come out as monomials.
    Residual vectors are re-projected onto the range between passes (classical
    GS otherwise drifts out of the range), and the number of accepted vectors
    is capped by the projector's trace, which is its rank.
    """
    dim = projector.shape[0]
    rank_cap = int(round(float(np.trace(projector).real)))
    acc = np.zeros((dim, 0), dtype=complex)
    for idx in order:
        if acc.shape[1] >= rank_cap:
            break
        v = projector[:, idx].astype(complex)
        if np.linalg.norm(v) <= gs_tol:
            continue
        for _ in range(2):  # two Gram-Schmidt passes for stability
            if acc.shape[1]:
                v = v - acc @ (acc.conj().T @ v)
            v = projector @ v
        nrm = np.linalg.norm(v)
        if nrm <= gs_tol:
            continue
        v = _fix_phase(v / nrm, order)
        acc = np.column_stack([acc, v])
    return acc


def canonical_basis(grid: DegreeGrid, projector: np.ndarray,
                    gs_tol: float = DEFAULT_RANK_TOL,
                    order: np.ndarray | None = None) -> SubspaceBasis:
    """Grid-level wrapper for canonical_columns with graded-lex ordering."""
    if order is None:
        order = grid.graded_lex_order()
    return SubspaceBasis(grid, canonical_columns(projector, order, gs_tol))


def _fix_phase(v: np.ndarray, order: np.ndarray, rel: float = 1e-8) -> np.ndarray:
    mx = np.max(np.abs(v))
    if mx == 0:
        return v
    for idx in order:
        c = v[idx]
        if abs(c) > rel * mx:
            return v * (c.conjugate() / abs(c))
    return v


def _fix_column_phases(grid: DegreeGrid, mat: np.ndarray) -> np.ndarray:
    order = grid.graded_lex_order()
    out = mat.copy()
    for j in range(out.shape[1]):
        out[:, j] = _fix_phase(out[:, j], order)
    return out


def nullspace(mat: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the kernel of a dense matrix."""
    mat = np.asarray(mat, dtype=complex)
    if mat.size == 0:
        return np.eye(mat.shape[1], dtype=complex)
    _, s, vh = np.linalg.svd(mat)
    rank = int(np.sum(s > rank_tol * s[0])) if s.size else 0
    return vh[rank:].conj().T


def orthonormal_columns(mat: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the column space of a dense matrix."""
    mat = np.asarray(mat, dtype=complex)
    if mat.shape[1] == 0:
        return mat.copy()
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((mat.shape[0], 0), dtype=complex)
    rank = int(np.sum(s > rank_tol * s[0]))
    return u[:, :rank]
