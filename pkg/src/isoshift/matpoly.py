"""Matrix-polynomial multipliers on vector-valued Hardy spaces.

A ``MatPoly`` is Phi(z) = sum_k Phi_k z^k with matrix coefficients; it acts on
one-variable coefficient arrays by block convolution.  ``is_inner`` tests the
Toeplitz identity sum_k Phi_k* Phi_{k+j} = delta_{j0} I, which characterizes
isometric multipliers among polynomials.  Finite Blaschke products supply the
scalar inner functions used by the model-space and co-doubly-commuting
constructions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coeffspace import (DegreeGrid, PolyVec, SubspaceBasis, canonical_columns,
                         subspace_from_span)
from .errors import GridOverflowError
from .report import Check, VerificationReport


@dataclass(frozen=True, eq=False)
class MatPoly:
    """Matrix polynomial: tuple of (rows x cols) coefficient matrices."""

    coeffs: tuple

    def __post_init__(self):
        mats = tuple(np.asarray(c, dtype=complex) for c in self.coeffs)
        if not mats:
            raise ValueError("a matrix polynomial needs at least one coefficient")
        shape = mats[0].shape
        if len(shape) != 2 or any(m.shape != shape for m in mats):
            raise ValueError("all coefficients must be matrices of one shape")
        object.__setattr__(self, "coeffs", mats)

    @property
    def rows(self) -> int:
        return self.coeffs[0].shape[0]

    @property
    def cols(self) -> int:
        return self.coeffs[0].shape[1]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def constant(cls, mat) -> "MatPoly":
        return cls((np.asarray(mat, dtype=complex),))

    @classmethod
    def from_scalar_series(cls, series) -> "MatPoly":
        return cls(tuple(np.array([[c]], dtype=complex) for c in series))

    def trimmed(self) -> "MatPoly":
        """Drop trailing exactly-zero coefficient matrices."""
        last = 0
        for k, c in enumerate(self.coeffs):
            if np.any(c != 0):
                last = k
        return MatPoly(self.coeffs[: last + 1])

    def __matmul__(self, other: "MatPoly") -> "MatPoly":
        if self.cols != other.rows:
            raise ValueError("matrix polynomial dimension mismatch")
        out = [np.zeros((self.rows, other.cols), dtype=complex)
               for _ in range(self.degree + other.degree + 1)]
        for j, a in enumerate(self.coeffs):
            for k, b in enumerate(other.coeffs):
                out[j + k] += a @ b
        return MatPoly(tuple(out))

    def scaled(self, scalar) -> "MatPoly":
        return MatPoly(tuple(scalar * c for c in self.coeffs))

    def coeff(self, k: int) -> np.ndarray:
        if 0 <= k <= self.degree:
            return self.coeffs[k]
        return np.zeros((self.rows, self.cols), dtype=complex)

    def to_json(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "coeffs": [[[[float(x.real), float(x.imag)] for x in row] for row in mat]
                       for mat in self.coeffs],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MatPoly":
        mats = []
        for mat in obj["coeffs"]:
            mats.append(np.array([[complex(re, im) for re, im in row] for row in mat]))
        poly = cls(tuple(mats))
        if poly.rows != int(obj["rows"]) or poly.cols != int(obj["cols"]):
            raise ValueError("declared shape disagrees with coefficients")
        return poly


def matpoly_apply(phi: MatPoly, f: PolyVec, mode: str = "strict") -> PolyVec:
    """(M_Phi f)_k = sum_j Phi_j f_{k-j}; output fiber is phi.rows."""
    grid = f.grid
    if grid.nvars != 1 or grid.fiber_dim != phi.cols:
        raise ValueError("input must be one-variable with fiber_dim = cols")
    N = grid.trunc[0]
    fmat = f.coeffs.reshape(N, phi.cols)
    out = np.zeros((N, phi.rows), dtype=complex)
    lost = False
    for j, C in enumerate(phi.coeffs):
        hi = N - j
        if hi > 0:
            out[j:, :] += fmat[:hi, :] @ C.T
        # contributions that land at degree >= N
        tail_src = fmat[max(0, hi):, :]
        if tail_src.size and np.any(np.abs(tail_src @ C.T) > 0):
            lost = True
    if lost and mode == "strict":
        raise GridOverflowError("matrix polynomial application leaves the grid")
    out_grid = DegreeGrid(1, (N,), phi.rows)
    return PolyVec(out_grid, out.reshape(-1), f.truncated or lost)


def matpoly_adjoint_apply(phi: MatPoly, f: PolyVec) -> PolyVec:
    """(M_Phi* f)_k = sum_j Phi_j* f_{k+j}; exact on polynomials."""
    grid = f.grid
    if grid.nvars != 1 or grid.fiber_dim != phi.rows:
        raise ValueError("input must be one-variable with fiber_dim = rows")
    N = grid.trunc[0]
    fmat = f.coeffs.reshape(N, phi.rows)
    out = np.zeros((N, phi.cols), dtype=complex)
    for j, C in enumerate(phi.coeffs):
        if j < N:
            out[: N - j, :] += fmat[j:, :] @ C.conj()
    out_grid = DegreeGrid(1, (N,), phi.cols)
    return PolyVec(out_grid, out.reshape(-1), f.truncated)


def toeplitz_matrix(phi: MatPoly, N: int) -> np.ndarray:
    """Dense compression of M_Phi: (N*rows, N*cols) block lower Toeplitz."""
    out = np.zeros((N * phi.rows, N * phi.cols), dtype=complex)
    for j, C in enumerate(phi.coeffs):
        if j < N:
            out += np.kron(np.eye(N, k=-j), C)
    return out


def is_inner(phi: MatPoly, tol: float = 1e-10) -> VerificationReport:
    """Toeplitz test for an isometric multiplier, one residual per offset."""
    rep = VerificationReport()
    for j in range(phi.degree + 1):
        acc = np.zeros((phi.cols, phi.cols), dtype=complex)
        for k in range(phi.degree + 1 - j):
            acc += phi.coeffs[k].conj().T @ phi.coeffs[k + j]
        if j == 0:
            acc = acc - np.eye(phi.cols)
        rep.add(Check(f"inner.offset_{j}", float(np.max(np.abs(acc))), tol))
    return rep


@dataclass(frozen=True)
class FiniteBlaschke:
    """Finite Blaschke product prod_j (z - a_j)/(1 - conj(a_j) z), times a
    unimodular constant; ``zero_function`` marks the identically-zero symbol."""

    zeros: tuple = ()
    c: complex = 1.0 + 0j
    zero_function: bool = False

    def __post_init__(self):
        zs = tuple(complex(z) for z in self.zeros)
        object.__setattr__(self, "zeros", zs)
        object.__setattr__(self, "c", complex(self.c))
        if self.zero_function:
            if zs:
                raise ValueError("the zero function carries no zeros")
            return
        if any(abs(z) >= 1 for z in zs):
            raise ValueError("Blaschke zeros must lie strictly inside the disc")
        if abs(abs(self.c) - 1) > 1e-9:
            raise ValueError("the constant factor must be unimodular")

    @property
    def degree(self) -> int:
        return 0 if self.zero_function else len(self.zeros)

    def __mul__(self, other: "FiniteBlaschke") -> "FiniteBlaschke":
        if self.zero_function or other.zero_function:
            return FiniteBlaschke(zero_function=True)
        return FiniteBlaschke(self.zeros + other.zeros, self.c * other.c)

    def taylor(self, N: int) -> np.ndarray:
        """Taylor coefficients through degree N-1."""
        if N < 1:
            raise ValueError("N must be positive")
        if self.zero_function:
            return np.zeros(N, dtype=complex)
        out = np.zeros(N, dtype=complex)
        out[0] = self.c
        for a in self.zeros:
            fac = np.empty(N, dtype=complex)
            fac[0] = -a
            if N > 1:
                ab = np.conjugate(a)
                pw = ab ** np.arange(N - 1)
                fac[1:] = pw * (1 - abs(a) ** 2)
            out = np.convolve(out, fac)[:N]
        return out

    def tail_scale(self, N: int) -> float:
        """Size scale of the discarded Taylor tail: max |a_j|^N."""
        if self.zero_function or not self.zeros:
            return 0.0
        return float(max(abs(a) for a in self.zeros) ** N)

    def window_shift(self, budget: float = 1e-9) -> int:
        """Degree margin after which multiplying by the symbol stays on grid
        up to the given tail budget.

        Monomial factors shift degrees exactly; zeros away from the origin
        contribute a geometric tail, so the margin grows like log(budget) /
        log(max |a_j|).
        """
        if self.zero_function:
            return 0
        r = max((abs(a) for a in self.zeros), default=0.0)
        if r == 0.0:
            return self.degree
        return max(self.degree, int(math.ceil(math.log(budget) / math.log(r))))

    def to_json(self) -> dict:
        if self.zero_function:
            return {"zero_function": True}
        return {"zeros": [[z.real, z.imag] for z in self.zeros],
                "c": [self.c.real, self.c.imag]}

    @classmethod
    def from_json(cls, obj: dict) -> "FiniteBlaschke":
        if obj.get("zero_function"):
            return cls(zero_function=True)
        zeros = tuple(complex(re, im) for re, im in obj.get("zeros", []))
        c = obj.get("c", [1.0, 0.0])
        return cls(zeros, complex(c[0], c[1]))

    @classmethod
    def monomial(cls, m: int) -> "FiniteBlaschke":
        return cls((0.0,) * m)


def blaschke_taylor(phi: FiniteBlaschke, N: int) -> PolyVec:
    """Truncated Taylor expansion as a scalar one-variable PolyVec."""
    grid = DegreeGrid(1, (N,), 1)
    return PolyVec(grid, phi.taylor(N))


def conv_matrix(series: np.ndarray, N: int) -> np.ndarray:
    """Lower-triangular Toeplitz compression of multiplication by a series."""
    series = np.asarray(series, dtype=complex)[:N]
    out = np.zeros((N, N), dtype=complex)
    for j, c in enumerate(series):
        if c != 0:
            out += c * np.eye(N, k=-j)
    return out


def model_space_basis(phi: FiniteBlaschke, N: int,
                      tol: float = 1e-8) -> tuple[SubspaceBasis, VerificationReport]:
    """Orthonormal basis of Q_phi = H^2 - phi H^2 from truncated Szego kernels.

    Repeated zeros are handled with kernel-derivative chains; the report
    compares the resulting projector against I - M_phi M_phi* on the grid.
    """
    if phi.zero_function:
        raise ValueError("the zero function has no model space basis here")
    grid = DegreeGrid(1, (N,), 1)
    rep = VerificationReport()
    if phi.degree == 0:
        basis = SubspaceBasis(grid, np.zeros((N, 0), dtype=complex))
        rep.add(Check("model_space.projector", 0.0, tol, detail="degree zero"))
        return basis, rep
    if N <= phi.degree:
        raise ValueError("truncation too small for the Blaschke degree")
    groups: list[tuple[complex, int]] = []
    for a in phi.zeros:
        for i, (b, mult) in enumerate(groups):
            if abs(a - b) <= 1e-12:
                groups[i] = (b, mult + 1)
                break
        else:
            groups.append((a, 1))
    ks = np.arange(N)
    vectors = []
    for a, mult in groups:
        ab = np.conjugate(a)
        for r in range(mult):
            v = np.zeros(N, dtype=complex)
            if a == 0:
                v[r] = 1.0
            else:
                fall = np.ones(N)
                for t in range(r):
                    fall = fall * (ks - t)
                good = ks >= r
                v[good] = fall[good] * ab ** (ks[good] - r)
            vectors.append(PolyVec(grid, v))
    basis = subspace_from_span(vectors)
    if basis.dim != phi.degree:
        raise ValueError("kernel chain lost rank at this truncation; increase N")
    proj_direct = basis.projector()
    C = conv_matrix(phi.taylor(N), N)
    proj_formula = np.eye(N) - C @ C.conj().T
    resid = float(np.max(np.abs(proj_direct - proj_formula)))
    rep.add(Check("model_space.projector", resid, tol,
                  detail=f"tail scale {phi.tail_scale(N):.2e}"))
    return basis, rep


def shifted_range_basis(phi: FiniteBlaschke, N: int) -> np.ndarray:
    """Column basis of phi*H^2 on the grid, as the complement of Q_phi.

    The truncated convolution matrix is full-rank triangular whenever
    phi(0) != 0, so the honest grid model of the range is the orthogonal
    complement of the model space.  Returns the empty basis for the zero
    function (its range is {0}).
    """
    if phi.zero_function:
        return np.zeros((N, 0), dtype=complex)
    basis, _ = model_space_basis(phi, N)
    proj = np.eye(N) - basis.matrix @ basis.matrix.conj().T
    return canonical_columns(proj, np.arange(N))
