"""Beurling-Lax-Halmos factorization of joint invariant subspaces.

For a model tuple acting on H^2_W(D), a jointly invariant subspace S is
Theta H^2_{W*}(D) for an inner Theta whose columns span the wandering part
S - zS, and each symbol satisfies Phi_j Theta = Theta Psi_j for a model
symbol Psi_j of degree at most one.  The Psi_j are recovered by coefficient
matching (a least-squares solve; Theta inner makes the normal matrix the
identity), and two factorizations of one subspace are linked by a constant
unitary tau with Theta_1 = Theta_2 tau.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bcl import BCLTuple, tuple_symbols
from .canon import extract_model, matpoly_oracle
from .coeffspace import (DegreeGrid, canonical_columns, orthonormal_columns,
                         shift_matrix)
from .errors import GridMismatchError, NotInvariantError, PreconditionError
from .matpoly import MatPoly, is_inner, toeplitz_matrix
from .report import Check, VerificationReport


@dataclass(frozen=True, eq=False)
class InvariantSubspaceSpec:
    """A joint invariant subspace given by generators or by an inner symbol."""

    ambient: BCLTuple
    trunc: int
    generators: tuple = ()
    theta: MatPoly | None = None

    def __post_init__(self):
        if bool(self.generators) == (self.theta is not None):
            raise ValueError("give either generators or a symbol, not both")
        object.__setattr__(self, "generators", tuple(self.generators))
        for g in self.generators:
            if g.grid != self.grid:
                raise GridMismatchError("generators must live on the ambient grid")
        if self.theta is not None and self.theta.rows != self.ambient.e:
            raise ValueError("symbol rows must match the ambient fiber")

    @property
    def grid(self) -> DegreeGrid:
        return DegreeGrid(1, (self.trunc,), self.ambient.e)


def invariant_closure(spec: InvariantSubspaceSpec,
                      rank_tol: float = 1e-8) -> np.ndarray:
    """Span of the generators under z and all Phi_i, as compressions.

    Degree overflow is truncated (the only sensible semantics for symbols with
    infinite Taylor expansions); tail pressure against the truncation boundary
    is reported by blh_theta through the wandering basis's top-degree mass.
    """
    grid = spec.grid
    N = grid.trunc[0]
    ops = [shift_matrix(grid, 1)]
    ops += [toeplitz_matrix(phi, N) for phi in tuple_symbols(spec.ambient)]
    basis = orthonormal_columns(
        np.column_stack([g.coeffs for g in spec.generators]), rank_tol)
    if basis.shape[1] == 0:
        raise ValueError("generators span the zero subspace")
    for _ in range(grid.size):
        bigger = orthonormal_columns(
            np.column_stack([basis] + [op @ basis for op in ops]), rank_tol)
        if bigger.shape[1] == basis.shape[1]:
            return bigger
        basis = bigger
    return basis


def _subspace_columns(spec: InvariantSubspaceSpec,
                      rank_tol: float = 1e-8) -> np.ndarray:
    grid = spec.grid
    if spec.theta is not None:
        T = toeplitz_matrix(spec.theta, grid.trunc[0])
        return orthonormal_columns(T, rank_tol)
    return invariant_closure(spec, rank_tol)


def blh_theta(spec: InvariantSubspaceSpec, tol: float = 1e-8,
              rank_tol: float = 1e-8) -> tuple[MatPoly, VerificationReport]:
    """Inner symbol Theta with S = Theta H^2 and column basis S - zS.

    The report carries the innerness residuals, the coverage residual between
    the projectors onto S and onto Theta H^2, the invariance residuals of S
    under z and the ambient symbols, and the truncation tail mass.
    """
    grid = spec.grid
    N, e = grid.trunc[0], grid.fiber_dim
    rep = VerificationReport()
    Bs = _subspace_columns(spec, rank_tol)
    Z = shift_matrix(grid, 1)
    zbasis = orthonormal_columns(Z @ Bs, rank_tol)
    rem = Bs - zbasis @ (zbasis.conj().T @ Bs)
    wstar = orthonormal_columns(rem, rank_tol)
    if wstar.shape[1] == 0:
        raise PreconditionError("S - zS is numerically trivial on this grid")
    Bw = canonical_columns(wstar @ wstar.conj().T, grid.graded_lex_order(),
                           gs_tol=rank_tol ** 0.5 * 0.5)
    w = Bw.shape[1]
    theta = MatPoly(tuple(Bw.reshape(N, e, w)[k] for k in range(N))).trimmed()

    rep.merge(is_inner(theta, tol), prefix="theta")
    T = toeplitz_matrix(theta, N)
    Bt = orthonormal_columns(T, rank_tol)
    cover = float(np.max(np.abs(Bs @ Bs.conj().T - Bt @ Bt.conj().T)))
    rep.add(Check("theta.coverage", cover, tol,
                  detail=f"projector gap between S and Theta*H^2, dim W* = {w}"))
    P_perp = np.eye(grid.size) - Bs @ Bs.conj().T
    ops = [Z] + [toeplitz_matrix(phi, N) for phi in tuple_symbols(spec.ambient)]
    names = ["z"] + [f"phi_{i + 1}" for i in range(spec.ambient.n)]
    for name, op in zip(names, ops):
        res = float(np.max(np.abs(P_perp @ (op @ Bs))))
        rep.add(Check(f"invariance.{name}", res, tol))
    top = Bw.reshape(N, e, w)[N - 1]
    tail = float(np.max(np.sum(np.abs(top) ** 2, axis=0))) if w else 0.0
    rep.add(Check("theta.tail_mass", tail, tol,
                  detail="wandering-basis mass at the top degree of the grid"))
    return theta, rep


def psi_from_theta(theta: MatPoly, phi: MatPoly, tol: float = 1e-8,
                   trunc: int | None = None) -> tuple[MatPoly, VerificationReport]:
    """Degree-<=1 solution Psi of Theta Psi = Phi Theta by coefficient matching.

    Requires Theta inner and Phi Theta H^2 inside Theta H^2 on the grid; an
    inclusion residual above tolerance raises, since then S is not invariant
    and no model symbol exists.
    """
    rep = VerificationReport()
    inner = is_inner(theta, tol)
    rep.merge(inner, prefix="theta")
    if not inner.passed:
        raise PreconditionError("Theta is not inner at this tolerance")
    N = trunc if trunc is not None else theta.degree + phi.degree + 3
    T = toeplitz_matrix(theta, N)
    Bt = orthonormal_columns(T)
    F = toeplitz_matrix(phi, N)
    incl = float(np.max(np.abs((np.eye(N * theta.rows) - Bt @ Bt.conj().T) @ (F @ Bt))))
    rep.add(Check("inclusion", incl, tol, detail="Phi Theta H^2 inside Theta H^2"))
    if incl > tol:
        raise NotInvariantError(f"range of Theta is not Phi-invariant: residual {incl:.2e}")

    g = theta.degree
    w = theta.cols
    rows = []
    rhs = []
    for k in range(g + max(1, phi.degree) + 1):
        rows.append(np.hstack([theta.coeff(k), theta.coeff(k - 1)]))
        rhs.append(sum(phi.coeff(j) @ theta.coeff(k - j)
                       for j in range(phi.degree + 1)))
    A = np.vstack(rows)
    Bmat = np.vstack(rhs)
    X, *_ = np.linalg.lstsq(A, Bmat, rcond=None)
    psi = MatPoly((X[:w, :], X[w:, :]))
    rep.add(Check("match", float(np.max(np.abs(A @ X - Bmat))), tol,
                  detail="coefficient residual of Theta Psi = Phi Theta"))
    rep.merge(is_inner(psi, tol), prefix="psi")
    return psi, rep


@dataclass(frozen=True, eq=False)
class FactorResult:
    theta: MatPoly
    psis: tuple
    quotient_tuple: BCLTuple | None
    report: VerificationReport


def factor_subspace(spec: InvariantSubspaceSpec, tol: float = 1e-8,
                    model_trunc: int = 8) -> FactorResult:
    """Full factorization: Theta, all Psi_j, and the model tuple they induce.

    After solving every Psi_j, the product Psi_1...Psi_n is checked against
    z*I and the canonical model of (M_Psi_1, ..., M_Psi_n) is extracted and
    validated, certifying that the quotient tuple is again a model tuple.
    """
    theta, rep = blh_theta(spec, tol)
    psis = []
    for j, phi in enumerate(tuple_symbols(spec.ambient), start=1):
        psi, prep = psi_from_theta(theta, phi, tol, trunc=spec.trunc)
        psis.append(psi)
        rep.merge(prep, prefix=f"psi_{j}")
    prod = None
    for psi in psis:
        prod = psi if prod is None else prod @ psi
    eye = np.eye(theta.cols)
    res = 0.0
    for k in range(prod.degree + 1):
        target = eye if k == 1 else 0.0
        res = max(res, float(np.max(np.abs(prod.coeff(k) - target))))
    rep.add(Check("psi_product", res, tol, detail="Psi_1...Psi_n against z*I"))

    quotient = None
    try:
        grid = DegreeGrid(1, (model_trunc,), theta.cols)
        model = extract_model([matpoly_oracle(psi, grid) for psi in psis], tol=10 * tol)
        quotient = model.tuple
        rep.merge(model.report, prefix="quotient")
    except PreconditionError as exc:
        rep.add(Check("quotient.extraction", 1.0, tol, detail=str(exc)))
    return FactorResult(theta, tuple(psis), quotient, rep)


def uniqueness_tau(theta1: MatPoly, theta2: MatPoly,
                   psis1=None, psis2=None, tol: float = 1e-8,
                   trunc: int | None = None):
    """Constant unitary tau with theta1 = theta2 tau, if the ranges agree.

    Also checks tau Psi_i = Psi^_i tau for supplied symbol lists.  Returns
    (tau or None, report); None means no unitary link exists at tolerance,
    i.e. the two symbols do not represent the same subspace.
    """
    rep = VerificationReport()
    if theta1.rows != theta2.rows:
        raise ValueError("symbols must share their target fiber")
    N = trunc if trunc is not None else max(theta1.degree, theta2.degree) + 2
    B1 = orthonormal_columns(toeplitz_matrix(theta1, N))
    B2 = orthonormal_columns(toeplitz_matrix(theta2, N))
    cover = float(np.max(np.abs(B1 @ B1.conj().T - B2 @ B2.conj().T)))
    rep.add(Check("tau.same_range", cover, tol,
                  detail="projector gap between the two ranges"))

    g = max(theta1.degree, theta2.degree)
    A = np.vstack([theta2.coeff(k) for k in range(g + 1)])
    Bmat = np.vstack([theta1.coeff(k) for k in range(g + 1)])
    tau, *_ = np.linalg.lstsq(A, Bmat, rcond=None)
    match = float(np.max(np.abs(A @ tau - Bmat)))
    rep.add(Check("tau.match", match, tol, detail="theta1 - theta2*tau"))
    unit = float(np.max(np.abs(tau.conj().T @ tau - np.eye(tau.shape[1]))))
    rep.add(Check("tau.unitary", unit, tol))
    if psis1 is not None and psis2 is not None:
        for i, (p1, p2) in enumerate(zip(psis1, psis2), start=1):
            res = 0.0
            for k in range(max(p1.degree, p2.degree) + 1):
                res = max(res, float(np.max(np.abs(tau @ p1.coeff(k)
                                                   - p2.coeff(k) @ tau))))
            rep.add(Check(f"tau.intertwine_psi_{i}", res, tol))
    if match > tol or unit > tol or cover > tol:
        return None, rep
    return tau, rep
