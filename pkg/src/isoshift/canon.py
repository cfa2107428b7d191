"""Wandering subspaces, the Wold-von Neumann map and canonical model extraction.

Given commuting isometries (V_1, ..., V_n) whose product V is a shift, the
wandering subspace W = ker V* carries unitaries

    U_i = (P_W V_i + V~_i*)|_W          (V~_i = product of the V_j, j != i)

and projections P_i = I - P_{W(V~_i)} such that Phi_i(z) = U_i(P_i^perp + zP_i)
satisfies Pi_V V_i = M_{Phi_i} Pi_V under the Wold-von Neumann map Pi_V.  At a
finite truncation every operator is a compression onto the degree grid, so all
identities are asserted on a validity window: inputs whose images stay on the
grid through the whole operator word.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bcl import BCLTuple, tuple_symbols, validate_tuple
from .coeffspace import (DegreeGrid, PolyVec, SubspaceBasis, canonical_columns,
                         nullspace, shift_adjoint_apply, shift_apply,
                         support_in_mask)
from .errors import GridMismatchError, NotAShiftError, NotCommutingError
from .matpoly import MatPoly, matpoly_adjoint_apply, matpoly_apply, toeplitz_matrix
from .report import Check, VerificationReport


class IsometryOracle:
    """An isometry presented by apply/adjoint-apply callables on a fixed grid.

    ``shift`` bounds the per-variable degree increase of one application (used
    to compute validity windows); ``domain`` restricts the operator to an
    invariant subspace, in which case all matrices are taken in the domain's
    coordinates.  Callables use lossy truncation; windows account for it.
    """

    def __init__(self, grid, apply, adjoint_apply, shift, tag,
                 domain: SubspaceBasis | None = None):
        self.grid = grid
        self.apply = apply
        self.adjoint_apply = adjoint_apply
        self.shift = np.asarray(shift, dtype=int)
        self.tag = tag
        self.domain = domain
        self._mat = None
        self._adj = None

    @property
    def dim(self) -> int:
        return self.domain.dim if self.domain is not None else self.grid.size

    def _columns(self, fn) -> np.ndarray:
        if self.domain is None:
            src = np.eye(self.grid.size, dtype=complex)
        else:
            src = self.domain.matrix
        out = np.empty((self.grid.size, src.shape[1]), dtype=complex)
        for j in range(src.shape[1]):
            out[:, j] = fn(PolyVec(self.grid, src[:, j])).coeffs
        if self.domain is None:
            return out
        return self.domain.matrix.conj().T @ out

    def matrix(self) -> np.ndarray:
        if self._mat is None:
            self._mat = self._columns(self.apply)
        return self._mat

    def adjoint_matrix(self) -> np.ndarray:
        if self._adj is None:
            self._adj = self._columns(self.adjoint_apply)
        return self._adj

    def window_cols(self, shift) -> np.ndarray:
        """Coordinate columns whose image under a word of this shift stays on grid."""
        mask = self.grid.window_mask(shift)
        if self.domain is None:
            return mask
        return support_in_mask(self.domain.matrix, mask)


def coordinate_shift_oracle(grid: DegreeGrid, var: int,
                            domain: SubspaceBasis | None = None) -> IsometryOracle:
    shift = np.zeros(grid.nvars, dtype=int)
    shift[var - 1] = 1
    tag = f"M_z{var}" + ("" if domain is None else " restricted")
    return IsometryOracle(grid,
                          lambda f: shift_apply(var, f, mode="lossy"),
                          lambda f: shift_adjoint_apply(var, f),
                          shift, tag, domain)


def matpoly_oracle(phi: MatPoly, grid: DegreeGrid) -> IsometryOracle:
    if grid.nvars != 1 or grid.fiber_dim != phi.cols or phi.rows != phi.cols:
        raise ValueError("matpoly oracle needs a square symbol on a matching 1-var grid")
    return IsometryOracle(grid,
                          lambda f: matpoly_apply(phi, f, mode="lossy"),
                          lambda f: matpoly_adjoint_apply(phi, f),
                          np.array([phi.degree]), f"M_Phi deg {phi.degree}")


def product_oracle(oracles, tag: str | None = None) -> IsometryOracle:
    oracles = list(oracles)
    grid = oracles[0].grid
    domain = oracles[0].domain

    def apply(f):
        for o in reversed(oracles):
            f = o.apply(f)
        return f

    def adjoint(f):
        for o in oracles:
            f = o.adjoint_apply(f)
        return f

    shift = np.sum([o.shift for o in oracles], axis=0)
    return IsometryOracle(grid, apply, adjoint, shift,
                          tag or "*".join(o.tag for o in oracles), domain)


@dataclass(frozen=True, eq=False)
class WanderingData:
    """W = ker V* with the per-factor wandering subspaces inside it."""

    basis: SubspaceBasis                       # W, ambient coefficients
    sub: tuple                                 # W(V_i)
    cosub: tuple                               # W(V~_i)
    cosub_projections: tuple                   # P_{W(V~_i)} in the W basis


@dataclass(frozen=True, eq=False)
class WoldMap:
    """Matrix of Pi_V from the source coordinates onto a truncated H^2_W(D)."""

    matrix: np.ndarray
    target_grid: DegreeGrid
    covered_dim: int
    uncovered_dim: int
    layer_count: int
    coverage_diag: np.ndarray


@dataclass(frozen=True, eq=False)
class ExtractedModel:
    tuple: BCLTuple
    symbols: list
    wandering: WanderingData
    wold: WoldMap
    report: VerificationReport
    grid: DegreeGrid
    interior: np.ndarray                       # W columns inside the interior window
    _mats: list = field(repr=False, default=None)
    _adjs: list = field(repr=False, default=None)
    _wcoords: np.ndarray = field(repr=False, default=None)
    _oracles: list = field(repr=False, default=None)


def _kernel_columns(adj_mat: np.ndarray, order: np.ndarray, rank_tol: float) -> np.ndarray:
    null = nullspace(adj_mat, rank_tol)
    if null.shape[1] == 0:
        return null
    return canonical_columns(null @ null.conj().T, order, gs_tol=0.5 * rank_tol ** 0.5)


def wandering_subspace(V: IsometryOracle, rank_tol: float = 1e-8
                       ) -> tuple[SubspaceBasis, VerificationReport]:
    """Orthonormal basis of ker V* on the grid, with per-vector residuals."""
    adj = V.adjoint_matrix()
    order = (V.grid.graded_lex_order() if V.domain is None
             else np.arange(V.dim))
    B = _kernel_columns(adj, order, rank_tol)
    if B.shape[1] == 0:
        raise NotAShiftError(f"{V.tag}: no wandering vectors on the grid")
    amb = B if V.domain is None else V.domain.matrix @ B
    rep = VerificationReport()
    res = float(np.max(np.linalg.norm(adj @ B, axis=0)))
    rep.add(Check("wandering.kernel_residual", res, 1e-10,
                  detail=f"dim W = {B.shape[1]} for {V.tag}"))
    return SubspaceBasis(V.grid, amb), rep


def _wold_from_matrix(A: np.ndarray, B: np.ndarray) -> WoldMap:
    # a layer vector extends exactly iff the compression preserves its norm
    # (the underlying operator is an isometry, so lost norm is truncated mass)
    dim, w = B.shape[0], B.shape[1]
    alive = [B[:, j] for j in range(w)]
    alive_idx = list(range(w))
    rows: list[tuple[int, int, np.ndarray]] = []
    cov = np.zeros(dim)
    m = 0
    while alive and m <= dim:
        for j, col in zip(alive_idx, alive):
            rows.append((m, j, col))
            cov += np.abs(col) ** 2
        nxt, nxt_idx = [], []
        for j, col in zip(alive_idx, alive):
            new = A @ col
            if abs(np.linalg.norm(new) - 1.0) <= 1e-12:
                nxt.append(new)
                nxt_idx.append(j)
        alive, alive_idx = nxt, nxt_idx
        m += 1
    target = DegreeGrid(1, (m + 1,), w)
    Pi = np.zeros((target.size, dim), dtype=complex)
    for mm, j, col in rows:
        Pi[mm * w + j, :] = col.conj()
    covered = len(rows)
    return WoldMap(Pi, target, covered, dim - covered, m, cov)


def wold_map(V: IsometryOracle, rank_tol: float = 1e-8) -> WoldMap:
    """Assemble Pi_V by expanding V^m over the wandering basis while exact."""
    basis, _ = wandering_subspace(V, rank_tol)
    B = (basis.matrix if V.domain is None
         else V.domain.matrix.conj().T @ basis.matrix)
    return _wold_from_matrix(V.matrix(), B)


def extract_model(oracles, tol: float = 1e-10, rank_tol: float = 1e-8) -> ExtractedModel:
    """Canonical model tuple of a concretely presented commuting isometry tuple.

    Builds W = ker V*, the unitaries U_i = (P_W V_i + V~_i*)|_W, the
    projections P_i = I - P_{W(V~_i)}, and verifies the model conditions, the
    Wold intertwinings Pi_V V_i = M_{Phi_i} Pi_V, and V_i P_{W(V~_i)} = P_W V_i
    on the interior window.
    """
    oracles = list(oracles)
    if len(oracles) < 2:
        raise ValueError("need at least two isometries")
    grid = oracles[0].grid
    domain = oracles[0].domain
    for o in oracles[1:]:
        if o.grid != grid or o.domain is not domain:
            raise GridMismatchError("oracles must share one grid and domain")
    n = len(oracles)
    mats = [o.matrix() for o in oracles]
    adjs = [o.adjoint_matrix() for o in oracles]
    order = grid.graded_lex_order() if domain is None else np.arange(oracles[0].dim)
    total_shift = np.sum([o.shift for o in oracles], axis=0)

    rep = VerificationReport()
    for i in range(n):
        for j in range(i + 1, n):
            win = oracles[0].window_cols(oracles[i].shift + oracles[j].shift)
            diff = (mats[i] @ mats[j] - mats[j] @ mats[i])[:, win]
            res = float(np.max(np.abs(diff))) if diff.size else 0.0
            if res > tol:
                raise NotCommutingError(
                    f"{oracles[i].tag} and {oracles[j].tag}: commutator {res:.2e}")
            rep.add(Check(f"commuting.{i + 1}_{j + 1}", res, tol, "window"))

    def chain(ms):
        out = None
        for m in ms:
            out = m if out is None else out @ m
        return out if out is not None else np.eye(oracles[0].dim, dtype=complex)

    A = chain(mats)
    Aadj = chain(list(reversed(adjs)))
    B = _kernel_columns(Aadj, order, rank_tol)
    w = B.shape[1]
    if w == 0:
        raise NotAShiftError("the product isometry has no wandering vectors on the grid")
    P_W = B @ B.conj().T

    sub_bases, cosub_bases, tilde_mats, tilde_adjs = [], [], [], []
    for i in range(n):
        others = [k for k in range(n) if k != i]
        tilde_mats.append(chain([mats[k] for k in others]))
        tilde_adjs.append(chain([adjs[k] for k in reversed(others)]))
        sub_bases.append(_kernel_columns(adjs[i], order, rank_tol))
        cosub_bases.append(_kernel_columns(tilde_adjs[i], order, rank_tol))

    Us, Ps, cosub_proj = [], [], []
    for i in range(n):
        Us.append(B.conj().T @ (mats[i] + tilde_adjs[i]) @ B)
        inW = B.conj().T @ cosub_bases[i]
        Pt = inW @ inW.conj().T
        cosub_proj.append(Pt)
        Ps.append(np.eye(w) - Pt)
    model_tuple = BCLTuple(tuple(Us), tuple(Ps))
    symbols = tuple_symbols(model_tuple)

    interior_mask = oracles[0].window_cols(2 * total_shift)
    wcols = support_in_mask(B, interior_mask)
    for i in range(n):
        res = max(
            float(np.max(np.abs((np.eye(B.shape[0]) - P_W) @ sub_bases[i])))
            if sub_bases[i].size else 0.0,
            float(np.max(np.abs((np.eye(B.shape[0]) - P_W) @ cosub_bases[i])))
            if cosub_bases[i].size else 0.0)
        rep.add(Check(f"wandering.containment.{i + 1}", res, tol,
                      detail="W(V_i) and W(V~_i) inside W"))
    rep.merge(validate_tuple(model_tuple, tol, window_cols=wcols), prefix="model")

    for i in range(n):
        vt_cols = support_in_mask(B, oracles[0].window_cols(oracles[i].shift))
        Bv = B[:, vt_cols]
        diff = mats[i] @ (cosub_bases[i] @ (cosub_bases[i].conj().T @ Bv)) - P_W @ (mats[i] @ Bv)
        rep.add(Check(f"wandering.shift_compat.{i + 1}",
                      float(np.max(np.abs(diff))) if diff.size else 0.0, tol, "window",
                      detail="V_i P_{W(V~_i)} = P_W V_i on W"))

    # orthogonal splittings of W observed rather than assumed
    for i in range(n):
        ok = support_in_mask(sub_bases[i],
                             oracles[0].window_cols(total_shift - oracles[i].shift))
        t1 = tilde_mats[i] @ sub_bases[i][:, ok]
        split1 = t1 @ t1.conj().T + cosub_bases[i] @ cosub_bases[i].conj().T
        okc = support_in_mask(cosub_bases[i], oracles[0].window_cols(oracles[i].shift))
        t2 = mats[i] @ cosub_bases[i][:, okc]
        split2 = sub_bases[i] @ sub_bases[i].conj().T + t2 @ t2.conj().T
        Bw = B[:, wcols]
        r1 = float(np.max(np.abs((P_W - split1) @ Bw))) if Bw.size else 0.0
        r2 = float(np.max(np.abs((P_W - split2) @ Bw))) if Bw.size else 0.0
        rep.add(Check(f"wandering.split_tilde.{i + 1}", r1, tol, "interior",
                      detail="W = V~_i W(V_i) + W(V~_i)"))
        rep.add(Check(f"wandering.split_direct.{i + 1}", r2, tol, "interior",
                      detail="W = W(V_i) + V_i W(V~_i)"))

    wold = _wold_from_matrix(A, B)
    covered = (1.0 - np.real(wold.coverage_diag)) <= 1e-10
    for i in range(n):
        qual = (oracles[0].window_cols(oracles[i].shift) & covered
                & support_in_mask(mats[i], covered))
        phi_mat = toeplitz_matrix(symbols[i], wold.target_grid.trunc[0])
        diff = (wold.matrix @ mats[i] - phi_mat @ wold.matrix)[:, qual]
        rep.add(Check(f"wold.intertwine.{i + 1}",
                      float(np.max(np.abs(diff))) if diff.size else 0.0, tol, "window",
                      detail=f"Pi_V V_{i + 1} = M_Phi_{i + 1} Pi_V"))
    rep.add(Check("wold.coverage", 0.0, 0.5, "full",
                  detail=f"uncovered dimension {wold.uncovered_dim} of {B.shape[0]}"))

    amb = B if domain is None else domain.matrix @ B
    sub_amb = tuple(SubspaceBasis(grid, b if domain is None else domain.matrix @ b)
                    for b in sub_bases)
    cosub_amb = tuple(SubspaceBasis(grid, b if domain is None else domain.matrix @ b)
                      for b in cosub_bases)
    wandering = WanderingData(SubspaceBasis(grid, amb), sub_amb, cosub_amb,
                              tuple(cosub_proj))
    return ExtractedModel(model_tuple, symbols, wandering, wold, rep, grid, wcols,
                          _mats=mats, _adjs=adjs, _wcoords=B, _oracles=oracles)


def projection_conjugation_check(model: ExtractedModel, I, j: int,
                                 tol: float = 1e-10) -> list[Check]:
    """Verify the conjugated-projection product formula for an index set I.

    For j not in I (1-based indices), checks in the W basis that

      (prod_{i in I} U_i)* P_j (prod_{i in I} U_i)
        = prod_{i in I^c \\ {j}} V_i V_i* |_W  -  prod_{i in I^c} V_i V_i* |_W,

    together with the product formula for prod_{i in I} U_i itself.
    """
    I = sorted(int(i) for i in I)
    n = model.tuple.n
    if j in I or not 1 <= j <= n:
        raise ValueError("j must lie outside I")
    B = model._wcoords
    mats, adjs = model._mats, model._adjs
    w = B.shape[1]

    Uprod = np.eye(w, dtype=complex)
    for i in I:
        Uprod = Uprod @ model.tuple.U[i - 1]
    left = Uprod.conj().T @ model.tuple.P[j - 1] @ Uprod

    def vv(idxs):
        out = np.eye(B.shape[0], dtype=complex)
        for k in idxs:
            out = out @ mats[k - 1]
        back = [adjs[k - 1] for k in reversed(idxs)]
        for m in back:
            out = out @ m
        return out

    comp = [k for k in range(1, n + 1) if k not in I]
    comp_no_j = [k for k in comp if k != j]
    right = B.conj().T @ (vv(comp_no_j) - vv(comp)) @ B

    Amats = np.eye(B.shape[0], dtype=complex)
    for i in I:
        Amats = Amats @ mats[i - 1]
    Aadjs = np.eye(B.shape[0], dtype=complex)
    for k in reversed(comp):
        Aadjs = Aadjs @ adjs[k - 1]
    uprod_formula = B.conj().T @ (Amats + Aadjs) @ B

    wcols = model.interior
    iname = "{" + ",".join(str(i) for i in I) + "}"
    d1 = (left - right)[:, wcols]
    d2 = (Uprod - uprod_formula)[:, wcols]
    return [
        Check(f"conjugated_projection.I={iname}.j={j}",
              float(np.max(np.abs(d1))) if d1.size else 0.0, tol, "interior"),
        Check(f"u_product.I={iname}",
              float(np.max(np.abs(d2))) if d2.size else 0.0, tol, "interior",
              detail="prod U_i = (P_W prod_I V_i + prod_{I^c} V_i*)|_W"),
    ]
