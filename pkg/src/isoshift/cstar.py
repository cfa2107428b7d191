"""Finite-codimension invariant subspaces of H^2(D^n) and their C*-algebras.

A co-doubly commuting subspace is S_Phi = (Q_{phi_1} x ... x Q_{phi_n})^perp
for per-variable inner functions phi_i; it has finite codimension exactly when
every phi_i is a finite Blaschke product, and then codim = prod deg phi_i.
The module verifies, at a finite truncation:

  * the projection formula P_{S_Phi} = I - prod_i (I - M_{phi_i} M_{phi_i}*),
  * the finite-rank commutator [R_{z_i}*, R_{z_j}] = P_S M_{z_j} P_{S^perp}
    M_{z_i}*|_S for invariant S,
  * word compressions between nested invariant subspaces,
  * an explicit unitary H^2(D^n) -> S_Phi conjugating the compressed shifts
    on S_Phi into the Toeplitz algebra of H^2(D^n), identity by identity,
  * an explicit unitary S_Phi -> S for any invariant S containing S_Phi,
  * and their composition, giving the unitary equivalence of the C*-algebras
    attached to S and to H^2(D^n).

Every identity is asserted on a validity window (inputs whose images stay on
the grid) and every finite-rank correction term is extracted with its rank
checked against the dimension of the space it comes from.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field

import numpy as np

from .coeffspace import (DegreeGrid, SubspaceBasis, canonical_columns,
                         op_on_variable, shift_matrix, support_in_mask)
from .errors import (GridTooSmallError, LayoutError, NotInvariantError,
                     PreconditionError)
from .matpoly import FiniteBlaschke, conv_matrix, model_space_basis
from .report import Check, VerificationReport, evaluate_checks


@dataclass(frozen=True)
class CoDoublyCommutingSpec:
    """S_Phi data: one inner-or-zero symbol per variable plus the truncation."""

    phis: tuple
    trunc: tuple

    def __post_init__(self):
        object.__setattr__(self, "phis", tuple(self.phis))
        object.__setattr__(self, "trunc", tuple(int(t) for t in self.trunc))
        if len(self.phis) != len(self.trunc) or len(self.phis) < 2:
            raise ValueError("need one symbol and one degree bound per variable, n >= 2")

    @property
    def n(self) -> int:
        return len(self.phis)

    @property
    def grid(self) -> DegreeGrid:
        return DegreeGrid(self.n, self.trunc, 1)

    @property
    def all_finite(self) -> bool:
        return not any(p.zero_function for p in self.phis)

    @property
    def codim(self) -> int | None:
        if not self.all_finite:
            return None
        out = 1
        for p in self.phis:
            out *= p.degree
        return out

    def to_json(self) -> dict:
        return {"n": self.n, "trunc": list(self.trunc),
                "phis": [p.to_json() for p in self.phis]}

    @classmethod
    def from_json(cls, obj: dict) -> "CoDoublyCommutingSpec":
        return cls(tuple(FiniteBlaschke.from_json(p) for p in obj["phis"]),
                   tuple(obj["trunc"]))


def permuted_spec(spec: CoDoublyCommutingSpec, perm) -> CoDoublyCommutingSpec:
    """Relabel variables by a permutation (for symmetric-form experiments)."""
    perm = list(perm)
    return CoDoublyCommutingSpec(tuple(spec.phis[p] for p in perm),
                                 tuple(spec.trunc[p] for p in perm))


@dataclass(frozen=True, eq=False)
class FiniteRankResidual:
    """Low-rank correction operator with its SVD certificate."""

    svals: np.ndarray
    left: np.ndarray
    right: np.ndarray
    rank: int
    norm: float

    @classmethod
    def from_matrix(cls, mat: np.ndarray, rank_rel: float = 1e-8,
                    floor: float = 1e-12) -> "FiniteRankResidual":
        if mat.size == 0:
            return cls(np.zeros(0), mat.copy(), mat.conj().T.copy(), 0, 0.0)
        u, s, vh = np.linalg.svd(mat)
        if s.size == 0 or s[0] <= floor:
            rank = 0
        else:
            rank = int(np.sum(s > rank_rel * s[0]))
        left = u[:, :rank] * s[:rank]
        right = vh[:rank, :]
        return cls(s, left, right, rank, float(s[0]) if s.size else 0.0)

    def reconstruction_residual(self, mat: np.ndarray) -> float:
        approx = self.left @ self.right if self.rank else np.zeros_like(mat)
        return float(np.max(np.abs(mat - approx))) if mat.size else 0.0

    def tail(self, allowed_rank: int) -> float:
        """Largest singular value beyond the allowed rank."""
        if self.svals.size <= allowed_rank:
            return 0.0
        return float(self.svals[allowed_rank])


def _maxabs(mat: np.ndarray) -> float:
    return float(np.max(np.abs(mat))) if mat.size else 0.0


def _identity_check(name: str, lhs: np.ndarray, rhs: np.ndarray,
                    cols: np.ndarray, tol: float, detail: str = "") -> Check:
    return Check(name, _maxabs((lhs - rhs)[:, cols]), tol, "window", detail=detail)


def _rank_check(name: str, diff: np.ndarray, cols: np.ndarray, bound: int,
                tol: float, rank_rel: float, detail: str = ""
                ) -> tuple[Check, FiniteRankResidual]:
    frr = FiniteRankResidual.from_matrix(diff[:, cols], rank_rel)
    return Check(name, frr.tail(bound), tol, "window",
                 rank=frr.rank, rank_bound=bound, detail=detail), frr


def _q_block(phi: FiniteBlaschke, N: int):
    """Per-variable model-space basis; the zero symbol gives the full space."""
    if phi.zero_function:
        return np.eye(N, dtype=complex)
    if phi.degree == 0:
        return np.zeros((N, 0), dtype=complex)
    basis, _ = model_space_basis(phi, N)
    return basis.matrix


def _comp_block(q: np.ndarray) -> np.ndarray:
    """Orthogonal complement of a per-variable block, in natural order."""
    dim = q.shape[0]
    return canonical_columns(np.eye(dim) - q @ q.conj().T, np.arange(dim))


def _diff_block(q_big: np.ndarray, q_small: np.ndarray) -> np.ndarray:
    """Basis of the gap between nested model-space blocks."""
    return canonical_columns(q_big @ q_big.conj().T - q_small @ q_small.conj().T,
                             np.arange(q_big.shape[0]))


def _mult_ops(spec: CoDoublyCommutingSpec) -> list:
    grid = spec.grid
    return [op_on_variable(grid, v, conv_matrix(spec.phis[v - 1].taylor(spec.trunc[v - 1]),
                                                spec.trunc[v - 1]))
            for v in range(1, spec.n + 1)]


def _kron_chain(blocks) -> np.ndarray:
    """kron over blocks listed fastest-variable-last (pass [B_n, ..., B_1])."""
    out = np.array([[1.0 + 0j]])
    for b in blocks:
        out = np.kron(out, b)
    return out


def codouble_subspace(spec: CoDoublyCommutingSpec, tol: float = 1e-8
                      ) -> tuple[SubspaceBasis, VerificationReport]:
    """Basis of S_Phi with the projection-formula and codimension checks."""
    grid = spec.grid
    for v, phi in enumerate(spec.phis, start=1):
        if not phi.zero_function and spec.trunc[v - 1] < phi.degree + 2:
            raise GridTooSmallError(
                f"variable {v}: need trunc >= deg + 2, got {spec.trunc[v - 1]}")
    qs = [_q_block(phi, spec.trunc[v - 1]) for v, phi in enumerate(spec.phis, start=1)]
    comps = [canonical_columns(np.eye(q.shape[0]) - q @ q.conj().T,
                               np.arange(q.shape[0])) for q in qs]
    pieces = []
    for v in range(1, spec.n + 1):
        blocks = []
        for u in range(spec.n, 0, -1):
            if u > v:
                blocks.append(qs[u - 1])
            elif u == v:
                blocks.append(comps[u - 1])
            else:
                blocks.append(np.eye(spec.trunc[u - 1], dtype=complex))
        pieces.append(_kron_chain(blocks))
    mat = np.column_stack([p for p in pieces if p.shape[1]]) \
        if any(p.shape[1] for p in pieces) else np.zeros((grid.size, 0), dtype=complex)
    basis = SubspaceBasis(grid, mat)

    rep = VerificationReport()
    ops = _mult_ops(spec)
    eye = np.eye(grid.size)
    formula = eye.astype(complex)
    for C in ops:
        formula = formula @ (eye - C @ C.conj().T)
    rep.add(Check("sphi.projection_formula",
                  _maxabs(basis.projector() - (eye - formula)), tol,
                  detail="basis projector against the product formula"))
    for p, q in itertools.combinations(range(spec.n), 2):
        A = ops[p] @ ops[p].conj().T
        Bm = ops[q] @ ops[q].conj().T
        rep.add(Check(f"sphi.defect_commute.{p + 1}_{q + 1}", _maxabs(A @ Bm - Bm @ A),
                      tol))
    if spec.all_finite:
        expected = spec.codim
        actual = grid.size - basis.dim
        rep.add(Check("sphi.codim", float(abs(actual - expected)), 0.0,
                      detail=f"codim {actual}, product of degrees {expected}"))
    else:
        rep.add(Check("sphi.codim", 0.0, 0.0,
                      detail="not finite codimensional (zero symbol present)"))
    return basis, rep


def _check_invariant(S: SubspaceBasis, tol: float):
    grid = S.grid
    perp = np.eye(grid.size) - S.projector()
    for v in range(1, grid.nvars + 1):
        shift = np.zeros(grid.nvars, dtype=int)
        shift[v - 1] = 1
        cols = support_in_mask(S.matrix, grid.window_mask(shift))
        res = _maxabs(perp @ (shift_matrix(grid, v) @ S.matrix[:, cols]))
        if res > tol:
            raise NotInvariantError(f"subspace not invariant under z_{v}: {res:.2e}")


def commutator_check(S: SubspaceBasis, tol: float = 1e-10, rank_rel: float = 1e-8
                     ) -> tuple[dict, VerificationReport]:
    """Cross-commutators of compressed shifts computed two ways, with ranks.

    For each pair i < j the commutator [R_{z_i}*, R_{z_j}] on S is compared
    entrywise with the factorization P_S M_{z_j} P_{S^perp} M_{z_i}*|_S, and
    its rank (bounded by codim S) is certified by SVD.  For proper S the
    report also asserts that at least one pair is nonzero.
    """
    grid = S.grid
    _check_invariant(S, tol)
    rep = VerificationReport()
    Bs = S.matrix
    P_perp = np.eye(grid.size) - S.projector()
    codim = grid.size - S.dim
    zs = [shift_matrix(grid, v) for v in range(1, grid.nvars + 1)]
    Rs = [Bs.conj().T @ Z @ Bs for Z in zs]
    wcols = support_in_mask(Bs, grid.window_mask(np.ones(grid.nvars, dtype=int)))
    out = {}
    max_rank = 0
    for i, j in itertools.combinations(range(grid.nvars), 2):
        direct = Rs[i].conj().T @ Rs[j] - Rs[j] @ Rs[i].conj().T
        factored = Bs.conj().T @ zs[j] @ P_perp @ zs[i].conj().T @ Bs
        rep.add(_identity_check(f"commutator.match.{i + 1}_{j + 1}", direct, factored,
                                wcols, tol, "direct vs factorization through S^perp"))
        frr = FiniteRankResidual.from_matrix(direct[:, wcols], rank_rel)
        out[(i + 1, j + 1)] = frr
        max_rank = max(max_rank, frr.rank)
        rep.add(Check(f"commutator.rank.{i + 1}_{j + 1}", 0.0, 0.5, "window",
                      rank=frr.rank, rank_bound=codim,
                      detail=f"largest singular value {frr.norm:.3e}"))
    if codim > 0:
        rep.add(Check("commutator.nonzero", 0.0 if max_rank >= 1 else 1.0, 0.5,
                      detail="proper finite-codimension S must see a nonzero pair"))
    return out, rep


_WORD_TOKEN = re.compile(r"^R(\*)?_\{?z_?(\d+)\}?$")


def parse_word(word: str) -> list[tuple[int, bool]]:
    """Parse 'R_{z1} R*_{z2}' into [(variable, adjoint?), ...]."""
    out = []
    for tok in word.split():
        m = _WORD_TOKEN.match(tok)
        if not m:
            raise ValueError(f"cannot parse word symbol {tok!r}")
        out.append((int(m.group(2)), m.group(1) is not None))
    if not out:
        raise ValueError("empty word")
    return out


def word_compression_check(inner: SubspaceBasis, outer: SubspaceBasis, word: str,
                           tol: float = 1e-10, rank_rel: float = 1e-8
                           ) -> tuple[FiniteRankResidual, VerificationReport]:
    """Same word in both compressed-shift algebras, compressed once more.

    With M1 inside M2 both invariant, the word T_1 on M1 differs from the
    compression of the word T_2 on M2 by a finite-rank operator of rank at
    most (symbols - 1) * dim(M2 - M1).
    """
    grid = inner.grid
    if outer.grid != grid:
        raise PreconditionError("subspaces must share one grid")
    nest = _maxabs((np.eye(grid.size) - outer.projector()) @ inner.matrix)
    if nest > tol:
        raise PreconditionError(f"subspaces are not nested: residual {nest:.2e}")
    _check_invariant(inner, tol)
    _check_invariant(outer, tol)
    symbols = parse_word(word)
    gap = outer.dim - inner.dim

    def compressed(basis: SubspaceBasis) -> np.ndarray:
        out = np.eye(basis.dim, dtype=complex)
        for var, adj in symbols:
            Z = basis.matrix.conj().T @ shift_matrix(grid, var) @ basis.matrix
            out = out @ (Z.conj().T if adj else Z)
        return out

    T1 = compressed(inner)
    T2 = compressed(outer)
    X = inner.matrix.conj().T @ outer.matrix
    diff = T1 - X @ T2 @ X.conj().T
    shift = np.zeros(grid.nvars, dtype=int)
    for var, adj in symbols:
        if not adj:
            shift[var - 1] += 1
    wcols = support_in_mask(inner.matrix, grid.window_mask(shift))
    bound = (len(symbols) - 1) * gap
    rep = VerificationReport()
    check, frr = _rank_check("word.compression", diff, wcols, bound, tol, rank_rel,
                             detail=f"word {word!r}, gap dimension {gap}")
    rep.add(check)
    return frr, rep


@dataclass(frozen=True, eq=False)
class DecompositionLayout:
    """Named orthogonal pieces used by the explicit equivalence unitaries.

    Full-space stage (H^2(D^n) vs S_Phi), writing Q for the model-space tensor
    over variables 1..n-1:

      fixed_part       Q^perp x H^2          (the unitary is the identity here)
      moved_domain     Q x H^2               (multiplied by phi_n)
      moved_range      Q x phi_n H^2
      moved_range_deep Q x phi_n^2 H^2
      moved_range_edge Q x phi_n Q_{phi_n}   (finite dimensional)

    Nested stage (S_Phi vs an invariant S containing it, m = dim gap):

      gap                 S - S_Phi
      ladder              phi_1 Q_{z^m} x 1 x H^2      (variable n free)
      ladder_base         phi_1 Q_{z^m} x 1 x 1        (paired with gap)
      ladder_raised       phi_1 Q_{z^m} x 1 x zH^2     (lowered by M_{z_n}*)
      ladder_raised_short / ladder_raised_edge          split at rung m-1
      ladder_short / ladder_edge                        same split, variable n free
      beyond_ladder       z^m phi_1 H^2 x 1 x H^2
      off_axis            phi_1 H^2 x (1 x H^2)^perp
      corner              Q_{phi_1} x (model tensor over 2..n)^perp
      rest                beyond_ladder + off_axis + corner (identity part)
    """

    fixed_part: SubspaceBasis | None = None
    moved_domain: SubspaceBasis | None = None
    moved_range: SubspaceBasis | None = None
    moved_range_deep: SubspaceBasis | None = None
    moved_range_edge: SubspaceBasis | None = None
    gap: SubspaceBasis | None = None
    ladder: SubspaceBasis | None = None
    ladder_base: SubspaceBasis | None = None
    ladder_raised: SubspaceBasis | None = None
    ladder_raised_short: SubspaceBasis | None = None
    ladder_raised_edge: SubspaceBasis | None = None
    ladder_short: SubspaceBasis | None = None
    ladder_edge: SubspaceBasis | None = None
    beyond_ladder: SubspaceBasis | None = None
    off_axis: SubspaceBasis | None = None
    corner: SubspaceBasis | None = None
    rest: SubspaceBasis | None = None
    m: int | None = None


@dataclass(frozen=True, eq=False)
class EquivalenceResult:
    unitary: np.ndarray
    layout: DecompositionLayout
    report: VerificationReport
    residuals: dict = field(default_factory=dict)


def codouble_equivalence(spec: CoDoublyCommutingSpec, tol: float = 1e-8,
                         rank_rel: float = 1e-8, workers: int = 1) -> EquivalenceResult:
    """Explicit unitary U: H^2(D^n) -> S_Phi with U* T(S_Phi) U = T(H^2(D^n)).

    U is the identity on Q^perp x H^2 and multiplication by phi_n on Q x H^2.
    The report verifies U's unitarity, the exact conjugation U* R_{z_n} U =
    M_{z_n}, the three-term expansion of U* R_{z_i} U for i < n, the reverse
    conjugations U M_{z_i} U* with their finite-rank corrections (rank at most
    dim moved_range_edge), and the product formula for the projection onto
    Q x phi_n H^2.
    """
    if not spec.all_finite:
        raise PreconditionError("every symbol must be a finite Blaschke product")
    grid = spec.grid
    n, N = spec.n, spec.trunc
    degs = [p.degree for p in spec.phis]
    for v in range(1, n):
        if N[v - 1] < degs[v - 1] + 2:
            raise GridTooSmallError(f"variable {v}: need trunc >= deg + 2")
    if N[n - 1] < 2 * degs[n - 1] + 2:
        raise GridTooSmallError(f"variable {n}: need trunc >= 2*deg + 2 for phi_n^2 H^2")

    qs = [_q_block(spec.phis[v - 1], N[v - 1]) for v in range(1, n + 1)]
    q_head = _kron_chain([qs[v - 1] for v in range(n - 1, 0, -1)])
    head_comp = canonical_columns(
        np.eye(q_head.shape[0]) - q_head @ q_head.conj().T, np.arange(q_head.shape[0]))
    Cn_block = conv_matrix(spec.phis[n - 1].taylor(N[n - 1]), N[n - 1])
    eye_n = np.eye(N[n - 1], dtype=complex)
    q_sq = _q_block(spec.phis[n - 1] * spec.phis[n - 1], N[n - 1])

    fixed = SubspaceBasis(grid, np.kron(eye_n, head_comp))
    domain = SubspaceBasis(grid, np.kron(eye_n, q_head))
    rng = SubspaceBasis(grid, np.kron(_comp_block(qs[n - 1]), q_head))
    deep = SubspaceBasis(grid, np.kron(_comp_block(q_sq), q_head))
    edge = SubspaceBasis(grid, np.kron(_diff_block(q_sq, qs[n - 1]), q_head))
    layout = DecompositionLayout(fixed_part=fixed, moved_domain=domain,
                                 moved_range=rng, moved_range_deep=deep,
                                 moved_range_edge=edge)

    ops = _mult_ops(spec)
    Cn = ops[n - 1]
    eye = np.eye(grid.size)
    P_fix, P_dom, P_rng = fixed.projector(), domain.projector(), rng.projector()
    P_deep, P_edge = deep.projector(), edge.projector()
    P_sphi = P_fix + P_rng
    U = P_fix + Cn @ P_dom

    zs = [shift_matrix(grid, v) for v in range(1, n + 1)]
    shift = np.ones(n, dtype=int)
    shift[n - 1] += spec.phis[n - 1].window_shift(0.1 * tol)
    win = grid.window_mask(shift)
    Rzs = [P_sphi @ Z @ P_sphi for Z in zs]
    R_phin = P_sphi @ Cn @ P_sphi
    residuals: dict = {}

    def layout_checks():
        return [
            Check("codouble.layout.sphi_split", _maxabs(P_sphi - (P_fix + P_rng)),
                  tol, detail="S_Phi = fixed + moved_range"),
            Check("codouble.layout.full_split", _maxabs(eye - (P_fix + P_dom)), tol,
                  detail="H^2 = fixed + moved_domain"),
            Check("codouble.layout.range_split", _maxabs(P_rng - (P_deep + P_edge)),
                  tol, detail="moved_range = deep + edge"),
        ]

    def range_formula():
        prod = eye.astype(complex)
        for v in range(n - 1):
            prod = prod @ (eye - ops[v] @ ops[v].conj().T)
        return Check("codouble.projection.range_formula",
                     _maxabs(P_rng - prod @ (Cn @ Cn.conj().T)), tol,
                     detail="P(Q x phi_n H^2) as a word in the multipliers")

    def unitarity():
        return [
            Check("codouble.unitary.isometry", _maxabs((U.conj().T @ U - eye)[:, win]),
                  tol, "window"),
            Check("codouble.unitary.range", _maxabs((U @ U.conj().T - P_sphi)[:, win]),
                  tol, "window"),
        ]

    def shift_n():
        lhs = U.conj().T @ Rzs[n - 1] @ U
        return _identity_check("codouble.shift_n", lhs, zs[n - 1], win, tol,
                               "U* R_zn U = M_zn")

    def shift_i(i):
        lhs = U.conj().T @ Rzs[i - 1] @ U
        rhs = (zs[i - 1] @ P_fix
               + P_fix @ zs[i - 1] @ Cn @ P_dom
               + Cn.conj().T @ P_rng @ zs[i - 1] @ Cn @ P_dom)
        return _identity_check(f"codouble.shift_expansion.{i}", lhs, rhs, win, tol,
                               "three-term expansion of U* R_zi U")

    def reverse_i(i):
        lhs = U @ zs[i - 1] @ U.conj().T
        rhs = (Rzs[i - 1] @ P_fix
               + P_fix @ Rzs[i - 1] @ R_phin.conj().T @ P_deep
               + R_phin @ P_rng @ Rzs[i - 1] @ R_phin.conj().T @ P_deep)
        check, frr = _rank_check(f"codouble.reverse_expansion.{i}", lhs - rhs, win,
                                 edge.dim, tol, rank_rel,
                                 detail="finite-rank term of U M_zi U*")
        residuals[f"reverse_expansion.{i}"] = frr
        return check

    thunks = [layout_checks, range_formula, unitarity, shift_n]
    for i in range(1, n):
        thunks.append(lambda i=i: shift_i(i))
        thunks.append(lambda i=i: reverse_i(i))
    rep = VerificationReport()
    rep.extend(evaluate_checks(thunks, workers))
    return EquivalenceResult(U, layout, rep, residuals)


def nested_equivalence(S: SubspaceBasis, spec: CoDoublyCommutingSpec,
                       tol: float = 1e-8, rank_rel: float = 1e-8,
                       pairing: np.ndarray | None = None,
                       workers: int = 1) -> EquivalenceResult:
    """Explicit unitary U: S_Phi -> S conjugating the two compressed tuples.

    U pairs the m-dimensional ladder base with the gap S - S_Phi (graded-lex
    pairing by default; ``pairing`` may supply any other unitary), lowers the
    raised ladder by M_{z_n}*, and is the identity elsewhere.  All displayed
    conjugation identities are verified with their finite-rank corrections
    (rank at most m), along with the projection lemmas used to place the piece
    projections inside the compressed-shift algebra.
    """
    grid = spec.grid
    if S.grid != grid:
        raise PreconditionError("S must live on the spec grid")
    n, N = spec.n, spec.trunc
    d1 = spec.phis[0].degree
    if not spec.all_finite:
        raise PreconditionError("every symbol must be a finite Blaschke product")
    sphi, sphi_rep = codouble_subspace(spec, tol)
    P_S = S.projector()
    P_sphi = sphi.projector()
    eye = np.eye(grid.size)
    contain = _maxabs((eye - P_S) @ sphi.matrix)
    if contain > tol:
        raise PreconditionError(f"S_Phi is not inside S: residual {contain:.2e}")
    _check_invariant(S, tol)

    gap_cols = canonical_columns(P_S - P_sphi, grid.graded_lex_order())
    m = gap_cols.shape[1]
    maxdeg = max(p.degree for p in spec.phis)
    for v in range(1, n + 1):
        if N[v - 1] < maxdeg + m + 2:
            raise GridTooSmallError(
                f"variable {v}: need trunc >= max deg + m + 2 = {maxdeg + m + 2}")

    C1 = conv_matrix(spec.phis[0].taylor(N[0]), N[0])
    q1_block = _q_block(spec.phis[0], N[0])
    q_m = _q_block(FiniteBlaschke.monomial(m) * spec.phis[0], N[0])
    q_m1 = _q_block(FiniteBlaschke.monomial(max(m - 1, 0)) * spec.phis[0], N[0])
    ladder1 = _diff_block(q_m, q1_block)            # phi_1 Q_{z^m}
    ladder1_short = _diff_block(q_m1, q1_block)     # phi_1 Q_{z^{m-1}}
    ladder1_top = _diff_block(q_m, q_m1)            # phi_1 z^{m-1} C
    sphi1_block = _comp_block(q1_block)             # phi_1 H^2
    beyond1 = _comp_block(q_m)                      # z^m phi_1 H^2

    mid_dims = [N[v - 1] for v in range(2, n)]
    const_mid = _kron_chain([np.eye(dim, dtype=complex)[:, :1] for dim in mid_dims]) \
        if mid_dims else np.array([[1.0 + 0j]])
    eye_mid = _kron_chain([np.eye(dim, dtype=complex) for dim in mid_dims]) \
        if mid_dims else np.array([[1.0 + 0j]])
    eye_vn = np.eye(N[n - 1], dtype=complex)
    sz_vn = eye_vn[:, 1:]
    const_vn = eye_vn[:, :1]

    def kron3(bn, bmid, b1):
        return np.kron(bn, np.kron(bmid, b1))

    base = SubspaceBasis(grid, kron3(const_vn, const_mid, ladder1))
    raised = SubspaceBasis(grid, kron3(sz_vn, const_mid, ladder1))
    ladder = SubspaceBasis(grid, kron3(eye_vn, const_mid, ladder1))
    raised_short = SubspaceBasis(grid, kron3(sz_vn, const_mid, ladder1_short))
    raised_edge = SubspaceBasis(grid, kron3(sz_vn, const_mid, ladder1_top))
    ladder_short = SubspaceBasis(grid, kron3(eye_vn, const_mid, ladder1_short))
    ladder_edge = SubspaceBasis(grid, kron3(eye_vn, const_mid, ladder1_top))
    beyond = SubspaceBasis(grid, kron3(eye_vn, const_mid, beyond1))

    joint_dim = N[n - 1] * int(np.prod(mid_dims)) if mid_dims else N[n - 1]
    axis_joint = np.kron(eye_vn, const_mid)
    off_joint = canonical_columns(np.eye(joint_dim) - axis_joint @ axis_joint.conj().T,
                                  np.arange(joint_dim))
    off = SubspaceBasis(grid, np.kron(off_joint, sphi1_block))
    q_tail = _kron_chain([_q_block(spec.phis[v - 1], N[v - 1])
                          for v in range(n, 1, -1)])
    corner_joint = canonical_columns(np.eye(joint_dim) - q_tail @ q_tail.conj().T,
                                     np.arange(joint_dim))
    corner = SubspaceBasis(grid, np.kron(corner_joint, q1_block))
    rest = SubspaceBasis(grid, np.column_stack(
        [b for b in (beyond.matrix, off.matrix, corner.matrix) if b.shape[1]]))
    gap = SubspaceBasis(grid, gap_cols)

    layout = DecompositionLayout(
        gap=gap, ladder=ladder, ladder_base=base, ladder_raised=raised,
        ladder_raised_short=raised_short, ladder_raised_edge=raised_edge,
        ladder_short=ladder_short, ladder_edge=ladder_edge, beyond_ladder=beyond,
        off_axis=off, corner=corner, rest=rest, m=m)

    if base.dim != m:
        raise LayoutError(f"ladder base dimension {base.dim} differs from gap {m}")
    V_pair = np.eye(m, dtype=complex) if pairing is None else np.asarray(pairing)
    if V_pair.shape != (m, m) or _maxabs(V_pair.conj().T @ V_pair - np.eye(m)) > 1e-10:
        raise ValueError("pairing must be a unitary m x m matrix")

    Zn = shift_matrix(grid, n)
    Zs = [shift_matrix(grid, v) for v in range(1, n + 1)]
    P_raised, P_rest, P_ladder = raised.projector(), rest.projector(), ladder.projector()
    P_corner = corner.projector()
    U = gap.matrix @ V_pair @ base.matrix.conj().T + Zn.conj().T @ P_raised + P_rest

    Rs = [P_S @ Z @ P_S for Z in Zs]
    Rf = [P_sphi @ Z @ P_sphi for Z in Zs]
    win = grid.window_mask(2 * np.ones(n, dtype=int))
    P_col1 = op_on_variable(grid, 1, sphi1_block @ sphi1_block.conj().T)
    P_axis = kron3(eye_vn, const_mid, sphi1_block)
    P_axis = P_axis @ P_axis.conj().T
    P_src = P_raised + P_rest
    P_dst = P_ladder + P_rest
    residuals: dict = {}

    def layout_checks():
        return [
            Check("nested.layout.sphi_split", _maxabs(P_sphi - (P_ladder + P_rest)),
                  tol, detail="S_Phi = ladder + rest"),
            Check("nested.layout.s_split",
                  _maxabs(P_S - (gap.projector() + P_ladder + P_rest)), tol,
                  detail="S = gap + ladder + rest"),
            Check("nested.layout.ladder_split",
                  _maxabs(P_ladder - (base.projector() + P_raised)), tol),
            Check("nested.layout.raised_split",
                  _maxabs(P_raised - (raised_short.projector() + raised_edge.projector())),
                  tol),
            Check("nested.layout.ladder_split2",
                  _maxabs(P_ladder - (ladder_short.projector() + ladder_edge.projector())),
                  tol),
            Check("nested.layout.column_split",
                  _maxabs(P_col1 - (P_ladder + beyond.projector() + off.projector())),
                  tol, detail="phi_1 H^2 x H^{n-1} = ladder + beyond + off_axis"),
            Check("nested.layout.sphi_first_split",
                  _maxabs(P_sphi - (P_col1 + P_corner)), tol,
                  detail="S_Phi = (phi_1 H^2 x H^{n-1}) + corner"),
        ]

    def unitarity():
        return [
            Check("nested.unitary.isometry",
                  _maxabs(((U.conj().T @ U - P_sphi) @ P_sphi)[:, win]), tol, "window"),
            Check("nested.unitary.range", _maxabs(((U @ U.conj().T - P_S) @ P_S)[:, win]),
                  tol, "window"),
        ]

    def forward_n():
        lhs = U.conj().T @ Rs[n - 1] @ U @ P_src
        rhs = Rf[n - 1] @ Rf[n - 1] @ Rf[n - 1].conj().T @ P_raised + Rf[n - 1] @ P_rest
        return _identity_check("nested.forward_shift_n", lhs, rhs, win, tol,
                               "U* R_zn U on raised + rest")

    def forward_mid(i):
        lhs = U.conj().T @ Rs[i - 1] @ U @ P_src
        rhs = Rf[i - 1] @ Rf[n - 1].conj().T @ P_raised + Rf[i - 1] @ P_rest
        return _identity_check(f"nested.forward_shift_mid.{i}", lhs, rhs, win, tol)

    def forward_1():
        lhs = U.conj().T @ Rs[0] @ U @ P_src
        rhs = (Rf[n - 1] @ Rf[0] @ Rf[n - 1].conj().T @ raised_short.projector()
               + Rf[0] @ Rf[n - 1].conj().T @ raised_edge.projector()
               + Rf[0] @ (beyond.projector() + off.projector())
               + P_rest @ Rf[0] @ P_corner
               + Rf[n - 1] @ P_ladder @ Rf[0] @ P_corner)
        check, frr = _rank_check("nested.forward_shift_1", lhs - rhs, win, m, tol,
                                 rank_rel, detail="finite-rank term bounded by m")
        residuals["forward_shift_1"] = frr
        return check

    def reverse_n():
        lhs = U @ Rf[n - 1] @ U.conj().T @ P_dst
        rhs = Rs[n - 1] @ P_dst
        return _identity_check("nested.reverse_shift_n", lhs, rhs, win, tol,
                               "U R_zn U* on ladder + rest")

    def reverse_mid(i):
        lhs = U @ Rf[i - 1] @ U.conj().T @ P_dst
        rhs = Rs[i - 1] @ Rs[n - 1] @ P_ladder + Rs[i - 1] @ P_rest
        return _identity_check(f"nested.reverse_shift_mid.{i}", lhs, rhs, win, tol)

    def reverse_1():
        lhs = U @ Rf[0] @ U.conj().T @ P_dst
        rhs = (Rs[0] @ ladder_short.projector()
               + Rs[0] @ Rs[n - 1] @ ladder_edge.projector()
               + Rs[0] @ (beyond.projector() + off.projector())
               + Rs[n - 1].conj().T @ P_raised @ Zs[0] @ P_corner
               + P_rest @ Rs[0] @ P_corner)
        check, frr = _rank_check("nested.reverse_shift_1", lhs - rhs, win, m, tol,
                                 rank_rel, detail="finite-rank term bounded by m")
        residuals["reverse_shift_1"] = frr
        return check

    def projection_lemma_range():
        lhs = P_col1 @ P_S
        rphi1 = P_S @ op_on_variable(grid, 1, C1) @ P_S
        s = 2 * np.ones(n, dtype=int)
        s[0] = max(2, 1 + spec.phis[0].window_shift(0.1 * tol))
        check, frr = _rank_check("nested.projection.column_vs_word",
                                 lhs - rphi1 @ rphi1.conj().T, grid.window_mask(s),
                                 grid.size - S.dim, tol, rank_rel,
                                 detail="P(phi_1 H^2 x H^{n-1}) vs R_phi1 R_phi1*")
        residuals["projection_column"] = frr
        return check

    def projection_lemma_axis():
        if n == 2:
            return Check("nested.projection.alternating_sum", 0.0, tol,
                         detail="no middle variables at n = 2")
        X = np.zeros((grid.size, grid.size), dtype=complex)
        for r in range(1, n - 1):
            for combo in itertools.combinations(range(2, n), r):
                term = np.eye(grid.size, dtype=complex)
                for i in combo:
                    term = term @ Rs[i - 1]
                for i in combo:
                    term = term @ Rs[i - 1].conj().T
                X += ((-1) ** (r + 1)) * term
        rhs = P_col1 @ (P_S - X) @ P_col1
        return _identity_check("nested.projection.alternating_sum", P_axis @ P_S, rhs,
                               win, tol, "inclusion-exclusion over middle variables")

    def projection_lemma_beyond():
        word = np.eye(grid.size, dtype=complex)
        for _ in range(m):
            word = word @ Rs[0]
        s = 2 * np.ones(n, dtype=int)
        s[0] = max(2, m)
        return _identity_check("nested.projection.beyond_ladder",
                               beyond.projector() @ P_S,
                               word @ P_axis @ word.conj().T @ P_S,
                               grid.window_mask(s), tol,
                               "P(beyond) = R_z1^m P(axis) R_z1*^m")

    thunks = [layout_checks, unitarity, forward_n, forward_1, reverse_n, reverse_1,
              projection_lemma_range, projection_lemma_axis, projection_lemma_beyond]
    for i in range(2, n):
        thunks.append(lambda i=i: forward_mid(i))
        thunks.append(lambda i=i: reverse_mid(i))
    rep = VerificationReport()
    rep.merge(sphi_rep)
    rep.add(Check("nested.containment", contain, tol, detail="S_Phi inside S"))
    rep.extend(evaluate_checks(thunks, workers))
    return EquivalenceResult(U, layout, rep, residuals)


def find_monomial_codouble(S: SubspaceBasis, tol: float = 1e-8
                           ) -> CoDoublyCommutingSpec:
    """Smallest per-variable monomial powers with z_v^{m_v} H^2 inside S."""
    grid = S.grid
    perp = np.eye(grid.size) - S.projector()
    deg = grid.degrees()
    ms = []
    for v in range(1, grid.nvars + 1):
        found = None
        for mv in range(grid.trunc[v - 1] - 1):
            cols = deg[:, v - 1] >= mv
            res = _maxabs(perp[:, cols])
            if res <= tol:
                found = mv
                break
        if found is None:
            raise GridTooSmallError(
                f"no monomial power in variable {v} keeps z^m H^2 inside S on this grid")
        ms.append(found)
    return CoDoublyCommutingSpec(tuple(FiniteBlaschke.monomial(mv) for mv in ms),
                                 grid.trunc)


def full_equivalence(S: SubspaceBasis, tol: float = 1e-8, rank_rel: float = 1e-8,
                     workers: int = 1, spec: CoDoublyCommutingSpec | None = None
                     ) -> tuple[np.ndarray, VerificationReport]:
    """Composite unitary from the S-window onto the H^2(D^n)-window.

    Finds a monomial co-doubly commuting subspace inside S (unless ``spec``
    supplies one), runs the nested stage (S_Phi -> S) and the full-space stage
    (H^2 -> S_Phi), and composes: W = U_full* U_nested*: S -> H^2(D^n).  The
    merged report itemizes every displayed identity of both stages plus the
    composite unitarity.
    """
    grid = S.grid
    if spec is None:
        spec = find_monomial_codouble(S, tol)
    nested = nested_equivalence(S, spec, tol, rank_rel, workers=workers)
    codouble = codouble_equivalence(spec, tol, rank_rel, workers=workers)
    W = codouble.unitary.conj().T @ nested.unitary.conj().T
    rep = VerificationReport()
    rep.merge(nested.report)
    rep.merge(codouble.report)
    shift = np.array([p.window_shift(0.1 * tol) + 2 for p in spec.phis], dtype=int)
    win = grid.window_mask(shift)
    P_S = S.projector()
    rep.add(Check("compose.isometry_on_s",
                  _maxabs(((W.conj().T @ W - P_S) @ P_S)[:, win]), tol, "window",
                  detail="W*W = P_S on the window"))
    rep.add(Check("compose.onto_full", _maxabs((W @ W.conj().T - np.eye(grid.size))[:, win]),
                  tol, "window", detail="WW* = I on the window"))
    rep.add(Check("compose.monomial_powers", 0.0, 0.5,
                  detail="powers " + ",".join(str(p.degree) for p in spec.phis)))
    return W, rep
