"""Berger-Coburn-Lebow model tuples.

A model tuple is (E, U_1..U_n, P_1..P_n) with U_i unitary and P_i orthogonal
projections on E = C^e subject to:

  (a) the U_i commute,
  (b) U_1 ... U_n = I,
  (c) P_i + U_i* P_j U_i = P_j + U_j* P_i U_j <= I for i != j,
  (d) P_1 + U_1* P_2 U_1 + ... + (U_{n-1}...U_1)* P_n (U_{n-1}...U_1) = I.

The symbols Phi_i(z) = U_i(P_i^perp + z P_i) then multiply to z*I and define
commuting isometric multipliers on H^2_E(D) whose product is the shift.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .matpoly import MatPoly
from .report import Check, VerificationReport


@dataclass(frozen=True, eq=False)
class BCLTuple:
    U: tuple
    P: tuple

    def __post_init__(self):
        us = tuple(np.asarray(u, dtype=complex) for u in self.U)
        ps = tuple(np.asarray(p, dtype=complex) for p in self.P)
        if len(us) != len(ps) or len(us) < 2:
            raise ValueError("need matching lists of at least two unitaries and projections")
        e = us[0].shape[0]
        for m in us + ps:
            if m.shape != (e, e):
                raise ValueError("all matrices must be square of one size")
        object.__setattr__(self, "U", us)
        object.__setattr__(self, "P", ps)

    @property
    def n(self) -> int:
        return len(self.U)

    @property
    def e(self) -> int:
        return self.U[0].shape[0]

    def conjugated(self, Q: np.ndarray) -> "BCLTuple":
        """Conjugate every matrix by a fixed unitary Q."""
        Qh = Q.conj().T
        return BCLTuple(tuple(Q @ u @ Qh for u in self.U),
                        tuple(Q @ p @ Qh for p in self.P))

    def to_json(self) -> dict:
        enc = lambda m: [[[float(x.real), float(x.imag)] for x in row] for row in m]
        return {"n": self.n, "e": self.e,
                "U": [enc(u) for u in self.U], "P": [enc(p) for p in self.P]}

    @classmethod
    def from_json(cls, obj: dict) -> "BCLTuple":
        dec = lambda m: np.array([[complex(re, im) for re, im in row] for row in m])
        t = cls(tuple(dec(u) for u in obj["U"]), tuple(dec(p) for p in obj["P"]))
        if t.n != int(obj["n"]) or t.e != int(obj["e"]):
            raise ValueError("declared sizes disagree with matrices")
        return t


def _maxabs(mat: np.ndarray, cols: np.ndarray | None) -> float:
    if cols is not None:
        mat = mat[:, cols]
    return float(np.max(np.abs(mat))) if mat.size else 0.0


def validate_tuple(t: BCLTuple, tol: float = 1e-10,
                   window_cols: np.ndarray | None = None,
                   check_all_orders: bool = False) -> VerificationReport:
    """Check the model-tuple conditions and the product-is-shift identity.

    ``window_cols`` restricts every residual to a subset of basis columns;
    extracted models use it to exclude the truncation boundary.  Condition (d)
    is evaluated in the stated order 1..n; ``check_all_orders`` additionally
    runs every permutation (n <= 4 only), since order independence is not
    assumed.
    """
    rep = VerificationReport()
    eye = np.eye(t.e)
    wname = "full" if window_cols is None else "interior"
    for i, (u, p) in enumerate(zip(t.U, t.P), start=1):
        rep.add(Check(f"structure.unitary_{i}", _maxabs(u.conj().T @ u - eye, window_cols),
                      tol, wname))
        res_p = max(_maxabs(p @ p - p, window_cols), _maxabs(p - p.conj().T, window_cols))
        rep.add(Check(f"structure.projection_{i}", res_p, tol, wname))
    for i, j in itertools.combinations(range(t.n), 2):
        rep.add(Check(f"condition_a.{i + 1}_{j + 1}",
                      _maxabs(t.U[i] @ t.U[j] - t.U[j] @ t.U[i], window_cols), tol, wname))
    prod = eye.astype(complex)
    for u in t.U:
        prod = prod @ u
    rep.add(Check("condition_b", _maxabs(prod - eye, window_cols), tol, wname))
    for i, j in itertools.combinations(range(t.n), 2):
        left = t.P[i] + t.U[i].conj().T @ t.P[j] @ t.U[i]
        right = t.P[j] + t.U[j].conj().T @ t.P[i] @ t.U[j]
        rep.add(Check(f"condition_c.{i + 1}_{j + 1}", _maxabs(left - right, window_cols),
                      tol, wname))
        sub = left if window_cols is None else left[np.ix_(window_cols, window_cols)]
        lam = float(np.max(np.linalg.eigvalsh((sub + sub.conj().T) / 2))) if sub.size else 0.0
        rep.add(Check(f"condition_c.bound_{i + 1}_{j + 1}", max(0.0, lam - 1.0), tol,
                      wname, detail=f"largest eigenvalue {lam:.12f}"))
    orders = [tuple(range(t.n))]
    if check_all_orders and t.n <= 4:
        orders = [o for o in itertools.permutations(range(t.n))]
    for order in orders:
        total = np.zeros((t.e, t.e), dtype=complex)
        chain = eye.astype(complex)
        for idx in order:
            total += chain.conj().T @ t.P[idx] @ chain
            chain = t.U[idx] @ chain
        name = "condition_d" if order == tuple(range(t.n)) else \
            "condition_d.order_" + "_".join(str(i + 1) for i in order)
        rep.add(Check(name, _maxabs(total - eye, window_cols), tol, wname,
                      detail="order " + ",".join(str(i + 1) for i in order)))
    prod_poly = None
    for phi in tuple_symbols(t):
        prod_poly = phi if prod_poly is None else prod_poly @ phi
    res = 0.0
    for k in range(prod_poly.degree + 1):
        target = eye if k == 1 else 0.0
        res = max(res, _maxabs(prod_poly.coeff(k) - target, window_cols))
    rep.add(Check("product_symbol", res, tol, wname,
                  detail="coefficients of Phi_1...Phi_n against z*I"))
    return rep


def tuple_symbols(t: BCLTuple) -> list[MatPoly]:
    """Phi_i(z) = U_i P_i^perp + z U_i P_i."""
    eye = np.eye(t.e)
    return [MatPoly((u @ (eye - p), u @ p)) for u, p in zip(t.U, t.P)]


def find_intertwiner(t1: BCLTuple, t2: BCLTuple, tol: float = 1e-8,
                     seed: int = 0, attempts: int = 8):
    """Search for a unitary W with W U_i = U~_i W and W P_i = P~_i W for all i.

    The joint intertwiner space is the kernel of stacked Sylvester constraints;
    a candidate is the unitary polar factor of an element of that space (the
    projection of the identity first, then seeded random elements).  A returned
    W is a verified certificate; ``None`` means no certificate was found, which
    is conclusive only when the intertwiner space is trivial or dimensions
    differ.

    Returns (W or None, report).
    """
    rep = VerificationReport()
    if t1.n != t2.n:
        raise ValueError("tuples must have the same length")
    if t1.e != t2.e:
        rep.add(Check("equivalence.dimensions", 1.0, tol,
                      detail=f"e={t1.e} vs e={t2.e}: not equivalent"))
        return None, rep
    e = t1.e
    blocks = []
    eye = np.eye(e)
    for a, b in list(zip(t1.U, t2.U)) + list(zip(t1.P, t2.P)):
        # W a = b W  <=>  (I (x) b - a^T (x) I) vec(W) = 0, column-major vec
        blocks.append(np.kron(eye, b) - np.kron(a.T, eye))
    constraints = np.vstack(blocks)
    _, s, vh = np.linalg.svd(constraints)
    # absolute floor: the constraints are built from unitaries and projections,
    # so anything below 1e-10 is noise even when every singular value is tiny
    cut = 1e-10 * max(float(s[0]), 1.0) if s.size else 0.0
    rank = int(np.sum(s > cut))
    null = vh[rank:].conj().T
    dim = null.shape[1]
    rep.add(Check("equivalence.space_dim", 0.0, tol,
                  detail=f"intertwiner space dimension {dim}"))
    if dim == 0:
        rep.add(Check("equivalence.certificate", 1.0, tol,
                      detail="intertwiner space is trivial: not equivalent"))
        return None, rep

    def residual_of(W: np.ndarray) -> float:
        res = 0.0
        for a, b in list(zip(t1.U, t2.U)) + list(zip(t1.P, t2.P)):
            res = max(res, float(np.max(np.abs(W @ a - b @ W))))
        return res

    rng = np.random.default_rng(seed)
    candidates = [null @ (null.conj().T @ eye.reshape(-1, order="F"))]
    for _ in range(attempts):
        c = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        candidates.append(null @ c)
    for vec in candidates:
        W0 = vec.reshape(e, e, order="F")
        if np.linalg.norm(W0) < 1e-12:
            continue
        u, _, vhh = np.linalg.svd(W0)
        W = u @ vhh
        res = residual_of(W)
        if res <= tol:
            rep.add(Check("equivalence.certificate", res, tol,
                          detail="joint unitary intertwiner verified"))
            return W, rep
    rep.add(Check("equivalence.certificate", 1.0, tol,
                  detail="no certificate found (inconclusive)"))
    return None, rep
