"""Shared constructions for the test suite."""

import numpy as np

from isoshift import BCLTuple


def random_unitary(e, rng):
    a = rng.standard_normal((e, e)) + 1j * rng.standard_normal((e, e))
    q, r = np.linalg.qr(a)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def diagonal_tuple(n, e, rng):
    """Valid tuple with commuting diagonal unitaries and 0/1 projections.

    Each basis direction is assigned to exactly one factor carrying the shift,
    and the diagonal phases are corrected so the product is the identity.
    """
    assign = rng.integers(0, n, size=e)
    phases = np.exp(2j * np.pi * rng.random((n, e)))
    phases[-1] = 1.0 / np.prod(phases[:-1], axis=0)
    us = tuple(np.diag(phases[i]).astype(complex) for i in range(n))
    ps = tuple(np.diag((assign == i).astype(complex)) for i in range(n))
    return BCLTuple(us, ps)


def pair_tuple(e, rng):
    """Valid 2-tuple from an arbitrary unitary and an arbitrary projection.

    With U_2 = U_1* and P_2 = U_1 (I - P_1) U_1*, all four conditions hold for
    any choice of U_1 and P_1.
    """
    u1 = random_unitary(e, rng)
    k = int(rng.integers(0, e + 1))
    frame = random_unitary(e, rng)
    p1 = frame[:, :k] @ frame[:, :k].conj().T
    u2 = u1.conj().T
    p2 = u1 @ (np.eye(e) - p1) @ u1.conj().T
    return BCLTuple((u1, u2), (p1, p2))


def embedded_pair_tuple(n, e, rng):
    """Embed a 2-variable block into an n-tuple (identity elsewhere)."""
    base = pair_tuple(e, rng)
    slots = rng.permutation(n)[:2]
    us = [np.eye(e, dtype=complex) for _ in range(n)]
    ps = [np.zeros((e, e), dtype=complex) for _ in range(n)]
    us[slots[0]], us[slots[1]] = base.U[0], base.U[1]
    ps[slots[0]], ps[slots[1]] = base.P[0], base.P[1]
    return BCLTuple(tuple(us), tuple(ps))


def random_valid_tuple(n, e, rng):
    """Hand-constructed valid tuple conjugated by a random unitary."""
    kind = rng.integers(0, 2)
    if n == 2 and kind == 0:
        t = pair_tuple(e, rng)
    elif n > 2 and kind == 0:
        t = embedded_pair_tuple(n, e, rng)
    else:
        t = diagonal_tuple(n, e, rng)
    return t.conjugated(random_unitary(e, rng))


def perturbed_tuple(t, rng):
    """Replace one projection by a matrix that is robustly not a projection."""
    idx = int(rng.integers(0, t.n))
    ps = list(t.P)
    ps[idx] = 0.5 * ps[idx] + 0.1 * np.eye(t.e)
    return BCLTuple(t.U, tuple(ps))
