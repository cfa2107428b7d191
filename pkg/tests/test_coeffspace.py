import numpy as np
import pytest

from isoshift import (DegreeGrid, GridMismatchError, GridOverflowError, PolyVec,
                      SubspaceBasis, blaschke_taylor, FiniteBlaschke,
                      inner_product, project, shift_adjoint_apply, shift_apply,
                      subspace_from_span)
from isoshift.coeffspace import (canonical_basis, op_on_variable, shift_matrix,
                                 support_in_mask, tensor_columns)


def test_flat_index_var1_fastest():
    g = DegreeGrid(2, (3, 4), 1)
    assert g.flat_index((0, 0)) == 0
    assert g.flat_index((1, 0)) == 1
    assert g.flat_index((0, 1)) == 3
    assert g.size == 12


def test_flat_index_fiber_innermost():
    g = DegreeGrid(1, (4,), 2)
    assert g.flat_index((0,), 1) == 1
    assert g.flat_index((1,), 0) == 2
    assert g.flat_index((2,), 1) == 5


def test_inner_product_examples():
    g2 = DegreeGrid(2, (4, 4), 1)
    one = g2.monomial((0, 0))
    assert inner_product(one, one) == 1
    assert inner_product(g2.monomial((1, 0)), g2.monomial((0, 1))) == 0
    g1 = DegreeGrid(1, (4,), 1)
    f = PolyVec(g1, [1, 1, 0, 0])
    h = PolyVec(g1, [1, -1, 0, 0])
    assert inner_product(f, h) == 0


def test_inner_product_grid_mismatch():
    f = DegreeGrid(1, (4,), 1).monomial((0,))
    h = DegreeGrid(1, (5,), 1).monomial((0,))
    with pytest.raises(GridMismatchError):
        inner_product(f, h)


def test_parseval_random():
    rng = np.random.default_rng(0)
    g = DegreeGrid(2, (5, 6), 2)
    for _ in range(20):
        c = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
        f = PolyVec(g, c)
        assert abs(f.norm() ** 2 - np.sum(np.abs(c) ** 2)) <= 1e-12 * np.sum(np.abs(c) ** 2)


def test_shift_examples():
    g = DegreeGrid(2, (4, 4), 1)
    one = g.monomial((0, 0))
    assert np.array_equal(shift_apply(1, one).coeffs, g.monomial((1, 0)).coeffs)
    assert shift_adjoint_apply(1, one).norm() == 0
    f = g.monomial((1, 2))
    assert np.array_equal(shift_adjoint_apply(2, f).coeffs, g.monomial((1, 1)).coeffs)


def test_shift_isometry_and_defect_exact():
    g = DegreeGrid(2, (5, 5), 1)
    rng = np.random.default_rng(1)
    c = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
    # clear the top shell in variable 1 so the shift is exact
    deg = g.degrees()
    c[deg[:, 0] == 4] = 0
    f = PolyVec(g, c)
    back = shift_adjoint_apply(1, shift_apply(1, f))
    assert np.array_equal(back.coeffs, f.coeffs)
    # M M* = I - (degree-0 slice in the variable)
    fwd = shift_apply(1, shift_adjoint_apply(1, f), mode="lossy")
    expected = c.copy()
    expected[deg[:, 0] == 0] = 0
    assert np.array_equal(fwd.coeffs, expected)


def test_shifts_commute_exactly():
    g = DegreeGrid(2, (5, 5), 1)
    rng = np.random.default_rng(2)
    c = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
    f = PolyVec(g, c)
    a = shift_apply(2, shift_apply(1, f, "lossy"), "lossy")
    b = shift_apply(1, shift_apply(2, f, "lossy"), "lossy")
    assert np.array_equal(a.coeffs, b.coeffs)
    a = shift_adjoint_apply(2, shift_apply(1, f, "lossy"))
    b = shift_apply(1, shift_adjoint_apply(2, f), "lossy")
    assert np.array_equal(a.coeffs, b.coeffs)


def test_strict_overflow_raises_lossy_flags():
    g = DegreeGrid(1, (3,), 1)
    top = g.monomial((2,))
    with pytest.raises(GridOverflowError):
        shift_apply(1, top)
    out = shift_apply(1, top, mode="lossy")
    assert out.truncated and out.norm() == 0


def test_subspace_from_span_examples():
    g = DegreeGrid(1, (4,), 1)
    one = g.monomial((0,))
    b = subspace_from_span([one, one])
    assert b.dim == 1
    f = PolyVec(g, [1, 1, 0, 0])
    h = PolyVec(g, [1, -1, 0, 0])
    assert subspace_from_span([f, h]).dim == 2
    with pytest.raises(ValueError):
        subspace_from_span([g.zero()])


def test_subspace_from_span_blaschke_against_gram_schmidt():
    # independent oracle: classical Gram-Schmidt on the raw Taylor columns
    N = 32
    phi = blaschke_taylor(FiniteBlaschke((0.5,)), N)
    cols = [phi.coeffs.copy()]
    for _ in range(2):
        cols.append(np.roll(cols[-1], 1))
        cols[-1][0] = 0
    gs = []
    for c in cols:
        v = c.astype(complex)
        for q in gs:
            v = v - q * np.vdot(q, v)
        gs.append(v / np.linalg.norm(v))
    oracle_proj = sum(np.outer(q, q.conj()) for q in gs)

    g = DegreeGrid(1, (N,), 1)
    span = subspace_from_span([PolyVec(g, c) for c in cols])
    assert span.dim == 3
    assert span.orthonormality_residual() <= 1e-10
    assert np.max(np.abs(span.projector() - oracle_proj)) <= 1e-10


def test_project_examples():
    g = DegreeGrid(1, (4,), 1)
    one = g.monomial((0,))
    S = subspace_from_span([one])
    f = PolyVec(g, [1, 1, 0, 0])
    assert np.allclose(project(S, f).coeffs, one.coeffs)
    # fixed point
    assert np.allclose(project(S, one).coeffs, one.coeffs)
    # model space of z^2 is span{1, z}: z^3 projects to zero
    Q = subspace_from_span([one, g.monomial((1,))])
    assert project(Q, g.monomial((3,))).norm() == 0


def test_projection_idempotent_selfadjoint():
    rng = np.random.default_rng(3)
    g = DegreeGrid(1, (12,), 1)
    vecs = [PolyVec(g, rng.standard_normal(12) + 1j * rng.standard_normal(12))
            for _ in range(5)]
    S = subspace_from_span(vecs)
    P = S.projector()
    assert np.max(np.abs(P @ P - P)) <= 1e-10
    assert np.max(np.abs(P - P.conj().T)) <= 1e-10


def test_graded_lex_order_and_window():
    g = DegreeGrid(2, (3, 3), 1)
    order = g.graded_lex_order()
    deg = g.degrees()
    tot = deg.sum(axis=1)
    assert list(tot[order]) == sorted(tot)
    # within total degree 1: k=(0,1) before k=(1,0)
    first_deg1 = order[np.searchsorted(np.sort(tot), 1)]
    assert tuple(deg[first_deg1]) == (0, 1)
    mask = g.window_mask((1, 0))
    assert mask[g.flat_index((1, 2))] and not mask[g.flat_index((2, 0))]


def test_canonical_basis_monomials_in_order():
    g = DegreeGrid(2, (3, 3), 1)
    sel = [g.flat_index((1, 0)), g.flat_index((0, 0)), g.flat_index((1, 1))]
    P = np.zeros((g.size, g.size), dtype=complex)
    for k in sel:
        P[k, k] = 1
    B = canonical_basis(g, P)
    assert B.dim == 3
    # graded-lex order: 1, z1, z1 z2, each an exact monomial column
    expected = [g.flat_index((0, 0)), g.flat_index((1, 0)), g.flat_index((1, 1))]
    for j, k in enumerate(expected):
        assert B.matrix[k, j] == 1

def test_op_on_variable_and_tensor_columns():
    g = DegreeGrid(2, (3, 4), 1)
    Z1 = shift_matrix(g, 1)
    one = np.zeros(g.size); one[g.flat_index((0, 0))] = 1
    assert np.argmax(np.abs(Z1 @ one)) == g.flat_index((1, 0))
    blk = np.eye(4, k=-1)
    Z2 = op_on_variable(g, 2, blk)
    assert np.argmax(np.abs(Z2 @ one)) == g.flat_index((0, 1))
    cols = tensor_columns(g, [np.eye(3)[:, :1], np.eye(4)[:, 1:2]])
    assert cols.shape == (g.size, 1)
    assert cols[g.flat_index((0, 1)), 0] == 1


def test_support_in_mask():
    g = DegreeGrid(1, (4,), 1)
    mask = g.window_mask((1,))
    cols = np.eye(4, dtype=complex)
    ok = support_in_mask(cols, mask)
    assert list(ok) == [True, True, True, False]


def test_polyvec_json_roundtrip():
    g = DegreeGrid(2, (3, 2), 2)
    rng = np.random.default_rng(4)
    f = PolyVec(g, rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size))
    back = PolyVec.from_json(f.to_json())
    assert back.grid == g
    assert np.array_equal(back.coeffs, f.coeffs)
