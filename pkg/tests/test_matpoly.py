import numpy as np
import pytest

from isoshift import (DegreeGrid, FiniteBlaschke, GridOverflowError, MatPoly,
                      PolyVec, blaschke_taylor, is_inner, matpoly_adjoint_apply,
                      matpoly_apply, model_space_basis, toeplitz_matrix)
from isoshift.matpoly import conv_matrix, shifted_range_basis


def conv_oracle(phi, f, N):
    """Direct block convolution, written independently of matpoly_apply."""
    out = np.zeros((N, phi.rows), dtype=complex)
    fm = f.reshape(N, phi.cols)
    for k in range(N):
        for j in range(phi.degree + 1):
            if 0 <= k - j < N:
                out[k] += phi.coeffs[j] @ fm[k - j]
    return out.reshape(-1)


def swap_symbol():
    U = np.array([[0, 1], [1, 0]], dtype=complex)
    P = np.diag([1.0, 0.0]).astype(complex)
    return MatPoly((U @ (np.eye(2) - P), U @ P))


def test_apply_examples():
    g1 = DegreeGrid(1, (4,), 1)
    zI = MatPoly((np.zeros((1, 1)), np.eye(1)))
    one = g1.monomial((0,))
    assert np.allclose(matpoly_apply(zI, one).coeffs, g1.monomial((1,)).coeffs)
    U = np.array([[0, 1j], [1j, 0]])
    g2 = DegreeGrid(1, (4,), 2)
    eta = g2.monomial((0,), 0)
    out = matpoly_apply(MatPoly.constant(U), eta)
    assert np.allclose(out.coeffs[:2], U @ np.array([1, 0]))


def test_apply_swap_symbol_against_convolution_oracle():
    phi = swap_symbol()
    g = DegreeGrid(1, (5,), 2)
    e1 = g.monomial((0,), 0)
    out = matpoly_apply(phi, e1)
    # U(P^perp + zP) e1 = z * swap(e1) = z e2
    assert np.allclose(out.coeffs, g.monomial((1,), 1).coeffs)
    rng = np.random.default_rng(0)
    for _ in range(10):
        c = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
        c[-2:] = 0  # stay inside the grid
        f = PolyVec(g, c)
        assert np.allclose(matpoly_apply(phi, f).coeffs, conv_oracle(phi, c, 5))


def test_adjoint_examples():
    g = DegreeGrid(1, (4,), 1)
    zI = MatPoly((np.zeros((1, 1)), np.eye(1)))
    assert matpoly_adjoint_apply(zI, g.monomial((0,))).norm() == 0
    assert np.allclose(matpoly_adjoint_apply(zI, g.monomial((1,))).coeffs,
                       g.monomial((0,)).coeffs)
    f = 3.0 * g.monomial((2,))
    assert np.allclose(matpoly_adjoint_apply(zI, f).coeffs, 3.0 * g.monomial((1,)).coeffs)


def test_apply_overflow_strict_vs_lossy():
    g = DegreeGrid(1, (3,), 1)
    zI = MatPoly((np.zeros((1, 1)), np.eye(1)))
    top = g.monomial((2,))
    with pytest.raises(GridOverflowError):
        matpoly_apply(zI, top)
    out = matpoly_apply(zI, top, mode="lossy")
    assert out.truncated and out.norm() == 0


def test_apply_then_adjoint_identity_on_window():
    phi = swap_symbol()
    g = DegreeGrid(1, (8,), 2)
    rng = np.random.default_rng(1)
    for _ in range(20):
        c = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
        c[-2:] = 0
        f = PolyVec(g, c)
        back = matpoly_adjoint_apply(phi, matpoly_apply(phi, f))
        assert np.max(np.abs(back.coeffs - f.coeffs)) <= 1e-12


def test_is_inner_examples():
    assert is_inner(swap_symbol()).passed
    rep = is_inner(swap_symbol(), tol=1e-14)
    assert max(c.residual for c in rep.checks) == 0
    bad = MatPoly((np.eye(1), np.eye(1)))  # 1 + z
    assert not is_inner(bad).passed


def test_inner_preserves_norm_on_window():
    phi = swap_symbol()
    g = DegreeGrid(1, (10,), 2)
    rng = np.random.default_rng(2)
    for _ in range(100):
        c = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
        c[-2:] = 0
        f = PolyVec(g, c)
        out = matpoly_apply(phi, f)
        assert abs(out.norm() - f.norm()) <= 1e-10 * max(1.0, f.norm())


def test_blaschke_taylor_examples():
    z = FiniteBlaschke((0.0,))
    assert np.allclose(z.taylor(4), [0, 1, 0, 0])
    half = FiniteBlaschke((0.5,))
    t = half.taylor(6)
    assert abs(t[0] + 0.5) <= 1e-15
    for k in range(1, 6):
        assert abs(t[k] - 3 * 2.0 ** (-(k + 1))) <= 1e-15
    # product = convolution of the factors
    both = FiniteBlaschke((0.0, 0.5))
    direct = np.convolve(z.taylor(6), half.taylor(6))[:6]
    assert np.allclose(both.taylor(6), direct)


def test_blaschke_validation():
    with pytest.raises(ValueError):
        FiniteBlaschke((1.0,))
    with pytest.raises(ValueError):
        FiniteBlaschke((0.5,), c=2.0)


def test_blaschke_unimodular_on_circle():
    rng = np.random.default_rng(3)
    for _ in range(5):
        zeros = tuple(0.6 * (rng.standard_normal(2) + 1j * rng.standard_normal(2)) / 3)
        phi = FiniteBlaschke(zeros)
        N = 64
        t = phi.taylor(N)
        angles = np.exp(2j * np.pi * np.arange(64) / 64)
        vals = np.polyval(t[::-1], angles)
        tail = phi.tail_scale(N)
        assert np.max(np.abs(np.abs(vals) - 1)) <= max(10 * tail, 1e-12)


def test_model_space_examples():
    basis, rep = model_space_basis(FiniteBlaschke((0.0,)), 8)
    assert basis.dim == 1 and abs(basis.matrix[0, 0]) == 1
    basis, rep = model_space_basis(FiniteBlaschke((0.0, 0.0, 0.0)), 8)
    assert basis.dim == 3
    assert np.allclose(np.abs(basis.matrix[:3, :3]), np.eye(3))


def test_model_space_szego_kernel():
    basis, rep = model_space_basis(FiniteBlaschke((0.5,)), 32)
    assert basis.dim == 1
    v = basis.matrix[:, 0]
    kernel = np.array([0.5 ** k for k in range(32)], dtype=complex)
    kernel /= np.linalg.norm(kernel)
    assert abs(abs(np.vdot(kernel, v)) - 1) <= 1e-12
    assert abs(abs(v[0]) - np.sqrt(3) / 2) <= 1e-12
    assert rep.get("model_space.projector").residual <= 1e-8


def test_model_space_repeated_zero_chain():
    phi = FiniteBlaschke((0.3, 0.3))
    basis, rep = model_space_basis(phi, 48)
    assert basis.dim == 2
    assert rep.get("model_space.projector").residual <= 1e-8


def test_model_space_projector_matches_multiplier_defect():
    phi = FiniteBlaschke((0.5, -0.25))
    N = 48
    basis, rep = model_space_basis(phi, N)
    C = conv_matrix(phi.taylor(N), N)
    oracle = np.eye(N) - C @ C.conj().T
    assert np.max(np.abs(basis.projector() - oracle)) <= 1e-8


def test_shifted_range_basis_zero_function():
    assert shifted_range_basis(FiniteBlaschke(zero_function=True), 6).shape == (6, 0)
    b = shifted_range_basis(FiniteBlaschke((0.0,)), 6)
    assert b.shape == (6, 5)


def test_toeplitz_matrix_matches_apply():
    phi = swap_symbol()
    N = 6
    T = toeplitz_matrix(phi, N)
    g = DegreeGrid(1, (N,), 2)
    rng = np.random.default_rng(4)
    c = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
    f = PolyVec(g, c)
    assert np.allclose(T @ c, matpoly_apply(phi, f, mode="lossy").coeffs)


def test_matpoly_json_roundtrip():
    phi = swap_symbol()
    back = MatPoly.from_json(phi.to_json())
    assert back.degree == phi.degree
    for k in range(phi.degree + 1):
        assert np.array_equal(back.coeff(k), phi.coeff(k))


def test_blaschke_json_roundtrip():
    phi = FiniteBlaschke((0.5, -0.2 + 0.1j), c=1j)
    back = FiniteBlaschke.from_json(phi.to_json())
    assert back.zeros == phi.zeros and back.c == phi.c
    zf = FiniteBlaschke.from_json({"zero_function": True})
    assert zf.zero_function and np.all(zf.taylor(4) == 0)


def test_blaschke_polyvec():
    v = blaschke_taylor(FiniteBlaschke((0.5,)), 8)
    assert v.grid == DegreeGrid(1, (8,), 1)
    assert abs(v.coeffs[0] + 0.5) <= 1e-15
