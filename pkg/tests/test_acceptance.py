"""Acceptance suite: one criterion per test, one printed pass/fail line each.

Every tolerance below is pinned; the suite is the exit gate for the package.
"""

import time

import numpy as np
import pytest

from isoshift import (BCLTuple, CoDoublyCommutingSpec, DegreeGrid,
                      FiniteBlaschke, InvariantSubspaceSpec, blaschke_taylor,
                      blh_theta, canonical_basis, codouble_equivalence,
                      codouble_subspace, commutator_check,
                      coordinate_shift_oracle, extract_model, factor_subspace,
                      find_intertwiner, full_equivalence, is_inner,
                      matpoly_oracle, nested_equivalence,
                      projection_conjugation_check, tuple_symbols,
                      uniqueness_tau, validate_tuple)
from helpers import perturbed_tuple, random_valid_tuple


def report_line(num, name, ok, extra=""):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {num} ({name}): {status} {extra}")


def minus_constants(grid):
    proj = np.eye(grid.size, dtype=complex)
    k = grid.flat_index((0,) * grid.nvars)
    proj[k, k] = 0
    return canonical_basis(grid, proj)


def test_criterion_1_bcl_validation_suite():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    ok = True
    for _ in range(200):
        n = int(rng.integers(2, 5))
        e = int(rng.integers(1, 9))
        t = random_valid_tuple(n, e, rng)
        rep = validate_tuple(t, tol=1e-10)
        worst = max(worst, max(c.residual for c in rep.checks))
        ok = ok and rep.passed
    fails = 0
    for _ in range(200):
        n = int(rng.integers(2, 5))
        e = int(rng.integers(1, 9))
        t = perturbed_tuple(random_valid_tuple(n, e, rng), rng)
        if not validate_tuple(t, tol=1e-10).passed:
            fails += 1
    elapsed = time.perf_counter() - start
    ok = ok and fails == 200 and worst <= 1e-10 and elapsed <= 10.0
    report_line(1, "model-tuple validation", ok,
                f"worst residual {worst:.2e}, {fails}/200 perturbed rejected, "
                f"{elapsed:.1f}s")
    assert worst <= 1e-10
    assert fails == 200
    assert elapsed <= 10.0


def test_criterion_2_canonical_model_round_trip():
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    worst = 0.0
    found = 0
    for _ in range(50):
        n = int(rng.integers(2, 5))
        e = int(rng.integers(1, 9))
        t = random_valid_tuple(n, e, rng)
        grid = DegreeGrid(1, (6,), e)
        model = extract_model([matpoly_oracle(phi, grid)
                               for phi in tuple_symbols(t)])
        W, rep = find_intertwiner(t, model.tuple, tol=1e-8, seed=11)
        if W is not None:
            found += 1
            worst = max(worst, rep.get("equivalence.certificate").residual)
    elapsed = time.perf_counter() - start
    ok = found == 50 and worst <= 1e-8 and elapsed <= 60.0
    report_line(2, "canonical-model round trip", ok,
                f"{found}/50 certified, worst residual {worst:.2e}, {elapsed:.1f}s")
    assert found == 50
    assert worst <= 1e-8
    assert elapsed <= 60.0


def test_criterion_3_bidisc_extraction():
    grid = DegreeGrid(2, (12, 12), 1)
    model = extract_model([coordinate_shift_oracle(grid, 1),
                           coordinate_shift_oracle(grid, 2)], tol=1e-10)
    wold = model.report.max_residual("wold.intertwine")
    conj = 0.0
    for j in (1, 2):
        conj = max(conj, max(c.residual
                             for c in projection_conjugation_check(model, [], j)))
    for i, j in [(1, 2), (2, 1)]:
        conj = max(conj, max(c.residual
                             for c in projection_conjugation_check(model, [i], j)))
    ok = model.report.passed and wold <= 1e-10 and conj <= 1e-10
    report_line(3, "bidisc canonical model", ok,
                f"wold {wold:.2e}, conjugated projections {conj:.2e}")
    assert model.report.passed
    assert wold <= 1e-10
    assert conj <= 1e-10


def test_criterion_4_blh_suite():
    rng = np.random.default_rng(42)
    amb = BCLTuple((np.eye(1), np.eye(1)), (np.eye(1), np.zeros((1, 1))))
    N = 48
    worst_cover = worst_match = worst_psi = worst_tau = 0.0
    ok = True
    for _ in range(20):
        deg = int(rng.integers(1, 4))
        zeros = []
        while len(zeros) < deg:
            z = 0.7 * (rng.uniform(-1, 1) + 1j * rng.uniform(-1, 1))
            if abs(z) <= 0.7:
                zeros.append(z)
        phi = FiniteBlaschke(tuple(zeros))
        gen = blaschke_taylor(phi, N)
        spec = InvariantSubspaceSpec(amb, N, generators=(gen,))
        res = factor_subspace(spec, tol=1e-7)
        theta = res.theta
        worst_cover = max(worst_cover, res.report.get("theta.coverage").residual)
        # theta equals phi up to a unimodular constant
        tc = np.array([theta.coeff(k)[0, 0] for k in range(min(N, theta.degree + 1))])
        pc = phi.taylor(N)[: tc.size]
        piv = int(np.argmax(np.abs(pc)))
        c = tc[piv] / pc[piv]
        worst_match = max(worst_match, abs(abs(c) - 1),
                          float(np.max(np.abs(tc - c * pc))))
        ok = ok and all(psi.degree <= 1 and is_inner(psi, 1e-8).passed
                        for psi in res.psis)
        worst_psi = max(worst_psi, res.report.get("psi_product").residual)
        # a second reconstruction of the same subspace from permuted generators
        gens2 = (1j * gen, blaschke_taylor(phi, N))
        from isoshift.coeffspace import PolyVec, shift_matrix
        g1 = PolyVec(gen.grid, shift_matrix(gen.grid, 1) @ gen.coeffs)
        spec2 = InvariantSubspaceSpec(amb, N, generators=(g1, 1j * gen))
        res2 = factor_subspace(spec2, tol=1e-7)
        tau, urep = uniqueness_tau(theta, res2.theta, res.psis, res2.psis, trunc=N)
        ok = ok and tau is not None
        worst_tau = max(worst_tau, urep.max_residual("tau"))
    ok = (ok and worst_cover <= 1e-7 and worst_match <= 1e-6
          and worst_psi <= 1e-8 and worst_tau <= 1e-8)
    report_line(4, "invariant-subspace factorization", ok,
                f"coverage {worst_cover:.2e}, symbol match {worst_match:.2e}, "
                f"psi product {worst_psi:.2e}, tau {worst_tau:.2e}")
    assert worst_cover <= 1e-7
    assert worst_match <= 1e-6
    assert worst_psi <= 1e-8
    assert worst_tau <= 1e-8
    assert ok


def test_criterion_5_commutator_factorization():
    spec = CoDoublyCommutingSpec((FiniteBlaschke.monomial(2),
                                  FiniteBlaschke.monomial(1)), (10, 10))
    basis, rep = codouble_subspace(spec, tol=1e-10)
    codim = spec.grid.size - basis.dim
    frrs, crep = commutator_check(basis, tol=1e-12)
    match = crep.get("commutator.match.1_2").residual
    rank = frrs[(1, 2)].rank
    ok = (rep.passed and crep.passed and match <= 1e-12
          and rank == 1 and rank <= codim and frrs[(1, 2)].norm > 1e-8)
    report_line(5, "finite-rank commutator", ok,
                f"match {match:.2e}, rank {rank} <= codim {codim}")
    assert match <= 1e-12
    assert rank == 1
    assert codim == 2
    assert frrs[(1, 2)].norm > 1e-8


def test_criterion_6_full_space_equivalence_monomial():
    start = time.perf_counter()
    worst_shift_n = worst_exp = 0.0
    rank_ok = True
    for phis, trunc in [((2, 1), (10, 10)), ((2, 1, 1), (8, 8, 8))]:
        spec = CoDoublyCommutingSpec(tuple(FiniteBlaschke.monomial(m) for m in phis),
                                     trunc)
        res = codouble_equivalence(spec, tol=1e-10)
        assert res.report.passed
        worst_shift_n = max(worst_shift_n, res.report.get("codouble.shift_n").residual)
        for i in range(1, spec.n):
            worst_exp = max(worst_exp,
                            res.report.get(f"codouble.shift_expansion.{i}").residual)
            c = res.report.get(f"codouble.reverse_expansion.{i}")
            rank_ok = rank_ok and c.rank <= res.layout.moved_range_edge.dim
    elapsed = time.perf_counter() - start
    ok = (worst_shift_n <= 1e-12 and worst_exp <= 1e-10 and rank_ok
          and elapsed <= 30.0)
    report_line(6, "full-space equivalence, monomial symbols", ok,
                f"shift_n {worst_shift_n:.2e}, expansions {worst_exp:.2e}, "
                f"{elapsed:.1f}s")
    assert worst_shift_n <= 1e-12
    assert worst_exp <= 1e-10
    assert rank_ok
    assert elapsed <= 30.0


def test_criterion_7_nested_and_composite():
    grid = DegreeGrid(2, (10, 10), 1)
    S = minus_constants(grid)
    spec = CoDoublyCommutingSpec((FiniteBlaschke.monomial(2),
                                  FiniteBlaschke.monomial(1)), (10, 10))
    W, rep = full_equivalence(S, tol=1e-9, spec=spec)
    worst = max(c.residual for c in rep.checks)
    rank_ok = all(c.rank <= c.rank_bound for c in rep.checks
                  if c.rank_bound is not None)
    bounds = {c.name: (c.rank, c.rank_bound) for c in rep.checks
              if c.rank_bound is not None}
    unit = max(rep.get("compose.isometry_on_s").residual,
               rep.get("compose.onto_full").residual)
    ok = rep.passed and worst <= 1e-9 and rank_ok and unit <= 1e-10
    report_line(7, "nested equivalence and composition", ok,
                f"worst identity {worst:.2e}, unitarity {unit:.2e}, ranks {bounds}")
    assert rep.passed
    assert worst <= 1e-9
    assert rank_ok
    assert unit <= 1e-10
    # the named bounds: m = 1 for the nested corrections, codim = 2 for the edge
    assert bounds["nested.forward_shift_1"][1] == 1
    assert bounds["nested.reverse_shift_1"][1] == 1
    assert bounds["codouble.reverse_expansion.1"][1] == 2


def test_criterion_8_degenerate_cases():
    spec = CoDoublyCommutingSpec((FiniteBlaschke.monomial(2),
                                  FiniteBlaschke.monomial(1)), (10, 10))
    sphi, _ = codouble_subspace(spec)
    res = nested_equivalence(sphi, spec, tol=1e-9)
    identity_ok = (res.layout.m == 0 and res.report.passed
                   and np.max(np.abs(res.unitary - sphi.projector())) <= 1e-12)
    zero_spec = CoDoublyCommutingSpec((FiniteBlaschke.monomial(1),
                                       FiniteBlaschke(zero_function=True)), (6, 6))
    bz, repz = codouble_subspace(zero_spec)
    zero_ok = repz.passed and bz.dim == 30 and zero_spec.codim is None
    all_zero = CoDoublyCommutingSpec((FiniteBlaschke(zero_function=True),) * 2, (5, 5))
    bzz, repzz = codouble_subspace(all_zero)
    zero_ok = zero_ok and bzz.dim == 0 and repzz.passed
    ok = identity_ok and zero_ok
    report_line(8, "degenerate cases", ok,
                f"m=0 identity {identity_ok}, zero-symbol branches {zero_ok}")
    assert identity_ok
    assert zero_ok
