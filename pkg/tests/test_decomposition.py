import numpy as np
import pytest

from algcurv.decomposition import (
    Bounds,
    Decomposition,
    SolverConfig,
    Term,
    certify_bounds,
    decompose_covderiv,
    decompose_curv,
    decompose_from_embedding,
    decompose_pair,
    max_terms_bound,
    relative_residual,
    solve_stage2,
    span_check,
    stage2_matrix,
)
from algcurv.operators import lemma21_instance
from algcurv.polynomial import Poly
from algcurv.tensor_core import (
    COVDERIV,
    CURV,
    CovDerivTensor,
    CurvTensor,
    SymForm2,
    SymForm3,
    build_A1,
    build_A_Psi,
    class_basis,
    random_element,
    random_sym2,
    random_sym3,
)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(mode="bogus")
    with pytest.raises(ValueError):
        SolverConfig(restarts=0)
    assert SolverConfig().terms_for(4) == 10 == max_terms_bound(4)
    assert SolverConfig(max_terms=3).terms_for(4) == 3


def test_sign_gauge(rng):
    P, T = random_sym2(3, rng), random_sym3(3, rng)
    np.testing.assert_array_equal(build_A_Psi(P * -1.0).components, build_A_Psi(P).components)
    np.testing.assert_allclose(build_A1(P * -1.0, T * -1.0).components, build_A1(P, T).components, atol=0)
    np.testing.assert_allclose(build_A1(P, T * -1.0).components, -build_A1(P, T).components, atol=0)


def test_stage2_superposition(rng):
    m = 3
    psis = [random_sym2(m, rng) for _ in range(2)]
    t1 = [random_sym3(m, rng) for _ in range(2)]
    t2 = [random_sym3(m, rng) for _ in range(2)]
    M = stage2_matrix(psis, m)
    Q1 = class_basis(m, COVDERIV)

    def target(ts):
        return sum(build_A1(p, t).components for p, t in zip(psis, ts))

    E = np.linalg.lstsq(M, Q1.T @ (target(t1) + 2 * target(t2)).ravel(), rcond=None)[0]
    E1 = np.linalg.lstsq(M, Q1.T @ target(t1).ravel(), rcond=None)[0]
    E2 = np.linalg.lstsq(M, Q1.T @ target(t2).ravel(), rcond=None)[0]
    np.testing.assert_allclose(M @ E, M @ (E1 + 2 * E2), atol=1e-10)


def test_stage2_recovers_exact(rng):
    m = 3
    psis = [random_sym2(m, rng) for _ in range(3)]
    ts = [random_sym3(m, rng) for _ in range(3)]
    A1 = CovDerivTensor(sum(build_A1(p, t).components for p, t in zip(psis, ts)))
    sol = solve_stage2(psis, A1)
    rec = sum(build_A1(p, t).components for p, t in zip(psis, sol))
    assert relative_residual(A1, rec) < 1e-10


def test_decomposition_reconstruct_consistent(rng):
    P, T = random_sym2(3, rng), random_sym3(3, rng)
    d = Decomposition((Term(1.0, P, T), Term(-1.0, P * 2.0, T)), "pair", 0.0, 0.0)
    np.testing.assert_allclose(d.reconstruct_curv(3).components, -3 * build_A_Psi(P).components, atol=1e-13)
    np.testing.assert_allclose(d.reconstruct_covderiv(3).components, -build_A1(P, T).components, atol=1e-13)
    assert d.to_dict()["term_count"] == 2


def test_relative_residual_zero_target():
    z = np.zeros(3)
    assert relative_residual(z, np.array([3.0, 4.0, 0.0])) == 5.0


@pytest.mark.parametrize("m,k", [(2, 1), (3, 2)])
def test_decompose_curv_small(m, k):
    for seed in range(3):
        A = random_element(m, CURV, seed)
        d = decompose_curv(A, SolverConfig(max_terms=k, seed=seed))
        assert d.success, d.residual_curv
        assert d.term_count == k
        assert relative_residual(A, d.reconstruct_curv(m)) <= 1e-8


def test_decompose_curv_signed_mode():
    A = random_element(3, CURV, 9)
    d = decompose_curv(A, SolverConfig(max_terms=2, mode="signed", seed=1))
    assert d.success
    assert all(t.lam in (-1.0, 1.0) for t in d.terms)


def test_decompose_curv_zero():
    d = decompose_curv(CurvTensor(np.zeros((3,) * 4)))
    assert d.success and d.term_count == 0


def test_decompose_deterministic():
    A = random_element(3, CURV, 2)
    cfg = SolverConfig(max_terms=2, seed=5)
    a, b = decompose_curv(A, cfg), decompose_curv(A, cfg)
    assert a.restart == b.restart
    for s, t in zip(a.terms, b.terms):
        np.testing.assert_array_equal(s.psi.components, t.psi.components)


def test_decompose_curv_too_few_terms_fails_gracefully():
    # a random m=3 tensor has operator rank 2 but needs two terms
    A = random_element(3, CURV, 0)
    d = decompose_curv(A, SolverConfig(max_terms=1, restarts=3, max_iterations=50))
    assert not d.success
    assert d.residual_curv > 1e-3
    assert d.restart in range(3)


def test_decompose_covderiv():
    A1 = random_element(3, COVDERIV, 4)
    d = decompose_covderiv(A1, SolverConfig(seed=0))
    assert d.success
    assert relative_residual(A1, d.reconstruct_covderiv(3)) <= 1e-8


@pytest.mark.parametrize("m", [2, 3])
def test_decompose_pair(m):
    A, A1 = random_element(m, CURV, 10 + m), random_element(m, COVDERIV, 20 + m)
    d = decompose_pair(A, A1, SolverConfig(seed=0))
    assert d.success
    assert d.term_count <= max_terms_bound(m)
    assert all(t.lam == 1.0 for t in d.terms)
    assert relative_residual(A, d.reconstruct_curv(m)) <= 1e-8
    assert relative_residual(A1, d.reconstruct_covderiv(m)) <= 1e-8


def test_decompose_rejects_out_of_class():
    bad = np.random.default_rng(0).standard_normal((2,) * 4)
    with pytest.raises(ValueError):
        decompose_curv(CurvTensor(bad))


def test_embedding_decomposition():
    fs = [Poly.from_monomials(2, [[[2, 0], 1.0], [[1, 2], 0.4]]),
          Poly.from_monomials(2, [[[1, 1], -1.0], [[0, 3], 2.0]])]
    d = decompose_from_embedding(fs)
    assert d.term_count == 2
    assert d.residual_curv <= 1e-12
    assert d.residual_covderiv <= 1e-12
    np.testing.assert_array_equal(d.terms[0].psi.components, [[2, 0], [0, 0]])


def test_bounds_m2():
    b = certify_bounds(random_element(2, CURV, 0), random_element(2, COVDERIV, 0), SolverConfig(seed=0), 16)
    assert b == Bounds(1, 1, 1, 1)


def test_bounds_lemma21_instance():
    inst = lemma21_instance(2)
    b = certify_bounds(inst.A, inst.A1, SolverConfig(seed=0), 16)
    assert b.lower == 2 and b.upper == 2
    assert b.lower1 <= b.upper1 == 2


def test_bounds_single_generator_consistent(rng):
    P, T = random_sym2(4, rng), random_sym3(4, rng)
    b = certify_bounds(build_A_Psi(P), build_A1(P, T), SolverConfig(seed=0), 16)
    assert b.lower == b.upper == 1
    assert b.lower1 == b.upper1 == 1


@pytest.mark.parametrize("m", [2, 3, 4])
@pytest.mark.parametrize("which", [CURV, COVDERIV])
def test_span_full(m, which):
    res = span_check(m, which, seed=1)
    assert res.full


def test_span_needs_enough_samples():
    with pytest.raises(ValueError):
        span_check(3, CURV, n_samples=5)


def test_span_deficient_with_structured_sample():
    # generators built from a fixed Psi only span a proper subspace
    P = SymForm2(np.eye(3))
    cols = np.array([build_A1(P, SymForm3.symmetrized(t)).components.ravel()
                     for t in np.random.default_rng(0).standard_normal((40, 3, 3, 3))]).T
    assert np.linalg.matrix_rank(cols, tol=1e-9) < 15
