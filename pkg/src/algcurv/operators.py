"""Curvature operators built from curvature-type tensors, their ranks and spectra."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor_core import (
    CovDerivTensor,
    CurvTensor,
    Space,
    SymForm2,
    SymForm3,
    build_A1,
    build_A_Psi,
    numerical_rank,
)

# absolute floor for operator ranks, relative to the size of the contracted inputs
RANK_ATOL_REL = 1e-12
ORTHONORMAL_TOL = 1e-10
NULL_REJECT = 1e-6
DEFAULT_SAMPLES = 64
# largest rank of a single generator's operator: 2 for A_Psi, 4 for A_{1,Psi,Psi1}
# (the image of the latter lies in span{psi xi1, psi1(xi3) xi1, psi xi2, psi1(xi3) xi2})
TERM_RANK_CURV = 2
TERM_RANK_COVDERIV = 4


@dataclass(frozen=True)
class OperatorReport:
    matrix: np.ndarray
    singular_values: np.ndarray
    numerical_rank: int
    eigenvalues: np.ndarray

    @classmethod
    def of(cls, matrix: np.ndarray, atol: float = 0.0) -> "OperatorReport":
        M = np.array(matrix, dtype=float)
        M.setflags(write=False)
        s = np.linalg.svd(M, compute_uv=False)
        ev = _sorted_eigs(np.linalg.eigvals(M))
        return cls(M, s, numerical_rank(s, atol), ev)

    def to_dict(self) -> dict:
        return {
            "matrix": self.matrix.tolist(),
            "singular_values": self.singular_values.tolist(),
            "rank": self.numerical_rank,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
        }

    def power_ranks(self, eigenvalue: complex, max_power: int = 3) -> list[int]:
        """Ranks of (M - lambda I)^k, k = 1..max_power.  Diagnostic only."""
        M = self.matrix.astype(complex) - eigenvalue * np.eye(len(self.matrix))
        out, P = [], np.eye(len(M), dtype=complex)
        for _ in range(max_power):
            P = P @ M
            out.append(numerical_rank(np.linalg.svd(P, compute_uv=False)))
        return out


def _sorted_eigs(ev) -> np.ndarray:
    ev = np.asarray(ev, dtype=complex)
    # clean signed zeros so sorting and JSON are stable
    ev = np.array([complex(z.real + 0.0, z.imag + 0.0) for z in ev])
    order = np.lexsort((ev.imag, ev.real))
    return ev[order]


def _vec(x, m, name="vector"):
    v = np.asarray(x, dtype=float)
    if v.shape != (m,):
        raise ValueError(f"{name} has shape {v.shape}, expected ({m},)")
    return v


def _check_tensor(space: Space, t):
    if t.m != space.m:
        raise ValueError(f"tensor dimension {t.m} does not match space dimension {space.m}")


def _raise_index(space: Space, C: np.ndarray) -> np.ndarray:
    # g(M z, w) = C[z, w]  <=>  M^T g = C  <=>  M = g^-1 C^T
    return space.gram_inv @ C.T


def _scale(*arrays) -> float:
    return math.prod(float(np.max(np.abs(a), initial=0.0)) for a in arrays)


def curvature_operator(space: Space, A: CurvTensor, xi1, xi2) -> OperatorReport:
    """R_A(xi1, xi2), characterized by g(R_A(xi1, xi2) z, w) = A(xi1, xi2, z, w)."""
    _check_tensor(space, A)
    m = space.m
    x1, x2 = _vec(xi1, m, "xi1"), _vec(xi2, m, "xi2")
    C = np.einsum("abzw,a,b->zw", A.components, x1, x2)
    return OperatorReport.of(_raise_index(space, C), RANK_ATOL_REL * _scale(A.components, x1, x2))


def covderiv_operator(space: Space, A1: CovDerivTensor, xi1, xi2, xi3) -> OperatorReport:
    """R_A1(xi1, xi2, xi3), with g(R z, w) = A1(xi1, xi2, z, w; xi3)."""
    _check_tensor(space, A1)
    m = space.m
    x1, x2, x3 = (_vec(v, m, n) for v, n in ((xi1, "xi1"), (xi2, "xi2"), (xi3, "xi3")))
    C = np.einsum("abzwc,a,b,c->zw", A1.components, x1, x2, x3)
    atol = RANK_ATOL_REL * _scale(A1.components, x1, x2, x3)
    return OperatorReport.of(_raise_index(space, C), atol)


def jacobi_operator(space: Space, A: CurvTensor, x) -> OperatorReport:
    """J(x) with g(J(x) y, z) = A(y, x, x, z)."""
    _check_tensor(space, A)
    v = _vec(x, space.m, "x")
    C = np.einsum("yabz,a,b->yz", A.components, v, v)
    return OperatorReport.of(_raise_index(space, C), RANK_ATOL_REL * _scale(A.components, v, v))


def szabo_operator(space: Space, A1: CovDerivTensor, x) -> OperatorReport:
    """J1(x) with g(J1(x) y, z) = A1(y, x, x, z; x)."""
    _check_tensor(space, A1)
    v = _vec(x, space.m, "x")
    C = np.einsum("yabzc,a,b,c->yz", A1.components, v, v, v)
    return OperatorReport.of(_raise_index(space, C), RANK_ATOL_REL * _scale(A1.components, v, v, v))


def skew_operator(space: Space, A: CurvTensor, e1, e2) -> OperatorReport:
    """Skew-symmetric curvature operator of the oriented plane spanned by e1, e2.

    The pair must be orthonormal: |g(e1,e1)| = |g(e2,e2)| = 1 and g(e1,e2) = 0.
    """
    m = space.m
    u, w = _vec(e1, m, "e1"), _vec(e2, m, "e2")
    n1, n2, c = space.inner(u, u), space.inner(w, w), space.inner(u, w)
    if (abs(abs(n1) - 1) > ORTHONORMAL_TOL or abs(abs(n2) - 1) > ORTHONORMAL_TOL
            or abs(c) > ORTHONORMAL_TOL):
        raise ValueError(f"(e1, e2) is not orthonormal: g11={n1:.3g}, g22={n2:.3g}, g12={c:.3g}")
    return curvature_operator(space, A, u, w)


# ---------------------------------------------------------------------------
# the explicit rank-2m construction


@dataclass(frozen=True)
class Lemma21Instance:
    """Tensors and vectors achieving operator rank 2*mbar.

    Basis order: e_1..e_mbar, f_1..f_mbar, then the padding vector if m is odd.
    """

    mbar: int
    m: int
    A: CurvTensor
    A1: CovDerivTensor
    xi1: np.ndarray
    xi2: np.ndarray
    xi3: np.ndarray
    psi_list: tuple
    psi1_list: tuple

    def e(self, i: int) -> np.ndarray:
        v = np.zeros(self.m)
        v[i] = 1.0
        return v

    def f(self, i: int) -> np.ndarray:
        v = np.zeros(self.m)
        v[self.mbar + i] = 1.0
        return v

    @property
    def space(self) -> Space:
        return Space.riemannian(self.m)


def lemma21_instance(mbar: int, odd_pad: bool = False) -> Lemma21Instance:
    if mbar < 1:
        raise ValueError("mbar must be >= 1")
    m = 2 * mbar + (1 if odd_pad else 0)
    psis, psi1s = [], []
    for i in range(mbar):
        P = np.zeros((m, m))
        T = np.zeros((m, m, m))
        for idx in (i, mbar + i):          # e_i and f_i, never mixed
            P[idx, idx] = 1.0
            T[idx, idx, idx] = 1.0
        psis.append(SymForm2(P))
        psi1s.append(SymForm3(T))
    A = CurvTensor(sum(build_A_Psi(P).components for P in psis))
    A1 = CovDerivTensor(sum(build_A1(P, T).components for P, T in zip(psis, psi1s)))
    xi1 = np.zeros(m)
    xi1[:mbar] = 1.0
    xi2 = np.zeros(m)
    xi2[mbar:2 * mbar] = 1.0
    return Lemma21Instance(mbar, m, A, A1, xi1, xi2, xi1 + xi2, tuple(psis), tuple(psi1s))


# ---------------------------------------------------------------------------
# certified lower bounds for the generator counts


def _require_riemannian(space: Space):
    if not space.is_riemannian or space.gram_matrix is not None:
        raise ValueError("lower bounds need the standard positive definite inner product")


def nu_lower_bound(space: Space, A: CurvTensor, n_samples: int = DEFAULT_SAMPLES,
                   seed: int = 0, extra=()) -> int:
    """ceil(max sampled rank of R_A(xi1, xi2) / 2), a lower bound on the term count of A.

    ``extra`` holds additional (xi1, xi2) pairs evaluated before the random ones.
    """
    _require_riemannian(space)
    rng = np.random.default_rng(seed)
    best = 0
    pairs = list(extra) + [tuple(rng.standard_normal((2, space.m))) for _ in range(n_samples)]
    for x1, x2 in pairs:
        best = max(best, curvature_operator(space, A, x1, x2).numerical_rank)
    return -(-best // TERM_RANK_CURV)


def nu1_lower_bound(space: Space, A1: CovDerivTensor, n_samples: int = DEFAULT_SAMPLES,
                    seed: int = 0, extra=()) -> int:
    """ceil(max sampled rank of R_A1(xi1, xi2, xi3) / 4).

    A single covariant-derivative generator can reach operator rank 4 once m >= 4,
    so halving the rank would not give a valid bound.
    """
    _require_riemannian(space)
    rng = np.random.default_rng(seed)
    best = 0
    triples = list(extra) + [tuple(rng.standard_normal((3, space.m))) for _ in range(n_samples)]
    for x1, x2, x3 in triples:
        best = max(best, covderiv_operator(space, A1, x1, x2, x3).numerical_rank)
    return -(-best // TERM_RANK_COVDERIV)


def lemma21_lower_bounds(inst: Lemma21Instance, n_samples: int = DEFAULT_SAMPLES,
                         seed: int = 0) -> tuple[int, int]:
    sp = inst.space
    return (nu_lower_bound(sp, inst.A, n_samples, seed, extra=[(inst.xi1, inst.xi2)]),
            nu1_lower_bound(sp, inst.A1, n_samples, seed, extra=[(inst.xi1, inst.xi2, inst.xi3)]))


# ---------------------------------------------------------------------------
# eigenvalue constancy on unit pseudo-spheres


@dataclass(frozen=True)
class ConstancyResult:
    constant: bool
    max_spread: float
    samples: int

    def to_dict(self) -> dict:
        return {"constant": self.constant, "max_spread": self.max_spread, "samples": self.samples}


def sample_unit_vectors(space: Space, sampler: str, n: int, seed: int) -> np.ndarray:
    """Seeded vectors with g(x,x) = +1 (spacelike) or -1 (timelike)."""
    target = {"spacelike": 1.0, "timelike": -1.0}.get(sampler)
    if target is None:
        raise ValueError(f"unknown sampler {sampler!r}")
    if (target > 0 and space.q == 0) or (target < 0 and space.p == 0):
        raise ValueError(f"no {sampler} unit vectors in signature {space.signature}")
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        x = rng.standard_normal(space.m)
        nrm = space.inner(x, x)
        if abs(nrm) < NULL_REJECT or np.sign(nrm) != target:
            continue
        out.append(x / math.sqrt(abs(nrm)))
    return np.array(out)


def multiset_spread(a, b) -> float:
    """Max distance between two eigenvalue multisets paired in (re, im) sorted order."""
    a, b = _sorted_eigs(a), _sorted_eigs(b)
    return float(np.max(np.abs(a - b), initial=0.0))


def eigenvalue_constancy(space: Space, family: str, tensor, sampler: str = "spacelike",
                         n_samples: int = 32, seed: int = 0, tol: float = 1e-8) -> ConstancyResult:
    """Are the eigenvalues of J(x) (jacobi) or J1(x) (szabo) the same for all sampled unit x?"""
    op = {"jacobi": jacobi_operator, "szabo": szabo_operator}.get(family)
    if op is None:
        raise ValueError(f"unknown operator family {family!r}")
    xs = sample_unit_vectors(space, sampler, n_samples, seed)
    spectra = [op(space, tensor, x).eigenvalues for x in xs]
    spread = 0.0
    for i in range(len(spectra)):
        for j in range(i + 1, len(spectra)):
            spread = max(spread, multiset_spread(spectra[i], spectra[j]))
    return ConstancyResult(spread <= tol, spread, len(spectra))
