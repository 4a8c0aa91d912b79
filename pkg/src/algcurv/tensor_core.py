"""Dense curvature-type tensors, their symmetry classes and the two generator maps.

Index conventions: a curvature tensor ``A`` is an ``m**4`` array ``A[i, j, k, l]``
standing for ``A(e_i, e_j, e_k, e_l)``.  A covariant-derivative tensor stores the
derivative argument last, ``A1[i, j, k, l, n] = A1(e_i, e_j, e_k, e_l; e_n)``.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Union

import numpy as np

# singular values at or below RANK_RTOL * sigma_max count as zero
RANK_RTOL = 1e-9
SYMMETRY_TOL = 1e-12
MIN_DIM, MAX_DIM = 2, 6

CURV = "curv"
COVDERIV = "covderiv"


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Space:
    """A real vector space with a non-degenerate inner product.

    By default the inner product is diagonal in the coordinate basis with the
    ``p`` negative signs first.  ``Space.from_gram`` accepts an arbitrary
    non-degenerate symmetric Gram matrix (needed for coordinate frames that are
    not orthonormal, e.g. the null-paired frames of neutral-signature metrics).
    """

    p: int
    q: int
    gram_matrix: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.p < 0 or self.q < 0 or self.p + self.q < 1:
            raise ValueError(f"invalid signature ({self.p}, {self.q})")
        if self.gram_matrix is not None:
            g = np.asarray(self.gram_matrix, dtype=float)
            if g.shape != (self.m, self.m):
                raise ValueError("gram matrix shape does not match signature")
            object.__setattr__(self, "gram_matrix", _frozen(g))

    @classmethod
    def riemannian(cls, m: int) -> "Space":
        return cls(0, m)

    @classmethod
    def from_signature(cls, m: int, signature=None) -> "Space":
        if signature is None:
            return cls.riemannian(m)
        p, q = signature
        if p + q != m:
            raise ValueError(f"signature {signature} does not sum to m={m}")
        return cls(p, q)

    @classmethod
    def from_gram(cls, gram) -> "Space":
        g = np.asarray(gram, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("gram matrix must be square")
        if np.max(np.abs(g - g.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(g))):
            raise ValueError("gram matrix is not symmetric")
        ev = np.linalg.eigvalsh(0.5 * (g + g.T))
        if np.min(np.abs(ev)) <= 1e-10 * max(1.0, np.max(np.abs(ev))):
            raise ValueError("gram matrix is degenerate")
        p = int(np.sum(ev < 0))
        return cls(p, g.shape[0] - p, gram_matrix=g)

    @property
    def m(self) -> int:
        return self.p + self.q

    @property
    def signature(self) -> tuple[int, int]:
        return (self.p, self.q)

    @property
    def metric_diagonal(self) -> tuple[int, ...]:
        return (-1,) * self.p + (1,) * self.q

    @property
    def is_riemannian(self) -> bool:
        return self.p == 0

    @property
    def gram(self) -> np.ndarray:
        if self.gram_matrix is not None:
            return self.gram_matrix
        return np.diag(np.array(self.metric_diagonal, dtype=float))

    @property
    def gram_inv(self) -> np.ndarray:
        if self.gram_matrix is None:
            return self.gram  # diagonal +-1 is its own inverse
        return np.linalg.inv(self.gram_matrix)

    def inner(self, x, y) -> float:
        return float(np.asarray(x) @ self.gram @ np.asarray(y))


class _Tensor:
    order: int = 0

    def __init__(self, components):
        arr = np.array(components, dtype=float)
        if arr.ndim != self.order or len(set(arr.shape)) != 1:
            raise ValueError(
                f"{type(self).__name__} needs an order-{self.order} array with equal axes, "
                f"got shape {arr.shape}"
            )
        arr.setflags(write=False)
        self._components = arr

    @property
    def components(self) -> np.ndarray:
        return self._components

    @property
    def m(self) -> int:
        return self._components.shape[0]

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self._components), initial=0.0))

    def __add__(self, other):
        _same_class(self, other)
        return type(self)(self._components + other._components)

    def __sub__(self, other):
        _same_class(self, other)
        return type(self)(self._components - other._components)

    def __mul__(self, c):
        return type(self)(float(c) * self._components)

    __rmul__ = __mul__

    def __neg__(self):
        return type(self)(-self._components)

    def __repr__(self):
        return f"{type(self).__name__}(m={self.m}, |.|inf={self.norm_inf():.3g})"


class SymForm2(_Tensor):
    """Symmetric bilinear form on V."""

    order = 2

    def __init__(self, components):
        super().__init__(components)
        c = self._components
        if np.max(np.abs(c - c.T), initial=0.0) > 1e-14 * max(1.0, self.norm_inf()):
            raise ValueError("SymForm2 components are not symmetric")

    @classmethod
    def symmetrized(cls, a) -> "SymForm2":
        a = np.asarray(a, dtype=float)
        return cls(0.5 * (a + a.T))


class SymForm3(_Tensor):
    """Totally symmetric trilinear form on V."""

    order = 3

    def __init__(self, components):
        super().__init__(components)
        c = self._components
        scale = 1e-14 * max(1.0, self.norm_inf())
        for perm in itertools.permutations(range(3)):
            if np.max(np.abs(c - c.transpose(perm)), initial=0.0) > scale:
                raise ValueError("SymForm3 components are not totally symmetric")

    @classmethod
    def symmetrized(cls, a) -> "SymForm3":
        a = np.asarray(a, dtype=float)
        return cls(sum(a.transpose(p) for p in itertools.permutations(range(3))) / 6.0)


class CurvTensor(_Tensor):
    order = 4
    kind = CURV


class CovDerivTensor(_Tensor):
    order = 5
    kind = COVDERIV


AnyTensor = Union[CurvTensor, CovDerivTensor]


def _same_class(t1, t2):
    if type(t1) is not type(t2):
        raise TypeError(f"class mismatch: {type(t1).__name__} vs {type(t2).__name__}")
    if t1.m != t2.m:
        raise ValueError(f"dimension mismatch: {t1.m} vs {t2.m}")


# ---------------------------------------------------------------------------
# generators


def build_A_Psi(psi: SymForm2, m: int | None = None) -> CurvTensor:
    """A_Psi(x,y,z,w) = Psi(x,w) Psi(y,z) - Psi(x,z) Psi(y,w)."""
    if m is not None and psi.m != m:
        raise ValueError(f"psi has dimension {psi.m}, expected {m}")
    P = psi.components
    return CurvTensor(np.einsum("il,jk->ijkl", P, P) - np.einsum("ik,jl->ijkl", P, P))


def build_A1(psi: SymForm2, psi1: SymForm3) -> CovDerivTensor:
    """The product-rule generator built from a 2-form and a 3-form.

    ``A1[i,j,k,l,n] = P1[i,l,n] P[j,k] + P[i,l] P1[j,k,n] - P1[i,k,n] P[j,l] - P[i,k] P1[j,l,n]``
    """
    if psi.m != psi1.m:
        raise ValueError(f"dimension mismatch: psi {psi.m}, psi1 {psi1.m}")
    P, T = psi.components, psi1.components
    return CovDerivTensor(
        np.einsum("iln,jk->ijkln", T, P)
        + np.einsum("il,jkn->ijkln", P, T)
        - np.einsum("ikn,jl->ijkln", T, P)
        - np.einsum("ik,jln->ijkln", P, T)
    )


# ---------------------------------------------------------------------------
# symmetry identities


def _curv_violations(a: np.ndarray) -> dict[str, float]:
    # a may carry a trailing axis (the derivative slot); identities act on the first four
    anti = a + a.swapaxes(0, 1)
    pair = a - a.transpose((2, 3, 0, 1) + tuple(range(4, a.ndim)))
    bianchi = (
        a
        + a.transpose((2, 0, 1, 3) + tuple(range(4, a.ndim)))
        + a.transpose((1, 2, 0, 3) + tuple(range(4, a.ndim)))
    )
    return {
        "antisymmetry": float(np.max(np.abs(anti), initial=0.0)),
        "pair_symmetry": float(np.max(np.abs(pair), initial=0.0)),
        "first_bianchi": float(np.max(np.abs(bianchi), initial=0.0)),
    }


def _second_bianchi(a: np.ndarray) -> float:
    # A(x,y,z,w;v) + A(x,y,w,v;z) + A(x,y,v,z;w)
    s = a + a.transpose(0, 1, 3, 4, 2) + a.transpose(0, 1, 4, 2, 3)
    return float(np.max(np.abs(s), initial=0.0))


@dataclass(frozen=True)
class SymmetryReport:
    violations: dict
    scale: float
    tol: float

    @property
    def passed(self) -> bool:
        return all(v <= self.tol * self.scale for v in self.violations.values())

    @property
    def max_violation(self) -> float:
        return max(self.violations.values())

    def to_dict(self) -> dict:
        return {
            "violations": dict(self.violations),
            "scale": self.scale,
            "tol": self.tol,
            "passed": self.passed,
        }


def check_symmetries(t, tol: float = SYMMETRY_TOL) -> SymmetryReport:
    """Max violation of every defining identity of the tensor's class.

    Passing means each violation is at most ``tol * |t|_inf``.  Accepts a
    CurvTensor, a CovDerivTensor, or a bare order-4/order-5 array.
    """
    a = t.components if isinstance(t, _Tensor) else np.asarray(t, dtype=float)
    if a.ndim not in (4, 5):
        raise ValueError(f"expected an order-4 or order-5 tensor, got order {a.ndim}")
    v = _curv_violations(a)
    if a.ndim == 5:
        v["second_bianchi"] = _second_bianchi(a)
    return SymmetryReport(v, float(np.max(np.abs(a), initial=0.0)), tol)


# ---------------------------------------------------------------------------
# projection onto the symmetry classes


def _check_dim(m: int):
    if not MIN_DIM <= m <= MAX_DIM:
        raise ValueError(f"dimension m={m} outside supported range {MIN_DIM}..{MAX_DIM}")


def _permutation_rows(m: int, order: int, perm: tuple, sign: float) -> np.ndarray:
    """Rows of the functional t -> t + sign * t.transpose(perm), one per multi-index."""
    n = m**order
    idx = np.arange(n).reshape((m,) * order)
    permuted = idx.transpose(perm).ravel()
    rows = np.zeros((n, n))
    rows[np.arange(n), np.arange(n)] += 1.0
    rows[np.arange(n), permuted] += sign
    return rows


def curv_constraint_matrix(m: int) -> np.ndarray:
    """Stacked linear functionals whose joint kernel is the curvature class in R^(m^4)."""
    n = m**4
    idx = np.arange(n).reshape((m,) * 4)
    anti = _permutation_rows(m, 4, (1, 0, 2, 3), 1.0)
    pair = _permutation_rows(m, 4, (2, 3, 0, 1), -1.0)
    bianchi = np.zeros((n, n))
    r = np.arange(n)
    for perm in ((0, 1, 2, 3), (2, 0, 1, 3), (1, 2, 0, 3)):
        bianchi[r, idx.transpose(perm).ravel()] += 1.0
    return np.vstack([anti, pair, bianchi])


def _second_bianchi_apply(columns: np.ndarray, m: int) -> np.ndarray:
    """Second Bianchi functional applied to each column of a flattened order-5 basis."""
    a = columns.T.reshape((-1,) + (m,) * 5)
    s = a + a.transpose(0, 1, 2, 4, 5, 3) + a.transpose(0, 1, 2, 5, 3, 4)
    return s.reshape(a.shape[0], -1).T


def kernel(matrix: np.ndarray, atol: float = 0.0) -> np.ndarray:
    """Orthonormal kernel basis via a thin SVD.

    Singular values at or below ``max(RANK_RTOL * sigma_max, atol)`` count as zero.
    """
    a = np.asarray(matrix, dtype=float)
    if a.shape[0] < a.shape[1]:
        a = np.vstack([a, np.zeros((a.shape[1] - a.shape[0], a.shape[1]))])
    _, s, vh = np.linalg.svd(a, full_matrices=False)
    rank = numerical_rank(s, atol)
    return vh[rank:].T.copy()


@functools.lru_cache(maxsize=None)
def class_basis(m: int, which: str) -> np.ndarray:
    """Orthonormal basis (columns) of the symmetry class inside the flattened tensor space.

    The covariant-derivative class is the kernel of the second Bianchi functional
    restricted to (curvature class) x V*, which equals the kernel of the full
    stacked constraint system but keeps the SVD at a few hundred columns.
    """
    _check_dim(m)
    curv = kernel(curv_constraint_matrix(m), atol=RANK_RTOL)
    if which == CURV:
        basis = curv
    elif which == COVDERIV:
        lifted = np.kron(curv, np.eye(m))  # derivative slot is the fastest index
        # integer constraints times orthonormal columns: O(1) scale, so floor the cutoff
        null = kernel(_second_bianchi_apply(lifted, m), atol=RANK_RTOL)
        basis = lifted @ null
    else:
        raise ValueError(f"unknown class {which!r}")
    basis.setflags(write=False)
    return basis


def class_dimension(m: int, which: str) -> int:
    return class_basis(m, which).shape[1]


def project(t) -> AnyTensor:
    """Orthogonal projection of a raw order-4 or order-5 array onto its symmetry class."""
    a = t.components if isinstance(t, _Tensor) else np.asarray(t, dtype=float)
    if a.ndim not in (4, 5) or len(set(a.shape)) != 1:
        raise ValueError(f"cannot project array of shape {a.shape}")
    which = CURV if a.ndim == 4 else COVDERIV
    Q = class_basis(a.shape[0], which)
    out = (Q @ (Q.T @ a.ravel())).reshape(a.shape)
    return CurvTensor(out) if which == CURV else CovDerivTensor(out)


def inner(t1, t2) -> float:
    """Componentwise Euclidean inner product of two tensors of the same class."""
    _same_class(t1, t2)
    return float(np.vdot(t1.components, t2.components))


def norm(t) -> float:
    return float(np.linalg.norm(t.components.ravel()))


def random_element(m: int, which: str, seed: int) -> AnyTensor:
    rng = np.random.default_rng(seed)
    order = 4 if which == CURV else 5
    if which not in (CURV, COVDERIV):
        raise ValueError(f"unknown class {which!r}")
    return project(rng.standard_normal((m,) * order))


def random_sym2(m: int, rng: np.random.Generator) -> SymForm2:
    return SymForm2.symmetrized(rng.standard_normal((m, m)))


def random_sym3(m: int, rng: np.random.Generator) -> SymForm3:
    return SymForm3.symmetrized(rng.standard_normal((m, m, m)))


def numerical_rank(singular_values, atol: float = 0.0) -> int:
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0:
        return 0
    cut = max(RANK_RTOL * s.max(), atol)
    return int(np.sum(s > cut))
