"""Metric germs realizing prescribed curvature jets, and curvature of explicit metrics.

Two independent routes compute curvature of a metric field:

* exact jets: metric derivatives up to order three come from polynomial
  coefficients, then the general Levi-Civita formulas are applied;
* ``curvature_fd_oracle``: nested central differences of the metric values.

Conventions: ``dg[a, i, k] = d_a g_ik``, ``Gamma[i, j, k] = g(nabla_i d_j, d_k)`` and
``R[i, j, k, l] = g(nabla_i nabla_j d_k - nabla_j nabla_i d_k, d_l)``, which
reduces at a point with vanishing 1-jet to

    R_ijkl = 1/2 (d_i d_k g_jl + d_j d_l g_ik - d_i d_l g_jk - d_j d_k g_il).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .polynomial import Poly
from .tensor_core import (
    CovDerivTensor,
    CurvTensor,
    Space,
    SymForm2,
    SymForm3,
    check_symmetries,
)

INGEST_TOL = 1e-9
DEFAULT_H = 1e-3
EXACT_TOL = 1e-12
FD_TOL = 1e-6
# step for fd checks on metrics with quartic and higher terms: Richardson at this h
# keeps truncation (large h) and nested-difference roundoff (small h) both below 1e-8
FD_CHECK_H = 6e-3


def _sym_jl(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.swapaxes(2, 3))


def _sym_jln(a: np.ndarray) -> np.ndarray:
    return sum(a.transpose((0, 1) + tuple(2 + p for p in perm))
               for perm in itertools.permutations(range(3))) / 6.0


@dataclass(frozen=True)
class MetricGerm:
    """``g_ik(x) = coeff0_ik + Q[i,k,j,l] x_j x_l + C[i,k,j,l,n] x_j x_l x_n``.

    ``coeff2`` is symmetric in (i,k) and in (j,l); ``coeff3`` is symmetric in
    (i,k) and totally symmetric in (j,l,n).  There are no linear terms, so the
    1-jet vanishes at the origin by construction.
    """

    coeff0: np.ndarray
    coeff2: np.ndarray
    coeff3: np.ndarray

    def __post_init__(self):
        g0 = np.array(self.coeff0, dtype=float)
        m = g0.shape[0]
        Q = np.array(self.coeff2, dtype=float)
        C = np.array(self.coeff3, dtype=float)
        if Q.shape == (m,) * 4 and C.shape == (m,) * 5:
            Q, C = _sym_jl(Q), _sym_jln(C)
        if g0.shape != (m, m) or Q.shape != (m,) * 4 or C.shape != (m,) * 5:
            raise ValueError("inconsistent germ coefficient shapes")
        if abs(np.linalg.det(g0)) <= 1e-10:
            raise ValueError("coeff0 is singular")
        scale = max(1.0, np.abs(Q).max(initial=0), np.abs(C).max(initial=0))
        if (np.abs(g0 - g0.T).max() > 1e-14
                or np.abs(Q - Q.swapaxes(0, 1)).max(initial=0) > 1e-12 * scale
                or np.abs(C - C.swapaxes(0, 1)).max(initial=0) > 1e-12 * scale):
            raise ValueError("germ coefficients are not symmetric in (i, k)")
        Q = 0.5 * (Q + Q.swapaxes(0, 1))
        C = 0.5 * (C + C.swapaxes(0, 1))
        for name, arr in (("coeff0", g0), ("coeff2", Q), ("coeff3", C)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def m(self) -> int:
        return self.coeff0.shape[0]

    @property
    def space(self) -> Space:
        g0 = self.coeff0
        if np.count_nonzero(g0 - np.diag(np.diag(g0))) == 0 and np.all(np.abs(np.diag(g0)) == 1):
            d = np.diag(g0)
            if np.all(np.diff(d) >= 0):
                return Space(int(np.sum(d < 0)), int(np.sum(d > 0)))
        return Space.from_gram(g0)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (self.coeff0
                + np.einsum("ikjl,j,l->ik", self.coeff2, x, x)
                + np.einsum("ikjln,j,l,n->ik", self.coeff3, x, x, x))

    def jets(self, x):
        """Exact (g, dg, d2g, d3g) at ``x``; derivative indices come first."""
        x = np.asarray(x, dtype=float)
        Q, C = self.coeff2, self.coeff3
        g = self(x)
        dg = (2 * np.einsum("ikal,l->aik", Q, x)
              + 3 * np.einsum("ikaln,l,n->aik", C, x, x))
        d2g = 2 * Q.transpose(2, 3, 0, 1) + 6 * np.einsum("ikabn,n->abik", C, x)
        d3g = 6 * C.transpose(2, 3, 4, 0, 1)
        return g, dg, d2g, d3g

    def to_poly_metric(self) -> "PolyMetric":
        m = self.m
        entries = [[Poly.constant(m, self.coeff0[i, k]) for k in range(m)] for i in range(m)]
        for i, k in itertools.product(range(m), repeat=2):
            p = entries[i][k]
            for j, l in itertools.product(range(m), repeat=2):
                c = self.coeff2[i, k, j, l]
                if c:
                    e = [0] * m
                    e[j] += 1
                    e[l] += 1
                    p = p + Poly.monomial(e, c)
            for j, l, n in itertools.product(range(m), repeat=3):
                c = self.coeff3[i, k, j, l, n]
                if c:
                    e = [0] * m
                    e[j] += 1
                    e[l] += 1
                    e[n] += 1
                    p = p + Poly.monomial(e, c)
            entries[i][k] = p
        return PolyMetric(entries)


@dataclass(frozen=True)
class SmoothMetric:
    """A metric field given only by an evaluator ``x -> symmetric m x m array``."""

    m: int
    evaluator: Callable

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(x, dtype=float)), dtype=float)


class PolyMetric(SmoothMetric):
    """Metric whose entries are polynomials; supports exact jets at any point."""

    def __init__(self, entries: Sequence[Sequence[Poly]]):
        m = len(entries)
        for i in range(m):
            for k in range(i + 1, m):
                diff = entries[i][k] - entries[k][i]
                if any(abs(c) > 1e-12 for c in diff.coeffs.values()):
                    raise ValueError(f"metric entries ({i},{k}) and ({k},{i}) differ")
        # upper triangle is authoritative
        entries = [[entries[min(i, k)][max(i, k)] for k in range(m)] for i in range(m)]
        exps = sorted({e for row in entries for p in row for e in p.coeffs})
        if not exps:
            exps = [(0,) * m]
        E = np.array(exps, dtype=float)
        pos = {e: r for r, e in enumerate(exps)}
        coef = np.zeros((len(exps), m, m))
        for i in range(m):
            for k in range(m):
                for e, c in entries[i][k].coeffs.items():
                    coef[pos[e], i, k] = c
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "entries", tuple(tuple(row) for row in entries))
        object.__setattr__(self, "_exponents", E)
        object.__setattr__(self, "_coef", coef)
        object.__setattr__(self, "evaluator", self._evaluate)

    def _evaluate(self, x):
        mon = np.prod(np.asarray(x, dtype=float)[None, :] ** self._exponents, axis=1)
        return np.tensordot(mon, self._coef, axes=1)

    def jets(self, x):
        m = self.m
        x = np.asarray(x, dtype=float)
        g = self(x)
        dg = np.zeros((m, m, m))
        d2g = np.zeros((m,) * 4)
        d3g = np.zeros((m,) * 5)
        for i in range(m):
            for k in range(i, m):
                p = self.entries[i][k]
                if not p.coeffs:
                    continue
                dg[:, i, k] = dg[:, k, i] = p.gradient_at(x)
                h2 = p.derivative_tensor(2, x)
                h3 = p.derivative_tensor(3, x)
                d2g[:, :, i, k] = d2g[:, :, k, i] = h2
                d3g[:, :, :, i, k] = d3g[:, :, :, k, i] = h3
        return g, dg, d2g, d3g


# ---------------------------------------------------------------------------
# germ realizing (A, A1)


def _require_class(t, name):
    rep = check_symmetries(t, INGEST_TOL)
    if not rep.passed:
        raise ValueError(f"{name} is not in its symmetry class: {rep.violations}")


def build_realizing_germ(space: Space, A: CurvTensor, A1: CovDerivTensor) -> MetricGerm:
    """Metric germ with vanishing 1-jet whose R(0), nabla R(0) are A, A1.

    ``g_ik = <e_i,e_k> - 1/3 A_ijlk x_j x_l - 1/6 A1_ijlk;n x_j x_l x_n``.
    """
    m = space.m
    if A.m != m or A1.m != m:
        raise ValueError(f"dimension mismatch: space {m}, A {A.m}, A1 {A1.m}")
    _require_class(A, "A")
    _require_class(A1, "A1")
    a = A.components
    a1 = A1.components
    Q = -a.transpose(0, 3, 1, 2) / 3.0        # Q[i,k,j,l] = -A[i,j,l,k]/3
    C = -a1.transpose(0, 3, 1, 2, 4) / 6.0    # C[i,k,j,l,n] = -A1[i,j,l,k,n]/6
    # (i,k) symmetry holds only after symmetrizing the monomial indices
    return MetricGerm(space.gram.copy(), _sym_jl(Q), _sym_jln(C))


# ---------------------------------------------------------------------------
# exact curvature


def christoffel_from_dg(dg: np.ndarray) -> np.ndarray:
    return 0.5 * (dg + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0))


def curvature_from_jets(g, dg, d2g, d3g):
    """R and nabla R at a point from metric derivatives, general Levi-Civita formulas."""
    ginv = np.linalg.inv(g)
    gam = christoffel_from_dg(dg)                           # Gamma_ijk
    gup = np.einsum("ab,ijb->ija", ginv, gam)               # Gamma_ij^a
    # dgam[n,i,j,k] = d_n Gamma_ijk
    dgam = 0.5 * (d2g + d2g.transpose(0, 2, 1, 3) - d2g.transpose(0, 2, 3, 1))
    R = (dgam - dgam.transpose(1, 0, 2, 3)
         - np.einsum("jka,ila->ijkl", gup, gam)
         + np.einsum("ika,jla->ijkl", gup, gam))

    # d2gam[n,i,j,k,l] = d_n d_i Gamma_jkl
    d2gam = 0.5 * (d3g + d3g.transpose(0, 1, 3, 2, 4) - d3g.transpose(0, 1, 3, 4, 2))
    dginv = -np.einsum("ac,ncd,db->nab", ginv, dg, ginv)
    dgup = np.einsum("nab,ijb->nija", dginv, gam) + np.einsum("ab,nijb->nija", ginv, dgam)
    dR = (d2gam - d2gam.transpose(0, 2, 1, 3, 4)
          - np.einsum("njka,ila->nijkl", dgup, gam)
          - np.einsum("jka,nila->nijkl", gup, dgam)
          + np.einsum("nika,jla->nijkl", dgup, gam)
          + np.einsum("ika,njla->nijkl", gup, dgam))
    dR = dR.transpose(1, 2, 3, 4, 0)
    nablaR = dR - _gamma_action(gup, R)
    return R, nablaR


def _gamma_action(gup: np.ndarray, R: np.ndarray) -> np.ndarray:
    """sum over slots of Gamma^a_{n s} R(..a..), returned with n as the last index."""
    return (np.einsum("nia,ajkl->ijkln", gup, R)
            + np.einsum("nja,iakl->ijkln", gup, R)
            + np.einsum("nka,ijal->ijkln", gup, R)
            + np.einsum("nla,ijka->ijkln", gup, R))


def _jets(metric, x):
    if not hasattr(metric, "jets"):
        raise TypeError(f"{type(metric).__name__} has no exact jets; use the fd oracle")
    return metric.jets(x)


def curvature_exact(metric, x=None) -> tuple[CurvTensor, CovDerivTensor]:
    """R and nabla R of a polynomial metric (MetricGerm or PolyMetric) at ``x``."""
    if x is None:
        x = np.zeros(metric.m)
    R, nR = curvature_from_jets(*_jets(metric, x))
    return CurvTensor(R), CovDerivTensor(nR)


def christoffel(metric, x=None, h: float = DEFAULT_H) -> np.ndarray:
    """Gamma_ijk = 1/2 (d_i g_jk + d_j g_ik - d_k g_ij) at ``x``.

    Exact for polynomial metrics, central differences otherwise.
    """
    if x is None:
        x = np.zeros(metric.m)
    x = np.asarray(x, dtype=float)
    if hasattr(metric, "jets"):
        g, dg, _, _ = metric.jets(x)
    else:
        g = metric(x)
        dg = _central(metric, x, h)
    _nondegenerate(g, x)
    return christoffel_from_dg(dg)


def _nondegenerate(g, x):
    if abs(np.linalg.det(g)) <= 1e-12 * max(1.0, np.abs(g).max()) ** len(g):
        raise ValueError(f"metric is singular at x={np.asarray(x).tolist()}")


def curvature_at_origin(germ: MetricGerm) -> CurvTensor:
    """R(0) from the second-order coefficients alone (vanishing 1-jet)."""
    d2 = 2 * germ.coeff2.transpose(2, 3, 0, 1)   # d2[a,b,i,k] = d_a d_b g_ik(0)
    R = 0.5 * (np.einsum("ikjl->ijkl", d2) + np.einsum("jlik->ijkl", d2)
               - np.einsum("iljk->ijkl", d2) - np.einsum("jkil->ijkl", d2))
    return CurvTensor(R)


def covderiv_at_origin(germ: MetricGerm) -> CovDerivTensor:
    """nabla R(0) from the cubic coefficients alone (vanishing 1-jet)."""
    d3 = 6 * germ.coeff3.transpose(2, 3, 4, 0, 1)  # d3[a,b,c,i,k] = d_a d_b d_c g_ik(0)
    R1 = 0.5 * (np.einsum("iknjl->ijkln", d3) + np.einsum("jlnik->ijkln", d3)
                - np.einsum("ilnjk->ijkln", d3) - np.einsum("jknil->ijkln", d3))
    return CovDerivTensor(R1)


# ---------------------------------------------------------------------------
# finite-difference oracle


def _central(f, x, h):
    """Stack of central differences d_a f(x), derivative index first."""
    out = []
    for a in range(len(x)):
        e = np.zeros(len(x))
        e[a] = h
        out.append((f(x + e) - f(x - e)) / (2 * h))
    return np.array(out)


def _fd_curvature(metric, x, h):
    def gamma(y):
        return christoffel_from_dg(_central(metric, y, h))

    def curvature(y):
        g = metric(y)
        _nondegenerate(g, y)
        gam = gamma(y)
        gup = np.einsum("ab,ijb->ija", np.linalg.inv(g), gam)
        dgam = _central(gamma, y, h)                      # dgam[n,i,j,k]
        return (dgam - dgam.transpose(1, 0, 2, 3)
                - np.einsum("jka,ila->ijkl", gup, gam)
                + np.einsum("ika,jla->ijkl", gup, gam))

    R = curvature(x)
    dR = _central(curvature, x, h).transpose(1, 2, 3, 4, 0)
    gup = np.einsum("ab,ijb->ija", np.linalg.inv(metric(x)), gamma(x))
    return R, dR - _gamma_action(gup, R)


def curvature_fd_oracle(metric, x=None, h: float = DEFAULT_H,
                        richardson: bool = False) -> tuple[CurvTensor, CovDerivTensor]:
    """R and nabla R at ``x`` from metric values only, by nested central differences.

    Error is O(h^2); ``richardson`` combines steps h and h/2 for O(h^4).
    """
    if x is None:
        x = np.zeros(metric.m)
    x = np.asarray(x, dtype=float)
    R, nR = _fd_curvature(metric, x, h)
    if richardson:
        R2, nR2 = _fd_curvature(metric, x, h / 2)
        R, nR = (4 * R2 - R) / 3, (4 * nR2 - nR) / 3
    return CurvTensor(R), CovDerivTensor(nR)


# ---------------------------------------------------------------------------
# graph metrics and the neutral-signature g_f family


def _gradient_vanishes(f: Poly) -> bool:
    return all(abs(v) <= 1e-14 for v in f.gradient_at(np.zeros(f.nvars)))


def build_graph_metric(f_list: Sequence[Poly], m: int | None = None) -> PolyMetric:
    """Induced metric of the graph x -> (x, f_1(x), ..., f_k(x)).

    ``g_ij = delta_ij + sum_s d_i f_s d_j f_s``.
    """
    if m is None:
        if not f_list:
            raise ValueError("m is required when f_list is empty")
        m = f_list[0].nvars
    for s, f in enumerate(f_list):
        if f.nvars != m:
            raise ValueError(f"f_{s} has {f.nvars} variables, expected {m}")
        if not _gradient_vanishes(f):
            raise ValueError(f"f_{s} has nonzero gradient at the origin")
    grads = [[f.diff(i) for i in range(m)] for f in f_list]
    entries = []
    for i in range(m):
        row = []
        for j in range(m):
            p = Poly.constant(m, 1.0 if i == j else 0.0)
            for gr in grads:
                p = p + gr[i] * gr[j]
            row.append(p)
        entries.append(row)
    return PolyMetric(entries)


def random_graph_functions(m: int, kappa: int, rng: np.random.Generator,
                           n_monomials: int | None = None, max_degree: int = 3) -> list[Poly]:
    """Seeded polynomials with a critical point at 0 (every monomial of degree >= 2)."""
    if max_degree < 2:
        raise ValueError("max_degree must be >= 2")
    n = m * m if n_monomials is None else n_monomials
    out = []
    for _ in range(kappa):
        mons = []
        for _ in range(n):
            exp = [0] * m
            for _ in range(int(rng.integers(2, max_degree + 1))):
                exp[int(rng.integers(m))] += 1
            mons.append([exp, float(rng.standard_normal())])
        out.append(Poly.from_monomials(m, mons))
    return out


def hessian_forms(f_list: Sequence[Poly], x=None) -> list[tuple[SymForm2, SymForm3]]:
    """Second and third derivative forms of each graph function at ``x`` (default 0)."""
    out = []
    for f in f_list:
        pt = np.zeros(f.nvars) if x is None else np.asarray(x, dtype=float)
        out.append((SymForm2(f.derivative_tensor(2, pt)), SymForm3(f.derivative_tensor(3, pt))))
    return out


def _lift(f: Poly, nvars: int) -> Poly:
    pad = (0,) * (nvars - f.nvars)
    return Poly(nvars, {e + pad: c for e, c in f.coeffs.items()})


def build_gf_metric(p: int, f: Poly, at=None):
    """Neutral-signature metric on R^{2p} in coordinates (x_1..x_p, y_1..y_p).

    ``g(d_xi, d_xj) = d_i f d_j f``, ``g(d_yi, d_yj) = 0``, ``g(d_xi, d_yj) = delta_ij``.
    Returns the metric and the Hessian forms of ``f`` at the x-point ``at``
    (default origin), extended by zero to the y directions.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if f.nvars != p:
        raise ValueError(f"f must be a polynomial in {p} variables")
    n = 2 * p
    F = _lift(f, n)
    grad = [F.diff(i) for i in range(p)]
    zero = Poly.zero(n)
    entries = [[zero] * n for _ in range(n)]
    for i in range(p):
        for j in range(p):
            entries[i][j] = grad[i] * grad[j]
        entries[i][p + i] = entries[p + i][i] = Poly.constant(n, 1.0)
    metric = PolyMetric(entries)
    pt = np.zeros(p) if at is None else np.asarray(at, dtype=float)
    psi = np.zeros((n, n))
    psi1 = np.zeros((n, n, n))
    psi[:p, :p] = f.derivative_tensor(2, pt)
    psi1[:p, :p, :p] = f.derivative_tensor(3, pt)
    return metric, SymForm2(psi), SymForm3(psi1)


def gf_point(p: int, at=None, y=None) -> np.ndarray:
    """Full 2p coordinate point from its x part (and optional y part)."""
    x = np.zeros(p) if at is None else np.asarray(at, dtype=float)
    yy = np.zeros(p) if y is None else np.asarray(y, dtype=float)
    return np.concatenate([x, yy])
