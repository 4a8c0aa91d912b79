"""Writing curvature tensors as sums of generators.

``decompose_curv`` finds A = sum_i lambda_i A_{Psi_i}; ``decompose_pair`` finds a
common family with A = sum A_{Psi_i} and A1 = sum A_{1,Psi_i,Psi1_i}.  Failure to
converge is reported through the residuals, never raised.
"""
from __future__ import annotations

import functools
import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .operators import nu1_lower_bound, nu_lower_bound
from .realization import build_graph_metric, curvature_exact, hessian_forms
from .tensor_core import (
    COVDERIV,
    CURV,
    CovDerivTensor,
    CurvTensor,
    Space,
    SymForm2,
    SymForm3,
    build_A1,
    build_A_Psi,
    check_symmetries,
    class_basis,
    numerical_rank,
)

log = logging.getLogger(__name__)

INGEST_TOL = 1e-9


def max_terms_bound(m: int) -> int:
    return m * (m + 1) // 2


@dataclass(frozen=True)
class SolverConfig:
    max_terms: Optional[int] = None   # None: m(m+1)/2
    restarts: int = 20
    max_iterations: int = 400
    tolerance: float = 1e-8           # on the relative residual
    seed: int = 0
    mode: str = "unsigned"            # or "signed"
    init_scale: float = 1.0
    method: str = "alternating"       # or "joint"
    sweeps: int = 8                   # alternating passes before the joint polish

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_terms is not None and self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")
        if self.mode not in ("signed", "unsigned"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.method not in ("alternating", "joint"):
            raise ValueError(f"unknown method {self.method!r}")

    def terms_for(self, m: int) -> int:
        return self.max_terms if self.max_terms is not None else max_terms_bound(m)


@dataclass(frozen=True)
class Term:
    lam: float
    psi: SymForm2
    psi1: Optional[SymForm3] = None


@dataclass(frozen=True)
class Decomposition:
    terms: tuple
    target_kind: str                  # "curv", "covderiv" or "pair"
    residual_curv: Optional[float]
    residual_covderiv: Optional[float]
    restart: int = -1
    success: bool = True
    notes: tuple = field(default=())

    @property
    def term_count(self) -> int:
        return len(self.terms)

    def reconstruct_curv(self, m: int) -> CurvTensor:
        out = np.zeros((m,) * 4)
        for t in self.terms:
            out += t.lam * build_A_Psi(t.psi).components
        return CurvTensor(out)

    def reconstruct_covderiv(self, m: int) -> CovDerivTensor:
        out = np.zeros((m,) * 5)
        for t in self.terms:
            if t.psi1 is not None:
                out += t.lam * build_A1(t.psi, t.psi1).components
        return CovDerivTensor(out)

    def to_dict(self) -> dict:
        terms = []
        for t in self.terms:
            d = {"lambda": t.lam, "psi": t.psi.components.tolist()}
            if t.psi1 is not None:
                d["psi1"] = t.psi1.components.tolist()
            terms.append(d)
        return {
            "terms": terms,
            "target_kind": self.target_kind,
            "residual_curv": self.residual_curv,
            "residual_covderiv": self.residual_covderiv,
            "term_count": self.term_count,
            "success": self.success,
        }


def relative_residual(target, approx) -> float:
    """|target - approx| / |target| in the component norm (absolute when target = 0)."""
    t = np.asarray(target.components if hasattr(target, "components") else target)
    a = np.asarray(approx.components if hasattr(approx, "components") else approx)
    den = np.linalg.norm(t)
    num = np.linalg.norm(t - a)
    return float(num / den) if den > 0 else float(num)


# ---------------------------------------------------------------------------
# parametrization: a symmetric form by its upper triangle


@functools.lru_cache(maxsize=None)
def _sym2_basis(m: int) -> np.ndarray:
    mats = []
    for a, b in itertools.combinations_with_replacement(range(m), 2):
        E = np.zeros((m, m))
        E[a, b] = E[b, a] = 1.0
        mats.append(E)
    out = np.array(mats)
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=None)
def _sym3_basis(m: int) -> np.ndarray:
    mats = []
    for idx in itertools.combinations_with_replacement(range(m), 3):
        T = np.zeros((m, m, m))
        for p in set(itertools.permutations(idx)):
            T[p] = 1.0
        mats.append(T)
    out = np.array(mats)
    out.setflags(write=False)
    return out


def _bilinear_curv(P, S):
    """Symmetrized bilinear form behind A_Psi: A_Psi = B(Psi, Psi); batched over a leading axis of P."""
    return 0.5 * (np.einsum("...il,jk->...ijkl", P, S) + np.einsum("il,...jk->...ijkl", S, P)
                  - np.einsum("...ik,jl->...ijkl", P, S) - np.einsum("ik,...jl->...ijkl", S, P))


def _A1_batch(P, T):
    """build_A1 for a batch of 3-forms T[..., i, j, k] and one fixed 2-form P."""
    return (np.einsum("...iln,jk->...ijkln", T, P) + np.einsum("il,...jkn->...ijkln", P, T)
            - np.einsum("...ikn,jl->...ijkln", T, P) - np.einsum("ik,...jln->...ijkln", P, T))


def _A1_batch_psi(Pb, T):
    """build_A1 for a batch of 2-forms Pb[..., i, j] and one fixed 3-form T."""
    return (np.einsum("iln,...jk->...ijkln", T, Pb) + np.einsum("...il,jkn->...ijkln", Pb, T)
            - np.einsum("ikn,...jl->...ijkln", T, Pb) - np.einsum("...ik,jln->...ijkln", Pb, T))


class _Problem:
    """Residual and Jacobian of target - sum_i lambda_i gen(theta_i) in class coordinates."""

    def __init__(self, m, k, lams, target_curv=None, target_cov=None, with_psi1=False,
                 fixed_psi1=False):
        self.m, self.k = m, k
        self.lams = np.asarray(lams, dtype=float)
        self.E2 = _sym2_basis(m)
        self.E3 = _sym3_basis(m)
        self.n2, self.n3 = len(self.E2), len(self.E3)
        self.with_psi1 = with_psi1
        self.block = self.n2 + (self.n3 if with_psi1 else 0)
        self.Qc = class_basis(m, CURV)
        self.Q1 = class_basis(m, COVDERIV) if target_cov is not None else None
        self.tc = None if target_curv is None else self.Qc.T @ target_curv.ravel()
        self.t1 = None if target_cov is None else self.Q1.T @ target_cov.ravel()
        # weights put both parts on the relative scale
        self.wc = 0.0 if self.tc is None else 1.0 / max(np.linalg.norm(self.tc), 1e-300)
        self.w1 = 0.0 if self.t1 is None else 1.0 / max(np.linalg.norm(self.t1), 1e-300)
        if self.tc is not None and np.linalg.norm(self.tc) == 0:
            self.wc = 1.0
        if self.t1 is not None and np.linalg.norm(self.t1) == 0:
            self.w1 = 1.0

    @property
    def nparams(self):
        return self.k * self.block

    def unpack(self, theta):
        theta = theta.reshape(self.k, self.block)
        P = np.einsum("kp,pij->kij", theta[:, : self.n2], self.E2)
        T = np.einsum("kp,pijl->kijl", theta[:, self.n2:], self.E3) if self.with_psi1 else None
        return P, T

    def __call__(self, theta, terms=None):
        """Residual vector and Jacobian (columns restricted to ``terms`` if given)."""
        P, T = self.unpack(theta)
        terms = range(self.k) if terms is None else terms
        rs, Js = [], []
        if self.tc is not None:
            approx = sum(self.lams[i] * (self.Qc.T @ _bilinear_curv(P[i], P[i]).ravel())
                         for i in range(self.k))
            rs.append(self.wc * (self.tc - approx))
            cols = []
            for i in terms:
                dA = 2 * _bilinear_curv(self.E2, P[i]).reshape(self.n2, -1) @ self.Qc
                blk = [-self.wc * self.lams[i] * dA.T]
                if self.with_psi1:
                    blk.append(np.zeros((self.Qc.shape[1], self.n3)))
                cols.append(np.hstack(blk))
            Js.append(np.hstack(cols))
        if self.t1 is not None:
            approx = sum(self.lams[i] * (self.Q1.T @ build_A1(SymForm2(P[i]), SymForm3(T[i])).components.ravel())
                         for i in range(self.k))
            rs.append(self.w1 * (self.t1 - approx))
            cols = []
            for i in terms:
                dP = _A1_batch_psi(self.E2, T[i]).reshape(self.n2, -1) @ self.Q1
                dT = _A1_batch(P[i], self.E3).reshape(self.n3, -1) @ self.Q1
                cols.append(-self.w1 * self.lams[i] * np.hstack([dP.T, dT.T]))
            Js.append(np.hstack(cols))
        return np.concatenate(rs), np.vstack(Js)

    def columns(self, terms):
        return np.concatenate([np.arange(i * self.block, (i + 1) * self.block) for i in terms])


def _lm(problem: _Problem, theta, max_iter: int, target: float, terms=None):
    """Levenberg-Marquardt on the (optionally restricted) parameter block."""
    cols = None if terms is None else problem.columns(terms)
    r, J = problem(theta, terms)
    cost = float(r @ r)
    mu = 1e-3 * max(float(np.max(np.sum(J * J, axis=0), initial=0.0)), 1e-12)
    for _ in range(max_iter):
        if np.sqrt(cost) <= target:
            break
        g = J.T @ r
        H = J.T @ J
        try:
            step = -np.linalg.solve(H + mu * np.eye(len(H)), g)
        except np.linalg.LinAlgError:
            mu *= 10
            continue
        trial = theta.copy()
        if cols is None:
            trial += step
        else:
            trial[cols] += step
        r2, J2 = problem(trial, terms)
        c2 = float(r2 @ r2)
        if c2 < cost:
            improvement = (cost - c2) / cost
            theta, r, J, cost = trial, r2, J2, c2
            mu = max(mu / 3, 1e-15)
            if improvement < 1e-12:
                break
        else:
            mu *= 4
            if mu > 1e16:
                break
    return theta, np.sqrt(cost)


def _solve(problem: _Problem, theta, config: SolverConfig, target: float):
    if config.method == "alternating" and problem.k > 1:
        res = np.inf
        for _ in range(config.sweeps):
            for i in range(problem.k):
                theta, res = _lm(problem, theta, 3, target, terms=[i])
            if res <= target:
                return theta, res
    return _lm(problem, theta, config.max_iterations, target)


def _restart_rng(seed: int, r: int) -> np.random.Generator:
    return np.random.default_rng([seed, r])


def _init_theta(problem: _Problem, rng, scale_curv: float, scale_cov: float, init_scale: float):
    th = np.empty((problem.k, problem.block))
    th[:, : problem.n2] = rng.standard_normal((problem.k, problem.n2)) * scale_curv * init_scale
    if problem.with_psi1:
        th[:, problem.n2:] = rng.standard_normal((problem.k, problem.n3)) * scale_cov * init_scale
    return th.ravel()


def _lambdas(config: SolverConfig, k: int, rng) -> np.ndarray:
    if config.mode == "unsigned":
        return np.ones(k)
    return rng.choice([-1.0, 1.0], size=k)


def _require(t, name):
    rep = check_symmetries(t, INGEST_TOL)
    if not rep.passed:
        raise ValueError(f"{name} is not in its symmetry class: {rep.violations}")


def _pick(results):
    """First restart meeting tolerance; otherwise lowest residual (ties by restart index)."""
    for res in results:
        if res.success:
            return res
    return min(results, key=lambda d: (max(d.residual_curv or 0.0, d.residual_covderiv or 0.0), d.restart))


# ---------------------------------------------------------------------------
# public solvers


def decompose_curv(A: CurvTensor, config: SolverConfig = SolverConfig()) -> Decomposition:
    """A = sum_i lambda_i A_{Psi_i} with config.max_terms terms (lambda_i = 1 when unsigned)."""
    _require(A, "A")
    m = A.m
    k = config.terms_for(m)
    a = A.components
    nrm = np.linalg.norm(a)
    if nrm == 0:
        return Decomposition((), CURV, 0.0, None, restart=0)
    results = []
    for r in range(config.restarts):
        rng = _restart_rng(config.seed, r)
        lams = _lambdas(config, k, rng)
        prob = _Problem(m, k, lams, target_curv=a)
        theta0 = _init_theta(prob, rng, np.sqrt(nrm / m), 0.0, config.init_scale)
        theta, _ = _solve(prob, theta0, config, 0.1 * config.tolerance)
        P, _ = prob.unpack(theta)
        terms = tuple(Term(float(l), SymForm2.symmetrized(p)) for l, p in zip(lams, P))
        dec = Decomposition(terms, CURV, 0.0, None, restart=r)
        res = relative_residual(A, dec.reconstruct_curv(m))
        dec = replace(dec, residual_curv=res, success=res <= config.tolerance)
        results.append(dec)
        if dec.success:
            break
    return _pick(results)


def decompose_covderiv(A1: CovDerivTensor, config: SolverConfig = SolverConfig()) -> Decomposition:
    """A1 = sum_j A_{1,Psi_j,Psi1_j} with config.max_terms terms, Psi_j free.

    Signs are always absorbable here (-A_{1,P,T} = A_{1,P,-T}), so mode is ignored.
    """
    _require(A1, "A1")
    m = A1.m
    k = config.terms_for(m)
    a1 = A1.components
    nrm = np.linalg.norm(a1)
    if nrm == 0:
        return Decomposition((), COVDERIV, None, 0.0, restart=0)
    results = []
    for r in range(config.restarts):
        rng = _restart_rng(config.seed, r)
        prob = _Problem(m, k, np.ones(k), target_cov=a1, with_psi1=True)
        s = (nrm / m) ** 0.5
        theta0 = _init_theta(prob, rng, s, s, config.init_scale)
        theta, _ = _solve(prob, theta0, config, 0.1 * config.tolerance)
        P, T = prob.unpack(theta)
        terms = tuple(Term(1.0, SymForm2.symmetrized(p), SymForm3.symmetrized(t)) for p, t in zip(P, T))
        dec = Decomposition(terms, COVDERIV, None, 0.0, restart=r)
        res = relative_residual(A1, dec.reconstruct_covderiv(m))
        dec = replace(dec, residual_covderiv=res, success=res <= config.tolerance)
        results.append(dec)
        if dec.success:
            break
    return _pick(results)


def stage2_matrix(psis, m: int) -> np.ndarray:
    """Linear map (Psi1_1..Psi1_k) -> sum_i A_{1,Psi_i,Psi1_i}, in class coordinates."""
    Q1 = class_basis(m, COVDERIV)
    E3 = _sym3_basis(m)
    blocks = [(_A1_batch(P.components, E3).reshape(len(E3), -1) @ Q1).T for P in psis]
    return np.hstack(blocks)


def solve_stage2(psis, A1: CovDerivTensor) -> list[SymForm3]:
    """Least-squares Psi1_i for fixed Psi_i (minimum norm, rank-revealing)."""
    m = A1.m
    M = stage2_matrix(psis, m)
    rhs = class_basis(m, COVDERIV).T @ A1.components.ravel()
    coef, *_ = np.linalg.lstsq(M, rhs, rcond=1e-9)
    coef = coef.reshape(len(psis), -1)
    E3 = _sym3_basis(m)
    return [SymForm3.symmetrized(np.einsum("p,pijk->ijk", c, E3)) for c in coef]


def decompose_pair(A: CurvTensor, A1: CovDerivTensor,
                   config: SolverConfig = SolverConfig()) -> Decomposition:
    """Common Psi_i with A = sum A_{Psi_i} and A1 = sum A_{1,Psi_i,Psi1_i}.

    Stage 1 fixes the Psi_i from A alone (unsigned); stage 2 is a linear solve for
    the Psi1_i.  If stage 2 cannot reach tolerance, all forms are refined jointly.
    """
    _require(A, "A")
    _require(A1, "A1")
    if A.m != A1.m:
        raise ValueError("A and A1 have different dimensions")
    m = A.m
    k = config.terms_for(m)
    cfg1 = replace(config, mode="unsigned", restarts=1, max_terms=k)
    results = []
    nA, nA1 = np.linalg.norm(A.components), np.linalg.norm(A1.components)
    for r in range(config.restarts):
        notes = []
        if nA == 0:
            psis = [SymForm2(np.zeros((m, m)))] * k
            res_c = 0.0
        else:
            stage1 = decompose_curv(A, replace(cfg1, seed=int(_restart_rng(config.seed, r).integers(2**31))))
            psis = [t.psi for t in stage1.terms]
            res_c = stage1.residual_curv
        psi1s = solve_stage2(psis, A1) if nA1 > 0 else [SymForm3(np.zeros((m,) * 3))] * k
        dec = Decomposition(tuple(Term(1.0, p, t) for p, t in zip(psis, psi1s)), "pair", res_c, 0.0, restart=r)
        res_1 = relative_residual(A1, dec.reconstruct_covderiv(m))
        if res_c > config.tolerance or res_1 > config.tolerance:
            notes.append(f"restart {r}: stage residuals {res_c:.2e}, {res_1:.2e}; joint refinement")
            log.info(notes[-1])
            prob = _Problem(m, k, np.ones(k), target_curv=A.components, target_cov=A1.components,
                            with_psi1=True)
            theta0 = np.concatenate([
                np.concatenate([np.array([p.components[a, b] for a, b in
                                          itertools.combinations_with_replacement(range(m), 2)]),
                                _sym3_coords(t.components)])
                for p, t in zip(psis, psi1s)])
            theta, _ = _lm(prob, theta0, config.max_iterations, 0.1 * config.tolerance)
            P, T = prob.unpack(theta)
            dec = Decomposition(tuple(Term(1.0, SymForm2.symmetrized(p), SymForm3.symmetrized(t))
                                      for p, t in zip(P, T)), "pair", 0.0, 0.0, restart=r)
            res_c = relative_residual(A, dec.reconstruct_curv(m))
            res_1 = relative_residual(A1, dec.reconstruct_covderiv(m))
        ok = res_c <= config.tolerance and res_1 <= config.tolerance
        dec = replace(dec, residual_curv=res_c, residual_covderiv=res_1, success=ok, notes=tuple(notes))
        results.append(dec)
        if ok:
            break
    return _pick(results)


def _sym3_coords(T: np.ndarray) -> np.ndarray:
    m = T.shape[0]
    return np.array([T[idx] for idx in itertools.combinations_with_replacement(range(m), 3)])


def decompose_from_embedding(f_list, m: int | None = None) -> Decomposition:
    """The decomposition read off a graph: one unit term (Hess f_s(0), D^3 f_s(0)) per function."""
    metric = build_graph_metric(f_list, m)
    m = metric.m
    forms = hessian_forms(f_list)
    dec = Decomposition(tuple(Term(1.0, P, T) for P, T in forms), "pair", 0.0, 0.0)
    R, nR = curvature_exact(metric)
    return replace(dec,
                   residual_curv=relative_residual(R, dec.reconstruct_curv(m)),
                   residual_covderiv=relative_residual(nR, dec.reconstruct_covderiv(m)))


# ---------------------------------------------------------------------------
# brackets on the generator counts


@dataclass(frozen=True)
class Bounds:
    lower: int
    upper: Optional[int]       # None: no witness found within m(m+1)/2 terms
    lower1: Optional[int] = None
    upper1: Optional[int] = None

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "lower1": self.lower1, "upper1": self.upper1}


def _upper(target, solver, lower: int, m: int, config: SolverConfig) -> Optional[int]:
    if np.linalg.norm(target.components) == 0:
        return 0
    # solver failure at k says nothing about k+1, so walk upward one at a time
    for k in range(max(lower, 1), max_terms_bound(m) + 1):
        if solver(target, replace(config, max_terms=k)).success:
            return k
    return None


def certify_bounds(A: CurvTensor, A1: CovDerivTensor | None = None,
                   config: SolverConfig = SolverConfig(), n_samples: int = 64) -> Bounds:
    """Certified lower bound from operator ranks, witnessed upper bound from the solver."""
    m = A.m
    space = Space.riemannian(m)
    lower = nu_lower_bound(space, A, n_samples, config.seed)
    upper = _upper(A, decompose_curv, lower, m, config)
    lower1 = upper1 = None
    if A1 is not None:
        lower1 = nu1_lower_bound(space, A1, n_samples, config.seed)
        upper1 = _upper(A1, decompose_covderiv, lower1, m, config)
    return Bounds(lower, upper, lower1, upper1)


def span_rank(m: int, which: str, n_samples: int, seed: int) -> int:
    rng = np.random.default_rng(seed)
    cols = []
    for _ in range(n_samples):
        P = SymForm2.symmetrized(rng.standard_normal((m, m)))
        if which == CURV:
            cols.append(build_A_Psi(P).components.ravel())
        else:
            T = SymForm3.symmetrized(rng.standard_normal((m, m, m)))
            cols.append(build_A1(P, T).components.ravel())
    s = np.linalg.svd(np.array(cols).T, compute_uv=False)
    return numerical_rank(s)


@dataclass(frozen=True)
class SpanResult:
    rank: int
    dimension: int

    @property
    def full(self) -> bool:
        return self.rank == self.dimension

    def to_dict(self) -> dict:
        return {"rank": self.rank, "dimension": self.dimension, "full": self.full}


def span_check(m: int, which: str, n_samples: int | None = None, seed: int = 0) -> SpanResult:
    """Rank of randomly sampled generators against the dimension of the class."""
    dim = class_basis(m, which).shape[1]
    if n_samples is None:
        n_samples = dim + 10
    if n_samples < dim + 10:
        raise ValueError(f"need at least {dim + 10} samples for m={m} {which}, got {n_samples}")
    return SpanResult(span_rank(m, which, n_samples, seed), dim)
