"""JSON exchange formats for forms, tensors, metric germs, polynomials and decompositions."""
from __future__ import annotations

import itertools
import json
from pathlib import Path

import numpy as np

from .decomposition import Decomposition, Term
from .polynomial import Poly
from .realization import MetricGerm
from .tensor_core import (
    CovDerivTensor,
    CurvTensor,
    Space,
    SymForm2,
    SymForm3,
    check_symmetries,
)

WRITE_CUTOFF = 1e-14
LOAD_TOL = 1e-9

KINDS = {"sym2": (2, SymForm2), "sym3": (3, SymForm3), "curv": (4, CurvTensor), "covderiv": (5, CovDerivTensor)}


class FormatError(ValueError):
    """Input that parses as JSON but does not describe a valid object."""


def kind_of(t) -> str:
    for name, (_, cls) in KINDS.items():
        if type(t) is cls:
            return name
    raise TypeError(f"no JSON kind for {type(t).__name__}")


def _entries(arr: np.ndarray) -> list:
    out = []
    for idx in np.ndindex(*arr.shape):
        v = float(arr[idx])
        if abs(v) > WRITE_CUTOFF:
            out.append([*map(int, idx), v])
    return out


def tensor_to_dict(t) -> dict:
    return {"m": t.m, "kind": kind_of(t), "entries": _entries(t.components)}


def dense_from_dict(d: dict, where: str = "<input>") -> tuple[str, np.ndarray]:
    try:
        m, kind, entries = int(d["m"]), d["kind"], d["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: tensor needs integer 'm', 'kind' and 'entries' ({exc})") from None
    if kind not in KINDS:
        raise FormatError(f"{where}: unknown kind {kind!r}")
    order = KINDS[kind][0]
    arr = np.zeros((m,) * order)
    for n, e in enumerate(entries):
        if not isinstance(e, list) or len(e) != order + 1:
            raise FormatError(f"{where}: entries[{n}] must be {order} indices and a value")
        idx = tuple(e[:order])
        if not all(isinstance(i, int) and 0 <= i < m for i in idx):
            raise FormatError(f"{where}: entries[{n}] has an index outside 0..{m - 1}")
        arr[idx] = float(e[order])
    return kind, arr


def _symmetry_violation(kind: str, arr: np.ndarray) -> float:
    if kind in ("sym2", "sym3"):
        return max(float(np.max(np.abs(arr - arr.transpose(p)), initial=0.0))
                   for p in itertools.permutations(range(arr.ndim)))
    return check_symmetries(arr).max_violation


def tensor_from_dict(d: dict, validate: bool = True, where: str = "<input>"):
    """Load a form or tensor; omitted entries are zero.

    With ``validate`` the symmetry violation must be at most 1e-9 * max|entry|;
    the array is then symmetrized exactly for the form kinds.
    """
    kind, arr = dense_from_dict(d, where)
    if validate:
        scale = float(np.max(np.abs(arr), initial=0.0))
        viol = _symmetry_violation(kind, arr)
        if viol > LOAD_TOL * scale:
            raise FormatError(f"{where}: {kind} symmetry violated by {viol:.3g} (scale {scale:.3g})")
    cls = KINDS[kind][1]
    if kind in ("sym2", "sym3"):
        return cls.symmetrized(arr)
    return cls(arr)


# ---------------------------------------------------------------------------
# metric germs


def germ_to_dict(germ: MetricGerm) -> dict:
    """Monomial coefficients for i <= k: [i,k,j,l,c] adds c*x_j*x_l to g_ik (and g_ki)."""
    sp = germ.space
    if sp.gram_matrix is not None:
        raise FormatError("germ JSON stores only diagonal +-1 constant terms")
    m = germ.m
    quad, cub = [], []
    for i, k in itertools.combinations_with_replacement(range(m), 2):
        for j, l in itertools.combinations_with_replacement(range(m), 2):
            c = germ.coeff2[i, k, j, l] * (1 if j == l else 2)
            if abs(c) > WRITE_CUTOFF:
                quad.append([i, k, j, l, float(c)])
        for j, l, n in itertools.combinations_with_replacement(range(m), 3):
            c = germ.coeff3[i, k, j, l, n] * len(set(itertools.permutations((j, l, n))))
            if abs(c) > WRITE_CUTOFF:
                cub.append([i, k, j, l, n, float(c)])
    return {"m": m, "signature": list(sp.signature), "quadratic": quad, "cubic": cub}


def germ_from_dict(d: dict, where: str = "<input>") -> MetricGerm:
    try:
        m = int(d["m"])
        p, q = d.get("signature", [0, m])
        quad, cub = d.get("quadratic", []), d.get("cubic", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: germ needs 'm', 'signature', 'quadratic', 'cubic' ({exc})") from None
    sp = Space.from_signature(m, (p, q))
    Q = np.zeros((m,) * 4)
    C = np.zeros((m,) * 5)
    for n, e in enumerate(quad):
        if len(e) != 5:
            raise FormatError(f"{where}: quadratic[{n}] must be [i,k,j,l,c]")
        i, k, j, l, c = e
        # spread the monomial coefficient evenly over the symmetric copies
        mons = set(itertools.permutations((j, l)))
        for a, b in mons:
            Q[i, k, a, b] += c / len(mons)
            if i != k:
                Q[k, i, a, b] += c / len(mons)
    for n, e in enumerate(cub):
        if len(e) != 6:
            raise FormatError(f"{where}: cubic[{n}] must be [i,k,j,l,n,c]")
        i, k, j, l, nn, c = e
        mons = set(itertools.permutations((j, l, nn)))
        for a, b, cc in mons:
            C[i, k, a, b, cc] += c / len(mons)
            if i != k:
                C[k, i, a, b, cc] += c / len(mons)
    try:
        return MetricGerm(sp.gram.copy(), Q, C)
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from None


# ---------------------------------------------------------------------------
# polynomials


def poly_to_dict(f: Poly) -> dict:
    return {"monomials": f.to_monomials()}


def poly_from_dict(d: dict, nvars: int | None = None, where: str = "<input>") -> Poly:
    try:
        mons = d["monomials"]
        n = nvars if nvars is not None else len(mons[0][0])
        return Poly.from_monomials(n, mons)
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: bad polynomial ({exc})") from None


def flist_to_dict(f_list, m: int) -> dict:
    return {"m": m, "functions": [poly_to_dict(f) for f in f_list]}


def flist_from_dict(d: dict, where: str = "<input>") -> tuple[list[Poly], int]:
    try:
        m = int(d["m"])
        funcs = d["functions"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: function list needs 'm' and 'functions' ({exc})") from None
    return [poly_from_dict(f, m, f"{where}: functions[{n}]") for n, f in enumerate(funcs)], m


# ---------------------------------------------------------------------------
# decompositions


def decomposition_from_dict(d: dict) -> Decomposition:
    terms = []
    for t in d["terms"]:
        psi1 = SymForm3(t["psi1"]) if t.get("psi1") is not None else None
        terms.append(Term(float(t["lambda"]), SymForm2(t["psi"]), psi1))
    return Decomposition(tuple(terms), d.get("target_kind", "curv"), d.get("residual_curv"),
                         d.get("residual_covderiv"), success=d.get("success", True))


# ---------------------------------------------------------------------------
# files


def read_json(path) -> dict:
    """Parse a JSON file; malformed input raises FormatError naming line and column."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def write_json(path, obj):
    Path(path).write_text(dumps(obj) + "\n")
