"""Sparse multivariate polynomials with exact coefficient differentiation."""
from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Mapping

import numpy as np


class Poly:
    """Polynomial in ``nvars`` variables stored as ``{exponent tuple: coefficient}``.

    >>> f = Poly.monomial((3, 0))          # x0**3
    >>> f.diff(0).coeffs
    {(2, 0): 3.0}
    """

    __slots__ = ("nvars", "coeffs")

    def __init__(self, nvars: int, coeffs: Mapping[tuple, float] | None = None):
        self.nvars = int(nvars)
        clean = {}
        for exp, c in (coeffs or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != self.nvars or any(e < 0 for e in exp):
                raise ValueError(f"bad exponent {exp} for {self.nvars} variables")
            if c != 0:
                clean[exp] = clean.get(exp, 0.0) + float(c)
        self.coeffs = {e: c for e, c in clean.items() if c != 0}

    @classmethod
    def zero(cls, nvars: int) -> "Poly":
        return cls(nvars)

    @classmethod
    def constant(cls, nvars: int, c: float) -> "Poly":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def monomial(cls, exponents: Iterable[int], c: float = 1.0) -> "Poly":
        exponents = tuple(exponents)
        return cls(len(exponents), {exponents: c})

    @classmethod
    def variable(cls, nvars: int, i: int) -> "Poly":
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): 1.0})

    @classmethod
    def from_monomials(cls, nvars: int, monomials) -> "Poly":
        """Build from ``[[exponent-vector, coefficient], ...]``."""
        acc: dict[tuple, float] = defaultdict(float)
        for exp, c in monomials:
            exp = tuple(exp)
            if len(exp) != nvars:
                raise ValueError(f"exponent {list(exp)} has length {len(exp)}, expected {nvars}")
            acc[exp] += float(c)
        return cls(nvars, acc)

    def to_monomials(self) -> list:
        return [[list(e), c] for e, c in sorted(self.coeffs.items())]

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.coeffs), default=0)

    def _check(self, other: "Poly"):
        if other.nvars != self.nvars:
            raise ValueError("polynomials in different numbers of variables")

    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly.constant(self.nvars, other)
        self._check(other)
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            out[e] = out.get(e, 0.0) + c
        return Poly(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.nvars, {e: -c for e, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, Poly) else -float(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return Poly(self.nvars, {e: c * float(other) for e, c in self.coeffs.items()})
        self._check(other)
        out: dict[tuple, float] = defaultdict(float)
        for e1, c1 in self.coeffs.items():
            for e2, c2 in other.coeffs.items():
                out[tuple(a + b for a, b in zip(e1, e2))] += c1 * c2
        return Poly(self.nvars, out)

    __rmul__ = __mul__

    def diff(self, i: int, times: int = 1) -> "Poly":
        out = {}
        for e, c in self.coeffs.items():
            if e[i] < times:
                continue
            factor = 1
            for t in range(times):
                factor *= e[i] - t
            ne = list(e)
            ne[i] -= times
            out[tuple(ne)] = c * factor
        return Poly(self.nvars, out)

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        total = 0.0
        for e, c in self.coeffs.items():
            total += c * float(np.prod(x ** np.array(e)))
        return total

    def gradient_at(self, x) -> np.ndarray:
        return np.array([self.diff(i)(x) for i in range(self.nvars)])

    def derivative_tensor(self, order: int, x) -> np.ndarray:
        """All partial derivatives of the given order at ``x`` as a symmetric array."""
        n = self.nvars
        out = np.zeros((n,) * order)
        cache: dict[tuple, float] = {}
        for idx in np.ndindex(*out.shape):
            key = tuple(sorted(idx))
            if key not in cache:
                p = self
                for i in key:
                    p = p.diff(i)
                cache[key] = p(x)
            out[idx] = cache[key]
        return out

    def __eq__(self, other):
        return isinstance(other, Poly) and self.nvars == other.nvars and self.coeffs == other.coeffs

    def __repr__(self):
        if not self.coeffs:
            return "Poly(0)"
        terms = []
        for e, c in sorted(self.coeffs.items()):
            mono = "*".join(f"x{i}" + (f"^{k}" if k > 1 else "") for i, k in enumerate(e) if k)
            terms.append(f"{c:g}" + (f"*{mono}" if mono else ""))
        return "Poly(" + " + ".join(terms) + ")"
