"""Exact multivariate polynomial maps f: R^n -> R^p and their first-order data.

A map is a germ at the origin (f(0) = 0). Components are stored as merged,
lexicographically sorted term lists so evaluation order, and therefore every
floating-point result downstream, is reproducible. Differentiation is
symbolic on the monomials; no finite differences anywhere in this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, OnZeroSetError

Term = tuple[float, tuple[int, ...]]  # (coefficient, exponent vector)


def _canonical_terms(terms: Iterable[Term], n: int, where: str) -> list[Term]:
    """Merge duplicate exponent vectors, drop zeros, sort lexicographically."""
    merged: dict[tuple[int, ...], float] = {}
    for k, (c, e) in enumerate(terms):
        e = tuple(int(v) for v in e)
        if len(e) != n:
            raise InputError(
                f"{where}[{k}].e has arity {len(e)}, expected n = {n}"
            )
        if any(v < 0 for v in e):
            raise InputError(f"{where}[{k}].e has a negative exponent")
        c = float(c)
        merged[e] = merged.get(e, 0.0) + c
    out = [(c, e) for e, c in merged.items() if c != 0.0]
    out.sort(key=lambda t: t[1])
    return out


class _Poly:
    """One polynomial component: coefficient vector plus exponent matrix."""

    __slots__ = ("coeffs", "expts")

    def __init__(self, terms: Sequence[Term], n: int):
        if terms:
            self.coeffs = np.array([c for c, _ in terms], dtype=float)
            self.expts = np.array([e for _, e in terms], dtype=np.int64)
        else:
            self.coeffs = np.zeros(0, dtype=float)
            self.expts = np.zeros((0, n), dtype=np.int64)

    def __call__(self, x: np.ndarray) -> float:
        if self.coeffs.size == 0:
            return 0.0
        # np.power gives 0.0**0 == 1.0, which is the right monomial convention
        vals = self.coeffs * np.prod(np.power(x[None, :], self.expts), axis=1)
        return float(np.sum(vals))  # pairwise summation over sorted terms

    def derivative(self, j: int, n: int) -> "_Poly":
        terms: list[Term] = []
        for c, e in zip(self.coeffs, self.expts):
            if e[j] > 0:
                d = e.copy()
                d[j] -= 1
                terms.append((float(c) * int(e[j]), tuple(int(v) for v in d)))
        return _Poly(_canonical_terms(terms, n, "derivative"), n)

    def degree(self) -> int:
        return int(self.expts.sum(axis=1).max()) if self.coeffs.size else 0


@dataclass(frozen=True)
class PolynomialMap:
    """Polynomial map f: R^n -> R^p with symbolic partial derivatives.

    Immutable after construction; all methods are pure and thread-safe.
    """

    n: int
    p: int
    components: tuple[_Poly, ...]
    partials: tuple[tuple[_Poly, ...], ...]  # partials[i][j] = d f_i / d x_j
    name: str | None = None

    @staticmethod
    def from_terms(
        n: int,
        p: int,
        component_terms: Sequence[Sequence[Term]],
        name: str | None = None,
        allow_zero_components: bool = False,
    ) -> "PolynomialMap":
        if n < 2:
            raise InputError(f"n must be >= 2, got {n}")
        if not 2 <= p <= n:
            raise InputError(f"p must satisfy 2 <= p <= n, got p = {p}, n = {n}")
        if len(component_terms) != p:
            raise InputError(
                f"expected {p} components, got {len(component_terms)}"
            )
        comps: list[_Poly] = []
        for i, terms in enumerate(component_terms):
            canon = _canonical_terms(terms, n, f"components[{i}]")
            if not canon and not allow_zero_components:
                raise InputError(
                    f"components[{i}] is identically zero; "
                    "pass allow_zero_components=True if intended"
                )
            zero_expt = tuple([0] * n)
            for c, e in canon:
                if e == zero_expt:
                    raise InputError(
                        f"f(0) != 0: components[{i}] has constant term {c}"
                    )
            comps.append(_Poly(canon, n))
        partials = tuple(
            tuple(comp.derivative(j, n) for j in range(n)) for comp in comps
        )
        return PolynomialMap(
            n=n, p=p, components=tuple(comps), partials=partials, name=name
        )

    def _check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.n:
            raise InputError(
                f"point has dimension {x.shape[0]}, map expects n = {self.n}"
            )
        return x

    def eval(self, x) -> np.ndarray:
        """f(x), evaluated term-wise per component."""
        x = self._check_point(x)
        return np.array([comp(x) for comp in self.components], dtype=float)

    def jacobian(self, x) -> np.ndarray:
        """Df_x as a p x n matrix of symbolically differentiated entries."""
        x = self._check_point(x)
        out = np.empty((self.p, self.n), dtype=float)
        for i in range(self.p):
            row = self.partials[i]
            for j in range(self.n):
                out[i, j] = row[j](x)
        return out

    def degree(self) -> int:
        return max(comp.degree() for comp in self.components)

    def to_config(self) -> dict:
        doc = {
            "n": self.n,
            "p": self.p,
            "components": [
                [
                    {"c": float(c), "e": [int(v) for v in e]}
                    for c, e in zip(comp.coeffs, comp.expts)
                ]
                for comp in self.components
            ],
        }
        if self.name:
            doc["name"] = self.name
        return doc


@dataclass(frozen=True)
class Jet:
    """All first-order data of f and its spherefication at one point off V.

    Fields follow the derived objects: h = ||f||^2 with gradient grad_h,
    H = ||x||^2 with gradient grad_H = 2x, phi = f/||f|| (unit), Fx = ||x|| phi,
    DF the p x n differential of the spherefication, and aug the (p+1) x n
    differential of the augmented map x -> (f(x), ||x||^2).
    """

    x: np.ndarray
    fx: np.ndarray
    J: np.ndarray
    h: float
    grad_h: np.ndarray
    H: float
    grad_H: np.ndarray
    phi: np.ndarray
    Fx: np.ndarray
    DF: np.ndarray
    aug: np.ndarray
    norm_x: float
    norm_f: float

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.fx.shape[0]

    @property
    def scale(self) -> float:
        """Tolerance scale: grows near V where 1/||f|| amplifies everything."""
        return max(
            1.0,
            float(np.linalg.norm(self.J)),
            self.norm_x,
            1.0 / self.norm_f,
        )


def default_floor(x: np.ndarray) -> float:
    return 1e-9 * (1.0 + float(np.linalg.norm(x)))


def spherefication_jacobian(
    x: np.ndarray, fx: np.ndarray, J: np.ndarray, Fx: np.ndarray
) -> np.ndarray:
    """Closed-form p x n differential of x -> ||x|| f(x)/||f(x)||.

    Column j is the differential applied to the j-th basis vector.
    """
    nx2 = float(x @ x)
    nf2 = float(fx @ fx)
    ratio = np.sqrt(nx2) / np.sqrt(nf2)
    return (
        np.outer(Fx, x) / nx2
        - np.outer(fx, J.T @ Fx) / nf2
        + ratio * J
    )


def jet(map: PolynomialMap, x, floor: float | None = None) -> Jet:
    """Assemble the full first-order data at x. Raises OnZeroSetError when
    ||f(x)|| <= floor (default 1e-9 * (1 + ||x||))."""
    x = map._check_point(x)
    fx = map.eval(x)
    J = map.jacobian(x)
    norm_f = float(np.linalg.norm(fx))
    if floor is None:
        floor = default_floor(x)
    if norm_f <= floor:
        raise OnZeroSetError(x, norm_f, floor)
    norm_x = float(np.linalg.norm(x))
    h = norm_f * norm_f
    H = norm_x * norm_x
    grad_h = 2.0 * (J.T @ fx)
    grad_H = 2.0 * x
    phi = fx / norm_f
    Fx = norm_x * phi
    DF = spherefication_jacobian(x, fx, J, Fx)
    aug = np.vstack([J, grad_H[None, :]])
    return Jet(
        x=x, fx=fx, J=J, h=h, grad_h=grad_h, H=H, grad_H=grad_H,
        phi=phi, Fx=Fx, DF=DF, aug=aug, norm_x=norm_x, norm_f=norm_f,
    )


def _terms_from_config(doc, i: int) -> list[Term]:
    if not isinstance(doc, list):
        raise InputError(f"components[{i}] must be a list of terms")
    terms: list[Term] = []
    for k, t in enumerate(doc):
        if not isinstance(t, dict) or set(t) - {"c", "e"}:
            raise InputError(
                f"components[{i}][{k}] must be an object with keys 'c' and 'e'"
            )
        if "c" not in t or "e" not in t:
            raise InputError(f"components[{i}][{k}] is missing 'c' or 'e'")
        if not isinstance(t["e"], list):
            raise InputError(f"components[{i}][{k}].e must be a list of exponents")
        terms.append((float(t["c"]), tuple(int(v) for v in t["e"])))
    return terms


def parse_map(text) -> PolynomialMap:
    """Parse a map config document (JSON text or an already-decoded dict).

    Accepted schema:
      {"n": 2, "p": 2,
       "components": [[{"c": 1, "e": [2, 0]}, {"c": -1, "e": [0, 2]}],
                      [{"c": 2, "e": [1, 1]}]],
       "name": "square"}            # name optional
    """
    if isinstance(text, (str, bytes)):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise InputError(f"map document is not valid JSON: {e}") from e
    else:
        doc = text
    if not isinstance(doc, dict):
        raise InputError("map document must be a JSON object")
    extra = set(doc) - {"n", "p", "components", "name"}
    if extra:
        raise InputError(f"unknown map field '{sorted(extra)[0]}'")
    for key in ("n", "p", "components"):
        if key not in doc:
            raise InputError(f"map document is missing '{key}'")
    n, p = int(doc["n"]), int(doc["p"])
    comps = doc["components"]
    if not isinstance(comps, list):
        raise InputError("'components' must be a list")
    terms = [_terms_from_config(comp, i) for i, comp in enumerate(comps)]
    name = doc.get("name")
    return PolynomialMap.from_terms(n, p, terms, name=name)
