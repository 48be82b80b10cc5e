"""
The module D_P^* in two coordinate systems.

``ModuleElement`` uses the Schubert basis ``xi_v`` (v in W^P) with
polynomial coefficients; ``FixedPointFunction`` uses the fixed-point
basis ``f_u``: a function from W/W_P to polynomials.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

from .polyring import CharacterLattice, Poly, demazure, divide_by_linear, reflect
from .rootsys import CosetSystem, WeylElement, parabolic_elements

__all__ = [
    "ModuleElement", "FixedPointFunction", "TorsionProducts", "x_act",
    "x_act_fixed", "weyl_act", "point_class", "torsion_products",
    "schubert_classes", "to_schubert_coords", "check_simply_laced",
]


def check_simply_laced(cs: CosetSystem) -> None:
    if not cs.system.simply_laced:
        warnings.warn(
            f"type {cs.system.label} is not simply laced; the Schubert-basis action rule "
            "is applied as for simply laced types",
            stacklevel=2,
        )


@dataclass(frozen=True)
class ModuleElement:
    """``sum_v coeffs[v] * xi_v``; zero coefficients are dropped."""
    coeffs: Mapping[int, Poly]

    @classmethod
    def make(cls, coeffs: Mapping[int, Poly]) -> ModuleElement:
        return cls({v: a for v, a in sorted(coeffs.items()) if not a.is_zero()})

    @classmethod
    def basis(cls, v: int, nvars: int, p: int | None = None) -> ModuleElement:
        return cls({v: Poly.const(1, nvars, p)})

    def __add__(self, other: ModuleElement) -> ModuleElement:
        out = dict(self.coeffs)
        for v, a in other.coeffs.items():
            out[v] = out[v] + a if v in out else a
        return ModuleElement.make(out)

    def scale(self, f: Poly) -> ModuleElement:
        return ModuleElement.make({v: f * a for v, a in self.coeffs.items()})

    def __eq__(self, other):
        return isinstance(other, ModuleElement) and dict(self.coeffs) == dict(other.coeffs)

    def __hash__(self):
        return hash(frozenset(self.coeffs.items()))

    def is_zero(self) -> bool:
        return not self.coeffs


def x_act(L: CharacterLattice, cs: CosetSystem, j: int, e: ModuleElement) -> ModuleElement:
    """
    ``X_j`` acting on a Schubert-basis element.

    ``X_j (a xi_v) = s_j(a) X_j xi_v + D_j(a) xi_v`` with
    ``X_j xi_v = xi_{s_j v}`` on an upward weak-Bruhat edge and 0 otherwise.
    """
    out: dict[int, Poly] = {}
    for v, a in e.coeffs.items():
        d = demazure(L, j, a)
        if not d.is_zero():
            out[v] = out[v] + d if v in out else d
        u = cs.up_edge(j, v)
        if u is not None:
            sa = reflect(L, j, a)
            out[u] = out[u] + sa if u in out else sa
    return ModuleElement.make(out)


@dataclass(frozen=True)
class FixedPointFunction:
    """Values indexed by W^P positions; ``values[u]`` is the value at the class u."""
    values: tuple[Poly, ...]

    @classmethod
    def zero(cls, n: int, nvars: int, p: int | None = None) -> FixedPointFunction:
        return cls(tuple(Poly.zero(nvars, p) for _ in range(n)))

    @classmethod
    def constant(cls, n: int, c: Poly) -> FixedPointFunction:
        return cls(tuple(c for _ in range(n)))

    def __add__(self, other: FixedPointFunction) -> FixedPointFunction:
        return FixedPointFunction(tuple(a + b for a, b in zip(self.values, other.values)))

    def __sub__(self, other: FixedPointFunction) -> FixedPointFunction:
        return FixedPointFunction(tuple(a - b for a, b in zip(self.values, other.values)))

    def scale(self, f: Poly) -> FixedPointFunction:
        return FixedPointFunction(tuple(f * a for a in self.values))

    def support(self) -> list[int]:
        return [u for u, a in enumerate(self.values) if not a.is_zero()]

    def is_zero(self) -> bool:
        return all(a.is_zero() for a in self.values)


def weyl_act(L: CharacterLattice, cs: CosetSystem, w: WeylElement, F: FixedPointFunction) -> FixedPointFunction:
    """``(w F)(u) = w(F(w^{-1} u))``."""
    winv = w.inverse()
    out = []
    for u in cs.reps:
        out.append(reflect(L, w, F.values[cs.class_index(winv * u)]))
    return FixedPointFunction(tuple(out))


def x_act_fixed(L: CharacterLattice, cs: CosetSystem, j: int, F: FixedPointFunction) -> FixedPointFunction:
    """``X_j F = (F - s_j F) / alpha_j`` pointwise; the division must be exact."""
    sF = weyl_act(L, cs, cs.system.simple(j), F)
    alpha = L.simple_root_coords[j - 1]
    return FixedPointFunction(tuple(divide_by_linear(a - b, alpha) for a, b in zip(F.values, sF.values)))


@dataclass(frozen=True)
class TorsionProducts:
    """
    Products of ``x_alpha = alpha`` over roots, kept as factor lists.

    Each positive root ``beta`` contributes ``-beta^2`` under
    ``convention="all"`` and ``-beta`` under ``"negative"``. The expanded
    products are built on first access; ``total`` for a large group is
    expensive, so reports use ``factored`` instead.
    """
    parabolic_roots: tuple[Poly, ...]
    quotient_roots: tuple[Poly, ...]
    convention: str
    rank: int
    p: int | None = None

    def _expand(self, roots) -> Poly:
        out = Poly.const(1, self.rank, self.p)
        for beta in roots:
            out = out * (-beta if self.convention == "negative" else -(beta * beta))
        return out

    @cached_property
    def parabolic(self) -> Poly:
        return self._expand(self.parabolic_roots)

    @cached_property
    def quotient(self) -> Poly:
        return self._expand(self.quotient_roots)

    @cached_property
    def total(self) -> Poly:
        return self.parabolic * self.quotient

    def factored(self, L: CharacterLattice, part: str = "total") -> str:
        roots = {"total": self.parabolic_roots + self.quotient_roots, "parabolic": self.parabolic_roots,
                 "quotient": self.quotient_roots}[part]
        if not roots:
            return "1"
        power = "^2" if self.convention == "all" else ""
        body = " * ".join(f"({L.fmt(b)}){power}" for b in roots)
        return ("-" if len(roots) % 2 else "") + body


def torsion_products(L: CharacterLattice, cs: CosetSystem, convention: str = "all",
                     p: int | None = None) -> TorsionProducts:
    """Split the positive roots into those of the parabolic subsystem and the rest."""
    rs = cs.system
    if convention not in ("all", "negative"):
        raise ValueError(f"unknown convention {convention!r}")
    P = cs.parabolic
    para, quot = [], []
    for idx in range(rs.n_positive):
        inside = all(c == 0 for i, c in enumerate(rs.roots[idx]) if (i + 1) not in P)
        (para if inside else quot).append(L.root_poly(idx, p))
    return TorsionProducts(tuple(para), tuple(quot), convention, L.rank, p)


def point_class(L: CharacterLattice, cs: CosetSystem, convention: str = "all",
                p: int | None = None) -> FixedPointFunction:
    """The function supported at the identity class with value ``x_{Pi/P}``."""
    q = torsion_products(L, cs, convention, p).quotient
    vals = [Poly.zero(L.rank, p)] * len(cs)
    vals[0] = q
    return FixedPointFunction(tuple(vals))


def schubert_classes(L: CharacterLattice, cs: CosetSystem) -> list[FixedPointFunction]:
    """
    Fixed-point coordinates of every ``xi_v`` over Z.

    Starts from the point class (negative-root convention) and follows
    upward Hasse edges with ``x_act_fixed``. The class of the longest
    representative is the constant ``(-1)^N``, N the longest length; a
    global sign on the basis does not change any matrix coefficient.
    """
    key = ("schubert", tuple(sorted(cs.parabolic)))

    def build():
        xi: list[FixedPointFunction | None] = [None] * len(cs)
        xi[0] = point_class(L, cs, "negative")
        for v, j, u in cs.hasse_edges:
            if xi[u] is None:
                xi[u] = x_act_fixed(L, cs, j, xi[v])
        return xi

    return L.cached(key, build)


def to_schubert_coords(L: CharacterLattice, cs: CosetSystem, F: FixedPointFunction) -> ModuleElement:
    """
    Solve ``F = sum_v a_v xi_v`` over Z.

    ``xi_v`` vanishes at classes longer than v other than v itself, so the
    system is triangular; solve from the longest class down. Every
    division must be exact.
    """
    xi = schubert_classes(L, cs)
    coeffs: dict[int, Poly] = {}
    for v in reversed(range(len(cs))):
        rest = F.values[v]
        for u, a in coeffs.items():
            rest = rest - a * xi[u].values[v]
        if rest.is_zero():
            continue
        coeffs[v] = rest.exact_div(xi[v].values[v])
    return ModuleElement.make(coeffs)


def parabolic_group(cs: CosetSystem) -> list[WeylElement]:
    return parabolic_elements(cs.system, cs.parabolic)
