"""
Endomorphisms of the localized module of functions on W/W_P.

An endomorphism is fixed by its value ``sum_u a_u f_u`` on the identity
class. W_P-equivariance ties every coefficient to the one at the minimal
representative of its double coset, so one unknown per double coset
remains. The idempotency equations are emitted as data, both as written
and after clearing denominators, together with the divisibility
conditions that cut out the non-localized module.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

from .endosolve import EndomorphismMatrix, propagate_matrix
from .nilhecke import FixedPointFunction, point_class, to_schubert_coords, torsion_products
from .polyring import CharacterLattice, InexactDivision, Poly, divide_by_linear, reflect
from .rootsys import CosetSystem, WeylElement, min_coset_rep, parabolic_elements

__all__ = [
    "Factor", "Term", "Equation", "Divisibility", "CosetCoefficientVector",
    "EquationSystem", "MembershipResult", "invariance_constraints",
    "convolution_idempotent_system", "cleared_system", "membership_check",
    "perm_module_endos", "endomorphism_on_point",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Factor:
    """``weyl(unknown)``; ``weyl`` is a reduced word, canonical modulo the unknown's stabilizer."""
    unknown: int
    weyl: tuple[int, ...]

    def render(self, prefix: str) -> str:
        name = f"{prefix}{self.unknown}"
        if not self.weyl:
            return name
        return "s" + "s".join(map(str, self.weyl)) + f"({name})"


@dataclass(frozen=True)
class Term:
    coefficient: Poly
    factors: tuple[Factor, ...]

    def key(self):
        return (len(self.factors), self.factors)


@dataclass
class Equation:
    """``sum(lhs) = sum(rhs)``; each side is a list of terms."""
    lhs: list[Term]
    rhs: list[Term]
    coset: int


@dataclass(frozen=True, order=True)
class Divisibility:
    """``root | unknown_a - weyl(unknown_b)`` with ``root`` a positive root index."""
    root: int
    unknown_a: int
    unknown_b: int
    weyl: tuple[int, ...]


@dataclass
class CosetCoefficientVector:
    """
    ``entries[u] = (k, g)``: the coefficient at class u is ``g(c_k)``.

    ``stabilizers[k]`` lists the simple reflections of P fixing the class of
    the k-th double coset representative; ``c_k`` must be invariant under them.
    """
    cs: CosetSystem
    reps: list[int]
    entries: list[tuple[int, WeylElement]]
    stabilizers: list[tuple[int, ...]]

    @property
    def n_unknowns(self) -> int:
        return len(self.reps)

    def side_conditions(self, prefix: str = "c") -> list[str]:
        out = []
        for k, J in enumerate(self.stabilizers):
            for i in J:
                out.append(f"s{i}({prefix}{k}) = {prefix}{k}")
        return out

    def factor(self, w: WeylElement, u: int) -> Factor:
        """Canonical form of ``w`` applied to the coefficient at class u."""
        k, g = self.entries[u]
        h = min_coset_rep(w * g, self.stabilizers[k])
        return Factor(k, h.word)

    def describe(self, prefix: str = "c") -> list[str]:
        names = self.cs.names()
        return [f"{names[u]}: {Factor(k, g.word).render(prefix)}" for u, (k, g) in enumerate(self.entries)]


def invariance_constraints(cs: CosetSystem) -> CosetCoefficientVector:
    rs = cs.system
    blocks = cs.double_cosets
    entries: list[tuple[int, WeylElement] | None] = [None] * len(cs)
    stabs = []
    for k, blk in enumerate(blocks):
        d = blk.rep
        entries[d] = (k, rs.identity)
        stabs.append(tuple(i for i in sorted(cs.parabolic) if cs.left_mult(i, d) == d))
        # BFS from the representative: first arrival has minimal length
        queue = deque([d])
        while queue:
            u = queue.popleft()
            g = entries[u][1]
            for i in sorted(cs.parabolic):
                x = cs.left_mult(i, u)
                if entries[x] is None:
                    entries[x] = (k, rs.simple(i) * g)
                    queue.append(x)
    return CosetCoefficientVector(cs=cs, reps=[b.rep for b in blocks], entries=entries,
                                  stabilizers=stabs)


# --- equation systems ------------------------------------------------------

@dataclass
class EquationSystem:
    cs: CosetSystem = field(repr=False)
    lattice: CharacterLattice = field(repr=False)
    coefficients: CosetCoefficientVector = field(repr=False)
    equations: list[Equation]
    divisibility: list[Divisibility]
    prefix: str
    torsion: dict[str, str] = field(default_factory=dict)
    unknown_degree: int = 0

    def reduced(self) -> EquationSystem:
        """One equation per double coset (the others are Weyl images of these)."""
        reps = set(self.coefficients.reps)
        eqs = [e for e in self.equations if e.coset in reps]
        return EquationSystem(self.cs, self.lattice, self.coefficients, eqs,
                              self.divisibility, self.prefix, self.torsion, self.unknown_degree)

    def _term_text(self, t: Term) -> str:
        body = "*".join(f.render(self.prefix) for f in t.factors)
        c = t.coefficient
        if c == 1:
            return body or "1"
        if c == -1:
            return "-" + (body or "1")
        text = self.lattice.fmt(c)
        if not body:
            return text
        if len(c.terms) > 1:
            text = f"({text})"
        return f"{text}*{body}"

    def _side_text(self, terms: list[Term]) -> str:
        if not terms:
            return "0"
        out = ""
        for n, t in enumerate(terms):
            s = self._term_text(t)
            if n == 0:
                out = s
            elif s.startswith("-"):
                out += " - " + s[1:]
            else:
                out += " + " + s
        return out

    def divisibility_text(self, d: Divisibility) -> str:
        root = self.lattice.fmt(self.lattice.root_poly(d.root))
        if len(self.lattice.root_poly(d.root).terms) > 1:
            root = f"({root})"
        other = Factor(d.unknown_b, d.weyl).render(self.prefix)
        return f"{root} | {self.prefix}{d.unknown_a} - {other}"

    def lines(self) -> list[str]:
        names = self.cs.names()
        out = []
        for e in self.equations:
            out.append(f"[{names[e.coset]}] {self._side_text(e.lhs)} = {self._side_text(e.rhs)}")
        for d in self.divisibility:
            out.append(self.divisibility_text(d))
        return out

    def to_text(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def to_dict(self) -> dict:
        names = self.cs.names()

        def term(t):
            return {"coefficient": self.lattice.fmt(t.coefficient),
                    "factors": [f.render(self.prefix) for f in t.factors]}

        return {
            "unknowns": [f"{self.prefix}{k}" for k in range(self.coefficients.n_unknowns)],
            "entries": self.coefficients.describe(self.prefix),
            "side_conditions": self.coefficients.side_conditions(self.prefix),
            "torsion": self.torsion,
            "equations": [{"coset": names[e.coset], "lhs": [term(t) for t in e.lhs],
                           "rhs": [term(t) for t in e.rhs]} for e in self.equations],
            "divisibility": [self.divisibility_text(d) for d in self.divisibility],
        }

    def residuals(self, values: list[Poly]) -> list[Poly]:
        """``lhs - rhs`` of every equation with ``values[k]`` substituted for unknown k."""
        L = self.lattice
        memo: dict[Factor, Poly] = {}

        def factor(f: Factor) -> Poly:
            if f not in memo:
                memo[f] = reflect(L, f.weyl, values[f.unknown]) if f.weyl else values[f.unknown]
            return memo[f]

        def side(terms):
            total = Poly.zero(L.rank)
            for t in terms:
                prod = t.coefficient
                for f in t.factors:
                    prod = prod * factor(f)
                total = total + prod
            return total

        return [side(e.lhs) - side(e.rhs) for e in self.equations]

    def is_homogeneous(self) -> bool:
        """Every equation is homogeneous when each unknown has degree ``unknown_degree``."""
        for e in self.equations:
            degs = set()
            for t in e.lhs + e.rhs:
                if not t.coefficient.is_homogeneous():
                    return False
                degs.add(t.coefficient.degree + len(t.factors) * self.unknown_degree)
            if len(degs) > 1:
                return False
        return True


def _collect(terms: list[Term]) -> list[Term]:
    acc: dict[tuple[Factor, ...], Poly] = {}
    for t in terms:
        f = tuple(sorted(t.factors))
        acc[f] = acc[f] + t.coefficient if f in acc else t.coefficient
    out = [Term(c, f) for f, c in acc.items() if not c.is_zero()]
    return sorted(out, key=Term.key)


def _convolution(cs: CosetSystem, L: CharacterLattice, coeffs: CosetCoefficientVector,
                 weight=None) -> list[tuple[int, list[Term]]]:
    """For each class u: the terms ``weight(w) * a_w * w(a_v)`` over ``T[w][v] = u``."""
    T = cs.mult_table
    one = Poly.const(1, L.rank)
    out = []
    for u in range(len(cs)):
        terms = []
        for i, w in enumerate(cs.reps):
            for j in range(len(cs)):
                if T[i][j] != u:
                    continue
                f1 = coeffs.factor(cs.system.identity, i)
                f2 = coeffs.factor(w, j)
                terms.append(Term(one if weight is None else weight(w), (f1, f2)))
        out.append((u, _collect(terms)))
    return out


def convolution_idempotent_system(cs: CosetSystem, L: CharacterLattice) -> EquationSystem:
    """``sum_{wv = u} a_w w(a_v) = a_u`` for every class u, unknowns ``c_k``."""
    coeffs = invariance_constraints(cs)
    one = Poly.const(1, L.rank)
    eqs = []
    for u, terms in _convolution(cs, L, coeffs):
        rhs = [Term(one, (coeffs.factor(cs.system.identity, u),))]
        eqs.append(Equation(lhs=terms, rhs=rhs, coset=u))
    return EquationSystem(cs, L, coeffs, eqs, [], "c")


def cleared_system(cs: CosetSystem, L: CharacterLattice, convention: str = "all") -> EquationSystem:
    """
    The idempotency equations for ``b_w = x_{Pi/P} a_w``, free of
    denominators, plus the divisibility conditions on the ``b_w``.

    With ``a = b / x_{Pi/P}`` the equation for class u becomes
    ``sum eps(w) w(x_P) b_w w(b_v) = x_Pi b_u`` where
    ``eps(w) = w(x_Pi) / x_Pi`` is a sign (always 1 for ``convention="all"``).
    """
    tp = torsion_products(L, cs, convention)
    coeffs = invariance_constraints(cs)

    memo: dict[WeylElement, Poly] = {}

    def weight(w):
        # w permutes the roots, so w(x_Pi) = x_Pi for "all"; each positive
        # root sent negative flips a sign for "negative"
        if w not in memo:
            sign = -1 if convention == "negative" and w.length % 2 else 1
            memo[w] = reflect(L, w, tp.parabolic) * sign
        return memo[w]

    eqs = []
    for u, terms in _convolution(cs, L, coeffs, weight):
        rhs = [Term(tp.total, (coeffs.factor(cs.system.identity, u),))]
        eqs.append(Equation(lhs=terms, rhs=rhs, coset=u))
    system = EquationSystem(cs, L, coeffs, eqs, _divisibility_conditions(cs, coeffs), "b",
                            torsion={"x_Pi": L.fmt(tp.total), "x_P": L.fmt(tp.parabolic),
                                     "x_Pi/P": L.fmt(tp.quotient), "convention": convention},
                            unknown_degree=tp.quotient.degree)
    return system


def _in_parabolic_roots(cs: CosetSystem, idx: int) -> bool:
    coords = cs.system.roots[idx]
    return all(c == 0 for i, c in enumerate(coords) if (i + 1) not in cs.parabolic)


def _positive(rs, idx: int) -> int:
    return idx if rs.is_positive(idx) else rs.negate(idx)


def _divisibility_conditions(cs: CosetSystem, coeffs: CosetCoefficientVector) -> list[Divisibility]:
    """
    ``w(alpha) | b_w - b_{s_{w(alpha)} w}`` for ``w`` in W^P and roots
    ``alpha`` outside the parabolic subsystem, rewritten through the
    invariance relations, normalized, and with the automatically true
    ones dropped.
    """
    rs = cs.system
    stab_groups = [parabolic_elements(rs, J) for J in coeffs.stabilizers]
    found = set()
    for wi, w in enumerate(cs.reps):
        for a in range(rs.n_positive):
            if _in_parabolic_roots(cs, a):
                continue
            gamma = w(a)
            partner = cs.class_index(rs.reflection(gamma) * w)
            k1, g1 = coeffs.entries[wi]
            k2, g2 = coeffs.entries[partner]
            # apply g1^{-1}: g1^{-1}(gamma) | c_k1 - (g1^{-1} g2)(c_k2)
            ginv = g1.inverse()
            cand = _normalize(rs, stab_groups, coeffs, ginv(gamma), k1, k2, ginv * g2)
            if cand is not None:
                found.add(cand)
    return sorted(found)


def _normalize(rs, stab_groups, coeffs, gamma, k1, k2, h):
    """Canonical form of ``gamma | c_k1 - h(c_k2)``; None if automatically true."""
    options = []
    for (ka, kb, hh, gg) in ((k1, k2, h, gamma), (k2, k1, h.inverse(), h.inverse()(gamma))):
        for t in stab_groups[ka]:
            g = t(gg)
            hc = min_coset_rep(t * hh, coeffs.stabilizers[kb])
            if ka == kb:
                if hc.length == 0:
                    return None
                refl = min_coset_rep(rs.reflection(g), coeffs.stabilizers[kb])
                if refl == hc:
                    return None
            options.append(Divisibility(_positive(rs, g), ka, kb, hc.word))
    return min(options)


# --- membership ------------------------------------------------------------

@dataclass
class MembershipResult:
    passed: bool
    failures: list[tuple[str, str]]
    narrow_passed: bool
    narrow_failures: list[tuple[str, str]]

    @property
    def disagreement(self) -> bool:
        return self.passed != self.narrow_passed

    def to_dict(self) -> dict:
        return {"passed": self.passed, "failures": [list(f) for f in self.failures],
                "narrow_passed": self.narrow_passed,
                "narrow_failures": [list(f) for f in self.narrow_failures]}


def _divides(L: CharacterLattice, root_idx: int, f: Poly) -> bool:
    if f.is_zero():
        return True
    coords = L.root_form(L.system.roots[root_idx])
    if f.p is not None and all(c % f.p == 0 for c in coords):
        return False
    try:
        divide_by_linear(f, coords)
    except InexactDivision:
        return False
    return True


def membership_check(L: CharacterLattice, cs: CosetSystem, b: FixedPointFunction,
                     narrow: bool = False) -> MembershipResult:
    """
    ``w(alpha) | b_w - b_{s_{w(alpha)} w}`` for every w in W^P and every
    root alpha outside the parabolic subsystem.

    The narrow variant only keeps pairs with ``w(alpha)`` inside the
    parabolic subsystem. Both verdicts are returned; ``narrow`` selects
    which one is reported as ``passed``, and a disagreement is logged.
    """
    rs = cs.system
    names = cs.names()
    broad_fail, narrow_fail = [], []
    for wi, w in enumerate(cs.reps):
        for a in range(rs.n_positive):
            if _in_parabolic_roots(cs, a):
                continue
            gamma = w(a)
            partner = cs.class_index(rs.reflection(gamma) * w)
            diff = b.values[wi] - b.values[partner]
            if _divides(L, gamma, diff):
                continue
            label = (names[wi], L.fmt(L.root_poly(_positive(rs, gamma))))
            broad_fail.append(label)
            if _in_parabolic_roots(cs, _positive(rs, gamma)):
                narrow_fail.append(label)
    res = MembershipResult(passed=not broad_fail, failures=broad_fail,
                           narrow_passed=not narrow_fail, narrow_failures=narrow_fail)
    if res.disagreement:
        log.warning("membership verdicts differ (broad %s, narrow %s) for %s/%s",
                    res.passed, res.narrow_passed, cs.system.label, sorted(cs.parabolic))
    if narrow:
        return MembershipResult(passed=res.narrow_passed, failures=narrow_fail,
                                narrow_passed=res.passed, narrow_failures=broad_fail)
    return res


def endomorphism_on_point(phi: EndomorphismMatrix) -> FixedPointFunction:
    """Fixed-point coordinates of ``phi([pt])`` (over Z, or reduced mod p)."""
    from .nilhecke import schubert_classes
    L, cs = phi.lattice, phi.cs
    xi = schubert_classes(L, cs)
    n = len(cs)
    vals = [Poly.zero(L.rank, phi.p)] * n
    for v in range(n):
        a = phi.entries[v][0]
        if a.is_zero():
            continue
        for u in range(n):
            x = xi[v].values[u]
            if phi.p is not None:
                x = x.reduce(phi.p)
            vals[u] = vals[u] + a * x
    return FixedPointFunction(tuple(vals))


def perm_module_endos(cs: CosetSystem, L: CharacterLattice, p: int | None = None) -> list[EndomorphismMatrix]:
    """
    The endomorphisms of the permutation module R[W/W_P], one per double
    coset (the sum of the classes in the block), as degree-0 matrices on
    the Schubert basis.
    """
    pt = point_class(L, cs, "negative")
    q = pt.values[0]
    out = []
    for blk in cs.double_cosets:
        vals = [q if u in blk.members else Poly.zero(L.rank) for u in range(len(cs))]
        col = to_schubert_coords(L, cs, FixedPointFunction(tuple(vals)))
        column = [col.coeffs.get(v, Poly.zero(L.rank)) for v in range(len(cs))]
        if p is not None:
            column = [c.reduce(p) for c in column]
        out.append(propagate_matrix(L, cs, column))
    return out
