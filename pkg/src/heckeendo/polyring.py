"""
Graded polynomials over Z or F_p in a basis of the character lattice,
the Weyl group action on them, and Demazure (divided difference) operators.

Only the additive formal group law is supported: ``x_lambda = lambda``,
so the coefficient ring is the symmetric algebra ``Sym(T^*)``.

Conventions
-----------
* ``demazure(L, i, f) = (f - s_i f) / alpha_i``.
* ``demazure_word(L, [3, 2, 1], f) = D3(D2(D1(f)))``: leftmost acts last.
* Monomials of degree d are ordered graded-lexicographically, largest
  first, in the order of the lattice basis labels.
"""

from __future__ import annotations

import ast
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .linalg import is_prime, matmul_mod, row_space_mod
from .rootsys import RootSystemData, WeylElement, build_root_system

__all__ = [
    "Poly", "CharacterLattice", "LatticeError", "InexactDivision",
    "monomials", "monomial_index", "lattice_preset", "LATTICE_PRESETS",
    "parse_lattice_file", "reflect", "demazure", "demazure_word",
    "operator_matrix", "demazure_matrix", "reflection_matrix",
    "homogeneous_image", "parse_poly", "check_formal_group_law",
]


class LatticeError(ValueError):
    pass


class InexactDivision(ArithmeticError):
    """A division that must be exact left a remainder: an invariant is broken."""


def check_formal_group_law(name: str) -> None:
    if name != "additive":
        raise ValueError(f"formal group law {name!r} is not supported (only 'additive')")


@lru_cache(maxsize=None)
def monomials(nvars: int, d: int) -> tuple[tuple[int, ...], ...]:
    """Exponent tuples of total degree d, largest first in lex order."""
    if d < 0:
        return ()
    if nvars == 0:
        return ((),) if d == 0 else ()
    if nvars == 1:
        return ((d,),)
    out = []
    for e in range(d, -1, -1):
        for rest in monomials(nvars - 1, d - e):
            out.append((e,) + rest)
    return tuple(out)


@lru_cache(maxsize=None)
def monomial_index(nvars: int, d: int) -> dict[tuple[int, ...], int]:
    return {m: k for k, m in enumerate(monomials(nvars, d))}


def _add_mono(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _mul_terms(a: dict, b: dict, p) -> dict:
    out: dict = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            m = _add_mono(ma, mb)
            out[m] = out.get(m, 0) + ca * cb
    return _clean(out, p)


def _clean(terms: dict, p) -> dict:
    if p is None:
        return {m: c for m, c in terms.items() if c}
    return {m: c % p for m, c in terms.items() if c % p}


class Poly:
    """
    Immutable sparse polynomial: exponent tuple -> nonzero coefficient.

    ``p=None`` means integer coefficients; otherwise coefficients live in
    ``F_p`` and are kept in ``[0, p)``.
    """

    __slots__ = ("terms", "nvars", "p")

    def __init__(self, terms: dict | None, nvars: int, p: int | None = None):
        self.terms = _clean(dict(terms or {}), p)
        self.nvars = nvars
        self.p = p

    # constructors
    @classmethod
    def zero(cls, nvars, p=None):
        return cls({}, nvars, p)

    @classmethod
    def const(cls, c, nvars, p=None):
        return cls({(0,) * nvars: c}, nvars, p)

    @classmethod
    def var(cls, k, nvars, p=None):
        e = [0] * nvars
        e[k] = 1
        return cls({tuple(e): 1}, nvars, p)

    @classmethod
    def linear(cls, coords: Sequence[int], p=None):
        n = len(coords)
        terms = {}
        for k, c in enumerate(coords):
            e = [0] * n
            e[k] = 1
            terms[tuple(e)] = int(c)
        return cls(terms, n, p)

    @classmethod
    def from_coords(cls, vec, d: int, nvars: int, p=None):
        mons = monomials(nvars, d)
        return cls({m: int(c) for m, c in zip(mons, vec) if c}, nvars, p)

    # basic protocol
    def _check(self, other):
        if self.nvars != other.nvars or self.p != other.p:
            raise ValueError("polynomials over different rings")

    def _lift(self, other):
        if isinstance(other, Poly):
            self._check(other)
            return other
        if isinstance(other, int):
            return Poly.const(other, self.nvars, self.p)
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return Poly(out, self.nvars, self.p)

    __radd__ = __add__

    def __neg__(self):
        return Poly({m: -c for m, c in self.terms.items()}, self.nvars, self.p)

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, int):
            return Poly({m: c * other for m, c in self.terms.items()}, self.nvars, self.p)
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return Poly(_mul_terms(self.terms, other.terms, self.p), self.nvars, self.p)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = Poly.const(1, self.nvars, self.p)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, int):
            other = Poly.const(other, self.nvars, self.p)
        if not isinstance(other, Poly):
            return NotImplemented
        return self.nvars == other.nvars and self.p == other.p and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, self.p, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        return f"Poly({self.to_str()!r})"

    # structure
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((sum(m) for m in self.terms), default=-1)

    def degrees(self) -> set[int]:
        return {sum(m) for m in self.terms}

    def is_homogeneous(self) -> bool:
        return len(self.degrees()) <= 1

    def homogeneous(self, d: int) -> Poly:
        return Poly({m: c for m, c in self.terms.items() if sum(m) == d}, self.nvars, self.p)

    def constant(self) -> int:
        return self.terms.get((0,) * self.nvars, 0)

    def coords(self, d: int) -> np.ndarray:
        """Coordinates of the degree-d part in the monomial basis of S^d."""
        idx = monomial_index(self.nvars, d)
        v = np.zeros(len(idx), dtype=object if self.p is None else np.int64)
        for m, c in self.terms.items():
            if sum(m) == d:
                v[idx[m]] = c
        return v

    def reduce(self, p: int) -> Poly:
        return Poly(self.terms, self.nvars, p)

    def lift(self) -> Poly:
        """Forget the modulus (representatives in [0, p))."""
        return Poly(self.terms, self.nvars, None)

    def substitute(self, images: Sequence[Poly]) -> Poly:
        """Replace variable k by ``images[k]``."""
        out: dict = {}
        powers = [dict() for _ in images]

        def pw(k, e):
            cache = powers[k]
            if e not in cache:
                cache[e] = (images[k] ** e).terms
            return cache[e]

        for m, c in self.terms.items():
            acc = {(0,) * images[0].nvars if images else (): c}
            for k, e in enumerate(m):
                if e:
                    acc = _mul_terms(acc, pw(k, e), self.p)
            for mm, cc in acc.items():
                out[mm] = out.get(mm, 0) + cc
        nv = images[0].nvars if images else 0
        return Poly(out, nv, self.p)

    def exact_div(self, g: Poly) -> Poly:
        """Quotient ``self / g``; raises InexactDivision unless g divides exactly."""
        self._check(g)
        if g.is_zero():
            raise InexactDivision("division by zero")
        def lead(terms):
            return max(terms)  # lex order on exponent tuples
        gl = lead(g.terms)
        gc = g.terms[gl]
        if self.p is None:
            R = {m: Fraction(c) for m, c in self.terms.items()}
            inv = None
        else:
            R = dict(self.terms)
            inv = pow(gc, -1, self.p)
        Q: dict = {}
        while R:
            m = lead(R)
            shift = tuple(a - b for a, b in zip(m, gl))
            if min(shift) < 0:
                raise InexactDivision("nonzero remainder")
            qc = R[m] / gc if inv is None else R[m] * inv % self.p
            Q[shift] = qc
            for mg, cg in g.terms.items():
                mm = _add_mono(mg, shift)
                v = R.get(mm, 0) - qc * cg
                if self.p is not None:
                    v %= self.p
                if v:
                    R[mm] = v
                else:
                    R.pop(mm, None)
        if self.p is None:
            if any(v.denominator != 1 for v in Q.values()):
                raise InexactDivision("non-integral quotient")
            Q = {m: int(v) for m, v in Q.items()}
        return Poly(Q, self.nvars, self.p)

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda t: (-sum(t[0]), tuple(-e for e in t[0])))

    def to_str(self, labels: Sequence[str] | None = None) -> str:
        labels = labels or [f"x{k + 1}" for k in range(self.nvars)]
        if not self.terms:
            return "0"
        parts = []
        for m, c in self.sorted_terms():
            mono = "*".join(
                labels[k] if e == 1 else f"{labels[k]}^{e}" for k, e in enumerate(m) if e
            )
            sign = "-" if c < 0 else "+"
            a = abs(c)
            if not mono:
                body = str(a)
            elif a == 1:
                body = mono
            else:
                body = f"{a}*{mono}"
            parts.append((sign, body))
        first_sign, first = parts[0]
        text = ("-" if first_sign == "-" else "") + first
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text


def parse_poly(text: str, labels: Sequence[str], p: int | None = None) -> Poly:
    """
    Parse ``+ - *``, ``^`` (nonnegative integer powers), integers, parentheses
    and the lattice labels. Accepts everything :meth:`Poly.to_str` prints.
    """
    n = len(labels)
    pos = {lab: k for k, lab in enumerate(labels)}
    try:
        tree = ast.parse(text.replace("^", "**").strip(), mode="eval")
    except SyntaxError as e:
        raise ValueError(f"cannot parse polynomial {text!r}") from e

    def ev(node) -> Poly:
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and type(node.value) is int:
            return Poly.const(node.value, n, p)
        if isinstance(node, ast.Name):
            if node.id not in pos:
                raise ValueError(f"unknown variable {node.id!r}")
            return Poly.var(pos[node.id], n, p)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                e = node.right
                if not (isinstance(e, ast.Constant) and type(e.value) is int and e.value >= 0):
                    raise ValueError(f"exponent must be a nonnegative integer in {text!r}")
                return ev(node.left) ** e.value
            ops = {ast.Add: Poly.__add__, ast.Sub: Poly.__sub__, ast.Mult: Poly.__mul__}
            if type(node.op) in ops:
                return ops[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"unsupported syntax in polynomial {text!r}")

    return ev(tree)


@dataclass(eq=False)
class CharacterLattice:
    """
    A basis of ``T^*`` together with the data fixing the W-action.

    ``simple_root_coords[i]`` are the coordinates of alpha_{i+1} in the
    basis and ``coroot_pairings[i][k] = <b_k, alpha_{i+1}^vee>``.
    """
    name: str
    system: RootSystemData
    labels: tuple[str, ...]
    simple_root_coords: tuple[tuple[int, ...], ...]
    coroot_pairings: tuple[tuple[int, ...], ...]
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        self.validate()

    def __eq__(self, other):
        return (isinstance(other, CharacterLattice) and self.system == other.system
                and self.labels == other.labels
                and self.simple_root_coords == other.simple_root_coords
                and self.coroot_pairings == other.coroot_pairings)

    def __hash__(self):
        return hash((self.labels, self.simple_root_coords, self.coroot_pairings))

    @property
    def rank(self) -> int:
        return len(self.labels)

    def validate(self) -> None:
        r, n = self.rank, self.system.rank
        if len(self.simple_root_coords) != n or len(self.coroot_pairings) != n:
            raise LatticeError("need one root coordinate row and one pairing row per node")
        for row in list(self.simple_root_coords) + list(self.coroot_pairings):
            if len(row) != r:
                raise LatticeError("coordinate rows must match the number of basis labels")
        A = self.system.cartan
        for i in range(n):
            for j in range(n):
                val = sum(c * q for c, q in zip(self.simple_root_coords[j], self.coroot_pairings[i]))
                if val != A[i][j]:
                    raise LatticeError(
                        f"<alpha_{j + 1}, alpha_{i + 1}^vee> = {val}, Cartan entry is {A[i][j]}")
        for i in range(n):
            R = self.reflection_lin(i + 1)
            if not np.array_equal(R @ R, np.eye(r, dtype=np.int64)):  # pragma: no cover
                raise LatticeError(f"s_{i + 1} does not square to the identity")

    def reflection_lin(self, i: int) -> np.ndarray:
        """Matrix of s_i on basis coordinates of linear forms (column k = s_i(b_k))."""
        a = np.array(self.simple_root_coords[i - 1], dtype=np.int64)
        q = np.array(self.coroot_pairings[i - 1], dtype=np.int64)
        return np.eye(self.rank, dtype=np.int64) - np.outer(a, q)

    def weyl_lin(self, w: WeylElement | Sequence[int]) -> np.ndarray:
        word = w.word if isinstance(w, WeylElement) else tuple(w)
        key = ("lin", word)
        if key in self._cache:
            return self._cache[key]
        M = np.eye(self.rank, dtype=np.int64)
        for i in word:
            M = M @ self.reflection_lin(i)
        with self._lock:
            self._cache[key] = M
        return M

    def root_form(self, coords: Sequence[int]) -> tuple[int, ...]:
        """Basis coordinates of the root with the given simple-root coordinates."""
        out = [0] * self.rank
        for j, c in enumerate(coords):
            for k in range(self.rank):
                out[k] += c * self.simple_root_coords[j][k]
        return tuple(out)

    def root_poly(self, root_idx: int, p: int | None = None) -> Poly:
        return Poly.linear(self.root_form(self.system.roots[root_idx]), p)

    def alpha(self, i: int, p: int | None = None) -> Poly:
        return Poly.linear(self.simple_root_coords[i - 1], p)

    def var(self, label: str, p: int | None = None) -> Poly:
        return Poly.var(self.labels.index(label), self.rank, p)

    def poly(self, text: str, p: int | None = None) -> Poly:
        return parse_poly(text, self.labels, p)

    def fmt(self, f: Poly) -> str:
        return f.to_str(self.labels)

    def cached(self, key, build):
        """Insert-once cache shared by concurrent readers."""
        try:
            return self._cache[key]
        except KeyError:
            pass
        value = build()
        with self._lock:
            return self._cache.setdefault(key, value)


def _root_lattice(system: RootSystemData) -> CharacterLattice:
    n = system.rank
    eye = tuple(tuple(1 if k == i else 0 for k in range(n)) for i in range(n))
    return CharacterLattice(
        name="root", system=system, labels=tuple(f"a{i + 1}" for i in range(n)),
        simple_root_coords=eye, coroot_pairings=system.cartan,
    )


def _lattice_with_weight(system, name, kept, weight, dependent):
    """
    Basis = simple roots ``kept`` plus the fundamental weight ``omega_weight``;
    ``dependent`` maps the remaining root to its coordinates in that basis.
    """
    A = system.cartan
    labels = tuple(f"a{i}" for i in kept) + (f"w{weight}",)
    coords = []
    for i in range(1, system.rank + 1):
        if i in kept:
            coords.append(tuple(1 if k == kept.index(i) else 0 for k in range(len(labels))))
        else:
            coords.append(tuple(dependent[i]))
    pair = []
    for i in range(system.rank):
        row = [A[i][j - 1] for j in kept] + [1 if i + 1 == weight else 0]
        pair.append(tuple(row))
    return CharacterLattice(name=name, system=system, labels=labels,
                            simple_root_coords=tuple(coords), coroot_pairings=tuple(pair))


LATTICE_PRESETS = {
    "root": "root lattice of any type (basis: simple roots)",
    "A3-omega2": "A3 root lattice plus omega_2; basis a1,a2,w2; alpha_3 = 2w2 - a1 - 2a2",
    "D4-SO8": "D4 root lattice plus omega_1; basis a1,a2,a3,w1; alpha_4 = 2w1 - 2a1 - 2a2 - a3",
    "D4-HSpin8": "D4 root lattice plus omega_4; basis a2,a3,a4,w4; alpha_1 = 2w4 - 2a2 - a3 - 2a4",
}


def lattice_preset(name: str, system: RootSystemData | None = None) -> CharacterLattice:
    if name == "root":
        if system is None:
            raise LatticeError("the root preset needs a root system")
        return _root_lattice(system)
    if name == "A3-omega2":
        system = system or build_root_system("A", 3)
        _expect(system, "A", 3, name)
        return _lattice_with_weight(system, name, [1, 2], 2, {3: (-1, -2, 2)})
    if name == "D4-SO8":
        system = system or build_root_system("D", 4)
        _expect(system, "D", 4, name)
        return _lattice_with_weight(system, name, [1, 2, 3], 1, {4: (-2, -2, -1, 2)})
    if name == "D4-HSpin8":
        system = system or build_root_system("D", 4)
        _expect(system, "D", 4, name)
        return _lattice_with_weight(system, name, [2, 3, 4], 4, {1: (-2, -1, -2, 2)})
    raise LatticeError(f"unknown lattice preset {name!r}")


def _expect(system, t, r, name):
    if (system.type_label, system.rank) != (t, r):
        raise LatticeError(f"lattice {name} needs type {t}{r}, got {system.label}")


def parse_lattice_file(text: str, system: RootSystemData, name: str = "custom") -> CharacterLattice:
    """
    Key-value lattice description::

        labels = a1, a2, w2
        root1 = 1, 0, 0
        pairing1 = 2, -1, 0
        ...
    """
    data = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise LatticeError(f"malformed line {line!r}")
        data[key.strip()] = value.strip()
    try:
        labels = tuple(s.strip() for s in data["labels"].split(","))
        roots = tuple(tuple(int(x) for x in data[f"root{i}"].split(","))
                      for i in range(1, system.rank + 1))
        pairs = tuple(tuple(int(x) for x in data[f"pairing{i}"].split(","))
                      for i in range(1, system.rank + 1))
    except KeyError as exc:
        raise LatticeError(f"lattice file is missing {exc.args[0]!r}") from None
    return CharacterLattice(name=name, system=system, labels=labels,
                            simple_root_coords=roots, coroot_pairings=pairs)


# --- W-action ------------------------------------------------------------

def _images(L: CharacterLattice, M: np.ndarray, p):
    return [Poly.linear([int(x) for x in M[:, k]], p) for k in range(L.rank)]


def reflect(L: CharacterLattice, w: WeylElement | Sequence[int] | int, f: Poly) -> Poly:
    """Apply a Weyl group element (element, word, or simple index) to f."""
    if isinstance(w, int):
        w = (w,)
    M = L.weyl_lin(w)
    return f.substitute(_images(L, M, f.p))


def _divide_linear(g: Poly, ell: Sequence[int]) -> Poly:
    """Exact quotient g / ell over Q, required to be integral (g over Z)."""
    if g.is_zero():
        return Poly.zero(g.nvars, g.p)
    nz = [(abs(c), k) for k, c in enumerate(ell) if c]
    if not nz:
        raise InexactDivision("division by the zero linear form")
    k = min(nz)[1]
    c = Fraction(ell[k])
    rest = [(j, ell[j]) for j in range(len(ell)) if j != k and ell[j]]
    R = {m: Fraction(v) for m, v in g.terms.items()}
    Q: dict = {}
    while True:
        top = max((m[k] for m in R), default=0)
        if top == 0:
            break
        lead = {m: v for m, v in R.items() if m[k] == top}
        for m, v in lead.items():
            qm = list(m)
            qm[k] -= 1
            qm = tuple(qm)
            qc = v / c
            Q[qm] = Q.get(qm, 0) + qc
            # subtract ell * (qc * x^qm)
            R[m] = R.get(m, 0) - qc * c
            for j, cj in rest:
                mm = list(qm)
                mm[j] += 1
                mm = tuple(mm)
                R[mm] = R.get(mm, 0) - qc * cj
        R = {m: v for m, v in R.items() if v}
    if R:
        raise InexactDivision("nonzero remainder")
    if any(v.denominator != 1 for v in Q.values()):
        raise InexactDivision("non-integral quotient")
    return Poly({m: int(v) for m, v in Q.items()}, g.nvars, None)


def divide_by_linear(f: Poly, ell: Sequence[int]) -> Poly:
    """
    Exact quotient of f by the linear form with coordinates ``ell``.

    Over F_p the form is reduced mod p first and must stay nonzero.
    """
    if f.p is None:
        return _divide_linear(f, ell)
    p = f.p
    ell = [c % p for c in ell]
    if not any(ell):
        raise InexactDivision("linear form vanishes mod p")
    k = next(j for j, c in enumerate(ell) if c)
    inv = pow(ell[k], -1, p)
    R = dict(f.terms)
    Q: dict = {}
    while True:
        top = max((m[k] for m in R), default=0)
        if top == 0:
            break
        lead = [(m, v) for m, v in R.items() if m[k] == top]
        for m, v in lead:
            qm = list(m)
            qm[k] -= 1
            qm = tuple(qm)
            qc = v * inv % p
            Q[qm] = (Q.get(qm, 0) + qc) % p
            for j, cj in enumerate(ell):
                if cj:
                    mm = list(qm)
                    mm[j] += 1
                    mm = tuple(mm)
                    R[mm] = (R.get(mm, 0) - qc * cj) % p
        R = {m: v for m, v in R.items() if v}
    if R:
        raise InexactDivision("nonzero remainder mod p")
    return Poly(Q, f.nvars, p)


def demazure(L: CharacterLattice, i: int, f: Poly) -> Poly:
    """
    ``(f - s_i f) / alpha_i``.

    Over Z this is a direct exact division; over F_p it goes through the
    integer operator matrices reduced mod p, since alpha_i may degenerate.
    """
    if f.p is None:
        return _divide_linear(f - reflect(L, i, f), L.simple_root_coords[i - 1])
    out = Poly.zero(f.nvars, f.p)
    for d in sorted(f.degrees()):
        if d == 0:
            continue
        M = demazure_matrix(L, i, d, f.p)
        out = out + Poly.from_coords(matmul_mod(M, f.coords(d)[:, None], f.p)[:, 0],
                                     d - 1, f.nvars, f.p)
    return out


def demazure_word(L: CharacterLattice, word: Sequence[int], f: Poly) -> Poly:
    for i in reversed(list(word)):
        f = demazure(L, i, f)
    return f


# --- per-degree operator matrices -----------------------------------------

def _leibniz_table(L: CharacterLattice, i: int):
    """Memo of D_i on monomials via D_i(x_k m) = c_k m + s_i(x_k) D_i(m)."""
    def build():
        return {}
    return L.cached(("leib", i), build)


def _demazure_monomial(L: CharacterLattice, i: int, m: tuple[int, ...]) -> dict:
    memo = _leibniz_table(L, i)
    hit = memo.get(m)
    if hit is not None:
        return hit
    k = next(j for j, e in enumerate(m) if e)
    rest = list(m)
    rest[k] -= 1
    rest = tuple(rest)
    ck = L.coroot_pairings[i - 1][k]
    sx = L.reflection_lin(i)[:, k]
    sx_terms = {}
    for j, c in enumerate(sx):
        if c:
            e = [0] * L.rank
            e[j] = 1
            sx_terms[tuple(e)] = int(c)
    out: dict = {}
    if ck:
        out[rest] = ck
    if sum(rest) > 0:
        for mm, cc in _mul_terms(sx_terms, _demazure_monomial(L, i, rest), None).items():
            out[mm] = out.get(mm, 0) + cc
    out = {mm: cc for mm, cc in out.items() if cc}
    memo[m] = out
    return out


def _int_demazure_matrix(L, i, d):
    def build():
        src = monomials(L.rank, d)
        tgt = monomial_index(L.rank, d - 1)
        M = np.zeros((len(tgt), len(src)), dtype=object)
        if d == 0:
            return M
        for c, m in enumerate(src):
            for mm, v in _demazure_monomial(L, i, m).items():
                M[tgt[mm], c] = v
        return M
    return L.cached(("D", i, d, None), build)


def _int_reflection_matrix(L, i, d):
    def build():
        src = monomials(L.rank, d)
        idx = monomial_index(L.rank, d)
        images = _images(L, L.reflection_lin(i), None)
        M = np.zeros((len(src), len(src)), dtype=object)
        for c, m in enumerate(src):
            for mm, v in Poly({m: 1}, L.rank).substitute(images).terms.items():
                M[idx[mm], c] = v
        return M
    return L.cached(("s", i, d, None), build)


def demazure_matrix(L: CharacterLattice, i: int, d: int, p: int | None = None) -> np.ndarray:
    """Matrix of D_i : S^d -> S^{d-1} in the monomial bases."""
    if p is None:
        return _int_demazure_matrix(L, i, d)
    return L.cached(("D", i, d, p),
                    lambda: (_int_demazure_matrix(L, i, d) % p).astype(np.int64))


def reflection_matrix(L: CharacterLattice, i: int, d: int, p: int | None = None) -> np.ndarray:
    """Matrix of s_i : S^d -> S^d in the monomial basis."""
    if p is None:
        return _int_reflection_matrix(L, i, d)
    return L.cached(("s", i, d, p),
                    lambda: (_int_reflection_matrix(L, i, d) % p).astype(np.int64))


def operator_matrix(L: CharacterLattice, ops: Sequence, d: int, p: int | None = None) -> np.ndarray:
    """
    Matrix of a composite operator on S^d.

    ``ops`` lists ``("D", j)`` / ``("s", j)`` pairs outermost first; a bare
    int stands for ``("D", j)``.
    """
    ops = [("D", o) if isinstance(o, int) else tuple(o) for o in ops]
    n = len(monomials(L.rank, d))
    M = np.eye(n, dtype=object if p is None else np.int64)
    deg = d
    for kind, j in reversed(ops):
        if deg < 0:
            break
        if kind == "D":
            A = demazure_matrix(L, j, deg, p)
            deg -= 1
        else:
            A = reflection_matrix(L, j, deg, p)
        M = A.dot(M) if p is None else matmul_mod(A, M, p)
    if deg < 0:
        return np.zeros((0, n), dtype=M.dtype)
    return M


def homogeneous_image(L: CharacterLattice, word: Sequence[int], d: int, p: int) -> list[Poly]:
    """Echelon basis of ``D_word(S^d)`` mod p; empty list = zero space."""
    k = len(word)
    if d < k:
        return []
    M = operator_matrix(L, list(word), d, p)
    B = row_space_mod(M.T % p, p)
    return [Poly.from_coords(row, d - k, L.rank, p) for row in B]


def span_basis(polys: Iterable[Poly], d: int, nvars: int, p: int) -> list[Poly]:
    """Echelon basis of the F_p-span of homogeneous degree-d polynomials."""
    rows = [f.reduce(p).coords(d) for f in polys]
    if not rows:
        return []
    B = row_space_mod(np.array(rows, dtype=np.int64), p)
    return [Poly.from_coords(row, d, nvars, p) for row in B]
