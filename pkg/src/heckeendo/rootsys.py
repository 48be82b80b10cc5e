"""
Root systems, Weyl groups and parabolic coset combinatorics.

Simple reflections are labelled ``1..rank`` everywhere in the public API.
A Weyl group element is stored as the permutation it induces on the full
list of roots; reduced words are recovered from it by greedy left descents,
which yields the lexicographically smallest reduced word.

>>> rs = build_root_system("A", 2)
>>> len(rs.roots), rs.n_positive
(6, 3)
>>> rs.element([1, 2, 1]) == rs.element([2, 1, 2])
True
>>> rs.element([2, 1, 2]).word
(1, 2, 1)
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "RootSystemData", "WeylElement", "CosetSystem", "DoubleCoset",
    "RootSystemError", "build_root_system", "cartan_matrix",
    "minimal_coset_reps", "double_cosets", "coset_mult_table",
    "DEFAULT_RANK_CAP",
]

DEFAULT_RANK_CAP = 8


class RootSystemError(ValueError):
    pass


def _chain_edges(rank):
    return [(i, i + 1) for i in range(rank - 1)]


def cartan_matrix(type_label: str, rank: int) -> list[list[int]]:
    """
    Cartan matrix ``A`` with ``A[i][j] = <alpha_j, alpha_i^vee>`` (0-based).

    Bourbaki numbering; for D the branch node is node 2 for D4 and node
    ``rank - 2`` in general.
    """
    t = type_label.upper()
    valid = {
        "A": rank >= 1, "B": rank >= 2, "C": rank >= 2, "D": rank >= 4,
        "E": rank in (6, 7, 8), "F": rank == 4, "G": rank == 2,
    }
    if t not in valid or not valid[t]:
        raise RootSystemError(f"invalid simple type {type_label}{rank}")
    A = [[2 if i == j else 0 for j in range(rank)] for i in range(rank)]

    def link(i, j):
        A[i][j] = A[j][i] = -1

    if t in "ABC":
        for i, j in _chain_edges(rank):
            link(i, j)
        if t == "B":
            # alpha_n short
            A[rank - 1][rank - 2] = -2
        elif t == "C":
            A[rank - 2][rank - 1] = -2
    elif t == "D":
        for i, j in _chain_edges(rank - 1):
            link(i, j)
        link(rank - 3, rank - 1)
    elif t == "E":
        # Bourbaki: 1-3-4-5-...-n chain, 2 attached to 4
        chain = [0] + list(range(2, rank))
        for a, b in zip(chain, chain[1:]):
            link(a, b)
        link(1, 3)
    elif t == "F":
        link(0, 1)
        link(2, 3)
        A[1][2] = -2
        A[2][1] = -1
    elif t == "G":
        A[0][1] = -1
        A[1][0] = -3
    return A


def _reflect_coords(A, i, beta):
    """s_i(beta) for beta in simple-root coordinates."""
    pairing = sum(b * A[i][j] for j, b in enumerate(beta))
    out = list(beta)
    out[i] -= pairing
    return tuple(out)


@dataclass(frozen=True, eq=False)
class RootSystemData:
    type_label: str
    rank: int
    cartan: tuple[tuple[int, ...], ...]
    roots: tuple[tuple[int, ...], ...]  # positives first, then negatives in the same order
    n_positive: int
    adjacency: tuple[frozenset[int], ...]  # 1-based neighbours per node
    _root_index: dict = field(repr=False)
    _simple_perms: tuple[tuple[int, ...], ...] = field(repr=False)

    def __eq__(self, other):
        return (isinstance(other, RootSystemData)
                and self.type_label == other.type_label
                and self.cartan == other.cartan)

    def __hash__(self):
        return hash((self.type_label, self.cartan))

    @property
    def label(self) -> str:
        return f"{self.type_label}{self.rank}"

    @property
    def simply_laced(self) -> bool:
        return all(self.cartan[i][j] in (0, -1, 2)
                   for i in range(self.rank) for j in range(self.rank))

    def root_index(self, coords: Sequence[int]) -> int:
        return self._root_index[tuple(coords)]

    def is_positive(self, idx: int) -> bool:
        return idx < self.n_positive

    def negate(self, idx: int) -> int:
        return idx + self.n_positive if idx < self.n_positive else idx - self.n_positive

    def simple_root_index(self, i: int) -> int:
        e = [0] * self.rank
        e[i - 1] = 1
        return self._root_index[tuple(e)]

    @cached_property
    def identity(self) -> WeylElement:
        return WeylElement(self, tuple(range(len(self.roots))))

    def simple(self, i: int) -> WeylElement:
        if not 1 <= i <= self.rank:
            raise RootSystemError(f"no simple reflection s_{i} in {self.label}")
        return WeylElement(self, self._simple_perms[i - 1])

    def element(self, word: Iterable[int]) -> WeylElement:
        """The product ``s_{w[0]} s_{w[1]} ...`` (leftmost acts last)."""
        w = self.identity
        for i in word:
            w = w * self.simple(i)
        return w

    def reflection(self, root_idx: int) -> WeylElement:
        """The reflection s_beta for the root with index ``root_idx``."""
        beta = self.roots[root_idx]
        # conjugate a simple reflection: find w with w(alpha_i) = +-beta
        pos = root_idx if self.is_positive(root_idx) else self.negate(root_idx)
        w = self.identity
        cur = pos
        while True:
            coords = self.roots[cur]
            if sum(coords) == 1:
                i = coords.index(1) + 1
                return w * self.simple(i) * w.inverse()
            # descend in height with some simple reflection
            for i in range(1, self.rank + 1):
                nxt = self._simple_perms[i - 1][cur]
                if self.is_positive(nxt) and sum(self.roots[nxt]) < sum(self.roots[cur]):
                    w = w * self.simple(i)
                    cur = nxt
                    break
            else:  # pragma: no cover
                raise AssertionError(f"cannot descend root {beta}")

    def enumerate_group(self, limit: int = 100_000) -> list[WeylElement]:
        """All of W, by breadth-first search; refuses groups above ``limit``."""
        seen = {self.identity.perm: self.identity}
        queue = deque([self.identity])
        while queue:
            w = queue.popleft()
            for i in range(1, self.rank + 1):
                u = self.simple(i) * w
                if u.perm not in seen:
                    seen[u.perm] = u
                    if len(seen) > limit:
                        raise RootSystemError(f"|W({self.label})| exceeds {limit}")
                    queue.append(u)
        return sorted(seen.values(), key=lambda w: (w.length, w.word))


def build_root_system(type_label: str, rank: int, rank_cap: int = DEFAULT_RANK_CAP) -> RootSystemData:
    """Cartan datum and full root list of a simple type."""
    if rank < 1:
        raise RootSystemError("rank must be positive")
    if rank > rank_cap:
        raise RootSystemError(f"rank {rank} exceeds cap {rank_cap}")
    A = cartan_matrix(type_label, rank)
    simple = []
    for i in range(rank):
        e = [0] * rank
        e[i] = 1
        simple.append(tuple(e))
    found = set(simple)
    queue = deque(simple)
    while queue:
        beta = queue.popleft()
        for i in range(rank):
            g = _reflect_coords(A, i, beta)
            if g not in found:
                found.add(g)
                queue.append(g)
    positives = sorted((r for r in found if all(c >= 0 for c in r)),
                       key=lambda r: (sum(r), tuple(-c for c in r)))
    if 2 * len(positives) != len(found):  # pragma: no cover
        raise AssertionError("root closure is not symmetric")
    roots = tuple(positives) + tuple(tuple(-c for c in r) for r in positives)
    index = {r: k for k, r in enumerate(roots)}
    perms = tuple(
        tuple(index[_reflect_coords(A, i, r)] for r in roots) for i in range(rank)
    )
    adjacency = tuple(
        frozenset(j + 1 for j in range(rank) if j != i and A[i][j] != 0)
        for i in range(rank)
    )
    return RootSystemData(
        type_label=type_label.upper(), rank=rank,
        cartan=tuple(tuple(row) for row in A), roots=roots,
        n_positive=len(positives), adjacency=adjacency,
        _root_index=index, _simple_perms=perms,
    )


@dataclass(frozen=True, eq=False)
class WeylElement:
    """An element of W, identified by its permutation of the roots."""
    system: RootSystemData = field(repr=False)
    perm: tuple[int, ...]

    def __eq__(self, other):
        return isinstance(other, WeylElement) and self.perm == other.perm

    def __hash__(self):
        return hash(self.perm)

    def __repr__(self):
        return f"WeylElement({self.name})"

    def __mul__(self, other: WeylElement) -> WeylElement:
        # (vw)(beta) = v(w(beta))
        p = self.perm
        return WeylElement(self.system, tuple(p[k] for k in other.perm))

    def inverse(self) -> WeylElement:
        inv = [0] * len(self.perm)
        for k, img in enumerate(self.perm):
            inv[img] = k
        return WeylElement(self.system, tuple(inv))

    def __call__(self, root_idx: int) -> int:
        return self.perm[root_idx]

    @cached_property
    def length(self) -> int:
        n = self.system.n_positive
        return sum(1 for k in range(n) if self.perm[k] >= n)

    def has_left_descent(self, i: int) -> bool:
        # l(s_i w) < l(w)  iff  w^{-1}(alpha_i) < 0
        a = self.system.simple_root_index(i)
        return not self.system.is_positive(self.perm.index(a))

    def has_right_descent(self, i: int) -> bool:
        return not self.system.is_positive(self.perm[self.system.simple_root_index(i)])

    @cached_property
    def word(self) -> tuple[int, ...]:
        out = []
        w = self
        while w.length:
            for i in range(1, self.system.rank + 1):
                if w.has_left_descent(i):
                    out.append(i)
                    w = self.system.simple(i) * w
                    break
        return tuple(out)

    @property
    def name(self) -> str:
        return "1" if not self.word else "s" + "s".join(str(i) for i in self.word)


@dataclass(frozen=True)
class DoubleCoset:
    members: tuple[int, ...]  # indices into CosetSystem.reps
    rep: int                  # the shortest member


@dataclass(eq=False)
class CosetSystem:
    """
    Minimal left coset representatives ``W^P`` of ``W/W_P``.

    ``reps`` is sorted by length then reduced word; ``hasse_edges`` holds
    ``(v, j, u)`` index triples with ``u = s_j v``, ``l(u) = l(v) + 1``.
    """
    system: RootSystemData
    parabolic: frozenset[int]
    reps: list[WeylElement]
    hasse_edges: list[tuple[int, int, int]]
    index: dict[tuple[int, ...], int] = field(repr=False)

    def __len__(self):
        return len(self.reps)

    def length(self, idx: int) -> int:
        return self.reps[idx].length

    @property
    def lengths(self) -> list[int]:
        return [w.length for w in self.reps]

    def in_parabolic(self, i: int) -> bool:
        return i in self.parabolic

    def reduce(self, w: WeylElement) -> WeylElement:
        """Minimal representative of ``w W_P``."""
        rs = self.system
        changed = True
        while changed:
            changed = False
            for i in sorted(self.parabolic):
                if w.has_right_descent(i):
                    w = w * rs.simple(i)
                    changed = True
        return w

    def class_index(self, w: WeylElement) -> int:
        return self.index[self.reduce(w).perm]

    def left_mult(self, j: int, idx: int) -> int:
        """Index of the class of ``s_j * reps[idx]``."""
        return self.class_index(self.system.simple(j) * self.reps[idx])

    def up_edge(self, j: int, idx: int) -> int | None:
        """Index of ``s_j v`` when it lies in W^P one step higher, else None."""
        u = self.system.simple(j) * self.reps[idx]
        if u.length > self.reps[idx].length:
            k = self.index.get(u.perm)
            return k
        return None

    def down_edge(self, j: int, idx: int) -> int | None:
        u = self.system.simple(j) * self.reps[idx]
        if u.length < self.reps[idx].length:
            k = self.index.get(u.perm)
            if k is None:  # pragma: no cover - excluded by Deodhar's lemma
                raise AssertionError(f"s_{j}{self.reps[idx].name} left W^P for {self.system.type_label}"
                                     f"{self.system.rank}, parabolic {list(self.parabolic)}")
            return k
        return None

    def find(self, word: Sequence[int]) -> int:
        """Index of the representative equal to the product of ``word``."""
        return self.index[self.system.element(word).perm]

    def names(self) -> list[str]:
        return [w.name for w in self.reps]

    @cached_property
    def double_cosets(self) -> list[DoubleCoset]:
        return double_cosets(self)

    @cached_property
    def mult_table(self) -> list[list[int]]:
        return coset_mult_table(self)


def minimal_coset_reps(system: RootSystemData, parabolic: Iterable[int]) -> CosetSystem:
    P = frozenset(parabolic)
    bad = [i for i in P if not 1 <= i <= system.rank]
    if bad:
        raise RootSystemError(f"parabolic subset {sorted(P)} not within 1..{system.rank}")
    simple_idx = {i: system.simple_root_index(i) for i in P}

    def in_WP(w):
        return all(system.is_positive(w.perm[simple_idx[i]]) for i in P)

    found = {system.identity.perm: system.identity}
    frontier = [system.identity]
    while frontier:
        nxt = []
        for v in frontier:
            for j in range(1, system.rank + 1):
                u = system.simple(j) * v
                if u.perm in found or u.length <= v.length or not in_WP(u):
                    continue
                found[u.perm] = u
                nxt.append(u)
        frontier = nxt
    reps = sorted(found.values(), key=lambda w: (w.length, w.word))
    index = {w.perm: k for k, w in enumerate(reps)}
    edges = []
    for k, v in enumerate(reps):
        for j in range(1, system.rank + 1):
            u = system.simple(j) * v
            if u.length == v.length + 1 and u.perm in index:
                edges.append((k, j, index[u.perm]))
    return CosetSystem(system=system, parabolic=P, reps=reps, hasse_edges=edges, index=index)


def double_cosets(cs: CosetSystem) -> list[DoubleCoset]:
    """Blocks of ``W_P \\ W / W_P`` as sets of W^P indices."""
    parent = list(range(len(cs)))

    def root(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for k in range(len(cs)):
        for i in cs.parabolic:
            a, b = root(k), root(cs.left_mult(i, k))
            if a != b:
                parent[max(a, b)] = min(a, b)
    blocks: dict[int, list[int]] = {}
    for k in range(len(cs)):
        blocks.setdefault(root(k), []).append(k)
    out = [DoubleCoset(members=tuple(m), rep=min(m)) for m in blocks.values()]
    return sorted(out, key=lambda b: b.rep)


def coset_mult_table(cs: CosetSystem) -> list[list[int]]:
    """``T[i][j]`` = index of the class of ``reps[i] * reps[j]``."""
    return [[cs.class_index(a * b) for b in cs.reps] for a in cs.reps]


def parabolic_elements(system: RootSystemData, J: Iterable[int]) -> list[WeylElement]:
    """All elements of the standard parabolic subgroup W_J."""
    J = sorted(set(J))
    seen = {system.identity.perm: system.identity}
    queue = deque([system.identity])
    while queue:
        w = queue.popleft()
        for i in J:
            u = system.simple(i) * w
            if u.perm not in seen:
                seen[u.perm] = u
                queue.append(u)
    return sorted(seen.values(), key=lambda w: (w.length, w.word))


def min_coset_rep(w: WeylElement, J: Iterable[int]) -> WeylElement:
    """Minimal element of ``w W_J``."""
    J = sorted(set(J))
    rs = w.system
    changed = True
    while changed:
        changed = False
        for i in J:
            if w.has_right_descent(i):
                w = w * rs.simple(i)
                changed = True
    return w


def root_matrix(w: WeylElement) -> np.ndarray:
    """Matrix of ``w`` on simple-root coordinates (columns = images of alpha_i)."""
    rs = w.system
    cols = [rs.roots[w.perm[rs.simple_root_index(i)]] for i in range(1, rs.rank + 1)]
    return np.array(cols, dtype=np.int64).T
