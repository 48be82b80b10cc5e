import math

import pytest

from heckeendo.rootsys import (RootSystemError, build_root_system, cartan_matrix, min_coset_rep,
                               minimal_coset_reps, parabolic_elements)


def group_order(t, n):
    return {"A": math.factorial(n + 1), "B": 2 ** n * math.factorial(n), "C": 2 ** n * math.factorial(n),
            "D": 2 ** (n - 1) * math.factorial(n)}[t]


@pytest.mark.parametrize("t,n,roots", [("A", 1, 2), ("A", 3, 12), ("A", 5, 30), ("B", 3, 18),
                                       ("C", 3, 18), ("D", 4, 24), ("G", 2, 12), ("F", 4, 48)])
def test_root_counts(t, n, roots):
    rs = build_root_system(t, n)
    assert len(rs.roots) == roots
    assert rs.n_positive == roots // 2


@pytest.mark.parametrize("t,n", [("A", 1), ("A", 2), ("A", 3), ("A", 4), ("B", 3), ("D", 4)])
def test_group_order(t, n):
    assert len(build_root_system(t, n).enumerate_group()) == group_order(t, n)


def test_d4_cartan_central_node():
    A = cartan_matrix("D", 4)
    assert [A[1][j] for j in range(4)] == [-1, 2, -1, -1]
    assert A[0][2] == A[0][3] == A[2][3] == 0


def test_bad_input():
    with pytest.raises(RootSystemError):
        build_root_system("D", 2)
    with pytest.raises(RootSystemError):
        build_root_system("E", 5)
    with pytest.raises(RootSystemError):
        build_root_system("A", 9)


def brute_reps(rs, P):
    return sorted((w for w in rs.enumerate_group() if not any(w.has_right_descent(i) for i in P)),
                  key=lambda w: (w.length, w.word))


CASES = [("A", 2, [2]), ("A", 3, [2, 3]), ("A", 3, [1, 3]), ("A", 4, [2, 4]), ("D", 4, [2, 3, 4]),
         ("B", 3, [1]), ("A", 3, [])]


@pytest.mark.parametrize("t,n,P", CASES)
def test_minimal_reps_match_brute_force(t, n, P):
    rs = build_root_system(t, n)
    cs = minimal_coset_reps(rs, P)
    assert {w.perm for w in cs.reps} == {w.perm for w in brute_reps(rs, P)}
    assert len(cs) * len(parabolic_elements(rs, P)) == group_order(t, n)
    assert cs.reps[0].length == 0
    assert cs.lengths == sorted(cs.lengths)


@pytest.mark.parametrize("t,n,P", CASES)
def test_hasse_edges(t, n, P):
    rs = build_root_system(t, n)
    cs = minimal_coset_reps(rs, P)
    expected = set()
    for v, w in enumerate(cs.reps):
        for j in range(1, n + 1):
            u = rs.simple(j) * w
            if u.length == w.length + 1 and not any(u.has_right_descent(i) for i in P):
                expected.add((v, j, cs.index[u.perm]))
    assert set(cs.hasse_edges) == expected
    # Deodhar: s_j v either stays in W^P, or lands in v W_P
    for v in range(len(cs)):
        for j in range(1, n + 1):
            cs.down_edge(j, v)


@pytest.mark.parametrize("t,n,P", CASES)
def test_double_cosets_brute_force(t, n, P):
    rs = build_root_system(t, n)
    cs = minimal_coset_reps(rs, P)
    WP = parabolic_elements(rs, P)
    orbits = set()
    for w in cs.reps:
        orbits.add(frozenset(cs.class_index(x * w) for x in WP))
    got = {frozenset(b.members) for b in cs.double_cosets}
    assert got == orbits
    for b in cs.double_cosets:
        assert cs.length(b.rep) == min(cs.length(m) for m in b.members)


@pytest.mark.parametrize("t,n,P", CASES[:5])
def test_mult_table_brute_force(t, n, P):
    rs = build_root_system(t, n)
    cs = minimal_coset_reps(rs, P)
    T = cs.mult_table
    for i, a in enumerate(cs.reps):
        for j, b in enumerate(cs.reps):
            target = min_coset_rep(a * b, P)
            assert cs.reps[T[i][j]] == target


def test_reduced_word_lex_min():
    rs = build_root_system("A", 3)
    for w in rs.enumerate_group():
        assert rs.element(w.word) == w
        assert len(w.word) == w.length
    # longest element of A2 is s1s2s1 = s2s1s2; lexicographically smallest word wins
    w0 = rs.element([2, 1, 2])
    assert w0.word == (1, 2, 1)


def test_a5_table_shape():
    rs = build_root_system("A", 5)
    cs = minimal_coset_reps(rs, [2, 3, 4, 5])
    assert cs.names() == ["1", "s1", "s2s1", "s3s2s1", "s4s3s2s1", "s5s4s3s2s1"]
    flat = [x for row in cs.mult_table for x in row]
    assert all(flat.count(r) == 6 for r in range(6))


def test_rank_cap():
    with pytest.raises(RootSystemError):
        build_root_system("A", 9)
    assert build_root_system("A", 9, rank_cap=9).rank == 9
