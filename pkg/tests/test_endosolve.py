import numpy as np
import pytest

from heckeendo.endosolve import (OracleRefused, column_constraints_hold, diagonal_congruence,
                                 first_column_space, format_expr, format_word, idempotent_oracle,
                                 propagate_blocks, propagate_matrix, symbolic_entries)
from heckeendo.goldens import case_system
from heckeendo.linalg import rank_mod
from heckeendo.polyring import (Poly, demazure, demazure_matrix, lattice_preset, monomials, reflect,
                                reflection_matrix)
from heckeendo.rootsys import build_root_system, minimal_coset_reps


def commutant_dimension(cs, L, p):
    """
    Dimension over F_p of all degree-0 matrices commuting with every X_j,
    solved for all entries at once (no first-column shortcut).
    """
    n = len(cs)
    lens = cs.lengths
    r = L.rank
    slots, offset = {}, 0
    for v in range(n):
        for w in range(n):
            d = lens[v] - lens[w]
            if d >= 0:
                slots[(v, w)] = (offset, d)
                offset += len(monomials(r, d))
    rows = []
    for w in range(n):
        for j in range(1, L.system.rank + 1):
            u = cs.up_edge(j, w)
            # coefficient of xi_t in X_j(phi(xi_w)) - phi(X_j xi_w)
            for t in range(n):
                d = lens[t] - lens[w] - 1
                if d < 0:
                    continue
                block = np.zeros((len(monomials(r, d)), offset), dtype=np.int64)
                if (t, w) in slots:
                    o, dd = slots[(t, w)]
                    block[:, o:o + len(monomials(r, dd))] += demazure_matrix(L, j, dd, p)
                x = cs.down_edge(j, t)
                if x is not None and (x, w) in slots:
                    o, dd = slots[(x, w)]
                    block[:, o:o + len(monomials(r, dd))] += reflection_matrix(L, j, dd, p)
                if u is not None and (t, u) in slots:
                    o, dd = slots[(t, u)]
                    block[:, o:o + len(monomials(r, dd))] -= np.eye(len(monomials(r, dd)), dtype=np.int64)
                rows.append(block % p)
    M = np.vstack(rows)
    return offset - rank_mod(M, p)


SMALL = ["a1-p2", "a2-p3", "a3-p2", "klein", "hspin8", "pgo8", "so8", "a4-p5"]


@pytest.mark.parametrize("name", SMALL)
def test_first_column_dimension_matches_full_commutant(name):
    cs, L, p = case_system(name)
    assert first_column_space(cs, L, p).dim == commutant_dimension(cs, L, p)


def test_first_column_over_z_matches_rank_mod_p():
    cs, L, _ = case_system("a3-p2")
    z = first_column_space(cs, L)
    f2 = first_column_space(cs, L, 2)
    assert z.dim == f2.dim == commutant_dimension(cs, L, 2)


def test_identity_is_admissible(preset):
    name, cs, L, p = preset
    col = [Poly.const(1 if v == 0 else 0, L.rank, p) for v in range(len(cs))]
    assert column_constraints_hold(L, cs, col)
    assert propagate_matrix(L, cs, col).is_identity()


def test_homomorphism_soundness(preset):
    name, cs, L, p = preset
    space = first_column_space(cs, L, p)
    blocks = propagate_blocks(space)
    rng = np.random.default_rng(2024)
    for _ in range(50):
        theta = space.random_theta(rng)
        col = space.column(theta)
        assert column_constraints_hold(L, cs, col)
        phi = propagate_matrix(L, cs, col)
        assert phi.degree_violations() == []
        assert phi.homomorphism_violations() == []
        # block route agrees with the polynomial route
        for (v, w), B in blocks.items():
            c = (B @ theta.reshape(-1, 1)).ravel() % p
            assert Poly.from_coords(c, cs.length(v) - cs.length(w), L.rank, p) == phi.entries[v][w]


def test_homomorphism_soundness_over_z():
    for name in ("klein", "a3-p2", "hspin8"):
        cs, L, _ = case_system(name)
        space = first_column_space(cs, L)
        rng = np.random.default_rng(5)
        for _ in range(10):
            phi = propagate_matrix(L, cs, space.column(space.random_theta(rng)))
            assert phi.homomorphism_violations() == []
            assert phi.degree_violations() == []


def test_composition_stays_in_commutant():
    cs, L, p = case_system("klein")
    space = first_column_space(cs, L, p)
    rng = np.random.default_rng(1)
    a = propagate_matrix(L, cs, space.column(space.random_theta(rng)))
    b = propagate_matrix(L, cs, space.column(space.random_theta(rng)))
    ab = a.compose(b)
    assert ab.homomorphism_violations() == []
    # the composite is determined by its first column
    first = [ab.entries[v][0] for v in range(len(cs))]
    assert propagate_matrix(L, cs, first) == ab


def test_inadmissible_column_rejected():
    cs, L, p = case_system("a2-p3")
    col = [Poly.zero(L.rank, p) for _ in range(len(cs))]
    col[1] = L.poly("a1", p)
    # X_2 sends a1 xi_{s1} to D_2(a1) xi_{s1} + ..., and D_2(a1) = -1
    assert not column_constraints_hold(L, cs, col)
    with pytest.raises(ValueError):
        propagate_matrix(L, cs, col)


ORACLE_CASES = ["a1-p2", "a2-p3", "a3-p2", "klein", "a4-p5", "hspin8", "pgo8", "a5-p2"]


@pytest.mark.parametrize("name", ORACLE_CASES)
def test_oracle_refines_congruence(name):
    cs, L, p = case_system(name)
    rep = diagonal_congruence(cs, L, p)
    res = idempotent_oracle(cs, L, p, cap=40)
    cls = {v: k for k, c in enumerate(rep.classes) for v in c}
    for pat in res.diagonal_patterns():
        for u in range(len(cs)):
            for v in range(len(cs)):
                if cls[u] == cls[v]:
                    assert pat[u] == pat[v]
    assert len(res.diagonal_patterns()) <= 2 ** rep.block_count
    for e in res.idempotents:
        assert e.is_idempotent()
        assert e.homomorphism_violations() == []
    assert any(e.is_identity() for e in res.idempotents)
    assert any(e.is_zero() for e in res.idempotents)


def test_oracle_a3_mod3_recorded():
    cs = minimal_coset_reps(build_root_system("A", 3), [2, 3])
    L = lattice_preset("root", cs.system)
    res = idempotent_oracle(cs, L, 3)
    rep = diagonal_congruence(cs, L, 3)
    # every pattern allowed by the congruence bound actually occurs
    assert len(res.diagonal_patterns()) == 2 ** rep.block_count
    assert len(res.nontrivial()) == len(res.idempotents) - 2


def test_oracle_refuses_above_cap():
    cs, L, p = case_system("so8")
    dim = first_column_space(cs, L, p).dim
    with pytest.raises(OracleRefused) as exc:
        idempotent_oracle(cs, L, p)
    assert str(dim) in str(exc.value)


def test_oracle_parallel_matches_serial():
    cs, L, p = case_system("a3-p2")
    a = idempotent_oracle(cs, L, p, workers=1)
    b = idempotent_oracle(cs, L, p, workers=3, chunk=4)
    assert a.to_dict() == b.to_dict()


def test_a5_verdicts_computed():
    cs, L, _ = case_system("a5-p2")
    assert diagonal_congruence(cs, L, 2).block_count == 3
    assert diagonal_congruence(cs, L, 3).block_count == 2


def test_poincare_and_verdict_text():
    cs, L, p = case_system("klein")
    rep = diagonal_congruence(cs, L, p)
    assert rep.verdict == "irreducible"
    assert [c["text"] for c in rep.poincare()] == ["1 + t + 2t^2 + t^3 + t^4"]
    d = rep.to_dict()
    assert d["verdict"] == "irreducible" and d["block_bound"] == 1


def evaluate_symbolic(L, expr, column):
    total = Poly.zero(L.rank, column[0].p)
    for (word, gen), c in expr.items():
        f = column[gen]
        for kind, j in reversed(word):
            f = demazure(L, j, f) if kind == "D" else reflect(L, j, f)
        total = total + f * c
    return total


@pytest.mark.parametrize("name", ["a3-p2", "klein", "hspin8"])
def test_symbolic_entries_match_numeric(name):
    cs, L, p = case_system(name)
    space = first_column_space(cs, L, p)
    S = symbolic_entries(space)
    rng = np.random.default_rng(3)
    col = space.column(space.random_theta(rng))
    phi = propagate_matrix(L, cs, col)
    for (v, w), expr in S.items():
        assert evaluate_symbolic(L, expr, col) == phi.entries[v][w]


def test_symbolic_format():
    cs, L, p = case_system("a3-p2")
    S = symbolic_entries(first_column_space(cs, L, p))
    assert format_expr(S[(0, 0)], cs, p) == "a[1]"
    assert format_word((("s", 2), ("D", 2), ("D", 1)), "x") == "s_2 D_{2,1}(x)"
