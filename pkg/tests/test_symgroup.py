import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freeconv.cumulants import higher_order_matrices
from freeconv.symgroup import (
    NonCrossingPartition,
    Permutation,
    catalan,
    compose,
    defect,
    defect_matrix,
    from_cycles,
    full_cycle,
    geodesic_predecessors,
    group_index,
    identity,
    kreweras,
    moeb_geodesic,
    nc_from_geodesic,
    noncrossing_partitions,
    parse_cycles,
    symmetric_group,
    tensor_product,
)


def perms(max_n=6):
    return st.integers(1, max_n).flatmap(
        lambda n: st.permutations(list(range(n))).map(lambda p: Permutation(tuple(p))))


def perm_pairs(max_n=6):
    return st.integers(1, max_n).flatmap(lambda n: st.tuples(
        st.permutations(list(range(n))).map(lambda p: Permutation(tuple(p))),
        st.permutations(list(range(n))).map(lambda p: Permutation(tuple(p)))))


def test_compose_examples():
    t = parse_cycles("(1 2)", 2)
    assert compose(t, t).is_identity()
    p = compose(parse_cycles("(1 2)", 3), full_cycle(3))
    assert p == parse_cycles("(2 3)", 3)
    assert p.one_line() == [1, 3, 2]
    q = parse_cycles("(1 3)", 4)
    assert compose(identity(4), q) == q


def test_defect_examples():
    g3 = full_cycle(3)
    assert defect(identity(3), g3) == 0
    assert defect(parse_cycles("(1 2)", 3), g3) == 0
    assert defect(parse_cycles("(1 3 2)", 3), g3) == 2


def test_geodesic_predecessor_examples():
    assert set(geodesic_predecessors(full_cycle(2))) == {identity(2), full_cycle(2)}
    assert len(geodesic_predecessors(full_cycle(3))) == 5
    assert geodesic_predecessors(identity(3)) == [identity(3)]


def test_nc_examples():
    assert nc_from_geodesic(identity(3)).sorted_blocks() == [[1], [2], [3]]
    assert nc_from_geodesic(full_cycle(3)).sorted_blocks() == [[1, 2, 3]]
    a = parse_cycles("(1 2)", 3)
    assert nc_from_geodesic(a).sorted_blocks() == [[1, 2], [3]]
    # (p*q)(i) = p(q(i)) gives (1 2)^-1 (1 2 3) = (2 3): the usual Kreweras
    # complement {{1},{2,3}} of {{1,2},{3}}
    k = kreweras(a)
    assert k == parse_cycles("(2 3)", 3)
    assert nc_from_geodesic(k).sorted_blocks() == [[1], [2, 3]]
    # complement of the complement is a rotation of the original
    assert kreweras(kreweras(a)) == compose(compose(full_cycle(3).inverse(), a), full_cycle(3))


def test_nc_rejects_off_geodesic_and_crossing():
    with pytest.raises(ValueError):
        nc_from_geodesic(parse_cycles("(1 3 2)", 3))
    with pytest.raises(ValueError):
        NonCrossingPartition(4, frozenset([frozenset([1, 3]), frozenset([2, 4])]))


def test_moeb_geodesic_examples():
    assert moeb_geodesic(identity(2)) == 1
    assert moeb_geodesic(full_cycle(2)) == -1
    assert moeb_geodesic(full_cycle(3)) == 2
    assert moeb_geodesic(from_cycles([(1, 2), (3, 4, 5)], 5)) == -2


def test_parse_and_print_round_trip():
    p = parse_cycles("(1 3)(2 4 5)")
    assert p.n == 5
    assert str(p) == "(1 3)(2 4 5)"
    assert parse_cycles(str(p)) == p
    assert str(parse_cycles("(1 2)(3)")) == "(1 2)(3)"
    with pytest.raises(ValueError):
        Permutation((0, 0, 1))


@given(perm_pairs())
def test_metric_axioms_random(pq):
    p, q = pq
    assert p.length() == p.inverse().length()
    assert compose(p, q).length() <= p.length() + q.length()
    assert defect(p, q) >= 0 and defect(p, q) % 2 == 0


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_metric_axioms_exhaustive(n):
    G = symmetric_group(n)
    assert len(G) == np.prod(range(1, n + 1))
    lengths = {p: p.length() for p in G}
    assert lengths[identity(n)] == 0
    for p in G:
        assert lengths[p] == lengths[p.inverse()]
    D = np.asarray(defect_matrix(n))
    assert np.all(D >= 0) and np.all(D % 2 == 0)
    for p, q in itertools.product(G, G):
        assert lengths[compose(p, q)] <= lengths[p] + lengths[q]


def test_defect_matrix_layout():
    D = np.asarray(defect_matrix(3))
    G = symmetric_group(3)
    for s in G:
        for a in G:
            assert D[group_index(s), group_index(a)] == defect(a, s)


@pytest.mark.parametrize("n", range(1, 8))
def test_catalan_many_predecessors(n):
    assert len(geodesic_predecessors(full_cycle(n))) == catalan(n)


@pytest.mark.parametrize("n", range(1, 7))
def test_nc_bijection(n):
    images = [nc_from_geodesic(a) for a in geodesic_predecessors(full_cycle(n))]
    assert len(set(images)) == len(images) == catalan(n)
    assert set(images) == set(noncrossing_partitions(n))


@pytest.mark.parametrize("n", range(1, 6))
def test_c0_is_geodesic_moebius(n):
    C0 = higher_order_matrices(n, 0)[0]
    G = symmetric_group(n)
    for s in G:
        for a in G:
            want = moeb_geodesic(compose(a.inverse(), s)) if defect(a, s) == 0 else 0
            assert C0[group_index(s), group_index(a)] == want


@given(perms(4), perms(3))
@settings(max_examples=50)
def test_tensor_product_lengths(p, q):
    t = tensor_product(p, q)
    assert t.n == p.n + q.n
    assert t.num_cycles() == p.num_cycles() + q.num_cycles()


def test_enumeration_cap(monkeypatch):
    from freeconv import CapExceeded

    monkeypatch.setenv("FREECONV_CAP_N", "4")
    with pytest.raises(CapExceeded):
        symmetric_group(5)
