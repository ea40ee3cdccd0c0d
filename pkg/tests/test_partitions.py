import io
import itertools
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from freepoisson.errors import CapExceededError, SizeMismatchError
from freepoisson.partitions import (BlockPartition, PartitionClass, SetPartition, all_partitions,
                                    catalan, class_predicate, connects, count_class, enumerate_class,
                                    is_noncrossing, join_in_P, meet, read_jsonl, respects, riordan,
                                    riordan_by_blocks, write_jsonl)

P = SetPartition.from_blocks
NC_CLASSES = [PartitionClass.NC, PartitionClass.NC0, PartitionClass.NC2, PartitionClass.NC_GE2,
              PartitionClass.NC0_2, PartitionClass.NC0_GE2]


def crossing_by_quadruples(p):
    lab = p.labels()
    n = p.n
    for a, b, c, d in itertools.combinations(range(n), 4):
        if lab[a] == lab[c] and lab[b] == lab[d] and lab[a] != lab[b]:
            return True
    return False


def bell(n):
    return sum(1 for _ in all_partitions(n))


@st.composite
def partitions(draw, max_n=8):
    n = draw(st.integers(1, max_n))
    labels = draw(st.lists(st.integers(0, n - 1), min_size=n, max_size=n))
    return SetPartition.from_labels(labels)


def test_crossing_examples():
    assert not is_noncrossing(P([[1, 9], [2, 10], [3, 4], [5, 8], [6, 7]]))
    assert is_noncrossing(P([[1, 10], [2, 9], [3, 4], [5, 8], [6, 7]]))
    assert is_noncrossing(P([[1]]))


@given(partitions())
def test_noncrossing_matches_quadruple_search(p):
    assert is_noncrossing(p) == (not crossing_by_quadruples(p))


def test_invalid_partitions_rejected():
    with pytest.raises(ValueError):
        SetPartition(3, ((1, 2),))
    with pytest.raises(ValueError):
        SetPartition(2, ((1, 2), (2,)))


def test_meet_join_examples():
    a = P([[1, 2], [3, 4]])
    assert meet(a, P([[1, 3], [2, 4]])) == SetPartition.finest(4)
    assert meet(a, SetPartition.finest(4)) == SetPartition.finest(4)
    assert meet(a, a) == a
    assert join_in_P(a, P([[2, 3], [1], [4]])) == SetPartition.coarsest(4)
    assert join_in_P(a, SetPartition.coarsest(4)) == SetPartition.coarsest(4)
    assert join_in_P(SetPartition.finest(4), a) == a


def test_size_mismatch():
    with pytest.raises(SizeMismatchError):
        meet(P([[1, 2]]), P([[1], [2], [3]]))


def refines(a, b):
    lb = b.labels()
    return all(len({lb[x - 1] for x in blk}) == 1 for blk in a.blocks)


@given(st.data())
def test_meet_join_lattice_laws(data):
    a = data.draw(partitions(max_n=7))
    labels = data.draw(st.lists(st.integers(0, a.n - 1), min_size=a.n, max_size=a.n))
    b = SetPartition.from_labels(labels)
    m, j = meet(a, b), join_in_P(a, b)
    assert meet(a, b) == meet(b, a) and join_in_P(a, b) == join_in_P(b, a)
    assert refines(m, a) and refines(m, b)
    assert refines(a, j) and refines(b, j)
    assert join_in_P(a, meet(a, b)) == a
    assert meet(a, join_in_P(a, b)) == a


def test_respects_connects_examples():
    bp = BlockPartition((2, 2))
    assert respects(P([[1, 3], [2, 4]]), bp)
    assert not respects(SetPartition.coarsest(4), bp)
    assert connects(SetPartition.coarsest(6), BlockPartition((2, 2, 2)))
    assert connects(P([[1, 6], [2, 3], [4, 5]]), BlockPartition((2, 2, 2)))
    # respects but leaves the last block isolated
    assert not connects(P([[1, 4], [2, 5], [3], [6]]), BlockPartition((3, 2, 1)))


def test_enumeration_examples():
    for m in range(1, 7):
        assert list(enumerate_class(m, 1, "nc")) == [SetPartition.coarsest(m)]
    for m in range(3, 7):
        assert list(enumerate_class(m, 1, "nc2")) == []
    assert list(enumerate_class(3, 2, "ncge2")) == [P([[1, 6], [2, 3], [4, 5]])]
    assert list(enumerate_class(2, 2, "nc2")) == [P([[1, 4], [2, 3]])]
    assert count_class(4, 1, "nc0ge2") == 3


@pytest.mark.parametrize("cls", list(PartitionClass))
def test_enumeration_equals_brute_force(cls):
    for q in range(1, 5):
        for m in range(1, 8 // q + 1):
            fast = list(enumerate_class(m, q, cls))
            assert len(fast) == len(set(fast))
            brute = {s for s in all_partitions(m * q) if class_predicate(s, m, q, cls)}
            assert set(fast) == brute


def test_bell_numbers():
    assert [bell(n) for n in range(1, 8)] == [1, 2, 5, 15, 52, 203, 877]


def test_counts_against_closed_forms():
    for m in range(1, 10):
        assert count_class(m, 1, "nc0") == catalan(m)
        assert count_class(m, 1, "nc0ge2") == riordan(m)
    # pairings of [2m] that are non-crossing
    for m in range(1, 6):
        assert count_class(2 * m, 1, "nc02") == catalan(m)


def test_catalan_riordan_values():
    assert catalan(0) == 1 and catalan(4) == 14 and catalan(10) == 16796
    assert riordan(1) == 0 and riordan(4) == 3 and riordan_by_blocks(2, 1) == 1
    assert [riordan(m) for m in range(8)] == [1, 0, 1, 1, 3, 6, 15, 36]
    with pytest.raises(ValueError):
        catalan(-1)


def test_riordan_by_blocks_brute_force():
    for m in range(1, 9):
        for j in range(0, m + 1):
            brute = sum(1 for s in all_partitions(m) if is_noncrossing(s) and len(s) == j
                        and min(s.sizes) >= 2)
            assert riordan_by_blocks(m, j) == brute


def test_catalan_asymptotic_ratio():
    n = 50
    ratio = catalan(n) / (4 ** n / (n ** 1.5 * math.sqrt(math.pi)))
    assert 0.95 <= ratio <= 1.0


def test_cap():
    with pytest.raises(CapExceededError):
        list(enumerate_class(5, 3, "pr"))
    with pytest.raises(CapExceededError):
        list(enumerate_class(5, 5, "nc"))
    assert list(enumerate_class(5, 3, "nc2")) == []


def test_jsonl_roundtrip():
    parts = list(enumerate_class(3, 2, "nc0"))
    buf = io.StringIO()
    assert write_jsonl(parts, buf) == len(parts)
    buf.seek(0)
    assert read_jsonl(buf) == parts


def test_class_parse():
    assert PartitionClass.parse("NC_GE2") is PartitionClass.NC_GE2
    assert PartitionClass.parse("p-respecting") is PartitionClass.P_RESPECTING
    with pytest.raises(ValueError):
        PartitionClass.parse("crossing")
