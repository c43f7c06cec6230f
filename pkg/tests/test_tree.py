import numpy as np
import pytest
from conftest import complete

from ffcover.errors import ValidationError
from ffcover.graph import validate_graph
from ffcover.tree import SpanningTree, decode_parents, encode_parents, orient_from_root


def test_key_round_trip():
    t = SpanningTree(1, np.array([1, -1, 0, 2]))
    assert t.key == "1,-1,0,2"
    assert SpanningTree.from_key(t.key) == t
    assert hash(SpanningTree.from_key(t.key)) == hash(t)


def test_edges_children_depths():
    t = SpanningTree.from_edges(0, 4, [(0, 1), (1, 2), (0, 3)])
    assert sorted(t.edges) == [(0, 1), (0, 3), (1, 2)]
    assert t.children()[0] == [1, 3]
    assert t.depths().tolist() == [0, 1, 2, 1]


def test_cycle_rejected():
    t = SpanningTree(0, np.array([-1, 2, 1]))
    with pytest.raises(ValidationError):
        t.validate()


def test_root_entry_checked():
    with pytest.raises(ValidationError):
        SpanningTree(0, np.array([1, -1]))


def test_validate_against_graph():
    w = np.zeros((3, 3))
    w[0, 1] = w[1, 2] = w[2, 0] = 1.0
    g = validate_graph(w)
    SpanningTree(0, np.array([-1, 0, 1])).validate(g)
    with pytest.raises(ValidationError):
        SpanningTree(0, np.array([-1, 2, 0])).validate(g)


def test_log_weight():
    w = complete(3, 2.0)
    t = SpanningTree(0, np.array([-1, 0, 1]))
    assert np.isclose(t.log_weight(w), 2 * np.log(2.0))


def test_orient_from_root():
    t = orient_from_root(4, 2, [(0, 1), (1, 2), (2, 3)])
    assert t.parent.tolist() == [1, 2, -1, 2]
    with pytest.raises(ValidationError):
        orient_from_root(4, 0, [(0, 1), (2, 3)])


@pytest.mark.parametrize("m", [2, 5, 15])
def test_codes_round_trip(m):
    rng = np.random.default_rng(m)
    parent = rng.integers(-1, m, m)
    assert np.array_equal(decode_parents(encode_parents(parent, m), m), parent)
