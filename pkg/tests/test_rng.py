import numpy as np
import pytest

from catchtl.rng import RngStream


def test_same_pair_reproduces_bitwise():
    a = RngStream(123, 4).generator().random(64)
    b = RngStream(123, 4).generator().random(64)
    assert np.array_equal(a, b)


def test_distinct_streams_differ():
    a = RngStream(123, 0).generator().random(64)
    b = RngStream(123, 1).generator().random(64)
    assert not np.array_equal(a, b)


def test_split_is_stable_and_sensitive():
    root = RngStream(9)
    assert root.split("replicate", 3) == root.split("replicate", 3)
    assert root.split("replicate", 3) != root.split("replicate", 4)
    assert root.split("replicate", 3) != root.split("population", 3)
    # nesting is order-sensitive
    assert root.split("a").split("b") != root.split("b").split("a")


def test_split_keeps_seed():
    child = RngStream(77).split("x", 1)
    assert child.seed == 77
    assert child.stream >= 0


def test_invalid_seed_rejected():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(2**64)
    with pytest.raises(ValueError):
        RngStream(3, -2)
