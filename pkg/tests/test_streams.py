import numpy as np
import pytest
from hypothesis import given, strategies as st

from hyperharm.streams import RandomStream, as_stream, split_seed


@given(st.integers(0, 2**63), st.text(max_size=8))
def test_child_depends_only_on_seed_and_key(seed, key):
    a = RandomStream(seed)
    a.gen.random(5)  # drawing from the parent must not matter
    assert a.child(key).seed == RandomStream(seed).child(key).seed == split_seed(seed, key)


def test_children_are_distinct_and_reproducible():
    root = RandomStream(42)
    seeds = {root.child(k).seed for k in range(1000)}
    assert len(seeds) == 1000
    assert np.array_equal(root.child("x").gen.random(10), RandomStream(42).child("x").gen.random(10))


def test_counter_advances():
    s = RandomStream(1)
    c0 = s.counter
    s.gen.random()
    assert s.counter != c0


def test_as_stream():
    s = RandomStream(3)
    assert as_stream(s) is s
    assert as_stream(3).seed == 3
    with pytest.raises(ValueError):
        as_stream(None)
