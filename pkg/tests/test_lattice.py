import numpy as np
import pytest
from hypothesis import given, strategies as st

from sepdev import Configuration, active_edges, make_configuration, swap_edge
from sepdev.lattice import edge_activity, site


def test_make_configuration_examples():
    c = make_configuration(4, {0, 2})
    assert c.bits() == "1010" and c.count == 2
    assert make_configuration(4, set()).bits() == "0000"
    full = make_configuration(3, {0, 1, 2})
    assert full.bits() == "111" and full.count == 3


def test_make_configuration_rejects_out_of_range():
    with pytest.raises(ValueError, match="5"):
        make_configuration(4, {5})
    with pytest.raises(ValueError):
        make_configuration(4, {-1})


def test_swap_edge_examples():
    c = Configuration.from_bits("1010")
    assert swap_edge(c, 0).bits() == "0110"
    assert swap_edge(c, 1).bits() == "1100"
    full = Configuration.from_bits("1111")
    assert all(swap_edge(full, x).bits() == "1111" for x in range(4))


def test_swap_wraps_around_the_torus():
    c = Configuration.from_bits("1000")
    assert swap_edge(c, 3).bits() == "0001"


def test_active_edges_examples():
    assert set(active_edges(Configuration.from_bits("1010"))) == {0, 1, 2, 3}
    assert len(active_edges(Configuration.from_bits("1111"))) == 0
    assert set(active_edges(Configuration.from_bits("1100"))) == {1, 3}


def test_site_index_is_periodic():
    assert site(-1, 5) == 4 and site(7, 5) == 2


bits = st.text(alphabet="01", min_size=2, max_size=40)


@given(bits)
def test_active_edge_count_is_even(b):
    assert len(active_edges(Configuration.from_bits(b))) % 2 == 0


@given(bits, st.integers(min_value=0, max_value=1000))
def test_swap_conserves_count_and_is_an_involution(b, x):
    c = Configuration.from_bits(b)
    x %= c.n_sites
    s = swap_edge(c, x)
    assert s.count == c.count
    assert swap_edge(s, x).bits() == c.bits()


@given(bits, st.integers(min_value=0, max_value=1000))
def test_swap_changes_activity_only_next_to_the_edge(b, x):
    c = Configuration.from_bits(b)
    n = c.n_sites
    x %= n
    before = edge_activity(c.occupancy)
    after = edge_activity(swap_edge(c, x).occupancy)
    changed = set(np.flatnonzero(before != after))
    assert changed <= {(x - 1) % n, x, (x + 1) % n}


def test_configuration_rejects_non_binary():
    with pytest.raises(ValueError):
        Configuration(np.array([0, 2, 1]))


@given(bits)
def test_bits_round_trip(b):
    assert Configuration.from_bits(b).bits() == b
