from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpdelab import lattice
from cpdelab.lattice import (Window, is_special, neighbors,
                             special_edge_density, unoriented)

sites2 = st.tuples(st.integers(-50, 50), st.integers(-50, 50))
sites3 = st.tuples(st.integers(-50, 50), st.integers(-50, 50),
                   st.integers(-50, 50))


def test_neighbors_d2_fixed_order():
    assert neighbors((0, 0)) == [(-1, 0), (1, 0), (0, -1), (0, 1)]


def test_neighbors_counts():
    assert len(neighbors((3, -7))) == 4
    got = neighbors((1, 1, 1))
    assert len(got) == 6
    for y in got:
        assert sum(abs(a - b) for a, b in zip(y, (1, 1, 1))) == 1


@given(sites2 | sites3)
def test_neighbor_relation_symmetric(x):
    for y in neighbors(x):
        assert x in neighbors(y)


def test_is_special_examples():
    assert is_special(((1, 1), (2, 1)))
    assert not is_special(((0, 0), (1, 0)))
    assert is_special(((5, -3), (6, -3)))  # 5 = 1 mod 4 and -3 = 1 mod 4


@given(sites2)
def test_is_special_reversal_invariance(x):
    for y in neighbors(x):
        assert is_special((x, y)) == is_special((y, x))


@given(sites2, st.integers(-5, 5), st.integers(-5, 5))
@settings(max_examples=200)
def test_is_special_translation_invariance(x, k1, k2):
    shift = (4 * k1, 4 * k2)
    for y in neighbors(x):
        xs = (x[0] + shift[0], x[1] + shift[1])
        ys = (y[0] + shift[0], y[1] + shift[1])
        assert is_special((x, y)) == is_special((xs, ys))


def test_origin_touches_no_special_edge():
    for d in (2, 3):
        o = (0,) * d
        for y in neighbors(o):
            assert not is_special((o, y))
            assert not is_special((y, o))


@pytest.mark.parametrize("d", [2, 3])
def test_special_edges_well_separated(d):
    # exhaustive separation check on a 12^d window: the closed
    # neighborhoods of distinct special edges never meet
    window = Window(d, 6)
    specials = []
    for x in window.sites():
        y = (x[0] + 1,) + x[1:]
        if is_special((x, y)):
            specials.append((x, y))
    assert specials, "window must contain special edges"
    zones = []
    for (a, b) in specials:
        zone = {a, b} | set(neighbors(a)) | set(neighbors(b))
        zones.append(zone)
    for i in range(len(zones)):
        for j in range(i + 1, len(zones)):
            assert not (zones[i] & zones[j])


@pytest.mark.parametrize("d,expect", [(2, Fraction(1, 32)),
                                      (3, Fraction(1, 192))])
def test_special_edge_density_formula(d, expect):
    assert special_edge_density(d) == expect
    assert special_edge_density(d) > 0
    # count within one 4-periodic cell: d * 4^d unoriented edges, one special
    cell = list(product(range(4), repeat=d))
    count = 0
    for x in cell:
        for axis in range(d):
            y = tuple(c + (1 if i == axis else 0) for i, c in enumerate(x))
            if is_special((x, y)):
                count += 1
    assert Fraction(count, d * 4**d) == expect


def test_unoriented_canonical_order():
    assert unoriented((1, 0), (0, 0)) == ((0, 0), (1, 0))
    assert unoriented((0, 0), (1, 0)) == ((0, 0), (1, 0))


def test_window_membership_and_boundary():
    w = Window(2, 3)
    assert w.contains((3, -3)) and not w.contains((4, 0))
    assert w.on_boundary((3, 0)) and not w.on_boundary((2, 2))
    assert w.site_count == 49
    assert len(list(w.sites())) == 49
    edges = list(w.interior_edges())
    assert len(edges) == 2 * 7 * 6  # two axes, 7 rows of 6 edges
    assert all(a <= b for a, b in edges)


def test_window_validation():
    with pytest.raises(ValueError):
        Window(1, 5)
    with pytest.raises(ValueError):
        Window(2, 0)


def test_is_adjacent():
    assert lattice.is_adjacent((0, 0), (0, 1))
    assert not lattice.is_adjacent((0, 0), (1, 1))
    assert not lattice.is_adjacent((0, 0), (0, 0))
