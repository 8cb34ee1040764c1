"""Geometry of the hypercubic lattice Z^d.

Sites are plain tuples of signed integers, oriented edges are ``(from, to)``
pairs of adjacent sites, and unoriented edges are stored canonically with the
lexicographically smaller endpoint first.  The sparse family of "special"
edges (the ones that are granted second-chance infections) is the set of
first-axis edges whose base site has every coordinate congruent to 1 mod 4;
both orientations of such an edge count as special.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterator

Site = tuple[int, ...]
OrientedEdge = tuple[Site, Site]
UnorientedEdge = tuple[Site, Site]

#: keep |coordinate| below this so hashing stays exact and windows sane
COORD_BOUND = 1 << 20

_OFFSET_CACHE: dict[int, tuple[Site, ...]] = {}


def _offsets(d: int) -> tuple[Site, ...]:
    # axis-major order, minus direction before plus: the fixed deterministic
    # neighbor ordering every algorithm in the package relies on
    offs = _OFFSET_CACHE.get(d)
    if offs is None:
        lst = []
        for axis in range(d):
            for sign in (-1, 1):
                o = [0] * d
                o[axis] = sign
                lst.append(tuple(o))
        offs = _OFFSET_CACHE[d] = tuple(lst)
    return offs


def neighbors(x: Site) -> list[Site]:
    """The 2d lattice neighbors of ``x`` in a fixed deterministic order."""
    d = len(x)
    if d == 2:
        a, b = x
        return [(a - 1, b), (a + 1, b), (a, b - 1), (a, b + 1)]
    return [tuple(c + o for c, o in zip(x, off)) for off in _offsets(d)]


def unoriented(a: Site, b: Site) -> UnorientedEdge:
    """Canonical form of the unoriented edge {a, b}."""
    return (a, b) if a <= b else (b, a)


def is_adjacent(a: Site, b: Site) -> bool:
    diff = 0
    for ca, cb in zip(a, b):
        diff += abs(ca - cb)
        if diff > 1:
            return False
    return diff == 1 and len(a) == len(b)


def is_special(e: OrientedEdge) -> bool:
    """True iff ``e`` (in either orientation) is a bonus edge (x, x + e1)
    with every coordinate of x congruent to 1 mod 4."""
    a, b = e
    if len(a) != len(b):
        return False
    base = None
    if b[0] - a[0] == 1:
        base = a
    elif a[0] - b[0] == 1:
        base = b
    else:
        return False
    other = b if base is a else a
    for i in range(1, len(a)):
        if base[i] != other[i]:
            return False
    return all(c % 4 == 1 for c in base)


def special_edge_density(d: int) -> Fraction:
    """Fraction of unoriented edges that are special: (1/d) * 4^-d."""
    if d < 2:
        raise ValueError("dimension must be >= 2")
    return Fraction(1, d * 4**d)


@dataclass(frozen=True)
class Window:
    """Finite observation window: all sites with every |coordinate| <= L."""

    d: int
    half_width: int

    def __post_init__(self) -> None:
        if self.d < 2:
            raise ValueError("dimension must be >= 2")
        if not (1 <= self.half_width <= COORD_BOUND):
            raise ValueError("half_width must be in [1, 2^20]")

    def contains(self, x: Site) -> bool:
        return all(-self.half_width <= c <= self.half_width for c in x)

    def on_boundary(self, x: Site) -> bool:
        return self.contains(x) and any(abs(c) == self.half_width for c in x)

    def sites(self) -> Iterator[Site]:
        rng = range(-self.half_width, self.half_width + 1)
        return product(*([rng] * self.d))

    def interior_edges(self) -> Iterator[UnorientedEdge]:
        """All unoriented edges with both endpoints inside the window,
        each reported once in canonical form."""
        for x in self.sites():
            for axis in range(self.d):
                y = tuple(c + (1 if i == axis else 0) for i, c in enumerate(x))
                if self.contains(y):
                    yield (x, y)

    @property
    def site_count(self) -> int:
        return (2 * self.half_width + 1) ** self.d
