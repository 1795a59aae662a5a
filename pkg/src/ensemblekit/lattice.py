"""Hypercubic lattice geometry: sites, regions, cube families, group decompositions.

Sites of the open box {1..n}^d are addressed by 1-based coordinate tuples and
carry a canonical linear ordering (lexicographic, first coordinate most
significant).  Every tensor-factor ordering downstream inherits it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .errors import PreconditionError

Site = tuple[int, ...]


@dataclass(frozen=True)
class LatticeSpec:
    """Finite box {1..n}^d with the Manhattan metric, N = n^d sites."""

    n: int
    d: int

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise PreconditionError(f"need n >= 1 and d >= 1, got n={self.n}, d={self.d}")

    @property
    def num_sites(self) -> int:
        return self.n ** self.d

    def sites(self) -> list[Site]:
        """All sites in canonical order."""
        return list(itertools.product(range(1, self.n + 1), repeat=self.d))

    def contains(self, site: Site) -> bool:
        return len(site) == self.d and all(1 <= x <= self.n for x in site)

    def site_index(self, site: Site) -> int:
        """Canonical linear index: first coordinate most significant."""
        if not self.contains(site):
            raise PreconditionError(f"site {site} outside {{1..{self.n}}}^{self.d}")
        idx = 0
        for x in site:
            idx = idx * self.n + (x - 1)
        return idx

    def index_site(self, index: int) -> Site:
        if not 0 <= index < self.num_sites:
            raise PreconditionError(f"site index {index} out of range")
        coords = []
        for _ in range(self.d):
            coords.append(index % self.n + 1)
            index //= self.n
        return tuple(reversed(coords))

    def region(self, sites) -> "Region":
        return Region(self, tuple(tuple(s) for s in sites))


def manhattan(x: Site, y: Site) -> int:
    return sum(abs(a - b) for a, b in zip(x, y))


@dataclass(frozen=True)
class Region:
    """Nonempty set of lattice sites, stored in canonical order without duplicates."""

    lattice: LatticeSpec
    sites: tuple[Site, ...]

    def __post_init__(self):
        if not self.sites:
            raise PreconditionError("region must be nonempty")
        for s in self.sites:
            if not self.lattice.contains(s):
                raise PreconditionError(f"site {s} outside lattice")
        if len(set(self.sites)) != len(self.sites):
            raise PreconditionError(f"duplicate sites in region: {self.sites}")
        ordered = tuple(sorted(self.sites, key=self.lattice.site_index))
        object.__setattr__(self, "sites", ordered)

    def __len__(self) -> int:
        return len(self.sites)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(self.lattice.site_index(s) for s in self.sites)

    def issubset(self, other: "Region") -> bool:
        return self.lattice == other.lattice and set(self.sites) <= set(other.sites)

    def isdisjoint(self, other: "Region") -> bool:
        return set(self.sites).isdisjoint(other.sites)

    def union(self, other: "Region") -> "Region":
        if self.lattice != other.lattice:
            raise PreconditionError("regions live on different lattices")
        return Region(self.lattice, tuple(set(self.sites) | set(other.sites)))

    def diameter(self) -> int:
        return max(manhattan(a, b) for a in self.sites for b in self.sites)


def distance(x: Region, y: Region) -> int:
    """min over site pairs of the Manhattan distance; 0 iff the regions share a site."""
    if x.lattice != y.lattice:
        raise PreconditionError("regions live on different lattices")
    return min(manhattan(a, b) for a in x.sites for b in y.sites)


@dataclass(frozen=True)
class CubeFamily:
    """All edge-length-l hypercubes in the lattice, indexed by their corner."""

    lattice: LatticeSpec
    l: int
    corners: tuple[Site, ...] = field(default=())  # the index set {1..n-l+1}^d
    cubes: tuple[Region, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.cubes)


def hypercubes(lat: LatticeSpec, l: int) -> CubeFamily:
    """Enumerate the (n-l+1)^d cubes corner + {0..l-1}^d in canonical corner order.

    Requires 1 <= l <= (n+1)/2.
    """
    if not 1 <= l <= (lat.n + 1) / 2:
        raise PreconditionError(f"cube edge length l={l} outside [1, (n+1)/2] for n={lat.n}")
    corners = list(itertools.product(range(1, lat.n - l + 2), repeat=lat.d))
    offsets = list(itertools.product(range(l), repeat=lat.d))
    cubes = []
    for c in corners:
        cubes.append(Region(lat, tuple(tuple(ci + oi for ci, oi in zip(c, o)) for o in offsets)))
    return CubeFamily(lat, l, tuple(corners), tuple(cubes))


@dataclass(frozen=True)
class GroupDecomposition:
    """Partition of the corner set into groups of cubes pairwise farther than r apart.

    ``groups`` maps each group label i in {1..l+r}^d to the positions (into the
    family's corner/cube lists) of the cubes at corners i + (l+r)j.
    """

    family: CubeFamily
    r: int
    m: int
    groups: dict[Site, tuple[int, ...]]


def group_decomposition(fam: CubeFamily, r: int) -> GroupDecomposition:
    """Group cubes on the stride-(l+r) sublattices so groups partition the corner set.

    m = ceil((n-l+1)/(l+r)); within a group any two distinct cubes have
    distance > r.
    """
    if r < 0:
        raise PreconditionError(f"separation r={r} must be non-negative")
    lat, l = fam.lattice, fam.l
    stride = l + r
    side = lat.n - l + 1
    m = math.ceil(side / stride)
    corner_pos = {c: p for p, c in enumerate(fam.corners)}
    groups: dict[Site, tuple[int, ...]] = {}
    for i in itertools.product(range(1, stride + 1), repeat=lat.d):
        members = []
        for j in itertools.product(range(m), repeat=lat.d):
            corner = tuple(ii + stride * jj for ii, jj in zip(i, j))
            pos = corner_pos.get(corner)
            if pos is not None:
                members.append(pos)
        groups[i] = tuple(sorted(members))
    return GroupDecomposition(fam, r, m, groups)
