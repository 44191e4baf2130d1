"""Periodic square lattice: sites, directed links and plaquettes.

Sites are enumerated row-major, ``index = x1 + Lx * x2``.  Links are
enumerated site-major and then by direction, so link ``(site, k)`` has
index ``2 * site_index + (k - 1)``.  Direction ``k = 1`` is horizontal,
``k = 2`` vertical.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import NamedTuple

from .errors import OddDimension, TooSmall

EVEN, ODD = 0, 1


class Site(NamedTuple):
    x1: int
    x2: int

    @property
    def parity(self) -> int:
        return (self.x1 + self.x2) % 2


class Link(NamedTuple):
    origin: Site
    k: int

    @property
    def parity(self) -> int:
        return self.origin.parity


class Plaquette(NamedTuple):
    corner: Site

    @property
    def parity(self) -> int:
        return self.corner.parity


class LinkClass(str, Enum):
    EVEN_HORIZONTAL = "eh"
    EVEN_VERTICAL = "ev"
    ODD_HORIZONTAL = "oh"
    ODD_VERTICAL = "ov"

    @property
    def parity(self) -> int:
        return EVEN if self.value[0] == "e" else ODD

    @property
    def direction(self) -> int:
        return 1 if self.value[1] == "h" else 2


def site_parity(s: Site) -> int:
    return s.parity


def link_class(l: Link) -> LinkClass:
    return LinkClass(("e" if l.parity == EVEN else "o") + ("h" if l.k == 1 else "v"))


@dataclass(frozen=True)
class LatticeGeometry:
    """Immutable periodic ``Lx x Ly`` lattice with even side lengths."""

    Lx: int
    Ly: int
    boundary: str = "periodic"

    def __post_init__(self):
        if self.Lx < 2 or self.Ly < 2:
            raise TooSmall(f"lattice must be at least 2x2, got {self.Lx}x{self.Ly}")
        if self.Lx % 2 or self.Ly % 2:
            raise OddDimension(f"lattice sides must be even, got {self.Lx}x{self.Ly}")
        if self.boundary != "periodic":
            raise ValueError("only periodic boundaries are supported")

    @property
    def num_sites(self) -> int:
        return self.Lx * self.Ly

    @property
    def num_links(self) -> int:
        return 2 * self.num_sites

    @property
    def num_plaquettes(self) -> int:
        return self.num_sites

    def site(self, x1: int, x2: int) -> Site:
        return Site(x1 % self.Lx, x2 % self.Ly)

    def site_index(self, s: Site) -> int:
        return s.x1 + self.Lx * s.x2

    def shift(self, s: Site, k: int, step: int = 1) -> Site:
        """Site ``s + step * k_hat`` with periodic wrap."""
        if k == 1:
            return self.site(s.x1 + step, s.x2)
        if k == 2:
            return self.site(s.x1, s.x2 + step)
        raise ValueError(f"direction must be 1 or 2, got {k}")

    def head(self, l: Link) -> Site:
        return self.shift(l.origin, l.k)

    def link_index(self, l: Link) -> int:
        return 2 * self.site_index(l.origin) + (l.k - 1)

    @cached_property
    def sites(self) -> tuple[Site, ...]:
        return tuple(Site(i % self.Lx, i // self.Lx) for i in range(self.num_sites))

    @cached_property
    def links(self) -> tuple[Link, ...]:
        return tuple(Link(s, k) for s in self.sites for k in (1, 2))

    @cached_property
    def plaquettes(self) -> tuple[Plaquette, ...]:
        return tuple(Plaquette(s) for s in self.sites)

    def links_of_class(self, cls: LinkClass | str) -> list[Link]:
        cls = LinkClass(cls)
        return [l for l in self.links if link_class(l) is cls]

    def plaquette_links(self, p: Plaquette) -> list[Link]:
        """Links 1..4 of a plaquette, counter-clockwise from ``(x, 1)``.

        The loop is traversed as (x,1) forward, (x+1,2) forward, (x+2,1)
        backward, (x,2) backward; the last two enter the plaquette operator
        daggered.
        """
        x = p.corner
        return [
            Link(x, 1),
            Link(self.shift(x, 1), 2),
            Link(self.shift(x, 2), 1),
            Link(x, 2),
        ]

    def links_at(self, s: Site) -> dict[str, Link]:
        """The four links touching ``s``, keyed by role in the Gauss operator."""
        return {
            "out1": Link(s, 1),
            "out2": Link(s, 2),
            "in1": Link(self.shift(s, 1, -1), 1),
            "in2": Link(self.shift(s, 2, -1), 2),
        }


def build_geometry(Lx: int, Ly: int) -> LatticeGeometry:
    return LatticeGeometry(Lx, Ly)


def enumerate_links(g: LatticeGeometry) -> list[Link]:
    return list(g.links)


def enumerate_plaquettes_by_parity(g: LatticeGeometry, parity: int) -> list[Plaquette]:
    return [p for p in g.plaquettes if p.parity == parity]


def plaquette_links(g: LatticeGeometry, p: Plaquette) -> list[Link]:
    return g.plaquette_links(p)
