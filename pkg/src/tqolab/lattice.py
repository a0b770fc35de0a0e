"""Periodic lattice geometry: tori, square regions, balls, and box partitions.

Sites are cells of a D-dimensional torus (D = 1 or 2) indexed row-major over
coordinates.  In D = 1 a "square" of size r is an interval of r cells.  Each
cell may host several qubits (``QubitLayout``); geometric regions translate
into qubit index sets through the layout.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence


@dataclass(frozen=True)
class Torus:
    """Periodic D-dimensional lattice with equal side lengths."""

    dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.dims) not in (1, 2):
            raise ValueError(f"dims must have length 1 or 2, got {len(self.dims)}")
        if any(d < 1 for d in self.dims):
            raise ValueError(f"side lengths must be positive, got {self.dims}")
        if len(set(self.dims)) != 1:
            raise ValueError(f"side lengths must be equal, got {self.dims}")

    @property
    def D(self) -> int:
        return len(self.dims)

    @property
    def L(self) -> int:
        return self.dims[0]

    @property
    def n_sites(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n

    def site_index(self, coord: Sequence[int]) -> int:
        """Row-major index of a (wrapped) coordinate tuple."""
        idx = 0
        for c, d in zip(coord, self.dims):
            idx = idx * d + (c % d)
        return idx

    def site_coord(self, index: int) -> tuple[int, ...]:
        coord = []
        for d in reversed(self.dims):
            coord.append(index % d)
            index //= d
        return tuple(reversed(coord))

    def sites(self) -> Iterator[tuple[int, ...]]:
        yield from itertools.product(*(range(d) for d in self.dims))

    def wrap(self, coord: Sequence[int]) -> tuple[int, ...]:
        return tuple(c % d for c, d in zip(coord, self.dims))

    def distance(self, a: Sequence[int], b: Sequence[int]) -> int:
        """Chebyshev distance with periodic wrapping (balls are squares)."""
        out = 0
        for x, y, d in zip(a, b, self.dims):
            delta = abs((x - y) % d)
            out = max(out, min(delta, d - delta))
        return out


@dataclass(frozen=True)
class Square:
    """Axis-aligned square (interval in D=1) anchored at its low corner."""

    anchor: tuple[int, ...]
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"square size must be positive, got {self.size}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.size,) * len(self.anchor)

    def sites(self, torus: Torus) -> tuple[tuple[int, ...], ...]:
        return _region_sites(torus, self.anchor, self.shape)

    def contains_site(self, torus: Torus, coord: Sequence[int]) -> bool:
        for a, c, d in zip(self.anchor, coord, torus.dims):
            if (c - a) % d >= min(self.size, d):
                return False
        return True


@dataclass(frozen=True)
class Box:
    """Rectangular box (used by box partitions, possibly truncated)."""

    anchor: tuple[int, ...]
    shape: tuple[int, ...]

    def sites(self, torus: Torus) -> tuple[tuple[int, ...], ...]:
        return _region_sites(torus, self.anchor, self.shape)


def _region_sites(torus: Torus, anchor, shape) -> tuple[tuple[int, ...], ...]:
    axes = []
    for a, s, d in zip(anchor, shape, torus.dims):
        span = min(s, d)
        axes.append([(a + off) % d for off in range(span)])
    return tuple(itertools.product(*axes))


def enumerate_squares(torus: Torus, r: int) -> list[Square]:
    """All anchored size-r squares; a single full-lattice square when r = L."""
    L = torus.L
    if r < 1 or r > L:
        raise ValueError(f"square size must satisfy 1 <= r <= {L}, got {r}")
    if r == L:
        return [Square((0,) * torus.D, L)]
    return [Square(coord, r) for coord in torus.sites()]


def ball(torus: Torus, region: Square, l: int) -> tuple[Square, bool]:
    """Square containing ``region`` and its first .. l-th neighbors.

    Returns ``(square, saturated)``; ``saturated`` is True when the grown
    square would exceed the lattice, in which case the full-lattice square is
    returned instead.  Saturation is a flagged value, not an error: several
    constructions intentionally grow regions until they cover everything.
    """
    if l < 0:
        raise ValueError(f"ball radius must be nonnegative, got {l}")
    L = torus.L
    size = region.size + 2 * l
    if size > L:
        return Square((0,) * torus.D, L), True
    anchor = torus.wrap(tuple(a - l for a in region.anchor))
    return Square(anchor, size), False


def site_ball(torus: Torus, site: Sequence[int], l: int) -> tuple[Square, bool]:
    """Ball around a single site: convenience wrapper for size-1 regions."""
    return ball(torus, Square(tuple(site), 1), l)


def box_partition(torus: Torus, r: int) -> list[Box]:
    """Tile the lattice with contiguous size-r boxes, truncated at the seam.

    The boxes partition the site set exactly; when r does not divide L the
    boxes in the last row/column are rectangles.
    """
    if r < 2:
        raise ValueError(f"box size must be at least 2, got {r}")
    L = torus.L
    starts = list(range(0, L, r))
    boxes = []
    for anchor in itertools.product(starts, repeat=torus.D):
        shape = tuple(min(r, L - a) for a in anchor)
        boxes.append(Box(anchor, shape))
    return boxes


def assign_square_to_box(torus: Torus, boxes: list[Box], square: Square, r: int) -> int:
    """Index of the unique box owning ``square``: the one holding its anchor.

    Squares straddling a seam belong to the box of their low ("bottom left")
    corner, which makes the assignment total and single-valued.
    """
    n_per_axis = -(-torus.L // r)
    idx = 0
    for a in square.anchor:
        idx = idx * n_per_axis + (a % torus.L) // r
    return idx


@dataclass(frozen=True)
class QubitLayout:
    """Mapping from torus cells to qubit indices (``qubits_per_cell`` each)."""

    torus: Torus
    qubits_per_cell: int = 1

    @property
    def n_qubits(self) -> int:
        return self.torus.n_sites * self.qubits_per_cell

    def qubit(self, coord: Sequence[int], slot: int = 0) -> int:
        if not 0 <= slot < self.qubits_per_cell:
            raise ValueError(f"slot {slot} out of range for {self.qubits_per_cell} qubits per cell")
        return self.torus.site_index(coord) * self.qubits_per_cell + slot

    def cell_of(self, qubit: int) -> tuple[tuple[int, ...], int]:
        site, slot = divmod(qubit, self.qubits_per_cell)
        return self.torus.site_coord(site), slot

    def region_qubits(self, region: Square | Box) -> tuple[int, ...]:
        out = []
        for coord in region.sites(self.torus):
            base = self.torus.site_index(coord) * self.qubits_per_cell
            out.extend(range(base, base + self.qubits_per_cell))
        return tuple(sorted(out))

    def ball_qubits(self, site: Sequence[int], l: int) -> tuple[tuple[int, ...], bool]:
        square, saturated = site_ball(self.torus, site, l)
        return self.region_qubits(square), saturated
