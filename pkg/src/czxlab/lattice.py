"""Shifted dyadic lattices on the unit torus.

A lattice at resolution ``n`` is described by ``n`` shift bits.  Interval
``(j, m)`` covers the grid cells ``m * 2**(n-j) + offset(j) + t`` (mod
``2**n``) for ``0 <= t < 2**(n-j)``, where ``offset(j)`` is the shift of
scale ``j`` measured in cells.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

TORUS = "torus"
BOX = "box"
DOMAINS = (TORUS, BOX)


class ResolutionError(ValueError):
    """Requested object is finer (or coarser) than the grid can represent."""


@dataclass(frozen=True)
class GridGeometry:
    n: int
    domain: str = TORUS

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.domain not in DOMAINS:
            raise ValueError(f"domain must be one of {DOMAINS}")

    @property
    def size(self) -> int:
        return 1 << self.n

    @property
    def cell(self) -> float:
        return 1.0 / self.size

    @property
    def cell_area(self) -> float:
        return 4.0 ** (-self.n)

    def centers(self) -> np.ndarray:
        return (np.arange(self.size) + 0.5) * self.cell


@dataclass(frozen=True)
class ShiftBits:
    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError("shift bits must be 0 or 1")
        if not bits:
            raise ValueError("need at least one bit")
        object.__setattr__(self, "bits", bits)

    @property
    def n(self) -> int:
        return len(self.bits)

    @classmethod
    def zeros(cls, n: int) -> "ShiftBits":
        return cls((0,) * n)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "ShiftBits":
        return cls(tuple(int(b) for b in rng.integers(0, 2, size=n)))

    def offset(self, j: int) -> int:
        """Shift of scale ``j`` in cells: sum of bits i > j weighted by 2**(n-i)."""
        if not 0 <= j <= self.n:
            raise ResolutionError(f"scale {j} outside 0..{self.n}")
        return sum(b << (self.n - i) for i, b in enumerate(self.bits, start=1) if i > j)

    def offsets(self) -> np.ndarray:
        return np.array([self.offset(j) for j in range(self.n + 1)], dtype=np.int64)

    @property
    def is_zero(self) -> bool:
        return not any(self.bits)


@dataclass(frozen=True)
class DyadicInterval:
    j: int
    m: int
    shift: ShiftBits

    def __post_init__(self) -> None:
        if not 0 <= self.j <= self.shift.n:
            raise ResolutionError(f"scale {self.j} outside 0..{self.shift.n}")
        if not 0 <= self.m < (1 << self.j):
            raise ValueError(f"index {self.m} outside 0..{(1 << self.j) - 1}")

    @property
    def n(self) -> int:
        return self.shift.n

    @property
    def length(self) -> float:
        return 2.0 ** (-self.j)

    @property
    def width(self) -> int:
        """Side length in cells."""
        return 1 << (self.n - self.j)

    @property
    def start(self) -> int:
        """First cell (mod 2**n)."""
        return (self.m * self.width + self.shift.offset(self.j)) % (1 << self.n)

    @property
    def left(self) -> float:
        return self.start / (1 << self.n)

    def cells(self) -> np.ndarray:
        return (self.start + np.arange(self.width)) % (1 << self.n)

    def halves(self) -> tuple[np.ndarray, np.ndarray]:
        c = self.cells()
        h = self.width // 2
        return c[:h], c[h:]

    def children(self) -> tuple["DyadicInterval", "DyadicInterval"]:
        if self.j >= self.n:
            raise ResolutionError("finest scale has no children")
        first = _index_of(self.start, self.j + 1, self.shift)
        second = (first + 1) % (1 << (self.j + 1))
        return (DyadicInterval(self.j + 1, first, self.shift),
                DyadicInterval(self.j + 1, second, self.shift))


@dataclass(frozen=True)
class DyadicRect:
    first: DyadicInterval
    second: DyadicInterval

    def __post_init__(self) -> None:
        if self.first.n != self.second.n:
            raise ValueError("both sides must live on the same resolution")

    @property
    def scales(self) -> tuple[int, int]:
        return self.first.j, self.second.j

    @property
    def is_square(self) -> bool:
        return self.first.j == self.second.j

    @property
    def ratio(self) -> float:
        """Side ratio l(first)/l(second)."""
        return 2.0 ** (self.second.j - self.first.j)

    @property
    def area(self) -> float:
        return self.first.length * self.second.length

    def mask(self) -> np.ndarray:
        N = 1 << self.first.n
        out = np.zeros((N, N), dtype=bool)
        out[np.ix_(self.first.cells(), self.second.cells())] = True
        return out


def _index_of(cell: int, j: int, shift: ShiftBits) -> int:
    """Index of the scale-j interval containing a cell."""
    n = shift.n
    return ((cell - shift.offset(j)) % (1 << n)) >> (n - j)


class Lattice:
    """All intervals of one shifted lattice, scales 0..n."""

    def __init__(self, shift: ShiftBits):
        self.shift = shift
        self.n = shift.n

    def intervals(self, j: int) -> list[DyadicInterval]:
        if not 0 <= j <= self.n:
            raise ResolutionError(f"scale {j} outside 0..{self.n}")
        return [DyadicInterval(j, m, self.shift) for m in range(1 << j)]

    def containing(self, cell: int, j: int) -> DyadicInterval:
        return DyadicInterval(j, _index_of(cell, j, self.shift), self.shift)

    def labels(self, j: int) -> np.ndarray:
        """Interval index of every cell at scale j."""
        cells = np.arange(1 << self.n)
        return ((cells - self.shift.offset(j)) % (1 << self.n)) >> (self.n - j)


def build_lattice(shift: ShiftBits) -> Lattice:
    return Lattice(shift)


def ancestor(I: DyadicInterval | DyadicRect, k: int | Sequence[int]):
    """Unique lattice element ``k`` scales coarser containing ``I``."""
    if isinstance(I, DyadicRect):
        k1, k2 = (k, k) if np.isscalar(k) else tuple(k)
        return DyadicRect(ancestor(I.first, k1), ancestor(I.second, k2))
    k = int(k)
    if k < 0:
        raise ValueError("k must be nonnegative")
    if I.j - k < 0:
        raise ResolutionError(f"ancestor at scale {I.j - k} does not exist")
    return DyadicInterval(I.j - k, _index_of(I.start, I.j - k, I.shift), I.shift)


def relative_position(I: DyadicInterval, k: int) -> int:
    """Position of I among the 2**k same-scale intervals of its k-th ancestor."""
    G = ancestor(I, k)
    return ((I.start - G.start) % (1 << I.n)) // I.width


def is_k_good(I: DyadicInterval, k: int) -> bool:
    # distance to the ancestor boundary, in units of l(I), must reach 2**(k-2)
    if k < 2:
        raise ValueError("k-goodness needs k >= 2")
    if I.j < k:
        raise ResolutionError("interval has no k-th ancestor")
    r = relative_position(I, k)
    return min(r, (1 << k) - 1 - r) >= 1 << (k - 2)


def kgood_probability(j: int, k: int, trials: int, seed: int, base: int = 0,
                      n: int | None = None) -> float:
    """Monte Carlo frequency of k-goodness of ``L + omega`` for a fixed standard interval L.

    The base interval is ``[base 2^-j, (base+1) 2^-j)`` of the unshifted grid; the
    shifted copy is the interval of D(omega) with the same index.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 2 <= k <= j:
        raise ValueError("need 2 <= k <= j")
    n = j if n is None else n
    if n < j:
        raise ResolutionError("n must be at least j")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(trials, n))
    # the relative offset between L + omega and its ancestor only involves bits j-k+1..j
    weights = 1 << (j - np.arange(j - k + 1, j + 1))
    shift = bits[:, j - k:j] @ weights
    r = (base - shift) % (1 << k)
    good = np.minimum(r, (1 << k) - 1 - r) >= 1 << (k - 2)
    return float(good.mean())


def enumerate_family(lam: float, j: int, sigma: tuple[ShiftBits, ShiftBits]) -> list[DyadicRect]:
    """Rectangles with l(I^1) = lam * l(I^2), where I^2 sits at scale ``j``."""
    s1, s2 = sigma
    e = np.log2(lam)
    if not float(e).is_integer():
        raise ValueError("lam must be a power of two")
    j1 = j - int(e)
    if not (0 <= j1 <= s1.n and 0 <= j <= s2.n):
        raise ValueError(f"ratio {lam} at scale {j} is not representable")
    return [DyadicRect(DyadicInterval(j1, a, s1), DyadicInterval(j, b, s2))
            for a in range(1 << j1) for b in range(1 << j)]


def containing_square(R: DyadicRect) -> DyadicRect:
    """Square of the same lattice pair containing R; its area is max(lam, 1/lam) |R|."""
    j = min(R.scales)
    return DyadicRect(ancestor(R.first, R.first.j - j), ancestor(R.second, R.second.j - j))


def eccentricity_factor(lam: float) -> float:
    return max(lam, 1.0 / lam)
