"""Dyadic cubes and the count-indexed empirical measure of a sample.

The working domain at base level j0 with half-width w is the half-open box
2**-j0 * [-w, w)**d.  At level j >= j0 it splits into axis-aligned cubes
2**-j * [gamma, gamma + 1) whose integer corners gamma run over
{-2**(j-j0)*w, ..., 2**(j-j0)*w - 1} per coordinate.  A SampleIndex stores,
per level, the number of sample points falling in each occupied cube; cubes
never hit by a point are not materialised.
"""

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np


def _as_points(points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    return pts


@dataclass(frozen=True)
class DyadicCube:
    """Half-open cube 2**-j * [gamma, gamma + 1) in R^d."""

    j: int
    gamma: tuple
    j0: int

    def __post_init__(self):
        object.__setattr__(self, "gamma", tuple(int(g) for g in self.gamma))
        if self.j < self.j0:
            raise ValueError("cube level %d below base level %d" % (self.j, self.j0))

    @property
    def d(self):
        return len(self.gamma)

    @property
    def side(self):
        return math.ldexp(1.0, -self.j)

    @property
    def lower(self):
        return np.ldexp(np.asarray(self.gamma, dtype=float), -self.j)

    @property
    def upper(self):
        return np.ldexp(np.asarray(self.gamma, dtype=float) + 1.0, -self.j)

    def contains(self, point):
        g = np.floor(np.ldexp(np.asarray(point, dtype=float), self.j)).astype(np.int64)
        return bool(np.all(g == np.asarray(self.gamma)))

    def child(self, slot):
        """Child at the next level; bit i of slot selects the upper half on axis i."""
        if not 0 <= slot < (1 << self.d):
            raise ValueError("child slot %d out of range for d=%d" % (slot, self.d))
        g = tuple(2 * gi + ((slot >> i) & 1) for i, gi in enumerate(self.gamma))
        return DyadicCube(self.j + 1, g, self.j0)

    def children(self):
        return [self.child(s) for s in range(1 << self.d)]

    def parent(self):
        if self.j == self.j0:
            raise ValueError("cube at base level has no indexed parent")
        g = tuple(gi >> 1 for gi in self.gamma)
        return DyadicCube(self.j - 1, g, self.j0)


@dataclass
class LabeledSample:
    """Design points with optional responses and optional lattice site labels.

    points is (n, d); responses is (n,) or None; sites is (n, 2) integer
    lattice coordinates or None.  Instances are treated as immutable once
    built and are safe to share across worker processes.
    """

    points: np.ndarray
    responses: np.ndarray = None
    sites: np.ndarray = None

    def __post_init__(self):
        self.points = np.ascontiguousarray(_as_points(self.points))
        if self.points.size and not np.all(np.isfinite(self.points)):
            raise ValueError("sample points must be finite")
        if self.responses is not None:
            self.responses = np.ascontiguousarray(np.asarray(self.responses, dtype=float))
            if self.responses.shape != (len(self.points),):
                raise ValueError("responses length %d does not match %d points"
                                 % (len(self.responses), len(self.points)))
            if not np.all(np.isfinite(self.responses)):
                raise ValueError("responses must be finite")
        if self.sites is not None:
            self.sites = np.asarray(self.sites, dtype=np.int64)
            if len(self.sites) != len(self.points):
                raise ValueError("sites length does not match points")

    @property
    def n(self):
        return len(self.points)

    @property
    def d(self):
        return self.points.shape[1]


def axis_cells(j, j0, w):
    """Number of level-j cube positions per coordinate axis."""
    return 2 * (1 << (j - j0)) * w


def point_codes(points, j, j0, w):
    """Flat row-major cube codes of points at level j.

    Returns (codes, in_domain): codes is int64 with the code of the containing
    cube for in-domain points and -1 outside; gamma order is lexicographic,
    axis 0 most significant.
    """
    pts = _as_points(points)
    d = pts.shape[1]
    side = axis_cells(j, j0, w)
    if side ** d >= 2 ** 62:
        raise ValueError("level %d too fine to index (codes overflow)" % j)
    half = (1 << (j - j0)) * w
    g = np.floor(np.ldexp(pts, j)).astype(np.int64) + half
    ok = np.all((g >= 0) & (g < side), axis=1)
    codes = np.zeros(len(pts), dtype=np.int64)
    for axis in range(d):
        codes = codes * side + g[:, axis]
    codes[~ok] = -1
    return codes, ok


def code_to_gamma(codes, j, j0, w, d):
    """Invert point_codes: flat codes -> integer corners gamma, shape (m, d)."""
    side = axis_cells(j, j0, w)
    half = (1 << (j - j0)) * w
    c = np.asarray(codes, dtype=np.int64).copy()
    g = np.empty((len(c), d), dtype=np.int64)
    for axis in range(d - 1, -1, -1):
        g[:, axis] = c % side - half
        c //= side
    return g


def gamma_to_code(gamma, j, j0, w):
    g = np.asarray(gamma, dtype=np.int64)
    if g.ndim == 1:
        g = g[None, :]
    side = axis_cells(j, j0, w)
    half = (1 << (j - j0)) * w
    shifted = g + half
    codes = np.zeros(len(g), dtype=np.int64)
    for axis in range(g.shape[1]):
        codes = codes * side + shifted[:, axis]
    return codes


def child_codes(codes, j, j0, w, d):
    """Codes at level j+1 of all 2^d children of level-j cubes, shape (m, 2^d).

    Column s holds the child whose slot bits are s (bit i = upper half of
    axis i), matching DyadicCube.child.
    """
    gam = code_to_gamma(codes, j, j0, w, d)
    nslots = 1 << d
    out = np.empty((len(gam), nslots), dtype=np.int64)
    for s in range(nslots):
        child = 2 * gam + np.array([(s >> i) & 1 for i in range(d)], dtype=np.int64)
        out[:, s] = gamma_to_code(child, j + 1, j0, w)
    return out


@dataclass
class SampleIndex:
    """Per-level occupied-cube counts for a sample over a fixed dyadic ladder.

    levels maps j -> (codes, counts): sorted flat codes of occupied cubes and
    their point counts.  Zero-count cubes are absent.  Construction is
    insertion-order independent.  Instances are immutable by convention.
    """

    j0: int
    j1: int
    w: int
    d: int
    n: int
    levels: dict = field(repr=False)
    out_of_domain: int = 0

    def count(self, j, code):
        keys, counts = self._level(j)
        pos = np.searchsorted(keys, code)
        if pos < len(keys) and keys[pos] == code:
            return int(counts[pos])
        return 0

    def counts_for(self, j, codes):
        """Vector of counts for an array of level-j codes (0 where absent)."""
        keys, counts = self._level(j)
        if len(keys) == 0:
            return np.zeros(np.shape(codes), dtype=np.int64)
        pos = np.minimum(np.searchsorted(keys, codes), len(keys) - 1)
        found = keys[pos] == codes
        return np.where(found, counts[pos], 0)

    def occupied(self, j):
        return self._level(j)

    def _level(self, j):
        if j not in self.levels:
            raise ValueError("level %d not indexed (valid range [%d, %d])"
                             % (j, self.j0, self.j1))
        return self.levels[j]


def build_index(sample, j0, j1, w):
    """Index a sample over levels j0..j1 of the domain 2**-j0 * [-w, w)^d."""
    if not isinstance(sample, LabeledSample):
        sample = LabeledSample(np.asarray(sample, dtype=float))
    if sample.n == 0:
        raise ValueError("cannot index an empty sample")
    if j1 < j0:
        raise ValueError("j1=%d below j0=%d" % (j1, j0))
    if w < 1:
        raise ValueError("domain half-width w must be a positive integer")
    levels = {}
    out = 0
    for j in range(j0, j1 + 1):
        codes, ok = point_codes(sample.points, j, j0, w)
        keys, counts = np.unique(codes[ok], return_counts=True)
        levels[j] = (keys.astype(np.int64), counts.astype(np.int64))
        if j == j0:
            out = int(np.sum(~ok))
    return SampleIndex(j0=j0, j1=j1, w=w, d=sample.d, n=sample.n,
                       levels=levels, out_of_domain=out)


def locate(point, level, index):
    """Containing cube of a point at a level, or None if outside the domain."""
    if not index.j0 <= level <= index.j1:
        raise ValueError("level %d outside indexed range [%d, %d]"
                         % (level, index.j0, index.j1))
    codes, ok = point_codes(point, level, index.j0, index.w)
    if not ok[0]:
        return None
    gamma = code_to_gamma(codes[:1], level, index.j0, index.w, index.d)[0]
    return DyadicCube(level, tuple(gamma), index.j0)


def empirical_measure(index, cube):
    """Fraction of the sample in a cube; unoccupied cubes give 0."""
    if cube.j0 != index.j0 or cube.d != index.d:
        raise ValueError("cube parameters do not match index")
    code = gamma_to_code(cube.gamma, cube.j, index.j0, index.w)[0]
    return index.count(cube.j, code) / index.n
