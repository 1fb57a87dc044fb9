"""Design-adapted Haar systems, empirically orthonormalized.

Fathers are rescaled indicators of occupied base-level cubes.  Mothers live
on occupied cubes at levels j0..j1-1: the tensor Haar sign patterns on the
cube's 2^d children are Gram-Schmidt orthonormalized in L2 of the empirical
measure, and patterns whose residual is numerically zero are dropped.  The
surviving functions are orthonormal, each mother integrates to zero under
the empirical measure, and their span over the sample equals the span of
all indicators of occupied finest-level cubes.
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse

from .dyadic import (DyadicCube, LabeledSample, _as_points, axis_cells,
                     child_codes, code_to_gamma, gamma_to_code, point_codes)

DROP_TOL = 1e-9


@dataclass(frozen=True)
class PiecewiseConstantFn:
    """Finitely many (cube, value) pieces, zero outside their union."""

    cubes: tuple
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(self.cubes) != len(self.values):
            raise ValueError("piece count mismatch")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("piece values must be finite")

    def evaluate(self, points):
        pts = _as_points(points)
        out = np.zeros(len(pts))
        for cube, val in zip(self.cubes, self.values):
            lo, hi = cube.lower, cube.upper
            inside = np.all((pts >= lo) & (pts < hi), axis=1)
            out[inside] = val
        return out

    __call__ = evaluate


@dataclass(frozen=True)
class BasisFunction:
    """One empirical basis element: a father (v=0) or a mother (v>=1)."""

    kind: str
    cube: DyadicCube
    v: int
    fn: PiecewiseConstantFn

    @property
    def level(self):
        return self.cube.j


@lru_cache(maxsize=None)
def sign_patterns(d):
    """(2^d, 2^d) tensor Haar sign table: H[v, slot] = (-1)^popcount(v & slot).

    Row v holds the sign pattern of the mother that flips along exactly the
    axes set in v; slot bits follow DyadicCube.child.
    """
    k = 1 << d
    v, s = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    bits = np.zeros((k, k), dtype=np.int64)
    for i in range(d):
        bits += ((v >> i) & 1) * ((s >> i) & 1)
    return np.where(bits % 2 == 0, 1.0, -1.0)


def standard_haar(v, cube):
    """Tensor Haar function with index v on a cube, L2(Lebesgue)-normalized."""
    d = cube.d
    if not 0 <= v < (1 << d):
        raise ValueError("haar index %d out of range for d=%d" % (v, d))
    h = 2.0 ** (cube.j * d / 2.0)
    if v == 0:
        return PiecewiseConstantFn((cube,), np.array([h]))
    signs = sign_patterns(d)[v]
    return PiecewiseConstantFn(tuple(cube.children()), h * signs)


def _log2(k):
    d = k.bit_length() - 1
    if (1 << d) != k:
        raise ValueError("child count %d is not a power of two" % k)
    return d


def _mothers_from_masses(mass):
    """Batched per-cube Gram-Schmidt from child masses.

    mass is (M, 2^d) nonnegative with positive row sums.  Returns
    (values, kept): values is (M, 2^d - 1, 2^d) child values of the
    orthonormalized sign patterns (zero rows where dropped), kept the
    boolean survival mask.  Modified Gram-Schmidt with one
    re-orthogonalization pass; residuals below DROP_TOL relative to the
    largest candidate norm are dropped.
    """
    mass = np.asarray(mass, dtype=float)
    m, k = mass.shape
    total = mass.sum(axis=1)
    if np.any(total <= 0):
        raise ValueError("every cube in the batch needs positive mass")
    signs = sign_patterns(_log2(k))
    funcs = np.zeros((m, k, k))
    funcs[:, 0, :] = (1.0 / np.sqrt(total))[:, None]
    kept = np.zeros((m, k - 1), dtype=bool)
    values = np.zeros((m, k - 1, k))
    cutoff2 = (DROP_TOL ** 2) * total
    for u in range(1, k):
        res = np.broadcast_to(signs[u], (m, k)).copy()
        for _ in range(2):
            for t in range(u):
                coef = (mass * res * funcs[:, t]).sum(axis=1)
                res -= coef[:, None] * funcs[:, t]
        nrm2 = (mass * res * res).sum(axis=1)
        keep = nrm2 > cutoff2
        norm = np.where(keep, np.sqrt(np.where(keep, nrm2, 1.0)), 1.0)
        normed = np.where(keep[:, None], res / norm[:, None], 0.0)
        funcs[:, u] = normed
        values[:, u - 1] = normed
        kept[:, u - 1] = keep
    return values, kept


class EmpiricalBasis:
    """Design-adapted Haar basis in compact array form.

    Canonical order: fathers by ascending cube code, then mothers by level,
    cube code, and sign-pattern index v.  The object is read-only after
    construction and picklable.
    """

    def __init__(self, j0, j1, w, d, n, father_keys, father_vals, mother_levels):
        self.j0 = j0
        self.j1 = j1
        self.w = w
        self.d = d
        self.n = n
        self.father_keys = father_keys
        self.father_vals = father_vals
        # mother_levels: j -> (parent_keys, u, child_keys (K,2^d), values (K,2^d))
        self.mother_levels = mother_levels
        self.offsets = {"father": 0}
        off = len(father_keys)
        for j in range(j0, j1):
            self.offsets[j] = off
            off += len(mother_levels[j][0])
        self.size = off

    def level_block(self, j):
        """(offset, parent_keys, u, child_keys, values) of the level-j mothers."""
        parents, u, child_keys, values = self.mother_levels[j]
        return self.offsets[j], parents, u, child_keys, values

    @cached_property
    def functions(self):
        out = []
        for key, val in zip(self.father_keys, self.father_vals):
            gamma = code_to_gamma(np.array([key]), self.j0, self.j0, self.w, self.d)[0]
            cube = DyadicCube(self.j0, tuple(gamma), self.j0)
            out.append(BasisFunction("father", cube, 0,
                                     PiecewiseConstantFn((cube,), np.array([val]))))
        for j in range(self.j0, self.j1):
            parents, us, _, values = self.mother_levels[j]
            for key, u, vals in zip(parents, us, values):
                gamma = code_to_gamma(np.array([key]), j, self.j0, self.w, self.d)[0]
                cube = DyadicCube(j, tuple(gamma), self.j0)
                fn = PiecewiseConstantFn(tuple(cube.children()), vals)
                out.append(BasisFunction("mother", cube, int(u), fn))
        return out

    def __len__(self):
        return self.size


def orthonormalize_cube(index, cube):
    """Mothers of one occupied cube, in ascending sign-pattern order."""
    if not index.j0 <= cube.j < index.j1:
        raise ValueError("cube level %d has no indexed children" % cube.j)
    code = gamma_to_code(cube.gamma, cube.j, index.j0, index.w)
    ckeys = child_codes(code, cube.j, index.j0, index.w, index.d)
    mass = index.counts_for(cube.j + 1, ckeys) / index.n
    if mass.sum() <= 0:
        raise ValueError("cube has zero empirical mass")
    values, kept = _mothers_from_masses(mass)
    children = tuple(cube.children())
    out = []
    for u in range(1, 1 << index.d):
        if kept[0, u - 1]:
            fn = PiecewiseConstantFn(children, values[0, u - 1])
            out.append(BasisFunction("mother", cube, u, fn))
    return out


def build_basis(index, j0=None, j1=None, w=None):
    """Build the empirical basis from a sample index.

    The optional parameters are validated against the index when given.
    """
    for name, given, have in (("j0", j0, index.j0), ("j1", j1, index.j1),
                              ("w", w, index.w)):
        if given is not None and given != have:
            raise ValueError("%s=%r does not match index (%r)" % (name, given, have))
    j0, j1, w, d, n = index.j0, index.j1, index.w, index.d, index.n
    keys0, counts0 = index.occupied(j0)
    father_vals = np.sqrt(n / counts0.astype(float)) if len(keys0) else np.empty(0)
    nslots = 1 << d
    mother_levels = {}
    for j in range(j0, j1):
        parents, _ = index.occupied(j)
        if len(parents) == 0:
            mother_levels[j] = (parents, np.empty(0, dtype=np.int64),
                                np.empty((0, nslots), dtype=np.int64),
                                np.empty((0, nslots)))
            continue
        ckeys = child_codes(parents, j, j0, w, d)
        mass = index.counts_for(j + 1, ckeys) / n
        values, kept = _mothers_from_masses(mass)
        sel = kept.reshape(-1)
        m_parent = np.repeat(parents, nslots - 1)[sel]
        m_u = np.tile(np.arange(1, nslots), len(parents))[sel]
        m_child = np.repeat(ckeys, nslots - 1, axis=0)[sel]
        m_values = values.reshape(-1, nslots)[sel]
        mother_levels[j] = (m_parent, m_u, m_child, m_values)
    return EmpiricalBasis(j0, j1, w, d, n, keys0.astype(np.int64), father_vals,
                          mother_levels)


def _point_slots(points, j, j0):
    """Child slot of each point inside its level-j cube (bits follow child)."""
    g = np.floor(np.ldexp(_as_points(points), j + 1)).astype(np.int64)
    slots = np.zeros(len(g), dtype=np.int64)
    for axis in range(g.shape[1]):
        slots |= (g[:, axis] & 1) << axis
    return slots


def design_matrix(basis, points):
    """Sparse (m, size) matrix of basis function values at points.

    Points outside the domain give all-zero rows.  Column order is the
    basis's canonical order, so F @ a evaluates the expansion with
    coefficients a.
    """
    pts = _as_points(points)
    if pts.shape[1] != basis.d:
        raise ValueError("points have dimension %d, basis expects %d"
                         % (pts.shape[1], basis.d))
    m = len(pts)
    rows, cols, vals = [], [], []
    codes0, ok = point_codes(pts, basis.j0, basis.j0, basis.w)
    live = np.nonzero(ok)[0]
    if len(basis.father_keys) and len(live):
        pos = np.minimum(np.searchsorted(basis.father_keys, codes0[live]),
                         len(basis.father_keys) - 1)
        hit = basis.father_keys[pos] == codes0[live]
        rows.append(live[hit])
        cols.append(pos[hit])
        vals.append(basis.father_vals[pos[hit]])
    for j in range(basis.j0, basis.j1):
        off, parents, _, _, values = basis.level_block(j)
        if len(parents) == 0 or len(live) == 0:
            continue
        pcodes, _ = point_codes(pts[live], j, basis.j0, basis.w)
        slots = _point_slots(pts[live], j, basis.j0)
        lo = np.searchsorted(parents, pcodes, side="left")
        hi = np.searchsorted(parents, pcodes, side="right")
        cnt = hi - lo
        tot = int(cnt.sum())
        if tot == 0:
            continue
        starts = np.cumsum(cnt) - cnt
        within = np.arange(tot) - np.repeat(starts, cnt)
        midx = np.repeat(lo, cnt) + within
        rows.append(np.repeat(live, cnt))
        cols.append(off + midx)
        vals.append(values[midx, np.repeat(slots, cnt)])
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
    mat = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(m, basis.size))
    return mat.tocsr()


@dataclass(frozen=True)
class OrthonormalFunction:
    """Linear combination of dictionary elements produced by Gram-Schmidt.

    source is the index of the dictionary element whose orthonormalization
    step produced this function, so the functions with source <= u span the
    same space over the sample as the first u+1 dictionary elements.
    """

    weights: np.ndarray
    source: int
    dictionary: tuple

    def evaluate(self, points):
        pts = _as_points(points)
        out = np.zeros(len(pts))
        for wgt, g in zip(self.weights, self.dictionary):
            if wgt != 0.0:
                out += wgt * _eval_dict(g, pts)
        return out

    __call__ = evaluate


def _eval_dict(g, pts):
    if isinstance(g, PiecewiseConstantFn):
        return g.evaluate(pts)
    return np.asarray(g(pts), dtype=float)


def gram_schmidt_generic(dictionary, sample, drop_tol=DROP_TOL):
    """Empirically orthonormalize an arbitrary ordered dictionary of functions.

    Near-zero residuals (empirical norm below drop_tol times the largest
    dictionary norm) are dropped, so the output is a basis of the
    dictionary's span in L2 of the empirical measure.
    """
    dictionary = tuple(dictionary)
    if len(dictionary) == 0:
        raise ValueError("dictionary is empty")
    if not isinstance(sample, LabeledSample):
        sample = LabeledSample(np.asarray(sample, dtype=float))
    pts = sample.points
    n = sample.n
    vals = np.column_stack([_eval_dict(g, pts) for g in dictionary])
    maxnorm = np.sqrt(np.max(np.mean(vals ** 2, axis=0)))
    if maxnorm == 0:
        return []
    kept_vecs, kept_wgts, out = [], [], []
    for u in range(len(dictionary)):
        v = vals[:, u].copy()
        wgt = np.zeros(len(dictionary))
        wgt[u] = 1.0
        for _ in range(2):
            for q, wq in zip(kept_vecs, kept_wgts):
                c = float(np.dot(q, v)) / n
                v -= c * q
                wgt -= c * wq
        nrm = np.sqrt(float(np.dot(v, v)) / n)
        if nrm > drop_tol * maxnorm:
            kept_vecs.append(v / nrm)
            kept_wgts.append(wgt / nrm)
            out.append(OrthonormalFunction(wgt / nrm, u, dictionary))
    return out
