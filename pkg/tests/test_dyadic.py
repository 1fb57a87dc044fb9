import numpy as np
import pytest

from haarfield.dyadic import (DyadicCube, LabeledSample, axis_cells,
                              build_index, child_codes, code_to_gamma,
                              empirical_measure, gamma_to_code, locate,
                              point_codes)


def test_cube_geometry():
    c = DyadicCube(j=1, gamma=(1, -1), j0=0)
    assert c.d == 2
    assert c.side == 0.5
    assert np.allclose(c.lower, [0.5, -0.5])
    assert np.allclose(c.upper, [1.0, 0.0])
    assert c.contains([0.6, -0.2])
    assert not c.contains([0.6, 0.0])  # half-open on the upper face
    assert c.contains([0.5, -0.5])


def test_cube_children_partition_parent():
    c = DyadicCube(j=0, gamma=(0, 0), j0=0)
    kids = c.children()
    assert len(kids) == 4
    # slot bit i selects the upper half along axis i
    assert np.allclose(kids[0].lower, [0.0, 0.0])
    assert np.allclose(kids[1].lower, [0.5, 0.0])
    assert np.allclose(kids[2].lower, [0.0, 0.5])
    assert np.allclose(kids[3].lower, [0.5, 0.5])
    for k in kids:
        assert k.parent() == c
    # children tile the parent: sample points land in exactly one child
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 1, size=(200, 2))
    for p in pts:
        hits = [k.contains(p) for k in kids]
        assert sum(hits) == 1


def test_axis_cells():
    assert axis_cells(0, 0, 1) == 2
    assert axis_cells(3, 0, 1) == 16
    assert axis_cells(2, 1, 3) == 12


def test_point_codes_row_major():
    pts = np.array([[0.6, -0.2]])
    codes, ok = point_codes(pts, 1, 0, 1)
    assert ok.all()
    # level 1 on [-1,1)^2 has 4 cells per axis; gamma = (1,-1) -> offsets (3,1)
    assert codes[0] == 3 * 4 + 1
    g = code_to_gamma(codes, 1, 0, 1, 2)
    assert tuple(g[0]) == (1, -1)
    assert gamma_to_code(g, 1, 0, 1)[0] == codes[0]


def test_point_codes_out_of_domain():
    pts = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, -1.01]])
    codes, ok = point_codes(pts, 0, 0, 1)
    assert not ok[0]          # 1.0 is outside the half-open domain
    assert ok[1]
    assert not ok[2]
    assert codes[0] == -1 and codes[2] == -1


def test_child_codes_round_trip():
    rng = np.random.default_rng(7)
    for _ in range(20):
        d = rng.integers(1, 4)
        j0 = int(rng.integers(-1, 2))
        j = j0 + int(rng.integers(0, 3))
        w = int(rng.integers(1, 3))
        pts = rng.uniform(-w * 2.0 ** (-j0), w * 2.0 ** (-j0), size=(50, d))
        par, ok = point_codes(pts, j, j0, w)
        kid, _ = point_codes(pts, j + 1, j0, w)
        table = child_codes(par[ok], j, j0, w, d)
        # each point's level-(j+1) code appears among its parent's children
        assert (table == kid[ok][:, None]).any(axis=1).all()


def test_build_index_counts_four_point_example():
    pts = np.array([[0.25], [0.75], [0.8], [0.9]])
    s = LabeledSample(pts)
    idx = build_index(s, 0, 1, 1)
    assert idx.n == 4
    assert idx.out_of_domain == 0
    c_right = gamma_to_code(np.array([[0]]), 0, 0, 1)[0]
    c_left = gamma_to_code(np.array([[-1]]), 0, 0, 1)[0]
    assert idx.count(0, c_right) == 4
    assert idx.count(0, c_left) == 0
    lo = gamma_to_code(np.array([[0]]), 1, 0, 1)[0]
    hi = gamma_to_code(np.array([[1]]), 1, 0, 1)[0]
    assert idx.count(1, lo) == 1
    assert idx.count(1, hi) == 3


def test_partition_of_unity_and_shuffle_determinism():
    rng = np.random.default_rng(3)
    for trial in range(25):
        d = int(rng.integers(1, 4))
        n = int(rng.integers(1, 200))
        w = int(rng.integers(1, 3))
        j0 = 0
        j1 = j0 + int(rng.integers(0, 4))
        pts = rng.uniform(-1.5 * w, 1.5 * w, size=(n, d))  # some fall outside
        idx = build_index(LabeledSample(pts), j0, j1, w)
        for j in range(j0, j1 + 1):
            _, counts = idx.levels[j]
            assert counts.sum() + idx.out_of_domain == n
        # permuting the sample must not change the index content
        perm = rng.permutation(n)
        idx2 = build_index(LabeledSample(pts[perm]), j0, j1, w)
        for j in range(j0, j1 + 1):
            assert np.array_equal(idx.levels[j][0], idx2.levels[j][0])
            assert np.array_equal(idx.levels[j][1], idx2.levels[j][1])


def test_locate_and_measure():
    pts = np.array([[0.6, -0.2], [0.1, 0.1], [0.7, -0.1], [-0.5, 0.5]])
    idx = build_index(LabeledSample(pts), 0, 2, 1)
    cube = locate(np.array([0.6, -0.2]), 1, idx)
    assert cube is not None
    assert cube.j == 1 and tuple(cube.gamma) == (1, -1)
    assert empirical_measure(idx, cube) == pytest.approx(0.5)
    # a cell holding no sample point still has a measure, namely zero
    empty = DyadicCube(j=2, gamma=(-4, -4), j0=0)
    assert empirical_measure(idx, empty) == 0.0
    # outside the domain there is no cube
    assert locate(np.array([1.2, 0.0]), 1, idx) is None


def test_locate_rejects_bad_level():
    idx = build_index(LabeledSample(np.array([[0.1, 0.1]])), 0, 1, 1)
    with pytest.raises(ValueError):
        locate(np.array([0.1, 0.1]), 2, idx)


def test_sample_validation():
    with pytest.raises(ValueError):
        LabeledSample(np.array([[np.nan, 0.0]]))
    with pytest.raises(ValueError):
        LabeledSample(np.array([[0.0, 0.0]]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        build_index(LabeledSample(np.array([[0.0]])), 1, 0, 1)  # j1 < j0
