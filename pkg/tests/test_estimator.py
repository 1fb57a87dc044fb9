import itertools

import numpy as np
import pytest

from haarfield.basis import build_basis, design_matrix
from haarfield.dyadic import LabeledSample, build_index, point_codes
from haarfield.estimator import (fit_coefficients, fit_model, load_model,
                                 penalized_objective, save_model, threshold,
                                 truncate)


def four_point_sample(y=None):
    pts = np.array([[0.25], [0.5], [0.6], [0.75]])
    if y is None:
        y = np.array([1.0, 0.0, 0.0, 0.0])
    return LabeledSample(pts, np.asarray(y, dtype=float))


def test_coefficients_on_frozen_example():
    sample = four_point_sample()
    idx = build_index(sample, 0, 1, 1)
    basis = build_basis(idx)
    a = fit_coefficients(basis, sample)
    # father: mean of Y times the constant-one father = 1/4
    assert a[0] == pytest.approx(0.25)
    # mother carries sqrt(3) on the first point: a = sqrt(3)/4
    assert a[1] == pytest.approx(np.sqrt(3) / 4)


def test_coefficients_match_design_matrix():
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1, 1, size=(150, 2))
    y = rng.standard_normal(150)
    sample = LabeledSample(pts, y)
    idx = build_index(sample, 0, 3, 1)
    basis = build_basis(idx)
    a = fit_coefficients(basis, sample)
    F = design_matrix(basis, pts)
    assert np.abs(a - F.T @ y / 150).max() < 1e-10


def test_threshold_and_truncate():
    a = np.array([0.5, -0.08, 0.081, 0.0, -0.2])
    keep = threshold(a, 0.08)
    assert list(keep) == [0, 2, 4]
    assert list(threshold(a, 0.0)) == [0, 1, 2, 4]  # strict: zero excluded
    with pytest.raises(ValueError):
        threshold(a, -0.1)
    assert truncate(3.0, 2.5) == 2.5
    assert truncate(-3.0, 2.5) == -2.5
    assert np.array_equal(truncate(np.array([-5.0, 0.1, 5.0]), 1.0),
                          [-1.0, 0.1, 1.0])
    with pytest.raises(ValueError):
        truncate(1.0, -1.0)


def test_full_resolution_prediction_is_cube_mean():
    rng = np.random.default_rng(17)
    pts = rng.uniform(-1, 1, size=(90, 2))
    y = rng.standard_normal(90) + 3.0
    sample = LabeledSample(pts, y)
    idx = build_index(sample, 0, 2, 1)
    basis = build_basis(idx)
    model = fit_model(basis, sample, lam=0.0)
    pred = model.predict(pts)
    codes, _ = point_codes(pts, 2, 0, 1)
    for c in np.unique(codes):
        m = codes == c
        assert pred[m] == pytest.approx(y[m].mean(), abs=1e-8)


def test_truncation_bounds_prediction():
    sample = four_point_sample(y=[100.0, -100.0, 50.0, -50.0])
    idx = build_index(sample, 0, 1, 1)
    basis = build_basis(idx)
    model = fit_model(basis, sample, lam=0.0, beta=10.0)
    assert np.abs(model.predict(sample.points)).max() <= 10.0
    # default beta is max |Y|
    model2 = fit_model(basis, sample, lam=0.0)
    assert model2.beta == pytest.approx(100.0)


def test_penalized_objective_example():
    sample = four_point_sample(y=[1.0, 1.0, 1.0, 1.0])
    idx = build_index(sample, 0, 1, 1)
    basis = build_basis(idx)
    # constant response: father alone fits exactly
    assert penalized_objective(basis, sample, [0], 0.1) == pytest.approx(0.01)
    assert penalized_objective(basis, sample, [], 0.1) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        penalized_objective(basis, sample, [0, 0], 0.1)
    with pytest.raises(ValueError):
        penalized_objective(basis, sample, [99], 0.1)


def test_threshold_solves_penalized_least_squares():
    # hard thresholding minimizes mean residual^2 + lam^2 |J| over subsets
    rng = np.random.default_rng(41)
    for trial in range(40):
        n = int(rng.integers(8, 60))
        d = int(rng.integers(1, 3))
        pts = rng.uniform(-1, 1, size=(n, d))
        y = rng.standard_normal(n) + rng.uniform(-2, 2)
        sample = LabeledSample(pts, y)
        j1 = int(rng.integers(0, 2))
        idx = build_index(sample, 0, j1, 1)
        basis = build_basis(idx)
        if basis.size > 10:
            continue
        a = fit_coefficients(basis, sample)
        lam = float(rng.uniform(0, 1.2))
        # keep clear of ties so the argmin is unique
        if np.abs(np.abs(a) - lam).min() < 1e-7:
            continue
        chosen = set(threshold(a, lam).tolist())
        best, best_val = None, np.inf
        for r in range(basis.size + 1):
            for sub in itertools.combinations(range(basis.size), r):
                val = penalized_objective(basis, sample, list(sub), lam)
                if val < best_val - 1e-12:
                    best, best_val = set(sub), val
        assert chosen == best


def test_tie_prefers_exclusion():
    # coefficient exactly at lam: dropping it leaves the objective equal,
    # and the strict rule excludes it
    sample = four_point_sample(y=[1.0, 1.0, 1.0, 1.0])
    idx = build_index(sample, 0, 1, 1)
    basis = build_basis(idx)
    a = fit_coefficients(basis, sample)
    lam = abs(a[0])
    keep = threshold(a, lam)
    assert 0 not in keep
    with_it = penalized_objective(basis, sample, [0], lam)
    without = penalized_objective(basis, sample, [], lam)
    assert with_it == pytest.approx(without)


def test_model_export_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    pts = rng.uniform(-1, 1, size=(120, 2))
    y = np.sin(3 * pts[:, 0]) + rng.standard_normal(120) * 0.3
    sample = LabeledSample(pts, y)
    idx = build_index(sample, 0, 3, 1)
    basis = build_basis(idx)
    model = fit_model(basis, sample, lam=0.05)
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.lam == model.lam
    assert loaded.beta == model.beta
    test = rng.uniform(-1.1, 1.1, size=(200, 2))
    assert np.array_equal(model.predict(test), loaded.predict(test))


def test_fit_requires_responses():
    sample = LabeledSample(np.array([[0.1], [0.2]]))
    idx = build_index(sample, 0, 0, 1)
    basis = build_basis(idx)
    with pytest.raises(ValueError):
        fit_coefficients(basis, sample)
