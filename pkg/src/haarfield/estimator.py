"""Hard-thresholded regression on an empirical Haar basis.

Coefficients are empirical scalar products of the responses with the basis
functions.  Because the basis is orthonormal under the empirical measure,
keeping exactly the coefficients with |a| strictly above the threshold
minimizes the penalized least-squares objective with penalty lambda^2 times
the subset size; ties at the threshold resolve to exclusion.  Predictions
are clamped to [-beta, beta].
"""

from dataclasses import dataclass
import json

import numpy as np

from .basis import EmpiricalBasis, design_matrix
from .dyadic import code_to_gamma, gamma_to_code, child_codes, point_codes


def fit_coefficients(basis, sample):
    """Empirical coefficients of the responses against every basis function.

    The sample must be the one the basis was built from.  Bulk sums are
    grouped by cube (pairwise-accurate bincount); per-function reductions
    run over at most 2^d child sums.
    """
    if sample.responses is None:
        raise ValueError("sample has no responses to fit")
    if sample.n != basis.n:
        raise ValueError("sample size %d does not match basis (%d)"
                         % (sample.n, basis.n))
    pts, y = sample.points, sample.responses
    n = basis.n
    a = np.zeros(basis.size)
    codes0, ok0 = point_codes(pts, basis.j0, basis.j0, basis.w)
    if len(basis.father_keys) and ok0.any():
        keys, inv = np.unique(codes0[ok0], return_inverse=True)
        ysum = np.bincount(inv, weights=y[ok0])
        pos = np.minimum(np.searchsorted(basis.father_keys, keys),
                         len(basis.father_keys) - 1)
        hit = basis.father_keys[pos] == keys
        a[pos[hit]] = ysum[hit] * basis.father_vals[pos[hit]] / n
    for j in range(basis.j0, basis.j1):
        off, parents, _, ckeys, values = basis.level_block(j)
        if len(parents) == 0:
            continue
        codes, ok = point_codes(pts, j + 1, basis.j0, basis.w)
        keys, inv = np.unique(codes[ok], return_inverse=True)
        ysum = np.bincount(inv, weights=y[ok])
        pos = np.minimum(np.searchsorted(keys, ckeys), len(keys) - 1)
        found = keys[pos] == ckeys
        ys = np.where(found, ysum[pos], 0.0)
        a[off:off + len(parents)] = (values * ys).sum(axis=1) / n
    return a


def threshold(coefficients, lam):
    """Indices of coefficients strictly above the threshold in magnitude."""
    if lam < 0:
        raise ValueError("threshold must be nonnegative")
    return np.nonzero(np.abs(np.asarray(coefficients)) > lam)[0]


def truncate(value, bound):
    """Clamp to [-bound, bound]."""
    if bound < 0:
        raise ValueError("truncation bound must be nonnegative")
    return np.clip(value, -bound, bound)


@dataclass(frozen=True)
class ThresholdedModel:
    """Fitted expansion restricted to the selected coefficients.

    Prediction sums the selected terms in canonical basis order and then
    truncates at beta.  Immutable and safe to share across processes.
    """

    basis: EmpiricalBasis
    coefficients: np.ndarray
    selected: np.ndarray
    lam: float
    beta: float

    def predict(self, points):
        masked = np.zeros(self.basis.size)
        masked[self.selected] = np.asarray(self.coefficients)[self.selected]
        raw = design_matrix(self.basis, points) @ masked
        return truncate(raw, self.beta)

    def predict_point(self, point):
        return float(self.predict(np.asarray(point, dtype=float)[None, :])[0])


def fit_model(basis, sample, lam, beta=None):
    """Fit coefficients, hard-threshold at lam, truncate at beta.

    beta defaults to the largest absolute response of the training sample.
    """
    a = fit_coefficients(basis, sample)
    if beta is None:
        beta = float(np.max(np.abs(sample.responses))) if sample.n else 0.0
    return ThresholdedModel(basis=basis, coefficients=a,
                            selected=threshold(a, lam), lam=float(lam),
                            beta=float(beta))


def penalized_objective(basis, sample, subset, lam):
    """Mean squared residual of the subset expansion plus lam^2 * |subset|."""
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size and (subset.min() < 0 or subset.max() >= basis.size):
        raise ValueError("subset indices out of range")
    if len(np.unique(subset)) != len(subset):
        raise ValueError("subset contains duplicate indices")
    a = fit_coefficients(basis, sample)
    masked = np.zeros(basis.size)
    masked[subset] = a[subset]
    pred = design_matrix(basis, sample.points) @ masked
    resid = sample.responses - pred
    return float(np.mean(resid ** 2) + lam ** 2 * len(subset))


def save_model(model, path):
    """Write the selected part of a model as JSON, enough to predict exactly."""
    basis = model.basis
    records = []
    sel = set(int(i) for i in model.selected)
    idx = 0
    for key, val in zip(basis.father_keys, basis.father_vals):
        if idx in sel:
            gamma = code_to_gamma(np.array([key]), basis.j0, basis.j0,
                                  basis.w, basis.d)[0]
            records.append({"kind": "father", "level": basis.j0,
                            "gamma": [int(g) for g in gamma], "v": 0,
                            "values": [float(val)],
                            "coefficient": float(model.coefficients[idx])})
        idx += 1
    for j in range(basis.j0, basis.j1):
        _, parents, us, _, values = basis.level_block(j)
        for key, u, vals in zip(parents, us, values):
            if idx in sel:
                gamma = code_to_gamma(np.array([key]), j, basis.j0,
                                      basis.w, basis.d)[0]
                records.append({"kind": "mother", "level": int(j),
                                "gamma": [int(g) for g in gamma], "v": int(u),
                                "values": [float(v) for v in vals],
                                "coefficient": float(model.coefficients[idx])})
            idx += 1
    payload = {"lambda": float(model.lam), "beta": float(model.beta),
               "j0": basis.j0, "j1": basis.j1, "w": basis.w, "d": basis.d,
               "n": basis.n, "functions": records}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def load_model(path):
    """Rebuild a ThresholdedModel from save_model output."""
    with open(path) as fh:
        data = json.load(fh)
    j0, j1, w, d, n = (data[k] for k in ("j0", "j1", "w", "d", "n"))
    nslots = 1 << d
    fathers, mothers, coeffs_f, coeffs_m = [], {}, [], {}
    for rec in data["functions"]:
        code = int(gamma_to_code(rec["gamma"], rec["level"], j0, w)[0])
        if rec["kind"] == "father":
            fathers.append((code, rec["values"][0], rec["coefficient"]))
        else:
            mothers.setdefault(rec["level"], []).append(
                (code, rec["v"], rec["values"], rec["coefficient"]))
    fathers.sort()
    father_keys = np.array([f[0] for f in fathers], dtype=np.int64)
    father_vals = np.array([f[1] for f in fathers], dtype=float)
    coeffs = [f[2] for f in fathers]
    mother_levels = {}
    for j in range(j0, j1):
        recs = sorted(mothers.get(j, []), key=lambda r: (r[0], r[1]))
        parents = np.array([r[0] for r in recs], dtype=np.int64)
        us = np.array([r[1] for r in recs], dtype=np.int64)
        values = (np.array([r[2] for r in recs], dtype=float)
                  if recs else np.empty((0, nslots)))
        ckeys = (child_codes(parents, j, j0, w, d) if len(parents)
                 else np.empty((0, nslots), dtype=np.int64))
        mother_levels[j] = (parents, us, ckeys, values)
        coeffs.extend(r[3] for r in recs)
    basis = EmpiricalBasis(j0, j1, w, d, n, father_keys, father_vals,
                           mother_levels)
    coeffs = np.asarray(coeffs, dtype=float)
    return ThresholdedModel(basis=basis, coefficients=coeffs,
                            selected=np.arange(basis.size), lam=data["lambda"],
                            beta=data["beta"])
