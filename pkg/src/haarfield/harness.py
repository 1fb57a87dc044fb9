"""Monte Carlo experiment engine for the thresholded lattice estimator.

Each replication draws a learning sample (a Gibbs lattice field, or its iid
counterpart with the same marginals), fits the empirical Haar expansion
once, then scores every threshold on a fresh iid design sample against the
true regression function.  Replication seeds derive from the base seed and
the replication index through separate streams for the chain, the iid
learning sample and the test sample, so dependent and independent runs of
the same base seed score on identical test points and results do not depend
on the worker count.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
import functools
import json
import math

import numpy as np

from .basis import build_basis, design_matrix
from .dyadic import LabeledSample, build_index
from .estimator import fit_coefficients, truncate
from .mrf import (LatticeGraph, REGRESSIONS, admissible_eta_range,
                  experiment_car_spec, make_regression_sample, stationary_sd,
                  transform_a, transform_b)

_ROLE_CHAIN, _ROLE_LEARN, _ROLE_TEST = 0, 1, 2

DEFAULT_GRID = (0.0, 0.04, 0.08, 0.12, 0.16, 0.2)


@dataclass
class ExperimentConfig:
    """Everything one experiment cell needs; validate() before running."""

    size: tuple = (40, 40)
    boundary: str = "free"
    eta: float = 0.25
    iterations: int = 1000
    replications: int = 1
    design: str = "a"
    regression: str = "m1"
    mode: str = "dependent"
    lambda_grid: tuple = DEFAULT_GRID
    resolution: int = 5
    j0: int = 0
    w: int = 1
    beta: float = None
    rho: float = 0.7
    seed: int = 0
    workers: int = 1

    def validate(self):
        if len(self.size) != 2 or min(self.size) < 1:
            raise ValueError("size must be two positive lattice dimensions")
        if self.design not in ("a", "b"):
            raise ValueError("design must be 'a' or 'b'")
        if self.regression not in REGRESSIONS:
            raise ValueError("regression must be one of %s"
                             % sorted(REGRESSIONS))
        if self.mode not in ("dependent", "independent"):
            raise ValueError("mode must be 'dependent' or 'independent'")
        grid = tuple(self.lambda_grid)
        if not grid or any((not np.isfinite(l)) or l < 0 for l in grid):
            raise ValueError("lambda grid must be nonempty and nonnegative")
        if self.resolution < self.j0:
            raise ValueError("resolution below base level j0")
        if self.w < 1:
            raise ValueError("w must be a positive integer")
        if self.iterations < 0 or self.replications < 1 or self.workers < 1:
            raise ValueError("iterations, replications, workers out of range")
        if self.beta is not None and self.beta < 0:
            raise ValueError("beta must be nonnegative when fixed")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")
        return self


@dataclass
class ResultRow:
    lam: float
    design: str
    regression: str
    mode: str
    mean_l2: float
    sd_l2: float
    replications: int
    seed: int


def l2_error(model, truth, points):
    """Mean squared prediction error against a truth function."""
    points = np.asarray(points, dtype=float)
    if len(points) == 0:
        raise ValueError("need at least one evaluation point")
    return float(np.mean((model.predict(points) - truth(points)) ** 2))


def _spawn(seed, role, rep):
    return np.random.SeedSequence(int(seed), spawn_key=(role, rep))


def _iid_design(config, seed):
    """iid (points, noise) with the experiment's design marginals."""
    spec = experiment_car_spec(config.eta, config.rho)
    L = spec.innovation_factor()
    rng = np.random.Generator(np.random.Philox(seed))
    V = config.size[0] * config.size[1]
    z = rng.standard_normal((V, 3)) @ L.T
    x1 = transform_a(z[:, 0])
    x2 = transform_a(z[:, 1])
    if config.design == "b":
        x2 = transform_b(x2)
    return np.column_stack([x1, x2]), z[:, 2]


def independent_reference(config, seed):
    """iid learning sample matching the field sample's marginal law."""
    pts, eps = _iid_design(config, seed)
    truth = REGRESSIONS[config.regression]
    sites = LatticeGraph(config.size, config.boundary).site_array()
    return LabeledSample(points=pts, responses=truth(pts) + eps, sites=sites)


@dataclass
class _Plan:
    """Per-replication work order; picklable for the worker pool."""

    config: ExperimentConfig
    site_sd: np.ndarray = None


def _replication(plan, rep):
    cfg = plan.config
    truth = REGRESSIONS[cfg.regression]
    test_pts, _ = _iid_design(cfg, _spawn(cfg.seed, _ROLE_TEST, rep))
    if cfg.mode == "dependent":
        graph = LatticeGraph(cfg.size, cfg.boundary)
        spec = experiment_car_spec(cfg.eta, cfg.rho)
        learn = make_regression_sample(graph, spec, cfg.design, cfg.regression,
                                       cfg.iterations,
                                       _spawn(cfg.seed, _ROLE_CHAIN, rep),
                                       site_sd=plan.site_sd)
    else:
        learn = independent_reference(cfg, _spawn(cfg.seed, _ROLE_LEARN, rep))
    index = build_index(learn, cfg.j0, cfg.resolution, cfg.w)
    basis = build_basis(index)
    coeffs = fit_coefficients(basis, learn)
    beta = cfg.beta if cfg.beta is not None else float(np.max(np.abs(learn.responses)))
    F = design_matrix(basis, test_pts)
    truth_vals = truth(test_pts)
    out = np.empty(len(cfg.lambda_grid))
    for i, lam in enumerate(cfg.lambda_grid):
        masked = np.where(np.abs(coeffs) > lam, coeffs, 0.0)
        pred = truncate(F @ masked, beta)
        out[i] = np.mean((pred - truth_vals) ** 2)
    return out


def run_experiment(config):
    """All replications of one experiment cell; returns one row per lambda.

    Replications run in a process pool when workers > 1; results are
    aggregated in replication order either way, so output is byte-identical
    across worker counts.
    """
    config.validate()
    graph = LatticeGraph(config.size, config.boundary)
    lo, hi = admissible_eta_range(graph)
    if not lo < config.eta < hi:
        raise ValueError("eta=%g not admissible on this lattice (%g, %g)"
                         % (config.eta, lo, hi))
    site_sd = None
    if config.mode == "dependent":
        site_sd = stationary_sd(graph, experiment_car_spec(config.eta,
                                                           config.rho))
    plan = _Plan(config=config, site_sd=site_sd)
    work = functools.partial(_replication, plan)
    reps = range(config.replications)
    if config.workers > 1:
        chunk = max(1, math.ceil(config.replications / (config.workers * 4)))
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(work, reps, chunksize=chunk))
    else:
        results = [work(r) for r in reps]
    table = np.vstack(results)
    means = table.mean(axis=0)
    if config.replications > 1:
        sds = table.std(axis=0, ddof=1)
    else:
        sds = np.zeros(table.shape[1])
    return [ResultRow(lam=float(lam), design=config.design,
                      regression=config.regression, mode=config.mode,
                      mean_l2=float(mu), sd_l2=float(sd),
                      replications=config.replications, seed=config.seed)
            for lam, mu, sd in zip(config.lambda_grid, means, sds)]


def export(rows, path, fmt="csv"):
    """Write result rows; CSV uses 6 significant digits for the errors."""
    if fmt == "csv":
        lines = ["lambda,design,regression,mode,mean_l2,sd_l2,replications,seed"]
        for r in rows:
            lines.append("%g,%s,%s,%s,%#.6g,%#.6g,%d,%d"
                         % (r.lam, r.design, r.regression, r.mode,
                            r.mean_l2, r.sd_l2, r.replications, r.seed))
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        text = json.dumps([{"lambda": r.lam, "design": r.design,
                            "regression": r.regression, "mode": r.mode,
                            "mean_l2": r.mean_l2, "sd_l2": r.sd_l2,
                            "replications": r.replications, "seed": r.seed}
                           for r in rows], indent=1) + "\n"
    else:
        raise ValueError("format must be 'csv' or 'json'")
    with open(path, "w") as fh:
        fh.write(text)


@dataclass(frozen=True)
class RateSchedule:
    """Threshold, resolution and half-width from the asymptotic recipe."""

    r_tilde: float
    lambda2: float
    j1: int
    w: int = None


def theoretical_schedule(n, smoothness, tail, moment=None, c0=1.0, c1=1.0,
                         c2=5.0, bounded=True, d=2):
    """Rate-optimal (lambda^2, j1, w) for a lattice of side lengths n.

    The driver is r_tilde = (prod log n_i)^(3 + 4/tail) / |I_n|^(1/(N+1)).
    The bounded branch fixes w; the unbounded branch needs the moment
    parameter and also scales w.  Constants c0, c1, c2 are user choices.
    """
    n = tuple(int(v) for v in n)
    if len(n) == 0 or min(n) < 3:
        raise ValueError("every lattice dimension must be at least 3")
    if smoothness <= 0 or tail <= 0:
        raise ValueError("smoothness and tail must be positive")
    if min(c0, c1) <= 0:
        raise ValueError("schedule constants must be positive")
    N = len(n)
    r, tau = float(smoothness), float(tail)
    logs = [math.log(v) for v in n]
    r_tilde = math.prod(logs) ** (3.0 + 4.0 / tau) \
        / math.prod(n) ** (1.0 / (N + 1.0))
    log_r = math.log(r_tilde)
    if bounded:
        base = 2.0 * r + d * (1.0 + 2.0 / tau)
        lam2 = c1 * math.exp(((2.0 * r + d) / base) * log_r)
        j1 = math.floor(c2 - log_r / (math.log(2.0) * base))
        wk = None
    else:
        if moment is None or moment <= 0:
            raise ValueError("unbounded branch needs a positive moment "
                             "parameter")
        g = float(moment)
        denom = 2.0 * r * d * (1.0 + 2.0 / tau) \
            + g * (2.0 * r + d * (1.0 + 2.0 / tau))
        wk = math.floor(c0 * math.exp((-2.0 * r / denom) * log_r))
        lam2 = c1 * math.exp(((2.0 * r * d + (2.0 * r + d) * g) / denom)
                             * log_r)
        j1 = math.floor(c2 - (g / denom) * log_r / math.log(2.0))
        if wk < 1:
            raise ValueError("schedule gives w < 1; increase c0")
    if j1 < 1:
        raise ValueError("schedule gives resolution < 1; increase c2")
    return RateSchedule(r_tilde=r_tilde, lambda2=lam2, j1=j1, w=wk)


def rate_probe(config, sizes, smoothness=1.0, tail=4.0, moment=None,
               c0=1.0, c1=1e-4, c2=6.0, bounded=True):
    """Mean L2 error along a ladder of lattice sizes with scheduled tuning.

    Runs the configured experiment cell at each square size with the
    schedule's threshold and resolution (resolution clamped to
    [j0, j0 + 8] to keep the basis enumerable) and returns
    ([(n_sites, mean_l2), ...], fitted log-log slope).
    """
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 3:
        raise ValueError("size ladder needs at least 3 entries")
    rows = []
    for s in sizes:
        sched = theoretical_schedule((s, s), smoothness, tail, moment=moment,
                                     c0=c0, c1=c1, c2=c2, bounded=bounded)
        j1 = min(max(sched.j1, config.j0), config.j0 + 8)
        w = config.w if sched.w is None else sched.w
        cell = replace(config, size=(s, s),
                       lambda_grid=(math.sqrt(sched.lambda2),),
                       resolution=j1, w=w)
        res = run_experiment(cell)
        rows.append((s * s, res[0].mean_l2))
    xs = np.log([r[0] for r in rows])
    ys = np.log([max(r[1], 1e-300) for r in rows])
    slope = float(np.polyfit(xs, ys, 1)[0])
    return rows, slope
