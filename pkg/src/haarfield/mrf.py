"""Gaussian conditional autoregression on 2-D lattices, sampled by conclique.

Sites of a rectangular lattice split into two concliques by checkerboard
parity; no two sites of the same color are neighbors, so a whole conclique
can be redrawn at once from its conditional law.  One Gibbs iteration
updates color 1 then color 2.  The conditional spec at a site v is

    Y(v) | rest  ~  N(alpha + eta * sum_w (Y(w) - alpha), tau2)

over the 4-neighborhood.  eta is admissible when 1 - eta * h has positive
eigenvalues for every adjacency eigenvalue h, which on these lattices is the
open interval (1/h_min, 1/h_max); the joint law is then centered at alpha
with covariance tau2 * (I - eta * H)^-1.  Multiple components share the
lattice and couple only through the cross-correlation rho0 of their
per-site innovations, which is also the stationary cross-component
correlation at each site.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
import scipy.special

from . import kernels
from .dyadic import LabeledSample

MAX_DENSE_EIG = 400
MAX_ANALYTIC_SITES = 2500
POWER_TOL = 1e-10


class NonBipartite(ValueError):
    """Lattice admits no checkerboard 2-coloring (odd torus dimension)."""


class InadmissibleEta(ValueError):
    """eta outside the open admissible interval of the lattice."""


class NotPositiveDefinite(ValueError):
    """I - eta*H is not positive definite at the requested eta."""


@dataclass(frozen=True)
class LatticeGraph:
    """Rectangular 2-D lattice with 4-neighborhoods, free or torus boundary.

    Sites are ordered lexicographically in (s1, s2) with 1-based coordinates.
    """

    dims: tuple
    boundary: str = "free"

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        if len(self.dims) != 2 or min(self.dims) < 1:
            raise ValueError("dims must be two positive integers")
        if self.boundary not in ("free", "torus"):
            raise ValueError("boundary must be 'free' or 'torus'")
        if self.boundary == "torus" and any(n == 2 for n in self.dims):
            raise ValueError("torus wrap needs each dimension to be 1 or >= 3")

    @property
    def n_sites(self):
        return self.dims[0] * self.dims[1]

    def site_array(self):
        """(V, 2) array of 1-based site coordinates in site order."""
        n1, n2 = self.dims
        s1, s2 = np.divmod(np.arange(self.n_sites), n2)
        return np.column_stack([s1 + 1, s2 + 1]).astype(np.int64)

    def neighbor_array(self):
        """(V, 4) neighbor site indices; missing neighbors point at row V."""
        n1, n2 = self.dims
        V = self.n_sites
        idx = np.arange(V)
        r, c = np.divmod(idx, n2)
        out = np.empty((V, 4), dtype=np.int64)
        steps = ((-1, 0), (1, 0), (0, -1), (0, 1))
        for k, (dr, dc) in enumerate(steps):
            rr, cc = r + dr, c + dc
            if self.boundary == "torus":
                # wrap only along axes long enough to avoid self loops
                if n1 > 1:
                    rr = rr % n1
                if n2 > 1:
                    cc = cc % n2
            ok = (rr >= 0) & (rr < n1) & (cc >= 0) & (cc < n2)
            out[:, k] = np.where(ok, rr * n2 + cc, V)
        return out

    def adjacency(self):
        """Dense symmetric 0/1 adjacency matrix (counts double edges once)."""
        V = self.n_sites
        nbr = self.neighbor_array()
        A = np.zeros((V, V))
        for k in range(4):
            ok = nbr[:, k] < V
            A[np.arange(V)[ok], nbr[ok, k]] = 1.0
        return np.maximum(A, A.T)

    def is_bipartite(self):
        if self.boundary == "free":
            return True
        n1, n2 = self.dims
        return (n1 % 2 == 0 or n1 == 1) and (n2 % 2 == 0 or n2 == 1)


@dataclass(frozen=True, eq=False)
class ConcliqueCover:
    """Partition of the sites into concliques (no within-color edges)."""

    colors: np.ndarray
    n_colors: int

    def sites_by_color(self):
        return [np.nonzero(self.colors == c)[0].astype(np.int64)
                for c in range(1, self.n_colors + 1)]


def conclique_cover(graph):
    """Checkerboard 2-cover of a lattice; fails when not 2-colorable."""
    sites = graph.site_array()
    colors = (1 + (sites.sum(axis=1) % 2)).astype(np.int64)
    nbr = graph.neighbor_array()
    padded = np.append(colors, 0)
    for k in range(4):
        clash = padded[nbr[:, k]] == colors
        if clash.any():
            raise NonBipartite("lattice is not 2-colorable by checkerboard "
                               "parity (odd torus dimension)")
    return ConcliqueCover(colors=colors, n_colors=int(colors.max()))


def _neighbor_matvec(nbr):
    """Adjacency matvec with fixed pairwise accumulation order."""
    def matvec(v):
        vp = np.append(v, 0.0)
        cols = vp[nbr]
        return (cols[:, 0] + cols[:, 1]) + (cols[:, 2] + cols[:, 3])
    return matvec


def _power_top(matvec, v0, tol=POWER_TOL, maxit=200000):
    """Dominant eigenvalue of a symmetric operator by power iteration.

    Stops when the residual norm is below tol * |theta|, which bounds the
    eigenvalue error by the same amount for symmetric operators.
    """
    v = v0 / np.linalg.norm(v0)
    for _ in range(maxit):
        av = matvec(v)
        vv = float(np.dot(v, v))
        theta = float(np.dot(v, av)) / vv
        resid = np.linalg.norm(av - theta * v) / math.sqrt(vv)
        if resid <= tol * max(abs(theta), 1e-12):
            return theta
        nrm = np.linalg.norm(av)
        if nrm == 0:
            raise RuntimeError("power iteration start vector annihilated")
        v = av / nrm
    raise RuntimeError("power iteration did not converge in %d steps" % maxit)


@lru_cache(maxsize=None)
def adjacency_extremes(graph, method="auto"):
    """(h_min, h_max) adjacency eigenvalue extremes of a lattice graph.

    method 'dense' uses a full symmetric eigensolve (small graphs only),
    'power' uses shifted power iteration; 'auto' picks dense for small
    graphs.
    """
    V = graph.n_sites
    if method == "auto":
        method = "dense" if V <= MAX_DENSE_EIG else "power"
    if method == "dense":
        if V > MAX_DENSE_EIG:
            raise ValueError("dense eigensolve limited to %d sites"
                             % MAX_DENSE_EIG)
        eig = np.linalg.eigvalsh(graph.adjacency())
        h_max = float(eig[-1])
        # bipartite spectra are symmetric; reuse the top end exactly
        h_min = -h_max if graph.is_bipartite() else float(eig[0])
        return h_min, h_max
    if method != "power":
        raise ValueError("method must be 'auto', 'dense' or 'power'")
    nbr = graph.neighbor_array()
    matvec = _neighbor_matvec(nbr)
    shift = 4.0
    ones = np.ones(V)
    h_max = _power_top(lambda v: matvec(v) + shift * v, ones) - shift
    if graph.is_bipartite():
        h_min = -h_max
    else:
        rng = np.random.Generator(np.random.Philox(20210925))
        start = rng.standard_normal(V)
        h_min = shift - _power_top(lambda v: shift * v - matvec(v), start)
    return float(h_min), float(h_max)


def admissible_eta_range(graph, method="auto"):
    """Open interval of eta for which I - eta*H stays positive definite."""
    if max(graph.dims) == 1:
        raise ValueError("lattice has no edges")
    h_min, h_max = adjacency_extremes(graph, method)
    hi = 1.0 / h_max if h_max > 0 else math.inf
    lo = 1.0 / h_min if h_min < 0 else -math.inf
    return lo, hi


@dataclass(frozen=True, eq=False)
class CarSpec:
    """Conditional autoregression parameters for p coupled components.

    rho0 is the innovation cross-correlation matrix (identity when None);
    it equals the stationary per-site cross-component correlation.
    """

    eta: float
    alpha: float = 0.0
    tau2: float = 1.0
    components: int = 1
    rho0: np.ndarray = None

    def __post_init__(self):
        if self.tau2 <= 0:
            raise ValueError("tau2 must be positive")
        if self.components < 1:
            raise ValueError("components must be at least 1")
        if self.rho0 is not None:
            r = np.asarray(self.rho0, dtype=float)
            p = self.components
            if r.shape != (p, p):
                raise ValueError("rho0 must be (%d, %d)" % (p, p))
            if not np.allclose(r, r.T, atol=1e-12):
                raise ValueError("rho0 must be symmetric")
            if not np.allclose(np.diag(r), 1.0, atol=1e-12):
                raise ValueError("rho0 must have unit diagonal")
            object.__setattr__(self, "rho0", r)

    def innovation_factor(self):
        """Lower-triangular L with L L^T = tau2 * rho0."""
        r = self.rho0 if self.rho0 is not None else np.eye(self.components)
        try:
            chol = np.linalg.cholesky(r)
        except np.linalg.LinAlgError:
            raise ValueError("rho0 is not positive definite") from None
        return math.sqrt(self.tau2) * chol


def conditional_update(neighbor_values, spec):
    """(mean, variance) of one site given its present neighbor values."""
    dev = np.asarray(neighbor_values, dtype=float) - spec.alpha
    return spec.alpha + spec.eta * float(dev.sum()), spec.tau2


@dataclass(frozen=True, eq=False)
class FieldState:
    """Field values (V, p) after a number of Gibbs iterations."""

    values: np.ndarray
    iterations: int


def _seed_seq(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def _check_admissible(graph, eta):
    lo, hi = admissible_eta_range(graph)
    if not lo < eta < hi:
        raise InadmissibleEta("eta=%g outside admissible (%g, %g)"
                              % (eta, lo, hi))


def _sweep(state, nbr, order, eta, alpha, rng, L):
    """One full Gibbs iteration: redraw each conclique in color order.

    Innovations for the whole iteration are drawn up front in site order
    from a counter-based generator, so the result is independent of how the
    within-color updates are scheduled and of the kernel backend.
    """
    V, p = state.shape[0] - 1, state.shape[1]
    eps = rng.standard_normal((V, p))
    innov = eps @ L.T
    for sites in order:
        kernels.conclique_update(state, nbr, sites, eta, alpha, innov)


def gibbs_run(graph, cover, spec, iterations, seed):
    """Run the conclique Gibbs sampler from an iid N(alpha, tau2) start.

    Bit-reproducible for fixed (graph, cover, spec, iterations, seed).
    """
    if iterations < 0:
        raise ValueError("iterations must be nonnegative")
    if len(cover.colors) != graph.n_sites:
        raise ValueError("cover does not match graph")
    _check_admissible(graph, spec.eta)
    V, p = graph.n_sites, spec.components
    L = spec.innovation_factor()
    rng = np.random.Generator(np.random.Philox(_seed_seq(seed)))
    state = np.empty((V + 1, p))
    state[V] = spec.alpha
    state[:V] = spec.alpha + rng.standard_normal((V, p)) @ L.T
    nbr = graph.neighbor_array()
    order = cover.sites_by_color()
    for _ in range(iterations):
        _sweep(state, nbr, order, spec.eta, spec.alpha, rng, L)
    return FieldState(values=state[:V].copy(), iterations=iterations)


def sample_stationary_fields(graph, eta, n_draws, seed, alpha=0.0, tau2=1.0,
                             burn_in=500, thin=5, stack=64):
    """(n_draws, V) near-stationary field draws for Monte Carlo checks.

    Runs `stack` independent single-component chains in one state tensor,
    discards burn_in iterations, then harvests every thin-th iteration.
    """
    _check_admissible(graph, eta)
    V = graph.n_sites
    spec = CarSpec(eta=eta, alpha=alpha, tau2=tau2, components=stack)
    L = spec.innovation_factor()
    rng = np.random.Generator(np.random.Philox(_seed_seq(seed)))
    state = np.empty((V + 1, stack))
    state[V] = alpha
    state[:V] = alpha + rng.standard_normal((V, stack)) @ L.T
    nbr = graph.neighbor_array()
    order = conclique_cover(graph).sites_by_color()
    for _ in range(burn_in):
        _sweep(state, nbr, order, eta, alpha, rng, L)
    out = []
    remaining = n_draws
    while remaining > 0:
        for _ in range(thin):
            _sweep(state, nbr, order, eta, alpha, rng, L)
        out.append(state[:V].T.copy())
        remaining -= stack
    return np.concatenate(out)[:n_draws]


def analytic_covariance(graph, spec):
    """Stationary covariance tau2 * (I - eta*H)^-1 (dense, small graphs)."""
    V = graph.n_sites
    if V > MAX_ANALYTIC_SITES:
        raise ValueError("analytic covariance limited to %d sites"
                         % MAX_ANALYTIC_SITES)
    M = np.eye(V) - spec.eta * graph.adjacency()
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("I - eta*H is not positive definite at "
                                  "eta=%g" % spec.eta) from None
    cov = spec.tau2 * np.linalg.inv(M)
    return (cov + cov.T) / 2.0


def stationary_sd(graph, spec):
    """Per-site stationary standard deviation of each component."""
    if graph.n_sites <= MAX_ANALYTIC_SITES:
        one = CarSpec(eta=spec.eta, alpha=0.0, tau2=spec.tau2)
        return np.sqrt(np.diag(analytic_covariance(graph, one)))
    # large lattice: estimate from a fixed-seed pilot run
    draws = sample_stationary_fields(graph, spec.eta, 4096, seed=777,
                                     tau2=spec.tau2, burn_in=800, thin=4)
    return draws.std(axis=0)


def transform_a(z):
    """Probability integral transform 2*Phi(z) - 1 onto (-1, 1)."""
    return scipy.special.erf(np.asarray(z, dtype=float) / math.sqrt(2.0))


def transform_b(x):
    """Piecewise-linear mass shift on [-1, 1].

    On the unit scale u = (x+1)/2, the lowest tenth of the range stretches
    onto [0, 0.5) and the rest compresses onto [0.5, 1], so about 10% of a
    uniform sample lands below 0 after mapping back.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1):
        raise ValueError("transform_b input outside [-1, 1]")
    u = (x + 1.0) / 2.0
    up = np.where(u < 0.1, 5.0 * u, 0.4 / 0.9 + (0.5 / 0.9) * u)
    return 2.0 * up - 1.0


def m1(points):
    """Quadratic bowl with the sign flipped outside the disc of radius 1/2."""
    pts = np.asarray(points, dtype=float)
    pts = pts[None, :] if pts.ndim == 1 else pts
    inside = pts[:, 0] ** 2 + pts[:, 1] ** 2 <= 0.25
    vals = m2(pts)
    return np.where(inside, vals, -vals)


def m2(points):
    """Smooth quadratic regression surface on [-1, 1]^2."""
    pts = np.asarray(points, dtype=float)
    pts = pts[None, :] if pts.ndim == 1 else pts
    return 4.0 + 6.0 * pts[:, 0] ** 2 - 4.0 * pts[:, 1] ** 2


REGRESSIONS = {"m1": m1, "m2": m2}


def experiment_car_spec(eta, rho=0.7, alpha=0.0, tau2=1.0):
    """Three-component spec: corr(Z1, Z2) = rho, Z3 independent."""
    rho0 = np.array([[1.0, rho, 0.0], [rho, 1.0, 0.0], [0.0, 0.0, 1.0]])
    return CarSpec(eta=eta, alpha=alpha, tau2=tau2, components=3, rho0=rho0)


def make_regression_sample(graph, spec, design, regression, iterations, seed,
                           site_sd=None, noise_scale=None):
    """Draw one lattice field and turn it into a labeled regression sample.

    Components 1 and 2 are standardized per site, pushed through the
    probability integral transform (design 'a') and optionally the mass
    shift on the second coordinate (design 'b'); component 3, likewise
    standardized, is the unit noise.  site_sd overrides the stationary
    standard deviations when the caller has them precomputed.
    """
    if spec.components != 3:
        raise ValueError("regression sampling needs a 3-component spec")
    r = spec.rho0 if spec.rho0 is not None else np.eye(3)
    if r[0, 2] != 0.0 or r[1, 2] != 0.0:
        raise ValueError("noise component must be uncorrelated with the design")
    if design not in ("a", "b"):
        raise ValueError("design must be 'a' or 'b'")
    truth = REGRESSIONS[regression] if isinstance(regression, str) else regression
    cover = conclique_cover(graph)
    field = gibbs_run(graph, cover, spec, iterations, seed)
    if site_sd is None:
        site_sd = stationary_sd(graph, spec)
    z = (field.values - spec.alpha) / np.asarray(site_sd)[:, None]
    x1 = transform_a(z[:, 0])
    x2 = transform_a(z[:, 1])
    if design == "b":
        x2 = transform_b(x2)
    pts = np.column_stack([x1, x2])
    eps = z[:, 2]
    if noise_scale is None:
        scale = 1.0
    elif callable(noise_scale):
        scale = np.asarray(noise_scale(pts))
    else:
        scale = float(noise_scale)
    y = truth(pts) + scale * eps
    return LabeledSample(points=pts, responses=y, sites=graph.site_array())


# ---------------------------------------------------------------- snapshots

def save_field_snapshot(path, graph, values):
    """Write raw field values as s1,s2,z1,...,zp rows in site order."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != graph.n_sites:
        raise ValueError("values do not match the lattice size")
    sites = graph.site_array()
    p = values.shape[1]
    with open(path, "w") as fh:
        fh.write("s1,s2," + ",".join("z%d" % (i + 1) for i in range(p)) + "\n")
        for site, row in zip(sites, values):
            fh.write("%d,%d," % (site[0], site[1]))
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def save_sample_snapshot(path, sample):
    """Write a labeled 2-D regression sample as s1,s2,x1,x2,y rows."""
    if sample.sites is None or sample.responses is None or sample.d != 2:
        raise ValueError("snapshot needs sites, responses and 2-D points")
    with open(path, "w") as fh:
        fh.write("s1,s2,x1,x2,y\n")
        for site, pt, y in zip(sample.sites, sample.points, sample.responses):
            fh.write("%d,%d,%s,%s,%s\n"
                     % (site[0], site[1], repr(float(pt[0])),
                        repr(float(pt[1])), repr(float(y))))


def load_sample_snapshot(path):
    """Read a s1,s2,x1,x2,y snapshot back into a LabeledSample."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != ["s1", "s2", "x1", "x2", "y"]:
            raise ValueError("unexpected snapshot header in %s" % path)
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return LabeledSample(points=data[:, 2:4], responses=data[:, 4],
                         sites=data[:, 0:2].astype(np.int64))


def load_field_snapshot(path):
    """Read a raw field snapshot; returns (sites, values)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["s1", "s2"] or not all(
                h.startswith("z") for h in header[2:]):
            raise ValueError("unexpected snapshot header in %s" % path)
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return data[:, 0:2].astype(np.int64), data[:, 2:]
