"""Command line interface.

Subcommands: simulate (field or regression snapshots), eta-range, fit
(threshold a model on a sample file), experiment (Monte Carlo sweep) and
rate-probe.  A JSON config file can supply any long option; explicit flags
win over file values.
"""

import argparse
import json
import sys

import numpy as np

from . import estimator, harness, mrf
from .basis import build_basis
from .dyadic import build_index


def _parse_size(text):
    if "x" in str(text):
        a, b = str(text).lower().split("x")
        return int(a), int(b)
    return int(text), int(text)


def _parse_floats(text):
    return tuple(float(v) for v in str(text).split(","))


def _parse_ints(text):
    return tuple(int(v) for v in str(text).split(","))


def _add_lattice_flags(p):
    p.add_argument("--size", default="40x40",
                   help="lattice dimensions, e.g. 40x40 or 40")
    p.add_argument("--boundary", choices=["free", "torus"], default="free")


def _add_model_flags(p):
    p.add_argument("--resolution", type=int, default=5,
                   help="finest dyadic level j1")
    p.add_argument("--j0", type=int, default=0, help="base dyadic level")
    p.add_argument("--w", type=int, default=1, help="domain half-width")


def build_parser():
    top = argparse.ArgumentParser(prog="haarfield",
                                  description=__doc__.splitlines()[0])
    top.add_argument("--config", help="JSON file of defaults for any option")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a field or regression snapshot")
    _add_lattice_flags(p)
    p.add_argument("--eta", type=float, default=0.25)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--tau2", type=float, default=1.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rho", type=float, default=0.7,
                   help="cross-correlation of the two design components")
    p.add_argument("--design", choices=["a", "b"],
                   help="with --regression, emit a labeled sample")
    p.add_argument("--regression", choices=["m1", "m2"])
    p.add_argument("--out", required=True)

    p = sub.add_parser("eta-range", help="print the admissible eta interval")
    _add_lattice_flags(p)
    p.add_argument("--method", choices=["auto", "dense", "power"],
                   default="auto")

    p = sub.add_parser("fit", help="fit a thresholded model to a sample file")
    p.add_argument("--sample", required=True, help="s1,s2,x1,x2,y snapshot")
    p.add_argument("--lambda", dest="lam", type=float, default=0.08)
    p.add_argument("--beta", type=float,
                   help="truncation bound (default: max |y|)")
    _add_model_flags(p)
    p.add_argument("--out", required=True, help="model JSON path")

    p = sub.add_parser("experiment", help="run one Monte Carlo cell")
    _add_lattice_flags(p)
    p.add_argument("--eta", type=float, default=0.25)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--design", choices=["a", "b"], default="a")
    p.add_argument("--regression", choices=["m1", "m2"], default="m1")
    p.add_argument("--mode", choices=["dependent", "independent"],
                   default="dependent")
    p.add_argument("--lambda-grid", type=_parse_floats,
                   default=harness.DEFAULT_GRID, metavar="L1,L2,...")
    _add_model_flags(p)
    p.add_argument("--beta", type=float)
    p.add_argument("--rho", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="write results here (default: stdout)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("rate-probe",
                       help="error versus size along a lattice ladder")
    p.add_argument("--sizes", type=_parse_ints, default=(10, 20, 40),
                   metavar="N1,N2,...")
    p.add_argument("--boundary", choices=["free", "torus"], default="free")
    p.add_argument("--eta", type=float, default=0.25)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--replications", type=int, default=10)
    p.add_argument("--design", choices=["a", "b"], default="a")
    p.add_argument("--regression", choices=["m1", "m2"], default="m1")
    p.add_argument("--mode", choices=["dependent", "independent"],
                   default="independent")
    p.add_argument("--smoothness", type=float, default=1.0)
    p.add_argument("--tail", type=float, default=4.0)
    p.add_argument("--moment", type=float)
    p.add_argument("--unbounded", action="store_true",
                   help="use the unbounded-design schedule branch")
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--c1", type=float, default=1e-4)
    p.add_argument("--c2", type=float, default=6.0)
    p.add_argument("--j0", type=int, default=0)
    p.add_argument("--w", type=int, default=1)
    p.add_argument("--rho", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    return top


def _apply_config_file(parser, argv):
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if known.config:
        with open(known.config) as fh:
            values = json.load(fh)
        flat = {k.replace("-", "_"): v for k, v in values.items()}
        for action in parser._subparsers._group_actions[0].choices.values():
            usable = {k: v for k, v in flat.items()
                      if any(a.dest == k for a in action._actions)}
            action.set_defaults(**usable)
    return parser.parse_args(argv)


def cmd_simulate(args):
    graph = mrf.LatticeGraph(_parse_size(args.size), args.boundary)
    spec = mrf.experiment_car_spec(args.eta, rho=args.rho, alpha=args.alpha,
                                   tau2=args.tau2)
    if args.design or args.regression:
        if not (args.design and args.regression):
            raise SystemExit("--design and --regression go together")
        sample = mrf.make_regression_sample(graph, spec, args.design,
                                            args.regression, args.iterations,
                                            args.seed)
        mrf.save_sample_snapshot(args.out, sample)
    else:
        cover = mrf.conclique_cover(graph)
        state = mrf.gibbs_run(graph, cover, spec, args.iterations, args.seed)
        mrf.save_field_snapshot(args.out, graph, state.values)
    print("wrote %s" % args.out)


def cmd_eta_range(args):
    graph = mrf.LatticeGraph(_parse_size(args.size), args.boundary)
    lo, hi = mrf.admissible_eta_range(graph, method=args.method)
    print("(%.12g, %.12g)" % (lo, hi))


def cmd_fit(args):
    sample = mrf.load_sample_snapshot(args.sample)
    index = build_index(sample, args.j0, args.resolution, args.w)
    basis = build_basis(index)
    model = estimator.fit_model(basis, sample, args.lam, beta=args.beta)
    estimator.save_model(model, args.out)
    print("fitted %d of %d functions, wrote %s"
          % (len(model.selected), basis.size, args.out))


def cmd_experiment(args):
    cfg = harness.ExperimentConfig(
        size=_parse_size(args.size), boundary=args.boundary, eta=args.eta,
        iterations=args.iterations, replications=args.replications,
        design=args.design, regression=args.regression, mode=args.mode,
        lambda_grid=tuple(args.lambda_grid), resolution=args.resolution,
        j0=args.j0, w=args.w, beta=args.beta, rho=args.rho, seed=args.seed,
        workers=args.workers)
    rows = harness.run_experiment(cfg)
    if args.out:
        harness.export(rows, args.out, args.format)
        print("wrote %s" % args.out)
    else:
        for r in rows:
            print("lambda=%g mean_l2=%#.6g sd_l2=%#.6g"
                  % (r.lam, r.mean_l2, r.sd_l2))


def cmd_rate_probe(args):
    cfg = harness.ExperimentConfig(
        boundary=args.boundary, eta=args.eta, iterations=args.iterations,
        replications=args.replications, design=args.design,
        regression=args.regression, mode=args.mode, j0=args.j0, w=args.w,
        rho=args.rho, seed=args.seed, workers=args.workers)
    rows, slope = harness.rate_probe(
        cfg, args.sizes, smoothness=args.smoothness, tail=args.tail,
        moment=args.moment, c0=args.c0, c1=args.c1, c2=args.c2,
        bounded=not args.unbounded)
    for n_sites, err in rows:
        print("n=%d mean_l2=%#.6g" % (n_sites, err))
    print("slope=%.4f" % slope)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = _apply_config_file(parser, argv)
    handlers = {"simulate": cmd_simulate, "eta-range": cmd_eta_range,
                "fit": cmd_fit, "experiment": cmd_experiment,
                "rate-probe": cmd_rate_probe}
    handlers[args.command](args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
