"""Command-line interface.

Subcommands: ``sample``, ``density``, ``fit``, ``replicate``, ``marginals``
and ``preset``. Exit codes: 0 success, 2 validation error, 3 numerical
failure, 4 file access error.
"""

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np

from . import harness, io_formats
from .ecm import FitConfig, fit
from .errors import NumericalError, ValidationError
from .io_formats import FileAccessError
from .mvst import mvst_log_density, mvst_sample

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

logger = logging.getLogger("matskewt")


def cmd_sample(args):
    params = io_formats.read_params(args.params)
    if args.n_obs < 1:
        raise ValidationError("--n-obs must be >= 1")
    data = mvst_sample(np.random.default_rng(args.seed), params, args.n_obs)
    io_formats.write_dataset(args.out, data)


def cmd_density(args):
    params = io_formats.read_params(args.params)
    data = io_formats.read_dataset(args.data)
    if data.dims != params.shape:
        raise ValidationError(f"dataset is {data.dims}, params are {params.shape}")
    values = np.atleast_1d(mvst_log_density(data.observations, params))
    lines = ["observation,log_density"] + [f"{i},{float(v)!r}" for i, v in enumerate(values)]
    io_formats.write_text(args.out, "\n".join(lines) + "\n")


def cmd_fit(args):
    data = io_formats.read_dataset(args.data)
    config = io_formats.read_fit_config(args.config) if args.config else FitConfig()
    if args.max_iterations is not None:
        config = replace(config, max_iterations=args.max_iterations)
    result = fit(data, config)
    io_formats.write_fit_result(args.out, result)
    logger.info("iterations=%d converged=%s loglik=%r", result.iterations, result.converged, result.loglik_trace[-1])


def cmd_replicate(args):
    config = io_formats.read_sim_config(args.config)
    outcome = harness.replicate(config, out_dir=args.out_dir, workers=args.workers)
    failed = sum(d["failed"] for d in outcome.digests)
    logger.info("%s: %d replicates, %d failed", config.name, len(outcome.digests), failed)
    if outcome.summary is None:
        raise NumericalError("every replicate failed")


def cmd_marginals(args):
    harness.write_marginals(args.out, io_formats.read_dataset(args.data))


def cmd_preset(args):
    config = harness.simulation_config(args.simulation, replicates=args.replicates, n_obs=args.n_obs, base_seed=args.seed)
    io_formats.write_json(args.out, io_formats.sim_config_to_json(config))


def build_parser():
    parser = argparse.ArgumentParser(prog="matskewt", description="Matrix-variate skew-t sampling and ECM fitting.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a dataset from a parameter file")
    p.add_argument("--params", required=True)
    p.add_argument("--n-obs", "-N", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("density", help="per-observation log-densities")
    p.add_argument("--params", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("fit", help="fit MVST parameters by ECM")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("replicate", help="run a simulation study")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("marginals", help="long-format column marginal series")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_marginals)

    p = sub.add_parser("preset", help="write the simulation config for study 1 or 2")
    p.add_argument("simulation", type=int, choices=sorted(harness.SIMULATIONS))
    p.add_argument("--replicates", type=int, default=50)
    p.add_argument("--n-obs", "-N", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preset)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except FileAccessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
