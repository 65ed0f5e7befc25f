"""Simulation-study driver: replicate fits and marginal series."""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io_formats
from ._linalg import exact_sum
from .ecm import fit
from .errors import MatSkewTError
from .io_formats import SimConfig
from .mvst import MvstParams, mvst_sample

logger = logging.getLogger(__name__)

__all__ = [
    "SIGMA",
    "PSI",
    "SIMULATIONS",
    "simulation_params",
    "simulation_config",
    "ReplicationOutcome",
    "run_replicate",
    "replicate",
    "marginal_series",
    "write_marginals",
]

SIGMA = np.array([
    [1.0, 0.5, 0.1],
    [0.5, 1.0, 0.5],
    [0.1, 0.5, 1.0],
])
PSI = np.array([
    [1.0, -0.5, 0.5, 0.1],
    [-0.5, 1.0, -0.5, 0.6],
    [0.5, -0.5, 1.0, -0.4],
    [0.1, 0.6, -0.4, 1.0],
])
SIMULATIONS = {
    1: {
        "M": np.array([[0.0, 1.0, -1.0, 0.0], [1.0, 0.0, 0.0, -1.0], [0.0, 1.0, -1.0, 0.0]]),
        "A": np.array([[1.0, -1.0, 0.0, 1.0], [1.0, -1.0, 0.0, 1.0], [1.0, -1.0, 0.0, 1.0]]),
    },
    2: {
        "M": np.array([[1.0, -6.0, -1.0, -1.0], [-3.0, 5.0, -4.0, 1.0], [1.0, -4.0, -1.0, 5.0]]),
        "A": np.array([[1.0, -1.0, 0.5, 0.0], [0.5, -0.5, 0.5, 0.5], [0.0, 0.0, 0.5, 0.0]]),
    },
}
NU = 4.0


def simulation_params(which):
    """Generating parameters of simulation 1 or 2 (3x4, nu = 4)."""
    setup = SIMULATIONS[which]
    return MvstParams(setup["M"], setup["A"], SIGMA, PSI, NU)


def simulation_config(which, replicates=50, n_obs=100, base_seed=0, fit_config=None):
    kwargs = {} if fit_config is None else {"fit": fit_config}
    return SimConfig(
        params=simulation_params(which),
        n_obs=n_obs,
        replicates=replicates,
        base_seed=base_seed,
        name=f"simulation{which}",
        **kwargs,
    )


@dataclass(eq=False)
class ReplicationOutcome:
    summary: object
    digests: list
    timings: dict = field(default_factory=dict)
    fits: list = field(default_factory=list)


def run_replicate(config, index):
    """Sample and fit replicate ``index`` with seed ``base_seed + index``.

    Returns ``(digest, fit_result_or_None, seconds_sampling, seconds_fitting)``.
    """
    seed = config.base_seed + index
    t0 = time.perf_counter()
    data = mvst_sample(np.random.default_rng(seed), config.params, config.n_obs)
    t1 = time.perf_counter()
    digest = {"replicate": index, "seed": seed}
    try:
        result = fit(data, config.fit)
    except MatSkewTError as exc:
        logger.warning("replicate %d failed: %s", index, exc)
        digest.update(failed=True, error=f"{type(exc).__name__}: {exc}")
        return digest, None, t1 - t0, time.perf_counter() - t1
    digest.update(
        failed=False,
        iterations=result.iterations,
        converged=result.converged,
        final_loglik=result.loglik_trace[-1],
    )
    return digest, result, t1 - t0, time.perf_counter() - t1


def _run_star(args):
    return run_replicate(*args)


def replicate(config, out_dir=None, workers=1):
    """Run every replicate of ``config`` and aggregate the fitted parameters.

    Replicates are independent, so ``workers > 1`` distributes them over
    processes; results are gathered and reduced in replicate order, making
    every output independent of ``workers``. With ``out_dir`` set, writes
    ``fits/replicate_XXX.json``, ``replicates.json``, the two summary files
    and ``timing.json`` (the only run-dependent file).
    """
    jobs = [(config, r) for r in range(config.replicates)]
    t0 = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_star, jobs))
    else:
        outcomes = [_run_star(job) for job in jobs]
    wall = time.perf_counter() - t0
    digests = [o[0] for o in outcomes]
    fits = [o[1] for o in outcomes]
    successes = [f.params for f in fits if f is not None]
    failures = len(fits) - len(successes)
    summary = io_formats.summarize(successes, failures=failures) if successes else None
    timings = {
        "sample_seconds": sum(o[2] for o in outcomes),
        "fit_seconds": sum(o[3] for o in outcomes),
        "wall_seconds": wall,
        "workers": workers,
    }
    outcome = ReplicationOutcome(summary=summary, digests=digests, timings=timings, fits=fits)
    if out_dir is not None:
        _write_outcome(Path(out_dir), config, outcome)
    return outcome


def _write_outcome(out_dir, config, outcome):
    for digest, result in zip(outcome.digests, outcome.fits):
        if result is not None:
            io_formats.write_fit_result(out_dir / "fits" / f"replicate_{digest['replicate']:03d}.json", result)
    io_formats.write_json(out_dir / "replicates.json", {"name": config.name, "replicates": outcome.digests})
    if outcome.summary is not None:
        io_formats.write_summary(
            outcome.summary,
            csv_path=out_dir / config.summary_csv,
            json_path=out_dir / config.summary_json,
        )
    io_formats.write_json(out_dir / "timing.json", outcome.timings)


def marginal_series(data):
    """Long-format marginal series for each column of the observed matrices.

    Returns rows ``(column, observation, row, value, column_mean)`` ordered
    by column, observation, row; ``column_mean`` averages the column over
    all observations and rows.
    """
    obs = data.observations
    N, n, p = obs.shape
    means = exact_sum(obs.transpose(2, 0, 1).reshape(p, N * n), axis=1) / (N * n)
    rows = []
    for j in range(p):
        for i in range(N):
            for k in range(n):
                rows.append((j, i, k, float(obs[i, k, j]), float(means[j])))
    return rows


def write_marginals(path, data):
    lines = ["column,observation,row,value,column_mean"]
    lines += [f"{j},{i},{k},{v!r},{m!r}" for j, i, k, v, m in marginal_series(data)]
    io_formats.write_text(path, "\n".join(lines) + "\n")
