"""JSON/CSV file formats.

All matrices are row-major. Floats are written with Python's shortest
round-trip ``repr``, so a write/read cycle is bit-exact. Schemas::

    dataset   {"n": int, "p": int, "N": int, "data": [[n*p reals], ...]}
    params    {"M": [[...]], "A": [[...]], "Sigma": [[...]], "Psi": [[...]], "nu": real}
    fit       {"params": params, "loglik_trace": [...], "iterations": int,
               "converged": bool, "aitken_history": [real | null, ...],
               "initial_loglik": real, "nu_clamped": int}
    fit config {"max_iterations": int, "epsilon": real, "nu_bounds": [lo, hi],
                "seed": int, "init_strategy": "moment" | "provided",
                "initial_params": params (optional)}
    sim config {"name": str, "params": params, "N": int, "replicates": int,
                "base_seed": int, "fit": fit config (optional),
                "outputs": {"summary_csv": path, "summary_json": path} (optional)}

Summary CSV columns: ``parameter,row,col,mean,sd``.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._linalg import exact_sum
from .ecm import FitConfig, FitResult
from .errors import MatSkewTError, ValidationError
from .mvst import Dataset, MvstParams

__all__ = [
    "FileAccessError",
    "FormatError",
    "MalformedJSONError",
    "SchemaError",
    "DimensionError",
    "NonFiniteError",
    "InvalidParamsError",
    "SimConfig",
    "SummaryTable",
    "dataset_to_json",
    "dataset_from_json",
    "read_dataset",
    "write_dataset",
    "params_to_json",
    "params_from_json",
    "read_params",
    "write_params",
    "fit_result_to_json",
    "fit_result_from_json",
    "read_fit_result",
    "write_fit_result",
    "fit_config_from_json",
    "fit_config_to_json",
    "read_fit_config",
    "read_sim_config",
    "sim_config_from_json",
    "summarize",
    "write_json",
    "write_text",
    "summary_to_json",
    "summary_from_json",
    "summary_csv_text",
    "read_summary_csv",
    "write_summary",
]

SUMMARY_PARAMETERS = ("M", "A", "Sigma", "Psi", "PsiKronSigma", "nu")


class FileAccessError(MatSkewTError, OSError):
    """A file could not be opened, read or written."""


class FormatError(ValidationError):
    """File content does not follow its schema."""


class MalformedJSONError(FormatError):
    pass


class SchemaError(FormatError):
    pass


class DimensionError(FormatError):
    pass


class NonFiniteError(FormatError):
    pass


class InvalidParamsError(FormatError):
    """Parameters parse but violate model constraints (e.g. non-SPD scale)."""


# -- low-level helpers -------------------------------------------------------


def _reject_constant(name):
    raise NonFiniteError(f"non-finite literal {name} is not allowed")


def _loads(text, allow_nonfinite=False):
    try:
        if allow_nonfinite:
            return json.loads(text)
        return json.loads(text, parse_constant=_reject_constant)
    except FormatError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError, RecursionError) as exc:
        raise MalformedJSONError(f"malformed JSON: {exc}") from None


def _dumps(obj):
    try:
        return json.dumps(obj, allow_nan=False, indent=1) + "\n"
    except ValueError as exc:
        raise NonFiniteError(str(exc)) from None


def write_json(path, obj):
    write_text(path, _dumps(obj))


def _read_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedJSONError(f"{path}: not UTF-8 text ({exc.reason})") from None
    except OSError as exc:
        raise FileAccessError(f"cannot read {path}: {exc.strerror or exc}") from None


def write_text(path, text):
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise FileAccessError(f"cannot write {path}: {exc.strerror or exc}") from None


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _real(value, what):
    if not _is_number(value):
        raise SchemaError(f"{what} must be a number, got {type(value).__name__}")
    try:
        value = float(value)
    except OverflowError:
        raise NonFiniteError(f"{what} overflows a double") from None
    if not math.isfinite(value):
        raise NonFiniteError(f"{what} is not finite")
    return value


def _integer(value, what, minimum=None):
    if not isinstance(value, int) or isinstance(value, bool):
        raise SchemaError(f"{what} must be an integer")
    if minimum is not None and value < minimum:
        raise SchemaError(f"{what} must be >= {minimum}, got {value}")
    return value


def _obj(doc, what, required):
    if not isinstance(doc, dict):
        raise SchemaError(f"{what} must be a JSON object")
    missing = [key for key in required if key not in doc]
    if missing:
        raise SchemaError(f"{what} is missing keys {missing}")
    return doc


def _matrix(value, what):
    if not isinstance(value, list) or not value or not all(isinstance(row, list) for row in value):
        raise SchemaError(f"{what} must be a non-empty list of rows")
    width = len(value[0])
    if width == 0 or any(len(row) != width for row in value):
        raise DimensionError(f"{what} rows must be non-empty and of equal length")
    return np.array([[_real(x, what) for x in row] for row in value], dtype=float)


def _matrix_to_json(mat):
    return [[float(x) for x in row] for row in np.asarray(mat)]


# -- datasets ------------------------------------------------------------------


def dataset_to_json(data):
    N, n, p = data.observations.shape
    return {
        "n": n,
        "p": p,
        "N": N,
        "data": [[float(x) for x in obs.ravel()] for obs in data.observations],
    }


def dataset_from_json(doc):
    doc = _obj(doc, "dataset", ("n", "p", "N", "data"))
    n = _integer(doc["n"], "n", 1)
    p = _integer(doc["p"], "p", 1)
    N = _integer(doc["N"], "N", 1)
    rows = doc["data"]
    if not isinstance(rows, list):
        raise SchemaError("data must be a list of observations")
    if not rows:
        raise SchemaError("data must contain at least one observation")
    if len(rows) != N:
        raise DimensionError(f"N = {N} but data holds {len(rows)} observations")
    values = []
    for i, row in enumerate(rows):
        if not isinstance(row, list):
            raise SchemaError(f"observation {i} must be a list of reals")
        if len(row) != n * p:
            raise DimensionError(f"observation {i} has {len(row)} values, expected n*p = {n * p}")
        values.append([_real(x, f"observation {i}") for x in row])
    return Dataset(np.array(values, dtype=float).reshape(N, n, p))


def write_dataset(path, data):
    write_text(path, _dumps(dataset_to_json(data)))


def read_dataset(path):
    return dataset_from_json(_loads(_read_text(path)))


# -- parameters ----------------------------------------------------------------


def params_to_json(params):
    return {
        "M": _matrix_to_json(params.location),
        "A": _matrix_to_json(params.skewness),
        "Sigma": _matrix_to_json(params.row_scale),
        "Psi": _matrix_to_json(params.col_scale),
        "nu": float(params.dof),
    }


def params_from_json(doc):
    doc = _obj(doc, "params", ("M", "A", "Sigma", "Psi", "nu"))
    M = _matrix(doc["M"], "M")
    A = _matrix(doc["A"], "A")
    sigma = _matrix(doc["Sigma"], "Sigma")
    psi = _matrix(doc["Psi"], "Psi")
    nu = _real(doc["nu"], "nu")
    n, p = M.shape
    if A.shape != (n, p):
        raise DimensionError(f"A has shape {A.shape}, M has {(n, p)}")
    if sigma.shape != (n, n):
        raise DimensionError(f"Sigma has shape {sigma.shape}, expected {(n, n)}")
    if psi.shape != (p, p):
        raise DimensionError(f"Psi has shape {psi.shape}, expected {(p, p)}")
    try:
        return MvstParams(M, A, sigma, psi, nu)
    except ValidationError as exc:
        raise InvalidParamsError(str(exc)) from None


def write_params(path, params):
    write_text(path, _dumps(params_to_json(params)))


def read_params(path):
    return params_from_json(_loads(_read_text(path)))


# -- fit results and configs -----------------------------------------------------


def fit_result_to_json(result):
    return {
        "params": params_to_json(result.params),
        "loglik_trace": [float(x) for x in result.loglik_trace],
        "iterations": int(result.iterations),
        "converged": bool(result.converged),
        "aitken_history": [float(x) if math.isfinite(x) else None for x in result.aitken_history],
        "initial_loglik": float(result.initial_loglik),
        "nu_clamped": int(result.nu_clamped),
    }


def fit_result_from_json(doc):
    doc = _obj(doc, "fit result", ("params", "loglik_trace", "iterations", "converged"))
    trace = doc["loglik_trace"]
    if not isinstance(trace, list):
        raise SchemaError("loglik_trace must be a list")
    history = doc.get("aitken_history", [])
    if not isinstance(history, list):
        raise SchemaError("aitken_history must be a list")
    if not isinstance(doc["converged"], bool):
        raise SchemaError("converged must be a boolean")
    return FitResult(
        params=params_from_json(doc["params"]),
        loglik_trace=[_real(x, "loglik_trace") for x in trace],
        iterations=_integer(doc["iterations"], "iterations", 0),
        converged=doc["converged"],
        aitken_history=[float("nan") if x is None else _real(x, "aitken_history") for x in history],
        initial_loglik=_real(doc.get("initial_loglik", 0.0), "initial_loglik"),
        nu_clamped=_integer(doc.get("nu_clamped", 0), "nu_clamped", 0),
    )


def write_fit_result(path, result):
    write_text(path, _dumps(fit_result_to_json(result)))


def read_fit_result(path):
    return fit_result_from_json(_loads(_read_text(path)))


def fit_config_to_json(config):
    doc = {
        "max_iterations": int(config.max_iterations),
        "epsilon": float(config.epsilon),
        "nu_bounds": [float(config.nu_bounds[0]), float(config.nu_bounds[1])],
        "seed": int(config.seed),
        "init_strategy": config.init_strategy,
    }
    if config.initial_params is not None:
        doc["initial_params"] = params_to_json(config.initial_params)
    return doc


def fit_config_from_json(doc):
    doc = _obj(doc, "fit config", ())
    known = {"max_iterations", "epsilon", "nu_bounds", "seed", "init_strategy", "initial_params"}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise SchemaError(f"unknown fit config keys {unknown}")
    kwargs = {}
    if "max_iterations" in doc:
        kwargs["max_iterations"] = _integer(doc["max_iterations"], "max_iterations", 1)
    if "epsilon" in doc:
        eps = doc["epsilon"]
        if not _is_number(eps) or math.isnan(eps):
            raise SchemaError("epsilon must be a number")
        kwargs["epsilon"] = float(eps)
    if "nu_bounds" in doc:
        bounds = doc["nu_bounds"]
        if not isinstance(bounds, list) or len(bounds) != 2:
            raise SchemaError("nu_bounds must be a two-element list")
        kwargs["nu_bounds"] = (_real(bounds[0], "nu_bounds"), _real(bounds[1], "nu_bounds"))
    if "seed" in doc:
        kwargs["seed"] = _integer(doc["seed"], "seed")
    if "init_strategy" in doc:
        if not isinstance(doc["init_strategy"], str):
            raise SchemaError("init_strategy must be a string")
        kwargs["init_strategy"] = doc["init_strategy"]
    if "initial_params" in doc:
        kwargs["initial_params"] = params_from_json(doc["initial_params"])
    try:
        return FitConfig(**kwargs)
    except ValidationError as exc:
        raise SchemaError(f"invalid fit config: {exc}") from None


def read_fit_config(path):
    # epsilon may legitimately be Infinity
    return fit_config_from_json(_loads(_read_text(path), allow_nonfinite=True))


@dataclass(frozen=True)
class SimConfig:
    """One simulation study: generating parameters, sample size and replicates."""

    params: MvstParams
    n_obs: int
    replicates: int
    base_seed: int = 0
    fit: FitConfig = field(default_factory=FitConfig)
    name: str = "simulation"
    summary_csv: str = "summary.csv"
    summary_json: str = "summary.json"

    def __post_init__(self):
        if self.replicates < 1:
            raise ValidationError("replicates must be >= 1")
        if self.n_obs < 2:
            raise ValidationError("N must be >= 2")


def sim_config_from_json(doc):
    doc = _obj(doc, "simulation config", ("params", "N", "replicates"))
    outputs = doc.get("outputs", {})
    outputs = _obj(outputs, "outputs", ())
    for key in ("summary_csv", "summary_json"):
        if key in outputs and not isinstance(outputs[key], str):
            raise SchemaError(f"outputs.{key} must be a string")
    name = doc.get("name", "simulation")
    if not isinstance(name, str):
        raise SchemaError("name must be a string")
    try:
        return SimConfig(
            params=params_from_json(doc["params"]),
            n_obs=_integer(doc["N"], "N", 2),
            replicates=_integer(doc["replicates"], "replicates", 1),
            base_seed=_integer(doc.get("base_seed", 0), "base_seed", 0),
            fit=fit_config_from_json(doc.get("fit", {})),
            name=name,
            summary_csv=outputs.get("summary_csv", "summary.csv"),
            summary_json=outputs.get("summary_json", "summary.json"),
        )
    except FormatError:
        raise
    except ValidationError as exc:
        raise SchemaError(str(exc)) from None


def sim_config_to_json(config):
    return {
        "name": config.name,
        "params": params_to_json(config.params),
        "N": config.n_obs,
        "replicates": config.replicates,
        "base_seed": config.base_seed,
        "fit": fit_config_to_json(config.fit),
        "outputs": {"summary_csv": config.summary_csv, "summary_json": config.summary_json},
    }


def read_sim_config(path):
    return sim_config_from_json(_loads(_read_text(path), allow_nonfinite=True))


# -- summaries -------------------------------------------------------------------


@dataclass(eq=False)
class SummaryTable:
    """Component-wise means and sds of fitted parameters over replicates.

    ``stats`` maps a parameter name (``M``, ``A``, ``Sigma``, ``Psi``,
    ``PsiKronSigma``, ``nu``) to a ``(mean, sd)`` pair of 2-d arrays; ``nu``
    is stored as 1x1.
    """

    stats: dict
    replicates: int
    failures: int = 0
    nu_values: list = field(default_factory=list)


def _mean_sd(stack):
    """Exactly summed mean and sample sd (ddof=1; zero for a single replicate)."""
    k = stack.shape[0]
    mean = exact_sum(stack) / k
    if k == 1:
        return mean, np.zeros_like(mean)
    dev = stack - mean
    return mean, np.sqrt(exact_sum(dev * dev) / (k - 1))


def summarize(params_list, failures=0):
    """Build a :class:`SummaryTable` from fitted parameter sets."""
    if not params_list:
        raise ValidationError("cannot summarize zero replicates")
    stacks = {
        "M": np.array([q.location for q in params_list]),
        "A": np.array([q.skewness for q in params_list]),
        "Sigma": np.array([q.row_scale for q in params_list]),
        "Psi": np.array([q.col_scale for q in params_list]),
        "PsiKronSigma": np.array([q.kron_scale() for q in params_list]),
        "nu": np.array([[[q.dof]] for q in params_list]),
    }
    stats = {name: _mean_sd(stacks[name]) for name in SUMMARY_PARAMETERS}
    return SummaryTable(
        stats=stats,
        replicates=len(params_list),
        failures=failures,
        nu_values=[float(q.dof) for q in params_list],
    )


def summary_to_json(table):
    return {
        "replicates": table.replicates,
        "failures": table.failures,
        "nu_values": table.nu_values,
        "parameters": {
            name: {"mean": _matrix_to_json(mean), "sd": _matrix_to_json(sd)}
            for name, (mean, sd) in table.stats.items()
        },
    }


def summary_from_json(doc):
    doc = _obj(doc, "summary", ("replicates", "failures", "parameters"))
    params = _obj(doc["parameters"], "parameters", SUMMARY_PARAMETERS)
    stats = {}
    for name in SUMMARY_PARAMETERS:
        entry = _obj(params[name], name, ("mean", "sd"))
        stats[name] = (_matrix(entry["mean"], f"{name}.mean"), _matrix(entry["sd"], f"{name}.sd"))
    nu_values = doc.get("nu_values", [])
    if not isinstance(nu_values, list):
        raise SchemaError("nu_values must be a list")
    return SummaryTable(
        stats=stats,
        replicates=_integer(doc["replicates"], "replicates", 1),
        failures=_integer(doc["failures"], "failures", 0),
        nu_values=[_real(x, "nu_values") for x in nu_values],
    )


def summary_csv_text(table):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["parameter", "row", "col", "mean", "sd"])
    for name, (mean, sd) in table.stats.items():
        for (i, j), value in np.ndenumerate(mean):
            writer.writerow([name, i, j, repr(float(value)), repr(float(sd[i, j]))])
    return buf.getvalue()


def read_summary_csv(path):
    """Parse a summary CSV into ``{parameter: {(row, col): (mean, sd)}}``."""
    text = _read_text(path)
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["parameter", "row", "col", "mean", "sd"]:
        raise SchemaError("summary CSV header must be parameter,row,col,mean,sd")
    out = {}
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != 5:
            raise DimensionError(f"summary CSV line {k} has {len(row)} fields")
        try:
            key = (int(row[1]), int(row[2]))
            values = (float(row[3]), float(row[4]))
        except ValueError:
            raise SchemaError(f"summary CSV line {k} has a non-numeric field") from None
        if not all(math.isfinite(v) for v in values):
            raise NonFiniteError(f"summary CSV line {k} has a non-finite value")
        out.setdefault(row[0], {})[key] = values
    return out


def write_summary(table, csv_path=None, json_path=None):
    if csv_path is not None:
        write_text(csv_path, summary_csv_text(table))
    if json_path is not None:
        write_text(json_path, _dumps(summary_to_json(table)))
