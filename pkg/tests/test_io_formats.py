import json
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import random_params
from matskewt import io_formats as iof
from matskewt.ecm import FitConfig, fit
from matskewt.errors import ValidationError
from matskewt.harness import simulation_config, simulation_params
from matskewt.mvst import Dataset, mvst_sample

ERROR_TYPES = (
    iof.MalformedJSONError,
    iof.SchemaError,
    iof.DimensionError,
    iof.NonFiniteError,
    iof.InvalidParamsError,
)


def _assert_params_equal(a, b):
    for name in ("location", "skewness", "row_scale", "col_scale"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    assert a.dof == b.dof


# datasets


def test_dataset_round_trip_bitwise(tmp_path, rng):
    data = Dataset(rng.normal(size=(7, 2, 3)) * np.logspace(-300, 300, 6).reshape(2, 3))
    path = tmp_path / "data.json"
    iof.write_dataset(path, data)
    back = iof.read_dataset(path)
    assert back.observations.tobytes() == data.observations.tobytes()


def test_dataset_layout_is_row_major(tmp_path):
    data = Dataset(np.arange(6.0).reshape(1, 2, 3))
    doc = iof.dataset_to_json(data)
    assert doc == {"n": 2, "p": 3, "N": 1, "data": [[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]]}


def _dataset_doc():
    return {"n": 2, "p": 2, "N": 3, "data": [[1.0, 2.0, 3.0, 4.0]] * 3}


def test_dataset_wrong_length_names_observation():
    doc = _dataset_doc()
    doc["data"] = [[1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0], [1.0, 2.0, 3.0, 4.0]]
    with pytest.raises(iof.DimensionError, match="observation 1"):
        iof.dataset_from_json(doc)


def test_dataset_empty_is_schema_error():
    doc = _dataset_doc()
    doc.update(N=0, data=[])
    with pytest.raises(iof.SchemaError):
        iof.dataset_from_json(doc)
    doc["N"] = 1
    with pytest.raises(iof.SchemaError):
        iof.dataset_from_json(doc)


@pytest.mark.parametrize(
    "change,error",
    [
        ({"N": 2}, iof.DimensionError),
        ({"n": "2"}, iof.SchemaError),
        ({"p": True}, iof.SchemaError),
        ({"data": {"a": 1}}, iof.SchemaError),
        ({"data": [[1.0, 2.0, "x", 4.0]] * 3}, iof.SchemaError),
        ({"data": [[1.0, 2.0, 1e400, 4.0]] * 3}, iof.NonFiniteError),
    ],
)
def test_dataset_schema_errors(change, error):
    doc = _dataset_doc()
    doc.update(change)
    with pytest.raises(error):
        iof.dataset_from_json(doc)


@pytest.mark.parametrize("literal", ["NaN", "Infinity", "-Infinity"])
def test_dataset_rejects_nonfinite_literals(tmp_path, literal):
    path = tmp_path / "data.json"
    path.write_text('{"n": 1, "p": 1, "N": 1, "data": [[%s]]}' % literal)
    with pytest.raises(iof.NonFiniteError):
        iof.read_dataset(path)


def test_missing_file_is_access_error(tmp_path):
    with pytest.raises(iof.FileAccessError):
        iof.read_dataset(tmp_path / "absent.json")


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"n": 1,')
    with pytest.raises(iof.MalformedJSONError):
        iof.read_dataset(path)
    path.write_bytes(b"\xff\xfe{}")
    with pytest.raises(iof.MalformedJSONError):
        iof.read_dataset(path)


# parameters


def test_simulation_params_round_trip(tmp_path):
    params = simulation_params(1)
    path = tmp_path / "params.json"
    iof.write_params(path, params)
    back = iof.read_params(path)
    _assert_params_equal(back, params)
    doc = json.loads(path.read_text())
    assert doc["M"][1] == [1.0, 0.0, 0.0, -1.0]
    assert doc["nu"] == 4.0


def test_random_params_round_trip_bitwise(tmp_path, rng):
    params = random_params(rng, 3, 2)
    iof.write_params(tmp_path / "p.json", params)
    _assert_params_equal(iof.read_params(tmp_path / "p.json"), params)


def test_params_non_spd_rejected():
    doc = iof.params_to_json(simulation_params(1))
    doc["Sigma"] = [[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    with pytest.raises(iof.InvalidParamsError, match="row_scale"):
        iof.params_from_json(doc)


@pytest.mark.parametrize(
    "key,value,error",
    [
        ("A", [[1.0, 2.0]], iof.DimensionError),
        ("Psi", [[1.0]], iof.DimensionError),
        ("M", [[1.0, 2.0], [3.0]], iof.DimensionError),
        ("M", [], iof.SchemaError),
        ("nu", -1.0, iof.InvalidParamsError),
        ("nu", "4", iof.SchemaError),
    ],
)
def test_params_schema_errors(key, value, error):
    doc = iof.params_to_json(simulation_params(2))
    doc[key] = value
    with pytest.raises(error):
        iof.params_from_json(doc)


# fit results and configs


def test_fit_result_round_trip(tmp_path):
    data = mvst_sample(np.random.default_rng(1), simulation_params(1), 30)
    result = fit(data, FitConfig(max_iterations=6))
    path = tmp_path / "fit.json"
    iof.write_fit_result(path, result)
    back = iof.read_fit_result(path)
    _assert_params_equal(back.params, result.params)
    assert back.loglik_trace == result.loglik_trace
    assert back.iterations == result.iterations and back.converged == result.converged
    assert len(back.aitken_history) == len(result.aitken_history)


def test_fit_config_round_trip_and_infinite_epsilon(tmp_path):
    path = tmp_path / "cfg.json"
    config = FitConfig(max_iterations=17, epsilon=math.inf, nu_bounds=(1.0, 50.0), seed=3)
    path.write_text(json.dumps(iof.fit_config_to_json(config)))
    assert iof.read_fit_config(path) == config


@pytest.mark.parametrize(
    "doc",
    [{"tolerance": 1.0}, {"max_iterations": 0}, {"nu_bounds": [5.0]}, {"epsilon": "small"}, {"init_strategy": "provided"}],
)
def test_fit_config_errors(doc):
    with pytest.raises(iof.SchemaError):
        iof.fit_config_from_json(doc)


def test_sim_config_round_trip(tmp_path):
    config = simulation_config(1)
    path = tmp_path / "sim.json"
    iof.write_json(path, iof.sim_config_to_json(config))
    back = iof.read_sim_config(path)
    _assert_params_equal(back.params, config.params)
    assert (back.n_obs, back.replicates, back.base_seed, back.name) == (100, 50, 0, "simulation1")
    assert back.fit == config.fit


@pytest.mark.parametrize("change", [{"N": 1}, {"replicates": 0}, {"outputs": {"summary_csv": 3}}, {"name": 7}])
def test_sim_config_errors(change):
    doc = iof.sim_config_to_json(simulation_config(2))
    doc.update(change)
    with pytest.raises(iof.SchemaError):
        iof.sim_config_from_json(doc)


# summaries


def _fitted_params(count):
    rng = np.random.default_rng(5)
    return [random_params(rng, 2, 3) for _ in range(count)]


def test_single_replicate_summary_has_zero_sd(tmp_path):
    table = iof.summarize(_fitted_params(1))
    iof.write_summary(table, csv_path=tmp_path / "s.csv")
    parsed = iof.read_summary_csv(tmp_path / "s.csv")
    assert all(sd == 0.0 for entries in parsed.values() for _, sd in entries.values())


def test_summary_arithmetic():
    params = _fitted_params(4)
    table = iof.summarize(params, failures=1)
    stack = np.array([q.location for q in params])
    np.testing.assert_allclose(table.stats["M"][0], stack.mean(axis=0), rtol=1e-15)
    np.testing.assert_allclose(table.stats["M"][1], stack.std(axis=0, ddof=1), rtol=1e-13)
    assert table.stats["nu"][0][0, 0] == pytest.approx(np.mean([q.dof for q in params]), rel=1e-15)
    assert table.stats["PsiKronSigma"][0].shape == (6, 6)
    assert table.replicates == 4 and table.failures == 1


def test_summary_csv_and_json_agree(tmp_path):
    table = iof.summarize(_fitted_params(3))
    iof.write_summary(table, csv_path=tmp_path / "s.csv", json_path=tmp_path / "s.json")
    from_csv = iof.read_summary_csv(tmp_path / "s.csv")
    from_json = iof.summary_from_json(json.loads((tmp_path / "s.json").read_text()))
    assert set(from_csv) == set(iof.SUMMARY_PARAMETERS)
    for name, (mean, sd) in from_json.stats.items():
        for (i, j), value in np.ndenumerate(mean):
            assert from_csv[name][(i, j)] == (value, sd[i, j])
        np.testing.assert_array_equal(mean, table.stats[name][0])


def test_summary_csv_rejects_bad_header(tmp_path):
    (tmp_path / "s.csv").write_text("a,b\n")
    with pytest.raises(iof.SchemaError):
        iof.read_summary_csv(tmp_path / "s.csv")


def test_summarize_needs_replicates():
    with pytest.raises(ValidationError):
        iof.summarize([])


# fuzzing


def _valid_files():
    rng = np.random.default_rng(3)
    params = random_params(rng, 2, 2)
    data = mvst_sample(rng, params, 3)
    return {
        "dataset": (iof._dumps(iof.dataset_to_json(data)), iof.read_dataset),
        "params": (iof._dumps(iof.params_to_json(params)), iof.read_params),
        "sim": (iof._dumps(iof.sim_config_to_json(simulation_config(1, replicates=2))), iof.read_sim_config),
    }


VALID = _valid_files()
mutation = st.tuples(st.integers(0, 10**6), st.integers(0, 3), st.binary(min_size=0, max_size=4))


@settings(max_examples=300, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.sampled_from(sorted(VALID)), st.lists(mutation, min_size=1, max_size=4))
def test_fuzzed_files_yield_named_errors(tmp_path, kind, edits):
    text, reader = VALID[kind]
    blob = bytearray(text.encode())
    for pos, width, insert in edits:
        pos %= len(blob) + 1
        blob[pos : pos + width] = insert
    path = tmp_path / "fuzz.json"
    path.write_bytes(bytes(blob))
    try:
        reader(path)
    except ERROR_TYPES:
        pass


@settings(max_examples=200)
@given(
    st.recursive(
        st.none() | st.booleans() | st.integers() | st.floats(allow_nan=False, allow_infinity=False) | st.text(max_size=3),
        lambda children: st.lists(children, max_size=4) | st.dictionaries(st.sampled_from(["n", "p", "N", "data", "M", "A", "Sigma", "Psi", "nu"]), children, max_size=6),
        max_leaves=30,
    )
)
def test_arbitrary_documents_yield_named_errors(doc):
    for parse in (iof.dataset_from_json, iof.params_from_json, iof.fit_config_from_json, iof.sim_config_from_json):
        try:
            parse(doc)
        except ERROR_TYPES:
            pass
