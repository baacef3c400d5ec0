import json
import math

import numpy as np
import pytest

import oodcert


def test_bounds_match_reference_values():
    assert oodcert.epsilon_chernoff(100000, 4301, 1e-6)["value"] == pytest.approx(
        0.046598254961403904, rel=1e-14
    )
    adjusted = oodcert.epsilon_adjusted(100000, 4301, 1e-6, 0.0275)
    assert adjusted["method"] == "adjusted"
    assert adjusted["value"] == pytest.approx(0.045367787518743837, rel=1e-14)
    assert oodcert.epsilon_chernoff(10, 10, 0.5)["clamped"]
    exact = oodcert.exact_epsilon(100, 0, 1, 0.01)["value"]
    assert exact == pytest.approx(1 - 0.01 ** (1 / 100), abs=1e-12)
    assert oodcert.pac_sample_complexity(0.1, 0.1) == 24


def test_model_sampling_is_seeded():
    model = oodcert.GaussianLatentModel.diagonal(np.array([1.0, -1.0]), np.array([0.5, 2.0]))
    a = model.sample(2000, seed=3)
    b = model.sample(2000, seed=3)
    assert a.shape == (2000, 2)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, model.sample(2000, seed=4))
    np.testing.assert_allclose(a.mean(axis=0), [1.0, -1.0], atol=0.15)
    assert model.log_density(np.array([1.0, -1.0])) == pytest.approx(
        -math.log(2 * math.pi) - 0.5 * math.log(0.5 * 2.0)
    )


def test_calibrate_verify_round_trip(tmp_path):
    model = oodcert.GaussianLatentModel.standard_normal(2)
    cal = oodcert.CalibrationSet(model.sample(200, seed=1))
    assert len(cal) == 200
    pred = oodcert.calibrate(cal, 0.0275)
    assert pred.threshold_index == 5
    assert pred.scores[-1] == 1.0

    cal.save(tmp_path / "cal.csv")
    model.save(tmp_path / "model.json")
    pred.save("cal.csv", tmp_path / "pred.json")
    back = oodcert.load_predictor(tmp_path / "pred.json")
    assert back.threshold == pred.threshold
    assert json.loads(back.to_json("cal.csv"))["threshold_index"] == 5

    one = oodcert.verify(oodcert.load_model(tmp_path / "model.json"), back, 20000, 1e-6, seed=2)
    four = oodcert.verify(model, pred, 20000, 1e-6, seed=2, workers=4)
    assert one["violations"] == four["violations"]
    assert one["epsilon"]["value"] > one["observed_rate"]


def test_conformity_and_scenario():
    model = oodcert.GaussianLatentModel.standard_normal(2)
    pred = oodcert.calibrate(oodcert.CalibrationSet(model.sample(200, seed=1)), 0.05,
                             kernel="gaussian")
    samples = model.sample(1000, seed=5)
    conf = pred.conformity_many(samples)
    safe = np.array([pred.is_safe(x) for x in samples])
    np.testing.assert_array_equal(safe, conf >= pred.threshold)
    res = oodcert.scenario_relax(pred, samples)
    assert res["violating_count"] == int((~safe).sum())
    assert res["lambda_star"] == pytest.approx(max(0.0, (pred.threshold - conf).max()))


def test_experiment_grid():
    spec = json.dumps({"n_grid": [100, 1000], "delta_grid": [0.1], "trials_per_cell": 2,
                       "beta": 0.0275, "calibration_size": 200,
                       "scenario": "synthetic_gaussian", "seed": 0})
    records = oodcert.run_grid(spec)
    assert len(records) == 4
    assert records == oodcert.run_grid(spec)
    stats = oodcert.violation_study(spec)
    assert [s["n"] for s in stats] == [100, 1000]


def test_errors_map_to_python_exceptions():
    with pytest.raises(oodcert.ArgumentError):
        oodcert.epsilon_chernoff(10, 1, 1.5)
    with pytest.raises(oodcert.ValidationError):
        oodcert.GaussianLatentModel(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(oodcert.FormatError):
        oodcert.parse_calibration("0.5,1\n")
    with pytest.raises(oodcert.OodcertError):
        oodcert.load_model("/nonexistent/model.json")
