"""Configuration presets, JSON round trip, and strict validation."""

import json

import numpy as np
import pytest

from gyroless.config import (ConfigError, ExperimentConfig, PRESETS,
                             case1, case2, from_dict, load_config)
from gyroless.dynamics import (TorqueProfile, ModelErrorSignal,
                               MeasurementModel)
from gyroless.harness import config_hash

TWO_PI = 2.0 * np.pi


def _minimal_dict(**overrides):
    d = {
        "platform": "uav", "h": 1e-3, "horizon": 1.0,
        "inertia": [6.0, 7.0, 9.0],
        "q0": [1.0, 0.0, 0.0, 0.0], "w0": [0.0, 0.0, 0.0],
        "torque": {"kind": "zero"},
        "model_error": {"kind": "zero"},
        "measurement": {"a1": [1.0, 0.0, 0.0], "a2": [0.0, 1.0, 0.0],
                        "d1": 0.0, "d2": 0.0},
    }
    d.update(overrides)
    return d


# --- presets -------------------------------------------------------------------

def test_case1_preset_values():
    cfg = case1("gaussian")
    assert cfg.platform == "uav"
    assert cfg.h == 1e-3
    assert cfg.horizon == 100.0
    assert np.array_equal(np.diag(cfg.inertia), [6.0, 7.0, 9.0])
    assert np.array_equal(cfg.w0, [0.2, 0.4, 0.5])
    expected_q0 = np.concatenate([[np.cos(0.6)],
                                  np.sin(0.6) * np.ones(3) / np.sqrt(3.0)])
    assert np.allclose(cfg.q0, expected_q0, atol=1e-15)
    assert cfg.torque_profile.kind == "sinusoid-triplet"
    assert np.allclose(cfg.torque_profile.frequencies,
                       (TWO_PI / 3.0, TWO_PI, TWO_PI / 5.0))
    assert cfg.model_error.kind == "gaussian-white"
    assert cfg.model_error.std == 0.1
    assert abs(cfg.measurement.d1 - np.sin(np.deg2rad(20.0))) < 1e-15
    assert cfg.pf.horizon == 0.05
    assert cfg.filters == ("ekf", "ukf", "mef", "pf")


def test_case1_deterministic_variant():
    cfg = case1("deterministic")
    assert cfg.model_error.kind == "deterministic-sinusoid"
    assert np.allclose(cfg.model_error.amplitudes, (0.1, 0.1, 0.1))
    assert np.allclose(cfg.model_error.frequencies,
                       (TWO_PI / 5.0,) * 3)


def test_case2_preset_values():
    cfg = case2("gaussian")
    assert cfg.platform == "satellite"
    assert cfg.horizon == 40.0
    assert np.array_equal(np.diag(cfg.inertia), [102.0, 105.0, 103.0])
    assert np.array_equal(cfg.w0, [0.1, 0.3, 0.2])
    expected_q0 = np.concatenate([[np.cos(1.15)],
                                  np.sin(1.15) * np.ones(3) / np.sqrt(3.0)])
    assert np.allclose(cfg.q0, expected_q0, atol=1e-15)
    assert np.allclose(cfg.torque_profile.frequencies,
                       (TWO_PI / 25.0, TWO_PI / 13.0, TWO_PI / 37.0))
    assert cfg.mef.brb_gain == 6e7
    assert cfg.pf.horizon == 0.2


def test_case2_deterministic_variant():
    cfg = case2("deterministic")
    assert np.allclose(cfg.model_error.frequencies,
                       (TWO_PI / 13.0, TWO_PI / 12.0, TWO_PI / 17.0))


def test_unknown_variant_rejected():
    with pytest.raises(ConfigError):
        case1("fancy")
    with pytest.raises(ConfigError):
        case2("")


def test_presets_registry_matches_constructors():
    assert set(PRESETS) == {"case1-gaussian", "case1-deterministic",
                            "case2-gaussian", "case2-deterministic"}
    assert PRESETS["case2-deterministic"]().model_error.kind \
        == "deterministic-sinusoid"


# --- dict round trip --------------------------------------------------------------

def test_to_dict_from_dict_round_trip():
    for make in PRESETS.values():
        cfg = make()
        d = cfg.to_dict()
        again = from_dict(d).to_dict()
        assert again == d


def test_to_dict_is_json_serializable_and_stable():
    cfg = case1("gaussian")
    s1 = json.dumps(cfg.to_dict(), sort_keys=True)
    s2 = json.dumps(cfg.to_dict(), sort_keys=True)
    assert s1 == s2


def test_dense_matrices_survive_round_trip():
    G = np.array([[1.0, 0.1, 0.0], [0.0, 1.0, 0.2], [0.0, 0.0, 1.0]])
    cfg = ExperimentConfig(**{**_base_kwargs(), "G": G})
    out = from_dict(cfg.to_dict())
    assert np.array_equal(out.G, G)


def _base_kwargs():
    return dict(platform="uav", h=1e-3, horizon=1.0,
                inertia=np.array([6.0, 7.0, 9.0]),
                q0=np.array([1.0, 0.0, 0.0, 0.0]), w0=np.zeros(3),
                torque_profile=TorqueProfile(kind="zero"),
                model_error=ModelErrorSignal(kind="zero"),
                measurement=MeasurementModel())


def test_with_seeds_reseeds_both_streams():
    cfg = case1("gaussian")
    out = cfg.with_seeds(7, 8)
    assert out.seed_process == 7
    assert out.seed_measurement == 8
    assert out.model_error.seed == 7
    assert out.measurement.seed == 8
    # nothing else moves
    d0 = cfg.to_dict()
    d1 = out.to_dict()
    d0.pop("seeds")
    d1.pop("seeds")
    assert d0 == d1


def test_seeds_propagate_into_signal_objects():
    cfg = ExperimentConfig(**_base_kwargs(), seed_process=31,
                           seed_measurement=32)
    assert cfg.model_error.seed == 31
    assert cfg.measurement.seed == 32


def test_vector_inertia_becomes_diagonal_matrix():
    cfg = ExperimentConfig(**_base_kwargs())
    assert cfg.inertia.shape == (3, 3)
    assert np.array_equal(cfg.inertia, np.diag([6.0, 7.0, 9.0]))
    assert cfg.G.shape == (3, 3)


# --- validation ----------------------------------------------------------------------

def test_invalid_platform_rejected():
    kw = _base_kwargs()
    kw["platform"] = "submarine"
    with pytest.raises(ConfigError):
        ExperimentConfig(**kw)


def test_nonpositive_step_rejected():
    kw = _base_kwargs()
    kw["h"] = 0.0
    with pytest.raises(ConfigError):
        ExperimentConfig(**kw)


def test_horizon_shorter_than_step_rejected():
    kw = _base_kwargs()
    kw["horizon"] = 1e-4
    with pytest.raises(ConfigError):
        ExperimentConfig(**kw)


def test_filter_list_validation():
    kw = _base_kwargs()
    kw["filters"] = ()
    with pytest.raises(ConfigError):
        ExperimentConfig(**kw)
    kw["filters"] = ("ekf", "kalman9000")
    with pytest.raises(ConfigError):
        ExperimentConfig(**kw)


def test_from_dict_rejects_unknown_top_level_field():
    with pytest.raises(ConfigError, match="unknown fields"):
        from_dict(_minimal_dict(gravity=9.81))


def test_from_dict_rejects_unknown_nested_fields():
    d = _minimal_dict()
    d["ekf"] = {"p0": 1.0, "momentum": 3.0}
    with pytest.raises(ConfigError, match="ekf"):
        from_dict(d)
    d = _minimal_dict()
    d["torque"] = {"kind": "zero", "phase": 0.5}
    with pytest.raises(ConfigError, match="torque"):
        from_dict(d)


def test_from_dict_rejects_missing_required_field():
    d = _minimal_dict()
    del d["platform"]
    with pytest.raises(ConfigError, match="missing"):
        from_dict(d)


def test_from_dict_rejects_non_dict_root():
    with pytest.raises(ConfigError):
        from_dict([1, 2, 3])


def test_from_dict_wraps_value_errors():
    d = _minimal_dict()
    d["measurement"]["a1"] = [2.0, 0.0, 0.0]
    with pytest.raises(ConfigError):
        from_dict(d)


# --- file loading --------------------------------------------------------------------

def test_load_config_with_preset_and_overrides(tmp_path):
    p = tmp_path / "run.json"
    p.write_text(json.dumps({
        "preset": "case1-gaussian",
        "horizon": 2.5,
        "pf": {"sigma_pen": 3e-4},
    }))
    cfg = load_config(p)
    assert cfg.horizon == 2.5
    assert cfg.pf.sigma_pen == 3e-4
    # the rest of the preset is untouched
    assert cfg.pf.horizon == 0.05
    assert cfg.platform == "uav"


def test_load_config_plain_document(tmp_path):
    p = tmp_path / "run.json"
    p.write_text(json.dumps(_minimal_dict()))
    cfg = load_config(p)
    assert cfg.platform == "uav"
    assert cfg.horizon == 1.0


def test_load_config_unknown_preset(tmp_path):
    p = tmp_path / "run.json"
    p.write_text(json.dumps({"preset": "case9-heroic"}))
    with pytest.raises(ConfigError, match="preset"):
        load_config(p)


def test_load_config_unknown_override_key(tmp_path):
    p = tmp_path / "run.json"
    p.write_text(json.dumps({"preset": "case1-gaussian", "hoirzon": 2.0}))
    with pytest.raises(ConfigError, match="unknown"):
        load_config(p)


def test_load_config_invalid_json(tmp_path):
    p = tmp_path / "run.json"
    p.write_text("{not json}")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(p)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "absent.json")


def test_load_config_non_object_root(tmp_path):
    p = tmp_path / "run.json"
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(p)


# --- hashing ------------------------------------------------------------------------

def test_config_hash_stable_and_seed_sensitive():
    a = config_hash(case1("gaussian"))
    b = config_hash(case1("gaussian"))
    assert a == b
    assert len(a) == 16
    c = config_hash(case1("gaussian").with_seeds(999, 202))
    assert c != a
