"""
Tests for configuration parsing, defaults and run manifests.
"""

import json

import numpy.testing as nptest
import pytest

from edgespectra.config import (DEFAULT_FLUX_GRID, ConfigError, RunManifest, load_config_dict,
                                parse_config)
from edgespectra.spectral import WindowLabel


def test_minimal_defaults():
    cfg = load_config_dict({"experiment": "theorem1", "B": 2, "L": 8, "V0": 0.3})
    assert cfg.auto_flux
    assert cfg.seeds == tuple(range(32))
    assert cfg.workers == 1 and cfg.tol == 1e-10
    assert cfg.walls == {"left": {"c": 1.0, "m": 4}, "right": {"c": 1.0, "m": 4}}
    assert cfg.flux_grid == DEFAULT_FLUX_GRID
    params = cfg.check_invariants()
    assert params.flux == 0. and params.B == 2.
    window = cfg.energy_window(params)
    assert window.label is WindowLabel.BAND
    nptest.assert_allclose((window.lo, window.hi), (2.05, 2.3))
    thresholds = cfg.classification_thresholds()
    nptest.assert_allclose(thresholds.edge_min, 0.1 * 2 ** 0.5)


def test_theorem1_inequality():
    cfg = load_config_dict({"experiment": "theorem1", "B": 1, "L": 8, "V0": 0.3})
    with pytest.raises(ConfigError, match=r"B > 4\*V0") as excinfo:
        cfg.check_invariants()
    assert excinfo.value.field == "V0"


def test_theorem2_inequality():
    cfg = load_config_dict({"experiment": "theorem2", "B": 2, "L": 9, "V0": 0.3,
                            "delta": 1.7})
    with pytest.raises(ConfigError, match="B \\+ V0 \\+ epsilon < 2B - delta"):
        cfg.check_invariants()
    ok = cfg.replace(delta=0.3)
    assert ok.energy_window(ok.check_invariants()).label is WindowLabel.GAP


def test_roundtrip():
    cfg = load_config_dict({"experiment": "theorem2", "B": 2, "L": 9, "V0": 0.1,
                            "flux": 0.25, "seeds": [3, 5], "window": [3.8, 4.2],
                            "walls": {"left": {"c": 2.0, "m": 3}},
                            "discretization": {"n_x": 129},
                            "thresholds": {"edge_min": 0.2, "bulk_max": 0.01},
                            "L_list": [9, 12]})
    assert load_config_dict(cfg.to_dict()) == cfg
    assert cfg.walls["right"] == {"c": 1.0, "m": 4}
    assert cfg.discretization["n_x"] == 129 and cfg.discretization["quad_order"] == 16


@pytest.mark.parametrize("doc,field", [
    ({"experiment": "theorem1", "B": 2, "L": 8, "V0": 0.3, "colour": 1}, "colour"),
    ({"experiment": "nope", "B": 2, "L": 8, "V0": 0.3}, "experiment"),
    ({"experiment": "theorem1", "L": 8, "V0": 0.3}, "B"),
    ({"experiment": "theorem1", "B": 2, "L": 8, "V0": -0.3}, "V0"),
    ({"experiment": "theorem1", "B": 2, "L": 8, "V0": 0.3, "seeds": [1, 1]}, "seeds"),
    ({"experiment": "theorem1", "B": 2, "L": 8, "V0": 0.3, "window": [3, 2]}, "window"),
    ({"experiment": "theorem1", "B": 2, "L": 8, "V0": 0.3, "walls": {"m": 2}}, "walls.left"),
    ({"experiment": "theorem1", "B": 2, "L": 8, "V0": 0.3,
      "discretization": {"n_x": 0}}, "discretization.n_x"),
])
def test_invalid_entries(doc, field):
    with pytest.raises(ConfigError) as excinfo:
        load_config_dict(doc)
    assert excinfo.value.field == field


def test_window_above_ceiling():
    cfg = load_config_dict({"experiment": "spectrum", "B": 2, "L": 8, "V0": 0.,
                            "window": [5., 6.5]})
    with pytest.raises(ConfigError) as excinfo:
        cfg.check_invariants()
    assert excinfo.value.field == "window"


def test_parse_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"experiment": "spectrum", "B": 2, "L": 8, "V0": 0.,
                                "flux": 0.25, "window": [2.05, 3.5], "seeds": [0]}))
    cfg = parse_config(str(path))
    assert cfg.flux == 0.25 and cfg.seeds == (0,)
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        parse_config(str(path))


def test_manifest_pins_flux():
    cfg = load_config_dict({"experiment": "theorem1", "B": 2, "L": 8, "V0": 0.3,
                            "seeds": 2, "discretization": {"n_x": 129}})
    params = cfg.model_params(flux=0.25)
    basis = cfg.basis(params)
    manifest = RunManifest.create(cfg, params, basis, cfg.energy_window(params), ["n"])
    d = json.loads(json.dumps(manifest.to_dict()))
    restored = RunManifest.from_dict(d)
    assert restored.seeds == [0, 1]
    assert restored.discretization["n_x"] == 129
    assert restored.derived["lattices"]["gap_experiment"] == 72
    assert restored.derived["log_base"] == "natural"
    assert restored.generator
    replay = restored.run_config()
    assert replay.flux == 0.25 and not replay.auto_flux
