import json

import pytest

from pbitnqs.config import SCHEMA, ConfigError, load_config, parse_config

MINIMAL = "lattice.L = 3\n"


def test_defaults_fill_in():
    rc = parse_config(MINIMAL)
    assert rc["lattice.L"] == 3 and rc["model.arch"] == "frbm" and rc["lattice.gamma"] == 3.044
    tc = rc.training_config()
    assert tc.L == 3 and tc.burn_in == 30 and tc.profile == "algorithmic"


def test_missing_required_key():
    with pytest.raises(ConfigError, match="lattice.L"):
        parse_config("model.arch = dbm\n").training_config()


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="lattice.size"):
        parse_config("lattice.size = 3\n")


@pytest.mark.parametrize("text", ["lattice.L = three\n", "lattice.L = 3\nmodel.arch = cnn\n",
                                  "lattice.L = 3\noptimizer.profile = turbo\n",
                                  "lattice.L = 3\nquantization.enabled = maybe\n",
                                  "[model]\narch = dbm\n", "lattice.L = 3\nlattice.L = 4\n"])
def test_bad_values(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_semantic_errors_become_config_errors():
    with pytest.raises(ConfigError):
        parse_config("lattice.L = 3\nsampling.ns = 0\n").training_config()


def test_parsing_details():
    rc = parse_config("# comment\n; also comment\nlattice.L = 4  # inline\nmodel.arch = RBM\n"
                      "partition.taus = 1, 3 7\nquantization.enabled = yes\n"
                      "optimizer.eta_max = 0.2\n")
    assert rc["model.arch"] == "frbm" and rc["partition.taus"] == [1, 3, 7]
    tc = rc.training_config()
    assert tc.quantize and tc.schedule_overrides == {"eta_max": 0.2}


def test_round_trip_and_hash():
    rc = parse_config("lattice.L = 4\nmodel.arch = dbm\npartition.taus = 1 2\nquantization.enabled = true\n")
    again = parse_config(rc.to_text())
    assert again.values == rc.values and again.hash() == rc.hash()
    assert parse_config("lattice.L = 5\n").hash() != rc.hash()
    # spelling out a default does not change the resolved config
    assert parse_config("lattice.L = 4\nlattice.J = 1.0\n").hash() == parse_config("lattice.L = 4\n").hash()


def test_every_schema_key_has_namespace():
    assert all(k.count(".") == 1 for k in SCHEMA)


def test_load_from_file_and_manifest(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("lattice.L = 3\nrun.seed = 7\n")
    rc = load_config(p)
    m = tmp_path / "manifest.json"
    m.write_text(json.dumps({"config_text": rc.to_text()}))
    assert load_config(m).hash() == rc.hash()
    (tmp_path / "bad.json").write_text("{}")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")
