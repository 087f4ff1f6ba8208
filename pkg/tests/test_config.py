import numpy as np
import pytest
import yaml

from polycycle.config import ConfigError, config_hash, load_family, parse_family, parse_lambda_args

BASE = {
    "name": "toy",
    "parameters": ["a"],
    "field": {"P": "x", "Q": "-a*y"},
    "lambda": [[2.0]],
}


def test_shipped_families_load(families_dir):
    for p in sorted(families_dir.glob("*.yaml")):
        cfg = load_family(p)
        assert cfg.name and cfg.family.n_params == len(cfg.raw.get("parameters", []))


def test_loop_blocks(bt, pendulum):
    assert bt.loop.kind == "one-saddle" and bt.hamiltonian is not None
    assert pendulum.loop.kind == "two-saddle"
    assert pendulum.loop.sigma.axis == "line" and np.hypot(*pendulum.loop.sigma.direction) == pytest.approx(1)


def test_term_lists():
    cfg = parse_family({"parameters": ["a"], "field": {"P_terms": [[1, 0, 1]], "Q_terms": [[0, 1, "-a"]]}})
    P, Q = cfg.family(1.0, 2.0, [3.0])
    assert (P, Q) == (1.0, -6.0)


@pytest.mark.parametrize("bad, msg", [
    ({"parameters": ["a"]}, "missing key 'field'"),
    ({**BASE, "field": {"P": "x"}}, "either P and Q"),
    ({**BASE, "field": {"P": "x +", "Q": "y"}}, "cannot parse"),
    ({**BASE, "lambda": [[1.0, 2.0]]}, "expected 1 components"),
    ({**BASE, "loop": {"kind": "three-saddle"}}, "unknown kind"),
    ({**BASE, "loop": {"kind": "one-saddle", "saddles": [[0, 0], [1, 1]], "interior": [1, 1]}}, "needs 1"),
    ({**BASE, "loop": {"kind": "two-saddle", "saddles": [[0, 0], [1, 1]], "interior": [1, 1]}}, "sigma"),
    ({**BASE, "radius": -1}, "radius"),
    ({**BASE, "hamiltonian": {"H": "x*y", "A": "y", "center": [0, 0]}}, "hamiltonian"),
    ([1, 2], "mapping"),
])
def test_malformed(bad, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_family(bad)


def test_missing_and_invalid_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_family(tmp_path / "none.yaml")
    p = tmp_path / "bad.yaml"
    p.write_text("field: {P: [x\n")
    with pytest.raises(ConfigError, match="YAML"):
        load_family(p)
    p.write_text(yaml.safe_dump(BASE))
    assert load_family(p).lambdas == [[2.0]]


def test_lambda_sweeps():
    assert parse_lambda_args(["0.1,0.2"], 2) == [[0.1, 0.2]]
    grid = parse_lambda_args(["0:1:3,5"], 2)
    assert grid == [[0.0, 5.0], [0.5, 5.0], [1.0, 5.0]]
    assert len(parse_lambda_args(["0:1:2,0:1:3"], 2)) == 6
    for bad in (["1"], ["1,x"], ["0:1,2"], ["0:1:0,2"]):
        with pytest.raises(ConfigError):
            parse_lambda_args(bad, 2)


def test_config_hash_is_canonical():
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
