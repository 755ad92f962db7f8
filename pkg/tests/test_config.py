import json

import numpy as np
import pytest

from schrodinger_ldp.config import load_config, parse_config, parse_grid
from schrodinger_ldp.exceptions import ConfigError

GOOD = """\
[model]
alpha = 0.5
etas = k^-4
M = 3
u0 = 1+1j, 0.5

[scheme]
name = exp-euler

[time]
tau = 0.1
taus = 0.1:0.4:4
Ns = 10, 100

[observables]
points = 1, 2j; 0.5
"""


def test_parse_grid():
    np.testing.assert_allclose(parse_grid("3.0:3.3:4"), [3.0, 3.1, 3.2, 3.3])
    assert parse_grid("1:1:1").tolist() == [1.0]
    for bad in ("1:2", "1:2:x", "1:2:0"):
        with pytest.raises(ValueError):
            parse_grid(bad)


def test_good_config():
    cfg = parse_config(GOOD)
    spec = cfg.noise_spec()
    assert spec.alpha == 0.5 and spec.n_modes == 3
    assert cfg.scheme().name == "exp-euler"
    assert cfg.get("time", "taus") == pytest.approx([0.1, 0.2, 0.3, 0.4])
    assert cfg.get("time", "Ns") == [10, 100]
    assert cfg.get("observables", "points") == [[1, 2j], [0.5]]
    np.testing.assert_allclose(cfg.u0(3).coeffs, [1 + 1j, 0.5, 0])
    assert cfg.echo()["model"]["u0"] == [[1.0, 1.0], [0.5, 0.0]]


def test_explicit_etas_and_modes():
    cfg = parse_config("[model]\nalpha = 1\netas = 1, 0.5, 0.25\nM = 2\nmodes = 3\n")
    assert cfg.noise_spec().n_modes == 3 and cfg.galerkin_M() == 2
    with pytest.raises(ConfigError):
        parse_config("[model]\nalpha = 1\netas = 1, 0.5\nmodes = 3\n").noise_spec()


@pytest.mark.parametrize("text,line", [
    ("[model]\nalpha = 1\nfoo = 2\n", 3),
    ("[model]\nalpha = 1\n\n[time]\ntau = -1\n", 5),
    ("[weird]\nx = 1\n", 1),
    ("[model]\nalpha = 1\nalpha = 2\n", 3),
    ("alpha = 1\n", 1),
    ("[model]\nalpha = 1\nM = two\n", 3),
    ("[model]\nalpha = 1\n\netas = 2, 3\nM = 2\n", 4),
    ("[model]\nalpha = nan\n", 2),
])
def test_errors_are_line_precise(text, line):
    with pytest.raises(ConfigError) as exc:
        cfg = parse_config(text)
        cfg.noise_spec()
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_unknown_scheme_line():
    cfg = parse_config("[scheme]\n\nname = leapfrog\n")
    with pytest.raises(ConfigError) as exc:
        cfg.scheme()
    assert exc.value.line == 3


def test_load_manifest(tmp_path):
    p = tmp_path / "manifest.json"
    p.write_text(json.dumps({"config_text": GOOD}))
    assert load_config(str(p)).get("model", "alpha") == 0.5
    p.write_text("{}")
    with pytest.raises(ConfigError):
        load_config(str(p))
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.ini"))
