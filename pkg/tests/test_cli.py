import json
import subprocess
import sys
from pathlib import Path

import pytest

from topophase import cli

PHASE = """
[experiment]
mode = "phase"

[[sources.electric]]
position = [0.0, 0.0]
strength = 2

[particle]
mu_m = 0.3
s_hat = 1

[geometry.path]
kind = "square"
side = 3.0
"""


def run_cli(tmp_path, text, *args, name="spec.toml"):
    spec = tmp_path / name
    spec.write_text(text)
    out = tmp_path / "out"
    code = cli.main([str(spec), "--out", str(out), *args])
    doc = json.loads((out / "result.json").read_text())
    return code, doc, out


def test_parse_minimal_identities():
    spec = cli.parse_spec('[experiment]\nmode = "identities"\n')
    assert spec.mode == "identities"
    assert spec.seed == 0
    assert spec.tolerances == cli.DEFAULT_TOLERANCES


def test_parse_phase_roundtrip():
    spec = cli.parse_spec(PHASE, strict=True)
    assert spec.config.electric_charges[0].strength == 2
    doc = spec.to_dict()
    again = cli.parse_spec(json.dumps({
        "experiment": {"mode": doc["mode"], "seed": doc["seed"], "threads": doc["threads"], "effect": doc["effect"]},
        "sources": {"electric": [{"position": list(s["position"]), "strength": s["strength"]}
                                 for s in doc["sources"]["electric"]]},
        "particle": doc["particle"],
        "geometry": doc["geometry"],
    }), strict=True)
    assert again.to_dict() == doc


def test_open_path_diagnostic():
    text = PHASE.replace('kind = "square"', 'kind = "polygon"\nvertices = [[1, 1], [-1, 1], [-1, -1]]\nclosed = false')
    with pytest.raises(cli.SpecError) as err:
        cli.parse_spec(text)
    msgs = [d.message for d in err.value.diagnostics]
    assert "path must be closed" in msgs
    d = next(d for d in err.value.diagnostics if d.message == "path must be closed")
    assert d.key == "geometry.path.closed"
    assert text.splitlines()[d.line - 1].startswith("closed")


def test_strict_unknown_keys_and_missing_required():
    text = PHASE.replace("s_hat = 1", "s_hat = 1\nspin_flavour = 2").replace("mu_m = 0.3\n", "")
    with pytest.raises(cli.SpecError) as err:
        cli.parse_spec(text, strict=True)
    assert [d.key for d in err.value.diagnostics] == ["particle.spin_flavour"]
    with pytest.raises(cli.SpecError) as err:
        cli.parse_spec(text)
    assert [d.key for d in err.value.diagnostics] == ["particle.mu_m"]


def test_bad_values_all_reported():
    text = '[experiment]\nmode = "phase"\nseed = -1\n[tolerances]\ndiscrepancy = 0\n[particle]\ns_hat = 2\nmu_m = 1\n'
    with pytest.raises(cli.SpecError) as err:
        cli.parse_spec(text)
    keys = {d.key for d in err.value.diagnostics}
    assert {"experiment.seed", "tolerances.discrepancy", "particle.s_hat", "geometry.path"} <= keys


def test_syntax_error_has_line():
    with pytest.raises(cli.SpecError) as err:
        cli.parse_spec('[experiment]\nmode = "phase\n')
    assert err.value.diagnostics[0].line == 2


def test_identities_run(tmp_path):
    code, doc, _ = run_cli(tmp_path, '[experiment]\nmode = "identities"\n')
    assert code == 0
    assert doc["schema"] == 1
    assert len(doc["results"]["product_identity"]) == 9
    assert all(v == 0.0 for v in doc["results"]["product_identity"].values())


def test_phase_run(tmp_path):
    code, doc, _ = run_cli(tmp_path, PHASE)
    assert code == 0
    r = doc["results"]
    assert r["theta"] == pytest.approx(-0.6, abs=1e-9)
    assert r["analytic_exact"] == "-3/5"
    assert r["discrepancy"] < 1e-9


def test_deterministic_output(tmp_path):
    run_cli(tmp_path, PHASE)
    first = (tmp_path / "out" / "result.json").read_bytes()
    run_cli(tmp_path, PHASE)
    assert (tmp_path / "out" / "result.json").read_bytes() == first


def test_seventeen_digits():
    assert cli.to_json({"b": 0.1, "a": 1}) == '{\n  "a": 1,\n  "b": 0.10000000000000001\n}'
    assert cli.to_json(2.0) == "2.0"


def test_phase_sweep_csv(tmp_path):
    text = PHASE.replace("mu_m = 0.3\n", "") + "\n[sweep]\nvalues = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]\n"
    code, doc, out = run_cli(tmp_path, text)
    assert code == 0
    raw = (out / "series.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == "mu_m,theta,analytic_theta,discrepancy"
    assert len(lines) == 10
    assert len(doc["results"]["sweep"]) == 9


def test_duality_run(tmp_path):
    text = PHASE.replace('mode = "phase"', 'mode = "duality"')
    code, doc, _ = run_cli(tmp_path, text)
    assert code == 0
    pair = doc["results"]["pairs"][0]
    assert pair["swap_consistent"] is True
    assert pair["AC"]["line_integral"] == pair["HMW"]["line_integral"]
    assert pair["HMW"]["theta"] == -pair["AC"]["theta"]


def test_json_input(tmp_path):
    text = json.dumps({"experiment": {"mode": "spin1"},
                       "particle": {"kappa_m": 1, "tau_m": 1, "e": 1, "m": 2, "s_prime": -1, "Lambda": 4}})
    code, doc, _ = run_cli(tmp_path, text, name="spec.json")
    assert code == 0
    assert doc["results"]["phase_exact"] == "-2"
    assert doc["results"]["moments"]["quadrupole_free"] is True


def test_spectrum_run(tmp_path):
    text = '[experiment]\nmode = "spectrum"\n[particle]\nS = 1\n[spectrum]\ndraws = 3\n'
    code, doc, _ = run_cli(tmp_path, text)
    assert code == 0
    assert doc["results"]["spectrum"] == [-2, 0, 2]
    assert doc["results"]["dimension"] == 10


def test_scalar_run(tmp_path):
    text = ('[experiment]\nmode = "scalar"\n[[sources.electric]]\nposition = [0.0, 0.0]\nstrength = 1\n'
            '[particle]\ng = 0.5\n[geometry]\nregion = [1.0, 3.0, -1.0, 1.0]\n')
    code, doc, out = run_cli(tmp_path, text)
    assert code == 0
    assert doc["results"]["separation"] > 10
    assert (out / "series.csv").exists()


def test_check_failure_exit_1(tmp_path):
    text = ('[experiment]\nmode = "scalar"\n[[sources.electric]]\nposition = [0.0, 0.0]\nstrength = 1\n'
            '[particle]\ng = 0.5\n[geometry]\nregion = [1.0, 3.0, -1.0, 1.0]\n[tolerances]\nseagull_ratio = 1e9\n')
    code, doc, _ = run_cli(tmp_path, text)
    assert code == 1
    assert doc["passed"] is False


def test_invalid_spec_exit_2(tmp_path):
    code, doc, _ = run_cli(tmp_path, '[experiment]\nmode = "teleport"\n')
    assert code == 2
    assert doc["error"]["diagnostics"][0]["key"] == "experiment.mode"


def test_runtime_failure_exit_3(tmp_path):
    text = PHASE.replace("position = [0.0, 0.0]", "position = [1.5, 0.0]")
    code, doc, _ = run_cli(tmp_path, text)
    assert code == 3
    assert doc["error"]["type"] == "GeometryError"


def test_evolve_zero_moment(tmp_path):
    text = """
[experiment]
mode = "evolve"
[[sources.electric]]
position = [0.0, 0.0]
strength = 1
[particle]
mu_m = 0.0
s_hat = 1
[geometry.arms]
start = [-17.0, 0.0]
end = [17.0, 0.0]
offset = 9.0
momentum = 4.0
width = 1.5
[geometry.grid]
n = 96
h = 0.5
[evolve]
dt = 0.3
snapshot_every = 20
"""
    code, doc, out = run_cli(tmp_path, text, "--threads", "1")
    assert code == 0
    assert abs(doc["results"]["interference"]["extracted_phase"]) < 1e-9
    header = (out / "series.csv").read_text().splitlines()[0]
    assert header == ",".join(cli.diracsim.SERIES_COLUMNS)


def test_seed_override_recorded(tmp_path):
    c1, d1, _ = run_cli(tmp_path, PHASE, "--seed", "5")
    assert c1 == 0 and d1["spec"]["seed"] == 5


def test_module_entry_point(tmp_path):
    spec = tmp_path / "id.toml"
    spec.write_text('[experiment]\nmode = "identities"\n')
    res = subprocess.run([sys.executable, "-m", "topophase", str(spec), "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert Path(tmp_path / "result.json").exists()
