import json

import pytest
import tomli_w

from henonlab import cli, config

HORSESHOE = {"factors": [{"a": [0.1, 0.0], "coeffs": [[-6.0, 0.0]]}]}


def base(**sections):
    data = {"map": HORSESHOE, "seed": 11}
    data.update(sections)
    return data


def write_config(tmp_path, data, name="run.toml"):
    path = tmp_path / name
    if name.endswith(".toml"):
        path.write_text(tomli_w.dumps(data))
    else:
        path.write_text(json.dumps(data))
    return path


def test_config_errors_are_exhaustive():
    data = {"map": {"factors": [{"a": [0, 0], "coeffs": []}]}, "seed": -1, "bogus": 1,
            "census": {"n_max": 0, "colour": "red"}, "shadow": {"N_min": 9, "N_max": 4},
            "slice": {"kind": "affine", "resolution": 8}}
    errs = config.config_errors(data)
    for fragment in ("bogus: unknown field", "seed:", "census.n_max: must be positive",
                     "census.colour: unknown field", "shadow.N_min: must not exceed",
                     "slice.resolution: must be at least 16", "slice: affine slices need",
                     "nonzero"):
        assert any(fragment in e for e in errs), fragment


def test_resolve_fills_defaults():
    cfg = config.resolve(base())
    assert cfg["threads"] == 0 and cfg["precision"] == "double"
    assert cfg["shadow"]["N_max"] == 15 and cfg["slice"]["refine"] == 0


def test_config_hash_ignores_threads_and_out():
    a = config.resolve(base(threads=1, out="x"))
    b = config.resolve(base(threads=8, out="y"))
    c = config.resolve(base(seed=12))
    assert config.config_hash(a) == config.config_hash(b) != config.config_hash(c)


def test_shadow_budget_warning():
    warn = config.feasibility_warnings(config.resolve(base(shadow={"saddle_index": 1, "N_max": 40})))
    assert any("2^120" in w for w in warn)
    quiet = config.feasibility_warnings(
        config.resolve(base(precision="extended", shadow={"saddle_index": 1, "N_max": 40})))
    assert not any("2^120" in w for w in quiet)


def test_validate_command(tmp_path, capsys):
    good = write_config(tmp_path, base(), "good.json")
    assert cli.main(["validate", "--config", str(good)]) == cli.EXIT_OK
    assert json.loads(capsys.readouterr().out)["valid"] is True
    bad = write_config(tmp_path, {"map": HORSESHOE, "census": {"nmax": 3}}, "bad.toml")
    assert cli.main(["validate", "--config", str(bad)]) == cli.EXIT_CONFIG
    diag = json.loads(capsys.readouterr().out)
    assert diag["errors"] == ["census.nmax: unknown field"]


def test_config_failure_writes_record(tmp_path):
    rec, code = cli.run("census", {"map": {"factors": [{"a": [0, 0], "coeffs": [[-6, 0]]}]}},
                        tmp_path / "out")
    assert code == cli.EXIT_CONFIG
    saved = json.loads((tmp_path / "out" / "record.json").read_text())
    assert saved["status"] == "failed" and saved["error"]["type"] == "config"
    assert any("nonzero" in e for e in saved["error"]["errors"])


def test_unreadable_config(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("map = [")
    assert cli.main(["census", "--config", str(path), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_census_run(tmp_path):
    data = {"map": {"factors": [{"a": [0.5, 0.0], "coeffs": [[0.0, 0.0]]}]}, "census": {"n_max": 3}}
    rec, code = cli.run("census", data, tmp_path)
    assert code == cli.EXIT_OK and rec["status"] == "complete"
    lines = (tmp_path / "census.csv").read_text().splitlines()
    assert lines[1].split(",")[:4] == ["1", "2", "1", "0.5"]
    assert (tmp_path / "census.png").stat().st_size > 0
    assert set(rec) >= {"schema_version", "config_hash", "seed", "artifacts", "started", "finished"}


def _files(path):
    return {p.name: p.read_bytes() for p in path.iterdir() if p.name != "record.json"}


@pytest.mark.parametrize("sub", ["census", "slice", "shadow", "lyapunov", "render", "homoclinic"])
def test_reruns_are_bit_identical(tmp_path, sub):
    data = base(census={"n_max": 4}, slice={"saddle_index": 1, "resolution": 64, "refine": 2},
                shadow={"saddle_index": 1, "annulus": [0.1, 0.59], "N_max": 7},
                homoclinic={"saddle_index": 1, "annulus": [0.1, 0.59], "angular_steps": 32},
                lyapunov={"n_max": 5, "ensemble_size": 4}, render={"resolution": 48})
    r1, c1 = cli.run(sub, dict(data, threads=1), tmp_path / "a")
    r2, c2 = cli.run(sub, dict(data, threads=3), tmp_path / "b")
    assert c1 == c2 == cli.EXIT_OK
    assert r1["config_hash"] == r2["config_hash"]
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_missing_saddle_reports_failure(tmp_path):
    data = base(slice={"saddle_index": 7, "resolution": 32})
    rec, code = cli.run("slice", data, tmp_path)
    assert code == cli.EXIT_FAILED
    assert "out of range" in rec["error"]["message"]


def test_flags_override_config(tmp_path):
    path = write_config(tmp_path, base(render={"resolution": 32}))
    out = tmp_path / "r"
    assert cli.main(["render", "--config", str(path), "--out", str(out), "--seed", "5"]) == 0
    rec = json.loads((out / "record.json").read_text())
    assert rec["seed"] == 5
    assert json.loads((out / "config.resolved.json").read_text())["seed"] == 5
