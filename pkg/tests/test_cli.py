"""Config parsing, serialization and the experiment runner surface.

Runs go through cli.main in process (no subprocess) so coverage and
tracebacks stay useful. Solver work is kept tiny; the physics behind
each runner has its own test module.
"""

from __future__ import annotations

import json

import numpy as np
import pytest

import superburst.cli as cli
from superburst.cli import (
    ConfigError,
    ExperimentConfig,
    IntegrationConfig,
    PointConfig,
    build_preset,
    parse_config,
    run_preset,
    serialize_config,
)

_POINT_INI = """\
[experiment]
kind = point-model

[point]
model = lambda
rates = 0.6, 0.4
n_atoms = 8

[integration]
t_max_gamma0 = 2.0
samples = 60

[output]
directory = {out}
"""


def _write(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_parse_serialize_round_trip():
    text = """
[experiment]
kind = exact-benchmark
solver = mcwf
channel = g

[atoms]
species = ideal
rate = 2.5e6
wavelength_nm = 689

[array]
n_x = 2
n_y = 3
spacing_nm = 150.5

[detector]
theta_deg = 90
phi_deg = 45

[integration]
t_max_gamma0 = 4.0
rel_tol = 1e-7
abs_tol = 1e-9
samples = 101

[trajectories]
count = 32
seed = 7

[output]
directory = out/run1
"""
    cfg = parse_config(text)
    assert cfg.solver == "mcwf" and cfg.array.n_y == 3
    assert cfg.trajectories.seed == 7
    again = parse_config(serialize_config(cfg))
    assert again == cfg
    # serialization is a fixed point, which the config hash relies on
    assert serialize_config(again) == serialize_config(cfg)


def test_parse_serialize_round_trip_tuples():
    text = """
[experiment]
kind = scaling

[point]
model = ladder
rates = 1.0, 0.5
sizes = 20 30 40 50
fit_n_min = 25
"""
    cfg = parse_config(text)
    assert cfg.point.rates == (1.0, 0.5)
    assert cfg.point.sizes == (20, 30, 40, 50)
    assert parse_config(serialize_config(cfg)) == cfg


@pytest.mark.parametrize("text, fragment", [
    ("[point]\nmodel = lambda\n", "missing [experiment]"),
    ("[experiment]\nkind = warp\n", "kind must be one of"),
    ("[experiment]\nkind = cumulant\nbogus = 1\n", "unknown keys"),
    ("[experiment]\nkind = point-model\n", "requires a [point] section"),
    ("[experiment]\nkind = cumulant\n\n[atoms]\nspecies = Cs133\n"
     "\n[array]\nn_x = 2\nn_y = 2\nspacing_nm = 100\n", "unknown species"),
    ("[experiment]\nkind = cumulant\n\n[atoms]\nspecies = Yb174\n"
     "initial_state = D9_m9\n\n[array]\nn_x = 2\nn_y = 2\n"
     "spacing_nm = 100\n", "unknown initial_state"),
    ("[experiment]\nkind = point-model\n\n[point]\nmodel = lambda\n"
     "rates = 0.6 0.4\nn_atoms = 0\n", "n_atoms"),
    ("[experiment]\nkind = point-model\n\n[point]\nmodel = lambda\n"
     "rates = 0.6 0.4\nn_atoms = four\n", "invalid literal"),
    ("[experiment]\nkind = preset\npreset_name = fig99\n",
     "preset_name must be one of"),
])
def test_parse_rejects_bad_configs(text, fragment):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert fragment in str(err.value)


def test_run_point_model_writes_bundle(tmp_path, capsys):
    out = tmp_path / "bundle"
    cfg_path = _write(tmp_path, _POINT_INI.format(out=out))
    assert cli.main(["run", str(cfg_path)]) == 0
    assert (out / "exp.csv").exists()
    assert (out / "configs" / "exp.ini").exists()
    summary = json.loads((out / "summary.json").read_text())
    run = summary["runs"]["exp"]
    assert run["n_atoms"] == 8
    assert run["peaks"]["total"]["burst"] is True
    assert run["photon_shares"].keys() == {"eg", "eh"}
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["partial_output"] is False
    assert len(manifest["config_hash"]) == 64
    assert "outputs in" in capsys.readouterr().out


def test_run_missing_and_malformed_config_exit_2(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "absent.ini")]) == 2
    bad = _write(tmp_path, "[experiment]\nkind = nonsense\n")
    assert cli.main(["run", str(bad)]) == 2
    assert "config error" in capsys.readouterr().err


def test_solver_failure_exits_3_and_marks_partial(tmp_path, capsys):
    """A config can be well formed yet fail at run time (atom cap)."""
    text = """\
[experiment]
kind = exact-benchmark

[atoms]
species = ideal

[array]
n_x = 4
n_y = 3
spacing_nm = 200

[integration]
t_max_gamma0 = 1.0
samples = 20

[output]
directory = {out}
""".format(out=tmp_path / "bundle")
    cfg_path = _write(tmp_path, text, name="toobig.ini")
    assert cli.main(["run", str(cfg_path)]) == 3
    assert "toobig failed" in capsys.readouterr().err
    manifest = json.loads(
        (tmp_path / "bundle" / "manifest.json").read_text())
    assert manifest["partial_output"] is True
    assert "error" in manifest["runs"][0]


def _tiny_preset(passes):
    def build(seed, quick):
        runs = [("solo", ExperimentConfig(
            kind="point-model",
            point=PointConfig("lambda", (2.0 / 3.0, 1.0 / 3.0), n_atoms=6),
            integration=IntegrationConfig(t_max_gamma0=1.0, samples=40)))]

        def checks(results):
            return [("tiny gate", passes, "pinned")]

        return runs, checks
    return build


def test_preset_check_gates_exit_code(tmp_path, monkeypatch, capsys):
    monkeypatch.setitem(cli._PRESETS, "tinycase", _tiny_preset(True))
    assert run_preset("tinycase", out=str(tmp_path / "ok"), check=True) == 0
    summary = json.loads((tmp_path / "ok" / "summary.json").read_text())
    assert summary["checks"] == [
        {"name": "tiny gate", "passed": True, "detail": "pinned"}]

    monkeypatch.setitem(cli._PRESETS, "tinycase", _tiny_preset(False))
    assert run_preset("tinycase", out=str(tmp_path / "no"), check=True) == 4
    assert "check FAIL: tiny gate" in capsys.readouterr().err
    # without --check the bundle still writes and reports success
    assert run_preset("tinycase", out=str(tmp_path / "lax"), check=False) == 0


def test_build_preset_rejects_unknown_name():
    with pytest.raises(ConfigError, match="unknown preset"):
        build_preset("fig99")


def test_rerun_is_byte_identical(tmp_path):
    paths = []
    for tag in ("one", "two"):
        out = tmp_path / tag
        cfg_path = _write(tmp_path, _POINT_INI.format(out=out),
                          name=f"{tag}.ini")
        assert cli.main(["run", str(cfg_path)]) == 0
        paths.append(out / f"{tag}.csv")
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_mcwf_runs_reproduce_per_seed(tmp_path):
    text = """\
[experiment]
kind = exact-benchmark
solver = mcwf

[atoms]
species = ideal

[array]
n_x = 2
n_y = 1
spacing_nm = 200

[integration]
t_max_gamma0 = 2.0
samples = 30

[trajectories]
count = 40
seed = {seed}

[output]
directory = {out}
"""
    outs = {}
    for tag, seed in (("a", 77), ("b", 77), ("c", 78)):
        out = tmp_path / tag
        cfg_path = _write(tmp_path, text.format(seed=seed, out=out),
                          name=f"mc_{tag}.ini")
        assert cli.main(["run", str(cfg_path)]) == 0
        outs[tag] = (out / f"mc_{tag}.csv").read_bytes()
    assert outs["a"] == outs["b"]
    assert outs["a"] != outs["c"]


def test_parallel_bundle_matches_serial(tmp_path, monkeypatch):
    """--threads distributes runs over processes without changing bytes."""
    def build(seed, quick):
        runs = []
        for n in (5, 9):
            runs.append((f"n{n}", ExperimentConfig(
                kind="point-model",
                point=PointConfig("lambda", (0.6, 0.4), n_atoms=n),
                integration=IntegrationConfig(t_max_gamma0=1.5, samples=50))))
        return runs, lambda results: []
    monkeypatch.setitem(cli._PRESETS, "pair", build)
    assert run_preset("pair", out=str(tmp_path / "serial"), threads=1) == 0
    assert run_preset("pair", out=str(tmp_path / "forked"), threads=2) == 0
    for name in ("n5.csv", "n9.csv", "summary.json"):
        assert (tmp_path / "serial" / name).read_bytes() \
            == (tmp_path / "forked" / name).read_bytes()


def test_output_root_env_prefixes_relative_paths(tmp_path, monkeypatch):
    monkeypatch.setenv("SUPERBURST_OUT", str(tmp_path / "root"))
    cfg_path = _write(tmp_path, _POINT_INI.format(out="nested/exp"))
    assert cli.main(["run", str(cfg_path)]) == 0
    assert (tmp_path / "root" / "nested" / "exp" / "exp.csv").exists()

    monkeypatch.setitem(cli._PRESETS, "tinycase", _tiny_preset(True))
    assert run_preset("tinycase") == 0
    assert (tmp_path / "root" / "tinycase" / "manifest.json").exists()


def test_inspect_reports_bundle(tmp_path, capsys):
    out = tmp_path / "bundle"
    cfg_path = _write(tmp_path, _POINT_INI.format(out=out))
    assert cli.main(["run", str(cfg_path)]) == 0
    capsys.readouterr()
    assert cli.main(["inspect", str(out / "manifest.json")]) == 0
    text = capsys.readouterr().out
    assert "bundle:   exp" in text
    assert "[ok] exp (point-model) -> exp.csv" in text
    assert cli.main(["inspect", str(out / "nope.json")]) == 2
