import csv
import json

import numpy as np
import pytest

from kanemele.cli import load_config, main
from kanemele.errors import ConfigError
from kanemele.spectrum import critical_curve, dirac_eigenvalues
from kanemele.geometry import dirac_points


def run(tmp_path, command, cfg_text="", extra=(), name="out"):
    cfg = tmp_path / f"{name}.ini"
    cfg.write_text(cfg_text)
    out = tmp_path / name
    code = main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    return list(csv.DictReader(lines[1:]))


def test_bands_rows_and_dirac_energies(tmp_path):
    text = "[model]\nlambdaSO = 0.3\nw = 0.1\nlambdaR = 0.2\n[sweep]\npathPoints = 121\n"
    code, out = run(tmp_path, "bands", text)
    assert code == 0
    rows = read_csv(out / "bands.csv")
    assert len(rows) == 121
    kp = np.linalg.norm(dirac_points()[0])
    row = min(rows, key=lambda r: abs(float(r["k_path_param"]) - kp))
    assert abs(float(row["k_path_param"]) - kp) < 1e-12
    e = [float(row[f"E{i}"]) for i in range(1, 5)]
    assert np.max(np.abs(np.array(e) - dirac_eigenvalues(0.3, 0.1, 0.2))) < 1e-10


def test_outputs_are_deterministic(tmp_path):
    text = "[quadrature]\nbz_grid = 16\n"
    _, a = run(tmp_path, "cond", text, name="a")
    _, b = run(tmp_path, "cond", text, name="b")
    for f in ("cond.csv", "cond.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_manifest_lists_files_with_checksum(tmp_path):
    code, out = run(tmp_path, "bands", "", extra=["--plot"])
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "bands" and man["version"]
    assert "bands.csv.plot.py" in man["outputs"]
    for f in man["outputs"]:
        assert (out / f).exists()
        if f.endswith(".csv"):
            assert man["checksum"] in (out / f).read_text().splitlines()[0]


def test_seventeen_digits(tmp_path):
    _, out = run(tmp_path, "bands", "[model]\nlambdaSO = 0.3\n")
    row = read_csv(out / "bands.csv")[5]
    assert len(row["E1"].lstrip("-").replace(".", "").lstrip("0").split("e")[0]) == 17


def test_phase_boundaries(tmp_path):
    text = (
        "[model]\nlambdaSO = 0.3\nmu = critical\n[quadrature]\nbz_grid = 32\n"
        "[sweep]\nw_min = -0.45\nw_max = 0.45\nw_steps = 19\nlambdaR_min = 0.0\nlambdaR_max = 0.15\n"
        "lambdaR_steps = 2\nchern_grid = 24\n"
    )
    code, out = run(tmp_path, "phase", text)
    assert code == 0
    rows = read_csv(out / "phase.csv")
    step = 0.05
    for lr in (0.0, 0.15):
        sub = [r for r in rows if abs(float(r["lambdaR"]) - lr) < 1e-12]
        wc = critical_curve(0.3, lr)[0]
        for r in sub:
            w = float(r["w"])
            if abs(abs(w) - wc) > step:
                assert r["classification"] == "Insulator"
                assert r["spinChernOfPsc"] == ("1" if abs(w) < wc else "0")
        if lr == 0.0:
            gapless = sorted(float(r["w"]) for r in sub if r["classification"] != "Insulator")
            assert np.allclose(gapless, [-0.3, 0.3])
    curves = read_csv(out / "phase_curves.csv")
    assert len(curves) == 201


def test_cond_routes_agree(tmp_path):
    text = "[model]\nlambdaSO = 0.3\nw = 0.1\nlambdaR = 0.2\nr = 1.0\n[quadrature]\nbz_grid = 48\n"
    code, out = run(tmp_path, "cond", text)
    assert code == 0
    data = json.loads((out / "cond.json").read_text())
    assert set(data["results"]) == {"kubo", "matsubara"}
    assert abs(data["deltas"]["kubo-matsubara"]) < 1e-3
    assert all(r["antisymmetric"] for r in data["results"].values())


def test_cond_error_estimate_shrinks_with_grid(tmp_path):
    text = "[model]\nlambdaSO = 0.3\nw = 0.1\nlambdaR = 0.2\n[sweep]\nroutes = kubo\n"
    errs = []
    for n in (24, 48):
        _, out = run(tmp_path, "cond", text, extra=["--grid", str(n)], name=f"g{n}")
        errs.append(json.loads((out / "cond.json").read_text())["results"]["kubo"]["errorEstimate"])
    assert errs[1] < errs[0]


def test_jump_and_scaling_commands(tmp_path):
    text = (
        "[model]\nlambdaSO = 1.0\nlambdaR = 0.1\nr = 0.0\n[quadrature]\nbz_grid = 32\nsubgrid = 6\n"
        "[sweep]\nm_ladder = 0.04, 0.02\n"
    )
    code, out = run(tmp_path, "jump", text, name="jump")
    assert code == 0
    data = json.loads((out / "jump.json").read_text())
    assert data["closedForm"] == pytest.approx(-1 / (2 * np.pi), rel=1e-15)
    assert data["relativeError"] < 0.05
    text = "[model]\nlambdaSO = 1.0\nr = 1.0\n[quadrature]\nbz_grid = 48\n[sweep]\nlambdaR_values = 0.05, 0.1\nm = 0.3\n"
    code, out = run(tmp_path, "scaling", text, name="scaling")
    assert code == 0
    assert 1.8 <= json.loads((out / "scaling.json").read_text())["slope"] <= 2.2


def test_flake_command(tmp_path):
    code, out = run(tmp_path, "flake", "[sweep]\nL = 8\n", extra=["--threads", "1"])
    assert code == 0
    data = json.loads((out / "flake.json").read_text())
    assert data["route"] == "flake" and data["L"] == 8


def test_check_command(tmp_path, capsys):
    code = main(["check", "--out", str(tmp_path / "chk")])
    assert code == 0
    assert capsys.readouterr().out.count("PASS") == 6


def test_config_error_exit_code(tmp_path, capsys):
    code, out = run(tmp_path, "bands", "[model]\nt = 1.0\nlambdaSO = abc\n")
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert "line 3" in err["message"] and "lambdaSO" in err["message"]
    assert (out / "error.json").exists()


def test_unknown_key_and_section():
    with pytest.raises(ConfigError, match="line 2"):
        load_config(text="[model]\nbogus = 1\n")
    with pytest.raises(ConfigError):
        load_config(text="[extra]\nx = 1\n")
    with pytest.raises(ConfigError):
        load_config(text="not an ini")


def test_phase_error_exit_code(tmp_path):
    wc = critical_curve(1.0, 0.1)[0]
    text = f"[model]\nlambdaSO = 1.0\nlambdaR = 0.1\nw = {wc!r}\nmu = critical\n[quadrature]\nbz_grid = 16\nradius = 1.0\n"
    code, _ = run(tmp_path, "cond", text)
    assert code == 3


def test_convergence_error_exit_code(tmp_path):
    text = "[quadrature]\nbz_grid = 4\nk0_tol = 1e-30\n[sweep]\nroutes = matsubara\n"
    code, _ = run(tmp_path, "cond", text)
    assert code == 4


def test_defaults_resolve():
    cfg = load_config()
    assert cfg["quadrature"]["bz_grid"] == 96
    assert cfg["sweep"]["lambdaR_values"] == [0.02, 0.04, 0.08, 0.16]
