import csv

import pytest

from risisac.cli import main
from risisac.geometry import SceneConfig


def test_no_subcommand_prints_usage(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_unknown_experiment_exits_2(tmp_path, capsys):
    code = main(["experiment", "nosuch", "--out", str(tmp_path / "x.csv")])
    assert code == 2
    assert "unknown experiment" in capsys.readouterr().err


def test_validate_config_ok_and_violation(tmp_path, capsys):
    good = tmp_path / "good.cfg"
    SceneConfig(case=3).to_file(good)
    assert main(["validate-config", str(good)]) == 0

    bad = tmp_path / "bad.cfg"
    bad.write_text("n_ris = 8\nn_ut = 16\n")
    assert main(["validate-config", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "n_ris must be >= n_ut + 2" in err

    assert main(["validate-config", str(tmp_path / "missing.cfg")]) == 2


def test_experiment_writes_csv_and_flags_override_config(tmp_path):
    conf = tmp_path / "exp.cfg"
    conf.write_text("trials = 5\npowers = 40\nseed = 2\n")
    out = tmp_path / "out.csv"
    code = main(["experiment", "pos-los", "--out", str(out),
                 "--config", str(conf), "--trials", "1", "--powers", "50"])
    assert code == 0
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 2  # header + 1 trial x 1 power
    assert rows[1][2] == "50"


def test_seed_env_variable(tmp_path, monkeypatch):
    monkeypatch.setenv("RISISAC_SEED", "11")
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert main(["experiment", "pos-los", "--out", str(a),
                 "--trials", "1", "--powers", "50"]) == 0
    assert main(["experiment", "pos-los", "--out", str(b),
                 "--trials", "1", "--powers", "50", "--seed", "11"]) == 0

    def strip_runtime(path):
        with open(path) as fh:
            rows = list(csv.reader(fh))
        return [row[:-1] for row in rows]

    assert strip_runtime(a) == strip_runtime(b)


def test_simulate_smoke(tmp_path, capsys):
    conf = tmp_path / "scene.cfg"
    SceneConfig(case=1, l_br=1, l_bu=1, l_ru=1, n_targets=1,
                noise_power_dbm=None).to_file(conf)
    assert main(["simulate", "--config", str(conf), "--seed", "4"]) == 0
    out = capsys.readouterr().out
    assert "positioning trial" in out
    assert "gain_proposed" in out
