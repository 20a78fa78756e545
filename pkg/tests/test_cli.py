import json

import pytest

from stochconv import cli, config as cfgmod
from stochconv.config import ExperimentConfig
from stochconv.model import GeneratorSpec

SMALL_DOOB = ExperimentConfig("small-doob", "doob", d=4, N=16, p=(2.0, 4.0), paths=5000, seed=7)


def _write(tmp_path, cfg, name="c.ini"):
    path = tmp_path / name
    path.write_text(cfgmod.dumps(cfg))
    return str(path)


def _report(directory):
    with open(directory / "report.json", encoding="utf-8") as fh:
        return json.load(fh)


def test_passing_experiment_exits_zero(tmp_path, capsys):
    assert cli.main(["cr-probe", "--out", str(tmp_path)]) == cli.EXIT_PASS
    rep = _report(tmp_path)
    assert rep["passed"] and rep["error"] is None and rep["kind"] == "cr-probe"
    assert rep["config_hash"] == cfgmod.config_hash(cfgmod.loads(rep["config"]))
    assert "pass" in capsys.readouterr().out


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["renorm-check"]) == cli.EXIT_PASS
    assert (tmp_path / "env" / "report.json").exists()


def test_config_errors_exit_two(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[experiment]\nkind = convolve\n[space]\nq = 0.5\n")
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["run", "--config", str(tmp_path / "missing.ini")]) == cli.EXIT_CONFIG
    # kind in the file must match the subcommand
    assert cli.main(["tail", "--config", _write(tmp_path, SMALL_DOOB), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    fam = ExperimentConfig("f", "convolve", family="wave")
    assert cli.main(["run", "--config", _write(tmp_path, fam), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["doob", "--seed", str(2**64), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["doob", "--threads", "0", "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    with pytest.raises(SystemExit):
        cli.main(["run"])


def test_numerical_error_exit_three(tmp_path, capsys):
    cfg = ExperimentConfig("unstable", "renorm-check",
                           generator=GeneratorSpec("matrix", None, 0, entries=("1", "0", "0", "-1")))
    out = tmp_path / "o"
    assert cli.main(["run", "--config", _write(tmp_path, cfg), "--out", str(out)]) == cli.EXIT_NUMERIC
    rep = _report(out)
    assert rep["error"]["type"] == "GeneratorError" and not rep["passed"]
    assert "numerical error" in capsys.readouterr().err


def test_check_filter_and_seed_override(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", "--config", _write(tmp_path, SMALL_DOOB), "--out", str(out),
                     "--check", "*l2-4*", "--seed", "11"]) == cli.EXIT_PASS
    rep = _report(out)
    assert rep["seed"] == 11 and cfgmod.loads(rep["config"]).seed == 11
    assert rep["checks"] and all("l2-4" in c["name"] for c in rep["checks"])


def test_report_bytes_do_not_depend_on_threads(tmp_path):
    path = _write(tmp_path, SMALL_DOOB)
    blobs = []
    for threads in (1, 2):
        out = tmp_path / f"t{threads}"
        assert cli.main(["run", "--config", path, "--out", str(out), "--threads", str(threads)]) == cli.EXIT_PASS
        blobs.append(((out / "report.json").read_bytes(), sorted(p.name for p in out.iterdir())))
    assert blobs[0] == blobs[1]
    for name in blobs[0][1]:
        assert (tmp_path / "t1" / name).read_bytes() == (tmp_path / "t2" / name).read_bytes()


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0 and "stochconv" in capsys.readouterr().out
