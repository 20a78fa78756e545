import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochconv import config as cfgmod
from stochconv import report
from stochconv.config import ConfigError, ExperimentConfig
from stochconv.model import GeneratorSpec

names = st.text("abcdefghijklmnopqrstuvwxyz0123456789-_", min_size=1, max_size=12).filter(lambda s: s[0].isalpha())
pos = st.floats(1e-6, 1e6, allow_nan=False)

configs = st.builds(
    ExperimentConfig,
    id=names,
    kind=st.sampled_from(cfgmod.KINDS),
    generator=st.builds(GeneratorSpec, kind=st.just("spectral"), preset=st.sampled_from(["heat", None]),
                        d=st.integers(1, 64),
                        eigenvalues=st.lists(st.sampled_from(["1", "2.5", "1+2j", "0.25-1j"]), max_size=3).map(tuple)),
    q=st.lists(st.floats(1.0, 50.0), min_size=1, max_size=3).map(tuple),
    d=st.integers(1, 256),
    family=names,
    T=pos,
    N=st.integers(1, 4096),
    refinements=st.integers(0, 6),
    steps=st.lists(st.integers(1, 512), max_size=4).map(tuple),
    p=st.lists(pos, min_size=1, max_size=4).map(tuple),
    paths=st.integers(1, 10**7),
    seed=st.integers(0, 2**64 - 1),
    thresholds=st.dictionaries(names, st.floats(-1e9, 1e9), max_size=3).map(lambda d: tuple(sorted(d.items()))),
)


@given(configs)
def test_config_round_trip_is_exact(cfg):
    text = cfgmod.dumps(cfg)
    back = cfgmod.loads(text)
    assert back == cfg
    assert cfgmod.dumps(back) == text
    assert cfgmod.config_hash(back) == cfgmod.config_hash(cfg)


def test_hash_changes_with_any_field():
    cfg = ExperimentConfig("x", "convolve")
    assert cfgmod.config_hash(cfg) != cfgmod.config_hash(cfg.with_seed(1))
    assert len(cfgmod.config_hash(cfg)) == 64
    assert "seed" in cfgmod.field_names()


@pytest.mark.parametrize("text, field", [
    ("[experiment]\nkind = convolve\n[space]\nq = 0.5\n", "space.q"),
    ("[experiment]\nkind = bogus\n", "experiment.kind"),
    ("[experiment]\nkind = convolve\n[grid]\nN = many\n", "grid.N"),
    ("[experiment]\nkind = convolve\n[grid]\nT = -1\n", "grid.T"),
    ("[experiment]\nkind = convolve\n[sampling]\nseed = -3\n", "sampling.seed"),
    ("[experiment]\nkind = convolve\n[generator]\neigenvalues = 1, x\n", "generator.eigenvalues"),
    ("[space]\nq = 2\n", "experiment"),
    ("not an ini file", "config syntax"),
])
def test_config_errors_name_the_field(text, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        cfgmod.loads(text)


def test_q_message():
    with pytest.raises(ConfigError, match="q must be ≥ 1"):
        ExperimentConfig("x", "convolve", q=(0.5,))


def test_threshold_lookup(tmp_path):
    cfg = ExperimentConfig("x", "tail", thresholds=(("slack", 3.0),))
    assert cfg.threshold("slack", 1.0) == 3.0 and cfg.threshold("other", 1.0) == 1.0
    path = tmp_path / "c.ini"
    path.write_text(cfgmod.dumps(cfg))
    assert cfgmod.load(path) == cfg


def test_check_records():
    rec = report.check("A00-demo", np.float64(1.5), 2.0, True, "mc", ci=(1.0, 2.0), n=np.int64(3))
    assert rec["verdict"] == "pass" and rec["detail"]["n"] == 3 and rec["ci"] == [1.0, 2.0]
    assert report.check("x", float("nan"), None, False, "exact")["statistic"] == "nan"
    with pytest.raises(ValueError, match="confidence interval"):
        report.check("x", 1.0, 1.0, True, "mc")
    with pytest.raises(ValueError):
        report.check("x", 1.0, 1.0, True, "guess")


def test_json_and_csv_are_deterministic(tmp_path):
    rep = {"b": [1.0, float("inf")], "a": {"z": np.float32(0.5), "y": (1, 2)}}
    text = report.dumps(rep)
    assert text == report.dumps(dict(reversed(list(rep.items()))))
    assert json.loads(text)["b"][1] == "inf"
    t = report.Table("demo", ["x", "y"], [(0.1, None), (1, "a")])
    path = t.write(str(tmp_path), "p_")
    assert open(path, "rb").read() == b"x,y\n0.1,\n1,a\n"
    res = report.Result([report.check("x", 1.0, 1.0, True, "exact")])
    assert res.passed
    res.error = {"type": "ArithmeticError", "message": "boom"}
    assert not res.passed
