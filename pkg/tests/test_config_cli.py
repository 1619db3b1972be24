import json

import pytest
from hypothesis import given, strategies as st

from cglm.cli import main
from cglm.config import ConfigError, ExperimentConfig, load_config, parse_config
from cglm.experiments import compare_methods, run_experiment


def test_shipped_configs_parse(configs_dir):
    for path in sorted(configs_dir.glob("*.ini")):
        cfg = load_config(path)
        assert cfg.experiment in path.stem or cfg.experiment == "global-local"


def test_fraction_values():
    cfg = parse_config("[experiment]\nid = ex1\n[mesh]\nladder = 1/10, 1/20\nreference = 800\n")
    assert cfg.ladder == [0.1, 0.05]


def test_increasing_ladder_rejected():
    with pytest.raises(ConfigError, match="strictly decreasing"):
        parse_config("[experiment]\nid = ex1\n[mesh]\nladder = 1/20, 1/10\nreference = 800\n")


def test_coarse_reference_rejected():
    with pytest.raises(ConfigError, match="eps/10"):
        parse_config("[experiment]\nid = ex1\n[coefficient]\neps = 0.04\n[mesh]\nreference = 50\n")


def test_unknown_experiment():
    with pytest.raises(ConfigError):
        parse_config("[experiment]\nid = ex9\n")


@given(st.lists(st.integers(2, 400), min_size=2, max_size=6, unique=True))
def test_ladder_order_validation(ns):
    ladder = [1 / n for n in ns]
    cfg = ExperimentConfig("ex1", ladder=ladder, reference=800)
    if all(b < a for a, b in zip(ladder, ladder[1:])):
        cfg.validate()
    else:
        with pytest.raises(ConfigError):
            cfg.validate()


def test_appendix_run_is_deterministic(configs_dir, tmp_path):
    cfg = load_config(configs_dir / "appendix.ini")
    a = run_experiment(cfg, outdir=tmp_path / "a")
    b = run_experiment(cfg, outdir=tmp_path / "b", workers=2)
    assert a.passed and b.passed
    for name in a.files:
        if name.endswith(".csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["status"] == "complete" and man["passed"]
    assert man["config"]["appendix_N"] == 128


def test_constant_sanity_compare(configs_dir, tmp_path):
    cfg = load_config(configs_dir / "constant.ini")
    res = compare_methods(cfg, outdir=tmp_path)
    rows = (tmp_path / "compare.csv").read_text().splitlines()
    assert rows[0] == "h_fine,err_concurrent,err_globallocal,ratio"
    for row in rows[1:]:
        _, c, g, r = map(float, row.split(","))
        assert c < 1e-8 and g < 1e-8
        assert 0.5 <= r <= 2
    assert res.passed


def test_hlimit_run(configs_dir, tmp_path):
    res = run_experiment(load_config(configs_dir / "hlimit-1d.ini"), outdir=tmp_path)
    assert res.passed
    assert (tmp_path / "hlimit_1d.csv").read_text().startswith("rho,B,abs_diff,bound\n0.0,")


def test_failed_run_writes_partial_manifest(tmp_path):
    cfg = ExperimentConfig("ex1", eps=0.2, reference=100, ladder=[1 / 10], h_fine=1 / 30)
    with pytest.raises(ValueError):
        run_experiment(cfg, outdir=tmp_path)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "failed" and "power of two" in man["error"]
    assert man["stages"][0]["stage"] == "setup"


def test_cli_exit_codes(configs_dir, tmp_path, capsys):
    assert main(["run", "--config", str(configs_dir / "hlimit-1d.ini"), "--out", str(tmp_path)]) == 0
    bad = tmp_path / "bad.ini"
    bad.write_text("[experiment]\nid = ex1\n[mesh]\nladder = 1/20, 1/10\nreference = 800\n")
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["verify", "--suite", "appendix", "--suite", "transition"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] appendix" in out and "checks passed" in out
