import csv
import json

import numpy as np
import pytest
import yaml

from isiwtc.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, run
from isiwtc.config import load_config, parse_config
from isiwtc.errors import ConfigError
from isiwtc.source import EdgeDistribution, save_distribution

BASE = {"bob_taps": [1, -1], "eve_taps": [1, 1, -1, -1], "snr_bob_db": 5.0, "snr_eve_db": 5.0,
        "nu": 3, "n": 3000, "max_iter": 2, "init_count": 2}


def write_cfg(tmp_path, name="c.yaml", **over):
    cfg = dict(BASE, **over)
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def read_csv(path):
    return list(csv.DictReader(open(path)))


@pytest.mark.parametrize("over,field", [
    ({"nu": 2}, "memory too small"),
    ({"kappa": 0.0}, "kappa"),
    ({"kappa_prime": -1.0}, "kappa_prime"),
    ({"n": 0}, "n"),
    ({"Es": -1.0}, "Es"),
    ({"sigma2_bob": 0.5}, "exactly one of snr_bob_db"),
    ({"bob_taps": [0, 0]}, "bob_taps"),
    ({"tol": 0}, "tol"),
    ({"unknown_key": 1}, "unknown_key"),
    ({"version": 7}, "version"),
    ({"source": "weyl", "init_index": 5}, "init_index"),
    ({"waterpour": {"w_min": 1.0, "w_max": 1.0, "w_points": 4}}, "zero-width"),
])
def test_config_rejections(over, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(dict(BASE, **over), "c.yaml")
    assert field in str(exc.value)
    assert "c.yaml: field" in str(exc.value)


def test_config_variance_forms():
    cfg = parse_config(dict(BASE, snr_bob_db=None, sigma2_bob=0.25))
    sB, sE = cfg.variances()
    assert sB == 0.25 and sE == pytest.approx(10 ** -0.5)
    np.testing.assert_allclose(cfg.gB.taps, [2 ** -0.5, -(2 ** -0.5)])


def test_malformed_yaml(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("bob_taps: [1, -1\n")
    with pytest.raises(ConfigError, match="line"):
        load_config(p)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.yaml")


def test_estimate_outputs(tmp_path):
    cfg = write_cfg(tmp_path)
    assert run(["estimate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    rows = read_csv(tmp_path / "o" / "edges.csv")
    assert len(rows) == 16
    summ = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert np.isfinite(summ["rate_estimate"]) and summ["n"] == 3000
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["derived"]["trellis"]["n_states"] == 8
    assert man["seeds"]["master"] == 0 and "noise_B" in man["seeds"]
    assert man["config"]["nu"] == 3 and "estimate" in man["timings_s"]


def test_identical_channels_near_zero(tmp_path):
    cfg = write_cfg(tmp_path, eve_taps=[1, -1], n=20_000)
    assert run(["estimate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    summ = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert abs(summ["rate_estimate"]) <= 4 * summ["block_se"]


def test_seed_flag_overrides_and_is_recorded(tmp_path):
    cfg = write_cfg(tmp_path)
    run(["estimate", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "17"])
    run(["estimate", "--config", str(cfg), "--out", str(tmp_path / "b")])
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["config"]["seed"] == 17
    assert (tmp_path / "a" / "edges.csv").read_bytes() != (tmp_path / "b" / "edges.csv").read_bytes()


def test_optimize_max_iter_zero(tmp_path):
    cfg = write_cfg(tmp_path, max_iter=0)
    assert run(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    rows = read_csv(tmp_path / "o" / "trace.csv")
    assert [r["iteration"] for r in rows] == ["0"]
    doc = json.loads((tmp_path / "o" / "final_Q.json").read_text())
    assert doc["format"] == "isiwtc.edge-distribution" and len(doc["edges"]) == 16


def test_optimize_from_file_source(tmp_path):
    from isiwtc.config import parse_config as pc
    from isiwtc.source import weyl_initializations
    tr = pc(BASE).trellis()
    save_distribution(weyl_initializations(tr, 1)[0], tmp_path / "q.json")
    cfg = write_cfg(tmp_path, source="file", source_file=str(tmp_path / "q.json"))
    assert run(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    assert len(read_csv(tmp_path / "o" / "trace.csv")) == 3


def test_sweep_outputs(tmp_path):
    cfg = write_cfg(tmp_path, init_count=2, max_iter=1,
                    sweep={"snr_bob_db": [2.5, 5.0], "snr_eve_db": [5.0, 5.0], "hist_bins": 3})
    assert run(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o"), "--threads", "2"]) == EXIT_OK
    rows = read_csv(tmp_path / "o" / "sweep.csv")
    assert len(rows) == 2 and all(r["status"] == "ok" for r in rows)
    hist = read_csv(tmp_path / "o" / "histogram.csv")
    assert len(hist) == 6


def test_sweep_product_pairing():
    cfg = parse_config(dict(BASE, sweep={"snr_bob_db": [1, 2], "snr_eve_db": [3, 4, 5], "pairing": "product"}))
    assert len(cfg.sweep.cells()) == 6
    with pytest.raises(ConfigError):
        parse_config(dict(BASE, sweep={"snr_bob_db": [1, 2], "snr_eve_db": [3]}))


def test_sweep_without_section(tmp_path):
    cfg = write_cfg(tmp_path)
    assert run(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_waterpour_flat_closed_form(tmp_path):
    cfg = write_cfg(tmp_path, bob_taps=[1], eve_taps=[1], snr_bob_db=None, snr_eve_db=None,
                    sigma2_bob=0.5, sigma2_eve=2.0, nu=1,
                    waterpour={"w_min": 0.25, "w_max": 1.0, "w_points": 4, "spacing": "linear"})
    assert run(["waterpour", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    for r in read_csv(tmp_path / "o" / "capacity.csv"):
        W = float(r["W"])
        assert float(r["C_Bob"]) == pytest.approx(W * np.log1p(1 / (2 * W * 0.5)), abs=1e-6)
        assert float(r["C_Eve"]) == pytest.approx(W * np.log1p(1 / (2 * W * 2.0)), abs=1e-6)
    ratio = read_csv(tmp_path / "o" / "ratio.csv")
    assert list(ratio[0]) == ["f", "ratioB_dB", "ratioE_dB"]


def test_waterpour_zero_width_grid(tmp_path):
    cfg = write_cfg(tmp_path, waterpour={"w_min": 2.0, "w_max": 2.0, "w_points": 10})
    assert run(["waterpour", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_numerical_error_exit_code(tmp_path):
    tr = parse_config(BASE).trellis()
    # a distribution living on a 4-cycle leaves half the states with zero mass
    Q = np.zeros(16)
    cyc = [(0, 1), (1, 3), (3, 6), (6, 4), (4, 0)]
    for i, j in cyc:
        Q[tr.edge_index(i, j)] = 1 / len(cyc)
    save_distribution(EdgeDistribution.from_Q(tr, Q), tmp_path / "q.json")
    cfg = write_cfg(tmp_path, source="file", source_file=str(tmp_path / "q.json"))
    assert run(["estimate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_NUMERICAL


def test_bad_flags(tmp_path):
    cfg = write_cfg(tmp_path)
    assert run(["estimate", "--config", str(cfg), "--out", str(tmp_path / "o"), "--threads", "0"]) == EXIT_CONFIG
    assert run(["estimate", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "-1"]) == EXIT_CONFIG
    with pytest.raises(SystemExit):
        run(["frobnicate", "--config", str(cfg), "--out", str(tmp_path)])


@pytest.mark.parametrize("command,extra", [
    ("estimate", {}),
    ("optimize", {}),
    ("sweep", {"sweep": {"snr_bob_db": [4.0, 5.0], "snr_eve_db": [5.0, 5.0], "hist_bins": 2}}),
    ("waterpour", {"waterpour": {"w_min": 0.1, "w_max": 10.0, "w_points": 3}}),
])
def test_manifest_rerun_is_byte_identical(tmp_path, command, extra):
    cfg = write_cfg(tmp_path, **extra)
    first, second = tmp_path / "first", tmp_path / "second"
    assert run([command, "--config", str(cfg), "--out", str(first), "--seed", "123"]) == EXIT_OK
    assert run([command, "--config", str(first / "manifest.json"), "--out", str(second)]) == EXIT_OK
    outputs = json.loads((first / "manifest.json").read_text())["outputs"]
    assert outputs
    for name in outputs:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
