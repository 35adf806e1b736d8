import csv
import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfisac import cli, config, experiments
from cfisac.seeding import derive, seed_derivation, splitmix64

SMALL = "L = 8\nK = 4\ntau = 3\nn_starts = 1\nstage_i_max = 100\ntabu_max_iter = 20\n"


def read_rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# cfisac-csv ")
    return list(csv.DictReader(lines[1:]))


def test_empty_config_gives_table_defaults(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("")
    spec = config.load_config(p)
    s = spec.system
    assert (s.fc_MHz, s.B_Hz, s.noise_figure_dB, s.h_ap_m, s.h_ue_m) == (1900, 20e6, 9, 15, 1.65)
    assert (s.p_pilot_W, s.sigma_sh_dB, s.D_m, s.d1_m, s.d0_m) == (0.1, 8, 1000, 50, 10)


def test_config_errors(tmp_path):
    with pytest.raises(config.ConfigError):
        config.parse_config("tau = 0\n")
    with pytest.raises(config.ConfigError, match=":2: unknown key"):
        config.parse_config("L = 4\nbogus = 1\n")
    with pytest.raises(config.ConfigError, match=":1: expected"):
        config.parse_config("L 4\n")
    with pytest.raises(config.ConfigError, match="bad value"):
        config.parse_config("trials = many\n")
    with pytest.raises(config.ConfigError):
        config.parse_config("kind = ber_sweep\nschemes = proposed\n")
    with pytest.raises(config.ConfigError):
        config.parse_config("trials = 0\n")
    with pytest.raises(FileNotFoundError):
        config.load_config(tmp_path / "missing.cfg")


def test_config_roundtrip():
    spec = config.parse_config("kind = ber_sweep\nschemes = MR, GaBP\nsnr_db = 0, 7.5\neta = 0.5, 1, 1, 1\nK = 4\n"
                               "pathloss_const_dB = 120.5\nshadowing_everywhere = true\n")
    again = config.parse_config(config.emit_config(spec))
    assert again == spec
    assert config.parse_config(config.emit_config(config.ExperimentSpec())) == config.ExperimentSpec()


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 50), st.integers(1, 30), st.floats(0.01, 1.0), st.booleans())
def test_config_roundtrip_property(L, K, p, flag):
    spec = config.ExperimentSpec(system=config.SystemConfig(L=L, K=K, p_pilot_W=p, shadowing_everywhere=flag))
    assert config.parse_config(config.emit_config(spec)) == spec


def test_seed_derivation_known_and_distinct():
    assert seed_derivation(0, 0) == seed_derivation(0, 0)
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    seeds = np.array([seed_derivation(12345, i) for i in range(10 ** 6)], dtype=np.uint64)
    assert np.unique(seeds).size == seeds.size
    assert derive(1, 2, 3) == seed_derivation(seed_derivation(1, 2), 3)
    assert all(0 <= seed_derivation(-5, i) < 2 ** 64 for i in range(10))


def test_rates_cdf_schema_and_determinism(tmp_path):
    cfg = tmp_path / "r.cfg"
    cfg.write_text(SMALL + "trials = 2\n")
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["rates", "--config", str(cfg), "--out", str(out1)]) == 0
    assert cli.main(["rates", "--config", str(cfg), "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    rows = read_rows(out1)
    assert list(rows[0]) == ["trial", "user", "scheme", "rate_bits", "net_bps"]
    for scheme in config.PILOT_SCHEMES:
        assert sum(r["scheme"] == scheme for r in rows) == 2 * 4
    assert b"\r\n" not in out1.read_bytes()


def test_ber_sweep_schema(tmp_path):
    cfg = tmp_path / "b.cfg"
    cfg.write_text("L = 8\nK = 2\ntau = 2\nsnr_db = 0, 5, 10\nsymbols_per_drop = 10\n")
    out = tmp_path / "ber.csv"
    assert cli.main(["ber", "--config", str(cfg), "--trials", "2", "--scheme", "MR",
                     "--scheme", "GaBP", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 6 and list(rows[0]) == ["snr_db", "scheme", "ber", "bits_counted"]
    assert {r["scheme"] for r in rows} == {"MR", "GaBP"}


@pytest.mark.parametrize("kind,schema", [
    ("design", "design"), ("median_vs_tau", "rates_sweep"), ("median_vs_K", "rates_sweep"),
    ("ber_vs_ratio", "ber_ratio"), ("acf_profile", "acf"), ("range_profile", "range")])
def test_every_pipeline_runs(tmp_path, kind, schema):
    extra = {"median_vs_tau": "tau_grid = 2, 3\n", "median_vs_K": "K_grid = 3, 5\n",
             "ber_vs_ratio": "K_grid = 2, 3\nsymbols_per_drop = 5\n",
             "acf_profile": "n_sequences = 12\n", "range_profile": "tau = 16\n"}.get(kind, "")
    text = SMALL.replace("tau = 3\n", "") + ("" if "tau = " in extra else "tau = 3\n") + extra
    spec = dataclasses.replace(config.parse_config(f"kind = {kind}\n" + text), out=str(tmp_path / "o.csv"))
    path = experiments.run_experiment(spec)
    rows = read_rows(path)
    assert list(rows[0]) == list(experiments.SCHEMAS[schema][1])
    again = experiments.run_experiment(dataclasses.replace(spec, out=str(tmp_path / "p.csv")))
    assert path.read_bytes() == again.read_bytes()


def test_design_trace_is_recorded(tmp_path):
    spec = config.parse_config("kind = design\n" + SMALL.replace("n_starts = 1", "n_starts = 1\nsnr_schedule = 1"))
    spec = dataclasses.replace(spec, out=str(tmp_path / "d.csv"))
    rows = read_rows(experiments.run_experiment(spec))
    vals = [float(r["objective_bits"]) for r in rows]
    assert len(vals) > 1 and all(b >= a for a, b in zip(vals, vals[1:]))


def test_cli_rejects_wrong_kind_and_bad_config(tmp_path, capsys):
    cfg = tmp_path / "k.cfg"
    cfg.write_text("kind = ber_sweep\n")
    assert cli.main(["rates", "--config", str(cfg)]) == 2
    cfg.write_text("nope = 3\n")
    assert cli.main(["acf", "--config", str(cfg)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_workers_do_not_change_output(tmp_path):
    spec = config.parse_config(SMALL + "trials = 2\nschemes = random, greedy\n")
    a = experiments.run_experiment(dataclasses.replace(spec, out=str(tmp_path / "1.csv")))
    b = experiments.run_experiment(dataclasses.replace(spec, out=str(tmp_path / "2.csv"), workers=2))
    assert a.read_bytes() == b.read_bytes()
