"""Config validation, seed splitting, manifests, CSV schemas and the CLI."""
import json
import os
import re

import numpy as np
import pytest

from crossdiff.harness.cli import main as cli_main
from crossdiff.harness.config import ConfigError, ExperimentConfig
from crossdiff.harness.manifest import (
    build_manifest,
    config_digest,
    derive_replica_seeds,
    splitmix64,
    verify_manifest,
    write_manifest,
)
from crossdiff.harness.output import fmt, svg_line_chart

BASE = {
    "model": {"sigma1_sq": 1.0, "sigma2_sq": 2.0, "lambda": 1.0, "N": 48},
    "initial": {"rho1": "0.5 + 0.2*cos(2*pi*x)", "rho2": "0.5"},
    "particles": {"t_final": 0.002, "replicas": 2},
    "pde": {"M": 32},
    "outputs": {"snapshot_times": [0.0, 0.002]},
    "seed": 4242,
}


def write_config(tmp_path, overrides=None, **sections):
    raw = json.loads(json.dumps(BASE))
    for key, val in sections.items():
        if isinstance(val, dict):
            raw.setdefault(key, {}).update(val)
        else:
            raw[key] = val
    if overrides:
        raw.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(raw))
    return str(path)


def test_config_roundtrip(tmp_path):
    cfg = ExperimentConfig.from_file(write_config(tmp_path))
    assert cfg.model["N"] == 48
    assert cfg.snapshot_times() == [0.0, 0.002]
    assert cfg.epsilon() == pytest.approx(48 ** (-1 / 3))
    digest = config_digest(cfg.canonical_json())
    assert re.fullmatch(r"[0-9a-f]{64}", digest)


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ConfigError, match="unknown keys"):
        ExperimentConfig.from_file(write_config(tmp_path, overrides={"bogus": 1}))
    with pytest.raises(ConfigError, match="unknown keys"):
        ExperimentConfig.from_file(write_config(tmp_path, model={"sigma3_sq": 1.0}))
    with pytest.raises(ConfigError, match="unknown keys"):
        ExperimentConfig.from_file(write_config(tmp_path, particles={"dtt": 0.1}))


def test_bad_expressions_rejected(tmp_path):
    with pytest.raises(ConfigError, match="initial.rho1"):
        ExperimentConfig.from_file(
            write_config(tmp_path, initial={"rho1": "0.5 +", "rho2": "0.5"}))
    with pytest.raises(ConfigError, match="negative"):
        ExperimentConfig.from_file(
            write_config(tmp_path, initial={"rho1": "cos(2*pi*x)", "rho2": "0.5"}))


def test_epsilon_grid_compatibility(tmp_path):
    with pytest.raises(ConfigError, match="epsilon"):
        ExperimentConfig.from_file(
            write_config(tmp_path, particles={"epsilon": 0.01}, pde={"M": 32}))


def test_unit_mass_requirement(tmp_path):
    cfg = ExperimentConfig.from_file(
        write_config(tmp_path, initial={"rho1": "1.5", "rho2": "0.5"}))
    with pytest.raises(ConfigError, match="mass"):
        cfg.require_unit_mass()


def test_seed_splitting():
    seeds = derive_replica_seeds(1234, 8)
    assert len(set(seeds)) == 8
    assert all(0 <= s < 2**64 for s in seeds)
    assert derive_replica_seeds(1234, 8) == seeds
    assert derive_replica_seeds(1235, 8) != seeds
    # documented rule: one splitmix64 round of master xor (i+1)*golden
    golden = 0x9E3779B97F4A7C15
    assert seeds[0] == splitmix64(1234 ^ golden)
    assert seeds[2] == splitmix64(1234 ^ (3 * golden) % 2**64)


def test_manifest_roundtrip(tmp_path):
    canonical = '{"a":1}'
    manifest = build_manifest(canonical, 7, [1, 2, 3], "0.1.0", {"total": 12})
    path = tmp_path / "manifest.json"
    write_manifest(path, manifest)
    assert verify_manifest(path, canonical)
    assert not verify_manifest(path, '{"a":2}')
    data = json.loads(path.read_text())
    assert set(data) == {"config_sha256", "master_seed", "replica_seeds",
                         "version", "timings_ms"}


def test_float_formatting():
    assert fmt(0.1) == "0.1"
    assert fmt(1 / 3) == "0.3333333333333333"
    assert float(fmt(np.float64(0.30000000000000004))) == 0.30000000000000004


def test_svg_is_deterministic(tmp_path):
    xs = np.linspace(0, 1, 20)
    for name in ("a.svg", "b.svg"):
        svg_line_chart(tmp_path / name, xs, {"y": np.sin(xs)}, "t", "x", "y")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def _read_masked_manifest(path):
    data = json.loads(open(path).read())
    data["timings_ms"] = None  # wall-clock is the one non-deterministic field
    return data


def _run_cli(args):
    assert cli_main(args) == 0


def test_cli_simulate_and_outputs(tmp_path):
    cfg_path = write_config(tmp_path)
    out = tmp_path / "out_sim"
    _run_cli(["simulate", "--config", cfg_path, "--out-dir", str(out)])
    fields = (out / "sim_fields.csv").read_text().splitlines()
    assert fields[0] == "t,x,rho1_mean,rho1_se,rho2_mean,rho2_se"
    assert len(fields) == 1 + 2 * 32
    ledger = (out / "sim_ledger.csv").read_text().splitlines()
    assert ledger[0] == "t,pair_local_time,switch_count,mean_A1,mean_A2"
    cfg = ExperimentConfig.from_file(cfg_path)
    assert verify_manifest(out / "manifest.json", cfg.canonical_json())


def test_cli_solve_with_ms_form(tmp_path):
    cfg_path = write_config(tmp_path, overrides={"ms_form": True})
    out = tmp_path / "out_solve"
    _run_cli(["solve", "--config", cfg_path, "--out-dir", str(out), "--plot"])
    pde = (out / "pde_fields.csv").read_text().splitlines()
    assert pde[0] == "t,x,rho1_mean,rho1_se,rho2_mean,rho2_se"
    ms = (out / "ms_fields.csv").read_text().splitlines()
    assert ms[0] == "t,x,u1,u2"
    assert (out / "pde_fields.svg").exists()


def test_cli_compare_report_schema(tmp_path, capsys):
    cfg_path = write_config(tmp_path)
    out = tmp_path / "out_cmp"
    _run_cli(["compare", "--config", cfg_path, "--out-dir", str(out)])
    report = (out / "report.csv").read_text().splitlines()
    assert report[0] == "t,N,epsilon,l1_rho1,l1_rho2,l2_rho1,l2_rho2,l1_ci_lo,l1_ci_hi"
    assert len(report) == 3  # two snapshots
    assert "L1(rho1)=" in capsys.readouterr().out


def test_cli_diagnose(tmp_path):
    cfg_path = write_config(tmp_path, particles={"replicas": 3, "t_final": 0.001},
                            outputs={"snapshot_times": [0.0, 0.001]})
    out = tmp_path / "out_diag"
    _run_cli(["diagnose", "--config", cfg_path, "--out-dir", str(out)])
    for name, header in (
        ("diag_martingale.csv", "k,type,mean_dz,se_dz,within_4se"),
        ("diag_qv.csv", "k,type,qv_ratio,in_band"),
        ("diag_replacement.csv", "N,epsilon,c1,c2,statistic"),
    ):
        lines = (out / name).read_text().splitlines()
        assert lines[0] == header
        assert len(lines) > 1


def test_cli_sweep(tmp_path):
    cfg_path = write_config(tmp_path, overrides={"sweep": {"N": [16, 32]}},
                            pde={"M": 16}, particles={"replicas": 2,
                                                      "t_final": 0.001, "epsilon": 0.3},
                            outputs={"snapshot_times": [0.0, 0.001]})
    out = tmp_path / "out_sweep"
    _run_cli(["sweep", "--config", cfg_path, "--out-dir", str(out), "--plot"])
    lines = (out / "sweep_report.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 2
    assert (out / "sweep.svg").exists()
    assert {row.split(",")[1] for row in lines[1:]} == {"16", "32"}


def test_cli_determinism_same_seed(tmp_path):
    cfg_path = write_config(tmp_path)
    out1, out2 = tmp_path / "d1", tmp_path / "d2"
    for out in (out1, out2):
        _run_cli(["compare", "--config", cfg_path, "--out-dir", str(out),
                  "--threads", "1"])
    for name in ("sim_fields.csv", "pde_fields.csv", "report.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    assert _read_masked_manifest(out1 / "manifest.json") == \
        _read_masked_manifest(out2 / "manifest.json")


def test_cli_thread_count_invariance(tmp_path):
    cfg_path = write_config(tmp_path, particles={"replicas": 4})
    out1, out2 = tmp_path / "t1", tmp_path / "t4"
    _run_cli(["simulate", "--config", cfg_path, "--out-dir", str(out1),
              "--threads", "1"])
    _run_cli(["simulate", "--config", cfg_path, "--out-dir", str(out2),
              "--threads", "4"])
    assert (out1 / "sim_fields.csv").read_bytes() == (out2 / "sim_fields.csv").read_bytes()
    assert (out1 / "sim_ledger.csv").read_bytes() == (out2 / "sim_ledger.csv").read_bytes()


def test_cli_seed_flag_overrides(tmp_path):
    cfg_path = write_config(tmp_path)
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    _run_cli(["simulate", "--config", cfg_path, "--out-dir", str(out1),
              "--seed", "1"])
    _run_cli(["simulate", "--config", cfg_path, "--out-dir", str(out2),
              "--seed", "2"])
    assert (out1 / "sim_fields.csv").read_bytes() != (out2 / "sim_fields.csv").read_bytes()
    m1 = json.loads((out1 / "manifest.json").read_text())
    assert m1["master_seed"] == 1


def test_cli_rejects_bad_config(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert cli_main(["solve", "--config", str(path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_cli_simulate_single_particle(tmp_path):
    cfg_path = write_config(tmp_path, model={"N": 1},
                            particles={"replicas": 1, "t_final": 0.001,
                                       "epsilon": 0.2},
                            outputs={"snapshot_times": [0.0, 0.001]})
    out = tmp_path / "out_n1"
    _run_cli(["simulate", "--config", cfg_path, "--out-dir", str(out)])
    lines = (out / "sim_fields.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 32
    # a single smoothed bump: the field integrates to one and is zero away
    body = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    t_last = body[body[:, 0] == 0.001]
    total = (t_last[:, 2] + t_last[:, 4]).sum() / 32
    assert total == pytest.approx(1.0, abs=0.05)
    assert np.max(t_last[:, 2] + t_last[:, 4]) > 1.0
