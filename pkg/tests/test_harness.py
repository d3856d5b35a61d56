"""Config schema, checkpoint format, CSV determinism, scenarios, CLI."""

import os
import struct

import numpy as np
import pytest

from surfns import cli
from surfns import geometry as geo
from surfns.errors import CheckpointError, ConfigError
from surfns.forcing import make_catalog_forcing
from surfns.harmonics import SpectralState, random_band_limited
from surfns.harness import (config_hash, config_text, default_config,
                            load_checkpoint, parse_config_text, records_to_csv,
                            run_ensemble, save_checkpoint, stepper_config)
from surfns.killing import killing_basis
from surfns.operators import assemble_stokes
from surfns.scenarios import get_scenario, list_scenarios, run_scenario
from surfns.timestepper import SimState, run as run_simulation


# --- configuration ----------------------------------------------------------

def test_config_defaults_round_trip():
    cfg = default_config()
    again = parse_config_text(config_text(cfg))
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)


def test_config_parses_values():
    cfg = parse_config_text("""
# a comment
geometry.kind = sphere
geometry.L = 12
nu.kind = linear_x3
nu.a = 0.25
init.modes = 2,0,1.0; 3,1,-0.5
forcing.point = 0, 0, 1
pair.gaps = 1e-2, 1e-3
""")
    assert cfg["geometry.L"] == 12
    assert cfg["nu.a"] == 0.25
    assert cfg["init.modes"] == ((2, 0, 1.0), (3, 1, -0.5))
    assert cfg["pair.gaps"] == (1e-2, 1e-3)


def test_config_unknown_key_has_path():
    with pytest.raises(ConfigError, match="unknown config key 'nu.b'"):
        parse_config_text("nu.b = 3")


def test_config_type_error_has_path():
    with pytest.raises(ConfigError, match="config error at 'nu.a'"):
        parse_config_text("nu.a = banana")


def test_config_choice_error():
    with pytest.raises(ConfigError, match="geometry.kind"):
        parse_config_text("geometry.kind = cube")


def test_config_semantic_validation():
    with pytest.raises(ConfigError, match="nu.a"):
        parse_config_text("nu.kind = linear_x3\nnu.a = 2.0")


# --- checkpoints ------------------------------------------------------------

def test_checkpoint_round_trip_bit_exact(sphere8, tr8, tmp_path):
    path = tmp_path / "state.snsk"
    for seed in (1, 2, 3):
        s = random_band_limited(tr8, seed)
        s.t = 0.725
        save_checkpoint(SimState(s), sphere8, str(path))
        meta, sim = load_checkpoint(str(path))
        assert meta.kind == "sphere" and meta.L == 8 and meta.R == 1.0
        assert sim.t == 0.725
        assert np.array_equal(sim.state.coeffs, s.coeffs)


def test_checkpoint_truncation_detected(sphere8, tr8, tmp_path):
    path = tmp_path / "state.snsk"
    save_checkpoint(SimState(random_band_limited(tr8, 5)), sphere8, str(path))
    blob = path.read_bytes()
    path.write_bytes(blob[:-9])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(str(path))


def test_checkpoint_crc_detected(sphere8, tr8, tmp_path):
    path = tmp_path / "state.snsk"
    save_checkpoint(SimState(random_band_limited(tr8, 6)), sphere8, str(path))
    blob = bytearray(path.read_bytes())
    blob[60] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError, match="checksum"):
        load_checkpoint(str(path))


def test_checkpoint_version_detected(sphere8, tr8, tmp_path):
    path = tmp_path / "state.snsk"
    save_checkpoint(SimState(random_band_limited(tr8, 7)), sphere8, str(path))
    blob = bytearray(path.read_bytes())
    blob[4:8] = struct.pack("<I", 99)
    body = bytes(blob[:-4])
    import zlib
    path.write_bytes(body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(str(path))


def test_checkpoint_resume_determinism(sphere8, tr8, tmp_path):
    # save at t = 0, resume, integrate 10 steps: bit-identical to the
    # uninterrupted integration (both paths share the bootstrap)
    kb = killing_basis(sphere8)
    form = assemble_stokes(sphere8, geo.ViscosityField(sphere8, 1.0), 8)
    spec = make_catalog_forcing("f3_minus", {}, kb)
    u0 = random_band_limited(tr8, 17, norm_killing=0.4, norm_nonkilling=0.8)

    path = tmp_path / "t0.snsk"
    save_checkpoint(SimState(u0), sphere8, str(path))
    _, resumed = load_checkpoint(str(path))

    from surfns.timestepper import step_imex
    a = SimState(u0.copy())
    b = resumed
    for _ in range(10):
        a = step_imex(a, form, spec, 1e-3)
        b = step_imex(b, form, spec, 1e-3)
    assert np.array_equal(a.state.coeffs, b.state.coeffs)


# --- CSV --------------------------------------------------------------------

def _run_scenario_csv(tmp_path, label, threads):
    out = tmp_path / label
    run_scenario("free_decay_ensemble", out_dir=str(out), threads=threads,
                 quiet=True)
    return {p: (out / p).read_bytes() for p in sorted(os.listdir(out))
            if p.endswith(".csv")}



def test_csv_byte_identical_across_threads(tmp_path):
    one = _run_scenario_csv(tmp_path, "one", threads=1)
    four = _run_scenario_csv(tmp_path, "four", threads=4)
    assert one.keys() == four.keys() and len(one) > 1
    for name in one:
        assert one[name] == four[name], name


def test_csv_format(sphere8, tr8):
    kb = killing_basis(sphere8)
    form = assemble_stokes(sphere8, geo.ViscosityField(sphere8, 1.0), 8)
    spec = make_catalog_forcing("zero", {}, kb)
    cfg = stepper_config(default_config())
    _, records = run_simulation(cfg, sphere8, form, spec,
                                random_band_limited(tr8, 4))
    text = records_to_csv(records, kb.n)
    lines = text.strip().split("\n")
    header = lines[0].split(",")
    assert header[:9] == ["t", "norm_u", "norm_uK", "norm_uNK", "energy",
                          "dissipation", "work", "energy_residual", "lambda"]
    assert header[9:] == ["alpha_1", "alpha_2", "alpha_3"]
    # 17 significant digits round-trip binary64 losslessly
    val = lines[1].split(",")[1]
    assert float(val) == records[0].norm_u


# --- scenarios and ensemble --------------------------------------------------

def test_registry_has_ten_plus_scenarios():
    names = list_scenarios()
    assert len(names) >= 10
    for name, claims in names:
        assert claims.strip()


def test_unknown_scenario():
    from surfns.errors import ParameterError
    with pytest.raises(ParameterError, match="unknown scenario"):
        get_scenario("does_not_exist")


def test_ensemble_aggregates(sphere8):
    cfg = default_config()
    cfg.update({"geometry.L": 8, "init.kind": "random",
                "init.norm_killing": 0.5, "init.norm_nonkilling": 1.0,
                "run.t_end": 0.5, "run.stride": 25, "ensemble.members": 3})
    ens = run_ensemble(cfg, threads=2)
    assert len(ens.member_records) == 3
    assert np.all(ens.nk_max >= ens.nk_mean) and np.all(ens.nk_mean >= ens.nk_min)
    assert np.all(np.diff(ens.nk_max) < 0)
    assert np.isfinite(ens.entry_time)


def test_ensemble_seeds_are_member_specific():
    from surfns.harness import member_seed
    seeds = [member_seed(1234, k) for k in range(8)]
    assert len(set(seeds)) == 8


# --- CLI ----------------------------------------------------------------------

def test_cli_scenarios_lists(capsys):
    assert cli.main(["scenarios"]) == 0
    out = capsys.readouterr().out
    assert "free_decay_l2" in out and out.count(":") >= 10


def test_cli_unknown_scenario_exit_code():
    assert cli.main(["--quiet", "scenario", "nope"]) == 2


def test_cli_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nu.a = banana\n")
    assert cli.main(["--quiet", "run", str(bad)]) == 2


def test_cli_run_and_spectrum(tmp_path, capsys):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("""
scenario.name = smoke
geometry.L = 8
init.kind = modes
init.modes = 2,0,1.0
run.t_end = 0.1
run.stride = 20
""")
    assert cli.main(["--out", str(tmp_path / "out"), "--quiet",
                     "run", str(cfgfile)]) == 0
    assert (tmp_path / "out" / "smoke.csv").exists()

    assert cli.main(["--quiet", "spectrum", str(cfgfile)]) == 0
    out = capsys.readouterr().out
    first = out.strip().split("\n")[0].split()
    assert first[0] == "1" and abs(float(first[1])) <= 1e-10


def test_cli_korn(tmp_path, capsys):
    cfgfile = tmp_path / "korn.cfg"
    cfgfile.write_text("geometry.L = 8\n")
    assert cli.main(["--quiet", "korn", str(cfgfile)]) == 0
    out = capsys.readouterr().out
    assert "C_P" in out


def test_cli_decompose_pure_killing(tmp_path, sphere8, capsys):
    s = SpectralState(8)
    s.coeffs[:3] = [0.2, -0.1, 0.5]
    path = tmp_path / "kill.snsk"
    save_checkpoint(SimState(s), sphere8, str(path))
    assert cli.main(["decompose", str(path)]) == 0
    out = capsys.readouterr().out
    nk = [l for l in out.splitlines() if l.startswith("norm_uNK")][0]
    assert float(nk.split("=")[1]) <= 1e-12


def test_cli_scenario_pass(tmp_path):
    assert cli.main(["--out", str(tmp_path), "--quiet",
                     "scenario", "killing_equilibrium"]) == 0
    assert (tmp_path / "killing_equilibrium_report.json").exists()


def test_cli_ensemble(tmp_path, capsys):
    cfgfile = tmp_path / "ens.cfg"
    cfgfile.write_text("""
scenario.name = mini
geometry.L = 8
init.kind = random
init.norm_killing = 0.3
init.norm_nonkilling = 1.0
run.t_end = 0.5
run.stride = 25
""")
    code = cli.main(["--out", str(tmp_path / "out"), "--threads", "2",
                     "ensemble", str(cfgfile), "--members", "3"])
    assert code == 0
    out = capsys.readouterr().out
    assert "entry_time" in out
    files = sorted(os.listdir(tmp_path / "out"))
    assert "mini_ensemble.csv" in files
    assert sum(f.startswith("mini_member") for f in files) == 3


def test_torus_config_cannot_integrate(tmp_path):
    cfgfile = tmp_path / "torus.cfg"
    cfgfile.write_text("geometry.kind = torus\n")
    assert cli.main(["--quiet", "run", str(cfgfile)]) == 2


def test_ensemble_killing_only_members_are_constant():
    cfg = default_config()
    cfg.update({"geometry.L": 8, "init.kind": "random",
                "init.norm_killing": 0.5, "init.norm_nonkilling": 0.0,
                "run.t_end": 0.5, "run.stride": 25, "ensemble.members": 3})
    ens = run_ensemble(cfg, threads=1)
    for recs in ens.member_records:
        for key in ("norm_u", "norm_uK", "norm_uNK", "energy", "dissipation"):
            vals = [getattr(r, key) for r in recs]
            assert max(vals) - min(vals) <= 1e-12
