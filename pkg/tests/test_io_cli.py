"""Binary formats, config validation, and the command-line driver."""
import json

import numpy as np
import pytest

from panelflow import cli, config as cfgmod, fileio
from panelflow import grid as gr
from panelflow.aero import HistoryBuffer
from conftest import bubble, random_clamped


# ---------------------------------------------------------------------------
# binary snapshot / checkpoint round trips
# ---------------------------------------------------------------------------

def test_snapshot_roundtrip_bitexact(tmp_path, g17, rng):
    u = random_clamped(g17, rng)
    path = tmp_path / "f.pflb"
    fileio.save_snapshot(path, 1.25, u, g17)
    t, u2, g2 = fileio.load_snapshot(path)
    assert t == 1.25
    assert np.array_equal(u, u2)
    assert (g2.lx, g2.ly, g2.nx, g2.ny) == (g17.lx, g17.ly, g17.nx, g17.ny)


def test_snapshot_bad_magic(tmp_path):
    path = tmp_path / "bad.pflb"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(fileio.FormatError):
        fileio.load_snapshot(path)


def test_checkpoint_roundtrip_with_velocity(tmp_path, g17, rng):
    buf = HistoryBuffer(0.1, 0.5, g17)
    for j in range(8):
        buf.push(j * 0.1, (0.1 + 0.02 * j) * bubble(g17))
    ut = random_clamped(g17, rng)
    path = tmp_path / "ck.bin"
    fileio.save_checkpoint(path, buf, ut=ut)

    (buf2,) = fileio.load_checkpoint(path)
    assert len(buf2.snaps) == len(buf.snaps)
    buf3, ut3 = fileio.load_checkpoint(path, with_velocity=True)
    assert np.array_equal(ut3, ut)
    for a, b in zip(buf.snaps, buf3.snaps):
        assert a.t == b.t
        assert np.array_equal(a.u, b.u)
        assert np.array_equal(a.d11, b.d11)  # derivatives rebuilt identically


def test_checkpoint_without_velocity_record(tmp_path, g17):
    buf = HistoryBuffer(0.1, 0.2, g17)
    for j in range(4):
        buf.push(j * 0.1, float(j) * bubble(g17))
    path = tmp_path / "ck.bin"
    fileio.save_checkpoint(path, buf)
    with pytest.raises(fileio.FormatError):
        fileio.load_checkpoint(path, with_velocity=True)


def test_fmt17_roundtrips_doubles():
    for x in (0.1, 1.0 / 3.0, 1e-300, 12345.6789, -2.5e17):
        assert float(fileio.fmt17(x)) == x


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

def base_cfg(**over):
    cfg = {"grid": {"lx": 1.0, "ly": 1.0, "nx": 9, "ny": 9}}
    cfg.update(over)
    return cfg


def test_config_minimal_defaults():
    rc = cfgmod.parse_config(base_cfg())
    assert rc.U == 0.0 and rc.alpha == 0.1 and rc.k == 0.1
    assert rc.quad.n_theta == 16 and rc.quad.n_s == 64
    assert np.all(rc.u0 == 0.0) and np.all(rc.loads.p0 == 0.0)


@pytest.mark.parametrize("cfg,frag", [
    (base_cfg(bogus=1), "$.bogus"),
    (base_cfg(grid={"lx": 1.0, "ly": 1.0, "nx": 9}), "grid.ny"),
    (base_cfg(phys={"U": 1.0}), "phys.U"),
    (base_cfg(phys={"alpha": 0.0}), "phys.alpha"),
    (base_cfg(phys={"k": -0.1}), "phys.k"),
    (base_cfg(loads={"p0": {"nosuch": 1}}), "loads.p0"),
    (base_cfg(output={"cadence": 0}), "output.cadence"),
    (base_cfg(quad={"n_theta": "many"}), "quad.n_theta"),
])
def test_config_rejects_bad_keys(cfg, frag):
    with pytest.raises(cfgmod.ConfigError, match=frag.replace("$", r"\$")):
        cfgmod.parse_config(cfg)


def test_config_time_required_for_simulate():
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.parse_config(base_cfg(), need_time=True)


def test_config_bad_prehistory():
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.parse_config(base_cfg(prehistory="maybe"))


def test_config_random_field_seeded():
    spec = {"data": {"u0": {"random_smooth": {"amp": 0.5}}}, "seed": 7}
    a = cfgmod.parse_config(base_cfg(**spec)).u0
    b = cfgmod.parse_config(base_cfg(**spec)).u0
    assert np.array_equal(a, b)
    assert np.max(np.abs(a)) == pytest.approx(0.5)
    assert gr.is_clamped(a)


def test_config_field_profiles():
    rc = cfgmod.parse_config(base_cfg(
        loads={"p0": {"constant": 2.0}, "F0": {"radial_beta": 1.5}},
        data={"u0": {"gaussian": {"cx": 0.5, "cy": 0.5,
                                  "sigma": 0.2, "amp": 1.0}}}))
    assert np.all(rc.loads.p0 == 2.0)
    assert rc.loads.F0[0, 0] == 0.0 and rc.loads.F0[-1, -1] < 0.0
    assert gr.is_clamped(rc.u0) and rc.u0.max() > 0.0


# ---------------------------------------------------------------------------
# CLI end to end
# ---------------------------------------------------------------------------

def sim_cfg(outdir, nx=9, horizon=0.4):
    return {
        "grid": {"lx": 1.0, "ly": 1.0, "nx": nx, "ny": nx},
        "phys": {"U": 0.3, "alpha": 0.1, "k": 0.1},
        "loads": {"p0": {"constant": 0.05}},
        "data": {"u0": {"random_smooth": {"amp": 0.02}}},
        "time": {"dt": 0.05, "horizon": horizon},
        "quad": {"n_theta": 8, "n_s": 16},
        "output": {"dir": str(outdir), "cadence": 2},
        "seed": 3,
    }


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_cli_simulate_outputs(tmp_path):
    out = tmp_path / "out"
    path = write_cfg(tmp_path, sim_cfg(out))
    assert cli.main(["simulate", "--config", path]) == 0
    csv = (out / "run.csv").read_text().splitlines()
    assert csv[0].split(",") == list(
        __import__("panelflow.diagnostics", fromlist=["EnergyReport"])
        .EnergyReport.CSV_COLUMNS)
    assert len(csv) > 2
    assert (out / "checkpoint.bin").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert "config_hash" in manifest and manifest["seed"] == 3


def test_cli_simulate_deterministic(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    pa = write_cfg(tmp_path, sim_cfg(out_a), "a.json")
    pb = write_cfg(tmp_path, sim_cfg(out_b), "b.json")
    assert cli.main(["simulate", "--config", pa]) == 0
    assert cli.main(["simulate", "--config", pb]) == 0
    assert (out_a / "run.csv").read_bytes() == (out_b / "run.csv").read_bytes()
    assert (out_a / "checkpoint.bin").read_bytes() == \
        (out_b / "checkpoint.bin").read_bytes()


def test_cli_simulate_resume_from_checkpoint(tmp_path):
    out1 = tmp_path / "leg1"
    p1 = write_cfg(tmp_path, sim_cfg(out1, horizon=0.4), "leg1.json")
    assert cli.main(["simulate", "--config", p1]) == 0
    cfg2 = sim_cfg(tmp_path / "leg2", horizon=0.4)
    cfg2["prehistory"] = {"checkpoint": str(out1 / "checkpoint.bin")}
    p2 = write_cfg(tmp_path, cfg2, "leg2.json")
    assert cli.main(["simulate", "--config", p2]) == 0
    run2 = (tmp_path / "leg2" / "run.csv").read_text().splitlines()
    t_first = float(run2[1].split(",")[0])
    t_last = float(run2[-1].split(",")[0])
    assert t_first == pytest.approx(0.4, abs=1e-9)  # picks up at the checkpoint
    assert t_last == pytest.approx(0.8, abs=1e-9)


def test_cli_equilibria(tmp_path):
    out = tmp_path / "eq"
    cfg = {
        "grid": {"lx": 1.0, "ly": 1.0, "nx": 9, "ny": 9},
        "phys": {"U": 0.2},
        "loads": {"p0": {"constant": 0.1}},
        "quad": {"n_theta": 8, "n_s": 16},
        "output": {"dir": str(out)},
    }
    path = write_cfg(tmp_path, cfg)
    assert cli.main(["equilibria", "--config", path]) == 0
    t, u, g = fileio.load_snapshot(out / "equilibrium.pflb")
    assert gr.is_clamped(u)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["converged"] is True


def test_cli_flow_from_checkpoint(tmp_path):
    out = tmp_path / "run"
    path = write_cfg(tmp_path, sim_cfg(out))
    assert cli.main(["simulate", "--config", path]) == 0
    fout = tmp_path / "flow"
    rc = cli.main(["flow", "--checkpoint", str(out / "checkpoint.bin"),
                   "--U", "0.3", "--box", "0.2,0.8,0.2,0.8,0.1,0.3",
                   "--dims", "3,3,2", "--out", str(fout)])
    assert rc == 0
    lines = (fout / "flow.csv").read_text().splitlines()
    assert len(lines) == 1 + 3 * 3 * 2


def test_cli_bad_config_exit_code(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{\"grid\": {\"lx\": 1.0}}")
    assert cli.main(["simulate", "--config", str(path)]) == 2


def test_cli_check():
    assert cli.main(["check"]) == 0
