import json

import numpy as np
import pytest

from eulermc.cli import main
from eulermc.fields import read_efld

TINY_MC = """
[grid]
nx = 8

[scheme]
t_final = 0.0625

[plan]
master_seed = 11
n_list = 1,2
l_reps = 2
n_ref = 2
"""


def run_cli(*argv):
    return main(list(argv))


class TestSolveCommand:
    def test_constant_state_round_trips_bitwise(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "[grid]\nnx = 8\n\n[scheme]\ndt = 0.01\nt_final = 0.05\n\n"
            "[solve]\ninitial = constant\nrho = 1.5\nu1 = 0.25\nu2 = -0.125\n"
        )
        out = tmp_path / "out"
        assert run_cli("solve", str(cfg), "--out", str(out)) == 0
        snaps = sorted(out.glob("snap_*.efld"))
        assert len(snaps) == 1
        final = read_efld(snaps[0])
        assert np.all(final.rho == 1.5)
        assert np.all(final.mom[0] == 1.5 * 0.25)
        steps = (out / "steps.csv").read_text().splitlines()
        assert steps[0] == "step,t,picard_iters,residual,mass_drift,energy"
        assert len(steps) == 6

    def test_snapshot_times(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "[grid]\nnx = 8\n\n[scheme]\ndt = 0.01\nt_final = 0.04\n\n"
            "[solve]\ninitial = constant\nsnapshots = 0.02,0.04\n"
        )
        out = tmp_path / "out"
        assert run_cli("solve", str(cfg), "--out", str(out)) == 0
        assert len(sorted(out.glob("snap_*.efld"))) == 2

    def test_manifest_written(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(TINY_MC + "\n[solve]\ninitial = constant\n")
        out = tmp_path / "out"
        assert run_cli("solve", str(cfg), "--out", str(out)) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["kind"] == "solve"
        assert manifest["field_format"] == "EFLD1"
        assert "steps.csv" in manifest["outputs"]
        assert "[grid]" in manifest["config"]


class TestMonteCarloCommands:
    def test_mc_e1_rerun_identical_bytes(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(TINY_MC)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_cli("mc-e1", str(cfg), "--out", str(out1)) == 0
        assert run_cli("mc-e1", str(cfg), "--out", str(out2), "--workers", "2") == 0
        assert (out1 / "errors_e1.csv").read_bytes() == (out2 / "errors_e1.csv").read_bytes()
        assert (out1 / "plot_e1.csv").read_bytes() == (out2 / "plot_e1.csv").read_bytes()

    def test_mc_e2_ladder_length_one_matches_mc_e1(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(TINY_MC + "\n[grid]\nladder = 8\n")
        out1, out2 = tmp_path / "e1", tmp_path / "e2"
        assert run_cli("mc-e1", str(cfg), "--out", str(out1)) == 0
        assert run_cli("mc-e2", str(cfg), "--out", str(out2)) == 0
        a = (out1 / "errors_e1.csv").read_bytes()
        b = (out2 / "errors_e2.csv").read_bytes()
        assert a == b

    def test_total_error_requires_pairs(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(TINY_MC)
        out = tmp_path / "out"
        assert run_cli("total-error", str(cfg), "--out", str(out)) == 2
        record = json.loads((out / "error.json").read_text())
        assert record["error"] == "ConfigError"

    def test_total_error_tiny_run(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(TINY_MC + "\n[plan]\npairs = 8:1,16:2\nref_nx = 16\n")
        out = tmp_path / "out"
        assert run_cli("total-error", str(cfg), "--out", str(out)) == 0
        lines = (out / "errors_total_e1.csv").read_text().splitlines()
        assert lines[0].startswith("h,N,")
        assert len(lines) == 3


class TestConsistencyCommand:
    def test_writes_table(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "[grid]\nladder = 8,16\n\n[scheme]\nt_final = 0.125\n\n"
            "[kh]\neps_perturb = 0\n"
        )
        out = tmp_path / "out"
        assert run_cli("consistency", str(cfg), "--out", str(out)) == 0
        lines = (out / "consistency.csv").read_text().splitlines()
        assert lines[0] == "h,e1,e2,e3"
        assert len(lines) == 3


class TestNormsCommand:
    def test_norms_of_dump(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("[grid]\nnx = 8\n\n[scheme]\ndt = 0.01\nt_final = 0.01\n\n[solve]\ninitial = constant\nrho = 2\n")
        out = tmp_path / "out"
        assert run_cli("solve", str(cfg), "--out", str(out)) == 0
        snap = sorted(out.glob("snap_*.efld"))[0]
        assert run_cli("norms", str(snap), "--q", "1", "--ell", "4") == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "var,kind,param,value"
        rho_l1 = [l for l in lines if l.startswith("rho,lq,1")][0]
        assert float(rho_l1.split(",")[3]) == pytest.approx(2.0, rel=1e-14)


class TestFailures:
    def test_bad_config_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("[gas]\ngamma = 0.5\n")
        assert run_cli("solve", str(cfg)) == 2
        assert "gamma" in capsys.readouterr().err

    def test_missing_config_exits_2(self, tmp_path):
        assert run_cli("solve", str(tmp_path / "nope.cfg")) == 2

    def test_solver_failure_writes_error_record(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "[grid]\nnx = 8\n\n[scheme]\nt_final = 0.0625\npicard_max = 1\n"
            "picard_tol = 1e-15\n"
        )
        out = tmp_path / "out"
        assert run_cli("solve", str(cfg), "--out", str(out)) == 1
        record = json.loads((out / "error.json").read_text())
        assert record["error"] == "NonConvergence"
        assert record["step"] == 1
