import json

import pytest

from ensemblekit.cli import main
from ensemblekit.config import config_from_dict, validate_config
from ensemblekit.errors import ConfigError


def minimal_config(**overrides):
    cfg = {
        "model": {"family": "tfim", "n": 4, "d": 1, "params": {"J": 1.0, "h": 1.0}},
        "temperatures": [2.0],
    }
    cfg.update(overrides)
    return cfg


class TestValidateConfig:
    def test_minimal_fills_defaults(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(minimal_config()))
        cfg = validate_config(p)
        assert cfg.cube_lengths == [1]
        assert cfg.energy_targets == "u(T)"
        assert cfg.deltas == "paper-window"
        assert cfg.c_d == 1.0
        assert cfg.correlation["restarts"] == 16
        assert cfg.haar is None

    def test_missing_model_names_field(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"temperatures": [1.0]}))
        with pytest.raises(ConfigError) as err:
            validate_config(p)
        assert "model" in str(err.value)

    def test_bad_temperature_path(self):
        with pytest.raises(ConfigError) as err:
            config_from_dict(minimal_config(temperatures=[2.0, -1.0]))
        assert "temperatures" in err.value.field_path

    def test_duplicate_temperatures_deduplicated(self, caplog):
        cfg = config_from_dict(minimal_config(temperatures=[2.0, 2.0, 3.0]))
        assert cfg.temperatures == [2.0, 3.0]

    def test_unknown_key_warns_not_fails(self, caplog):
        import logging
        with caplog.at_level(logging.WARNING):
            config_from_dict(minimal_config(notakey=1))
        assert any("notakey" in r.message for r in caplog.records)

    def test_n_list_expands_sizes(self):
        cfg = config_from_dict(minimal_config(
            model={"family": "tfim", "n": [4, 5], "d": 1}))
        assert cfg.lattice_sizes == [4, 5]
        assert cfg.model_spec(5).n == 5

    def test_config_hash_stable_and_sensitive(self):
        a = config_from_dict(minimal_config())
        b = config_from_dict(minimal_config())
        c = config_from_dict(minimal_config(temperatures=[2.5]))
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()

    def test_nonexistent_file(self, tmp_path):
        with pytest.raises(ConfigError):
            validate_config(tmp_path / "missing.json")

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError):
            validate_config(p)


class TestCliExitCodes:
    def test_bad_config_exits_2(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"temperatures": [1.0]}))
        rc = main(["thermal", "--config", str(p)])
        assert rc == 2
        assert "model" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path):
        rc = main(["thermal", "--config", str(tmp_path / "nope.json")])
        assert rc == 2

    def test_thermal_stdout(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(minimal_config()))
        rc = main(["thermal", "--config", str(p)])
        assert rc == 0
        out = capsys.readouterr().out
        header = out.splitlines()[0]
        assert header.split(",") == ["n", "T", "Z", "log_Z", "u", "c", "s"]
        assert len(out.splitlines()) == 2

    def test_thermal_json_format(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(minimal_config()))
        rc = main(["thermal", "--config", str(p), "--format", "json"])
        assert rc == 0
        rows = json.loads(capsys.readouterr().out)
        assert rows[0]["T"] == 2.0
        # independent kron-built oracle for u(T)
        import numpy as np
        sz = np.diag([1.0, -1.0])
        sx = np.array([[0.0, 1.0], [1.0, 0.0]])
        eye = np.eye(2)
        def embed(ops):
            m = ops[0]
            for o in ops[1:]:
                m = np.kron(m, o)
            return m
        h = np.zeros((16, 16))
        for i in range(3):
            ops = [eye] * 4
            ops[i] = sz
            ops[i + 1] = sz
            h -= embed(ops)
        for i in range(4):
            ops = [eye] * 4
            ops[i] = sx
            h -= embed(ops)
        vals = np.linalg.eigvalsh(h)
        w = np.exp(-(vals - vals.min()) / 2.0)
        u_oracle = float(w @ vals / w.sum()) / 4
        assert rows[0]["u"] == pytest.approx(u_oracle, rel=1e-10)

    def test_spectrum_rows(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(minimal_config()))
        rc = main(["spectrum", "--config", str(p)])
        assert rc == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 1 + 16  # header + 2^4 eigenvalues

    def test_micro_subcommand(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(minimal_config()))
        rc = main(["micro", "--config", str(p)])
        assert rc == 0
        assert "window_dim" in capsys.readouterr().out

    def test_correlations_subcommand(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        cfg = minimal_config(correlation={"distances": [1, 2], "restarts": 4})
        p.write_text(json.dumps(cfg))
        rc = main(["correlations", "--config", str(p)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "envelope_ok" in out

    def test_berry_esseen_subcommand(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(minimal_config()))
        rc = main(["berry-esseen", "--config", str(p)])
        assert rc == 0
        assert "kolmogorov" in capsys.readouterr().out

    def test_substate_check_small(self, tmp_path, capsys):
        rc = main(["substate-check", "--seed", "7", "--samples", "10",
                   "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "substate_check.csv").exists()

    def test_haar_subcommand(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        cfg = minimal_config(correlation={"distances": [1, 2], "restarts": 4})
        p.write_text(json.dumps(cfg))
        rc = main(["haar", "--config", str(p), "--samples", "5"])
        assert rc == 0
        assert "fraction_ok" in capsys.readouterr().out

    def test_equivalence_subcommand(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        cfg = minimal_config(correlation={"distances": [1, 2], "restarts": 4})
        p.write_text(json.dumps(cfg))
        rc = main(["equivalence", "--config", str(p)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "measured_avg" in out and "bound_7sqrt_eps" in out

    def test_run_all_points_fail_exits_1(self, tmp_path):
        p = tmp_path / "c.json"
        cfg = minimal_config(energy_targets=[99.0], deltas=[0.01],
                             correlation={"distances": [1, 2], "restarts": 2},
                             output_dir=str(tmp_path / "o"))
        p.write_text(json.dumps(cfg))
        rc = main(["run", "--config", str(p)])
        assert rc == 1

    def test_run_partial_failure_exits_0_with_error_rows(self, tmp_path):
        p = tmp_path / "c.json"
        cfg = minimal_config(energy_targets=[0.0, 99.0], deltas=[1.0],
                             correlation={"distances": [1, 2], "restarts": 2},
                             output_dir=str(tmp_path / "o"))
        p.write_text(json.dumps(cfg))
        rc = main(["run", "--config", str(p)])
        assert rc == 0
        lines = (tmp_path / "o" / "results.csv").read_text().splitlines()
        statuses = [line.split(",")[1] for line in lines[1:]]
        assert "error" in statuses and "ok" in statuses

    def test_berry_esseen_out_writes_jump_table(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(minimal_config()))
        rc = main(["berry-esseen", "--config", str(p), "--out", str(tmp_path / "o")])
        assert rc == 0
        assert (tmp_path / "o" / "berry_esseen_summary.csv").exists()
        assert (tmp_path / "o" / "berry_esseen_jumps.csv").exists()
        jumps = (tmp_path / "o" / "berry_esseen_jumps.csv").read_text().splitlines()
        assert jumps[0] == "n,T,energy,mass,F,G"
        assert len(jumps) > 2

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0

    def test_console_script_installed(self):
        import shutil
        import subprocess
        exe = shutil.which("ensemblekit")
        if exe is None:
            pytest.skip("console script not on PATH")
        proc = subprocess.run([exe, "--version"], capture_output=True, text=True)
        assert proc.returncode == 0
