import textwrap

import numpy as np
import pytest

from decosieve.errors import ConfigError, DegeneracyError
from decosieve.shell import cli
from decosieve.shell.config import SCHEMA, parse_text, resolve

PERIOD = 2.0 * np.pi


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text), encoding="utf-8")
    return str(path)


KERNELS_CFG = """\
    # adiabatic reference kernels
    bath.cutoff = 0.01
    bath.k_max = 0.08
    kernels.t_max = 6.283185307179586
"""


class TestParse:
    def test_comments_and_blanks_ignored(self):
        raw = parse_text("\n# note\nbath.cutoff = 0.5  # inline\n\n")
        assert raw == {"bath.cutoff": "0.5"}

    def test_unknown_key_cites_line(self):
        with pytest.raises(ConfigError, match=r"line 3: unknown key 'bath\.cutof'"):
            parse_text("\n\nbath.cutof = 0.5\n")

    def test_duplicate_key_cites_line(self):
        with pytest.raises(ConfigError, match="line 2: duplicate key"):
            parse_text("bath.cutoff = 0.5\nbath.cutoff = 0.7\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="expected 'key = value'"):
            parse_text("bath.cutoff 0.5\n")


class TestResolve:
    def test_defaults_fill_in(self):
        cfg = resolve(parse_text("bath.cutoff = 0.5\nsolver.t_max = 1.0\n"),
                      "evolve")
        assert cfg["system.m"] == 1.0 and cfg["system.omega"] == 1.0
        assert cfg["system.d"] == 16
        assert cfg["solver.dt"] == pytest.approx(PERIOD / 200)
        assert cfg["bath.k_max"] == 4.0  # 8 * cutoff
        assert cfg["kernels.t_max"] == 1.0  # follows solver.t_max

    def test_bad_value_names_key(self):
        with pytest.raises(ConfigError, match="bath.n_k: cannot parse"):
            resolve(parse_text("bath.n_k = sixty\n"), "kernels")

    def test_choices_enforced(self):
        with pytest.raises(ConfigError, match="bath.window"):
            resolve(parse_text("bath.cutoff = 1\nbath.window = box\n"
                               "kernels.t_max = 1\n"), "kernels")

    def test_rng_seal(self):
        with pytest.raises(ConfigError, match="determinism seal"):
            resolve(parse_text("run.rng_free = false\n"), "evolve")

    def test_required_keys_per_command(self):
        with pytest.raises(ConfigError, match="bath.cutoff is required"):
            resolve({}, "kernels")
        with pytest.raises(ConfigError, match="sieve.checkpoints is required"):
            resolve(parse_text("bath.cutoff = 1\n"), "sieve")
        with pytest.raises(ConfigError, match="needs a horizon"):
            resolve(parse_text("bath.cutoff = 1\n"), "evolve")

    def test_horizon_conflict_cites_both_keys(self):
        text = "bath.cutoff = 1\nsolver.t_max = 5\nkernels.t_max = 2\n"
        with pytest.raises(ConfigError) as exc:
            resolve(parse_text(text), "evolve")
        msg = str(exc.value)
        assert "kernels.t_max" in msg and "solver.t_max" in msg

    def test_checkpoint_conflict_cites_both_keys(self):
        text = ("bath.cutoff = 1\nsolver.t_max = 1\n"
                "sieve.checkpoints = 2.0, 4.0\n")
        with pytest.raises(ConfigError) as exc:
            resolve(parse_text(text), "sieve")
        msg = str(exc.value)
        assert "solver.t_max" in msg and "sieve.checkpoints" in msg

    def test_echo_round_trips(self):
        cfg = resolve(parse_text("bath.cutoff = 0.5\nsolver.t_max = 2.5\n"
                                 "family.amps = 0.25, 0.75\n"), "evolve")
        again = resolve(parse_text(cfg.echo()), "evolve")
        assert again.values == cfg.values

    def test_every_schema_key_parses_its_default_echo(self):
        cfg = resolve(parse_text("bath.cutoff = 1\nkernels.t_max = 1\n"),
                      "kernels")
        raw = parse_text(cfg.echo())
        assert set(raw) <= set(SCHEMA)


class TestCliRuns:
    def test_kernels_run_writes_products(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, KERNELS_CFG)
        out = tmp_path / "out"
        assert cli.main(["kernels", "--config", cfg, "--out", str(out)]) == 0
        assert capsys.readouterr().out.strip() == str(out)
        names = sorted(p.name for p in out.iterdir())
        assert names == ["kernels.csv", "manifest.txt", "resolved.cfg"]
        manifest = (out / "manifest.txt").read_text()
        assert "command = kernels" in manifest
        assert "backend = " in manifest
        assert "[resolved configuration]" in manifest
        assert "system.d = 16" in manifest  # defaults echoed

    def test_reruns_are_byte_identical(self, tmp_path):
        cfg = write_cfg(tmp_path, KERNELS_CFG)
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["kernels", "--config", cfg, "--out", str(a)]) == 0
        assert cli.main(["kernels", "--config", cfg, "--out", str(b)]) == 0
        assert (a / "kernels.csv").read_bytes() == (b / "kernels.csv").read_bytes()
        assert (a / "resolved.cfg").read_bytes() == (b / "resolved.cfg").read_bytes()

    def test_svg_is_deterministic(self, tmp_path):
        cfg = write_cfg(tmp_path, """\
            bath.cutoff = 0.5
            kernels.t_max = 6.283185307179586
            output.plot = coefficient_traces
        """)
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["coeffs", "--config", cfg, "--out", str(a)]) == 0
        assert cli.main(["coeffs", "--config", cfg, "--out", str(b)]) == 0
        svg = (a / "plot.svg").read_bytes()
        assert svg == (b / "plot.svg").read_bytes()
        assert svg.lstrip().startswith(b"<?xml")

    def test_evolve_and_secular_sieve(self, tmp_path):
        cfg = write_cfg(tmp_path, """\
            system.d = 10
            bath.cutoff = 0.01
            bath.k_max = 0.08
            solver.engine = secular
            sieve.kind = number_states
            family.n_max = 2
            sieve.checkpoints = 6.283185307179586, 12.566370614359172
        """)
        out = tmp_path / "out"
        assert cli.main(["sieve", "--config", cfg, "--out", str(out)]) == 0
        manifest = (out / "manifest.txt").read_text()
        assert "winner = number[0]" in manifest
        assert "degenerate = true" in manifest  # populations never move
        assert (out / "ranking.csv").exists()

    def test_oracle_runner(self, tmp_path):
        cfg = write_cfg(tmp_path, """\
            oracle.d_s = 4
            oracle.mode_omegas = 1.3
            oracle.mode_couplings = 0.08
            oracle.mode_levels = 4
            oracle.t_star = 0.5
        """)
        out = tmp_path / "out"
        assert cli.main(["oracle", "--config", cfg, "--out", str(out)]) == 0
        manifest = (out / "manifest.txt").read_text()
        assert "joint_dim = 16" in manifest
        assert "monotone = true" in manifest
        lines = (out / "scaling.csv").read_text().strip().split("\n")
        assert lines[0] == "e,delta,ratio"

    def test_mode_list_length_mismatch(self, tmp_path):
        cfg = write_cfg(tmp_path, """\
            oracle.mode_omegas = 1.3, 2.0
            oracle.mode_couplings = 0.08
        """)
        assert cli.main(["oracle", "--config", cfg,
                         "--out", str(tmp_path / "o")]) == 2


class TestExitCodes:
    def test_config_error_leaves_nothing(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "bath.cutof = 0.5\n")
        out = tmp_path / "out"
        assert cli.main(["kernels", "--config", cfg, "--out", str(out)]) == 2
        assert "error (config)" in capsys.readouterr().err
        assert not out.exists()  # failed before any writes

    def test_truncation_exit_and_cleanup(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, """\
            system.d = 8
            bath.cutoff = 2.0
            bath.temperature = 20.0
            bath.e2 = 0.05
            state.kind = number
            state.n = 4
            solver.t_max = 6.283185307179586
        """)
        out = tmp_path / "out"
        assert cli.main(["evolve", "--config", cfg, "--out", str(out)]) == 3
        assert "error (truncation)" in capsys.readouterr().err
        assert list(out.iterdir()) == []  # partial products swept away

    def test_quadrature_exit(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, """\
            bath.cutoff = 1e-4
            bath.k_max = 10.0
            bath.window = gaussian
            kernels.t_max = 1.0
        """)
        out = tmp_path / "out"
        assert cli.main(["kernels", "--config", cfg, "--out", str(out)]) == 4
        assert "error (quadrature)" in capsys.readouterr().err
        assert list(out.iterdir()) == []

    def test_degeneracy_exit(self, tmp_path, capsys, monkeypatch):
        def fake_rates(channels, ops):
            raise DegeneracyError("levels collide", pairs=[(0, 1)])

        monkeypatch.setattr(cli, "secular_rates", fake_rates)
        cfg = write_cfg(tmp_path, "bath.cutoff = 0.5\n")
        out = tmp_path / "out"
        assert cli.main(["rates", "--config", cfg, "--out", str(out)]) == 5
        assert "error (degeneracy)" in capsys.readouterr().err
        assert list(out.iterdir()) == []

    def test_missing_config_file(self, tmp_path, capsys):
        assert cli.main(["kernels", "--config", str(tmp_path / "nope.cfg"),
                         "--out", str(tmp_path / "o")]) == 2
        assert "error (config)" in capsys.readouterr().err

    def test_plot_command_mismatch(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, """\
            bath.cutoff = 0.5
            kernels.t_max = 6.283185307179586
            output.plot = entropy_curves
        """)
        out = tmp_path / "out"
        assert cli.main(["coeffs", "--config", cfg, "--out", str(out)]) == 2
        assert "belongs to the 'sieve' subcommand" in capsys.readouterr().err
        assert list(out.iterdir()) == []

    def test_off_lattice_checkpoints(self, tmp_path):
        cfg = write_cfg(tmp_path, """\
            system.d = 10
            bath.cutoff = 0.01
            bath.k_max = 0.08
            solver.engine = secular
            sieve.kind = number_states
            sieve.checkpoints = 6.3
        """)
        assert cli.main(["sieve", "--config", cfg,
                         "--out", str(tmp_path / "o")]) == 2


class TestOutputPrecedence:
    def test_config_dir_is_fallback(self, tmp_path, monkeypatch):
        monkeypatch.delenv("DECOSIEVE_OUT", raising=False)
        monkeypatch.chdir(tmp_path)
        cfg = write_cfg(tmp_path, KERNELS_CFG + "output.dir = cfgout\n")
        assert cli.main(["kernels", "--config", cfg]) == 0
        assert (tmp_path / "cfgout" / "kernels.csv").exists()

    def test_env_overrides_config(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DECOSIEVE_OUT", str(tmp_path / "envout"))
        cfg = write_cfg(tmp_path, KERNELS_CFG + "output.dir = cfgout\n")
        assert cli.main(["kernels", "--config", cfg]) == 0
        assert (tmp_path / "envout" / "kernels.csv").exists()
        assert not (tmp_path / "cfgout").exists()

    def test_flag_overrides_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DECOSIEVE_OUT", str(tmp_path / "envout"))
        cfg = write_cfg(tmp_path, KERNELS_CFG + "output.dir = cfgout\n")
        out = tmp_path / "flagout"
        assert cli.main(["kernels", "--config", cfg, "--out", str(out)]) == 0
        assert (out / "kernels.csv").exists()
        assert not (tmp_path / "envout").exists()
