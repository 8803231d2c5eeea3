import os

import pytest

from kerrgap import cli


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.delenv("KERRGAP_OUT", raising=False)
    return tmp_path / "out"


def run(out, *argv):
    return cli.run(list(argv) + ["--out", str(out)])


class TestExitCodes:
    def test_energy(self, out, capsys):
        assert run(out, "energy", "--n-r", "32", "--n-theta", "16") == 0
        text = (out / "energy.csv").read_text()
        assert text.startswith("functional,region,value")
        assert (out / "energy.config.txt").read_text().count("grid.n_r=32") == 1

    def test_energy_kn_snaps_mass(self, out):
        assert run(out, "energy", "--background", "kn", "--m", "1.4142135", "--region",
                   "omega:10:0.2", "--n-r", "32", "--n-theta", "16") == 0

    def test_kn_off_extremal_rejected(self, out, capsys):
        assert run(out, "energy", "--background", "kn", "--m", "1.5", "--n-r", "32",
                   "--n-theta", "16") == 2
        assert "extremality" in capsys.readouterr().err

    def test_unknown_command(self, out):
        assert run(out, "fly") == 2

    def test_bad_number(self, out, capsys):
        assert run(out, "energy", "--n-r", "many") == 2
        assert "grid.n_r" in capsys.readouterr().err

    def test_bad_region(self, out):
        assert run(out, "energy", "--region", "disk:1", "--n-r", "32", "--n-theta", "16") == 2

    def test_failing_rows_exit_one(self, out, capsys):
        # the dU part of the member decays like r^-2, capping the far exponent at 3 < 2*5-3
        assert run(out, "cutpaste-study", "--lam", "5") == 1
        assert "FAIL cutpaste-checks: far_exponent" in capsys.readouterr().err
        assert (out / "cutpaste-checks.csv").exists()

    def test_ladder_below_minimum(self, out):
        assert run(out, "cutpaste-study", "--rungs", "12") == 2

    def test_validate_class(self, out):
        assert run(out, "validate-class", "--class", "chrusciel", "--n-r", "128",
                   "--n-theta", "64") == 0
        assert (out / "derived-rates.csv").exists()

    def test_plot(self, out, tmp_path):
        src = tmp_path / "t.csv"
        src.write_text("h,relative\n0.1,0.01\n0.05,0.005\n")
        assert run(out, "plot", "--table", str(src)) == 0
        assert (out / "t.svg").exists()
        assert run(out, "plot", "--table", str(tmp_path / "missing.csv")) == 2


class TestConfig:
    def test_file_and_flag_precedence(self, out, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text("# comment\ngrid.n_r = 40\ngrid.n_theta=16\n")
        assert run(out, "energy", "--config", str(cfg), "--n-r", "48") == 0
        echo = (out / "energy.config.txt").read_text()
        assert "grid.n_r=48" in echo and "grid.n_theta=16" in echo

    def test_unknown_key_reports_line(self, out, tmp_path, capsys):
        cfg = tmp_path / "c.txt"
        cfg.write_text("grid.n_r=40\ngrid.nope=1\n")
        assert run(out, "energy", "--config", str(cfg)) == 2
        assert f"{cfg}:2" in capsys.readouterr().err

    def test_missing_equals(self, out, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text("grid.n_r 40\n")
        assert run(out, "energy", "--config", str(cfg)) == 2

    def test_env_overrides_out(self, tmp_path, monkeypatch):
        monkeypatch.setenv("KERRGAP_OUT", str(tmp_path / "env"))
        assert cli.run(["energy", "--n-r", "32", "--n-theta", "16", "--out", str(tmp_path / "x")]) == 0
        assert (tmp_path / "env" / "energy.csv").exists()
        assert not (tmp_path / "x").exists()


class TestDeterminism:
    def test_gap_check_twice(self, tmp_path, monkeypatch):
        texts = []
        for k in range(2):
            monkeypatch.setenv("KERRGAP_OUT", str(tmp_path / f"run{k}"))
            assert cli.run(["gap-check", "--seeds", "2", "--amplitude", "0.1,0.5",
                            "--n-r", "64", "--n-theta", "32"]) == 0
            texts.append((tmp_path / f"run{k}" / "gap-check.csv").read_bytes())
        assert texts[0] == texts[1]

    def test_main_exits(self, out):
        with pytest.raises(SystemExit) as exc:
            cli.main(["energy", "--n-r", "32", "--n-theta", "16", "--out", str(out)])
        assert exc.value.code == 0
