"""Command-line front end."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from scipy import integrate

from fractional_ou.cli import CONFIG_KEYS, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main

BASE = 'hurst = 0.7\nalpha = 0.8\nsigma = 1.0\nx0 = 1.0\nfourier_order = 1\nmu = [1.0, 0.5, -0.5]\n'


def write_config(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestHelp:
    def test_every_key_listed(self):
        proc = subprocess.run(
            [sys.executable, "-m", "fractional_ou.cli", "mc", "--help"], capture_output=True, text=True, check=True
        )
        for key in CONFIG_KEYS:
            assert key in proc.stdout
        for flag in ("--config", "--out", "--seed", "--threads"):
            assert flag in proc.stdout

    def test_top_level_lists_exit_codes(self):
        proc = subprocess.run([sys.executable, "-m", "fractional_ou.cli", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert "exit codes" in proc.stdout and "hurst_list" in proc.stdout


class TestSimulate:
    def test_row_count(self, tmp_path, capsys):
        cfg = write_config(tmp_path, BASE + "T = 2.0\nn_steps = 300\n")
        code, _, _ = run(["simulate", "--config", cfg, "--out", str(tmp_path)], capsys)
        assert code == EXIT_OK
        lines = (tmp_path / "path.csv").read_text().splitlines()
        assert lines[0] == "t,X,B" and len(lines) == 302

    def test_deterministic(self, tmp_path, capsys):
        cfg = write_config(tmp_path, BASE + "T = 1.0\nn_steps = 100\nseed = 4\n")
        for d in ("a", "b"):
            assert run(["simulate", "--config", cfg, "--out", str(tmp_path / d)], capsys)[0] == EXIT_OK
        assert (tmp_path / "a" / "path.csv").read_bytes() == (tmp_path / "b" / "path.csv").read_bytes()

    def test_seed_flag_overrides(self, tmp_path, capsys):
        cfg = write_config(tmp_path, BASE + "T = 1.0\nn_steps = 100\nseed = 4\n")
        run(["simulate", "--config", cfg, "--out", str(tmp_path / "a")], capsys)
        run(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "5"], capsys)
        assert (tmp_path / "a" / "path.csv").read_bytes() != (tmp_path / "b" / "path.csv").read_bytes()

    @pytest.mark.parametrize("alpha", ["0.0", "-1.0"])
    def test_non_ergodic_rejected(self, tmp_path, capsys, alpha):
        cfg = write_config(tmp_path, BASE.replace("alpha = 0.8", f"alpha = {alpha}") + "T = 1.0\n")
        code, _, err = run(["simulate", "--config", cfg, "--out", str(tmp_path)], capsys)
        assert code == EXIT_CONFIG
        assert "non-ergodic case requires alpha > 0" in err


class TestSchema:
    def test_unknown_key_named(self, tmp_path, capsys):
        cfg = write_config(tmp_path, BASE + "T = 1.0\nhorizon = 5\n")
        code, _, err = run(["simulate", "--config", cfg], capsys)
        assert code == EXIT_CONFIG and "'horizon'" in err

    @pytest.mark.parametrize("line,key", [('hurst = "0.7"', "hurst"), ("n_steps = 10.5", "n_steps"),
                                          ("replications = true", "replications"), ('mu = [1, "a", 2]', "mu")])
    def test_type_errors_named(self, tmp_path, capsys, line, key):
        text = "\n".join(l for l in (BASE + "T = 1.0\n").splitlines() if not l.startswith(key + " ")) + "\n" + line + "\n"
        code, _, err = run(["simulate", "--config", write_config(tmp_path, text)], capsys)
        assert code == EXIT_CONFIG and f"'{key}'" in err

    def test_exclusive_basis_keys(self, tmp_path, capsys):
        cfg = write_config(tmp_path, BASE + 'T = 1.0\nbasis_file = "b.csv"\n')
        assert run(["simulate", "--config", cfg], capsys)[0] == EXIT_CONFIG

    def test_unparsable(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "hurst = = 0.7\n")
        assert run(["limits", "--config", cfg], capsys)[0] == EXIT_CONFIG

    def test_mu_length(self, tmp_path, capsys):
        cfg = write_config(tmp_path, BASE.replace("[1.0, 0.5, -0.5]", "[1.0]") + "T = 1.0\n")
        code, _, err = run(["simulate", "--config", cfg], capsys)
        assert code == EXIT_CONFIG and "'mu'" in err


class TestEstimate:
    def test_round_trip(self, tmp_path, capsys):
        cfg = write_config(tmp_path, BASE + "T = 5.0\nn_steps = 2000\n")
        run(["simulate", "--config", cfg, "--out", str(tmp_path)], capsys)
        code, out, _ = run(["estimate", "--config", cfg, str(tmp_path / "path.csv")], capsys)
        assert code == EXIT_OK
        res = json.loads(out)
        assert len(res["theta_hat"]) == 4 and all(np.isfinite(res["theta_hat"]))

    def test_noiseless_ode_solution(self, tmp_path, capsys):
        alpha, mu = 0.8, (1.0, 0.5, -0.5)
        drift = lambda t: mu[0] + mu[1] * np.sqrt(2) * np.sin(2 * np.pi * t) + mu[2] * np.sqrt(2) * np.cos(2 * np.pi * t)
        T, n = 10.0, 4096
        t = np.linspace(0, T, n + 1)
        sol = integrate.solve_ivp(lambda s, x: alpha * x + drift(s), (0, T), [1.0], t_eval=t, rtol=1e-12, atol=1e-12,
                                  method="DOP853")
        path = tmp_path / "ode.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "X"])
            w.writerows(zip(map(repr, t.tolist()), map(repr, sol.y[0].tolist())))
        cfg = write_config(tmp_path, "fourier_order = 1\n")
        code, out, _ = run(["estimate", "--config", cfg, str(path)], capsys)
        assert code == EXIT_OK
        theta = np.array(json.loads(out)["theta_hat"])
        assert np.max(np.abs(theta - np.array([*mu, alpha]))) <= 1e-3

    def test_truncated_csv(self, tmp_path, capsys):
        cfg = write_config(tmp_path, BASE + "T = 1.0\nn_steps = 50\n")
        run(["simulate", "--config", cfg, "--out", str(tmp_path)], capsys)
        text = (tmp_path / "path.csv").read_text()
        (tmp_path / "bad.csv").write_text(text[: len(text) // 2].rsplit(",", 1)[0] + ",\n")
        code, _, err = run(["estimate", "--config", cfg, str(tmp_path / "bad.csv")], capsys)
        assert code == EXIT_CONFIG and err

    def test_non_uniform_grid(self, tmp_path, capsys):
        t = np.array([0.0, 0.1, 0.2, 0.35, 0.4])
        np.savetxt(tmp_path / "g.csv", np.c_[t, 1 + t], delimiter=",", header="t,X", comments="")
        code, _, err = run(["estimate", str(tmp_path / "g.csv")], capsys)
        assert code == EXIT_CONFIG and "uniform" in err

    def test_singular_exit_code_differs(self, tmp_path, capsys):
        t = np.linspace(0, 1, 11)
        np.savetxt(tmp_path / "z.csv", np.c_[t, 0 * t], delimiter=",", header="t,X", comments="")
        code, _, err = run(["estimate", str(tmp_path / "z.csv")], capsys)
        assert code == EXIT_NUMERICAL and "D =" in err


class TestLimits:
    def test_brownian_ratio_parameter(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "hurst = 0.5\nalpha = 1.0\nx0 = 1.0\n")
        code, out, _ = run(["limits", "--config", cfg], capsys)
        assert code == EXIT_OK
        data = json.loads(out)
        assert data["m"] == pytest.approx(1.414214, abs=1e-6)
        assert data["zero_integral"] == {}

    def test_zero_integral_entries(self, tmp_path, capsys):
        code, out, _ = run(["limits", "--config", write_config(tmp_path, BASE)], capsys)
        data = json.loads(out)
        assert code == EXIT_OK and len(data["zero_integral"]) == 2
        assert np.allclose(data["gaussian_cov"], np.diag([1.0, 0, 0]))


class TestMc:
    def test_zero_replications(self, tmp_path, capsys):
        cfg = write_config(tmp_path, BASE + "horizons = [1.0]\nreplications = 0\n")
        code, _, err = run(["mc", "--config", cfg, "--out", str(tmp_path)], capsys)
        assert code == EXIT_CONFIG and "'replications'" in err

    def test_outputs(self, tmp_path, capsys):
        cfg = write_config(tmp_path, BASE + "horizons = [1.0, 2.0]\nreplications = 5\nn_steps = 256\n")
        code, _, _ = run(["mc", "--config", cfg, "--out", str(tmp_path), "--threads", "2"], capsys)
        assert code == EXIT_OK
        assert len((tmp_path / "replications.csv").read_text().splitlines()) == 11
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert [h["T"] for h in summary["horizons"]] == [1.0, 2.0]

    def test_decreasing_horizons(self, tmp_path, capsys):
        cfg = write_config(tmp_path, BASE + "horizons = [2.0, 1.0]\nreplications = 2\n")
        code, _, err = run(["mc", "--config", cfg, "--out", str(tmp_path)], capsys)
        assert code == EXIT_CONFIG and "'horizons'" in err


class TestVarianceCheck:
    def test_agreement_column(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "hurst_list = [0.75]\nfourier_order = 1\n")
        code, _, _ = run(["variance-check", "--config", cfg, "--out", str(tmp_path)], capsys)
        assert code == EXIT_OK
        with open(tmp_path / "variance_check.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        assert "by_oracle_n128" in rows[0]
        assert all(float(r["max_rel_dev"]) <= 0.005 for r in rows)

    def test_hurst_range(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "hurst_list = [0.4]\nfourier_order = 1\n")
        assert run(["variance-check", "--config", cfg, "--out", str(tmp_path)], capsys)[0] == EXIT_CONFIG
