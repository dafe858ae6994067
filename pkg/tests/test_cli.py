import json

import numpy as np
import pytest

from stepscat import cli, io
from stepscat.config import ConfigError, RunConfig


def write(path, text):
    path.write_text(text)
    return str(path)


def report_of(path):
    return json.loads(open(path).read())


@pytest.fixture
def sech_data(tmp_path):
    cfg = write(tmp_path / "sech.ini", "[potential]\nname = sech2\n")
    out = tmp_path / "sech.json"
    assert cli.run(["direct", "--config", cfg, "--out", str(out), "--no-convergence"]) == 0
    return cfg, out


class TestDirect:
    def test_free_gives_trivial_data(self, tmp_path):
        cfg = write(tmp_path / "free.ini", "[potential]\nname = free\n")
        out = tmp_path / "free.json"
        assert cli.run(["direct", "--config", cfg, "--out", str(out)]) == 0
        d = io.load_data(out)
        assert d.eigenvalues.size == 0
        for side in (1, -1):
            _, R, T, _ = d.nodes(side)
            assert np.max(np.abs(R)) < 1e-7 and np.max(np.abs(T - 1)) < 1e-7
        rep = report_of(tmp_path / "free.report.json")
        assert rep["command"] == "direct"
        assert all(e["passed"] is not False for e in rep["entries"].values())

    def test_sech_eigenvalue(self, sech_data, tmp_path):
        _, out = sech_data
        assert io.load_data(out).eigenvalues == pytest.approx([-1.0], abs=1e-6)

    def test_deterministic(self, sech_data, tmp_path):
        cfg, out = sech_data
        again = tmp_path / "again.json"
        assert cli.run(["direct", "--config", cfg, "--out", str(again), "--no-convergence"]) == 0
        assert again.read_bytes() == out.read_bytes()


class TestInverse:
    def test_tampered_data_name_the_failure(self, sech_data, tmp_path):
        cfg, out = sech_data
        raw = json.loads(out.read_text())
        raw["bands_plus"][0]["re_R"][3] = 1.5
        bad = write(tmp_path / "bad.json", io.dumps(raw))
        rpath = tmp_path / "bad.report.json"
        code = cli.run(["inverse", "--data", bad, "--config", cfg, "--out", str(tmp_path / "q.csv"),
                        "--report", str(rpath), "--no-convergence"])
        assert code == cli.EXIT_INVARIANT
        failed = [k for k, e in report_of(rpath)["entries"].items() if e["passed"] is False]
        assert "I(c)+" in failed

    def test_valid_data_reconstruct(self, sech_data, tmp_path):
        cfg, out = sech_data
        csv = tmp_path / "q.csv"
        assert cli.run(["inverse", "--data", str(out), "--config", cfg, "--out", str(csv),
                        "--no-convergence"]) == 0
        cols = io.read_csv(csv)
        assert set(cols) == {"x", "q_plus", "q_minus", "discrepancy"}
        mid = np.abs(cols["x"]) < 4.8
        assert np.max(np.abs(cols["q_plus"][mid] + 2 / np.cosh(cols["x"][mid]) ** 2)) < 1e-3


class TestInputErrors:
    def test_missing_config(self, tmp_path):
        assert cli.run(["direct", "--config", str(tmp_path / "nope.ini"), "--out", "x.json"]) == 3

    @pytest.mark.parametrize("text", [
        "[potential]\nname = free\nwindow = 3, 1\n",
        "[potential]\nname = no_such_potential\n",
        "[grid]\nspacing = 0.1\n",
        "[potential]\nname = free\n[grid]\nbogus = 1\n",
        "[potential]\nname = free\nfile = a.csv\n",
        "not an ini file",
    ])
    def test_bad_config(self, tmp_path, text):
        cfg = write(tmp_path / "c.ini", text)
        assert cli.run(["direct", "--config", cfg, "--out", str(tmp_path / "x.json")]) == 3

    def test_file_potential_needs_backgrounds(self, tmp_path):
        write(tmp_path / "s.csv", "x,q\n-8,0\n8,0\n")
        cfg = write(tmp_path / "c.ini", "[potential]\nfile = s.csv\n")
        assert cli.run(["direct", "--config", cfg, "--out", str(tmp_path / "x.json")]) == 3

    def test_missing_data_file(self, sech_data, tmp_path):
        cfg, _ = sech_data
        code = cli.run(["inverse", "--data", str(tmp_path / "none.json"), "--config", cfg,
                        "--out", str(tmp_path / "q.csv")])
        assert code == 3

    def test_bad_times(self, tmp_path):
        cfg = write(tmp_path / "c.ini", "[potential]\nname = free\n")
        assert cli.run(["kdv", "--config", cfg, "--times", "0,abc", "--out", str(tmp_path / "u.csv")]) == 3

    def test_kdv_needs_times(self, tmp_path):
        cfg = write(tmp_path / "c.ini", "[potential]\nname = free\n")
        assert cli.run(["kdv", "--config", cfg, "--out", str(tmp_path / "u.csv")]) == 3


class TestBackgroundSections:
    def test_matching_lame_section_accepted(self):
        cfg = RunConfig.from_text("[potential]\nname = lame_bump\n"
                                  "[background.right]\nkind = periodic\nprofile = lame\nm = 0.5\n"
                                  "[background.left]\nkind = constant\nc = 0\n")
        q = cfg.build_potential()
        assert q.right.kind == "periodic"

    def test_mismatched_section_rejected(self, tmp_path):
        text = ("[potential]\nname = lame_bump\n"
                "[background.right]\nkind = periodic\nprofile = lame\nm = 0.3\n")
        with pytest.raises(ConfigError):
            RunConfig.from_text(text).build_potential()
        cfg = write(tmp_path / "c.ini", text)
        assert cli.run(["direct", "--config", cfg, "--out", str(tmp_path / "x.json")]) == 3

    def test_file_potential_with_constant_backgrounds(self, tmp_path):
        x = np.linspace(-8, 8, 801)
        io.write_csv(tmp_path / "s.csv", ["x", "q"], [x, -2 / np.cosh(x) ** 2])
        cfg = RunConfig.from_text("[potential]\nfile = s.csv\nwindow = -8, 8\n"
                                  "[background.left]\nkind = constant\n"
                                  "[background.right]\nkind = constant\n", tmp_path / "c.ini")
        q = cfg.build_potential()
        assert q(np.array([0.0]))[0] == pytest.approx(-2.0, abs=1e-6)


class TestKdv:
    def test_free_stays_zero(self, tmp_path):
        cfg = write(tmp_path / "k.ini", "[potential]\nname = free\n[kdv]\ntimes = 0, 0.05\n")
        out = tmp_path / "u.csv"
        assert cli.run(["kdv", "--config", cfg, "--out", str(out), "--no-convergence"]) == 0
        cols = io.read_csv(out)
        assert set(np.unique(cols["t"])) == {0.0, 0.05}
        assert np.max(np.abs(cols["u"])) < 1e-8
        names = list(report_of(tmp_path / "u.report.json")["entries"])
        assert "isospectrality" in names and "t=0.05:I(c)+" in names
        assert len(names) == len(set(names))

    def test_dirichlet_points_logged(self, tmp_path):
        cfg = write(tmp_path / "k.ini", "[potential]\nname = lame_bump\n[kdv]\ntimes = 0, 0.05\n")
        out = tmp_path / "u.csv"
        cli.run(["kdv", "--config", cfg, "--out", str(out), "--no-convergence"])
        log = report_of(tmp_path / "u.report.json")["info"]["dirichlet"]
        assert set(log) == {"t=0", "t=0.05"}
        (right0,), (right1,) = log["t=0"]["right"], log["t=0.05"]["right"]
        assert right0["mu"] != right1["mu"] and log["t=0"]["left"] == []
