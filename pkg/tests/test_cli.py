import json

import numpy as np
import pytest

from rosenblatt_lab.cli import run_cli


def run_to_file(tmp_path, name, args):
    out = tmp_path / name
    rc = run_cli(args + ["--out", str(out)])
    return rc, out


class TestSimulate:
    def test_byte_identical_reruns(self, tmp_path):
        args = ["simulate", "--hurst", "0.7", "--grid", "64", "--samples", "5",
                "--seed", "42"]
        rc1, f1 = run_to_file(tmp_path, "a.csv", args)
        rc2, f2 = run_to_file(tmp_path, "b.csv", args)
        assert rc1 == rc2 == 0
        assert f1.read_bytes() == f2.read_bytes()

    def test_csv_layout(self, tmp_path):
        rc, out = run_to_file(tmp_path, "paths.csv",
                              ["simulate", "--grid", "16", "--samples", "2",
                               "--seed", "1"])
        lines = out.read_text().splitlines()
        assert lines[0] == "t,path0,path1"
        assert len(lines) == 18
        first = lines[1].split(",")
        assert float(first[0]) == 0.0
        assert float(first[1]) == 0.0

    def test_json_summary(self, tmp_path):
        rc, out = run_to_file(tmp_path, "sum.json",
                              ["simulate", "--grid", "16", "--samples", "50",
                               "--seed", "1", "--format", "json"])
        data = json.loads(out.read_text())
        per_time = data["results"]["per_time"]
        assert len(per_time) == 17
        assert {"t", "mean", "var", "q05", "q50", "q95"} <= set(per_time[0])

    def test_nclt_method(self, tmp_path):
        rc, out = run_to_file(tmp_path, "n.csv",
                              ["simulate", "--method", "nclt", "--grid", "8",
                               "--samples", "2", "--inner-n", "2048",
                               "--seed", "3"])
        assert rc == 0
        assert len(out.read_text().splitlines()) == 10


class TestVerify:
    def test_ito_x2_payload(self, tmp_path):
        rc, out = run_to_file(tmp_path, "x2.json",
                              ["verify", "ito-x2", "--grid", "32",
                               "--samples", "150", "--seed", "11"])
        assert rc == 0
        data = json.loads(out.read_text())
        assert "residual_l2" in data["results"]["32"]
        assert data["pass"] is True

    def test_relation(self, tmp_path):
        rc, out = run_to_file(tmp_path, "rel.json",
                              ["verify", "relation", "--grid", "64",
                               "--samples", "24", "--seed", "5"])
        data = json.loads(out.read_text())
        assert rc == 0 and data["pass"] is True

    def test_pathwise_table(self, tmp_path):
        rc, out = run_to_file(tmp_path, "pw.json",
                              ["verify", "pathwise-ito", "--grid", "512",
                               "--paths", "6", "--seed", "2", "--tol", "0.2"])
        data = json.loads(out.read_text())
        table = data["results"]["table"]
        assert [row["N"] for row in table] == [128, 256, 512]
        assert all({"N", "eps", "residual"} <= set(row) for row in table)
        assert rc in (0, 1)


class TestMisc:
    def test_usage_error_exit_code(self):
        assert run_cli(["bogus"]) == 2
        assert run_cli([]) == 2

    def test_config_override(self, tmp_path):
        cfg = tmp_path / "rb.cfg"
        cfg.write_text("ou.lambda = 3.0\nou.sigma = 0.0\n")
        out = tmp_path / "ou.csv"
        rc = run_cli(["--config", str(cfg), "ou", "--grid", "32",
                      "--xi", "1.0", "--seed", "1", "--out", str(out)])
        assert rc == 0
        rows = out.read_text().splitlines()
        t, x = map(float, rows[-1].split(","))
        assert x == pytest.approx(np.exp(-3.0), rel=1e-9)

    def test_bad_config_exit(self, tmp_path):
        cfg = tmp_path / "broken.cfg"
        cfg.write_text("no equals sign here\n")
        assert run_cli(["--config", str(cfg), "ou", "--grid", "8"]) == 2

    def test_ou_csv(self, tmp_path):
        rc, out = run_to_file(tmp_path, "ou.csv",
                              ["ou", "--grid", "16", "--seed", "2"])
        lines = out.read_text().splitlines()
        assert lines[0] == "t,X"
        assert len(lines) == 18

    def test_spde_report_and_field(self, tmp_path):
        field = tmp_path / "field.csv"
        rc, out = run_to_file(tmp_path, "spde.json",
                              ["spde", "--modes", "3", "--grid", "32",
                               "--samples", "150", "--seed", "1",
                               "--field-csv", str(field)])
        assert rc == 0
        data = json.loads(out.read_text())
        assert data["results"]["trace_condition"]["converges"] is True
        assert field.read_text().splitlines()[0] == "t,mode1,mode2,mode3"

    def test_estimate_from_csv(self, tmp_path):
        src = tmp_path / "path.csv"
        rc, _ = run_to_file(tmp_path, "ignore.csv",
                            ["simulate", "--grid", "512", "--samples", "1",
                             "--seed", "9"])
        text = (tmp_path / "ignore.csv").read_text().splitlines()
        src.write_text("\n".join(
            ["t,value"] + [",".join(r.split(",")[:2]) for r in text[1:]]) + "\n")
        out = tmp_path / "est.json"
        rc = run_cli(["estimate", "--input", str(src), "--out", str(out)])
        assert rc == 0
        data = json.loads(out.read_text())
        assert 0.0 < data["results"]["hurst"] < 1.1

    def test_plot_writes_figure(self, tmp_path):
        out = tmp_path / "paths.csv"
        rc = run_cli(["simulate", "--grid", "16", "--samples", "2",
                      "--seed", "1", "--out", str(out), "--plot"])
        assert rc == 0
        assert (tmp_path / "paths.csv.png").exists()

    def test_cumulants_payload(self, tmp_path):
        rc, out = run_to_file(tmp_path, "cum.json",
                              ["cumulants", "--order", "2", "--t", "1.0",
                               "--grid", "64", "--samples", "2000",
                               "--seed", "8"])
        data = json.loads(out.read_text())
        assert rc == 0
        assert {"theoretical", "empirical", "se"} <= set(data["results"])
