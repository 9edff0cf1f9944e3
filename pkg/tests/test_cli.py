import numpy as np
import pytest

from riskratio.cli import main
from riskratio.rng import stream
from riskratio.simlab import generate, get_scenario


@pytest.fixture
def two_by_two_csv(tmp_path):
    path = tmp_path / "tab.csv"
    rows = ["y,A"]
    rows += ["1,1"] * 30 + ["0,1"] * 70 + ["1,0"] * 20 + ["0,0"] * 80
    path.write_text("\n".join(rows) + "\n")
    return str(path)


def write_scenario_csv(tmp_path, scenario, n, stream_key):
    data = generate(scenario, n, rng=stream(*stream_key))
    cols = ["y"] + sorted(data.columns)
    lines = [",".join(cols)]
    for i in range(data.n):
        vals = [data.y[i]] + [data.column(c)[i] for c in cols[1:]]
        lines.append(",".join(f"{v:.17g}" for v in vals))
    path = tmp_path / f"{scenario}.csv"
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestFit:
    def test_2x2_table_output(self, two_by_two_csv, capsys):
        code = main([
            "fit", "--csv", two_by_two_csv, "--outcome", "y", "--exposure", "A",
            "--spec", "1 + A",
        ])
        out = capsys.readouterr().out
        assert code == 0
        assert "1.50" in out
        # closed-form Wald CI on the log scale
        se = np.sqrt(0.7 / 30 + 0.8 / 20)
        z = 1.959963984540054
        assert f"{1.5 * np.exp(-z * se):.2f}" in out
        assert f"{1.5 * np.exp(z * se):.2f}" in out

    def test_machine_format_roundtrips(self, two_by_two_csv, tmp_path):
        out_path = tmp_path / "fit.json"
        code = main([
            "fit", "--csv", two_by_two_csv, "--outcome", "y", "--exposure", "A",
            "--format", "machine", "--out", str(out_path),
        ])
        assert code == 0
        import json

        payload = json.loads(out_path.read_text())
        est = payload["results"]["estimates"][0]
        np.testing.assert_allclose(est["rr"], 1.5, atol=1e-8)
        assert payload["results"]["n"] == 200

    def test_cat_and_rcs_spec_shape(self, tmp_path, capsys):
        rng = stream(80, 0)
        n = 600
        a = rng.integers(0, 4, size=n).astype(float)
        l = rng.standard_normal(n)
        y = (rng.random(n) < 0.25).astype(float)
        lines = ["y,A,L"] + [
            f"{y[i]:g},{a[i]:g},{l[i]:.17g}" for i in range(n)
        ]
        path = tmp_path / "cat.csv"
        path.write_text("\n".join(lines) + "\n")
        code = main([
            "fit", "--csv", str(path), "--outcome", "y", "--exposure", "A",
            "--spec", "1 + cat(A,ref=0) + rcs(L,4)", "--estimand", "both",
        ])
        out = capsys.readouterr().out
        assert code == 0
        # 3 coefficient rows (levels 1,2,3 vs 0) + 3 marginal rows
        assert out.count("wald-sandwich") == 3
        assert out.count("delta") == 3

    def test_logbin_ml_complex_sample_exits_4(self, tmp_path, capsys):
        # find a complex-scenario sample where ML hits the boundary
        for r in range(20):
            csv = write_scenario_csv(tmp_path, "complex", 1000, (81, r))
            code = main([
                "fit", "--csv", csv, "--outcome", "y", "--exposure", "A",
                "--spec", get_scenario("complex").simple_spec,
                "--method", "logbin-ml",
            ])
            capsys.readouterr()
            if code == 4:
                return
        pytest.fail("no complex sample produced a log-binomial ML failure")

    def test_bootstrap_row(self, tmp_path, capsys):
        csv = write_scenario_csv(tmp_path, "simple", 400, (82, 0))
        code = main([
            "fit", "--csv", csv, "--outcome", "y", "--exposure", "A",
            "--spec", "1 + A + L1 + L2", "--boot", "100", "--seed", "5",
        ])
        out = capsys.readouterr().out
        assert code == 0
        assert "bootstrap(100)" in out


class TestStudy:
    SMOKE = (
        "scenario = simple\nn = 200\nreplications = 10\nbase_seed = 11\n"
        "methods = robust-poisson\nspecifications = simple\n"
        "estimands = coefficient\ntruth_n = 50000\n"
    )

    def test_smoke_table(self, tmp_path, capsys):
        cfg = tmp_path / "smoke.cfg"
        cfg.write_text(self.SMOKE)
        assert main(["study", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "robust-poisson" in out
        assert "Bias" in out

    def test_machine_output_deterministic(self, tmp_path):
        cfg = tmp_path / "smoke.cfg"
        cfg.write_text(self.SMOKE)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["study", str(cfg), "--format", "machine",
                     "--out", str(a), "--threads", "1"]) == 0
        assert main(["study", str(cfg), "--format", "machine",
                     "--out", str(b), "--threads", "4"]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestOtherCommands:
    def test_truth(self, capsys):
        assert main(["truth", "--scenario", "simple", "--n", "200000"]) == 0
        out = capsys.readouterr().out
        assert "rr_true = 1.3" in out

    def test_figure_header_and_monotone_widths(self, capsys):
        assert main([
            "figure", "--sizes", "50,200,800", "--replications", "40",
            "--seed", "7",
        ]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "n,rr_hat,ci_low,ci_high"
        widths = []
        for line in lines[1:]:
            _, _, lo, hi = (float(v) for v in line.split(","))
            widths.append(hi - lo)
        assert widths == sorted(widths, reverse=True)

    def test_validate_csv_and_config(self, two_by_two_csv, tmp_path, capsys):
        cfg = tmp_path / "ok.cfg"
        cfg.write_text("scenario = simple\n")
        assert main(["validate", "--csv", two_by_two_csv, "--outcome", "y",
                     "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "ok" in out


class TestExitCodes:
    def test_bad_config_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("scenario = simple\nbogus = 1\n")
        assert main(["study", str(cfg)]) == 2
        assert "error:" in capsys.readouterr().err

    def test_bad_spec_exits_2(self, two_by_two_csv, capsys):
        assert main([
            "fit", "--csv", two_by_two_csv, "--outcome", "y", "--exposure", "A",
            "--spec", "1 + + A",
        ]) == 2
        capsys.readouterr()

    def test_missing_file_exits_3(self, capsys):
        assert main([
            "fit", "--csv", "/nonexistent.csv", "--outcome", "y",
            "--exposure", "A",
        ]) == 3
        capsys.readouterr()

    def test_bad_cell_exits_3(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("y,A\n1,1\n0,oops\n")
        assert main([
            "fit", "--csv", str(path), "--outcome", "y", "--exposure", "A",
        ]) == 3
        assert "error:" in capsys.readouterr().err

    def test_degenerate_outcome_exits_3(self, tmp_path, capsys):
        path = tmp_path / "deg.csv"
        path.write_text("y,A\n2,1\n0,0\n")
        assert main([
            "fit", "--csv", str(path), "--outcome", "y", "--exposure", "A",
        ]) == 3
        capsys.readouterr()
