"""CLI harness: schemas, exit codes, manifests, reproducibility."""

import csv
import json
import math
from pathlib import Path

import pytest
from click.testing import CliRunner

from adelic_diffusion.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestDensity:
    def test_table_and_normalization_row(self, runner, tmp_path):
        out = tmp_path / "d.csv"
        res = runner.invoke(main, ["density", "-p", "2", "--b", "1", "--sigma", "1",
                                   "--t", "1", "-o", str(out)])
        assert res.exit_code == 0, res.output
        rows = read_csv(out)
        assert rows[0] == ["schema_id", "m", "density", "sphere_mass", "ball_mass"]
        assert rows[1][0] == "density_v1"
        total_row = rows[-1]
        assert total_row[1] == "TOTAL"
        assert abs(float(total_row[3]) - 1.0) < 1e-10
        masses = [float(r[4]) for r in rows[1:-1]]
        assert all(a <= b + 1e-15 for a, b in zip(masses, masses[1:]))
        manifest = json.loads(Path(str(out) + ".manifest.json").read_text())
        assert manifest["command"] == "density"
        assert "alpha" in manifest["derived"]

    def test_bad_config_exit_code(self, runner, tmp_path):
        res = runner.invoke(main, ["density", "-p", "9", "-o", str(tmp_path / "x.csv")])
        assert res.exit_code == 2


class TestExit:
    def test_analytic_vs_mc(self, runner, tmp_path):
        out = tmp_path / "e.csv"
        res = runner.invoke(main, ["exit", "-p", "2", "--b", "1", "--sigma", "1",
                                   "-T", "1", "--r", "0", "--n-paths", "3000",
                                   "--seed", "5", "-o", str(out)])
        assert res.exit_code == 0, res.output
        rows = {r[1]: r for r in read_csv(out)[1:]}
        analytic = float(rows["analytic"][4])
        assert analytic == pytest.approx(math.exp(-2 / 3), abs=1e-12)
        mc = float(rows["event_mc"][4])
        se = float(rows["event_mc"][5])
        assert se == pytest.approx(math.sqrt(analytic * (1 - analytic) / 3000), rel=1e-9)
        assert abs(mc - analytic) <= 3 * se


class TestSample:
    def test_event_rows(self, runner, tmp_path):
        out = tmp_path / "s.csv"
        res = runner.invoke(main, ["sample", "-p", "3", "--b", "1", "--sigma", "1",
                                   "-T", "2", "--n-paths", "5", "--seed", "2",
                                   "--resolution", "0", "-o", str(out)])
        assert res.exit_code == 0, res.output
        rows = read_csv(out)
        assert rows[0][1:] == ["path_id", "kind", "time", "prime", "valuation",
                               "digits", "abs_exp"]
        assert any(r[2] == "event" for r in rows[1:])


class TestExitCount:
    def test_pmf_bounds_and_moments(self, runner, tmp_path):
        out = tmp_path / "c.csv"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "sigma_explicit": [p ** -2 for p in (2, 3, 5, 7, 11)],
            "b": 1.0, "T": 1.0, "truncation": 5, "k_max": 5,
            "n_paths": 3000, "seed": 3,
        }))
        res = runner.invoke(main, ["exit-count", "--config", str(cfg), "-o", str(out)])
        assert res.exit_code == 0, res.output
        rows = read_csv(out)
        pmf_rows = [r for r in rows[1:] if r[1] == "pmf"]
        assert len(pmf_rows) == 6
        for r in pmf_rows[1:]:
            assert r[8] == "True"  # strictly below factorial bound for k >= 1
        moment_rows = [r for r in rows[1:] if r[1] == "moment"]
        assert all(r[8] == "True" for r in moment_rows)


class TestOperator:
    def test_norm_table(self, runner, tmp_path):
        out = tmp_path / "op.csv"
        res = runner.invoke(main, ["operator", "--b", "1.0", "--primes", "2,3",
                                   "-o", str(out)])
        assert res.exit_code == 0, res.output
        rows = [r for r in read_csv(out)[1:] if r[1] == "norm"]
        two = [r for r in rows if r[2] == "2"][0]
        assert float(two[5]) == pytest.approx(4 / 7, abs=1e-14)
        assert float(two[7]) < 1e-12


class TestFk:
    def test_expectation_with_files(self, runner, tmp_path):
        obs = tmp_path / "obs.json"
        obs.write_text(json.dumps({"factors": [{
            "prime": 2, "terms": [{"zero": True, "radius_exp": 0, "coeff": 1.0}],
        }]}))
        pot = tmp_path / "pot.json"
        pot.write_text(json.dumps({"components": [{
            "prime": 2, "tau": 0.5,
            "terms": [{"zero": True, "radius_exp": 0, "coeff": 1.0}],
        }]}))
        out = tmp_path / "fk.csv"
        res = runner.invoke(main, ["fk", "--b", "1", "--t", "1", "--n-paths", "2000",
                                   "-N", "2", "--seed", "4", "--observable", str(obs),
                                   "--potential", str(pot), "-o", str(out)])
        assert res.exit_code == 0, res.output
        rows = read_csv(out)
        exp_row = [r for r in rows[1:] if r[1] == "expectation"][0]
        val, se = float(exp_row[2]), float(exp_row[4])
        assert 0.0 < val < 1.0 and se > 0

    def test_kernel_product_mode(self, runner, tmp_path):
        pot = tmp_path / "pot.json"
        pot.write_text(json.dumps({"components": [
            {"prime": 2, "tau": 0.5,
             "terms": [{"zero": True, "radius_exp": 0, "coeff": 1.0}]},
            {"prime": 3, "tau": 0.5,
             "terms": [{"zero": True, "radius_exp": 0, "coeff": 1.0}]},
        ]}))
        x = tmp_path / "x.json"
        x.write_text(json.dumps({"components": [
            {"prime": 2, "zero": True}, {"prime": 3, "zero": True}]}))
        y = tmp_path / "y.json"
        y.write_text(json.dumps({"components": [
            {"prime": 2, "valuation": 0, "digits": [1]},
            {"prime": 3, "zero": True}]}))
        out = tmp_path / "k.csv"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"bridge_steps": 32}))
        res = runner.invoke(main, [
            "fk", "--config", str(cfg), "--b", "1", "--t", "1", "--n-paths", "400",
            "-N", "2", "--seed", "4", "--potential", str(pot), "--point", str(x),
            "--endpoint", str(y), "--product", "-o", str(out),
        ])
        assert res.exit_code == 0, res.output
        rows = read_csv(out)
        kinds = [r[1] for r in rows[1:]]
        assert "kernel" in kinds and "kernel_product" in kinds
        kj = float([r for r in rows[1:] if r[1] == "kernel"][0][2])
        kp = float([r for r in rows[1:] if r[1] == "kernel_product"][0][2])
        sej = float([r for r in rows[1:] if r[1] == "kernel"][0][4])
        sep = float([r for r in rows[1:] if r[1] == "kernel_product"][0][4])
        assert abs(kj - kp) <= 4 * math.hypot(sej, sep)


class TestKernelSymmetryRecord:
    def test_reversed_row_emitted(self, runner, tmp_path):
        pot = tmp_path / "pot.json"
        pot.write_text(json.dumps({"components": [{
            "prime": 2, "tau": 0.5,
            "terms": [{"zero": True, "radius_exp": 0, "coeff": 1.0}]}]}))
        x = tmp_path / "x.json"
        x.write_text(json.dumps({"components": [{"prime": 2, "zero": True}]}))
        y = tmp_path / "y.json"
        y.write_text(json.dumps({"components": [
            {"prime": 2, "valuation": 0, "digits": [1]}]}))
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"bridge_steps": 16}))
        out = tmp_path / "k.csv"
        res = runner.invoke(main, [
            "fk", "--config", str(cfg), "--b", "1", "--t", "1", "--n-paths", "400",
            "-N", "1", "--seed", "6", "--potential", str(pot), "--point", str(x),
            "--endpoint", str(y), "-o", str(out),
        ])
        assert res.exit_code == 0, res.output
        rows = {r[1]: r for r in read_csv(out)[1:]}
        assert "kernel" in rows and "kernel_reversed" in rows
        kf, kr = float(rows["kernel"][2]), float(rows["kernel_reversed"][2])
        sf, sr = float(rows["kernel"][4]), float(rows["kernel_reversed"][4])
        assert abs(kf - kr) <= 4 * math.hypot(sf, sr)


class TestNumericFailureExitCode:
    def test_bridge_underflow_exits_three(self, runner, tmp_path):
        pot = tmp_path / "pot.json"
        pot.write_text(json.dumps({"components": [{
            "prime": 2, "tau": 0.5,
            "terms": [{"zero": True, "radius_exp": 0, "coeff": 1.0}]}]}))
        x = tmp_path / "x.json"
        x.write_text(json.dumps({"components": [{"prime": 2, "zero": True}]}))
        y = tmp_path / "y.json"
        y.write_text(json.dumps({"components": [
            {"prime": 2, "valuation": -131072, "digits": [1]}]}))
        res = runner.invoke(main, [
            "fk", "--b", "1", "--t", "0.001", "--n-paths", "50", "-N", "1",
            "--seed", "6", "--potential", str(pot), "--point", str(x),
            "--endpoint", str(y), "-o", str(tmp_path / "k.csv"),
        ])
        assert res.exit_code == 3


class TestManifestReproducibility:
    def test_rerun_from_manifest_bit_identical(self, runner, tmp_path):
        out1 = tmp_path / "a.csv"
        res = runner.invoke(main, ["exit-count", "--seed", "3", "--n-paths", "800",
                                   "-N", "4", "--k-max", "4", "-o", str(out1)])
        assert res.exit_code == 0, res.output
        out2 = tmp_path / "b.csv"
        res2 = runner.invoke(main, ["exit-count",
                                    "--config", str(out1) + ".manifest.json",
                                    "-o", str(out2)])
        assert res2.exit_code == 0, res2.output
        assert out1.read_bytes() == out2.read_bytes()

    def test_json_lines_format(self, runner, tmp_path):
        out = tmp_path / "d.jsonl"
        res = runner.invoke(main, ["density", "-p", "3", "--format", "json",
                                   "-o", str(out)])
        assert res.exit_code == 0, res.output
        lines = [json.loads(line) for line in out.read_text().splitlines()]
        assert all(doc["schema_id"] == "density_v1" for doc in lines)


class TestBench:
    def test_reports_throughput(self, runner, tmp_path):
        out = tmp_path / "b.csv"
        res = runner.invoke(main, ["bench", "--n", "500", "--seed", "1",
                                   "-o", str(out)])
        assert res.exit_code == 0, res.output
        rows = read_csv(out)[1:]
        names = {r[1] for r in rows}
        assert {"increment", "event_path", "bridge_16_epochs"} <= names
        assert all(float(r[4]) > 0 for r in rows)


class TestValidateCommand:
    def test_injected_alpha_bug_detected(self, runner, tmp_path):
        out = tmp_path / "v.csv"
        res = runner.invoke(main, ["validate", "--inject-alpha-bug", "-o", str(out)])
        assert "injected-bug detected" in res.output
        assert res.exit_code == 0
