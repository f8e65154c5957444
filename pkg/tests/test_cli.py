"""End-to-end CLI tests on a small synthetic dataset."""

import hashlib
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from munifolio.cli import main

CONFIG_TEXT = """\
[model]
d_model = 16
n_heads = 2
n_layers = 2
d_hidden = 16
dropout = 0.0
epochs = 5
batch_size = 32

[windows]
n_neighbours = 2
neighbour_features = yearly_return
features = yearly_return, net_migration_ratio, taxable_income_growth, new_dwellings_ratio, taxpayers_growth

[split]
test_start = 2021
test_end = 2022
"""


def sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_ok(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth -> index -> factor -> eval-linear -> backtest -> train -> evaluate -> report-deciles."""
    root = tmp_path_factory.mktemp("pipeline")
    runner = CliRunner()
    data = root / "data"
    run_ok(
        runner,
        [
            "synth",
            "--seed", "7",
            "--areas", "8",
            "--year-start", "2006",
            "--year-end", "2026",
            "--tx", "30",
            "--sigma", "0.05",
            "--out", str(data),
        ],
    )

    index_dir = root / "index"
    run_ok(runner, ["index", "--transactions", str(data / "transactions.csv"), "--out", str(index_dir)])

    factor_dir = root / "factor"
    run_ok(runner, ["factor", "--factor", "migration", "--data", str(data), "--out", str(factor_dir)])

    eval_dir = root / "eval"
    run_ok(
        runner,
        [
            "eval-linear",
            "--factor", "migration",
            "--data", str(data),
            "--index", str(index_dir / "index.csv"),
            "--horizon", "4",
            "--out", str(eval_dir),
        ],
    )

    backtest_dir = root / "backtest"
    run_ok(
        runner,
        [
            "backtest",
            "--signal", str(factor_dir / "signal_migration.csv"),
            "--index", str(index_dir / "index.csv"),
            "--population", str(data / "population.csv"),
            "--horizon", "2",
            "--universe-size", "8",
            "--baseline-n", "30",
            "--seed", "11",
            "--out", str(backtest_dir),
        ],
    )

    config_path = root / "config.ini"
    config_path.write_text(CONFIG_TEXT, encoding="utf-8")
    train_dir = root / "train"
    run_ok(
        runner,
        [
            "train",
            "--data", str(data),
            "--index", str(index_dir / "index.csv"),
            "--config", str(config_path),
            "--seed", "3",
            "--out", str(train_dir),
        ],
    )

    evaluate_dir = root / "evaluate"
    run_ok(
        runner,
        [
            "evaluate",
            "--model", str(train_dir / "model.bin"),
            "--data", str(data),
            "--index", str(index_dir / "index.csv"),
            "--out", str(evaluate_dir),
        ],
    )

    deciles_dir = root / "deciles"
    run_ok(
        runner,
        [
            "report-deciles",
            "--model", str(train_dir / "model.bin"),
            "--data", str(data),
            "--index", str(index_dir / "index.csv"),
            "--n-samples", "5",
            "--seed", "9",
            "--out", str(deciles_dir),
        ],
    )

    return {
        "root": root,
        "data": data,
        "index": index_dir,
        "factor": factor_dir,
        "eval": eval_dir,
        "backtest": backtest_dir,
        "train": train_dir,
        "evaluate": evaluate_dir,
        "deciles": deciles_dir,
    }


class TestPipelineArtifacts:
    def test_synth_outputs(self, pipeline):
        data = pipeline["data"]
        for name in (
            "transactions.csv",
            "population.csv",
            "in_migration.csv",
            "out_migration.csv",
            "taxable_income.csv",
            "taxpayers.csv",
            "dwelling_stock.csv",
            "new_starts.csv",
            "centroids.csv",
            "true_index.csv",
            "manifest.json",
        ):
            assert (data / name).exists(), name

    def test_index_outputs(self, pipeline):
        index_dir = pipeline["index"]
        assert (index_dir / "index.csv").exists()
        assert (index_dir / "index.png").exists()
        diagnostics = list((index_dir / "diagnostics").glob("*.json"))
        assert len(diagnostics) == 8
        payload = json.loads(diagnostics[0].read_text())
        assert {"n_transactions", "k_components", "r_squared", "f_statistic"} <= set(payload)

    def test_factor_outputs(self, pipeline):
        factor_dir = pipeline["factor"]
        assert (factor_dir / "factor_migration.csv").exists()
        assert (factor_dir / "signal_migration.csv").exists()

    def test_eval_linear_outputs(self, pipeline):
        eval_dir = pipeline["eval"]
        report = json.loads((eval_dir / "eval_linear.json").read_text())
        assert report["horizon"] == 4
        assert 0.0 <= report["r_squared"] <= 1.0
        scatter = (eval_dir / "scatter.csv").read_text().splitlines()
        assert scatter[0] == "x,y,area_code,year"
        assert len(scatter) == report["n_obs"] + 1
        assert (eval_dir / "scatter.png").exists()

    def test_backtest_outputs(self, pipeline):
        backtest_dir = pipeline["backtest"]
        payload = json.loads((backtest_dir / "backtest.json").read_text())
        assert payload["nav"][0] == 1.0
        assert "baseline" in payload and "strategy_cagr_percentile_rank" in payload["baseline"]
        nav_rows = (backtest_dir / "nav.csv").read_text().splitlines()
        assert nav_rows[0] == "year,nav"
        bands = (backtest_dir / "baseline_bands.csv").read_text().splitlines()
        assert bands[0] == "year,p5,p25,p50,p75,p95"
        assert (backtest_dir / "backtest.png").exists()

    def test_train_and_evaluate_outputs(self, pipeline):
        train_dir = pipeline["train"]
        assert (train_dir / "model.bin").exists()
        assert (train_dir / "loss.png").exists()
        history = (train_dir / "training_history.csv").read_text().splitlines()
        assert history[0].startswith("epoch,train_loss")
        assert len(history) == 5 + 1
        evaluation = json.loads((pipeline["evaluate"] / "evaluation.json").read_text())
        assert "r_squared" in evaluation and evaluation["n_test"] > 0

    def test_decile_outputs(self, pipeline):
        deciles_dir = pipeline["deciles"]
        csvs = sorted(p.name for p in deciles_dir.glob("decile_*.csv"))
        assert "decile_yearly_return.csv" in csvs
        assert "decile_net_migration_ratio.csv" in csvs
        assert len(list(deciles_dir.glob("decile_*.png"))) == len(csvs)

    def test_manifests_chain_digests(self, pipeline):
        tx_digest = sha(pipeline["data"] / "transactions.csv")
        index_manifest = json.loads((pipeline["index"] / "manifest.json").read_text())
        assert tx_digest in index_manifest["inputs"].values()

        signal_digest = sha(pipeline["factor"] / "signal_migration.csv")
        index_digest = sha(pipeline["index"] / "index.csv")
        backtest_manifest = json.loads((pipeline["backtest"] / "manifest.json").read_text())
        assert signal_digest in backtest_manifest["inputs"].values()
        assert index_digest in backtest_manifest["inputs"].values()

        model_digest = sha(pipeline["train"] / "model.bin")
        evaluate_manifest = json.loads((pipeline["evaluate"] / "manifest.json").read_text())
        assert model_digest in evaluate_manifest["inputs"].values()

    def test_manifest_fields(self, pipeline):
        manifest = json.loads((pipeline["backtest"] / "manifest.json").read_text())
        assert manifest["subcommand"] == "backtest"
        assert manifest["seed"] == 11
        assert manifest["version"]
        assert manifest["runtime_seconds"] > 0
        assert manifest["inputs"]

    def test_inputs_never_mutated(self, pipeline):
        # every consumed input still matches the digest its manifest recorded
        for stage in ("index", "factor", "eval", "backtest", "train", "evaluate", "deciles"):
            manifest = json.loads((pipeline[stage] / "manifest.json").read_text())
            for path_str, digest in manifest["inputs"].items():
                assert sha(Path(path_str)) == digest, f"{stage} mutated {path_str}"

    def test_parallel_index_build_matches_serial(self, pipeline, tmp_path):
        runner = CliRunner()
        out = tmp_path / "index_jobs2"
        run_ok(
            runner,
            [
                "index",
                "--transactions", str(pipeline["data"] / "transactions.csv"),
                "--jobs", "2",
                "--out", str(out),
            ],
        )
        assert sha(out / "index.csv") == sha(pipeline["index"] / "index.csv")


class TestDeterminism:
    def test_synth_twice_identical_digests(self, tmp_path):
        runner = CliRunner()
        args = ["synth", "--seed", "7", "--areas", "3", "--year-start", "2006", "--year-end", "2010", "--tx", "10", "--sigma", "0.1"]
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        run_ok(runner, args + ["--out", str(out_a)])
        run_ok(runner, args + ["--out", str(out_b)])
        for path_a in sorted(out_a.iterdir()):
            if path_a.name == "manifest.json":  # records wall-clock runtime
                continue
            assert sha(path_a) == sha(out_b / path_a.name), path_a.name


class TestExitCodes:
    def test_backtest_missing_signal_is_usage_error(self):
        runner = CliRunner()
        result = runner.invoke(main, ["backtest", "--horizon", "2"])
        assert result.exit_code == 2

    def test_unknown_flag_is_usage_error(self):
        runner = CliRunner()
        result = runner.invoke(main, ["synth", "--does-not-exist", "1"])
        assert result.exit_code == 2

    def test_stochastic_subcommands_require_seed(self):
        runner = CliRunner()
        result = runner.invoke(main, ["synth", "--out", "/tmp/nope"])
        assert result.exit_code == 2

    def test_data_error_is_structured_exit_one(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("wrong,header\n1,2\n", encoding="utf-8")
        runner = CliRunner()
        result = runner.invoke(
            main, ["ingest", "--transactions", str(bad), "--out", str(tmp_path / "out")]
        )
        assert result.exit_code == 1
        payload = json.loads(result.output.strip().splitlines()[-1])
        assert payload["error"] == "SchemaError"

    def test_ingest_reports_rejects(self, tmp_path):
        runner = CliRunner()
        good = "area_code,year,trade_price,unit_area,floor_area_ratio,station_distance,building_age,use,features\n"
        rows = ["13101,2010,1000000,50,0.1,0.2,0.3,Residential,Registered"] * 5
        rows.append("13101,2010,,50,0.1,0.2,0.3,Residential,Registered")
        tx = tmp_path / "tx.csv"
        tx.write_text(good + "\n".join(rows) + "\n", encoding="utf-8")
        out = tmp_path / "out"
        run_ok(runner, ["ingest", "--transactions", str(tx), "--out", str(out)])
        payload = json.loads((out / "ingest.json").read_text())
        assert payload["accepted"] == 5
        assert payload["rejected"] == 1
        assert payload["reject_reasons"] == {"missing price": 1}

    def test_ingest_with_custom_column_map(self, tmp_path):
        runner = CliRunner()
        tx = tmp_path / "tx.csv"
        tx.write_text(
            "Municipality Code,Transaction Year,Price,Area,Type\n"
            "13101,2012,9000000,45,Pre-owned Condominiums\n",
            encoding="utf-8",
        )
        schema = tmp_path / "schema.json"
        schema.write_text(
            json.dumps(
                {
                    "area_code": "Municipality Code",
                    "year": "Transaction Year",
                    "trade_price": "Price",
                    "unit_area": "Area",
                    "attributes": {"Type": "categorical"},
                }
            ),
            encoding="utf-8",
        )
        out = tmp_path / "out"
        run_ok(runner, ["ingest", "--transactions", str(tx), "--schema", str(schema), "--out", str(out)])
        payload = json.loads((out / "ingest.json").read_text())
        assert payload["accepted"] == 1
        clean = (out / "transactions_clean.csv").read_text().splitlines()
        assert clean[0] == "Municipality Code,Transaction Year,Price,Area,Type"
