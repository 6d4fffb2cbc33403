"""CLI stages, artifact formats and end-to-end determinism."""

import json
from pathlib import Path

import numpy as np
import pytest

from hbsparse import artifacts
from hbsparse.cli import main
from hbsparse.hypermodel import match_hyperparameters


def small_config(tmp_path: Path, **overrides) -> Path:
    cfg = {
        "problem": {
            "n": 32,
            "m": 6,
            "obs_stride": 6,
            "fine_n": 200,
            "sigma": 0.03,
            "signal_jumps": [[0.2, 1.5], [0.55, -2.0], [0.8, 1.0]],
            "rng_seed": 9,
        },
        "reference": {"beta1": 1.501, "vartheta1": 0.05},
        "runs": [
            {
                "id": "gamma",
                "r": 1.0,
                "kernel": "pcn",
                "h": 0.05,
                "total_steps": 2000,
                "thin": 20,
                "seed": 50,
            },
            {
                "id": "invgamma_radial",
                "r": -1.0,
                "kernel": "radial_pcn",
                "h": 0.01,
                "k": 0.1,
                "total_steps": 2000,
                "thin": 20,
                "seed": 51,
            },
        ],
        "lags": 30,
        "probe_indices": [7, 18],
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def tree_bytes(root: Path) -> dict:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestGenerate:
    def test_writes_manifest_and_matrices(self, tmp_path):
        cfg = small_config(tmp_path)
        out = tmp_path / "out"
        assert main(["generate", "--config", str(cfg), "--output", str(out)]) == 0
        assert (out / "problem" / "problem.json").exists()
        assert (out / "problem" / "a_hat.csv").exists()
        assert (out / "problem" / "b_hat.csv").exists()

    def test_idempotent_bytes(self, tmp_path):
        cfg = small_config(tmp_path)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        main(["generate", "--config", str(cfg), "--output", str(out1)])
        main(["generate", "--config", str(cfg), "--output", str(out2)])
        assert tree_bytes(out1) == tree_bytes(out2)

    def test_creates_missing_directories(self, tmp_path):
        cfg = small_config(tmp_path)
        out = tmp_path / "a" / "b" / "c"
        assert main(["generate", "--config", str(cfg), "--output", str(out)]) == 0
        assert (out / "problem" / "problem.json").exists()

    def test_invalid_fine_mesh_is_validation_error(self, tmp_path, capsys):
        cfg = small_config(
            tmp_path,
            problem={"n": 32, "m": 6, "fine_n": 16, "rng_seed": 9},
        )
        code = main(["generate", "--config", str(cfg), "--output", str(tmp_path / "o")])
        assert code == 2
        assert "fine_n" in capsys.readouterr().err

    def test_probe_index_out_of_range(self, tmp_path, capsys):
        cfg = small_config(tmp_path, probe_indices=[7, 99])
        code = main(["generate", "--config", str(cfg), "--output", str(tmp_path / "o")])
        assert code == 2
        assert "probe" in capsys.readouterr().err

    def test_duplicate_seeds_rejected(self, tmp_path, capsys):
        base = json.loads(small_config(tmp_path).read_text())
        for run in base["runs"]:
            run["seed"] = 7
        cfg = tmp_path / "dup.json"
        cfg.write_text(json.dumps(base))
        code = main(["generate", "--config", str(cfg), "--output", str(tmp_path / "o")])
        assert code == 2
        assert "seed" in capsys.readouterr().err

    def test_problem_round_trips_losslessly(self, tmp_path):
        cfg = small_config(tmp_path)
        out = tmp_path / "out"
        main(["generate", "--config", str(cfg), "--output", str(out)])
        _, prob, truth = artifacts.load_problem(out / "problem")
        before = (out / "problem" / "a_hat.csv").read_bytes()
        artifacts.write_csv(
            out / "problem" / "a_hat.csv",
            [f"col_{j + 1}" for j in range(prob.n)],
            prob.a_hat,
        )
        assert (out / "problem" / "a_hat.csv").read_bytes() == before


class TestMap:
    def test_unit_exponent_has_no_second_phase(self, tmp_path):
        cfg = small_config(tmp_path)
        out = tmp_path / "out"
        main(["generate", "--config", str(cfg), "--output", str(out)])
        assert main(["map", "--config", str(cfg), "--run", "gamma",
                     "--output", str(out)]) == 0
        payload = json.loads((out / "map" / "1" / "map.json").read_text())
        assert payload["phase2"] is None
        assert payload["phase1"]["converged"] is True

    def test_matched_hypermodel_recorded(self, tmp_path):
        cfg = small_config(tmp_path)
        out = tmp_path / "out"
        main(["generate", "--config", str(cfg), "--output", str(out)])
        main(["map", "--config", str(cfg), "--run", "invgamma_radial",
              "--output", str(out)])
        payload = json.loads((out / "map" / "-1" / "map.json").read_text())
        want = match_hyperparameters(-1.0, 1.501, 0.05)
        assert payload["phase2"]["hypermodel"]["beta"] == pytest.approx(want.beta)
        assert payload["phase2"]["hypermodel"]["vartheta"] == pytest.approx(
            float(want.vartheta)
        )

    def test_missing_problem_is_actionable(self, tmp_path, capsys):
        cfg = small_config(tmp_path)
        code = main(["map", "--config", str(cfg), "--output", str(tmp_path / "nope")])
        assert code == 2
        assert "generate" in capsys.readouterr().err

    def test_corrupted_manifest_names_field(self, tmp_path, capsys):
        cfg = small_config(tmp_path)
        out = tmp_path / "out"
        main(["generate", "--config", str(cfg), "--output", str(out)])
        manifest = json.loads((out / "problem" / "problem.json").read_text())
        del manifest["config"]["sigma"]
        (out / "problem" / "problem.json").write_text(json.dumps(manifest))
        code = main(["map", "--config", str(cfg), "--output", str(out)])
        assert code == 2
        assert "sigma" in capsys.readouterr().err

    def test_non_convergence_exit_code_and_artifact(self, tmp_path):
        cfg = small_config(tmp_path, ias_max_iter=1)
        out = tmp_path / "out"
        main(["generate", "--config", str(cfg), "--output", str(out)])
        code = main(["map", "--config", str(cfg), "--run", "gamma",
                     "--output", str(out)])
        assert code == 3
        payload = json.loads((out / "map" / "1" / "map.json").read_text())
        assert payload["converged"] is False
        assert (out / "map" / "1" / "map.csv").exists()


class TestSampleAndDiagnose:
    @pytest.fixture()
    def pipeline_dir(self, tmp_path):
        cfg = small_config(tmp_path)
        out = tmp_path / "out"
        assert main(["all", "--config", str(cfg), "--output", str(out)]) == 0
        return cfg, out

    def test_sample_without_map_is_actionable(self, tmp_path, capsys):
        cfg = small_config(tmp_path)
        out = tmp_path / "out"
        main(["generate", "--config", str(cfg), "--output", str(out)])
        code = main(["sample", "--config", str(cfg), "--run", "gamma",
                     "--output", str(out)])
        assert code == 2
        assert "map" in capsys.readouterr().err

    def test_sample_rerun_byte_identical(self, pipeline_dir):
        cfg, out = pipeline_dir
        draws = out / "chains" / "gamma" / "draws.csv"
        before = draws.read_bytes()
        assert main(["sample", "--config", str(cfg), "--run", "gamma",
                     "--output", str(out)]) == 0
        assert draws.read_bytes() == before

    def test_chain_files_exist(self, pipeline_dir):
        _, out = pipeline_dir
        for run_id in ("gamma", "invgamma_radial"):
            for name in ("draws.csv", "physical.csv", "meta.json"):
                assert (out / "chains" / run_id / name).exists()
            meta = json.loads((out / "chains" / run_id / "meta.json").read_text())
            assert 0.0 <= meta["acceptance_rate"] <= 1.0
            assert meta["init_provenance"]

    def test_report_contents(self, pipeline_dir):
        _, out = pipeline_dir
        report = json.loads(
            (out / "reports" / "gamma" / "report.json").read_text()
        )
        assert report["delta"] == pytest.approx(0.136308, abs=1e-6)
        assert report["probe_indices"] == [7, 18]
        assert len(report["compress_counts"]) == 100
        header, env = artifacts.read_csv(out / "reports" / "gamma" / "envelopes.csv")
        assert header[0] == "index" and env.shape[0] == 32
        lo, mean, hi = env[:, 1], env[:, 2], env[:, 3]
        assert np.all(lo <= mean) and np.all(mean <= hi)

    def test_figures_rendered(self, pipeline_dir):
        _, out = pipeline_dir
        for name in (
            "fig_envelopes.png",
            "fig_scatter_pairs.png",
            "fig_autocorr.png",
            "fig_compressibility.png",
        ):
            path = out / "reports" / "gamma" / name
            assert path.exists() and path.stat().st_size > 0

    def test_diagnose_without_chain_is_actionable(self, tmp_path, capsys):
        cfg = small_config(tmp_path)
        out = tmp_path / "out"
        main(["generate", "--config", str(cfg), "--output", str(out)])
        main(["map", "--config", str(cfg), "--output", str(out)])
        code = main(["diagnose", "--config", str(cfg), "--run", "gamma",
                     "--output", str(out)])
        assert code == 2
        assert "sample" in capsys.readouterr().err

    def test_unknown_run_id(self, pipeline_dir, capsys):
        cfg, out = pipeline_dir
        code = main(["sample", "--config", str(cfg), "--run", "nope",
                     "--output", str(out)])
        assert code == 2
        assert "unknown run" in capsys.readouterr().err

    def test_excess_lags_truncated_with_warning(self, tmp_path):
        cfg = small_config(tmp_path, lags=500)  # only 100 draws stored
        out = tmp_path / "out"
        with pytest.warns(UserWarning, match="truncating"):
            assert main(["all", "--config", str(cfg), "--output", str(out)]) == 0
        report = json.loads((out / "reports" / "gamma" / "report.json").read_text())
        assert report["lags"] == 99


class TestSeedOverride:
    def test_override_changes_data_deterministically(self, tmp_path):
        cfg = small_config(tmp_path)
        outs = []
        for tag, seed in (("s1", 123), ("s2", 123), ("s3", 124)):
            out = tmp_path / tag
            assert main(["generate", "--config", str(cfg), "--output", str(out),
                         "--seed-override", str(seed)]) == 0
            outs.append((out / "problem" / "b_hat.csv").read_bytes())
        assert outs[0] == outs[1]
        assert outs[0] != outs[2]
