import hashlib
import json

import numpy as np
import pytest
from click.testing import CliRunner

import noisevolve as nv
from noisevolve.cli import main
from noisevolve.detect import DetectionTrial, write_detection_log
from noisevolve.observer import superstitious_sim


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory, small_model, small_target):
    """Corpus dir, fitted model file and a target PNG shared by CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    corpus_dir = root / "corpus"
    c = nv.synthesize_test_corpus(60, side=32, seed=11)
    nv.corpus.export_corpus(c, corpus_dir)
    model_path = root / "model.bin"
    small_model.save(model_path)
    target_path = root / "target.png"
    nv.save_image_png(target_path, small_target)
    return {"root": root, "corpus": corpus_dir, "model": model_path, "target": target_path}


def _run(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


def test_make_test_corpus_writes_pngs_and_manifest(runner, tmp_path):
    out = tmp_path / "corpus"
    _run(runner, ["make-test-corpus", "--out", str(out), "--n", "8", "--side", "32", "--seed", "3"])
    assert len(list(out.glob("*.png"))) == 8
    assert (out / "labels.json").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "make-test-corpus"
    assert manifest["params"]["n"] == 8


def test_fit_model_and_info(runner, tmp_path, workspace):
    out = tmp_path / "model.bin"
    _run(runner, ["fit-model", "--corpus", str(workspace["corpus"]), "--out", str(out),
                  "--components", "20", "--side", "32"])
    result = _run(runner, ["model-info", "--model", str(out)])
    info = json.loads(result.output)
    assert info["n_components"] == 20
    assert info["n_wavelets"] == 1328


def test_gen_noise_outputs(runner, tmp_path, workspace):
    out = tmp_path / "noise"
    _run(runner, ["gen-noise", "--model", str(workspace["model"]), "--out", str(out),
                  "--n", "4", "--seed", "1"])
    assert len(list(out.glob("noise-*.png"))) == 4


def test_chance_command_is_deterministic(runner, tmp_path, workspace):
    out_a = tmp_path / "a.bin"
    out_b = tmp_path / "b.bin"
    args = ["chance", "--model", str(workspace["model"]), "--target", str(workspace["target"]),
            "--n", "300", "--seed", "9"]
    _run(runner, args + ["--out", str(out_a)])
    _run(runner, args + ["--out", str(out_b)])
    assert hashlib.sha256(out_a.read_bytes()).hexdigest() == hashlib.sha256(out_b.read_bytes()).hexdigest()


def test_ideal_run_writes_curves_and_reconstruction(runner, tmp_path, workspace):
    out = tmp_path / "run"
    result = _run(runner, [
        "ideal-run", "--model", str(workspace["model"]), "--target", str(workspace["target"]),
        "--out-dir", str(out), "--stop-percentile", "95", "--max-generations", "6",
        "--seed", "2", "--config", str(_mini_config(tmp_path)),
    ])
    assert (out / "curves.tsv").exists()
    assert (out / "reconstruction.png").exists()
    summary = json.loads((out / "result.json").read_text())
    assert "stopped_at_generation" in summary
    manifest = json.loads((out / "manifest.json").read_text())
    assert str(workspace["model"]) in manifest["inputs"]


def _mini_config(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("ga:\n  population: 16\n  views: 2\n  chance_n: 200\n")
    return path


def test_superstitious_cli_matches_direct_call(runner, tmp_path, workspace, small_model, small_target):
    out = tmp_path / "sup"
    result = _run(runner, [
        "superstitious", "--model", str(workspace["model"]), "--target", str(workspace["target"]),
        "--trials", "500", "--criterion", "90", "--seed", "6", "--out-dir", str(out),
    ])
    summary = json.loads((out / "result.json").read_text())
    # direct call with the same seed follows the same stream layout
    rng = np.random.default_rng(6)
    direct = superstitious_sim(small_model, nv.load_image(workspace["target"], side=32),
                               500, 90.0, rng)
    assert summary["accepted"] == direct.accepted
    assert summary["correlation"] == pytest.approx(direct.correlation)


def test_whitenoise_baseline_cli(runner, tmp_path, workspace):
    out = tmp_path / "wn"
    _run(runner, ["whitenoise-baseline", "--target", str(workspace["target"]), "--side", "32",
                  "--budget", "3", "--seed", "4", "--out-dir", str(out),
                  "--config", str(_mini_config(tmp_path))])
    summary = json.loads((out / "result.json").read_text())
    assert summary["budget"] == 3


def test_analyze_retrieval_and_gallery(runner, tmp_path, workspace):
    out = tmp_path / "retrieval"
    _run(runner, [
        "analyze-retrieval", "--query", str(workspace["target"]), "--db", str(workspace["corpus"]),
        "--k", "5", "--side", "32", "--out-dir", str(out),
        "--category", "edges", "--bootstrap", "500",
    ])
    table = (out / "retrieval.tsv").read_text().strip().splitlines()
    assert len(table) == 6  # header + 5 hits
    assert (out / "gallery.png").exists()
    summary = json.loads((out / "result.json").read_text())
    assert "category" in summary


def test_analyze_classifier_cli(runner, tmp_path, workspace, small_corpus):
    targets = []
    for i in range(3):
        p = tmp_path / f"t{i}.png"
        nv.save_image_png(p, small_corpus.images[i])
        targets.append(str(p))
    out = tmp_path / "classifier.json"
    _run(runner, [
        "analyze-classifier",
        "--recon", targets[0], "--recon", targets[1], "--recon", targets[2],
        "--target", targets[0], "--target", targets[1], "--target", targets[2],
        "--truth", "0,1,2", "--side", "32", "--out", str(out),
    ])
    summary = json.loads(out.read_text())
    assert summary["accuracy"] == 1.0


def test_analyze_detection_cli(runner, tmp_path):
    log = tmp_path / "detect.jsonl"
    trials = []
    for i in range(20):
        intact = i % 2 == 0
        trials.append(DetectionTrial(
            image_id=f"i{i}", is_intact=intact, similarity_group="most" if i < 10 else "least",
            duration_ms=40.0, response="intact" if intact else "scrambled", rt_ms=500.0 - i,
        ))
    write_detection_log(log, trials)
    out = tmp_path / "summary.json"
    result = _run(runner, ["analyze-detection", "--log", str(log), "--out", str(out)])
    summary = json.loads(out.read_text())
    assert summary["n_trials"] == 20
    assert "dprime_most" in summary


def test_export_gallery_cli(runner, tmp_path, workspace):
    out = tmp_path / "strip.png"
    _run(runner, ["export-gallery", "--query", str(workspace["target"]),
                  "--db", str(workspace["corpus"]), "--k", "3", "--side", "32",
                  "--out", str(out)])
    assert out.exists()


def test_error_reports_machine_readable_category(runner, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    result = runner.invoke(
        main, ["fit-model", "--corpus", str(empty), "--out", str(tmp_path / "m.bin")],
        catch_exceptions=False,
    )
    assert result.exit_code == 3
    error = json.loads(result.stderr.strip().splitlines()[-1])
    assert error["error"]["category"] == "no_images"
