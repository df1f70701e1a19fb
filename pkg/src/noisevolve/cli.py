"""Command-line driver for batch and headless use.

Every command accepts --seed and --config (YAML; flags override file
values) and writes a manifest (parameters, seed, input hashes, package
version) next to its outputs so any result can be reproduced from the
manifest alone. Domain errors exit nonzero with a machine-readable category
on stderr.
"""

from __future__ import annotations

import hashlib
import json
import sys
import time
from pathlib import Path

import click
import yaml

from . import __version__
from .analysis import (
    bootstrap_category_chance,
    correlation_classifier,
    export_gallery,
    nearest_neighbors,
    retrieval_chance_max,
)
from .corpus import export_corpus, load_corpus, load_image, save_image_png, synthesize_test_corpus
from .detect import analyze_detection_log, read_detection_log
from .errors import NoisevolveError
from .evolve import GAConfig
from .featurespace import NaturalNoiseModel
from .noise import sample_noise, sample_rejecting
from .observer import (
    ChanceDistribution,
    StopRule,
    build_chance,
    run_ideal,
    run_whitenoise_baseline,
    superstitious_sim,
)
from .validation import as_rng

_EXIT_CODES = {"invalid_input": 2, "invalid_spec": 2, "no_images": 3, "not_found": 3}


def _fail(exc: NoisevolveError) -> None:
    sys.stderr.write(json.dumps({"error": {"category": exc.category, "message": str(exc)}}) + "\n")
    sys.exit(_EXIT_CODES.get(exc.category, 4))


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, params: dict, inputs: dict, outputs: list[str]) -> None:
    manifest = {
        "command": command,
        "params": params,
        "inputs": {str(p): _sha256(Path(p)) for p in inputs.values() if p and Path(p).exists()},
        "outputs": outputs,
        "version": __version__,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))


def _load_config(path) -> dict:
    if path is None:
        return {}
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise click.UsageError("--config must contain a mapping")
    return data


def _ga_config(cfg: dict, **overrides) -> GAConfig:
    base = GAConfig().to_dict()
    base.update({k: v for k, v in cfg.get("ga", {}).items()})
    base.update({k: v for k, v in overrides.items() if v is not None})
    return GAConfig.from_dict(base)


def _common(fn):
    fn = click.option("--seed", type=int, default=0, show_default=True, help="RNG seed")(fn)
    fn = click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                      help="YAML config file; flags override its values")(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main():
    """Natural-noise image evolution and evaluation toolkit."""


@main.command("make-test-corpus")
@_common
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--n", type=int, default=300, show_default=True)
@click.option("--side", type=int, default=64, show_default=True)
def make_test_corpus(seed, config_path, out_dir, n, side):
    """Generate the synthetic desk-scale corpus as PNGs plus labels.json."""
    cfg = _load_config(config_path)
    n = cfg.get("n", n)
    side = cfg.get("side", side)
    try:
        corpus = synthesize_test_corpus(n, side=side, seed=seed)
        out = Path(out_dir)
        export_corpus(corpus, out)
    except NoisevolveError as exc:
        _fail(exc)
    _write_manifest(out, "make-test-corpus", {"n": n, "side": side, "seed": seed}, {}, ["*.png", "labels.json"])
    click.echo(f"wrote {n} images to {out}")


@main.command("fit-model")
@_common
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--components", type=int, default=150, show_default=True)
@click.option("--side", type=int, default=64, show_default=True)
@click.option("--ridge-penalty", type=float, default=None)
def fit_model_cmd(seed, config_path, corpus_dir, out_path, components, side, ridge_penalty):
    """Fit the Gabor + PCA noise model on an image directory."""
    cfg = _load_config(config_path)
    components = cfg.get("components", components)
    side = cfg.get("side", side)
    try:
        corpus = load_corpus(corpus_dir, side=side)
        model = NaturalNoiseModel(
            n_components=components,
            ridge_penalty=cfg.get("ridge_penalty", ridge_penalty),
            **{k: tuple(v) for k, v in cfg.items() if k in ("scales", "orientations_deg", "phases_deg")},
        ).fit(corpus)
        model.save(out_path)
    except NoisevolveError as exc:
        _fail(exc)
    out = Path(out_path)
    _write_manifest(out.parent, "fit-model",
                    {"components": components, "side": side, "corpus": str(corpus_dir)},
                    {"corpus": None}, [out.name])
    click.echo(f"model {model.model_id_} ({len(corpus)} images, K={model.n_components_}) -> {out}")


@main.command("model-info")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
def model_info(model_path):
    """Print a fitted model's key facts as JSON."""
    model = NaturalNoiseModel.load(model_path)
    info = {
        "model_id": model.model_id_,
        "side": model.side_,
        "n_wavelets": model.n_wavelets_,
        "n_components": model.n_components_,
        "ridge_penalty": model.ridge_penalty_,
        "explained_variance_top5": [float(v) for v in model.explained_variance_[:5]],
        "score_std_top5": [float(v) for v in model.score_std_[:5]],
    }
    click.echo(json.dumps(info, indent=2))


@main.command("gen-noise")
@_common
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--n", type=int, default=16, show_default=True)
@click.option("--reject-target", type=click.Path(exists=True), default=None,
              help="Apply initial-population rejection against this target image")
@click.option("--percentile", type=float, default=80.0, show_default=True)
@click.option("--chance-n", type=int, default=2000, show_default=True)
def gen_noise(seed, config_path, model_path, out_dir, n, reject_target, percentile, chance_n):
    """Render noise samples to PNG for inspection."""
    _load_config(config_path)
    try:
        model = NaturalNoiseModel.load(model_path)
        rng = as_rng(seed)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        names = []
        if reject_target:
            target = load_image(reject_target, side=model.side_)
            chance = build_chance(model, target, chance_n, rng.spawn(1)[0])
            draw = lambda: sample_rejecting(model, rng, target, chance, percentile)
        else:
            draw = lambda: sample_noise(model, rng)
        for i in range(n):
            ind = draw()
            name = f"noise-{i:04d}.png"
            save_image_png(out / name, ind.image)
            names.append(name)
    except NoisevolveError as exc:
        _fail(exc)
    _write_manifest(out, "gen-noise",
                    {"n": n, "seed": seed, "reject_target": reject_target, "percentile": percentile},
                    {"model": model_path, "target": reject_target}, names)
    click.echo(f"wrote {n} noise images to {out}")


@main.command("chance")
@_common
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--target", "target_path", type=click.Path(exists=True), required=True)
@click.option("--n", type=int, default=2000, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--jobs", type=int, default=1, show_default=True)
def chance_cmd(seed, config_path, model_path, target_path, n, out_path, jobs):
    """Build the empirical chance distribution for one target."""
    cfg = _load_config(config_path)
    n = cfg.get("chance_n", n)
    try:
        model = NaturalNoiseModel.load(model_path)
        target = load_image(target_path, side=model.side_)
        chance = build_chance(model, target, n, as_rng(seed), jobs=jobs)
        chance.save(out_path)
    except NoisevolveError as exc:
        _fail(exc)
    out = Path(out_path)
    _write_manifest(out.parent, "chance", {"n": n, "seed": seed, "jobs": jobs},
                    {"model": model_path, "target": target_path}, [out.name])
    click.echo(json.dumps({
        "n": chance.n,
        "p50": chance.quantile(50), "p80": chance.quantile(80),
        "p95": chance.quantile(95), "p99": chance.quantile(99),
    }, indent=2))


@main.command("ideal-run")
@_common
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--target", "target_path", type=click.Path(exists=True), required=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--stop-percentile", type=float, default=None)
@click.option("--stop-correlation", type=float, default=None)
@click.option("--max-generations", type=int, default=50, show_default=True)
@click.option("--chance-file", type=click.Path(exists=True), default=None)
@click.option("--checkpoints/--no-checkpoints", default=False)
def ideal_run(seed, config_path, model_path, target_path, out_dir, stop_percentile,
              stop_correlation, max_generations, chance_file, checkpoints):
    """Run the GA with the simulated ideal observer as the ranker."""
    cfg = _load_config(config_path)
    try:
        model = NaturalNoiseModel.load(model_path)
        target = load_image(target_path, side=model.side_)
        config = _ga_config(cfg)
        chance = ChanceDistribution.load(chance_file) if chance_file else None
        stop = StopRule(percentile=stop_percentile, correlation=stop_correlation,
                        max_generations=max_generations)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result = run_ideal(model, target, config, stop, as_rng(seed), chance=chance,
                           checkpoint_dir=out if checkpoints else None)
        result.write_curves(out / "curves.tsv")
        save_image_png(out / "reconstruction.png", result.best.image)
        summary = {
            "converged": result.converged,
            "stopped_at_generation": result.stopped_at_generation,
            "generations_to_percentile": {str(k): v for k, v in result.generations_to_percentile.items()},
            "final_max_correlation": result.max_history[-1],
            "truncation_ceiling": result.truncation_ceiling,
        }
        (out / "result.json").write_text(json.dumps(summary, indent=2))
    except NoisevolveError as exc:
        _fail(exc)
    _write_manifest(out, "ideal-run",
                    {"seed": seed, "stop_percentile": stop_percentile,
                     "stop_correlation": stop_correlation, "max_generations": max_generations,
                     "ga": config.to_dict()},
                    {"model": model_path, "target": target_path, "chance": chance_file},
                    ["curves.tsv", "reconstruction.png", "result.json"])
    click.echo(json.dumps(summary, indent=2))


@main.command("superstitious")
@_common
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--target", "target_path", type=click.Path(exists=True), required=True)
@click.option("--trials", type=int, default=5000, show_default=True)
@click.option("--criterion", type=float, default=90.0, show_default=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--chance-file", type=click.Path(exists=True), default=None)
def superstitious_cmd(seed, config_path, model_path, target_path, trials, criterion, out_dir, chance_file):
    """Single-image acceptance baseline producing a classification image."""
    _load_config(config_path)
    try:
        model = NaturalNoiseModel.load(model_path)
        target = load_image(target_path, side=model.side_)
        chance = ChanceDistribution.load(chance_file) if chance_file else None
        result = superstitious_sim(model, target, trials, criterion, as_rng(seed), chance=chance)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        ci = result.classification_image
        lo, hi = ci.min(), ci.max()
        save_image_png(out / "classification-image.png", (ci - lo) / (hi - lo) if hi > lo else ci)
        summary = {
            "accepted": result.accepted,
            "trials": result.trials,
            "correlation": result.correlation,
            "criterion_percentile": result.criterion_percentile,
        }
        (out / "result.json").write_text(json.dumps(summary, indent=2))
    except NoisevolveError as exc:
        _fail(exc)
    _write_manifest(out, "superstitious",
                    {"seed": seed, "trials": trials, "criterion": criterion},
                    {"model": model_path, "target": target_path, "chance": chance_file},
                    ["classification-image.png", "result.json"])
    click.echo(json.dumps(summary, indent=2))


@main.command("whitenoise-baseline")
@_common
@click.option("--target", "target_path", type=click.Path(exists=True), required=True)
@click.option("--side", type=int, default=64, show_default=True)
@click.option("--budget", type=int, default=50, show_default=True)
@click.option("--out-dir", type=click.Path(), required=True)
def whitenoise_cmd(seed, config_path, target_path, side, budget, out_dir):
    """Ideal-observer GA over pixel white noise (efficiency baseline)."""
    cfg = _load_config(config_path)
    try:
        target = load_image(target_path, side=side)
        config = _ga_config(cfg)
        result = run_whitenoise_baseline(side, target, config, budget, as_rng(seed))
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.write_curves(out / "curves.tsv")
        save_image_png(out / "best.png", result.best.image)
        summary = {"budget": budget, "final_max_correlation": result.max_history[-1]}
        (out / "result.json").write_text(json.dumps(summary, indent=2))
    except NoisevolveError as exc:
        _fail(exc)
    _write_manifest(out, "whitenoise-baseline", {"seed": seed, "side": side, "budget": budget},
                    {"target": target_path}, ["curves.tsv", "best.png", "result.json"])
    click.echo(json.dumps(summary, indent=2))


@main.command("analyze-retrieval")
@_common
@click.option("--query", "query_path", type=click.Path(exists=True), required=True)
@click.option("--db", "db_dir", type=click.Path(exists=True), required=True)
@click.option("--k", type=int, default=20, show_default=True)
@click.option("--side", type=int, default=64, show_default=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--category", default=None, help="Also bootstrap chance for this label")
@click.option("--bootstrap", type=int, default=10000, show_default=True)
@click.option("--model", "model_path", type=click.Path(exists=True), default=None,
              help="Also compute the max-correlation noise chance with this model")
@click.option("--chance-m", type=int, default=1000, show_default=True)
def analyze_retrieval(seed, config_path, query_path, db_dir, k, side, out_dir, category,
                      bootstrap, model_path, chance_m):
    """Nearest-neighbor retrieval of a reconstruction against a database."""
    _load_config(config_path)
    try:
        db = load_corpus(db_dir, side=side)
        query = load_image(query_path, side=side)
        result = nearest_neighbors(query, db, k=k, query_id=Path(query_path).name)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["rank\tsource_id\tcorrelation\tlabel"]
        for rank, (sid, corr, label) in enumerate(result.entries, start=1):
            lines.append(f"{rank}\t{sid}\t{corr:.6f}\t{label}")
        (out / "retrieval.tsv").write_text("\n".join(lines) + "\n")
        export_gallery(out / "gallery.png", query, result, db)
        summary = {"query": result.query_id, "k": result.k,
                   "top_correlation": result.entries[0][1] if result.entries else None}
        if category is not None:
            boot = bootstrap_category_chance(db, k, bootstrap, category, as_rng(seed))
            observed = result.category_fraction(category)
            summary["category"] = {
                "label": category, "observed_fraction": observed,
                "chance_mean": boot.mean, "percentile_of_observed": boot.percentile_of(observed),
            }
        if model_path is not None:
            model = NaturalNoiseModel.load(model_path)
            maxima = retrieval_chance_max(model, db, chance_m, as_rng(seed))
            summary["max_correlation_chance"] = {
                "m": chance_m, "p99": maxima.quantile(99),
                "percentile_of_top": maxima.percentile_of(result.entries[0][1]),
            }
        (out / "result.json").write_text(json.dumps(summary, indent=2))
    except NoisevolveError as exc:
        _fail(exc)
    _write_manifest(out, "analyze-retrieval", {"k": k, "seed": seed, "category": category},
                    {"query": query_path, "db": None, "model": model_path},
                    ["retrieval.tsv", "gallery.png", "result.json"])
    click.echo(json.dumps(summary, indent=2))


@main.command("analyze-classifier")
@_common
@click.option("--recon", "recon_paths", type=click.Path(exists=True), multiple=True, required=True)
@click.option("--target", "target_paths", type=click.Path(exists=True), multiple=True, required=True)
@click.option("--truth", default=None,
              help="Comma-separated target index per reconstruction (default: i mod n_targets)")
@click.option("--side", type=int, default=64, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def analyze_classifier(seed, config_path, recon_paths, target_paths, truth, side, out_path):
    """Correlation classifier: which target was each reconstruction aiming at?"""
    _load_config(config_path)
    try:
        recons = [load_image(p, side=side) for p in recon_paths]
        targets = [load_image(p, side=side) for p in target_paths]
        if truth is not None:
            labels = [int(x) for x in truth.split(",")]
        else:
            labels = [i % len(targets) for i in range(len(recons))]
        result = correlation_classifier(recons, targets, labels)
        summary = {
            "accuracy": result.accuracy,
            "p_value": result.p_value,
            "chance": 1.0 / result.n_targets,
            "assignments": result.assignments,
            "true_labels": result.true_labels,
            "excluded": result.excluded,
        }
        Path(out_path).write_text(json.dumps(summary, indent=2))
    except NoisevolveError as exc:
        _fail(exc)
    _write_manifest(Path(out_path).parent, "analyze-classifier",
                    {"recons": list(recon_paths), "targets": list(target_paths), "truth": truth},
                    {}, [Path(out_path).name])
    click.echo(json.dumps(summary, indent=2))


@main.command("analyze-detection")
@_common
@click.option("--log", "log_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def analyze_detection(seed, config_path, log_path, out_path):
    """Summarize a detection session log (d' per group, RT gap, threshold)."""
    _load_config(config_path)
    try:
        trials = read_detection_log(log_path)
        summary = analyze_detection_log(trials)
        Path(out_path).write_text(json.dumps(summary, indent=2))
    except NoisevolveError as exc:
        _fail(exc)
    _write_manifest(Path(out_path).parent, "analyze-detection", {},
                    {"log": log_path}, [Path(out_path).name])
    click.echo(json.dumps(summary, indent=2))


@main.command("export-gallery")
@_common
@click.option("--query", "query_path", type=click.Path(exists=True), required=True)
@click.option("--db", "db_dir", type=click.Path(exists=True), required=True)
@click.option("--k", type=int, default=5, show_default=True)
@click.option("--side", type=int, default=64, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def export_gallery_cmd(seed, config_path, query_path, db_dir, k, side, out_path):
    """Write query + top-k retrievals as one PNG strip."""
    _load_config(config_path)
    try:
        db = load_corpus(db_dir, side=side)
        query = load_image(query_path, side=side)
        result = nearest_neighbors(query, db, k=k, query_id=Path(query_path).name)
        export_gallery(out_path, query, result, db)
    except NoisevolveError as exc:
        _fail(exc)
    _write_manifest(Path(out_path).parent, "export-gallery", {"k": k},
                    {"query": query_path}, [Path(out_path).name])
    click.echo(f"wrote {out_path}")


@main.command("serve")
@_common
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--root", "root_dir", type=click.Path(), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8714, show_default=True)
def serve(seed, config_path, model_path, root_dir, host, port):
    """Serve live 2AFC sessions over HTTP (see docs/api.md)."""
    import uvicorn

    from .session import SessionService, create_app

    _load_config(config_path)
    try:
        model = NaturalNoiseModel.load(model_path)
    except NoisevolveError as exc:
        _fail(exc)
    app = create_app(SessionService(model, root_dir))
    click.echo(f"serving sessions for model {model.model_id_} on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
