"""Command-line interface orchestrating the full pipeline.

Every command is deterministic: the same config and seeds produce byte
identical artifacts.  Failures exit nonzero with a single machine-parseable
line on stderr: ``error: <CODE> <message>``.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import click
import numpy as np

from .conditioning import build_corpus, inference_windows
from .config import ConfigError, ProjectConfig, load_config
from .evaluate import build_error_report, write_report
from .facemodel import synthesize_basis
from .fitting import EnergyWeights, SolverConfig, track_sequence
from .formats import (
    FormatError,
    load_landmarks,
    load_params_jsonl,
    read_frame_sequence,
    save_landmarks,
    save_params_jsonl,
    write_frame_sequence,
)
from .nn.models import DiscriminatorConfig, GeneratorConfig
from .nn.serialize import load_weights, save_weights
from .nn.train import TrainConfig, infer_sequence, initialize
from .nn.train import train as train_network
from .render import default_intrinsics
from .synth import SyntheticScene, render_scene
from .transfer import apply_transfer


def _fail(code: str, message: str) -> None:
    print(f"error: {code} {message}", file=sys.stderr)
    sys.exit(1)


def _run(fn):
    try:
        fn()
    except ConfigError as exc:
        _fail("E_CONFIG", str(exc))
    except FormatError as exc:
        _fail("E_FORMAT", str(exc))
    except FileNotFoundError as exc:
        _fail("E_INPUT", str(exc))
    except ValueError as exc:
        _fail("E_INVALID", str(exc))
    except Exception as exc:   # pragma: no cover - last resort
        _fail("E_RUNTIME", f"{type(exc).__name__}: {exc}")


def _basis_and_cam(config: ProjectConfig):
    basis = synthesize_basis(seed=config.basis.seed,
                             vertex_count=config.basis.vertex_count,
                             dims=config.basis.dims)
    cam = default_intrinsics(config.camera.width, config.camera.height)
    return basis, cam


def _solver_config(config: ProjectConfig) -> SolverConfig:
    return SolverConfig(
        max_iters=config.solver.max_iters,
        weights=EnergyWeights(w_photo=config.solver.w_photo,
                              w_land=config.solver.w_land,
                              w_reg=config.solver.w_reg))


def _load_landmark_dir(directory) -> list:
    paths = sorted(Path(directory).glob("landmarks_*.json"))
    if not paths:
        raise FormatError(f"no landmark files found in {directory}")
    return [load_landmarks(p) for p in paths]


@click.group()
def main():
    """Desk-scale video portrait reenactment pipeline."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--frames", "n_frames", default=60, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", default=None, help="Override the output directory.")
def synth(config_path, n_frames, seed, out_dir):
    """Generate a synthetic dataset with ground-truth parameters."""

    def run():
        config = load_config(config_path, check_paths=False)
        basis, cam = _basis_and_cam(config)
        out = Path(out_dir or config.paths.output_dir)
        scene = SyntheticScene(seed=seed, n_frames=n_frames)
        frames, params, landmark_sets = render_scene(basis, scene, cam)
        write_frame_sequence(frames, out / "frames")
        lm_dir = out / "landmarks"
        lm_dir.mkdir(parents=True, exist_ok=True)
        for i, lm in enumerate(landmark_sets):
            save_landmarks(lm, lm_dir / f"landmarks_{i:06d}.json")
        save_params_jsonl(params, out / "ground_truth.jsonl",
                          metadata={"seed": seed, "n_frames": n_frames})
        click.echo(f"synth: wrote {len(frames)} frames to {out}")

    _run(run)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, help="Output parameter file.")
def fit(config_path, out_path):
    """Fit the face model to a frame sequence with landmarks."""

    def run():
        config = load_config(config_path)
        if config.paths.frames_dir is None or config.paths.landmarks_dir is None:
            raise ConfigError("fit requires frames_dir and landmarks_dir")
        basis, cam = _basis_and_cam(config)
        frames = read_frame_sequence(config.paths.frames_dir)
        landmark_sets = _load_landmark_dir(config.paths.landmarks_dir)
        if len(frames) != len(landmark_sets):
            raise ConfigError("frame and landmark counts differ")
        params, failed = track_sequence(frames, landmark_sets, basis, cam,
                                        _solver_config(config))
        out = Path(out_path or Path(config.paths.output_dir) / "params.jsonl")
        out.parent.mkdir(parents=True, exist_ok=True)
        save_params_jsonl(params, out, metadata={"failed_frames": int(sum(failed))})
        click.echo(f"fit: {len(params)} frames, {int(sum(failed))} failed -> {out}")

    _run(run)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--source", "source_path", required=True, type=click.Path(exists=True))
@click.option("--target", "target_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True)
def transfer(config_path, source_path, target_path, out_path):
    """Transfer source motion onto the target sequence."""

    def run():
        config = load_config(config_path, check_paths=False)
        source, _ = load_params_jsonl(source_path)
        target, _ = load_params_jsonl(target_path)
        out_params, meta = apply_transfer(source, target, config.transfer)
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        save_params_jsonl(out_params, out_path, metadata=meta)
        click.echo(f"transfer: {len(out_params)} frames -> {out_path}")

    _run(run)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--params", "params_path", required=True, type=click.Path(exists=True))
@click.option("--frames", "frames_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, help="Output weights file.")
def train(config_path, params_path, frames_dir, out_path):
    """Train the rendering-to-video network on a fitted sequence."""

    def run():
        from . import plots

        config = load_config(config_path, check_paths=False)
        basis, cam = _basis_and_cam(config)
        if config.camera.width != config.camera.height:
            raise ConfigError("training requires a square resolution")
        params, _ = load_params_jsonl(params_path)
        frames = read_frame_sequence(frames_dir)
        if len(params) != len(frames):
            raise ConfigError("parameter and frame counts differ")
        corpus = build_corpus(basis, params, frames, cam, config.window_size)
        gen_cfg = GeneratorConfig.for_size(config.camera.width,
                                           in_channels=9 * config.window_size)
        disc_cfg = DiscriminatorConfig.for_size(config.camera.width,
                                                in_channels=9 * config.window_size + 3)
        weights = initialize(gen_cfg, disc_cfg, config.train.weights_seed)
        train_cfg = TrainConfig(
            lambda_l1=config.train.lambda_l1, batch_size=config.train.batch_size,
            iterations=config.train.iterations,
            learning_rate=config.train.learning_rate,
            first_momentum=config.train.first_momentum,
            shuffle_seed=config.train.shuffle_seed)
        history = train_network(corpus, weights, train_cfg)
        out = Path(out_path or Path(config.paths.output_dir) / "weights.dvpw")
        out.parent.mkdir(parents=True, exist_ok=True)
        save_weights(weights, out)
        with open(out.with_name("loss_history.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "disc_loss", "gen_adversarial", "gen_l1"])
            for row in history.rows():
                writer.writerow([row[0]] + [f"{v:.6f}" for v in row[1:]])
        plots.loss_history_figure(history, out.with_name("loss_history.png"))
        status = "aborted" if history.aborted else "completed"
        click.echo(f"train: {status} after {len(history.iterations)} iterations "
                   f"-> {out}")

    _run(run)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--params", "params_path", required=True, type=click.Path(exists=True))
@click.option("--weights", "weights_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True)
def infer(config_path, params_path, weights_path, out_dir):
    """Synthesize output frames for a parameter sequence."""

    def run():
        config = load_config(config_path, check_paths=False)
        basis, cam = _basis_and_cam(config)
        params, _ = load_params_jsonl(params_path)
        if not params:
            raise FormatError(f"{params_path}: no parameters")
        weights = load_weights(weights_path)
        windows = inference_windows(basis, params, cam, config.window_size)
        frames = infer_sequence(windows, weights)
        write_frame_sequence(frames, out_dir)
        click.echo(f"infer: {len(frames)} frames -> {out_dir}")

    _run(run)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--pred", "pred_dir", required=True, type=click.Path(exists=True))
@click.option("--truth", "truth_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", default=None, help="Reports directory.")
@click.option("--run", "run_name", default="run", show_default=True)
def evaluate(config_path, pred_dir, truth_dir, out_dir, run_name):
    """Photometric error report between two frame sequences."""

    def run():
        config = load_config(config_path, check_paths=False)
        preds = read_frame_sequence(pred_dir)
        truths = read_frame_sequence(truth_dir)
        if len(preds) != len(truths):
            raise ConfigError("prediction and truth frame counts differ")
        fingerprint = {
            "window_size": config.window_size,
            "resolution": [config.camera.width, config.camera.height],
            "frame_count": len(preds),
        }
        report = build_error_report(preds, truths, fingerprint)
        out = Path(out_dir or Path(config.paths.output_dir) / "reports")
        path = write_report(report, out, run_name)
        click.echo(f"evaluate: sequence mean {report.sequence_mean:.4f} -> {path}")

    _run(run)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--params", "params_path", required=True, type=click.Path(exists=True))
@click.option("--weights", "weights_path", default=None, type=click.Path(exists=True))
@click.option("--log", "log_path", default=None, help="Request log (JSON lines).")
def serve(config_path, params_path, weights_path, log_path):
    """Run the interactive editor service until interrupted."""

    def run():
        import uvicorn

        from .service import EditorService, create_app

        config = load_config(config_path, check_paths=False)
        basis, cam = _basis_and_cam(config)
        params, _ = load_params_jsonl(params_path)
        if not params:
            raise FormatError(f"{params_path}: no parameters")
        weights = load_weights(weights_path) if weights_path else None
        service = EditorService(basis, cam, params[0], weights,
                                config.window_size, log_path)
        app = create_app(service)
        uvicorn.run(app, host=config.service.host, port=config.service.port)

    _run(run)


if __name__ == "__main__":
    main()
