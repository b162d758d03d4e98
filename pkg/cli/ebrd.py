# cli/ebrd.py

# Load environment variables from .env file
from dotenv import load_dotenv
load_dotenv()

import click
import logging
import math
import os
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from distortion import DistortionKind
from energy.mlp import EnergyNet, load_checkpoint, save_checkpoint
from errors import ConfigError, DimensionMismatchError, EbrdError
from estimation.rd_estimator import LN2, convergence_probe, energy_distance_test, rd_points_columns
from logging_setups import setup_run_loggers
from oracles.blahut_arimoto import ba_curve, binary_hamming_grid, scalar_source_grid
from oracles.closed_form import gaussian_rd, laplacian_rd, oracle_name, oracle_rate, vector_gaussian_rd
from pipeline.sweep_pipeline import rd_sweep_result
from pipeline.train_pipeline import HISTORY_COLUMNS, train
from sampling.langevin import sample_conditional
from sources.specs import SampleBatch, ScalarGaussian, ScalarLaplacian, make_vector_gaussian, sample, sample_columns
from utils import child_int_seed, write_csv
from .plotting import plot_conditional_scatter, plot_curve, plot_rd_overlay
from .run_config import EMIT_CHOICES, RATE_UNITS, RunConfig, load_run_config

LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
DEFAULT_LOG_LEVEL = os.environ.get('EBRD_LOG_LEVEL', 'INFO').upper()


def run_options(func):
    """--seed, --out, --emit, --log-file and --log-level shared by every verb."""
    options = [
        click.option('--seed', type=int, default=None, help='Parent seed (overrides config)'),
        click.option('--out', 'out', type=click.Path(file_okay=False), default=None,
                     help='Output directory (overrides config / EBRD_OUTPUT_DIR)'),
        click.option('--emit', multiple=True, type=click.Choice(EMIT_CHOICES), help='Outputs to write (repeatable)'),
        click.option('--log-file', default='ebrd.log', show_default=True, help='Log file path'),
        click.option('--log-level', default=DEFAULT_LOG_LEVEL, show_default=True,
                     type=click.Choice(LOG_LEVELS, case_sensitive=False)),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _loggers(name: str, log_file: str, log_level: str) -> logging.Logger:
    return setup_run_loggers(name, log_file, getattr(logging, log_level.upper()))


def _load(config_path, **overrides) -> RunConfig:
    try:
        return load_run_config(config_path, overrides)
    except ConfigError as e:
        raise click.UsageError(str(e)) from e


def _fail(logger: logging.Logger, what: str, exc: Exception):
    logger.exception(f"{what} failed")
    raise click.ClickException(str(exc)) from exc


def _rate_scale(rate_unit: str) -> float:
    return 1.0 / LN2 if rate_unit == "bits" else 1.0


def _echo_frame(frame: pd.DataFrame) -> None:
    click.echo(frame.to_csv(index=False, lineterminator="\n"), nl=False)


@click.group()
def cli():
    """Energy-based rate-distortion estimation: train, sweep, oracles and diagnostics."""
    pass


@cli.command('train')
@click.option('--config', '-c', 'config_path', required=True, type=click.Path(dir_okay=False), help='TOML run config')
@click.option('--beta', type=float, default=None, help='Lagrange multiplier (overrides [train].beta)')
@click.option('--iterations', type=int, default=None, help='Iteration budget (overrides [train].iterations)')
@click.option('--record-timing/--no-record-timing', default=False, show_default=True,
              help='Write measured wallclock_ms instead of 0')
@click.option('--progress/--no-progress', default=True, show_default=True)
@run_options
def train_cmd(config_path, beta, iterations, record_timing, progress, seed, out, emit, log_file, log_level):
    """
    Train one energy model at a fixed beta; writes checkpoint.npz and history.csv.

    Example command:
        python -m cli.ebrd train --config configs/gaussian.toml --beta 1 --out runs/gaussian_b1
    """
    logger = _loggers('ebrd_cli', log_file, log_level)
    config = _load(config_path, seed=seed, output_dir=out, emit=emit, beta=beta, iterations=iterations)
    train_cfg = replace(config.train, progress=progress)
    logger.info(f"Starting train: source={config.source.kind.value}, beta={train_cfg.beta:g}, out={config.output_dir}")
    try:
        run = train(config.source, config.net, train_cfg)
    except EbrdError as e:
        _fail(logger, "Training", e)
    save_checkpoint(run.net, config.output_dir / "checkpoint.npz")
    if "csv" in config.emit:
        write_csv(run.history_frame(record_timing), config.output_dir / "history.csv", HISTORY_COLUMNS)
    logger.info(f"Completed training: {len(run.history)} iterations"
                f"{' (stopped early)' if run.stopped_early else ''}")


@cli.command('sweep')
@click.option('--config', '-c', 'config_path', required=True, type=click.Path(dir_okay=False), help='TOML run config')
@click.option('--beta', 'betas', type=float, multiple=True, help='Beta grid (repeatable, overrides betas)')
@click.option('--iterations', type=int, default=None, help='Iteration budget per beta')
@click.option('--eval-n', type=int, default=None, help='Evaluation samples per beta')
@click.option('--rate-unit', type=click.Choice(RATE_UNITS), default=None, help='Unit of the rate columns')
@click.option('--save-checkpoints/--no-save-checkpoints', default=True, show_default=True)
@run_options
def sweep_cmd(config_path, betas, iterations, eval_n, rate_unit, save_checkpoints, seed, out, emit, log_file, log_level):
    """
    Train one model per beta and write rd_points.csv (plus an overlay SVG with --emit svg).

    Example command:
        python -m cli.ebrd sweep --config configs/laplacian.toml --emit csv --emit svg
    """
    logger = _loggers('ebrd_cli', log_file, log_level)
    config = _load(config_path, seed=seed, output_dir=out, emit=emit, betas=betas, iterations=iterations,
                   eval_n=eval_n, rate_unit=rate_unit)
    rho = config.distortion
    out_dir = config.output_dir

    def keep_checkpoint(beta, run):
        if save_checkpoints:
            save_checkpoint(run.net, out_dir / f"checkpoint_beta{beta:g}.npz")

    logger.info(f"Starting sweep over {len(config.betas)} betas: {list(config.betas)}")
    result = rd_sweep_result(config.source, config.net, config.betas, config.train, config.eval_n, config.seed,
                             eval_langevin=config.eval_langevin, on_trained=keep_checkpoint)

    rows = [p.to_row(config.rate_unit, oracle_rate(config.source, rho, p.distortion)) for p in result.points]
    frame = pd.DataFrame(rows, columns=rd_points_columns(config.rate_unit))
    if "csv" in config.emit:
        write_csv(frame, out_dir / "rd_points.csv", rd_points_columns(config.rate_unit))
    if "svg" in config.emit:
        plot_rd_overlay(result.points, config.source, rho, out_dir / "rd_overlay.svg", config.rate_unit)
    for p in result.points:
        if p.is_negative_rate:
            logger.warning(f"beta={p.beta:g}: negative rate {p.rate:.4f} nats reported as 0")
    if result.failed:
        raise click.ClickException(f"{len(result.failed)} of {len(config.betas)} betas failed; "
                                   f"partial results in {out_dir}")
    logger.info(f"Completed sweep; results in {out_dir}")


@cli.command('oracle')
@click.option('--source', 'kind', default=None,
              type=click.Choice(['gaussian', 'laplacian', 'vector_gaussian', 'gmm']), help='Source kind')
@click.option('--config', '-c', 'config_path', default=None, type=click.Path(dir_okay=False),
              help='TOML run config; its [source] and distortion replace --source')
@click.option('--distortion', '-D', 'distortions', type=float, multiple=True, required=True,
              help='Distortion level (repeatable)')
@click.option('--variance', type=float, default=1.0, show_default=True, help='Gaussian variance')
@click.option('--scale', type=float, default=1.0, show_default=True, help='Laplacian scale b')
@click.option('--dim', type=int, default=2, show_default=True, help='Vector Gaussian dimension')
@click.option('--basis-seed', type=int, default=0, show_default=True)
@click.option('--rate-unit', type=click.Choice(RATE_UNITS), default='nats', show_default=True)
@run_options
def oracle_cmd(kind, config_path, distortions, variance, scale, dim, basis_seed, rate_unit,
               seed, out, emit, log_file, log_level):
    """
    Print (and optionally write) the closed-form R(D) at the given distortions.

    Example command:
        python -m cli.ebrd oracle --source gaussian -D 0.25 -D 1.0
    """
    logger = _loggers('ebrd_cli', log_file, log_level)
    if any(not d > 0 for d in distortions):
        raise click.UsageError("distortion levels must be > 0")
    out_dir = Path(out or os.environ.get("EBRD_OUTPUT_DIR", "ebrd_out"))
    if config_path is not None:
        config = _load(config_path, seed=seed, output_dir=out, emit=emit)
        if oracle_name(config.source, config.distortion) is None:
            raise click.UsageError(f"no closed-form rate-distortion function for source "
                                   f"'{config.source.kind.value}' with distortion '{config.distortion.value}'")
        kind = config.source.kind.value
        rates = [oracle_rate(config.source, config.distortion, d) for d in distortions]
        out_dir, emit = config.output_dir, config.emit
    elif kind is None:
        raise click.UsageError("one of --source or --config is required")
    elif kind == 'gmm':
        raise click.UsageError("no closed-form rate-distortion function for the gmm source")
    else:
        try:
            if kind == 'gaussian':
                rates = [gaussian_rd(d, variance=variance) for d in distortions]
            elif kind == 'laplacian':
                rates = [laplacian_rd(d, scale=scale) for d in distortions]
            else:
                spec = make_vector_gaussian(dim, basis_seed)
                rates = [vector_gaussian_rd(spec.eigen_variances, d).rate for d in distortions]
        except ValueError as e:
            raise click.UsageError(str(e)) from e

    column = f"rate_{rate_unit}"
    frame = pd.DataFrame({"distortion": list(distortions),
                          column: np.asarray(rates) * _rate_scale(rate_unit)}, columns=["distortion", column])
    _echo_frame(frame)
    if "csv" in emit:
        write_csv(frame, out_dir / "oracle.csv", ["distortion", column])
    if "svg" in emit:
        order = np.argsort(frame["distortion"].to_numpy())
        plot_curve(frame["distortion"].to_numpy()[order], frame[column].to_numpy()[order],
                   out_dir / "oracle.svg", label=kind, rate_unit=rate_unit)
    logger.debug(f"oracle {kind}: {len(frame)} rows")


@cli.command('ba')
@click.option('--source', 'kind', required=True,
              type=click.Choice(['gaussian', 'laplacian', 'binary', 'vector_gaussian', 'gmm']), help='Source kind')
@click.option('--beta', 'betas', type=float, multiple=True, required=True, help='Lagrange multiplier (repeatable)')
@click.option('--distortion', 'rho_name', type=click.Choice([k.value for k in DistortionKind]), default=None,
              help='Distortion measure (default: sq_l2 for gaussian, l1 for laplacian)')
@click.option('--std', type=float, default=1.0, show_default=True, help='Gaussian std')
@click.option('--scale', type=float, default=1.0, show_default=True, help='Laplacian scale b')
@click.option('--p-one', type=float, default=0.5, show_default=True, help='P(X=1) of the binary source')
@click.option('--grid-points', type=int, default=401, show_default=True)
@click.option('--width-stds', type=float, default=5.0, show_default=True)
@click.option('--max-iters', type=int, default=5000, show_default=True)
@click.option('--tol', type=float, default=1e-10, show_default=True)
@click.option('--rate-unit', type=click.Choice(RATE_UNITS), default='nats', show_default=True)
@run_options
def ba_cmd(kind, betas, rho_name, std, scale, p_one, grid_points, width_stds, max_iters, tol, rate_unit,
           seed, out, emit, log_file, log_level):
    """
    Blahut-Arimoto baseline on a discretized scalar (or binary) source.

    Example command:
        python -m cli.ebrd ba --source binary --beta 1.0986122886681098
    """
    logger = _loggers('ebrd_cli', log_file, log_level)
    if kind in ('vector_gaussian', 'gmm'):
        raise click.UsageError(f"Blahut-Arimoto is only run for scalar sources, not '{kind}'")
    try:
        if kind == 'binary':
            grid = binary_hamming_grid(p_one)
        else:
            spec = ScalarGaussian(std=std) if kind == 'gaussian' else ScalarLaplacian(scale=scale)
            default_rho = DistortionKind.SquaredL2 if kind == 'gaussian' else DistortionKind.L1
            rho = DistortionKind.from_name(rho_name) if rho_name else default_rho
            grid = scalar_source_grid(spec, rho, n_points=grid_points, width_stds=width_stds)
    except ValueError as e:
        raise click.UsageError(str(e)) from e

    points = ba_curve(grid, betas, max_iters=max_iters, tol=tol)
    scale_out = _rate_scale(rate_unit)
    columns = ["beta", "distortion", f"rate_{rate_unit}", "loss_hat", "status"]
    frame = pd.DataFrame([{
        "beta": p.beta,
        "distortion": p.distortion,
        f"rate_{rate_unit}": p.rate * scale_out,
        "loss_hat": p.loss_hat * scale_out,
        "status": "ok" if p.ok else f"error: {p.error}",
    } for p in points], columns=columns)
    _echo_frame(frame)
    out_dir = Path(out or os.environ.get("EBRD_OUTPUT_DIR", "ebrd_out"))
    if "csv" in emit:
        write_csv(frame, out_dir / "ba_points.csv", columns)
    ok = frame[frame["status"] == "ok"].sort_values("distortion")
    if "svg" in emit and len(ok):
        plot_curve(ok["distortion"].to_numpy(), ok[f"rate_{rate_unit}"].to_numpy(), out_dir / "ba_curve.svg",
                   label=f"BA {kind}", rate_unit=rate_unit)
    failed = [p for p in points if not p.ok]
    if failed:
        raise click.ClickException(f"{len(failed)} of {len(points)} betas did not converge")
    logger.debug(f"BA {kind}: {len(points)} points")


def _checkpoint_for(config: RunConfig, checkpoint: str) -> EnergyNet:
    try:
        net = load_checkpoint(checkpoint)
    except (OSError, KeyError, ValueError) as e:
        raise click.UsageError(f"cannot read checkpoint {checkpoint}: {e}") from e
    if net.input_dim != config.source.dim:
        err = DimensionMismatchError(net.input_dim, config.source.dim, what="checkpoint vs source")
        raise click.UsageError(str(err))
    return net


@cli.command('sample-source')
@click.option('--config', '-c', 'config_path', required=True, type=click.Path(dir_okay=False), help='TOML run config')
@click.option('--n', 'n', type=int, default=5000, show_default=True, help='Number of source draws')
@run_options
def sample_source_cmd(config_path, n, seed, out, emit, log_file, log_level):
    """
    Draw n points from the configured source; writes source_samples.csv.

    Uses the same stream as the x column of sample-conditional, so equal
    seeds and n give the same points.

    Example command:
        python -m cli.ebrd sample-source --config configs/gmm.toml --n 5000
    """
    logger = _loggers('ebrd_cli', log_file, log_level)
    config = _load(config_path, seed=seed, output_dir=out, emit=emit)
    if n < 0:
        raise click.UsageError(f"--n must be >= 0, got {n}")
    if n == 0:
        batch = SampleBatch(points=np.zeros((0, config.source.dim)), source=config.source)
    else:
        batch = sample(config.source, n, child_int_seed(config.seed, 0))
    if "csv" in config.emit:
        batch.to_csv(config.output_dir / "source_samples.csv")
    logger.info(f"Wrote {n} {config.source.kind.value} draws to {config.output_dir}")


@cli.command('sample-conditional')
@click.option('--checkpoint', required=True, type=click.Path(dir_okay=False), help='Trained model (.npz)')
@click.option('--config', '-c', 'config_path', required=True, type=click.Path(dir_okay=False), help='TOML run config')
@click.option('--n', 'n', type=int, default=2000, show_default=True, help='Number of x draws (one y each)')
@click.option('--beta', type=float, default=None, help='Beta of the conditional (defaults to [train].beta)')
@click.option('--permutations', type=int, default=199, show_default=True,
              help='Permutations of the energy-distance test (0 disables it)')
@run_options
def sample_conditional_cmd(checkpoint, config_path, n, beta, permutations, seed, out, emit, log_file, log_level):
    """
    Draw one y ~ p_theta(y | x) per source draw x; writes samples.csv.

    Example command:
        python -m cli.ebrd sample-conditional --checkpoint runs/gmm/checkpoint.npz --config configs/gmm.toml --emit svg
    """
    logger = _loggers('ebrd_cli', log_file, log_level)
    config = _load(config_path, seed=seed, output_dir=out, emit=emit, beta=beta)
    net = _checkpoint_for(config, checkpoint)
    if n < 0:
        raise click.UsageError(f"--n must be >= 0, got {n}")
    d = net.input_dim
    columns = sample_columns(d, "x") + sample_columns(d, "y")
    out_dir = config.output_dir

    if n == 0:
        xs = ys = np.zeros((0, d))
    else:
        try:
            x_batch = sample(config.source, n, child_int_seed(config.seed, 0))
            y_batch = sample_conditional(net, x_batch, config.train.beta, config.distortion,
                                         config.evaluation_langevin, child_int_seed(config.seed, 1))
        except EbrdError as e:
            _fail(logger, "Conditional sampling", e)
        xs, ys = x_batch.points, y_batch.points
        displacement = float(np.mean(np.sum((ys - xs) ** 2, axis=1)))
        logger.info(f"mean squared x->y displacement: {displacement:.4f}")
        if permutations > 0 and n >= 2:
            test = energy_distance_test(xs, ys, permutations=permutations, seed=child_int_seed(config.seed, 2))
            logger.info(f"energy distance {test.statistic:.5f}, permutation p-value {test.p_value:.3f}")

    frame = pd.DataFrame(np.hstack([xs, ys]), columns=columns)
    if "csv" in config.emit:
        write_csv(frame, out_dir / "samples.csv", columns)
    if "svg" in config.emit and n > 0:
        plot_conditional_scatter(xs, ys, out_dir / "conditional_scatter.svg",
                                 title=f"{config.source.kind.value}, beta={config.train.beta:g}")
    logger.info(f"Wrote {n} conditional samples to {out_dir}")


@cli.command('probe-convergence')
@click.option('--checkpoint', required=True, type=click.Path(dir_okay=False), help='Trained model (.npz)')
@click.option('--config', '-c', 'config_path', required=True, type=click.Path(dir_okay=False), help='TOML run config')
@click.option('--beta', type=float, default=None, help='Beta of the estimate (defaults to [train].beta)')
@click.option('--n-list', 'n_list', type=int, multiple=True, help='Sample sizes (repeatable, ascending)')
@click.option('--repeats', type=int, default=None, help='Independent sample sets per size')
@run_options
def probe_convergence_cmd(checkpoint, config_path, beta, n_list, repeats, seed, out, emit, log_file, log_level):
    """
    Spread of the dual-objective estimate across sample sizes; writes convergence.csv.

    Example command:
        python -m cli.ebrd probe-convergence --checkpoint runs/gaussian_b1/checkpoint.npz --config configs/gaussian.toml
    """
    logger = _loggers('ebrd_cli', log_file, log_level)
    config = _load(config_path, seed=seed, output_dir=out, emit=emit, beta=beta)
    net = _checkpoint_for(config, checkpoint)
    sizes = list(n_list) or list(config.probe_n_list)
    reps = repeats if repeats is not None else config.probe_repeats
    try:
        table = convergence_probe(config.source, net, config.train.beta, config.distortion, sizes, reps,
                                  config.seed, config.evaluation_langevin)
    except ValueError as e:
        raise click.UsageError(str(e)) from e
    except EbrdError as e:
        _fail(logger, "Convergence probe", e)
    _echo_frame(table)
    if "csv" in config.emit:
        write_csv(table, config.output_dir / "convergence.csv")
    stds = table["std_loss"].to_numpy()
    if len(stds) > 1 and not table["degenerate"].any():
        ratios = stds[1:] / np.where(stds[:-1] > 0, stds[:-1], math.nan)
        logger.info(f"std ratios between consecutive sizes: {np.round(ratios, 3).tolist()}")


if __name__ == '__main__':
    cli()
