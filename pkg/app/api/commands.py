"""
Command line - the ``kws`` click command group
"""
import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional

import click

from app import __version__, create_engine_env
from app.api.controllers import (
    alignment_controller,
    evaluation_controller,
    frontend_controller,
    profiler_controller,
    training_controller,
)
from app.core.config import CliConfig, load_config
from app.core.errors import KwsError, UsageError
from app.utils.serialization import dumps_json, dumps_jsonl

logger = logging.getLogger(__name__)


class CommandState:
    """Per-invocation settings shared by the subcommands"""

    def __init__(self, cfg: CliConfig, workers: int, show_progress: bool):
        self.cfg = cfg
        self.workers = workers
        self.show_progress = show_progress


def _emit(obj):
    click.echo(dumps_json(obj).decode())


def _require(value: Optional[str], what: str) -> str:
    if not value:
        raise UsageError(f"missing {what} (pass it or set it under \"paths\" in the config)")
    return value


def _workers(state: CommandState, workers: Optional[int]) -> int:
    return state.workers if workers is None else workers


WORKERS_OPTION = click.option(
    '--workers', type=click.IntRange(min=1), default=None,
    help='Threads for this command (overrides the global --workers)'
)


# ==================== GROUP ====================

@click.group(context_settings={'help_option_names': ['-h', '--help']})
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
              help='JSON engine config (defaults for every omitted key)')
@click.option('--seed', type=click.IntRange(min=0), default=None, help='Seed for training and augmentation')
@click.option('--workers', type=click.IntRange(min=1), default=None, help='Threads for eval/augment/mine')
@click.option('--log-level', type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False),
              default=None)
@click.option('--log-format', type=click.Choice(['text', 'json']), default=None)
@click.option('--env', 'env_name', type=click.Choice(['development', 'testing', 'production']), default=None,
              help='Environment settings (default $KWS_ENV)')
@click.version_option(__version__, prog_name='kws', message='%(prog)s %(version)s')
@click.pass_context
def cli(ctx, config_path, seed, workers, log_level, log_format, env_name):
    """Small-footprint CRNN keyword spotting engine"""
    env = create_engine_env(env_name, log_level, log_format)
    cfg = load_config(config_path).with_seed(seed)
    ctx.obj = CommandState(
        cfg=cfg,
        workers=workers or env.DEFAULT_WORKERS,
        show_progress=env.SHOW_PROGRESS and sys.stderr.isatty(),
    )


# ==================== FRONTEND ====================

@cli.command()
@click.argument('wav')
@click.option('--out', default=None, help='FMAT output (default: WAV stem + .fmat)')
@click.option('--log-mel', 'debug_log_mel', is_flag=True, help='Debug log-mel features instead of PCEN')
@click.pass_obj
def featurize(state: CommandState, wav, out, debug_log_mel):
    """WAV -> FMAT feature matrix"""
    _emit(frontend_controller.featurize(state.cfg, wav, out, debug_log_mel))


# ==================== ALIGNMENT ====================

@cli.command()
@click.argument('cpst', nargs=-1, required=True)
@click.option('--alpha', type=click.FloatRange(0.0, 1.0), default=None, help='Decay rate')
@click.option('--n-iter', type=click.IntRange(min=1), default=None)
@click.option('--smooth-window', type=click.IntRange(min=1), default=None, help='Odd width in frames')
@click.option('--out', default=None, help='Spans JSONL (default: stdout)')
@click.pass_obj
def align(state: CommandState, cpst, alpha, n_iter, smooth_window, out):
    """CPST posteriors -> keyword spans JSONL"""
    overrides = {k: v for k, v in (('alpha', alpha), ('n_iter', n_iter), ('smooth_window', smooth_window))
                 if v is not None}
    cfg = replace(state.cfg, align=replace(state.cfg.align, **overrides))
    records = alignment_controller.align(cfg, cpst, out)
    if not out:
        click.echo(dumps_jsonl(records).decode(), nl=False)


@cli.command()
@click.argument('spans')
@click.option('--pad', type=click.FloatRange(min=0.0), default=None, help='Padding in seconds')
@click.option('--out-dir', default=None, help='Directory for the chopped clips')
@click.option('--manifest', default=None, help='Write a positive manifest of the clips')
@click.pass_obj
def chop(state: CommandState, spans, pad, out_dir, manifest):
    """Spans JSONL + WAVs -> padded keyword clips"""
    cfg = state.cfg
    if pad is not None:
        cfg = replace(cfg, align=replace(cfg.align, pad_s=pad))
    out_dir = out_dir or cfg.paths.out_dir or os.path.join(os.path.dirname(os.path.abspath(spans)), 'clips')
    _emit(alignment_controller.chop(cfg, spans, out_dir, manifest))


# ==================== TRAINING ====================

@cli.command()
@click.argument('manifest', required=False)
@click.option('--out', required=True, help='Feature cache output (msgpack)')
@click.option('--epoch', type=click.IntRange(min=0), default=0, help='Epoch index for the augmentation seeds')
@click.option('--snr-low', type=float, default=None)
@click.option('--snr-high', type=float, default=None)
@click.option('--jitter-ms', type=click.FloatRange(min=0.0), default=None)
@WORKERS_OPTION
@click.pass_obj
def augment(state: CommandState, manifest, out, epoch, snr_low, snr_high, jitter_ms, workers):
    """Manifest -> augmented feature cache"""
    cfg = state.cfg
    spec = cfg.augment
    low, high = spec.snr_db_range
    spec = replace(
        spec,
        snr_db_range=(low if snr_low is None else snr_low, high if snr_high is None else snr_high),
        jitter_max_ms=spec.jitter_max_ms if jitter_ms is None else jitter_ms,
    )
    manifest = _require(manifest or cfg.paths.manifest, "MANIFEST")
    _emit(training_controller.augment(replace(cfg, augment=spec), manifest, out, epoch,
                                    _workers(state, workers)))


@cli.command('train')
@click.argument('manifest', required=False)
@click.option('--out', default=None, help='Checkpoint output (CKWS)')
@click.option('--metrics', default=None, help='Metrics CSV (appended)')
@click.option('--max-steps', type=click.IntRange(min=1), default=None)
@click.option('--max-epochs', type=click.IntRange(min=1), default=None)
@click.option('--init', 'init_path', default=None, help='Continue from this checkpoint')
@click.option('--fraction', type=click.FloatRange(0.0, 1.0, min_open=True), default=None,
              help='Train on this share of each class (overrides train.data_fraction)')
@WORKERS_OPTION
@click.pass_obj
def train_command(state: CommandState, manifest, out, metrics, max_steps, max_epochs, init_path, fraction, workers):
    """Manifest -> trained checkpoint"""
    cfg = state.cfg
    overrides = {k: v for k, v in (('max_steps', max_steps), ('max_epochs', max_epochs),
                                       ('data_fraction', fraction)) if v is not None}
    if overrides:
        cfg = replace(cfg, train=replace(cfg.train, **overrides))
    manifest = _require(manifest or cfg.paths.manifest, "MANIFEST")
    out = _require(out or cfg.paths.checkpoint, "--out")
    _emit(training_controller.train(cfg, manifest, out, metrics, init_path, _workers(state, workers),
                                   state.show_progress))


@cli.command()
@click.argument('checkpoint')
@click.argument('manifest')
@click.option('--tau', type=float, default=None, help='Mining threshold (default: stream threshold)')
@click.option('--cap', type=click.IntRange(min=1), default=None, help='Max windows per file')
@click.option('--out', default=None, help='Additions JSONL')
@click.option('--append-to', default=None, help='Manifest to extend with the additions')
@WORKERS_OPTION
@click.pass_obj
def mine(state: CommandState, checkpoint, manifest, tau, cap, out, append_to, workers):
    """Checkpoint + keyword-free manifest -> hard negative records"""
    tau = state.cfg.stream.threshold if tau is None else tau
    _emit(training_controller.mine(state.cfg, checkpoint, manifest, tau, cap, out, append_to,
                                  _workers(state, workers)))


# ==================== EVALUATION ====================

@cli.command('eval')
@click.argument('checkpoint')
@click.argument('manifest')
@click.option('--out', required=True, help='Operating points CSV')
@click.option('--summary', default=None, help='Summary JSON (default: next to --out)')
@click.option('--refractory', type=click.FloatRange(min=0.0), default=None)
@click.option('--tolerance', type=click.FloatRange(min=0.0), default=None)
@click.option('--snr', 'snr_db', type=float, multiple=True,
              help='Also evaluate with noise mixed in at this SNR in dB (repeatable)')
@click.option('--noise-manifest', default=None, help='Noise records for --snr (default: the eval manifest)')
@click.option('--rir-manifest', default=None, help='Impulse responses for a far-field condition')
@WORKERS_OPTION
@click.pass_obj
def eval_command(state: CommandState, checkpoint, manifest, out, summary, refractory, tolerance,
                 snr_db, noise_manifest, rir_manifest, workers):
    """Checkpoint + evaluation manifest -> DET report"""
    cfg = state.cfg
    overrides = {k: v for k, v in (('refractory_s', refractory),
                                   ('tolerance_s', tolerance)) if v is not None}
    if overrides:
        cfg = replace(cfg, stream=replace(cfg.stream, **overrides))
    _emit(evaluation_controller.evaluate(
        cfg, checkpoint, manifest, out, summary,
        workers=_workers(state, workers),
        show_progress=state.show_progress,
        snr_db=snr_db,
        noise_manifest=noise_manifest,
        rir_manifest=rir_manifest,
    ))


@cli.command('detect')
@click.argument('checkpoint')
@click.argument('wav')
@click.option('--threshold', type=click.FloatRange(min=0.0), default=None)
@click.option('--refractory', type=click.FloatRange(min=0.0), default=None)
@click.option('--out', default=None, help='Events JSONL (default: stdout)')
@click.pass_obj
def detect_command(state: CommandState, checkpoint, wav, threshold, refractory, out):
    """Stream a WAV and print detection events as JSONL"""
    events = evaluation_controller.detect(state.cfg, checkpoint, wav, threshold, refractory)
    data = dumps_jsonl(e.to_dict() for e in events)
    if out:
        with open(out, 'wb') as handle:
            handle.write(data)
    else:
        click.echo(data.decode(), nl=False)


# ==================== PROFILER ====================

@cli.command()
@click.option('--out', default=None, help='CSV output (default: stdout)')
def sweep(out):
    """Parameter and FLOPs reconciliation of the published architectures"""
    text = profiler_controller.sweep(out)
    if not out:
        click.echo(text, nl=False)


# ==================== ENTRY POINT ====================

def run(argv: Optional[List[str]] = None) -> int:
    """
    Execute one command line

    Returns:
        0 on success, 1 on usage or config errors, 2 on data errors
    """
    try:
        rv = cli.main(args=argv, prog_name='kws', standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except KwsError as e:
        logger.error(e.message, extra={'type': type(e).__name__, **(e.payload or {})})
        click.echo(f"Error: {e.message}", err=True)
        return e.exit_code

    return rv if isinstance(rv, int) else 0


def main():
    sys.exit(run())
