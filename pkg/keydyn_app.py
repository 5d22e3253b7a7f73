"""
Keystroke-dynamics continuous authentication toolkit.
Command-line application tying log validation, training, authentication,
synthetic cohorts and evaluation into reproducible pipelines.

Exit codes: 0 success, 1 validation failure (or a Rejected run), 2 bad
arguments, 3 internal error.
"""

import functools
import logging
import os
from dataclasses import replace
from pathlib import Path
from typing import Optional, Tuple

import click
from dotenv import load_dotenv

from cohort_manager import CohortManager
from core.authenticator import AuthConfig, Outcome, format_trace, run_stream
from core.errors import CrowdedCohort, KeydynError, TooFewUsers
from core.evaluation import (
    FoldStrategy,
    all_passed,
    phase_comparison,
    run_initial,
    run_kfold_sweep,
    trend_check,
)
from core.events import format_ms, load_log, slice_strokes, stroke_count
from core.features import extract_features, serialize_features_csv
from core.files import write_text_atomic
from core.ocsvm import GAMMA_SCALE, parse_model, serialize_model, train
from core.synth import default_cohort
from renderers import MarkdownReportRenderer, ReportTextRenderer
from yaml_config_loader import ExperimentConfig, ExperimentConfigLoader

# Load environment variables
load_dotenv()

# Logging level can be controlled via environment variable LOG_LEVEL (e.g., INFO, DEBUG)
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()

logger = logging.getLogger(__name__)

EXIT_VALIDATION = 1
EXIT_INTERNAL = 3


def configure_logging(level_name: str):
    """Configure root logging once; records go to stderr, never into data output."""
    level = getattr(logging, level_name.upper(), logging.INFO)
    logging.basicConfig(
        level=level,
        format='[%(levelname)s] %(asctime)s - %(message)s',
        datefmt='%H:%M:%S',
        force=True,
    )
    logger.setLevel(level)


def exit_codes(func):
    """Map exceptions onto the exit-code contract."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (click.exceptions.ClickException, click.exceptions.Exit, click.exceptions.Abort):
            raise
        except KeydynError as e:
            click.echo(f"{type(e).__name__} {e}", err=True)
            raise click.exceptions.Exit(EXIT_VALIDATION)
        except Exception:
            logger.exception("Internal error")
            raise click.exceptions.Exit(EXIT_INTERNAL)

    return wrapper


def parse_range(ctx, param, value: Optional[str]) -> Optional[Tuple[int, int]]:
    """Parse --range start:len."""
    if value is None:
        return None
    start, sep, length = value.partition(":")
    try:
        if not sep:
            raise ValueError
        parsed = int(start), int(length)
    except ValueError:
        raise click.BadParameter(f"expected start:len, got {value!r}")
    if parsed[0] < 0 or parsed[1] < 0:
        raise click.BadParameter("start and len must be non-negative")
    return parsed


def parse_gamma(ctx, param, value: Optional[str]):
    """Parse --gamma: "scale" or a positive number."""
    if value is None or value == GAMMA_SCALE:
        return value
    try:
        gamma = float(value)
    except ValueError:
        raise click.BadParameter(f"expected a positive number or {GAMMA_SCALE!r}, got {value!r}")
    if not gamma > 0:
        raise click.BadParameter("gamma must be positive")
    return gamma


def experiment_config(ctx: click.Context) -> ExperimentConfig:
    return ctx.find_root().obj


existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)
output_file = click.Path(dir_okay=False, path_type=Path)
SEED_RANGE = click.IntRange(0, 2 ** 64 - 1)


@click.group()
@click.option("--config", "config_path", type=existing_file, default=None,
              help="Experiment YAML (default: $KEYDYN_CONFIG, then config/keydyn.yaml)")
@click.option("--log-level", default=None,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
              help=f"Log level (default: $LOG_LEVEL or INFO, currently {LOG_LEVEL})")
@click.pass_context
@exit_codes
def cli(ctx: click.Context, config_path: Optional[Path], log_level: Optional[str]):
    """Keystroke-dynamics continuous authentication toolkit."""
    configure_logging(log_level or LOG_LEVEL)
    loader = ExperimentConfigLoader(str(config_path) if config_path else None)
    ctx.obj = loader.load()


@cli.command()
@click.option("--input", "input_path", type=existing_file, required=True, help="Keystroke log file")
@exit_codes
def validate(input_path: Path):
    """Parse and validate a keystroke log."""
    log = load_log(input_path)
    click.echo(f"strokes={stroke_count(log)}")
    click.echo(f"duration_ms={format_ms(log.duration_ms)}")
    logger.info("Validated %s (user=%s phase=%s)", input_path, log.user_id, log.phase.value)


@cli.command("train")
@click.option("--input", "input_path", type=existing_file, required=True, help="Genuine user's keystroke log")
@click.option("--range", "stroke_range", callback=parse_range, default=None,
              help="Training strokes as start:len (default: whole log)")
@click.option("--nu", type=float, default=None, help="Outlier-fraction bound in (0, 1]")
@click.option("--gamma", callback=parse_gamma, default=None, help="RBF width, or 'scale'")
@click.option("--out", "out_path", type=output_file, required=True, help="Model file to write")
@click.option("--features-out", type=output_file, default=None, help="Also dump the training features as CSV")
@click.pass_context
@exit_codes
def train_command(ctx, input_path, stroke_range, nu, gamma, out_path, features_out):
    """Train a one-class SVM on a stroke range of a log."""
    cfg = experiment_config(ctx).ocsvm
    overrides = {k: v for k, v in (("nu", nu), ("gamma", gamma)) if v is not None}
    if overrides:
        cfg = replace(cfg, **overrides)

    log = load_log(input_path)
    if stroke_range is not None:
        log = slice_strokes(log, *stroke_range)
    features = extract_features(log)
    if features_out is not None:
        write_text_atomic(features_out, serialize_features_csv(features))

    model = train(features, cfg, log.user_id)
    write_text_atomic(out_path, serialize_model(model))
    click.echo(f"model={out_path} support_vectors={model.n_support} converged={str(model.converged).lower()}")


@cli.command()
@click.option("--model", "model_path", type=existing_file, required=True, help="Model file")
@click.option("--input", "input_path", type=existing_file, required=True, help="Keystroke log to authenticate")
@click.option("--block-size", type=click.IntRange(min=2), default=None, help="Strokes per block")
@click.option("--threshold", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=None,
              help="Intruder fraction that rejects a block, in (0, 1)")
@click.option("--keep-partial", is_flag=True, help="Score a trailing partial block too")
@click.pass_context
@exit_codes
def auth(ctx, model_path, input_path, block_size, threshold, keep_partial):
    """Stream a log through a model; exit 0 if accepted, 1 if rejected."""
    defaults = experiment_config(ctx).auth
    cfg = AuthConfig(
        block_size=block_size if block_size is not None else defaults.block_size,
        threshold=threshold if threshold is not None else defaults.threshold,
        drop_partial_final_block=not keep_partial and defaults.drop_partial_final_block,
    )
    model = parse_model(model_path.read_bytes())
    trace = run_stream(model, load_log(input_path), cfg)
    click.echo(format_trace(trace), nl=False)
    if trace.outcome is Outcome.REJECTED:
        raise click.exceptions.Exit(EXIT_VALIDATION)


@cli.command()
@click.option("--users", type=int, default=None, help="Number of typists (at least 2)")
@click.option("--strokes", type=click.IntRange(min=1), default=None, help="Strokes per user and phase")
@click.option("--seed", type=SEED_RANGE, default=None, help="Master seed")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True,
              help="Cohort directory to write")
@click.pass_context
@exit_codes
def synth(ctx, users, strokes, seed, out_dir):
    """Generate a seeded synthetic cohort (both phases for every user)."""
    settings = experiment_config(ctx).synth
    users = users if users is not None else settings.users
    try:
        spec = default_cohort(
            users,
            seed if seed is not None else settings.seed,
            strokes if strokes is not None else settings.strokes,
        )
    except (TooFewUsers, CrowdedCohort) as e:
        raise click.BadParameter(f"{type(e).__name__} {e}", param_hint="'--users'")
    written = CohortManager(out_dir).write(spec)
    click.echo(f"wrote {len(written) - 1} logs to {out_dir}")


@cli.command("eval")
@click.option("--cohort-dir", type=click.Path(exists=True, file_okay=False, path_type=Path), required=True,
              help="Cohort directory")
@click.option("--protocol", type=click.Choice(["initial", "kfold"]), default="initial", show_default=True)
@click.option("--folds", type=click.IntRange(min=2), multiple=True,
              help="Fold count; repeat for several (default from config: 5 and 10)")
@click.option("--fold-strategy", type=click.Choice([s.value for s in FoldStrategy]), default=None,
              help="all: every fold tested once; single: one seeded fold per user")
@click.option("--seed", type=SEED_RANGE, default=None, help="Fold shuffle seed")
@click.option("--out", "out_path", type=output_file, required=True, help="Report file to write")
@click.option("--markdown", "markdown_path", type=output_file, default=None, help="Also write Markdown tables")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True,
              help="Processes used for model training")
@click.pass_context
@exit_codes
def eval_command(ctx, cohort_dir, protocol, folds, fold_strategy, seed, out_path, markdown_path, workers):
    """Run an evaluation protocol over a cohort and write the report."""
    config = experiment_config(ctx)
    cohort_logs = CohortManager(cohort_dir).load_all()

    if protocol == "initial":
        initial = config.initial
        report = run_initial(cohort_logs, initial, config.ocsvm, workers)
        findings = trend_check(report)
    else:
        base = config.kfold
        overrides = {}
        if fold_strategy is not None:
            overrides["fold_strategy"] = FoldStrategy(fold_strategy)
        if seed is not None:
            overrides["seed"] = seed
        if overrides:
            config = replace(config, kfold=replace(base, **overrides))
        protocols = config.kfold_protocols(tuple(folds) or None)
        report = run_kfold_sweep(cohort_logs, protocols, config.ocsvm, workers)
        findings = []
    findings += phase_comparison(report)

    write_text_atomic(out_path, ReportTextRenderer().render(report))
    if markdown_path is not None:
        write_text_atomic(markdown_path, MarkdownReportRenderer().render(report))

    for cell in report.cells:
        click.echo(
            f"{cell.phase},{cell.protocol},{cell.param},far={cell.far:.4f},frr={cell.frr:.4f},"
            f"avg_blocks={cell.avg_blocks:.4f}"
        )
    for finding in findings:
        status = "pass" if finding.passed else "FAIL " + ";".join(finding.offending)
        click.echo(f"check {finding.scope} {finding.metric} {finding.expectation} {status}")
    logger.info("Wrote report %s (all checks passed: %s)", out_path, all_passed(findings))


if __name__ == "__main__":
    cli()
