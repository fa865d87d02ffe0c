#!/usr/bin/env python3
"""
Cascade Popularity Predictor - Main Application
"""
import functools
import itertools
import sys
from pathlib import Path
from typing import Dict, List, Optional

import click
from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from loguru import logger

# Add src to path for imports
sys.path.append(str(Path(__file__).parent / "src"))

from config.settings import PipelineConfig, load_pipeline_config, settings
from src.analysis.evaluation import bin_summary, score, spearman, split, tercile_trend
from src.analysis.features import FeatureExtractor, included_rows
from src.analysis.regression import fit_ols, usable_rows
from src.infrastructure.cascade_store import CascadeAdapter, CascadeReader
from src.infrastructure.graph_store import GraphAdapter, load_graph
from src.infrastructure.tsv_io import (
    ExclusionLog,
    coefficients_path,
    load_coefficients,
    read_feature_rows,
    save_coefficients,
    write_bin_summary,
    write_feature_rows,
    write_reports,
)
from src.models.cascade_models import BinAxis, EvalReport, FeatureRow, ModelCoefficients, ModelVariant, SynthConfig
from src.models.errors import CascadePopError, ConfigError, DataError, NoCascadesError, UndefinedCorrelationError
from src.simulation.synthgen import simulate_corpus

console = Console()

# Configure logging
logger.remove()
logger.add(
    sys.stderr,
    level=settings.log_level,
    format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)

REPORT_FILE = "eval_report.tsv"


def pipeline_options(command):
    """Flags shared by every subcommand; unset flags fall through to the config file"""
    options = [
        click.option('--config', 'config_file', type=click.Path(path_type=Path), help='Run config file (KEY=value lines, CASCADE_ prefix)'),
        click.option('--ti', 't_i', type=int, help='Indicating time in seconds after the post'),
        click.option('--tr', 't_r', type=int, help='Reference time in seconds after the post'),
        click.option('--train-frac', type=float, help='Fraction of tweets used for training'),
        click.option('--min-early', type=int, help='Minimum early popularity for a tweet to be modelled'),
        click.option('--seed', type=int, help='Seed of the train/test split and the simulator'),
        click.option('--density-pairs', type=click.Choice(['ordered', 'unordered']), help='How possible adopter links are counted'),
        click.option('--exclude-root/--include-root', default=None, help='Leave the root out of the density adopter set'),
        click.option('--density-floor', type=float, help='Stand-in for zero density under the log'),
        click.option('--variants', help='Comma-separated model variants'),
        click.option('--output-dir', '-o', type=click.Path(path_type=Path), help='Directory for outputs'),
        click.option('--clamp-to-early/--no-clamp', default=None, help='Never predict below the observed early popularity'),
        click.option('--orphan-policy', type=click.Choice(['reparent', 'drop']), help='Handling of retweets whose parent never adopted'),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def resolve_config(config_file: Optional[Path], **flags) -> PipelineConfig:
    cfg = load_pipeline_config(config_file, **flags)
    show_config(cfg)
    return cfg


def show_config(cfg: PipelineConfig) -> None:
    """Print the resolved configuration of a run"""
    config_table = Table(title="Resolved Configuration")
    config_table.add_column("Setting", style="cyan")
    config_table.add_column("Value", style="white")

    config_table.add_row("fingerprint", cfg.fingerprint())
    for key, value in cfg.feature_settings().items():
        config_table.add_row(key, str(value))
    config_table.add_row("train_frac", str(cfg.train_frac))
    config_table.add_row("seed", str(cfg.seed))
    config_table.add_row("variants", cfg.variants)
    config_table.add_row("clamp_to_early", str(cfg.clamp_to_early))
    config_table.add_row("orphan_policy", cfg.orphan_policy.value)
    config_table.add_row("output_dir", str(cfg.output_dir))
    console.print(config_table)


def handle_errors(command):
    """Report pipeline errors and exit with their code"""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except CascadePopError as e:
            logger.error(f"{command.__name__} failed: {e}")
            console.print(f"❌ Error: {e}", style="red")
            sys.exit(e.exit_code)
        except OSError as e:
            logger.error(f"{command.__name__} failed: {e}")
            console.print(f"❌ Error: {e}", style="red")
            sys.exit(DataError.exit_code)
    return wrapper


def _load_features(features_file: Optional[Path], cfg: PipelineConfig) -> List[FeatureRow]:
    path = features_file or cfg.features_path or cfg.output_dir / "features.tsv"
    rows, _ = read_feature_rows(path, expected_fingerprint=cfg.fingerprint())
    return rows


def _fit_variants(cfg: PipelineConfig, train: List[FeatureRow], failures: List[int]) -> Dict[ModelVariant, ModelCoefficients]:
    """Fit and save every requested variant. Failures are reported, their exit codes collected."""
    models = {}
    for name in cfg.variant_names:
        variant = ModelVariant(name)
        try:
            model = fit_ols(variant, usable_rows(variant, train), fingerprint=cfg.fingerprint())
        except CascadePopError as e:
            logger.error(f"Fit of {name} failed: {e}")
            console.print(f"❌ {name}: {e}", style="red")
            failures.append(e.exit_code)
            continue
        save_coefficients(model, coefficients_path(cfg.output_dir, variant), cfg.feature_settings())
        models[variant] = model
    return models


def _score_models(
    cfg: PipelineConfig,
    models: Dict[ModelVariant, ModelCoefficients],
    test: List[FeatureRow],
    failures: List[int],
) -> List[EvalReport]:
    reports = []
    for variant, model in models.items():
        try:
            reports.append(score(model, usable_rows(variant, test), cfg.seed, cfg.clamp_to_early))
        except CascadePopError as e:
            logger.error(f"Evaluation of {variant.value} failed: {e}")
            console.print(f"❌ {variant.value}: {e}", style="red")
            failures.append(e.exit_code)
    return reports


def _show_reports(reports: List[EvalReport]) -> None:
    table = Table(title="Prediction Error (ln popularity)")
    table.add_column("Model", style="cyan")
    table.add_column("RMSE", style="green")
    table.add_column("MAE", style="green")
    table.add_column("vs baseline", style="magenta")
    table.add_column("n_train", style="white")
    table.add_column("n_test", style="white")
    table.add_column("Coefficients", style="white")

    baseline = next((r.rmse for r in reports if r.variant == ModelVariant.BASELINE), None)
    for report in reports:
        improvement = "-"
        if baseline and report.variant != ModelVariant.BASELINE:
            improvement = f"{(baseline - report.rmse) / baseline:+.1%}"
        table.add_row(
            report.variant.value,
            f"{report.rmse:.4f}",
            f"{report.mae:.4f}",
            improvement,
            str(report.n_train),
            str(report.n_test),
            ", ".join(f"{c:.4f}" for c in report.coeffs),
        )
    console.print(table)


def _finish(failures: List[int]) -> None:
    if failures:
        sys.exit(max(failures))


@click.group()
@click.version_option(version="1.0.0")
def cli():
    """Cascade Popularity Predictor - early structural features of retweet cascades as predictors of final popularity."""
    pass


@cli.command('ingest-check')
@click.argument('graph_file', type=click.Path(path_type=Path))
@click.argument('cascades_file', type=click.Path(path_type=Path))
@pipeline_options
@handle_errors
def ingest_check(graph_file, cascades_file, config_file, **flags):
    """Load a follower graph and a retweet log and report ingestion statistics."""
    cfg = resolve_config(config_file, **flags)
    console.print(Panel(f"Checking inputs: {graph_file.name}, {cascades_file.name}", style="blue"))

    graph = load_graph(graph_file, cfg.graph_format, GraphAdapter.from_config(cfg))
    reader = CascadeReader(CascadeAdapter.from_config(cfg), cfg.orphan_policy, graph.id_map)
    cascades = reader.load_cascades(cascades_file)

    table = Table(title="Ingestion Statistics")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="white")
    table.add_row("nodes", str(graph.node_count))
    table.add_row("edges", str(graph.edge_count))
    table.add_row("self-loops dropped", str(graph.self_loops))
    table.add_row("duplicate edges", str(graph.duplicate_edges))
    for key, value in reader.stats.model_dump().items():
        table.add_row(key.replace("_", " "), str(value))
    console.print(table)

    if not cascades:
        raise NoCascadesError(f"no cascades in {cascades_file}")
    console.print("✅ Inputs look usable", style="green")


@cli.command()
@click.argument('graph_file', type=click.Path(path_type=Path))
@click.argument('cascades_file', type=click.Path(path_type=Path))
@click.option('--features-file', type=click.Path(path_type=Path), help='Output feature TSV (default: <output-dir>/features.tsv)')
@pipeline_options
@handle_errors
def features(graph_file, cascades_file, features_file, config_file, **flags):
    """Extract early structural features of every cascade."""
    cfg = resolve_config(config_file, **flags)
    console.print(Panel(f"Extracting features at t_i={cfg.t_i}s, t_r={cfg.t_r}s", style="blue"))

    graph = load_graph(graph_file, cfg.graph_format, GraphAdapter.from_config(cfg))
    reader = CascadeReader(CascadeAdapter.from_config(cfg), cfg.orphan_policy, graph.id_map)
    stream = reader.iter_cascades(cascades_file)
    first = next(stream, None)
    if first is None:
        raise NoCascadesError(f"no cascades in {cascades_file}")

    extractor = FeatureExtractor.from_config(graph, cfg, workers=settings.workers)
    output = features_file or cfg.features_path or cfg.output_dir / "features.tsv"
    with ExclusionLog(output.with_suffix(".exclusions.tsv"), cfg.fingerprint()) as exclusions:
        total = write_feature_rows(
            exclusions.track(extractor.iter_rows(itertools.chain([first], stream))),
            output,
            cfg.feature_settings(),
            cfg.fingerprint(),
        )

    table = Table(title="Feature Summary")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="white")
    table.add_row("cascades", str(total))
    table.add_row("included", str(total - exclusions.count))
    table.add_row("excluded", str(exclusions.count))
    table.add_row("repaired parents", str(reader.stats.repaired_parents))
    table.add_row("unknown users", str(reader.stats.unknown_users))
    console.print(table)
    console.print(f"✅ Features saved to {output}", style="green")


@cli.command()
@click.argument('features_file', type=click.Path(path_type=Path), required=False)
@pipeline_options
@handle_errors
def fit(features_file, config_file, **flags):
    """Fit the requested models on the training split."""
    cfg = resolve_config(config_file, **flags)
    console.print(Panel("Fitting popularity models", style="blue"))

    rows = included_rows(_load_features(features_file, cfg))
    train, _ = split(rows, cfg.train_frac, cfg.seed)
    failures: List[int] = []
    models = _fit_variants(cfg, train, failures)
    for variant, model in models.items():
        console.print(f"✅ {variant.value}: {', '.join(f'{c:.6f}' for c in model.coeffs)} (n_train={model.n_train})", style="green")
    _finish(failures)


@cli.command('eval')
@click.argument('features_file', type=click.Path(path_type=Path), required=False)
@pipeline_options
@handle_errors
def evaluate(features_file, config_file, **flags):
    """Score previously fitted models on the test split."""
    cfg = resolve_config(config_file, **flags)
    console.print(Panel("Evaluating popularity models", style="blue"))

    rows = included_rows(_load_features(features_file, cfg))
    _, test = split(rows, cfg.train_frac, cfg.seed)
    models = {}
    for name in cfg.variant_names:
        variant = ModelVariant(name)
        models[variant] = load_coefficients(coefficients_path(cfg.output_dir, variant), expected_fingerprint=cfg.fingerprint())

    failures: List[int] = []
    reports = _score_models(cfg, models, test, failures)
    write_reports(reports, cfg.output_dir / REPORT_FILE, cfg.fingerprint())
    _show_reports(reports)
    _finish(failures)


@cli.command('fit-eval')
@click.argument('features_file', type=click.Path(path_type=Path), required=False)
@pipeline_options
@handle_errors
def fit_eval(features_file, config_file, **flags):
    """Fit every requested model on the training split and score it on the test split."""
    cfg = resolve_config(config_file, **flags)
    console.print(Panel("Fitting and evaluating popularity models", style="blue"))

    rows = included_rows(_load_features(features_file, cfg))
    train, test = split(rows, cfg.train_frac, cfg.seed)
    failures: List[int] = []
    models = _fit_variants(cfg, train, failures)
    reports = _score_models(cfg, models, test, failures)
    write_reports(reports, cfg.output_dir / REPORT_FILE, cfg.fingerprint())
    _show_reports(reports)
    _finish(failures)


@cli.command()
@click.argument('features_file', type=click.Path(path_type=Path), required=False)
@click.option('--bins', 'n_bins', type=int, help='Number of density bins')
@pipeline_options
@handle_errors
def bins(features_file, n_bins, config_file, **flags):
    """Mean final popularity per density and depth bin, with Spearman coefficients."""
    cfg = resolve_config(config_file, n_bins=n_bins, **flags)
    console.print(Panel("Binning structural features", style="blue"))

    rows = included_rows(_load_features(features_file, cfg))
    table = Table(title="Structural Characteristics")
    table.add_column("Axis", style="cyan")
    table.add_column("Spearman", style="green")
    table.add_column("Occupied bins", style="white")
    table.add_column("Rows", style="white")
    table.add_column("First vs last tercile", style="magenta")

    for axis in (BinAxis.DENSITY, BinAxis.DEPTH):
        summary = bin_summary(rows, axis, cfg.n_bins)
        write_bin_summary(summary, cfg.output_dir / f"bins_{axis.value}.csv", cfg.fingerprint())
        try:
            rho = f"{spearman(rows, axis):.4f}"
        except UndefinedCorrelationError as e:
            logger.warning(f"Spearman on {axis.value}: {e}")
            rho = "undefined"
        trend = tercile_trend(summary)
        table.add_row(
            axis.value,
            rho,
            str(sum(1 for b in summary.bins if b.count)),
            str(summary.total),
            f"{trend[0]:.2f} -> {trend[1]:.2f}" if trend else "-",
        )
    console.print(table)
    console.print(f"✅ Bin summaries saved to {cfg.output_dir}", style="green")


@cli.command()
@click.option('--nodes', type=int, default=SynthConfig.model_fields['n_nodes'].default, help='Number of users')
@click.option('--communities', type=int, default=SynthConfig.model_fields['n_communities'].default, help='Number of planted communities')
@click.option('--p-in', type=float, default=SynthConfig.model_fields['p_in'].default, help='Follow probability within a community')
@click.option('--p-out', type=float, default=SynthConfig.model_fields['p_out'].default, help='Follow probability across communities')
@click.option('--cascades', 'cascade_count', type=int, default=SynthConfig.model_fields['cascade_count'].default, help='Number of cascades')
@click.option('--transmission-prob', type=float, default=SynthConfig.model_fields['transmission_prob'].default, help='Base retweet probability per exposure')
@click.option('--structure-boost', type=float, default=SynthConfig.model_fields['structure_boost'].default, help='Weight of community diversity on the retweet probability')
@click.option('--mean-delay', type=float, default=SynthConfig.model_fields['mean_delay_s'].default, help='Mean exposure delay in seconds')
@pipeline_options
@handle_errors
def simulate(nodes, communities, p_in, p_out, cascade_count, transmission_prob, structure_boost, mean_delay, config_file, **flags):
    """Generate a synthetic follower graph, cascades and ground-truth features."""
    cfg = resolve_config(config_file, **flags)
    try:
        synth = SynthConfig(
            n_nodes=nodes,
            n_communities=communities,
            p_in=p_in,
            p_out=p_out,
            cascade_count=cascade_count,
            transmission_prob=transmission_prob,
            structure_boost=structure_boost,
            mean_delay_s=mean_delay,
            max_sim_time=cfg.t_r,
            seed=cfg.seed,
        )
    except ValueError as e:
        raise ConfigError(f"invalid simulator configuration: {e}") from e
    console.print(Panel(f"Simulating {synth.cascade_count} cascades on {synth.n_nodes} users", style="blue"))

    paths = simulate_corpus(synth, cfg.output_dir, cfg.feature_settings(), cfg.fingerprint())
    for path in paths:
        console.print(f"✅ Wrote {path}", style="green")


if __name__ == '__main__':
    cli()
