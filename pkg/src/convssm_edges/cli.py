"""
Command Line Interface
Main entry point for the convssm-edges tool
"""

import functools
import logging
import sys
from pathlib import Path

import click
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from .accelerator.crossbar import CrossbarConfig, noise_study
from .accelerator.throughput import (
    REFERENCE_TIMINGS,
    ThroughputModel,
    estimate_throughput,
    hardware_summary,
    leave_one_out_errors,
)
from .config import FLIP_CHOICES, apply_overrides, load_config, parse_float_list
from .metrics import MetricsReport
from .orchestrator import EdgeDetectionOrchestrator
from .postprocess import NORMALIZE_MODES
from .reports import write_csv
from .sweeps import WEIGHT_PROTOCOLS

console = Console()


def setup_logging(verbose: bool = False):
    """Setup logging configuration"""
    level = logging.DEBUG if verbose else logging.INFO

    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=console, rich_tracebacks=True)]
    )


def pipeline_options(func):
    """Options shared by every command that runs the pipeline"""
    options = [
        click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
                     help='YAML or JSON pipeline config'),
        click.option('--high', type=float, help='High hysteresis threshold (0-255)'),
        click.option('--low', type=float, help='Low hysteresis threshold (default 0.95 x high)'),
        click.option('--weights', help='Recurrence weights a,b,c,d'),
        click.option('--flips', type=click.Choice(sorted(FLIP_CHOICES)), help='Flipped scans to fuse'),
        click.option('--erosion', type=click.Choice(['on', 'off']), help='Wind Erosion post-processing'),
        click.option('--erosion-params',
                     help='long_ratio,min_length,max_cuts,cut_ratio,boundary_band'),
        click.option('--crossbar', type=click.Choice(['on', 'off']), help='Route convolutions through the crossbar'),
        click.option('--noise', type=float, help='Crossbar readout noise (fraction of full scale)'),
        click.option('--samples', type=int, help='Crossbar samples averaged per pulse'),
        click.option('--seed', type=int, help='Crossbar noise seed'),
        click.option('--normalize', type=click.Choice(NORMALIZE_MODES), help='Magnitude normalization'),
        click.option('--out', 'out_dir', type=click.Path(file_okay=False), help='Output directory'),
        click.option('--workers', type=int, envvar='CONVSSM_EDGES_WORKERS',
                     help='Worker processes (or set CONVSSM_EDGES_WORKERS env var)'),
        click.option('--cache-dir', type=click.Path(file_okay=False), envvar='CONVSSM_EDGES_CACHE_DIR',
                     help='Gradient cache directory (or set CONVSSM_EDGES_CACHE_DIR env var)'),
        click.option('--no-cache', is_flag=True, help='Do not read or write the gradient cache'),
        click.option('--verbose', is_flag=True, help='Verbose output'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def run_command(func):
    """Logging setup plus the interrupt/error exits every command shares"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        verbose = kwargs.get('verbose', False)
        setup_logging(verbose)
        try:
            return func(*args, **kwargs)
        except KeyboardInterrupt:
            console.print("\n[yellow]⚠ Interrupted by user[/yellow]")
            sys.exit(130)
        except Exception as e:
            console.print(f"\n[red]Error: {e}[/red]")
            if verbose:
                console.print_exception()
            sys.exit(1)
    return wrapper


def build_orchestrator(options) -> EdgeDetectionOrchestrator:
    config = load_config(options.pop('config_path', None))
    config = apply_overrides(config, {k: options.get(k) for k in (
        'high', 'low', 'weights', 'flips', 'erosion', 'erosion_params', 'crossbar',
        'noise', 'samples', 'seed', 'normalize', 'out_dir', 'workers',
    )})
    return EdgeDetectionOrchestrator(config, use_cache=not options.get('no_cache'),
                                     cache_dir=options.get('cache_dir'))


def display_report(report: MetricsReport, title: str = "Metrics"):
    table = Table(title=title)
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="green")

    for name, value in report.to_dict().items():
        if name == 'per_image' or value is None:
            continue
        table.add_row(name.upper(), f"{value:.4f}" if isinstance(value, float) else str(value))

    console.print()
    console.print(table)


def display_written(written):
    console.print()
    for name, path in written.items():
        console.print(f"[green]✓[/green] {name}: {path}")


@click.group()
@click.version_option(version='0.1.0')
def main():
    """
    convssm-edges - Convolutional state-space edge detection

    Scan-based gradient extraction, Canny-style post-processing,
    Wind Erosion cleanup, dataset metrics and a memristor crossbar model.
    """
    load_dotenv()


@main.command()
@click.argument('dataset', type=click.Path(exists=True, file_okay=False))
@pipeline_options
@run_command
def detect(dataset, **options):
    """
    Detect edges in every image of DATASET

    DATASET is a folder with images/ and optionally gt/ (binary maps
    named after their image). With ground truth, per-image metrics are
    reported too.

    Examples:

      convssm-edges detect data/bsds --out results/

      convssm-edges detect data/bsds --flips hv --erosion off --workers 4
    """
    outcome = build_orchestrator(options).detect(dataset)
    display_report(outcome['report'])
    display_written(outcome['written'])


@main.command('sweep-thresholds')
@click.argument('dataset', type=click.Path(exists=True, file_okay=False))
@pipeline_options
@run_command
def sweep_thresholds(dataset, **options):
    """
    Sweep the high threshold from 0 to 255 (low = 0.95 x high)

    Wind Erosion is not applied during the sweep. Writes sweep.csv and
    ODS/OIS to metrics.json.
    """
    outcome = build_orchestrator(options).sweep_thresholds(dataset)
    display_report(outcome['report'], title="Threshold Sweep")
    display_written(outcome['written'])


@main.command('sweep-weights')
@click.argument('dataset', type=click.Path(exists=True, file_okay=False))
@click.option('--weight-protocol', type=click.Choice(WEIGHT_PROTOCOLS), default='coordinate',
              help='coordinate (default), full grid, or per-image optimum then per-weight mode (consensus, alias paper)')
@pipeline_options
@run_command
def sweep_weights(dataset, weight_protocol, **options):
    """Search recurrence weights a,b,c,d over 0.0..2.0 in steps of 0.1"""
    outcome = build_orchestrator(options).sweep_weights(dataset, weight_protocol)

    result = outcome['weights']
    if result.per_image:
        table = Table(title="Per-image optimum")
        table.add_column("Image", style="cyan")
        for name in ('a', 'b', 'c', 'd', 'f'):
            table.add_column(name.upper(), style="green")
        for stem, row in result.per_image.items():
            table.add_row(stem, *[f"{row[name]:.4g}" for name in ('a', 'b', 'c', 'd', 'f')])
        console.print()
        console.print(table)
    display_written(outcome['written'])


@main.command('eval')
@click.argument('pred_dir', type=click.Path(exists=True, file_okay=False))
@click.argument('dataset', type=click.Path(exists=True, file_okay=False))
@pipeline_options
@run_command
def evaluate(pred_dir, dataset, **options):
    """
    Score edge maps in PRED_DIR against the ground truth of DATASET

    PRED_DIR holds <stem>.png maps, or is a previous output directory
    with an edges/ folder.
    """
    outcome = build_orchestrator(options).evaluate(pred_dir, dataset)
    display_report(outcome['report'], title="Evaluation")
    display_written(outcome['written'])


@main.command()
@click.argument('dataset', type=click.Path(exists=True, file_okay=False))
@pipeline_options
@run_command
def ablate(dataset, **options):
    """Compare flip variants and fixed-convolution kernels on DATASET"""
    outcome = build_orchestrator(options).ablate(dataset)

    rows = outcome['rows']
    table = Table(title="Ablation")
    table.add_column("Variant", style="cyan")
    columns = [c for c in ('acl', 'thickness', 'f', 'ssim', 'ac') if c in rows[0]]
    for name in columns:
        table.add_column(name.upper(), style="green")
    for row in rows:
        table.add_row(row['variant'], *[f"{row[c]:.4f}" for c in columns])

    console.print()
    console.print(table)
    display_written(outcome['written'])


@main.command('crossbar-bench')
@click.option('--noise-levels', default='0,0.02,0.04,0.06,0.08,0.1,0.2,0.3',
              help='Comma-separated noise fractions')
@click.option('--samples', 'samples_list', default='1,144', help='Comma-separated samples per pulse')
@click.option('--trials', type=int, default=1000, help='Monte-Carlo trials per cell (>= 100)')
@click.option('--seed', type=int, default=0, help='Noise seed')
@click.option('--no-quantize', is_flag=True, help='Ideal conductances')
@click.option('--csv', 'csv_path', type=click.Path(dir_okay=False), help='Write rows to a CSV file')
@click.option('--verbose', is_flag=True, help='Verbose output')
@run_command
def crossbar_bench(noise_levels, samples_list, trials, seed, no_quantize, csv_path, verbose):
    """Readout error of the crossbar model across noise and sampling"""
    cfg = CrossbarConfig(quantize=not no_quantize, rng_seed=seed)
    noises = parse_float_list(noise_levels, name='noise level')
    samples = [int(s) for s in parse_float_list(samples_list, name='sample count')]

    with console.status("[bold green]Running Monte-Carlo readout trials..."):
        rows = noise_study(cfg, noises, samples, trials)

    table = Table(title=f"Readout error ({trials} trials)")
    table.add_column("Noise %", style="cyan")
    table.add_column("Samples", style="cyan")
    table.add_column("Mean %", style="green")
    table.add_column("Max %", style="yellow")
    for row in rows:
        table.add_row(f"{row['noise_pct']:g}", str(row['samples']),
                      f"{row['mean_error_pct']:.4f}", f"{row['max_error_pct']:.4f}")
    console.print(table)

    if csv_path:
        write_csv(Path(csv_path), rows, list(rows[0]))
        console.print(f"[green]✓[/green] Rows saved to: {csv_path}")


def _parse_size(text: str) -> int:
    try:
        width, height = (int(v) for v in text.lower().split('x'))
    except ValueError:
        raise click.BadParameter(f"Expected WIDTHxHEIGHT, got {text!r}")
    return width * height


@main.command()
@click.option('--pixels', type=int, multiple=True, help='Pixels per frame to estimate')
@click.option('--size', 'sizes', multiple=True, help='Frame size WIDTHxHEIGHT to estimate')
@click.option('--loo', is_flag=True, help='Show leave-one-out interpolation error')
@click.option('--csv', 'csv_path', type=click.Path(dir_okay=False), help='Write estimates to a CSV file')
@click.option('--verbose', is_flag=True, help='Verbose output')
@run_command
def throughput(pixels, sizes, loo, csv_path, verbose):
    """Frame time of the crossbar accelerator by image size"""
    model = ThroughputModel()

    table = Table(title="Reference timings")
    table.add_column("Resolution", style="cyan")
    table.add_column("Pixels", style="cyan")
    table.add_column("Seconds", style="green")
    table.add_column("FPS", style="green")
    for label, count, seconds, fps in REFERENCE_TIMINGS:
        table.add_row(label, str(count), f"{seconds:g}", f"{fps:g}")
    console.print(table)

    requested = list(pixels) + [_parse_size(s) for s in sizes]
    rows = []
    for count in requested:
        seconds, fps = estimate_throughput(count, model)
        rows.append({'pixels': count, 'seconds': seconds, 'fps': fps})
        console.print(f"[green]✓[/green] {count} pixels: {seconds:.5f} s/frame ({fps:.1f} FPS)")

    if loo:
        for row in leave_one_out_errors(model):
            console.print(f"  withheld {row['pixels']}: {100 * row['rel_error']:.2f}% error")

    summary = hardware_summary(model)
    console.print(f"\nHardware: {summary['crossbars']} crossbars x {summary['memristors_per_crossbar']} memristors "
                  f"= {summary['total_memristors']}, sampling window {summary['sampling_window_seconds']:g} s")

    if csv_path and rows:
        write_csv(Path(csv_path), rows, ['pixels', 'seconds', 'fps'])
        console.print(f"[green]✓[/green] Estimates saved to: {csv_path}")


@main.group()
def cache():
    """Manage the gradient cache"""
    pass


@cache.command('stats')
@click.option('--cache-dir', type=click.Path(file_okay=False), envvar='CONVSSM_EDGES_CACHE_DIR',
              help='Gradient cache directory')
def cache_stats(cache_dir):
    """Show cache statistics"""
    from .cache import GradientCache

    c = GradientCache(cache_dir)
    stats = c.get_cache_stats()

    console.print("\n[bold cyan]Cache Statistics[/bold cyan]\n")
    console.print(f"Gradient fields cached: {stats['gradients']}")
    console.print(f"Size: {stats['size_bytes'] / 1024:.1f} KiB")
    console.print(f"Cache directory: {stats['cache_dir']}\n")


@cache.command('clear')
@click.option('--cache-dir', type=click.Path(file_okay=False), envvar='CONVSSM_EDGES_CACHE_DIR',
              help='Gradient cache directory')
@click.confirmation_option(prompt='Are you sure you want to clear the cache?')
def cache_clear(cache_dir):
    """Clear cache"""
    from .cache import GradientCache

    GradientCache(cache_dir).clear_cache()
    console.print("[green]✓[/green] Gradient cache cleared")


if __name__ == '__main__':
    main()
