"""Command-line interface for funcpattern.

This module provides the ``funcpattern`` command. Every subcommand reads its settings from an optional config
file and command-line flags, writes the effective configuration to ``<out>/config.json``, and writes its tables
(CSV), objects (JSON) and figures (SVG) under ``<out>``.

Subcommands:
    - ingest: Read a manifest of per-recording CSV files into the canonical dataset file
    - analyze: Smooth, fit the FANOVA model, test every control-versus-group contrast and export kernels
    - classify: Train kernel scores and a classifier on a unit split and predict the held-out units
    - simulate: Run the noise-level sweep on synthetic data, or write one synthetic dataset with its truth
    - heatmap: Mean, coefficient of variation and normalized activation per group and variate
    - fixture: Write a synthetic facial action-unit corpus with its manifest

Signal Handling Notes:
    SIGINT interrupts the running computation; no partial artifact is cleaned up.

Exit Codes:
    0: Successful completion
    1: Numerical failure or unexpected runtime error
    2: Invalid input, configuration or command-line syntax
    130: Interrupted by SIGINT (Ctrl+C)

Example:
    # Build a dataset from a fixture and analyze it with the classic test
    $ funcpattern fixture data/
    $ funcpattern ingest data/manifest.csv data/ --out run/
    $ funcpattern analyze --dataset run/dataset.csv --method classic --alpha 0.1 --out run/
"""

import argparse
import logging
import signal
import sys
from collections.abc import Sequence
from pathlib import Path
from threading import Event
from types import FrameType
from typing import Any, Optional

import numpy as np

from funcpattern.analysis import Classification, GroupPatternAnalysis
from funcpattern.config import RunConfig
from funcpattern.exceptions import InputError, NumericError
from funcpattern.funcdata import (
    FunctionalDataset,
    HeatmapTable,
    heatmap_stats,
    load_dataset,
    read_dataset,
    save_dataset,
    split_units,
)
from funcpattern.output_strategies.csv_strategy import CSVTableStrategy
from funcpattern.output_strategies.json_strategy import JSONTableStrategy
from funcpattern.output_strategies.table_writer import read_json, write_json, write_table
from funcpattern.plotting import plot_f_series, plot_heatmap, plot_kernels, plot_sweep
from funcpattern.simulate import (
    GroundTruth,
    SweepReport,
    gen_dataset,
    kernel_dissimilarity,
    noise_sweep,
    write_au_fixture,
    zone_match_rate,
)

logger = logging.getLogger(__name__)

HEATMAP_STATISTICS = ("mean", "cv", "normalized")
EVALUATION_SETS = ("test", "train")


class SignalHandler:
    """Handles SIGINT so that a long computation stops with exit code 130.

    Attributes:
        sigint_received: Event that is set when a SIGINT signal is received.
        original_sigint_handler: Original SIGINT signal handler.
    """

    def __init__(self) -> None:
        self.sigint_received = Event()
        self.original_sigint_handler = signal.getsignal(signal.SIGINT)

    def handle_sigint(self, signum: int, frame: Optional[FrameType]) -> None:
        """Record the signal, restore the original handler and unwind the computation.

        Args:
            signum: The signal number.
            frame: The current stack frame.
        """
        self.sigint_received.set()
        signal.signal(signal.SIGINT, self.original_sigint_handler)
        raise KeyboardInterrupt


signal_handler = SignalHandler()


def setup_signal_handling() -> None:
    """Configure the SIGINT handler."""
    signal_handler.sigint_received.clear()
    signal.signal(signal.SIGINT, signal_handler.handle_sigint)


def setup_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.ERROR if quiet else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.getLogger("funcpattern").setLevel(level)


def _csv(path: Path, columns: Sequence[str], rows: Any) -> Path:
    return write_table(path, columns, rows, CSVTableStrategy())


def _start_run(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", config.to_dict())
    return out


def cmd_ingest(
    manifest: Path,
    data_dir: Path,
    config: RunConfig,
    variates: Optional[Sequence[str]] = None,
    variate_pattern: Optional[str] = None,
) -> FunctionalDataset:
    """Load the manifest's recordings and write ``dataset.csv`` and ``summary.json``."""
    out = _start_run(config)
    dataset = load_dataset(
        manifest,
        data_dir,
        variates=variates,
        variate_pattern=variate_pattern,
        grid_points=config.grid_points,
        control_group=config.control_group,
    )
    save_dataset(dataset, out / "dataset.csv")
    write_json(out / "summary.json", dataset.summary())
    return dataset


def _zone_rows(analysis: GroupPatternAnalysis) -> list[list[Any]]:
    return [
        [report.contrast.variate_label, report.contrast.group_label, start, stop]
        for report in analysis.reports.values()
        for start, stop in report.zones
    ]


def _fpca_rows(analysis: GroupPatternAnalysis) -> list[list[Any]]:
    rows: list[list[Any]] = []
    for variate, eig in analysis.eigen_systems().items():
        rows.extend(
            [variate, j + 1, float(value), bool(null)]
            for j, (value, null) in enumerate(zip(eig.eigenvalues, eig.null_mask))
        )
    return rows


def compare_with_truth(analysis: GroupPatternAnalysis, truth: GroundTruth) -> dict[str, Any]:
    """Kernel dissimilarity and zone matching rates of an analysis against the known truth."""
    rates = {
        report.contrast.key: zone_match_rate(report.zones, truth.zones.get(key, ()), truth.grid)
        for key, report in analysis.reports.items()
    }
    return {
        "dissimilarity": kernel_dissimilarity(analysis.kernels.effects, truth.effects, truth.grid),
        "match_rate": float(np.mean(list(rates.values()))),
        "match_rates": rates,
    }


def cmd_analyze(dataset: FunctionalDataset, config: RunConfig, truth: Optional[GroundTruth] = None) -> dict[str, Any]:
    """Run the analysis pipeline and write the model, kernels, test reports, scores and figures.

    Returns:
        The analysis summary written to ``analysis.json``.
    """
    out = _start_run(config)
    analysis = GroupPatternAnalysis(dataset, config.analysis_settings())
    write_json(out / "basis.json", analysis.basis.to_dict())
    _csv(out / "coefficients.csv", analysis.coefficients.columns(), analysis.coefficients.table_rows())
    write_json(out / "model.json", analysis.model.to_dict())
    _csv(out / "kernels.csv", analysis.kernels.columns(), analysis.kernels.rows())
    for report in analysis.reports.values():
        key = report.contrast.key
        write_json(out / "reports" / f"{key}.json", report.to_dict())
        _csv(out / "reports" / f"f_{key}.csv", report.columns(), report.rows())
        plot_f_series(report, out / "plots" / f"f_{key}.svg")
    zone_columns = ["variate", "group", "start", "stop"]
    _csv(out / "zones.csv", zone_columns, _zone_rows(analysis))
    write_table(out / "zones.json", zone_columns, _zone_rows(analysis), JSONTableStrategy())
    write_json(out / "kernel_set.json", analysis.kernel_set.to_dict())
    for d, variate in enumerate(dataset.variate_labels):
        zones = [zone for cell in analysis.kernel_set.intervals[d][1:] for zone in cell]
        plot_kernels(analysis.kernels, d, zones, out / "plots" / f"kernels_{variate}.svg")
    _csv(out / "fpca.csv", ["variate", "component", "eigenvalue", "null"], _fpca_rows(analysis))
    table = analysis.scores()
    _csv(out / "scores.csv", table.columns(), table.rows())

    summary: dict[str, Any] = {
        "method": analysis.settings.method,
        "alpha": analysis.settings.alpha,
        "contrasts": {
            report.contrast.key: {
                "zones": [list(zone) for zone in report.zones],
                "resolution_warning": report.resolution_warning,
            }
            for report in analysis.reports.values()
        },
    }
    if truth is not None:
        summary["truth"] = compare_with_truth(analysis, truth)
        write_json(out / "dissimilarity.json", summary["truth"])
    write_json(out / "analysis.json", summary)
    return summary


def cmd_classify(dataset: FunctionalDataset, config: RunConfig, evaluate_on: str = "test") -> Classification:
    """Train on a unit split and write predictions, the confusion matrix and the trained weights.

    An empty test split gives empty predictions.
    """
    out = _start_run(config)
    train, test = split_units(dataset, config.test_fraction, config.seed)
    analysis = GroupPatternAnalysis(dataset.subset_units(train), config.analysis_settings())
    trained = analysis.fit_classifier()
    write_json(out / "weights.json", trained.weights.to_dict())
    write_json(out / "classifier.json", trained.model.to_dict())

    if evaluate_on == "train":
        classification = analysis.classify(trained)
    else:
        # Scores of the full dataset, restricted to the held-out positions of every group.
        everything = analysis.classify(trained, dataset)
        classification = everything.select([g * dataset.K + k for g in range(dataset.G + 1) for k in test.tolist()])
    _csv(out / "predictions.csv", ["sample", "true", "predicted"], classification.rows())
    _csv(out / "confusion.csv", ["true", "predicted", "count"], classification.confusion_rows())
    write_json(out / "classification.json", classification.to_dict())
    return classification


def cmd_simulate(config: RunConfig, write_example: bool = False) -> Optional[SweepReport]:
    """Run the noise sweep, or with ``write_example`` write one simulated dataset and its ground truth."""
    out = _start_run(config)
    simulation = config.simulation_config()
    if write_example:
        dataset, truth = gen_dataset(simulation)
        save_dataset(dataset, out / "dataset.csv")
        write_json(out / "truth.json", truth.to_dict())
        return None

    report = noise_sweep(
        simulation,
        config.sd_levels,
        config.n_reps,
        config.sweep_methods,
        config.analysis_settings(),
        k_levels=config.k_levels,
        holdout=config.holdout,
        n_jobs=config.n_jobs,
    )
    report.write_csv(out / "sweep.csv")
    _csv(out / "sweep_summary.csv", report.summary_columns(), report.summary_rows())
    write_json(out / "sweep.json", report.to_dict())
    for measure in SweepReport.MEASURES:
        plot_sweep(report, measure, out / "plots" / f"sweep_{measure}.svg")
    return report


def cmd_heatmap(dataset: FunctionalDataset, config: RunConfig) -> HeatmapTable:
    """Write the heatmap statistics table and one figure per statistic."""
    out = _start_run(config)
    table = heatmap_stats(dataset, config.neutral or dataset.control_group, config.n_bins)
    _csv(out / "heatmap.csv", ["group", "variate", "mean", "cv", "normalized"], table.rows())
    if config.n_bins is not None:
        _csv(out / "heatmap_bins.csv", ["group", "variate", "bin", "mean", "cv"], table.bin_rows())
    write_json(out / "heatmap.json", table.to_dict())
    for statistic in HEATMAP_STATISTICS:
        plot_heatmap(table, statistic, out / "plots" / f"heatmap_{statistic}.svg")
    return table


def create_parser() -> argparse.ArgumentParser:
    """Create and configure the command-line argument parser.

    Returns:
        An ArgumentParser instance configured with funcpattern's subcommands and options.
    """
    description = """
    funcpattern: group-level mean pattern detection in noisy longitudinal curves.

    Curves of several variates are recorded for K units in a control group and G treatment groups. The tool
    smooths every curve in a B-spline basis, fits a functional ANOVA model with zero-sum group effects, finds
    the time zones where each group differs from the control (F-distribution or permutation critical values),
    and classifies new curves by scoring them against the group effects inside those zones.
    """

    epilog = """
    Examples:
      # Write a synthetic facial action-unit corpus and ingest it
      funcpattern fixture data/
      funcpattern ingest data/manifest.csv data/ --out run/

      # Classic F test at alpha 0.1
      funcpattern analyze --dataset run/dataset.csv --method classic --alpha 0.1 --out run/

      # Permutation test with 2000 replicates on 4 workers, settings from a file
      funcpattern analyze --dataset run/dataset.csv --config run.toml --n-perm 2000 --n-jobs 4

      # Train on 70% of the units and predict the rest
      funcpattern classify --dataset run/dataset.csv --test-fraction 0.3 --out run/classify

      # Noise-level sweep on simulated data
      funcpattern simulate --n-reps 20 --out sweep/

      # Heatmaps relative to the neutral group, with 5 time bins
      funcpattern heatmap --dataset run/dataset.csv --neutral neutral --n-bins 5
    """

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, metavar="FILE", help="JSON or TOML file with run settings")
    common.add_argument("--seed", type=int, help="Seed of every random stream (default: 0)")
    common.add_argument("--out", metavar="DIR", help="Output directory (default: out)")
    common.add_argument("-v", "--verbose", action="store_true", help="Log debug messages")
    common.add_argument("-q", "--quiet", action="store_true", help="Log errors only")
    common.add_argument("--method", choices=["classic", "permutation"], help="Test method (default: permutation)")
    common.add_argument("--alpha", type=float, help="Significance level (default: 0.1)")
    common.add_argument("--n-perm", type=int, help="Permutation replicates per contrast (default: 1000)")
    common.add_argument("--f-mode", choices=["sup", "pointwise"], help="Permutation critical values (default: sup)")
    common.add_argument("--raw-f", action="store_true", default=None, help="Test the raw curves, not smoothed ones")
    common.add_argument("--min-zone-points", type=int, help="Shortest significant zone in grid points (default: 1)")
    common.add_argument("--basis-q", type=int, help="Number of B-spline basis functions (default: 20)")
    common.add_argument("--ridge", type=float, help="Smoothing penalty weight (default: 1e-6)")
    common.add_argument("--n-jobs", type=int, help="Worker processes (default: 1)")

    parser = argparse.ArgumentParser(
        prog="funcpattern",
        description=description,
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    ingest = commands.add_parser("ingest", parents=[common], help="Build the canonical dataset file")
    ingest.add_argument("manifest", type=Path, help="CSV with columns file,unit,group")
    ingest.add_argument("data_dir", type=Path, help="Directory the manifest's file paths are relative to")
    ingest.add_argument("--variates", help="Comma-separated variate columns to keep (default: all)")
    ingest.add_argument("--variate-pattern", metavar="REGEX", help="Keep variate columns matching REGEX")
    ingest.add_argument("--grid-points", type=int, help="Common grid length (default: shortest series)")
    ingest.add_argument("--control-group", help="Control group (default: first group of the manifest)")

    analyze = commands.add_parser("analyze", parents=[common], help="Fit, test and export kernels")
    analyze.add_argument("--dataset", type=Path, required=True, help="Canonical dataset file")
    analyze.add_argument("--truth", type=Path, help="Ground truth JSON written by 'simulate --write-example'")

    classify = commands.add_parser("classify", parents=[common], help="Train and evaluate the classifier")
    classify.add_argument("--dataset", type=Path, required=True, help="Canonical dataset file")
    classify.add_argument("--test-fraction", type=float, help="Share of units held out (default: 0.3)")
    classify.add_argument("--evaluate-on", choices=EVALUATION_SETS, default="test", help="Units to predict")

    simulate = commands.add_parser("simulate", parents=[common], help="Noise-level sweep on synthetic data")
    simulate.add_argument("--sd-levels", type=float, nargs="+", metavar="SD", help="Noise levels")
    simulate.add_argument("--n-reps", type=int, help="Replicates per noise level (default: 20)")
    simulate.add_argument("--k-levels", type=int, nargs="+", metavar="K", help="Also sweep units per group")
    simulate.add_argument("--holdout", action="store_true", default=None, help="Classify a fresh replicate")
    simulate.add_argument("--write-example", action="store_true", help="Write one dataset and its truth instead")

    heatmap = commands.add_parser("heatmap", parents=[common], help="Heatmap statistics per group and variate")
    heatmap.add_argument("--dataset", type=Path, required=True, help="Canonical dataset file")
    heatmap.add_argument("--neutral", help="Reference group (default: control group)")
    heatmap.add_argument("--n-bins", type=int, help="Also report statistics per time bin")

    fixture = commands.add_parser("fixture", parents=[common], help="Write a synthetic action-unit corpus")
    fixture.add_argument("directory", type=Path, help="Directory to write the corpus into")
    fixture.add_argument("--n-actors", type=int, default=24, help="Units per emotion (default: 24)")

    return parser


OVERRIDES = (
    "seed",
    "out",
    "method",
    "alpha",
    "n_perm",
    "f_mode",
    "raw_f",
    "min_zone_points",
    "basis_q",
    "ridge",
    "n_jobs",
    "test_fraction",
    "neutral",
    "n_bins",
    "sd_levels",
    "n_reps",
    "k_levels",
    "holdout",
    "grid_points",
    "control_group",
)


def build_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then every flag given on the command line."""
    config = RunConfig.load(args.config) if args.config else RunConfig()
    return config.with_overrides(**{name: getattr(args, name) for name in OVERRIDES if hasattr(args, name)})


def run(args: argparse.Namespace) -> None:
    """Dispatch a parsed command line to its subcommand."""
    config = build_config(args)
    if args.command == "ingest":
        variates = [v.strip() for v in args.variates.split(",")] if args.variates else None
        dataset = cmd_ingest(args.manifest, args.data_dir, config, variates, args.variate_pattern)
        summary = dataset.summary()
        print(f"G={summary['G']} D={summary['D']} K={summary['K']} points={summary['n_points']}")
    elif args.command == "analyze":
        truth = GroundTruth.from_dict(read_json(args.truth)) if args.truth else None
        summary = cmd_analyze(read_dataset(args.dataset), config, truth)
        print(f"method={summary['method']} alpha={summary['alpha']:g}")
        for key, contrast in summary["contrasts"].items():
            zones = " ".join(f"[{start:.4g}, {stop:.4g}]" for start, stop in contrast["zones"]) or "none"
            print(f"{key}: {zones}")
        if truth is not None:
            print(f"dissimilarity={summary['truth']['dissimilarity']:.6g}")
    elif args.command == "classify":
        classification = cmd_classify(read_dataset(args.dataset), config, args.evaluate_on)
        accuracy = classification.accuracy
        shown = "n/a" if accuracy is None else f"{accuracy:.4f}"
        print(f"samples={len(classification.predicted)} accuracy={shown}")
    elif args.command == "simulate":
        report = cmd_simulate(config, args.write_example)
        for entry in report.summary() if report else ():
            print(
                f"sd={entry['sd']:g} method={entry['method']} dissimilarity={entry['dissimilarity']:.4f} "
                f"match_rate={entry['match_rate']:.4f} accuracy={entry['accuracy']:.4f}"
            )
    elif args.command == "heatmap":
        table = cmd_heatmap(read_dataset(args.dataset), config)
        print(f"cells={len(table.cells)} neutral={table.neutral_group}")
    elif args.command == "fixture":
        _start_run(config)
        print(write_au_fixture(args.directory, seed=config.seed, n_actors=args.n_actors))


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Main entry point for the funcpattern command-line interface.

    Exit codes:
        0: Successful completion
        1: Numerical failure or unexpected runtime error
        2: Invalid input, configuration or command-line syntax
        130: Interrupted by SIGINT (Ctrl+C)
    """
    parser = create_parser()
    # argparse calls sys.exit(2) for argument errors
    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.quiet)
    setup_signal_handling()

    try:
        run(args)
    except KeyboardInterrupt:
        print("Error: interrupted", file=sys.stderr)
        sys.exit(130)
    except InputError as e:
        print(f"Error: {str(e)}", file=sys.stderr)
        sys.exit(2)
    except NumericError as e:
        print(f"Error: {str(e)}", file=sys.stderr)
        sys.exit(1)
    except Exception as e:
        logger.debug("Unexpected failure", exc_info=True)
        print(f"Error: {str(e)}", file=sys.stderr)
        sys.exit(1)
    finally:
        signal.signal(signal.SIGINT, signal_handler.original_sigint_handler)


if __name__ == "__main__":
    main()
