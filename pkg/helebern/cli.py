"""Command-line interface for helebern.

Exit codes: 0 success / experiment passed, 1 experiment failed, 2 configuration
or precondition error, 3 runtime guard or numerical failure.
"""

from __future__ import annotations

import csv
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import click

from .errors import HelebernError, MissingKey, PreconditionError
from .models.config import RunConfig, parse_config
from .models.records import ExperimentReport
from .services import evolve, harness, io, radial_oracle
from .services.capacity import classify

logger = logging.getLogger("helebern.cli")

OUT_ENV = "HELEBERN_OUT"

config_path = click.argument("config", type=click.Path(exists=True, dir_okay=False, path_type=Path))


def _setup_logging(verbose: int) -> None:
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(
        stream=sys.stderr,
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def load_config(path: Path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def output_dir(cfg: RunConfig) -> Path:
    directory = Path(os.environ.get(OUT_ENV) or cfg.out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _finish(report: ExperimentReport, cfg: RunConfig) -> int:
    written = io.write_report(output_dir(cfg), report)
    verdict = "passed" if report.passed else "FAILED"
    click.echo(f"{report.name}: {verdict} ({written[0]})", err=True)
    for check in report.checks:
        if not check.passed:
            click.echo(
                f"  failed {check.metric}: {check.value:.6g} (threshold {check.threshold:.6g})",
                err=True,
            )
    return 0 if report.passed else 1


@click.group()
@click.version_option(package_name="helebern")
@click.option("-v", "--verbose", count=True, help="Increase log verbosity (-v info, -vv debug).")
def cli(verbose: int) -> None:
    """Level-set flows of Bernoulli type on Cartesian grids."""
    _setup_logging(verbose)


@cli.command()
@config_path
def run(config: Path) -> int:
    """Evolve the configured initial set and write diagnostics, contour and field."""
    cfg = load_config(config)
    flow = cfg.flow_config()
    outcome = evolve.run(flow)
    out = output_dir(cfg)

    io.write_diagnostics(out / "diagnostics.csv", outcome.diagnostics())
    final = outcome.final
    if cfg.out_contours:
        io.write_contour(out / "contour_final.csv", final.contour)
    if cfg.out_fields:
        mask = None
        if cfg.out_mask:
            try:
                mask = classify(final.phi, flow.source).classes
            except HelebernError as exc:
                logger.warning("mask not written", extra={"detail": exc.detail})
        io.write_field(out / "field_final.txt", final.phi, mask)

    d = final.diagnostics
    click.echo(
        f"status={outcome.status.value} t={d.t:.6g} steps={outcome.steps} "
        f"eq_radius={d.eq_radius:.6g} J={d.J:.6g}",
        err=True,
    )
    outcome.raise_for_status()
    return 0


@cli.command()
@config_path
def oracle(config: Path) -> int:
    """Radial reference values: (lambda, R*) for sweep.lambdas, else (t, R)."""
    cfg = load_config(config)
    if cfg.source_kind != "ball":
        raise PreconditionError("the radial oracle needs a ball source")
    case = radial_oracle.RadialCase(cfg.dim, cfg.source_radius, cfg.g0, cfg.law())
    out = output_dir(cfg)
    if cfg.sweep_lambdas:
        path = out / "oracle_sweep.csv"
        rows = [
            (lam, radial_oracle.steady_radius(case.with_lambda(lam))) for lam in cfg.sweep_lambdas
        ]
        header = ["lambda", "R_star"]
    else:
        if cfg.init_radius is None:
            raise MissingKey("oracle trajectories need init.radius")
        path = out / "oracle_trajectory.csv"
        rows = radial_oracle.integrate_radius(case, cfg.init_radius, cfg.t_end, cfg.oracle_dt)
        header = ["t", "R"]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([f"{a:.17g}", f"{b:.17g}"] for a, b in rows)
    click.echo(f"wrote {len(rows)} rows to {path}", err=True)
    return 0


@cli.command()
@config_path
def suite(config: Path) -> int:
    """Lemma suite at suite.h (default: the grid spacing) plus the descent check."""
    cfg = load_config(config)
    flow = cfg.flow_config()
    spacings = cfg.suite_h or (flow.grid.spacing,)
    report = ExperimentReport("suite", inputs={"config": str(config)})
    lemmas = harness.lemma_suite(spacings)
    descent = harness.descent_experiment(flow, cfg.descent_slack)
    report.extend(lemmas, "lemma.")
    report.extend(descent, "descent.")
    report.wall_clock = lemmas.wall_clock + descent.wall_clock
    return _finish(report, cfg)


@cli.command()
@click.argument("first", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("second", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def compare(first: Path, second: Path) -> int:
    """Inclusion check: FIRST (smaller lambda) must stay inside SECOND."""
    cfg1, cfg2 = load_config(first), load_config(second)
    report = harness.inclusion_experiment(cfg1.flow_config(), cfg2.flow_config(), cfg1.compare_eps)
    return _finish(report, cfg1)


@cli.command()
@config_path
def sweep(config: Path) -> int:
    """Steady sets over sweep.lambdas: monotone in lambda and continuous."""
    cfg = load_config(config)
    if not cfg.sweep_lambdas:
        raise MissingKey("sweep needs sweep.lambdas")
    case = cfg.radial_case() if cfg.is_radial() else None
    report = harness.lambda_sweep(cfg.flow_config(), cfg.sweep_lambdas, case)
    return _finish(report, cfg)


@cli.command()
@click.argument(
    "configs", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
def unique(configs: Sequence[Path]) -> int:
    """Steady set reached from the initial sets of several configs (first one is the base)."""
    parsed = [load_config(path) for path in configs]
    base = parsed[0].flow_config()
    report = harness.uniqueness_experiment(
        base, [c.initial() for c in parsed], parsed[0].uniqueness_tol
    )
    return _finish(report, parsed[0])


def main(argv: Optional[List[str]] = None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="helebern", standalone_mode=False)
    except click.exceptions.UsageError as exc:
        exc.show()
        return 2
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except HelebernError as exc:
        click.echo(f"error: {exc.detail}", err=True)
        return exc.exit_code
    except Exception as exc:  # pragma: no cover - unexpected failure
        logger.exception("unexpected error")
        click.echo(f"error: unexpected failure: {exc}", err=True)
        return 3
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
