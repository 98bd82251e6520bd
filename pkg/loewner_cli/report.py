"""Convergence reports and their CSV / JSON files."""

import csv
import json
import platform
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version
from logging import Logger, getLogger
from pathlib import Path
from typing import NamedTuple

from loewner_cli.config import PipelineConfig, config_hash
from loewner_cli.exceptions import ReportWriteError

CSV_HEADER = ('n', 'k', 't', 'order', 'approx', 'reference', 'abs_error')


class ReportRow(NamedTuple):
    """One approximant moment against its reference."""

    n: int
    k: int
    t: float
    order: int
    approx: float
    reference: float
    abs_error: float


@dataclass
class ConvergenceReport:
    """Rows of a pipeline run plus the outcome of its checks."""

    pipeline: str
    config: PipelineConfig
    rows: list[ReportRow] = field(default_factory=list)
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def add_moments(self, n: int, k: int, t: float, approx, reference):
        """Append one row per moment order."""
        for order, (value, expected) in enumerate(zip(approx, reference)):
            self.rows.append(
                ReportRow(
                    n,
                    k,
                    t,
                    order,
                    float(value),
                    float(expected),
                    abs(float(value) - float(expected)),
                )
            )

    def max_errors(
        self, max_order: int | None = None
    ) -> dict[float, dict[int, float]]:
        """Largest abs_error per time and resolution, over orders <= max_order."""
        errors: dict[float, dict[int, float]] = {}
        for row in self.rows:
            if max_order is not None and row.order > max_order:
                continue
            by_resolution = errors.setdefault(row.t, {})
            by_resolution[row.n] = max(by_resolution.get(row.n, 0.0), row.abs_error)
        return errors


def _number(value) -> str:
    """Integers verbatim, floats with 15 significant digits."""
    return str(value) if isinstance(value, int) else f'{value:.15g}'


def _versions() -> dict[str, str]:
    versions = {'python': platform.python_version()}
    for package in ('loewner-comb', 'numpy', 'scipy', 'networkx'):
        try:
            versions[package] = version(package)
        except PackageNotFoundError:
            versions[package] = 'unknown'
    return versions


def write_csv(report: ConvergenceReport, path: Path):
    """Write the report rows with the fixed header."""
    with open(path, 'w', encoding='utf-8', newline='') as file:
        writer = csv.writer(file, lineterminator='\n')
        writer.writerow(CSV_HEADER)
        writer.writerows([_number(value) for value in row] for row in report.rows)


def read_csv(path: Path) -> list[ReportRow]:
    """Parse a report CSV back into rows."""
    with open(path, encoding='utf-8', newline='') as file:
        reader = csv.DictReader(file)
        return [
            ReportRow(
                int(entry['n']),
                int(entry['k']),
                float(entry['t']),
                int(entry['order']),
                float(entry['approx']),
                float(entry['reference']),
                float(entry['abs_error']),
            )
            for entry in reader
        ]


def emit_report(
    report: ConvergenceReport, directory: str | Path, logger: Logger = None
) -> tuple[Path, Path]:
    """Write <pipeline>.csv and the <pipeline>.json sidecar into `directory`.

    The CSV depends only on the rows, so identical configurations give
    byte-identical files. The sidecar echoes the configuration with its hash,
    the package versions and the check outcomes.

    """
    if logger is None:
        logger = getLogger('loewner-comb')

    directory = Path(directory)
    csv_path = directory / f'{report.pipeline}.csv'
    json_path = directory / f'{report.pipeline}.json'
    sidecar = {
        'pipeline': report.pipeline,
        'config': report.config,
        'config_hash': config_hash(report.config),
        'versions': _versions(),
        'checks': report.checks,
        'passed': report.passed,
        'rows': len(report.rows),
    }

    path = directory
    try:
        directory.mkdir(parents=True, exist_ok=True)
        path = csv_path
        write_csv(report, csv_path)
        path = json_path
        json_path.write_text(
            json.dumps(sidecar, indent=2, sort_keys=True) + '\n', encoding='utf-8'
        )
    except OSError as error:
        raise ReportWriteError(f'Could not write {path}: {error}') from error

    logger.info(f'Wrote {len(report.rows)} rows to {csv_path}')
    return csv_path, json_path
