"""Command-line surface: dataset testing, the six-step protocol, DGP
simulation, and power-table reproduction with machine-readable output.

Exit codes: 0 on completion regardless of statistical verdict, 2 on data
errors, 3 on configuration errors.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import click

from . import __version__
from .core import DataError, Dataset, InvalidSpec, RandomSource, Role, load_csv, save_csv
from .extests import TestConfig, run_all
from .figures import save_power_figures
from .protocol import run_multi_instrument, run_protocol
from .report import (
    emit_json,
    envelope,
    render_multi_iv,
    render_power,
    render_protocol,
    render_verdict,
)
from .simulate import SimulationSpec, generate, power_analysis, save_power_csv


class ConfigError(click.UsageError):
    exit_code = 3


def _execute(action):
    try:
        return action()
    except InvalidSpec as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(3)
    except (DataError, OSError, csv.Error) as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(2)


def _load(csv_path: str, instruments: tuple[str, ...], treatment: str, outcome: str) -> Dataset:
    roles: dict[str, Role] = {name: Role.INSTRUMENT for name in instruments}
    roles[treatment] = Role.TREATMENT
    roles[outcome] = Role.OUTCOME
    return load_csv(csv_path, roles)


def _require_roles(instruments: tuple[str, ...], treatment: str | None, outcome: str | None):
    if not instruments:
        raise ConfigError("at least one --z instrument column is required")
    if not treatment:
        raise ConfigError("--x treatment column is required")
    if not outcome:
        raise ConfigError("--y outcome column is required")


def _write_json(path: str | None, payload: dict) -> None:
    if path:
        Path(path).write_text(emit_json(payload), encoding="utf-8")


def _parse_grid(raw: str, converter, flag: str) -> list:
    values = [item.strip() for item in raw.split(",") if item.strip()]
    if not values:
        raise ConfigError(f"{flag} must list at least one value")
    try:
        return [converter(v) for v in values]
    except ValueError:
        raise ConfigError(f"could not parse {flag} value list {raw!r}") from None


@click.group()
@click.version_option(version=__version__, prog_name="ivlingam")
def main():
    """Exclusion-restriction testing for instrumental variables."""


@main.command("test")
@click.argument("csv_path", type=click.Path())
@click.option("--z", "instruments", multiple=True, help="Instrument column (exactly one).")
@click.option("--x", "treatment", default=None, help="Treatment column.")
@click.option("--y", "outcome", default=None, help="Outcome column.")
@click.option("--alpha", default=0.05, show_default=True)
@click.option("--bootstrap", default=1000, show_default=True, help="Bootstrap replicates.")
@click.option("--permutations", default=1000, show_default=True, help="Permutation replicates.")
@click.option("--seed", default=0, show_default=True)
@click.option("--json", "json_out", type=click.Path(), default=None, help="Write JSON envelope here.")
def cmd_test(csv_path, instruments, treatment, outcome, alpha, bootstrap, permutations, seed, json_out):
    """Run the five direct-effect tests on a CSV dataset."""
    _require_roles(instruments, treatment, outcome)
    if len(instruments) != 1:
        raise ConfigError("the test command takes exactly one --z; use `protocol` for several")

    def action():
        dataset = _load(csv_path, instruments, treatment, outcome)
        config = TestConfig(
            alpha=alpha, bootstrap_replicates=bootstrap, permutation_replicates=permutations
        )
        verdict = run_all(dataset, config, RandomSource(seed))
        payload = envelope(
            kind="verdict",
            body=verdict.to_dict(),
            master_seed=seed,
            config={
                "csv": str(csv_path),
                "z": list(instruments),
                "x": treatment,
                "y": outcome,
                "alpha": alpha,
                "bootstrap": bootstrap,
                "permutations": permutations,
                "seed": seed,
            },
            version=__version__,
        )
        click.echo(render_verdict(payload["body"]))
        _write_json(json_out, payload)

    _execute(action)


@main.command("protocol")
@click.argument("csv_path", type=click.Path())
@click.option("--z", "instruments", multiple=True, help="Instrument column (repeatable).")
@click.option("--x", "treatment", default=None)
@click.option("--y", "outcome", default=None)
@click.option("--alpha", default=0.05, show_default=True)
@click.option("--bootstrap", default=1000, show_default=True)
@click.option("--permutations", default=1000, show_default=True)
@click.option("--full-five", is_flag=True, help="Run all five tests per instrument (multi-IV).")
@click.option("--seed", default=0, show_default=True)
@click.option("--json", "json_out", type=click.Path(), default=None)
def cmd_protocol(csv_path, instruments, treatment, outcome, alpha, bootstrap, permutations,
                 full_five, seed, json_out):
    """Six-step validation protocol; Bonferroni-adjusted with several --z."""
    _require_roles(instruments, treatment, outcome)

    def action():
        dataset = _load(csv_path, instruments, treatment, outcome)
        config = TestConfig(
            alpha=alpha,
            bootstrap_replicates=bootstrap,
            permutation_replicates=permutations,
            multi_iv_full_five=full_five,
        )
        common = {
            "csv": str(csv_path),
            "z": list(instruments),
            "x": treatment,
            "y": outcome,
            "alpha": alpha,
            "bootstrap": bootstrap,
            "permutations": permutations,
            "full_five": full_five,
            "seed": seed,
        }
        if len(instruments) == 1:
            report = run_protocol(dataset, config, RandomSource(seed))
            payload = envelope("protocol", report.to_dict(), seed, common, __version__)
            click.echo(render_protocol(payload["body"]))
        else:
            report = run_multi_instrument(dataset, alpha, config, RandomSource(seed))
            payload = envelope("multi_iv", report.to_dict(), seed, common, __version__)
            click.echo(render_multi_iv(payload["body"]))
        _write_json(json_out, payload)

    _execute(action)


@main.command("simulate")
@click.option("--n", default=500, show_default=True)
@click.option("--alpha-zx", default=0.7, show_default=True, help="Instrument-treatment effect.")
@click.option("--alpha-xy", default=0.5, show_default=True, help="Treatment-outcome effect.")
@click.option("--alpha-zy", default=0.0, show_default=True, help="Direct-effect violation.")
@click.option("--df", default=5.0, show_default=True, help="Student-t degrees of freedom.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Output CSV path.")
def cmd_simulate(n, alpha_zx, alpha_xy, alpha_zy, df, seed, out_path):
    """Write one synthetic dataset (columns z,x,y) from the structural DGP."""
    if not out_path:
        raise ConfigError("--out path is required")

    def action():
        spec = SimulationSpec(
            n=n, alpha_zx=alpha_zx, alpha_xy=alpha_xy, alpha_zy=alpha_zy, df=df, seed=seed
        )
        dataset = generate(spec)
        save_csv(dataset, out_path)
        click.echo(f"wrote {dataset.n} rows to {out_path}")

    _execute(action)


@main.command("power")
@click.option("--grid-alpha-zy", default="0,0.1,0.2,0.3,0.5", show_default=True,
              help="Comma-separated violation sizes.")
@click.option("--grid-n", default="100,250,500,1000", show_default=True,
              help="Comma-separated sample sizes.")
@click.option("--reps", default=200, show_default=True)
@click.option("--alpha", default=0.05, show_default=True)
@click.option("--alpha-zx", default=0.7, show_default=True)
@click.option("--alpha-xy", default=0.5, show_default=True)
@click.option("--df", default=5.0, show_default=True)
@click.option("--bootstrap", default=1000, show_default=True)
@click.option("--permutations", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Long-format CSV path.")
@click.option("--json", "json_out", type=click.Path(), default=None)
@click.option("--figures", "figures_dir", type=click.Path(), default=None,
              help="Render rejection-rate figures into this directory.")
def cmd_power(grid_alpha_zy, grid_n, reps, alpha, alpha_zx, alpha_xy, df, bootstrap,
              permutations, seed, out_path, json_out, figures_dir):
    """Monte Carlo rejection-rate table over a violation-size x sample-size grid."""
    alpha_grid = _parse_grid(grid_alpha_zy, float, "--grid-alpha-zy")
    n_grid = _parse_grid(grid_n, int, "--grid-n")
    if reps < 1:
        raise ConfigError("--reps must be at least 1")

    def action():
        config = TestConfig(
            alpha=alpha, bootstrap_replicates=bootstrap, permutation_replicates=permutations
        )
        base = SimulationSpec(alpha_zx=alpha_zx, alpha_xy=alpha_xy, df=df, seed=seed)
        table = power_analysis(alpha_grid, n_grid, reps, config, base, RandomSource(seed))
        payload = envelope(
            kind="power",
            body=table.to_dict(),
            master_seed=seed,
            config={
                "grid_alpha_zy": alpha_grid,
                "grid_n": n_grid,
                "reps": reps,
                "alpha": alpha,
                "alpha_zx": alpha_zx,
                "alpha_xy": alpha_xy,
                "df": df,
                "bootstrap": bootstrap,
                "permutations": permutations,
                "seed": seed,
            },
            version=__version__,
        )
        click.echo(render_power(payload["body"]))
        if out_path:
            save_power_csv(table, out_path)
        _write_json(json_out, payload)
        if figures_dir:
            for figure in save_power_figures(payload["body"], figures_dir):
                click.echo(f"figure: {figure}")

    _execute(action)


if __name__ == "__main__":
    main()
