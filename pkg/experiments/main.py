import logging
from pathlib import Path

import click

from utils.config import settings
from utils.errors import LabError
from utils.tracing import setup_tracing, shutdown_tracing
from . import __version__
from .runner import run_experiment
from .validation import load_config, validate_config

logger = logging.getLogger(__name__)

_CONFIG = click.Path(exists=True, dir_okay=False, path_type=Path)


def _overrides(f):
    f = click.option(
        "--output",
        type=click.Path(file_okay=False, path_type=Path),
        default=None,
        help="Каталог результатов (вместо output_dir из конфига).",
    )(f)
    f = click.option(
        "--workers", type=click.IntRange(min=1), default=None
    )(f)
    f = click.option("--seed", type=click.IntRange(min=0), default=None)(f)
    return f


@click.group()
@click.version_option(__version__, prog_name="collapse-lab")
def cli():
    """Лаборатория: коллапс генеративных цепочек и двухмасштабный SGD."""
    logging.basicConfig(level=settings.log_level)


@cli.command()
@click.argument("config", type=_CONFIG)
@_overrides
@click.option(
    "--force", is_flag=True, help="Перезаписать чужой прогон в каталоге."
)
def run(config, seed, workers, output, force):
    """Запустить эксперимент из CONFIG."""
    setup_tracing()
    try:
        cfg = load_config(config, seed=seed, workers=workers, output=output)
        result = run_experiment(cfg, output=output, force=force)
    except LabError as e:
        click.echo(f"error [{e.code}]: {e}", err=True)
        raise SystemExit(e.exit_code)
    except Exception as e:
        # всё, что не LabError, считается сбоем счёта, а не конфига
        logger.exception("[cli] run failed: %s", config)
        click.echo(f"error [internal]: {type(e).__name__}: {e}", err=True)
        raise SystemExit(2)
    finally:
        shutdown_tracing()
    click.echo(f"{result.output_dir}")
    click.echo(f"config hash: {result.config_hash}")


@cli.command()
@click.argument("config", type=_CONFIG)
@_overrides
def validate(config, seed, workers, output):
    """Проверить CONFIG без запуска."""
    report = validate_config(config, seed=seed, workers=workers, output=output)
    for line in report.errors:
        click.echo(f"error: {line}", err=True)
    for line in report.warnings:
        click.echo(f"warning: {line}")
    for name, rep in report.schedules.items():
        click.echo(
            f"{name}: robbins_monro={rep['robbins_monro']} "
            f"timescale_separated={rep['timescale_separated']}"
        )
    if not report.ok:
        raise SystemExit(1)
    click.echo(f"ok: {report.experiment}")


if __name__ == "__main__":
    cli()
