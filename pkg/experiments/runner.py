import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from utils.config import settings
from utils.errors import NonFiniteIterateError, OutputConflictError
from utils.ledger import ledger_write
from utils.pool import fan_out
from utils.tracing import span
from . import __version__
from .handlers import HANDLERS, execute_unit
from .schemas import ExperimentConfig

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
# не влияют на результаты, поэтому не входят в хеш
_UNHASHED = {"workers", "output_dir"}


@dataclass(frozen=True)
class RunResult:
    output_dir: Path
    config_hash: str
    summary: dict[str, Any]


def resolved_config(cfg: ExperimentConfig) -> dict[str, Any]:
    return json.loads(cfg.model_dump_json(exclude={"output_dir"}))


def config_hash(cfg: ExperimentConfig) -> str:
    data = json.loads(cfg.model_dump_json(exclude=_UNHASHED))
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def output_dir_for(
    cfg: ExperimentConfig, output: Optional[Path] = None
) -> Path:
    """
    --output берётся как есть; относительный output_dir из конфига
    кладётся под settings.output_root; без него: <experiment>-<seed>.
    """
    if output is not None:
        return Path(output)
    if cfg.output_dir is None:
        return Path(settings.output_root) / f"{cfg.experiment}-{cfg.seed}"
    if cfg.output_dir.is_absolute():
        return cfg.output_dir
    return Path(settings.output_root) / cfg.output_dir


def check_output(out: Path, digest: str, force: bool = False) -> None:
    """Чужой прогон в каталоге не перезаписываем без --force."""
    manifest = out / MANIFEST
    if not manifest.exists():
        return
    try:
        previous = json.loads(manifest.read_text(encoding="utf-8"))
    except (OSError, ValueError):
        previous = {}
    if previous.get("config_hash") == digest:
        return
    if not force:
        raise OutputConflictError(path=str(out))
    logger.warning("[runner] overwriting %s (--force)", out)


def _dump(path: Path, data: Any) -> None:
    path.write_text(
        json.dumps(data, sort_keys=True, indent=2, default=str) + "\n",
        encoding="utf-8",
    )


def _summary_lines(data: Any, prefix: str = "") -> list[str]:
    if isinstance(data, dict):
        lines = []
        for key in sorted(data):
            name = f"{prefix}.{key}" if prefix else str(key)
            lines += _summary_lines(data[key], name)
        return lines
    if isinstance(data, list) and data and isinstance(data[0], dict):
        lines = []
        for i, item in enumerate(data):
            lines += _summary_lines(item, f"{prefix}[{i}]")
        return lines
    return [f"{prefix}: {data}"]


def write_summary(out: Path, cfg: ExperimentConfig, summary: dict) -> None:
    _dump(out / "summary.json", summary)
    head = [f"experiment: {cfg.experiment}", f"seed: {cfg.seed}"]
    text = "\n".join(head + _summary_lines(summary)) + "\n"
    (out / "summary.txt").write_text(text, encoding="utf-8")


def run_experiment(
    cfg: ExperimentConfig,
    output: Optional[Path] = None,
    force: bool = False,
) -> RunResult:
    """
    Полный прогон: единицы работы -> пул -> CSV и сводка. Расхождение
    итераций не обрывает запись: частичные данные пишутся, затем
    поднимается NonFiniteIterateError (код выхода 2).
    """
    handler = HANDLERS[cfg.experiment]
    digest = config_hash(cfg)
    out = output_dir_for(cfg, output)
    check_output(out, digest, force)

    details = {"seed": cfg.seed, "workers": cfg.workers, "hash": digest}
    ledger_write(cfg.experiment, "run", str(out), details, "started")
    try:
        with span(
            "experiment.run",
            experiment=cfg.experiment,
            seed=str(cfg.seed),
            workers=cfg.workers,
        ):
            units = handler.units(cfg)
            logger.info(
                "[runner] %s: %d units on %d workers",
                cfg.experiment,
                len(units),
                cfg.workers,
            )
            results = fan_out(execute_unit, units, cfg.workers)

            out.mkdir(parents=True, exist_ok=True)
            _dump(
                out / MANIFEST,
                {
                    "config": resolved_config(cfg),
                    "config_hash": digest,
                    "root_seed": cfg.seed,
                    "tool_version": __version__,
                },
            )
            summary = handler.collect(cfg, results, out)
            write_summary(out, cfg, summary)
    except Exception as e:
        ledger_write(
            cfg.experiment, "run", str(out), details, "failed", str(e)
        )
        raise

    diverged = summary.get("diverged") or []
    if diverged:
        first = diverged[0]
        n = first.get("diverged_at", first.get("n"))
        ledger_write(
            cfg.experiment,
            "run",
            str(out),
            {**details, "diverged": len(diverged)},
            "diverged",
        )
        logger.error(
            "[runner] %d runs diverged, first at %s", len(diverged), n
        )
        raise NonFiniteIterateError(n=n)

    ledger_write(cfg.experiment, "run", str(out), details, "success")
    logger.info("[runner] %s done -> %s", cfg.experiment, out)
    return RunResult(output_dir=out, config_hash=digest, summary=summary)
