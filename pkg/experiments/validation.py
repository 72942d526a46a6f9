"""
Загрузка TOML-конфига эксперимента, применение флагов командной строки,
проверка через pydantic и разрешение имён ландшафтов и цепей. Ошибки
сообщаются с номером строки файла.
"""

import logging
import re
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
from pathlib import Path
from typing import Any, Optional

from pydantic import ValidationError

from landscapes.registry import make_landscape
from markov_noise.registry import make_chain
from sgd_dynamics.core import validate_schedule
from utils.errors import (
    ConfigError,
    ConfigParseError,
    LabError,
    UnknownExperimentError,
)
from .schemas import EXPERIMENTS, ExperimentConfig, ValidationReport

logger = logging.getLogger(__name__)

_HEADER = re.compile(r"^\s*(\[\[?)\s*([^\]]+?)\s*\]\]?")
_KEY = re.compile(r"^\s*([A-Za-z0-9_\-\.\"' ]+?)\s*=")


def _split_key(key: str) -> tuple[str, ...]:
    return tuple(p.strip().strip("\"'") for p in key.split("."))


def key_lines(text: str) -> dict[tuple[str, ...], int]:
    """
    Путь ключа -> номер строки (с 1). Таблицы [a.b] и массивы таблиц
    [[a]] тоже попадают в карту; у элементов массива индекс в пути.
    """
    lines: dict[tuple[str, ...], int] = {}
    arrays: dict[tuple[str, ...], int] = {}
    table: tuple[str, ...] = ()
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        m = _HEADER.match(line)
        if m:
            path = _split_key(m.group(2))
            if m.group(1) == "[[":
                idx = arrays.get(path, -1) + 1
                arrays[path] = idx
                lines.setdefault(path, no)
                path = path + (str(idx),)
            table = path
            lines.setdefault(table, no)
            continue
        m = _KEY.match(line)
        if m:
            lines.setdefault(table + _split_key(m.group(1)), no)
    return lines


def locate(loc: tuple, lines: dict[tuple[str, ...], int]) -> Optional[int]:
    """
    Строка для pydantic loc. Элементы, которых нет в файле (метки
    дискриминатора, имена вложенных моделей), пропускаются.
    """
    path: tuple[str, ...] = ()
    for item in loc:
        cand = path + (str(item),)
        if cand in lines:
            path = cand
    while path:
        if path in lines:
            return lines[path]
        path = path[:-1]
    return None


def format_errors(
    exc: ValidationError,
    lines: dict[tuple[str, ...], int],
    prefix: tuple = (),
) -> list[str]:
    out = []
    for err in exc.errors():
        loc = prefix + tuple(err["loc"])
        where = ".".join(str(p) for p in loc) or "<root>"
        line = locate(loc, lines)
        at = f"line {line}: " if line is not None else ""
        out.append(f"{at}{where}: {err['msg']}")
    return out


def load_toml(path: Path) -> tuple[dict[str, Any], str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigParseError(f"{path}: {e.strerror or e}") from e
    try:
        return tomllib.loads(text), text
    except tomllib.TOMLDecodeError as e:
        # tomllib пишет "(at line N, column M)"
        raise ConfigParseError(f"{path}: {e}") from e


def apply_overrides(
    raw: dict[str, Any],
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    output: Optional[Path] = None,
) -> dict[str, Any]:
    raw = dict(raw)
    if seed is not None:
        raw["seed"] = seed
    if workers is not None:
        raw["workers"] = workers
    if output is not None:
        raw["output_dir"] = str(output)
    return raw


def _model_for(raw: dict[str, Any]) -> type[ExperimentConfig]:
    name = raw.get("experiment")
    if not isinstance(name, str) or name not in EXPERIMENTS:
        raise UnknownExperimentError(name=name)
    return EXPERIMENTS[name]


def _build(kind: str, section, extra: Optional[dict] = None):
    params = {**section.params, **(extra or {})}
    if kind == "landscape":
        return make_landscape(section.name, params)
    return make_chain(section.name, params)


def resolve_names(cfg: ExperimentConfig, lines=None) -> list[str]:
    """
    Строит каждый упомянутый ландшафт и цепь, собирая ошибки; список
    пуст, если всё разрешилось.
    """
    lines = lines or {}
    p = cfg.params
    extra = None
    if cfg.experiment == "memorize":
        extra = {"epsilon": p.epsilon}
    errors = []
    built = {}
    for kind in ("landscape", "chain"):
        section = getattr(p, kind, None)
        if section is None:
            continue
        try:
            built[kind] = _build(
                kind, section, extra if kind == "landscape" else None
            )
        except ValidationError as e:
            errors += format_errors(e, lines, ("params", kind, "params"))
        except LabError as e:
            errors.append(_located(("params", kind, "name"), lines, e))

    L = built.get("landscape")
    if L is not None:
        # стартовые точки должны совпадать с размерностями ландшафта
        dims = {"x0": L.dim_x, "y0": L.dim_y, "x": L.dim_x, "y": L.dim_y}
        for key, dim in dims.items():
            value = getattr(p, key, None)
            if value is not None and len(value) != dim:
                errors.append(
                    _located(
                        ("params", key),
                        lines,
                        f"expected {dim} values, got {len(value)}",
                    )
                )
    return errors


def _located(loc: tuple, lines, message) -> str:
    line = locate(loc, lines)
    at = f"line {line}: " if line is not None else ""
    return f"{at}{'.'.join(loc)}: {message}"


def parse_config(
    raw: dict[str, Any], lines=None
) -> tuple[Optional[ExperimentConfig], list[str]]:
    model = _model_for(raw)
    try:
        cfg = model.model_validate(raw)
    except ValidationError as e:
        return None, format_errors(e, lines or {})
    return cfg, resolve_names(cfg, lines)


def load_config(
    path: Path,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    output: Optional[Path] = None,
) -> ExperimentConfig:
    """Конфиг, готовый к запуску; иначе ConfigError (код выхода 1)."""
    raw, text = load_toml(path)
    raw = apply_overrides(raw, seed, workers, output)
    cfg, errors = parse_config(raw, key_lines(text))
    if errors:
        raise ConfigParseError("; ".join(errors))
    return cfg


def validate_config(
    path: Path,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    output: Optional[Path] = None,
) -> ValidationReport:
    """Полная проверка без запуска; ошибки не поднимаются, а копятся."""
    report = ValidationReport()
    try:
        raw, text = load_toml(path)
        raw = apply_overrides(raw, seed, workers, output)
        report.experiment = raw.get("experiment")
        cfg, errors = parse_config(raw, key_lines(text))
    except ConfigError as e:
        report.errors.append(str(e))
        return report
    report.errors += errors
    if cfg is None:
        return report

    schedule = getattr(cfg.params, "schedule", None)
    if schedule is not None:
        rep = validate_schedule(schedule)
        report.schedules["schedule"] = rep.model_dump()
        if not rep.robbins_monro:
            report.warnings += [
                f"schedule is not Robbins-Monro: {r}" for r in rep.reasons
            ]
        elif not rep.timescale_separated:
            report.warnings += rep.reasons
    logger.info(
        "[validate] %s: %d errors, %d warnings",
        path,
        len(report.errors),
        len(report.warnings),
    )
    return report
