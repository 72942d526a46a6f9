import time, json, sqlite3, threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Any
import logging

from .config import settings

logger = logging.getLogger(__name__)

_LOCK = threading.Lock()
_INITIALIZED: set[str] = set()

_SCHEMA = """
    CREATE TABLE IF NOT EXISTS run_ledger(
        id INTEGER PRIMARY KEY AUTOINCREMENT,
        ts TEXT NOT NULL,
        experiment TEXT,
        operation TEXT,
        target TEXT,
        details TEXT,
        status TEXT,
        error_message TEXT
    )
"""


def ledger_path() -> Path:
    return Path(settings.data_dir) / "run_ledger.sqlite"


def _connect(path: Path):
    # увеличим таймаут ожидания блокировки
    return sqlite3.connect(path, timeout=30)


def _ensure_schema(path: Path):
    key = str(path)
    if key in _INITIALIZED:
        return
    with _LOCK:
        if key in _INITIALIZED:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        for attempt in range(10):
            try:
                with _connect(path) as conn:
                    conn.execute(_SCHEMA)
                    conn.commit()
                _INITIALIZED.add(key)
                return
            except sqlite3.OperationalError as e:
                if "locked" in str(e).lower():
                    time.sleep(0.3)
                    continue
                raise
        # последний раз пробуем, иначе пусть падает
        with _connect(path) as conn:
            conn.execute(_SCHEMA)
            conn.commit()
        _INITIALIZED.add(key)


def ledger_write(
    experiment: Optional[str],
    operation: str,
    target: str,
    details: Any,
    status: str,
    error_message: Optional[str] = None,
    path: Optional[Path] = None,
) -> None:
    if path is None:
        if not settings.ledger_enabled:
            return
        path = ledger_path()
    path = Path(path)
    try:
        _ensure_schema(path)
        record = (
            datetime.now(timezone.utc).isoformat(),
            experiment,
            operation,
            target,
            json.dumps(details, ensure_ascii=False, default=str),
            status,
            error_message,
        )
        with _LOCK:
            with _connect(path) as conn:
                conn.execute(
                    """
                    INSERT INTO run_ledger(ts, experiment, operation, target,
                                           details, status, error_message)
                    VALUES (?, ?, ?, ?, ?, ?, ?)
                    """,
                    record,
                )
                conn.commit()
    except sqlite3.Error as e:
        # журнал не должен ронять эксперимент
        logger.error(f"[ledger] write failed: {e}")


def ledger_read(path: Optional[Path] = None) -> list[dict]:
    path = Path(path) if path is not None else ledger_path()
    if not path.exists():
        return []
    with _connect(path) as conn:
        conn.row_factory = sqlite3.Row
        rows = conn.execute("SELECT * FROM run_ledger ORDER BY id").fetchall()
    return [dict(r) for r in rows]
