import numpy as np
import pytest

from utils.csvio import fmt, read_csv, write_csv
from utils.errors import (
    ConfigError,
    LabError,
    NonFiniteIterateError,
    OutputConflictError,
    UnknownNameError,
    t,
)
from utils.ledger import ledger_read, ledger_write
from utils.pool import fan_out
from utils.seeding import make_rng, spawn_rngs, spawn_sequences
from utils.tracing import setup_tracing, span


def _square(unit):
    return {"run_id": unit["run_id"], "value": unit["run_id"] ** 2}


# ---------- errors ----------


def test_messages_and_exit_codes():
    assert t("unknown_name", kind="chain", name="x") == "Unknown chain: x"
    assert t("no_such_code") == "no_such_code"
    # недостающие поля не роняют форматирование
    assert t("unknown_name") == "Unknown {kind}: {name}"
    assert LabError.exit_code == 2
    assert issubclass(OutputConflictError, ConfigError)
    assert OutputConflictError(path="p").exit_code == 1


def test_unknown_name_is_a_key_error_with_plain_message():
    e = UnknownNameError(kind="landscape", name="nope")
    assert isinstance(e, KeyError)
    assert str(e) == "Unknown landscape: nope"


def test_non_finite_iterate_keeps_partial_record():
    e = NonFiniteIterateError(n=5, record="partial")
    assert e.fields == {"n": 5}
    assert e.record == "partial"
    assert str(e) == "Iterate diverged at step 5"


# ---------- csv ----------


def test_fmt_is_stable():
    assert fmt(None) == ""
    assert fmt(True) == "true" and fmt(np.bool_(False)) == "false"
    assert fmt(np.int64(3)) == "3"
    assert fmt(0.1) == "0.1"
    assert fmt(np.float64(1 / 3)) == repr(1 / 3)


def test_csv_round_trip(tmp_path):
    path = write_csv(
        tmp_path / "sub" / "t.csv", ["a", "b"], [[1, 0.5], [2, None]]
    )
    header, rows = read_csv(path)
    assert header == ["a", "b"]
    assert rows == [["1", "0.5"], ["2", ""]]
    assert path.read_bytes().endswith(b"2,\n")


# ---------- seeding / pool ----------


def test_spawned_streams_are_reproducible_and_distinct():
    a = [r.random() for r in spawn_rngs(42, 3)]
    b = [r.random() for r in spawn_rngs(42, 3)]
    assert a == b
    assert len(set(a)) == 3
    seq = spawn_sequences(42, 2)[1]
    assert make_rng(seq).random() == a[1]


def test_make_rng_passes_generators_through(rng):
    assert make_rng(rng) is rng
    assert make_rng(5).random() == make_rng(5).random()


@pytest.mark.parametrize("workers", [1, 3])
def test_fan_out_orders_by_run_id(workers):
    units = [{"run_id": i} for i in (3, 0, 2, 1)]
    results = fan_out(_square, units, workers)
    assert [r["value"] for r in results] == [0, 1, 4, 9]


# ---------- ledger / tracing ----------


def test_ledger_write_and_read(tmp_path):
    path = tmp_path / "ledger.sqlite"
    ledger_write("collapse", "run", "out", {"seed": 1}, "started", path=path)
    ledger_write(
        "collapse", "run", "out", {"seed": 1}, "failed", "boom", path=path
    )
    rows = ledger_read(path)
    assert [r["status"] for r in rows] == ["started", "failed"]
    assert rows[0]["details"] == '{"seed": 1}'
    assert rows[1]["error_message"] == "boom"


def test_ledger_disabled_without_path(tmp_path, monkeypatch):
    # LEDGER_ENABLED=false в conftest: без явного пути ничего не пишется
    from utils import ledger

    monkeypatch.setattr(ledger, "ledger_path", lambda: tmp_path / "x.db")
    ledger_write("collapse", "run", "out", {}, "started")
    assert not (tmp_path / "x.db").exists()


def test_ledger_read_missing_file(tmp_path):
    assert ledger_read(tmp_path / "none.sqlite") == []


def test_tracing_disabled_is_a_no_op():
    assert setup_tracing("lab-test") is False
    with span("unit", experiment="collapse", seed="1"):
        pass
