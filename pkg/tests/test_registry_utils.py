import pytest

from segflow.registry_utils import (
    REGISTRY_ENV,
    add_run,
    check_table_exists,
    config_hash,
    create_runs_table,
    delete_run,
    get_engine,
    get_run,
    get_run_data,
    register_run,
    registry_url,
    save_notes,
    update_run_status,
)


@pytest.fixture
def engine(tmp_path):
    engine = get_engine(f"sqlite:///{tmp_path / 'runs.db'}")
    create_runs_table(engine)
    return engine


def test_registry_url_prefers_argument_then_environment(monkeypatch):
    monkeypatch.setenv(REGISTRY_ENV, "sqlite:///from_env.db")
    assert registry_url("sqlite:///given.db") == "sqlite:///given.db"
    assert registry_url() == "sqlite:///from_env.db"
    monkeypatch.delenv(REGISTRY_ENV)
    assert registry_url().startswith("sqlite:///")


def test_create_runs_table_is_idempotent(engine):
    assert check_table_exists(engine, "runs")
    create_runs_table(engine)
    assert get_run_data(engine).empty


def test_add_update_and_read_runs(engine):
    first = add_run(engine, "demo", "run", "running", "runs/demo", config_hash=config_hash("a = 1"))
    second = add_run(engine, "demo", "partition", "completed", "runs/demo", objective=78.9, lambda_summary="39.4,39.5")
    assert second > first
    update_run_status(engine, first, "completed", objective=1.5)
    row = get_run(engine, first)
    assert row["status"] == "completed" and row["objective"] == 1.5
    assert row["config_hash"] == config_hash("a = 1")
    frame = get_run_data(engine)
    assert set(frame["id"]) == {first, second}
    assert get_run(engine, 999) is None
    with pytest.raises(ValueError):
        add_run(engine, "demo", "run", "queued", "runs/demo")


def test_notes_and_delete(engine):
    run_id = add_run(engine, "demo", "freq", "completed", "runs/demo")
    assert save_notes(engine, run_id, "**interface** looks flat")
    assert get_run(engine, run_id)["notes"] == "**interface** looks flat"
    assert delete_run(engine, run_id)
    assert get_run(engine, run_id) is None


def test_register_run_returns_none_when_the_registry_is_unreachable(tmp_path):
    url = f"sqlite:///{tmp_path / 'missing' / 'nested' / 'runs.db'}"
    assert register_run(url, "demo", "run", tmp_path) is None


def test_register_run_creates_the_table(tmp_path):
    url = f"sqlite:///{tmp_path / 'fresh.db'}"
    run_id = register_run(url, "demo", "run", tmp_path, config_text="x = 1", objective=2.0)
    assert get_run(get_engine(url), run_id)["objective"] == 2.0
