"""Run registry: an index of run directories in any SQLAlchemy database (SQLite by default).

The artifacts on disk are authoritative; a registry failure never fails a run.
"""

import hashlib
import logging
import os
import time
from functools import lru_cache

import pandas as pd
from sqlalchemy import create_engine, inspect, text
from sqlalchemy.exc import OperationalError, SQLAlchemyError

from .debug_utils import debug_print

logger = logging.getLogger(__name__)

REGISTRY_ENV = "SEGFLOW_REGISTRY"
DEFAULT_REGISTRY_URL = "sqlite:///segflow_runs.db"
RUN_STATUSES = ("running", "completed", "failed")


def registry_url(url=None):
    return url or os.environ.get(REGISTRY_ENV) or DEFAULT_REGISTRY_URL


@lru_cache(maxsize=8)
def _engine(url):
    return create_engine(url, future=True)


def get_engine(url=None, max_retries=3, retry_delay=1):
    """Get the registry engine with retry logic."""
    url = registry_url(url)
    for attempt in range(max_retries):
        try:
            engine = _engine(url)
            with engine.connect() as conn:
                conn.execute(text("SELECT 1"))
            return engine
        except OperationalError as e:
            if attempt < max_retries - 1:
                debug_print(f"Registry connection attempt {attempt + 1} failed, retrying in {retry_delay} seconds...")
                time.sleep(retry_delay)
            else:
                logger.error("cannot reach run registry %s after %d attempts: %s", url, max_retries, e)
                raise


def check_table_exists(engine, table_name):
    """Check if a table exists in the registry database."""
    return inspect(engine).has_table(table_name)


def create_runs_table(engine):
    """Create the runs table if it doesn't exist."""
    if check_table_exists(engine, "runs"):
        debug_print("runs table already exists")
        return
    with engine.begin() as conn:
        conn.execute(
            text(
                """
                CREATE TABLE runs (
                    id INTEGER PRIMARY KEY,
                    name TEXT NOT NULL,
                    command TEXT NOT NULL,
                    status TEXT NOT NULL,
                    config_hash TEXT,
                    output_dir TEXT NOT NULL,
                    objective DOUBLE PRECISION,
                    lambda_summary TEXT,
                    notes TEXT,
                    last_updated TIMESTAMP DEFAULT CURRENT_TIMESTAMP
                )
                """
            )
        )
    debug_print("Created runs table")


def config_hash(config_text):
    return hashlib.sha256(config_text.encode("utf-8")).hexdigest()


def add_run(engine, name, command, status, output_dir, config_hash=None, objective=None, lambda_summary=None, notes=None):
    """Add a run to the registry and return its id."""
    if status not in RUN_STATUSES:
        raise ValueError(f"status must be one of {RUN_STATUSES}, got {status!r}")
    with engine.begin() as conn:
        result = conn.execute(
            text(
                """
                INSERT INTO runs (name, command, status, config_hash, output_dir, objective, lambda_summary, notes, last_updated)
                VALUES (:name, :command, :status, :config_hash, :output_dir, :objective, :lambda_summary, :notes, CURRENT_TIMESTAMP)
                RETURNING id
                """
            ),
            {
                "name": str(name),
                "command": str(command),
                "status": status,
                "config_hash": config_hash,
                "output_dir": str(output_dir),
                "objective": float(objective) if objective is not None else None,
                "lambda_summary": lambda_summary,
                "notes": notes,
            },
        )
        run_id = int(result.scalar())
    debug_print(f"Registered run {name} ({command}) with ID: {run_id}")
    return run_id


def update_run_status(engine, run_id, status, objective=None, lambda_summary=None):
    """Update a run's status and, when given, its summary values."""
    with engine.begin() as conn:
        conn.execute(
            text(
                """
                UPDATE runs SET status = :status,
                    objective = COALESCE(:objective, objective),
                    lambda_summary = COALESCE(:lambda_summary, lambda_summary),
                    last_updated = CURRENT_TIMESTAMP
                WHERE id = :id
                """
            ),
            {"status": status, "objective": objective, "lambda_summary": lambda_summary, "id": int(run_id)},
        )


def get_run_data(engine):
    """Get all registered runs, newest first."""
    query = text(
        """
        SELECT id, name, command, status, config_hash, output_dir, objective,
               lambda_summary, notes, last_updated
        FROM runs
        ORDER BY last_updated DESC, id DESC
        """
    )
    with engine.connect() as conn:
        df = pd.read_sql(query, conn)
    debug_print(f"Query returned {len(df)} rows")
    return df


def get_run(engine, run_id):
    """Get one run as a dict, or None."""
    with engine.connect() as conn:
        row = conn.execute(text("SELECT * FROM runs WHERE id = :id"), {"id": int(run_id)}).mappings().fetchone()
    return dict(row) if row is not None else None


def save_notes(engine, run_id, notes):
    """Save notes on a run."""
    try:
        with engine.begin() as conn:
            conn.execute(
                text("UPDATE runs SET notes = :notes, last_updated = CURRENT_TIMESTAMP WHERE id = :id"),
                {"notes": notes, "id": int(run_id)},
            )
        return True
    except SQLAlchemyError as e:
        logger.error("error saving notes for run %s: %s", run_id, e)
        return False


def delete_run(engine, run_id):
    """Delete a run from the registry (its artifacts stay on disk)."""
    try:
        with engine.begin() as conn:
            conn.execute(text("DELETE FROM runs WHERE id = :id"), {"id": int(run_id)})
            remaining = conn.execute(text("SELECT id FROM runs WHERE id = :id"), {"id": int(run_id)}).fetchone()
        if remaining is None:
            debug_print(f"Run {run_id} deletion verified")
            return True
        return False
    except SQLAlchemyError as e:
        logger.error("error deleting run %s: %s", run_id, e)
        return False


def register_run(url, name, command, output_dir, config_text="", objective=None, lambda_summary=None, status="completed"):
    """Record a finished run; logs and returns None when the registry is unavailable."""
    try:
        engine = get_engine(url, max_retries=1)
        create_runs_table(engine)
        return add_run(
            engine,
            name,
            command,
            status,
            output_dir,
            config_hash=config_hash(config_text),
            objective=objective,
            lambda_summary=lambda_summary,
        )
    except SQLAlchemyError as e:
        logger.warning("run registry unavailable (%s); artifacts in %s are unaffected", e, output_dir)
        return None


def finish_run(url, run_id, status, objective=None, lambda_summary=None):
    """Set the final status of a registered run; logs and returns False when the registry is unavailable."""
    try:
        update_run_status(get_engine(url, max_retries=1), run_id, status, objective, lambda_summary)
        return True
    except SQLAlchemyError as e:
        logger.warning("could not mark run %s as %s: %s", run_id, status, e)
        return False
