#!/usr/bin/env python3
"""
Run registry: one sqlite row per experiment run, keyed by a content
fingerprint of its configuration, so identical configurations can be
checked for byte-identical statistics.
"""

import hashlib
import logging
import sqlite3
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

logger = logging.getLogger(__name__)


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Path) -> str:
    return sha256_bytes(Path(path).read_bytes())


@dataclass
class RunRecord:
    run_id: str
    experiment: str
    out_dir: str
    config_sha256: str
    stats_sha256: str
    passed: bool
    failed_claims: str
    created: str


class RunRegistry:
    def __init__(self, db_path: Path):
        self.db_path = Path(db_path)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self._init_db()

    def _init_db(self):
        with sqlite3.connect(self.db_path) as conn:
            conn.execute(
                """
                CREATE TABLE IF NOT EXISTS runs (
                    run_id TEXT PRIMARY KEY,
                    experiment TEXT,
                    out_dir TEXT,
                    config_sha256 TEXT,
                    stats_sha256 TEXT,
                    passed INTEGER,
                    failed_claims TEXT,
                    created TEXT
                )
                """
            )
            conn.execute("CREATE INDEX IF NOT EXISTS idx_experiment ON runs(experiment)")

    @staticmethod
    def make_run_id(experiment: str, config_sha256: str, out_dir: str, created: str) -> str:
        return sha256_bytes(f"{experiment}|{config_sha256}|{out_dir}|{created}".encode("utf-8"))[:16]

    def record(
        self,
        experiment: str,
        out_dir: Path,
        config_sha256: str,
        stats_sha256: str,
        passed: bool,
        failed_claims: List[str],
    ) -> RunRecord:
        created = datetime.now(timezone.utc).isoformat()
        resolved = str(Path(out_dir).resolve())
        rec = RunRecord(
            self.make_run_id(experiment, config_sha256, resolved, created),
            experiment,
            resolved,
            config_sha256,
            stats_sha256,
            bool(passed),
            ",".join(failed_claims),
            created,
        )
        with sqlite3.connect(self.db_path) as conn:
            conn.execute(
                """
                INSERT OR REPLACE INTO runs (
                    run_id, experiment, out_dir, config_sha256, stats_sha256, passed, failed_claims, created
                ) VALUES (?, ?, ?, ?, ?, ?, ?, ?)
                """,
                (
                    rec.run_id,
                    rec.experiment,
                    rec.out_dir,
                    rec.config_sha256,
                    rec.stats_sha256,
                    int(rec.passed),
                    rec.failed_claims,
                    rec.created,
                ),
            )
        logger.debug("recorded run %s (%s) in %s", rec.run_id, experiment, self.db_path)
        return rec

    def _select(self, where: str, args: tuple) -> List[RunRecord]:
        with sqlite3.connect(self.db_path) as conn:
            rows = conn.execute(
                "SELECT run_id, experiment, out_dir, config_sha256, stats_sha256, passed, failed_claims, created "
                f"FROM runs WHERE {where} ORDER BY created, rowid",
                args,
            ).fetchall()
        return [RunRecord(r[0], r[1], r[2], r[3], r[4], bool(r[5]), r[6], r[7]) for r in rows]

    def runs_for(self, experiment: str) -> List[RunRecord]:
        return self._select("experiment=?", (experiment,))

    def same_config(self, config_sha256: str) -> List[RunRecord]:
        return self._select("config_sha256=?", (config_sha256,))

    def for_directory(self, out_dir: Path) -> Optional[RunRecord]:
        found = self._select("out_dir=?", (str(Path(out_dir).resolve()),))
        return found[-1] if found else None
