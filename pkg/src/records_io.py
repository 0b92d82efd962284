"""
Records I/O
Persistence of trial records (CSV) and of summaries and reports (JSON / JSON lines).

CSV SCHEMA:
    algorithm,n,trial_index,seed,queries,truncated,wall_time_ms

    Where:
        - truncated: "true" or "false"
        - wall_time_ms: milliseconds with three decimals
        - Rows are ordered by n, then trial_index; UTF-8
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

from logger import get_logger

logger = get_logger('lo_lab.records_io')

CSV_HEADER = ['algorithm', 'n', 'trial_index', 'seed', 'queries', 'truncated', 'wall_time_ms']

PathLike = Union[str, Path]


@dataclass(frozen=True)
class TrialRecord:
    """One optimizer run; queries is counted up to the first optimum query"""
    algorithm: str
    n: int
    trial_index: int
    seed: int
    queries: int
    truncated: bool
    wall_time_ms: float

    def to_row(self) -> List[str]:
        return [
            self.algorithm,
            str(self.n),
            str(self.trial_index),
            str(self.seed),
            str(self.queries),
            'true' if self.truncated else 'false',
            f"{self.wall_time_ms:.3f}"
        ]

    @classmethod
    def from_row(cls, row: Dict[str, str]) -> 'TrialRecord':
        truncated = row['truncated'].strip().lower()
        if truncated not in ('true', 'false'):
            raise ValueError(f"truncated must be 'true' or 'false', got '{row['truncated']}'")
        return cls(
            algorithm=row['algorithm'],
            n=int(row['n']),
            trial_index=int(row['trial_index']),
            seed=int(row['seed']),
            queries=int(row['queries']),
            truncated=truncated == 'true',
            wall_time_ms=float(row['wall_time_ms'])
        )


def record_order(record: TrialRecord):
    return (record.n, record.trial_index, record.algorithm)


def emit_csv(records: Iterable[TrialRecord], path: PathLike) -> Path:
    """
    Write records as CSV.

    Args:
        records: Trial records in any order
        path: Destination file; parent directories are created

    Returns:
        The written path

    Raises:
        OSError: If the path cannot be written
    """
    path = Path(path)
    rows = sorted(records, key=record_order)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(CSV_HEADER)
            for record in rows:
                writer.writerow(record.to_row())
    except OSError as e:
        logger.error(f"[CSV] ✗ Cannot write {path}: {e}")
        raise
    logger.info(f"[CSV] ✓ Wrote {len(rows)} records to {path}")
    return path


def read_csv(path: PathLike) -> List[TrialRecord]:
    """Parse a file written by emit_csv"""
    with open(path, 'r', newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"Unexpected CSV header in {path}: {reader.fieldnames}")
        return [TrialRecord.from_row(row) for row in reader]


def write_jsonl(path: PathLike, objects: Iterable[Dict[str, Any]], append: bool = False) -> int:
    """Write one JSON object per line; returns the number of lines written"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, 'a' if append else 'w', encoding='utf-8') as f:
        for obj in objects:
            f.write(json.dumps(obj) + '\n')
            count += 1
    return count


def read_jsonl(path: PathLike) -> List[Dict[str, Any]]:
    with open(path, 'r', encoding='utf-8') as f:
        return [json.loads(line) for line in f if line.strip()]


def write_json(path: PathLike, obj: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(obj, f, indent=2)
    return path



def append_jsonl(path: PathLike, objects: Iterable[Dict[str, Any]]) -> int:
    return write_jsonl(path, objects, append=True)
