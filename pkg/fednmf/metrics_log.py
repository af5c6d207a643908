"""
Incremental Metrics Log

One JSON record per round, appended and flushed as soon as the round ends so
an interrupted run keeps every finished round. Records use sorted keys and
carry the config hash of the manifest that produced them.
"""

import json
from pathlib import Path
from typing import List

from models import RoundMetrics


class MetricsLog:
    """
    Line-oriented writer for RoundMetrics.

    Example:
        with MetricsLog(out_dir / "metrics.jsonl", config_hash) as log:
            log.append(metrics)
    """

    def __init__(self, path: Path, config_hash: str):
        self.path = Path(path)
        self.config_hash = config_hash
        self.path.parent.mkdir(parents=True, exist_ok=True)
        # a new run replaces records of an older one
        self._fh = self.path.open("w", encoding="utf-8")

    def append(self, metrics: RoundMetrics) -> None:
        record = metrics.to_record()
        record["config_hash"] = self.config_hash
        self._fh.write(json.dumps(record, sort_keys=True) + "\n")
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self) -> "MetricsLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_metrics(path: Path) -> List[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
