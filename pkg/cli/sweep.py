"""
Hyperparameter Sweeps

Runs one training per cell of the cartesian product of the grid axes and
collects the outcomes into a single CSV table. A failing cell is recorded
with its error and the sweep moves on.
"""

import csv
import itertools
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from joblib import Parallel, delayed

from fednmf import corpus, evaluation, partition
from fednmf.config import SWEEP_AXES, SweepConfig, TrainConfig
from fednmf.errors import NoScorableTopics, SingleClass
from fednmf.federation import run_training

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "status", "final_loss", "initial_loss", "final_mi", "comm_bytes",
    "macro_f1", "accuracy", "coherence", "error",
]


def load_sweep_config(path: Path) -> SweepConfig:
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    base = data.get("base", {})
    for key in ("matrix", "shards"):
        value = base.get(key)
        if isinstance(value, str) and not Path(value).is_absolute():
            base[key] = str(path.parent / value)
    if isinstance(data.get("embeddings"), str) and not Path(data["embeddings"]).is_absolute():
        data["embeddings"] = str(path.parent / data["embeddings"])
    return SweepConfig.model_validate(data)


def expand_grid(grid: Dict[str, List[Any]]) -> List[Dict[str, Any]]:
    """Cartesian product of the axes, in axis order"""
    axes = list(grid)
    return [dict(zip(axes, values)) for values in itertools.product(*(grid[a] for a in axes))]


def cell_config(base: TrainConfig, cell: Dict[str, Any]) -> TrainConfig:
    """Base config with the cell's axis values applied, re-validated"""
    data = base.model_dump(mode="json")
    for axis, value in cell.items():
        target = data
        *parents, leaf = SWEEP_AXES[axis]
        for key in parents:
            target = target[key]
        target[leaf] = value
    return TrainConfig.model_validate(data)


def run_cell(base: TrainConfig, cell: Dict[str, Any], embeddings: Optional[Path] = None) -> Dict[str, Any]:
    """
    Train one cell and score it.

    Returns:
        Row with the cell's axis values and the RESULT_COLUMNS
    """
    row: Dict[str, Any] = dict(cell)
    row.update({column: None for column in RESULT_COLUMNS})
    try:
        cfg = cell_config(base, cell)
        matrix = corpus.load_count_matrix(cfg.matrix)
        repartition = cfg.shards is None or any(axis in cell for axis in ("K", "alpha", "seed"))
        if repartition:
            shards = partition.partition_clients(matrix, cfg.partition_spec())
        else:
            shards = partition.read_shard_manifest(cfg.shards, matrix)
        result = run_training(matrix, shards, cfg, threads=cfg.threads)

        first, last = result.history[0], result.history[-1]
        row.update({
            "initial_loss": first.mean_recon_loss,
            "final_loss": last.mean_recon_loss,
            "final_mi": last.mean_mi_estimate,
            "comm_bytes": last.cumulative_comm_bytes,
        })
        try:
            report = evaluation.classify_clients(result.clients, seed=cfg.master_seed)
            row.update({"macro_f1": report.macro_f1, "accuracy": report.accuracy})
        except SingleClass as e:
            logger.info("Cell %s: no classification score (%s)", cell, e)
        if embeddings is not None:
            vocab = corpus.load_matrix_vocabulary(cfg.matrix)
            table = evaluation.load_embeddings(embeddings)
            try:
                row["coherence"] = evaluation.model_coherence(result.model.W, vocab, table).mean_coherence
            except NoScorableTopics as e:
                logger.info("Cell %s: no coherence score (%s)", cell, e)
        row["status"] = "ok"
    except (ValueError, OSError, RuntimeError, FloatingPointError) as e:
        logger.warning("Sweep cell %s failed: %s", cell, e)
        row["status"] = "failed"
        row["error"] = str(e).splitlines()[0] if str(e) else type(e).__name__
    return row


def write_table(rows: List[Dict[str, Any]], axes: List[str], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=axes + RESULT_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return path


def run_sweep(
    config_path: Path,
    jobs: int = 1,
    out: Optional[str] = None,
    threads: Optional[int] = None,
) -> List[Dict[str, Any]]:
    """
    Run every grid cell and write the CSV table.

    Args:
        config_path: Sweep JSON (base TrainConfig, grid, optional embeddings and out)
        jobs: Worker processes; 1 runs cells sequentially in this process
        out: Override of the table path
        threads: Override of the per-cell client thread count

    Returns:
        One row per cell, in grid order
    """
    sweep = load_sweep_config(config_path)
    base = sweep.base if threads is None else sweep.base.model_copy(update={"threads": threads})
    cells = expand_grid(sweep.grid)
    logger.info("Sweeping %d cells over axes %s", len(cells), list(sweep.grid))

    if jobs > 1:
        rows = Parallel(n_jobs=jobs, backend="loky")(
            delayed(run_cell)(base, cell, sweep.embeddings) for cell in cells
        )
    else:
        rows = [run_cell(base, cell, sweep.embeddings) for cell in cells]

    table = write_table(rows, list(sweep.grid), Path(out) if out else sweep.out)
    print(f"✓ Wrote {table}")
    return rows
