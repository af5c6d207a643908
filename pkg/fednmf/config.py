"""
Run Configuration for Federated Topic Modeling

Defines default hyperparameters and the validated configuration models
read from JSON config files.
"""

from enum import Enum
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Local SGD defaults (midpoints of the tuning grid)
SGD_DEFAULTS = {
    "eta": 0.05,
    "lambda": 0.1,
    "batch_size": 64,
    "epochs": 20,
}

# Server optimizer defaults, taken from the adaptive federated optimization reference
FEDOPT_DEFAULTS = {
    "server_lr": 1.0,
    "beta1": 0.9,
    "beta2": 0.99,
    "adapt_eps": 1e-3,
}

CRITIC_CONFIG = {
    "hidden": (32, 256),
    "tau": 5.0,
}

EVAL_CONFIG = {
    "top_n": 10,
    "split_ratio": 0.8,
    "classifier_epochs": 500,
    "classifier_lr": 1.0,
    "foldin_iters": 200,
}

# Bytes per transmitted float in the communication cost model
BYTES_PER_FLOAT = 4


class Aggregator(str, Enum):
    """Server aggregation rules"""
    FEDAVG = "fedavg"
    FEDADAGRAD = "fedadagrad"
    FEDYOGI = "fedyogi"
    FEDADAM = "fedadam"


class _Strict(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")


class PartitionSpec(_Strict):
    """Dirichlet label-skew partition of one corpus across K clients"""
    num_clients: int = Field(..., alias="K", ge=1)
    alpha: float = Field(..., gt=0)
    seed: int = Field(0, ge=0)
    allocation: Literal["quota", "sample"] = Field(
        "quota", description="quota: largest-remainder counts from q; sample: i.i.d. label draws"
    )


class SgdConfig(_Strict):
    """Local SGD hyperparameters of ClientUpdate"""
    eta: float = Field(SGD_DEFAULTS["eta"], ge=0, description="Learning rate for W, H and the critic")
    lam: float = Field(SGD_DEFAULTS["lambda"], alias="lambda", ge=0, description="MI regularizer weight")
    batch_size: int = Field(SGD_DEFAULTS["batch_size"], alias="B", ge=1)
    epochs: int = Field(SGD_DEFAULTS["epochs"], alias="E", ge=1)


class FedRunConfig(_Strict):
    """All federation hyperparameters of one training run"""
    num_clients: int = Field(10, alias="K", ge=1)
    participation: float = Field(0.2, alias="C", gt=0, le=1)
    rounds: int = Field(100, alias="T", ge=1)
    num_topics: int = Field(20, alias="k", ge=1)
    sgd: SgdConfig = Field(default_factory=SgdConfig)
    aggregator: Aggregator = Aggregator.FEDAVG
    server_lr: float = Field(FEDOPT_DEFAULTS["server_lr"], gt=0)
    beta1: float = Field(FEDOPT_DEFAULTS["beta1"], ge=0, lt=1)
    beta2: float = Field(FEDOPT_DEFAULTS["beta2"], ge=0, lt=1)
    adapt_eps: float = Field(FEDOPT_DEFAULTS["adapt_eps"], gt=0)
    master_seed: int = Field(0, ge=0)
    critic_hidden: Tuple[int, ...] = Field(CRITIC_CONFIG["hidden"], min_length=1)
    tau: float = Field(CRITIC_CONFIG["tau"], gt=0)

    @field_validator("critic_hidden")
    @classmethod
    def _positive_widths(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if any(width < 1 for width in v):
            raise ValueError("hidden layer widths must be >= 1")
        return v


class TrainConfig(FedRunConfig):
    """FedRunConfig plus input files and run options used by `fednmf train`"""
    matrix: Path
    shards: Optional[Path] = None
    alpha: float = Field(1.0, gt=0, description="Dirichlet concentration when shards are not given")
    allocation: Literal["quota", "sample"] = "quota"
    out_dir: Path = Path("runs/latest")
    threads: int = Field(1, ge=1)
    checkpoint_every: int = Field(0, ge=0, description="0 disables periodic checkpoints")
    eval_every: int = Field(0, ge=0, description="0 disables per-round downstream F1 tracking")

    def partition_spec(self) -> PartitionSpec:
        return PartitionSpec(K=self.num_clients, alpha=self.alpha, seed=self.master_seed,
                             allocation=self.allocation)

    def identity(self) -> dict:
        """Fields that determine the run's results; execution options are left out"""
        return self.model_dump(mode="json", by_alias=True, exclude=EXECUTION_FIELDS)


# Options that change where and how fast a run executes, never what it computes
EXECUTION_FIELDS = {"out_dir", "threads", "checkpoint_every"}


# Sweep axis name -> TrainConfig field it overrides
SWEEP_AXES: Dict[str, Tuple[str, ...]] = {
    "lambda": ("sgd", "lam"),
    "B": ("sgd", "batch_size"),
    "E": ("sgd", "epochs"),
    "eta": ("sgd", "eta"),
    "k": ("num_topics",),
    "aggregator": ("aggregator",),
    "alpha": ("alpha",),
    "K": ("num_clients",),
    "seed": ("master_seed",),
}


class SweepConfig(_Strict):
    """Grid over TrainConfig fields; one training run per cartesian-product cell"""
    base: TrainConfig
    grid: Dict[str, List[Union[int, float, str]]]
    embeddings: Optional[Path] = None
    out: Path = Path("sweep.csv")

    @model_validator(mode="after")
    def _check_grid(self) -> "SweepConfig":
        problems = []
        if not self.grid:
            problems.append("grid must name at least one axis")
        for axis, values in self.grid.items():
            if axis not in SWEEP_AXES:
                problems.append(f"unknown axis '{axis}' (allowed: {', '.join(SWEEP_AXES)})")
            elif not values:
                problems.append(f"axis '{axis}' has no values")
        if problems:
            raise ValueError("; ".join(problems))
        return self
