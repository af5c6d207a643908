"""
Run Manifest

Records what produced a set of artifacts: the effective config, SHA3-256
digests of every input file, output paths, the code version and the master
seed. Hashing follows the canonical sorted-key JSON convention, so equal
configs always hash equally.
"""

import hashlib
import json
import logging
import subprocess
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Union

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

PACKAGE_VERSION = "0.1.0"
_CHUNK = 1 << 20


def hash_data(data: bytes) -> str:
    """SHA3-256 hex digest"""
    return hashlib.sha3_256(data).hexdigest()


def file_digest(path: Path) -> str:
    """SHA3-256 hex digest of a file, read in chunks"""
    h = hashlib.sha3_256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(_CHUNK), b""):
            h.update(chunk)
    return h.hexdigest()


def canonical_config(config: Union[BaseModel, Mapping[str, Any]]) -> Dict[str, Any]:
    """JSON-ready config dict using the documented keys (K, C, T, lambda, ...)"""
    if isinstance(config, BaseModel):
        return config.model_dump(mode="json", by_alias=True)
    return json.loads(json.dumps(dict(config), default=str))


def config_hash(config: Union[BaseModel, Mapping[str, Any]]) -> str:
    """SHA3-256 of the sorted-key JSON of the config"""
    return hash_data(json.dumps(canonical_config(config), sort_keys=True).encode("utf-8"))


def version_string() -> str:
    """`git describe --always --dirty` of the source tree, or the package version outside a checkout"""
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
            check=True,
        )
        described = result.stdout.strip()
        if described:
            return described
    except (OSError, subprocess.SubprocessError):
        pass
    return PACKAGE_VERSION


class RunManifest(BaseModel):
    """Everything needed to reproduce one command's artifacts"""
    command: str
    version: str
    master_seed: Optional[int] = None
    config: Dict[str, Any] = Field(default_factory=dict)
    config_hash: str
    inputs: Dict[str, str] = Field(default_factory=dict, description="input path -> SHA3-256")
    outputs: Dict[str, str] = Field(default_factory=dict, description="artifact role -> path")


def build_manifest(
    command: str,
    config: Union[BaseModel, Mapping[str, Any]],
    inputs: Iterable[Path] = (),
    outputs: Optional[Mapping[str, Path]] = None,
    master_seed: Optional[int] = None,
) -> RunManifest:
    """
    Assemble a manifest, hashing every input file that exists.

    Raises:
        RuntimeError: If an input file cannot be read
    """
    digests = {}
    for path in inputs:
        try:
            digests[str(path)] = file_digest(path)
        except OSError as e:
            raise RuntimeError(f"Failed to hash input {path}: {e}")
    return RunManifest(
        command=command,
        version=version_string(),
        master_seed=master_seed,
        config=canonical_config(config),
        config_hash=config_hash(config),
        inputs=digests,
        outputs={role: str(p) for role, p in (outputs or {}).items()},
    )


def write_manifest(manifest: RunManifest, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest.model_dump(mode="json"), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def load_manifest(path: Path) -> RunManifest:
    return RunManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))


def verify_inputs(manifest: RunManifest) -> List[str]:
    """
    Re-hash the manifest's inputs.

    Returns:
        One message per missing or changed file; empty when everything matches
    """
    problems = []
    for path, expected in sorted(manifest.inputs.items()):
        try:
            actual = file_digest(Path(path))
        except OSError:
            problems.append(f"{path}: missing")
            continue
        if actual != expected:
            problems.append(f"{path}: digest changed ({expected[:12]} -> {actual[:12]})")
    return problems
