"""Filesystem checkpoint store.

Each checkpoint gets its own directory under the store root holding
`weights.bin` (raw little-endian float64) and `manifest.json` (schema,
architecture, config, lineage, metrics, checksum). The manifest is written
last via temp-file-plus-rename, so a crash mid-save can never leave a
manifest that points at absent or partial weights: either the manifest is
complete and the weights it describes are in place, or the directory is
recognizable debris and ignored.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .data import LabeledDataset, TaskBundle, TaskSpec, load_csv, save_csv
from .nn import ArchSpec, ParamVector
from .pipeline import Checkpoint, HyperConfig, Lineage
from .soup import SoupResult

SCHEMA_VERSION = 1
_RESERVED_DIRS = ("experiments", "datasets")


class StoreError(Exception):
    """Store-level failure: missing ids, collisions, bad schema."""


class ChecksumError(StoreError):
    """Stored weights do not match the checksum in their manifest."""


def _checksum(raw: bytes) -> str:
    return "sha256:" + hashlib.sha256(raw).hexdigest()


def encode_weights(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype="<f8").tobytes()


def decode_weights(raw: bytes) -> np.ndarray:
    if len(raw) % 8 != 0:
        raise StoreError(f"weight payload of {len(raw)} bytes is not a whole number of float64s")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64)


def _atomic_write(path: Path, raw: bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(raw)
    os.replace(tmp, path)


@dataclass
class Store:
    root: Path

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    # -- checkpoints ------------------------------------------------------

    def _dir(self, checkpoint_id: str) -> Path:
        if not checkpoint_id or "/" in checkpoint_id or checkpoint_id in _RESERVED_DIRS:
            raise StoreError(f"invalid checkpoint id {checkpoint_id!r}")
        return self.root / checkpoint_id

    def exists(self, checkpoint_id: str) -> bool:
        return (self._dir(checkpoint_id) / "manifest.json").is_file()

    def save_checkpoint(self, ck: Checkpoint, exist_ok: bool = False) -> str:
        """Write weights first, then the manifest atomically.

        A colliding id raises unless exist_ok is set and the stored weights
        are byte-identical to the ones being saved.
        """
        d = self._dir(ck.id)
        raw = encode_weights(ck.params.values)
        digest = _checksum(raw)
        if self.exists(ck.id):
            stored = json.loads((d / "manifest.json").read_text())
            if exist_ok and stored.get("weights_checksum") == digest:
                return ck.id
            raise StoreError(f"checkpoint id {ck.id} already exists")
        if d.exists():
            # Leftovers from a crashed save; no manifest means nothing to keep.
            for leftover in d.iterdir():
                leftover.unlink()
        d.mkdir(parents=True, exist_ok=True)
        _atomic_write(d / "weights.bin", raw)
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "id": ck.id,
            "arch": ck.arch.to_dict(),
            "config": ck.config.to_dict() if ck.config else None,
            "lineage": ck.lineage.to_dict(),
            "val_metrics": ck.val_metrics,
            "epochs_consumed": ck.epochs_consumed,
            "trained_on": ck.trained_on,
            "created_at": datetime.now(timezone.utc).isoformat(),
            "weights_file": "weights.bin",
            "weights_checksum": digest,
        }
        _atomic_write(d / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True).encode("ascii"))
        return ck.id

    def load_checkpoint(self, checkpoint_id: str) -> Checkpoint:
        d = self._dir(checkpoint_id)
        manifest_path = d / "manifest.json"
        if not manifest_path.is_file():
            raise StoreError(f"no checkpoint {checkpoint_id} in {self.root}")
        manifest = json.loads(manifest_path.read_text())
        if manifest.get("schema_version") != SCHEMA_VERSION:
            raise StoreError(
                f"unsupported manifest schema {manifest.get('schema_version')} (expected {SCHEMA_VERSION})"
            )
        raw = (d / manifest["weights_file"]).read_bytes()
        if _checksum(raw) != manifest["weights_checksum"]:
            raise ChecksumError(f"checksum mismatch for {checkpoint_id}")
        arch = ArchSpec.from_dict(manifest["arch"])
        values = decode_weights(raw)
        if values.size != arch.param_count:
            raise StoreError(
                f"{checkpoint_id}: {values.size} stored parameters but architecture needs {arch.param_count}"
            )
        config = HyperConfig.from_dict(manifest["config"]) if manifest["config"] else None
        return Checkpoint(
            id=manifest["id"],
            arch=arch,
            params=ParamVector(values, arch.signature),
            config=config,
            lineage=Lineage.from_dict(manifest["lineage"]),
            val_metrics=dict(manifest["val_metrics"]),
            epochs_consumed=float(manifest["epochs_consumed"]),
            trained_on=manifest.get("trained_on", ""),
        )

    def list_checkpoints(self) -> list[str]:
        out = []
        for child in sorted(self.root.iterdir()):
            if child.is_dir() and child.name not in _RESERVED_DIRS and (child / "manifest.json").is_file():
                out.append(child.name)
        return out

    def save_soup(self, soup: SoupResult, arch: ArchSpec, metric: str,
                  exist_ok: bool = False) -> str:
        """Persist a soup as a stage=soup checkpoint plus an audit sidecar."""
        ck = Checkpoint(
            id=soup.id, arch=arch, params=soup.params, config=None,
            lineage=Lineage("soup"),
            val_metrics={} if soup.val_score is None else {metric: soup.val_score},
            epochs_consumed=0.0,
        )
        self.save_checkpoint(ck, exist_ok=exist_ok)
        _atomic_write(self._dir(soup.id) / "audit.json",
                      json.dumps(soup.audit_dict(), indent=2, sort_keys=True).encode("ascii"))
        return soup.id

    def load_audit(self, soup_id: str) -> dict:
        path = self._dir(soup_id) / "audit.json"
        if not path.is_file():
            raise StoreError(f"no audit record for {soup_id}")
        return json.loads(path.read_text())

    # -- datasets ---------------------------------------------------------

    def dataset_dir(self, name: str) -> Path:
        return self.root / "datasets" / name

    def save_task_bundle(self, name: str, bundle: TaskBundle, spec: TaskSpec | None = None) -> Path:
        d = self.dataset_dir(name)
        d.mkdir(parents=True, exist_ok=True)
        for role, ds in bundle.splits().items():
            save_csv(ds, d / f"{role}.csv")
        if spec is not None:
            _atomic_write(d / "task.json", json.dumps(spec.to_dict(), indent=2, sort_keys=True).encode("ascii"))
        return d

    def load_dataset(self, name: str, role: str) -> LabeledDataset:
        path = self.dataset_dir(name) / f"{role}.csv"
        if not path.is_file():
            raise StoreError(f"no {role} split for dataset {name!r} in {self.root}")
        class_count = None
        task_id = name
        spec_path = self.dataset_dir(name) / "task.json"
        if spec_path.is_file():
            spec = TaskSpec.from_dict(json.loads(spec_path.read_text()))
            class_count = spec.class_count
            task_id = spec.task_id
        return load_csv(path, "label", role=role, task_id=task_id, class_count=class_count)

    # -- experiments ------------------------------------------------------

    def experiment_dir(self, name: str) -> Path:
        d = self.root / "experiments" / name
        d.mkdir(parents=True, exist_ok=True)
        return d
