"""Sidecar metadata that chains pipeline artifacts together by content hash.

Every artifact ``x`` written by the command line tool gets ``x.meta.json``
holding its own sha256 and the hashes of the artifacts it was built from.
Loading an artifact re-hashes it; a mismatch anywhere is a hard error.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .io import file_hash


class ArtifactError(ValueError):
    """Missing, stale or mismatched artifact."""


@dataclass
class IndexMetadata:
    kind: str
    sha256: str
    inputs: dict = field(default_factory=dict)  # upstream kind -> sha256
    params: dict = field(default_factory=dict)
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_meta(path, kind: str, inputs: dict | None = None, params: dict | None = None) -> IndexMetadata:
    m = IndexMetadata(kind, file_hash(path), dict(inputs or {}), dict(params or {}))
    meta_path(path).write_text(m.to_json())
    return m


def read_meta(path, kind: str) -> IndexMetadata:
    """Load and check the sidecar of ``path``; the file must hash to the recorded value."""
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"missing artifact {path}")
    mp = meta_path(path)
    if not mp.is_file():
        raise ArtifactError(f"missing metadata {mp}")
    try:
        doc = json.loads(mp.read_text())
        m = IndexMetadata(doc["kind"], doc["sha256"], doc.get("inputs", {}),
                          doc.get("params", {}), doc.get("version", ""))
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ArtifactError(f"corrupt metadata {mp}: {e}") from None
    if m.kind != kind:
        raise ArtifactError(f"{path} is a {m.kind} artifact, expected {kind}")
    if file_hash(path) != m.sha256:
        raise ArtifactError(f"{path} does not match the hash in its metadata")
    return m


def check_inputs(m: IndexMetadata, path, **upstream: IndexMetadata) -> None:
    """Require that ``m`` was built from exactly the given upstream artifacts."""
    for kind, up in upstream.items():
        got = m.inputs.get(kind)
        if got != up.sha256:
            raise ArtifactError(f"{path} was built from a different {kind} "
                                f"({(got or 'none')[:12]} != {up.sha256[:12]})")
