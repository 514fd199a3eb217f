"""Versioned JSON container with a payload checksum for saved artifacts."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .errors import DataError

FORMAT_NAME = "ehsas-model"
FORMAT_VERSION = 1

__all__ = ["FORMAT_NAME", "FORMAT_VERSION", "save_container", "load_container"]


def _payload_checksum(payload: dict) -> str:
    canonical = json.dumps(
        payload, sort_keys=True, ensure_ascii=False, separators=(",", ":")
    )
    return "sha256:" + hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_container(path: str | Path, kind: str, payload: dict) -> None:
    obj = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "checksum": _payload_checksum(payload),
        "payload": payload,
    }
    Path(path).write_text(
        json.dumps(obj, ensure_ascii=False, indent=1), encoding="utf-8"
    )


def load_container(path: str | Path, expected_kind: str | None = None) -> dict:
    """Parse, version-check, and checksum-verify a saved container.

    Returns the full object (with ``kind`` and ``payload`` keys)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"model file not found: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataError(f"truncated or unparseable model file {path}: {exc}") from None
    if not isinstance(obj, dict) or obj.get("format") != FORMAT_NAME:
        raise DataError(f"{path} is not a recognized model container")
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(
            f"unsupported model format version {version!r} in {path} "
            f"(this build reads version {FORMAT_VERSION})"
        )
    payload = obj.get("payload")
    if not isinstance(payload, dict):
        raise DataError(f"model container {path} is missing its payload")
    if obj.get("checksum") != _payload_checksum(payload):
        raise DataError(f"checksum mismatch in {path}: file is corrupted")
    if expected_kind is not None and obj.get("kind") != expected_kind:
        raise DataError(
            f"{path} holds a {obj.get('kind')!r} artifact, expected {expected_kind!r}"
        )
    return obj
