"""Flat ``key=value`` config files and run manifests."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

from . import __version__
from .errors import InvalidArgumentError

SEED_ENV = "STYLEID_SEED"


def read_config(path) -> dict[str, str]:
    """One ``key = value`` per line; ``#`` starts a comment. Keys normalize ``-`` to ``_``."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise InvalidArgumentError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def parse_floats(text: str) -> list[float]:
    return [float(t) for t in str(text).replace(" ", "").split(",") if t]


def parse_ints(text: str) -> list[int]:
    return [int(t) for t in str(text).replace(" ", "").split(",") if t]


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def digest_tree(root, exclude=("manifest.json",)) -> dict[str, str]:
    root = Path(root)
    return {str(p.relative_to(root)): sha256(p)
            for p in sorted(root.rglob("*")) if p.is_file() and p.name not in exclude}


def write_manifest(out_dir, command: str, options: dict, inputs: list, backend: str,
                   config: dict, seconds: float) -> Path:
    """Record everything needed to rerun ``command`` and check its outputs."""
    out_dir = Path(out_dir)
    manifest = {
        "tool": "styleid",
        "version": __version__,
        "command": command,
        "options": options,
        "backend": backend,
        "config": config,
        "seed": options.get("seed"),
        "inputs": {str(p): sha256(p) for p in inputs},
        "outputs": digest_tree(out_dir),
        "timing": {"seconds": round(seconds, 3)},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> dict:
    data = json.loads(Path(path).read_text())
    for key in ("command", "options", "outputs"):
        if key not in data:
            raise InvalidArgumentError(f"{path}: manifest lacks {key!r}")
    return data
