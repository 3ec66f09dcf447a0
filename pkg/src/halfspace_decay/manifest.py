"""Run manifests: reproducible verdict records with a content hash.

All floats are serialised with 17 significant digits so a manifest written by
one run compares bit-for-bit with a re-run of the same config and seed.  The
hash covers the config and the ordered verdicts; wall-clock time and tool
version are recorded alongside but excluded from the hash.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .runconfig import RunConfig

TOOL_VERSION = "0.1.0"


def _canonical(value):
    """Make a JSON-ready structure with floats at 17 significant digits."""
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, dict):
        return {str(k): _canonical(v) for k, v in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if hasattr(value, "to_json"):
        return _canonical(value.to_json())
    if hasattr(value, "item"):  # numpy scalars
        return _canonical(value.item())
    raise TypeError(f"cannot serialise {type(value)!r} into a manifest")


@dataclass
class RunManifest:
    config_hash: str
    cases: list = field(default_factory=list)
    wall_clock_s: float = 0.0
    tool_version: str = TOOL_VERSION

    @staticmethod
    def for_config(cfg: RunConfig) -> "RunManifest":
        return RunManifest(config_hash=hashlib.sha256(cfg.canonical_bytes()).hexdigest())

    def add_case(self, case_id: str, verdict: str, data: dict | None = None) -> None:
        self.cases.append({"id": case_id, "verdict": verdict, "data": data or {}})

    def verdict_hash(self) -> str:
        body = json.dumps(
            _canonical({"config": self.config_hash, "cases": self.cases}),
            sort_keys=True,
            separators=(",", ":"),
        ).encode()
        return hashlib.sha256(body).hexdigest()

    def to_json(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "verdict_hash": self.verdict_hash(),
            "tool_version": self.tool_version,
            "wall_clock_s": format(self.wall_clock_s, ".3f"),
            "cases": _canonical(self.cases),
        }

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / "manifest.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def write_csv(path, header: list[str], rows) -> Path:
    """Tiny deterministic CSV writer (17 significant digits for floats)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, float):
                    cells.append(format(v, ".17g"))
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")
    return path


def write_json(path, payload) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_canonical(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
