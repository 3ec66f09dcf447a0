"""Strict run configuration and deterministic seed fan-out.

Every command accepts a JSON config document with a fixed key set; unknown
keys are rejected so typos cannot silently change a run.  A single root seed
is split into per-case streams with counter-style spawn keys, so parallel
execution order cannot change any result.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SchemaError

ENV_THREADS = "HALFSPACE_DECAY_THREADS"

# Parameter key sets per command; values are validated downstream.
_PARAM_KEYS = {
    "pipeline": {
        "lattice": True,
        "u_field": True,
        "v_field": False,
        "energy": False,
        "theta_points": True,
        "l_max": False,
        "cutoff": False,
        "min_gap": False,
        "decay_window": False,
        "max_modes": False,
        "carleman_taper": False,
        "plots": False,
    },
    "verify43": {
        "eps": True,
        "weight_lambda": False,
        "modes": False,
        "ensemble": False,
    },
    "verify-gap": {
        "a": True,
        "b": True,
        "alpha": False,
        "eigs": False,
        "ensemble": False,
        "force": False,
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Command name, nested parameters, root seed, output dir, tolerances."""

    command: str
    params: dict
    seed: int = 0
    out_dir: str = "out"
    threads: int | None = None
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.params, dict):
            raise SchemaError("params must be an object")
        if not isinstance(self.seed, int) or self.seed < 0 or self.seed >= 2**64:
            raise SchemaError("seed must be a 64-bit unsigned integer")
        allowed_tol = {"carleman_pass_rtol", "resolution_gate_rtol"}
        unknown_tol = set(self.tolerances) - allowed_tol
        if unknown_tol:
            raise SchemaError(f"unknown tolerance keys: {sorted(unknown_tol)}")
        if self.command in _PARAM_KEYS:
            spec = _PARAM_KEYS[self.command]
            unknown = set(self.params) - set(spec)
            if unknown:
                raise SchemaError(f"unknown {self.command} parameter keys: {sorted(unknown)}")
            missing = {k for k, required in spec.items() if required} - set(self.params)
            if missing:
                raise SchemaError(f"missing {self.command} parameter keys: {sorted(missing)}")

    @staticmethod
    def from_json(doc: dict) -> "RunConfig":
        allowed = {"command", "params", "seed", "out_dir", "threads", "tolerances"}
        unknown = set(doc) - allowed
        if unknown:
            raise SchemaError(f"unknown config keys: {sorted(unknown)}")
        if "command" not in doc:
            raise SchemaError("config requires 'command'")
        return RunConfig(
            command=str(doc["command"]),
            params=doc.get("params", {}),
            seed=int(doc.get("seed", 0)),
            out_dir=str(doc.get("out_dir", "out")),
            threads=None if doc.get("threads") is None else int(doc["threads"]),
            tolerances=doc.get("tolerances", {}),
        )

    @staticmethod
    def load(path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"config is not valid JSON: {exc}") from exc
        return RunConfig.from_json(doc)

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "params": self.params,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "threads": self.threads,
            "tolerances": self.tolerances,
        }

    def canonical_bytes(self) -> bytes:
        # parallelism and output location cannot affect results, so they do
        # not participate in the config hash
        doc = self.to_json()
        doc["threads"] = None
        doc["out_dir"] = None
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()

    def write_resolved(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "resolved_config.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def case_rng(root_seed: int, *key: int) -> np.random.Generator:
    """Deterministic per-case generator from the root seed and a counter key."""
    return np.random.default_rng(np.random.SeedSequence(entropy=root_seed, spawn_key=tuple(key)))


def thread_count(requested: int | None = None) -> int:
    """Effective worker count: explicit request, else env cap, else 1."""
    if requested is not None and requested > 0:
        limit = os.environ.get(ENV_THREADS)
        return min(requested, int(limit)) if limit else requested
    limit = os.environ.get(ENV_THREADS)
    if limit:
        return max(1, int(limit))
    return 1


def parallel_map(fn, items, threads: int | None = None) -> list:
    """Order-preserving map, optionally threaded; results merged by index."""
    workers = thread_count(threads)
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
