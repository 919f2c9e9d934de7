"""Run manifests and the replica seed-splitting rule."""
from __future__ import annotations

import hashlib
import json

__all__ = ["splitmix64", "derive_replica_seeds", "build_manifest", "write_manifest",
           "verify_manifest", "MASK64"]

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(z: int) -> int:
    """One round of the splitmix64 finalizer."""
    z &= MASK64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return (z ^ (z >> 31)) & MASK64


def derive_replica_seeds(master_seed: int, replicas: int) -> list:
    """seed_i = mix(master xor (i+1) * golden-gamma), one mixing round."""
    return [splitmix64(master_seed ^ ((i + 1) * _GOLDEN & MASK64))
            for i in range(replicas)]


def config_digest(canonical: str) -> str:
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def build_manifest(canonical_config: str, master_seed: int, replica_seeds,
                   version: str, timings_ms: dict) -> dict:
    return {
        "config_sha256": config_digest(canonical_config),
        "master_seed": int(master_seed),
        "replica_seeds": [int(s) for s in replica_seeds],
        "version": version,
        "timings_ms": {k: int(v) for k, v in timings_ms.items()},
    }


def write_manifest(path, manifest: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def verify_manifest(path, canonical_config: str) -> bool:
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    return manifest["config_sha256"] == config_digest(canonical_config)
