"""Run configuration: enumeration caps, root seed, deterministic RNG streams.

Every randomized routine takes an explicit ``numpy`` generator derived from
the root seed and a string label, so results are reproducible across runs
and across any parallel schedule.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field, replace

import numpy as np

DEFAULT_ENUMERATION_CAP = 10**7


def _env_cap() -> int:
    raw = os.environ.get("HFA_CAP")
    if raw is None:
        return DEFAULT_ENUMERATION_CAP
    try:
        value = int(raw)
    except ValueError:
        return DEFAULT_ENUMERATION_CAP
    return value if value > 0 else DEFAULT_ENUMERATION_CAP


@dataclass(frozen=True)
class RunConfig:
    root_seed: int = 0
    enumeration_cap: int = field(default_factory=_env_cap)
    sample_count: int = 10**4
    output_format: str = "json"

    def __post_init__(self):
        if self.enumeration_cap <= 0:
            raise ValueError("enumeration_cap must be positive")
        if self.sample_count <= 0:
            raise ValueError("sample_count must be positive")

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, root_seed=seed)

    def rng(self, label: str) -> np.random.Generator:
        """Deterministic child generator for a named task."""
        return np.random.default_rng(split_seed(self.root_seed, label))


def split_seed(root_seed: int, label: str) -> int:
    """Derive a 64-bit child seed from a root seed and a label.

    Uses SHA-256 so the split is stable across platforms and Python builds.
    """
    digest = hashlib.sha256(f"{root_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def default_config() -> RunConfig:
    return RunConfig()
