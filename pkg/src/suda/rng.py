"""Seed handling: one root seed, one derived stream per named consumer.

Every piece of randomness in the package flows through `substream`. A
stream is identified by the root seed plus a path of string/int labels
(e.g. ``substream(seed, "trajectory")``). Labels are hashed with SHA-256,
so adding a new consumer label never perturbs the streams of existing
consumers, and identical (seed, labels) always yield the same generator.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import ConfigError


def _label_words(label: str) -> list[int]:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def substream(seed: int, *labels: str | int) -> np.random.Generator:
    """Derive an independent, reproducible generator for one consumer."""
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    entropy: list[int] = [int(seed)]
    for label in labels:
        if isinstance(label, (int, np.integer)):
            if label < 0:
                raise ConfigError(f"stream label ints must be >= 0, got {label}")
            entropy.append(int(label))
        else:
            entropy.extend(_label_words(str(label)))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
