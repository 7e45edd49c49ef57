"""Seed derivation: one master seed, per-task child generators.

Every random choice in the package flows through a numpy PCG64 generator
derived deterministically from (master seed, task path). Identical seeds and
paths reproduce identical streams on any platform.
"""

from __future__ import annotations

import zlib

import numpy as np

GENERATOR_NAME = "numpy-PCG64"


def _path_key(part: str | int) -> int:
    if isinstance(part, int):
        return part & 0xFFFFFFFF
    return zlib.crc32(part.encode("utf-8"))


def make_rng(seed: int, *path: str | int) -> np.random.Generator:
    """Return a generator for the task identified by `path` under `seed`."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_path_key(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))
