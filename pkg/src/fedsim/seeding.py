"""Deterministic seed derivation for every stochastic choice in a run.

All randomness in an experiment flows from one master seed through
:func:`seed_for`. A derived seed is a ``numpy.random.SeedSequence`` built
from the entropy list ``[master_seed, enc(p0), enc(p1), ...]`` where integer
path elements pass through unchanged and strings are encoded as the first
8 bytes of their SHA-256 digest. The path names the purpose of the stream,
e.g. ``seed_for(seed, "train", round_idx, client_id)``, so parallel and
sequential execution of the same run consume identical streams.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _encode(part: int | str) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part)
    digest = hashlib.sha256(part.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def seed_for(master_seed: int, *path: int | str) -> np.random.SeedSequence:
    """Derive the seed sequence for one named stochastic decision."""
    return np.random.SeedSequence([int(master_seed)] + [_encode(p) for p in path])


def rng_for(master_seed: int, *path: int | str) -> np.random.Generator:
    """Generator over the derived stream; see :func:`seed_for`."""
    return np.random.default_rng(seed_for(master_seed, *path))


def as_rng(seed) -> np.random.Generator:
    """Coerce a seed-ish argument (int, SeedSequence, Generator) to a Generator.

    Passing a Generator through unchanged lets callers hand an already
    positioned stream to functions that take a ``seed`` argument.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
