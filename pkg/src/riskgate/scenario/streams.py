"""Keyed random substreams.

Every consumer draws from its own stream derived from (seed, label, ...), so
turning one consumer off never shifts the draws seen by another.
"""
from __future__ import annotations

import hashlib
import random

import numpy as np


def stream_key(seed: int, *labels: object) -> int:
    h = hashlib.blake2b(repr((seed, *labels)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def substream(seed: int, *labels: object) -> random.Random:
    return random.Random(stream_key(seed, *labels))


def np_substream(seed: int, *labels: object) -> np.random.Generator:
    return np.random.default_rng(stream_key(seed, *labels))
