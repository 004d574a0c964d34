"""Deterministic, splittable random streams.

A stream is identified by ``(master_seed, replica_index, purpose_tag)``.  The
splitting function is numpy's :class:`~numpy.random.SeedSequence` with
``entropy=master_seed`` and ``spawn_key=(purpose_tag, replica_index)``, feeding
a PCG64 bit generator.  Replicas therefore draw the same numbers no matter
which worker runs them or in which order.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

TAG_CHAIN = 1
TAG_SDE = 2
TAG_BRANCHING = 3
TAG_SIZES = 4
TAG_OFFSPRING = 5
TAG_CALIBRATION = 6


class RngStream:
    """One replica's random stream.

    ``generator`` is the numpy Generator used by the Python kernels;
    the compiled kernels read doubles straight from ``bit_generator`` so both
    backends consume the identical sequence.
    """

    __slots__ = ("seed", "replica", "tag", "bit_generator", "generator")

    def __init__(self, seed: int, replica: int = 0, tag: int = 0):
        if replica < 0 or tag < 0:
            raise ValueError("replica index and purpose tag must be nonnegative")
        self.seed = int(seed) & MASK64
        self.replica = int(replica)
        self.tag = int(tag)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.tag, self.replica))
        self.bit_generator = np.random.PCG64(ss)
        self.generator = np.random.Generator(self.bit_generator)

    def random(self) -> float:
        return self.generator.random()

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, replica={self.replica}, tag={self.tag})"


def stream(seed: int, replica: int = 0, tag: int = 0) -> RngStream:
    return RngStream(seed, replica, tag)
