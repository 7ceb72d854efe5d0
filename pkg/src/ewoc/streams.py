"""Reproducible random streams for parallel replicates.

Streams are built from the counter-based Philox generator keyed on the study
seed, with the (cell, replicate) pair placed in the high counter words, so a
replicate's stream is a pure function of (seed, cell, replicate) no matter
which worker runs it or in what order.
"""

from __future__ import annotations

import numpy as np


def replicate_stream(seed: int, cell_index: int, replicate: int) -> np.random.Generator:
    bit_gen = np.random.Philox(key=seed & ((1 << 64) - 1),
                               counter=[0, 0, replicate, cell_index])
    return np.random.Generator(bit_gen)
