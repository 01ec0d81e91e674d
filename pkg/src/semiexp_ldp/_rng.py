"""Counter-based random streams.

Every stochastic routine in the package splits its work into fixed-size
batches and draws batch ``b`` from the Philox stream keyed by ``seed`` with
the counter's top word set to ``b``.  Streams are therefore disjoint, and the
output does not depend on how batches are scheduled across workers.
"""

import numpy as np

BATCH_SIZE = 1 << 16


def batch_generator(seed, batch):
    seed = int(seed)
    if seed < 0 or seed >= 1 << 64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    counter = np.array([0, 0, 0, int(batch)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=seed, counter=counter))


def batch_sizes(total, size=BATCH_SIZE):
    """Split ``total`` into consecutive batch sizes of at most ``size``."""
    full, rest = divmod(int(total), int(size))
    return [size] * full + ([rest] if rest else [])
