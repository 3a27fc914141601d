"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(master_seed, tag, index...)``
through :class:`numpy.random.SeedSequence`, so a trajectory's draws depend
only on its key and never on scheduling or worker count.
"""

import numpy as np

# stream tags; keep values stable, they are part of the reproducibility contract
SIGNAL = 1
SERVICE = 2
NOISE = 3
GAP = 4
PATH = 5
SEARCH = 6
POLISH = 7
VALIDATE = 8
LEMMA = 9
SERVICE_MEAN = 10


def stream(master_seed, *key):
    """Return an independent Philox generator for ``(master_seed, *key)``."""
    if int(master_seed) < 0:
        raise ValueError("master_seed must be non-negative")
    entropy = [int(master_seed)] + [int(k) for k in key]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def split_counts(n, batch):
    """Split ``n`` items into consecutive batch sizes of at most ``batch``.

    The split depends only on ``n`` and ``batch`` so that seeding by batch
    index is independent of how batches are scheduled.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    full, rest = divmod(int(n), int(batch))
    return [int(batch)] * full + ([rest] if rest else [])


def pairwise_sum(values):
    """Order-fixed pairwise reduction of a sequence of floats or arrays."""
    values = list(values)
    if not values:
        return 0.0
    while len(values) > 1:
        nxt = [values[i] + values[i + 1] for i in range(0, len(values) - 1, 2)]
        if len(values) % 2:
            nxt.append(values[-1])
        values = nxt
    return values[0]
