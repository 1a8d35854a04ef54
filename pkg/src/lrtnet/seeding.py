"""Deterministic random substreams derived from a single run seed.

Every source of randomness in a run (weight init, data sampling, epoch
permutations, test draws) pulls its own named generator, so runs are
bit-reproducible and adding a new consumer never perturbs existing ones.
"""

import numpy as np


def _tag_to_int(tag):
    if isinstance(tag, (int, np.integer)):
        return int(tag)
    if isinstance(tag, str):
        # stable across processes, unlike hash()
        return int.from_bytes(tag.encode("utf-8"), "little")
    raise TypeError(f"substream tag must be int or str, got {type(tag).__name__}")


def substream(seed, *tags):
    """Return a Generator keyed by (seed, *tags).

    Tags may be strings or ints; the same (seed, tags) always yields an
    identical stream, and distinct tags yield statistically independent ones.
    """
    entropy = [int(seed)] + [_tag_to_int(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))
