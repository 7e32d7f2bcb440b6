"""Seeded, splittable random streams.

Scheme ``philox-seedseq-v1``: a 64-bit seed feeds ``numpy.random.SeedSequence``;
stream i of a run is ``Generator(Philox(SeedSequence(seed).spawn(k)[i]))``.
Philox is counter based, so substreams are independent and results do not
depend on how work is scheduled across threads.
"""

import numpy as np

SCHEME = "philox-seedseq-v1"


def make_rng(seed):
    """Generator for ``seed``; an existing Generator is passed through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def substreams(seed, count):
    """``count`` independent generators derived from one seed, in a fixed order."""
    children = np.random.SeedSequence(int(seed)).spawn(int(count))
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def seed_of(rng):
    """Entropy of the SeedSequence behind a Generator (or the int itself)."""
    if isinstance(rng, np.random.Generator):
        seq = rng.bit_generator.seed_seq
        return int(seq.entropy) if getattr(seq, "entropy", None) is not None else -1
    return int(rng)
