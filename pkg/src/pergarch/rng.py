"""Deterministic random-stream management.

A run is reproducible from a single master seed.  Every pipeline stage
draws from its own named child stream so that adding or reordering
stages never perturbs the draws of another stage:

    stream(seed, "arrivals")          # arrival-time uniforms
    stream(seed, "jumps")             # jump-size draws
    stream(seed, "replicate", 17)     # Monte Carlo replicate 17

The splitting rule is fixed: string tokens are hashed with SHA-256 and
the leading 8 bytes, together with integer tokens, extend the entropy
of a ``numpy.random.SeedSequence``.  Monte Carlo helpers fan out one
generator per replicate with ``Generator.spawn``.
"""

import hashlib

import numpy as np

__all__ = ["stream", "token_int"]


def token_int(token):
    """Map a stream-name token to a stable 64-bit integer."""
    if isinstance(token, (int, np.integer)):
        if token < 0:
            raise ValueError("integer stream tokens must be non-negative")
        return int(token)
    digest = hashlib.sha256(str(token).encode("utf8")).digest()
    return int.from_bytes(digest[:8], "big")


def stream(master_seed, *path):
    """Return the named child generator of ``master_seed``.

    ``path`` is any mix of strings and non-negative integers.  The same
    (seed, path) always yields the same generator state, on every
    platform.
    """
    entropy = (int(master_seed),) + tuple(token_int(t) for t in path)
    return np.random.default_rng(np.random.SeedSequence(entropy))
