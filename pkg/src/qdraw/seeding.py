"""Deterministic seed derivation.

Every stochastic stage of the pipeline draws from its own child seed so
that reordering or parallelising independent work cannot perturb results.
Child seeds are derived with splitmix64: the master seed is finalised
once, then each extra part is xor-folded in and finalised again.
"""

_MASK = (1 << 64) - 1

# Stream tags keep draws for different purposes statistically independent
# even when (master, generation, index) coincide.
STREAM_GENOME = 1
STREAM_RENDER = 2
STREAM_BREED = 3
STREAM_SPAWN = 4
STREAM_NOISE = 5
STREAM_KMEANS = 6
STREAM_TSNE = 7


def splitmix64(x: int) -> int:
    """One splitmix64 finalisation round (Steele et al.)."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def child_seed(master: int, *parts: int) -> int:
    """Derive a 64-bit child seed from a master seed and integer parts."""
    h = splitmix64(master & _MASK)
    for p in parts:
        h = splitmix64(h ^ (p & _MASK))
    return h
