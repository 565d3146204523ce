"""Counter-based random streams.

Every draw is addressed by ``(seed, *key, block)``: a Philox generator is
seeded from that tuple, so the numbers assigned to a given block of samples
never depend on how the work is scheduled.  Large draws are split into
fixed-size blocks which may be filled by a thread pool; the result is
identical for any thread count.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK = 4096

_KEY_CODES = {}


def _encode(part):
    if isinstance(part, (int, np.integer)):
        return int(part)
    # strings map to a stable integer derived from their bytes
    code = _KEY_CODES.get(part)
    if code is None:
        code = int.from_bytes(str(part).encode("utf-8")[:16].ljust(16, b"\0"), "little")
        _KEY_CODES[part] = code
    return code


def generator(seed, *key):
    """A Philox generator for one address."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_encode(k) for k in key]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


_threads = 1


def set_threads(n):
    """Number of worker threads used to fill blocks (1 = serial)."""
    global _threads
    if int(n) < 1:
        raise ValueError("thread count must be at least 1")
    _threads = int(n)


def get_threads():
    return _threads


def fill(seed, key, n, draw, width, block=BLOCK):
    """Stack ``draw(rng, m)`` over blocks of at most ``block`` rows.

    ``draw`` must return an array of shape ``(m, *width)``.  Block ``b``
    covers rows ``[b*block, (b+1)*block)`` and uses ``generator(seed, *key, b)``.
    """
    width = tuple(int(w) for w in np.atleast_1d(width))
    out = np.empty((n,) + width)

    def work(rng, lo, hi):
        out[lo:hi] = draw(rng, hi - lo)

    map_blocks(seed, key, n, work, block)
    return out


def map_blocks(seed, key, n, fn, block=BLOCK):
    """Call ``fn(rng, lo, hi)`` for every block of ``n`` rows; returns the results in block order."""
    bounds = [(b, lo, min(n, lo + block)) for b, lo in enumerate(range(0, n, block))]

    def work(item):
        b, lo, hi = item
        return fn(generator(seed, *key, b), lo, hi)

    if _threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(_threads) as pool:
            return list(pool.map(work, bounds))
    return [work(item) for item in bounds]


def normal(seed, key, n, width, block=BLOCK):
    """Standard normal draws of shape ``(n, *width)``."""
    shape = tuple(int(w) for w in np.atleast_1d(width))
    return fill(seed, key, n, lambda rng, m: rng.standard_normal((m,) + shape), shape, block)


def uniform(seed, key, n, low, high, block=BLOCK):
    """Uniform draws in the box ``[low, high)`` of shape ``(n, len(low))``."""
    low = np.atleast_1d(np.asarray(low, dtype=np.float64))
    high = np.atleast_1d(np.asarray(high, dtype=np.float64))
    d = low.size
    return fill(seed, key, n, lambda rng, m: low + (high - low) * rng.random((m, d)), d, block)
