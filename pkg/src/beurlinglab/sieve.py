"""Prime sieves backing the usual-prime constructions."""

from __future__ import annotations

import numpy as np

from .errors import CapacityError, DomainError

SIEVE_LIMIT = 10**9
_SEGMENT = 1 << 22
_PLAIN_LIMIT = 5 * 10**7


_cache: dict = {}


def primes_upto(limit: float) -> np.ndarray:
    """All rational primes <= limit as a read-only int64 array.

    Segmented above 5e7; the most recent large result is cached since the
    plus/minus constructions re-sieve the same horizon.
    """
    if limit < 2:
        raise DomainError("sieve needs limit >= 2")
    if limit > SIEVE_LIMIT:
        raise CapacityError(f"sieve bound is {SIEVE_LIMIT}, got {limit!r}")
    n = int(limit)
    if n in _cache:
        return _cache[n]
    out = _plain(n) if n <= _PLAIN_LIMIT else _segmented(n)
    out.setflags(write=False)
    if n > _PLAIN_LIMIT:
        _cache.clear()
        _cache[n] = out
    return out


def _plain(n: int) -> np.ndarray:
    mask = np.ones(n + 1, dtype=bool)
    mask[:2] = False
    for p in range(2, int(n**0.5) + 1):
        if mask[p]:
            mask[p * p :: p] = False
    return np.flatnonzero(mask).astype(np.int64)


def _segmented(n: int) -> np.ndarray:
    small = _plain(int(n**0.5) + 1)
    chunks = [small]
    lo = int(small[-1]) + 1
    while lo <= n:
        hi = min(lo + _SEGMENT, n + 1)
        mask = np.ones(hi - lo, dtype=bool)
        for p in small:
            p = int(p)
            start = ((lo + p - 1) // p) * p
            if start < p * p:
                start = p * p
            if start < hi:
                mask[start - lo :: p] = False
        chunks.append((np.flatnonzero(mask) + lo).astype(np.int64))
        lo = hi
    return np.concatenate(chunks)


def prime_count(limit: float) -> int:
    return int(primes_upto(limit).size) if limit >= 2 else 0
