"""Deterministic counter-based random streams.

Every random quantity in a run is a pure 64-bit hash of (seed, stream,
counter), so any slot of any stream can be regenerated on demand without
replaying the sequence: receivers rebuild encoder coefficients from the
shared seed, and a debugging tool can re-draw an arbitrary slot in O(1).
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from numba import njit

# Stream-domain offsets keep channel, injection, coefficient and payload
# draws in disjoint regions of the stream axis.  Receiver indices and packet
# ids are added to a base offset and must stay below 2**40.
DOMAIN_CHANNEL = 1 << 40
DOMAIN_INJECT = 2 << 40
DOMAIN_COEF = 3 << 40
DOMAIN_PAYLOAD = 4 << 40

_M1 = np.uint64(0x9E3779B97F4A7C15)
_M2 = np.uint64(0xD1B54A32D192ED03)
_M3 = np.uint64(0x8CB92BA72F3D8DD7)
_F1 = np.uint64(0xBF58476D1CE4E5B9)
_F2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)

_U64_MASK = (1 << 64) - 1


@njit(cache=True)
def mix64(seed, stream, counter):
    """Hash a (seed, stream, counter) triple of uint64 to one uint64.

    Linear combination with odd multipliers followed by a SplitMix64-style
    finalizer; distinct triples give statistically independent outputs.
    """
    x = seed * _M1 + stream * _M2 + counter * _M3
    x ^= x >> _S30
    x *= _F1
    x ^= x >> _S27
    x *= _F2
    x ^= x >> _S31
    return x


def mix64_array(seed, stream, counter) -> np.ndarray:
    """Vectorised mix64 over numpy uint64 inputs (broadcasting)."""
    seed = np.asarray(seed, dtype=np.uint64)
    stream = np.asarray(stream, dtype=np.uint64)
    counter = np.asarray(counter, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = seed * _M1 + stream * _M2 + counter * _M3
        x = x ^ (x >> _S30)
        x = x * _F1
        x = x ^ (x >> _S27)
        x = x * _F2
        x = x ^ (x >> _S31)
    return x


def as_seed(value: int) -> np.uint64:
    return np.uint64(value & _U64_MASK)


def probability_threshold(p) -> int:
    """Largest uint64 ``t`` such that ``mix64(...) <= t`` fires w.p. ~p.

    The acceptance probability is floor(p * 2**64) / 2**64, exact for p = 1
    (the comparison then always holds) and within 2**-64 otherwise.
    """
    frac = Fraction(p)
    if not 0 < frac <= 1:
        raise ValueError(f"probability must be in (0, 1], got {p!r}")
    count = (frac * (1 << 64)).__floor__()
    if count < 1:
        count = 1
    return count - 1


def channel_indicators(seed: int, gammas_threshold: np.ndarray, t: int) -> np.ndarray:
    """Per-receiver delivery indicators for slot t, one independent stream each."""
    n = gammas_threshold.shape[0]
    streams = np.arange(DOMAIN_CHANNEL, DOMAIN_CHANNEL + n, dtype=np.uint64)
    u = mix64_array(as_seed(seed), streams, np.uint64(t))
    return (u <= gammas_threshold).astype(np.uint8)


def injection_indicator(seed: int, threshold: int, t: int) -> int:
    u = mix64_array(as_seed(seed), np.uint64(DOMAIN_INJECT), np.uint64(t))
    return int(u <= np.uint64(threshold))


def coefficients(seed: int, t: int, lo: int, hi: int, order: int) -> np.ndarray:
    """Nonzero field coefficients for the window lo..hi of slot t.

    Keyed per (seed, packet id, slot) so a receiver can rebuild any single
    column without knowing the rest of the window.
    """
    if hi < lo:
        return np.empty(0, dtype=np.uint16)
    streams = np.arange(DOMAIN_COEF + lo, DOMAIN_COEF + hi + 1, dtype=np.uint64)
    u = mix64_array(as_seed(seed), streams, np.uint64(t))
    return (np.uint64(1) + u % np.uint64(order - 1)).astype(np.uint16)


def payload_symbols(seed: int, packet_id: int, count: int, order: int) -> np.ndarray:
    """Deterministic symbol block for packet ``packet_id``."""
    counters = np.arange(count, dtype=np.uint64)
    u = mix64_array(as_seed(seed), np.uint64(DOMAIN_PAYLOAD + packet_id), counters)
    return (u & np.uint64(order - 1)).astype(np.uint16)
