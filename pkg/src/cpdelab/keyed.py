"""Deterministic keyed randomness.

Every random quantity in this package is a pure function of
``(master seed, key components..., family tag)``, computed by absorbing the
key into a splitmix64-style mixing chain.  There is no sequential generator
state: two consumers that agree on the key see the same value, which is what
the shared-randomness couplings rely on.

Scalar (plain ``int``) and vectorized (``numpy.uint64``) paths implement the
identical chain.  Mark positions and Bernoulli/uniform draws involve only
exact float operations, so the two paths agree bitwise; exponential draws go
through ``log`` and are only ever consumed by a single path per subsystem.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF

_PHI = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_INV53 = 2.0**-53


def mix64(h: int) -> int:
    """splitmix64 finalizer; bijective on 64-bit words."""
    h &= MASK64
    h ^= h >> 30
    h = (h * _M1) & MASK64
    h ^= h >> 27
    h = (h * _M2) & MASK64
    return h ^ (h >> 31)


def seed_state(master_seed: int) -> int:
    """Root chain state for a master seed."""
    return mix64((master_seed & MASK64) ^ _PHI)


def absorb(state: int, component: int) -> int:
    """Absorb one key component (negatives are two's-complement encoded)."""
    h = state ^ (component & MASK64)
    h ^= h >> 30
    h = (h * _M1) & MASK64
    h ^= h >> 27
    h = (h * _M2) & MASK64
    return h ^ (h >> 31)


def chain(state: int, components) -> int:
    # mixing inlined: this sits on the hot path of every keyed lookup
    for c in components:
        h = state ^ (c & MASK64)
        h ^= h >> 30
        h = (h * _M1) & MASK64
        h ^= h >> 27
        h = (h * _M2) & MASK64
        state = h ^ (h >> 31)
    return state


def unit_open(state: int) -> float:
    """Uniform in [0, 1) from a chain state."""
    return (state >> 11) * _INV53


def unit_closed(state: int) -> float:
    """Uniform in (0, 1] from a chain state."""
    return ((state >> 11) + 1) * _INV53


def bernoulli(state: int, prob: float) -> int:
    return 1 if unit_open(state) < prob else 0


def exponential(state: int, rate: float) -> float:
    """Exp(rate) via inverse CDF; rate 0 degenerates to +inf."""
    if rate <= 0.0:
        return math.inf
    return -math.log(unit_closed(state)) / rate


# ---------------------------------------------------------------------------
# Vectorized path.  All constants are wrapped in uint64 so numpy never
# promotes to float64 behind our back.

_V30 = np.uint64(30)
_V27 = np.uint64(27)
_V31 = np.uint64(31)
_V11 = np.uint64(11)
_VM1 = np.uint64(_M1)
_VM2 = np.uint64(_M2)
_VONE = np.uint64(1)


def mix64_vec(h: np.ndarray) -> np.ndarray:
    h = h ^ (h >> _V30)
    h = h * _VM1
    h ^= h >> _V27
    h = h * _VM2
    return h ^ (h >> _V31)


def absorb_vec(state, component) -> np.ndarray:
    """Vector absorb; ``state`` and ``component`` broadcast as uint64."""
    return mix64_vec(np.bitwise_xor(np.uint64(state) if np.isscalar(state) else state,
                                    component))


def encode_i64(values) -> np.ndarray:
    """Signed integers -> their two's-complement uint64 bit patterns."""
    return np.asarray(values, dtype=np.int64).view(np.uint64)


def unit_open_vec(state: np.ndarray) -> np.ndarray:
    return (state >> _V11).astype(np.float64) * _INV53


def unit_closed_vec(state: np.ndarray) -> np.ndarray:
    return ((state >> _V11) + _VONE).astype(np.float64) * _INV53


def exponential_vec(state: np.ndarray, rate: float) -> np.ndarray:
    if rate <= 0.0:
        return np.full(state.shape, np.inf)
    return -np.log(unit_closed_vec(state)) / rate
