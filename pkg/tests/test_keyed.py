import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from cpdelab import keyed


@given(st.integers(min_value=0, max_value=2**64 - 1))
def test_mix64_matches_vector_path(h):
    assert keyed.mix64(h) == int(keyed.mix64_vec(np.uint64(h)))


@given(st.integers(min_value=-(2**63), max_value=2**63 - 1),
       st.lists(st.integers(min_value=-(2**20), max_value=2**20),
                min_size=1, max_size=6))
@settings(max_examples=200)
def test_chain_matches_vector_absorb(seed, comps):
    state = keyed.seed_state(seed)
    expect = keyed.chain(state, comps)
    vec = np.uint64(state)
    for c in comps:
        vec = keyed.absorb_vec(vec, keyed.encode_i64(np.int64(c)))
    assert expect == int(vec)


def test_uniform_ranges():
    for h in (0, 1, 2**64 - 1, 123456789):
        u_open = keyed.unit_open(h)
        u_closed = keyed.unit_closed(h)
        assert 0.0 <= u_open < 1.0
        assert 0.0 < u_closed <= 1.0


def test_exponential_zero_rate_is_infinite():
    assert keyed.exponential(12345, 0.0) == math.inf


def test_exponential_matches_vector():
    states = np.arange(1, 2000, dtype=np.uint64) * np.uint64(2654435761)
    vec = keyed.exponential_vec(states, 3.0)
    sca = [keyed.exponential(int(s), 3.0) for s in states]
    assert np.allclose(vec, sca, rtol=1e-15, atol=0.0)


def test_uniform_mean_and_autocorrelation():
    states = keyed.absorb_vec(np.uint64(keyed.seed_state(7)),
                              np.arange(10**6, dtype=np.uint64))
    u = keyed.unit_open_vec(states)
    n = len(u)
    assert abs(u.mean() - 0.5) < 3.0 * math.sqrt(1.0 / 12.0 / n)
    lag1 = np.corrcoef(u[:-1], u[1:])[0, 1]
    assert abs(lag1) < 4.0 / math.sqrt(n)


def test_absorb_distinguishes_order():
    s = keyed.seed_state(1)
    assert keyed.chain(s, [1, 2]) != keyed.chain(s, [2, 1])
    assert keyed.chain(s, [1, 2]) != keyed.chain(s, [1, 3])


def test_negative_components_key_cleanly():
    s = keyed.seed_state(9)
    assert keyed.chain(s, [-3, 5]) != keyed.chain(s, [3, 5])
    assert keyed.chain(s, [-3, 5]) == keyed.chain(s, [-3, 5])
