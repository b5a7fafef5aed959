"""Counter-based RNG: known-answer vectors, stream layout, determinism."""

import numpy as np
import pytest
from scipy.special import ndtri

from uvol.rng import PathStream, normal_pair, philox4x32, uniform_pair


def test_philox_known_answer_zeros():
    # Reference vectors for the 10-round 4x32 generator
    assert tuple(int(w) for w in philox4x32(0, 0, 0, 0, 0, 0)) == (
        0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)


def test_philox_known_answer_ones():
    ff = 0xFFFFFFFF
    assert tuple(int(w) for w in philox4x32(ff, ff, ff, ff, ff, ff)) == (
        0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)


def test_philox_known_answer_pi_digits():
    out = philox4x32(0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344,
                     0xA4093822, 0x299F31D0)
    assert tuple(int(w) for w in out) == (
        0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)


def test_philox_vectorized_counters():
    c0 = np.arange(5, dtype=np.uint64)
    out = philox4x32(c0, 0, 0, 0, 0, 0)
    for k in range(5):
        single = philox4x32(int(c0[k]), 0, 0, 0, 0, 0)
        assert all(int(a[k]) == int(b) for a, b in zip(out, single))


def test_uniform_pair_range_and_determinism():
    paths = np.arange(20000)
    u1, u2 = uniform_pair(3, paths, 1, 7)
    assert np.all((u1 > 0) & (u1 < 1))
    assert np.all((u2 > 0) & (u2 < 1))
    # same address twice gives the identical doubles
    v1, v2 = uniform_pair(3, paths, 1, 7)
    assert np.array_equal(u1, v1) and np.array_equal(u2, v2)
    # roughly uniform moments at this sample size
    assert abs(u1.mean() - 0.5) < 0.01
    assert abs(np.mean(u1 * u1) - 1.0 / 3.0) < 0.01


def test_uniform_pair_distinct_addresses():
    base = uniform_pair(0, 5, 0, 9)
    assert uniform_pair(0, 5, 0, 10) != base
    assert uniform_pair(0, 5, 1, 9) != base
    assert uniform_pair(0, 6, 0, 9) != base
    assert uniform_pair(1, 5, 0, 9) != base


def test_uniform_pair_frozen_value():
    u1, u2 = uniform_pair(0, 0, 0, 0)
    assert u1 == pytest.approx(0.39904647084896455, rel=1e-16)
    assert u2 == pytest.approx(0.7357127844834426, rel=1e-16)


def test_uniform_pair_large_path_indices():
    """Path indices beyond 2^32 must map to distinct counters."""
    lo = uniform_pair(0, 2 ** 32 - 1, 0, 0)
    hi = uniform_pair(0, 2 ** 32, 0, 0)
    assert lo != hi


def test_normal_pair_is_inverse_cdf_of_uniforms():
    paths = np.arange(100)
    u1, u2 = uniform_pair(11, paths, 1, 4)
    n1, n2 = normal_pair(11, paths, 4)
    assert np.allclose(n1, ndtri(u1), rtol=0, atol=0)
    assert np.allclose(n2, ndtri(u2), rtol=0, atol=0)


def test_normal_moments():
    paths = np.arange(200000)
    n1, n2 = normal_pair(1, paths, 0)
    for n in (n1, n2):
        assert abs(n.mean()) < 0.01
        assert abs(n.std() - 1.0) < 0.01
    assert abs(np.mean(n1 * n2)) < 0.01  # independent coordinates


def test_path_stream_layout_matches_flat_functions():
    ps = PathStream(seed=7, path_index=3)
    gaps = [ps.next_gap_uniform() for _ in range(4)]
    expected = [uniform_pair(7, 3, 0, k)[0] for k in range(4)]
    assert gaps == expected
    for interval in (0, 1, 5):
        assert PathStream(seed=7, path_index=3).normals_for_interval(interval) \
            == normal_pair(7, 3, interval)


def test_gap_and_normal_streams_do_not_collide():
    """Consuming gap draws never changes the Gaussian draws."""
    ps = PathStream(seed=9, path_index=1)
    before = ps.normals_for_interval(0)
    for _ in range(5):
        ps.next_gap_uniform()
    assert ps.normals_for_interval(0) == before
