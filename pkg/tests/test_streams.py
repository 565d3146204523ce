import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nplab import streams


@pytest.fixture
def threads():
    previous = streams.get_threads()
    yield streams.set_threads
    streams.set_threads(previous)


class TestStreams:
    def test_same_address_same_numbers(self):
        a = streams.generator(3, "train", 7).random(5)
        b = streams.generator(3, "train", 7).random(5)
        np.testing.assert_array_equal(a, b)

    def test_addresses_are_independent(self):
        draws = {streams.generator(s, k, e).random() for s in (0, 1) for k in ("a", "b") for e in (0, 1)}
        assert len(draws) == 8

    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(1, 20000), block=st.sampled_from([1000, 4096]))
    def test_blocks_are_addressed_by_row(self, n, block):
        full = streams.normal(5, ("x",), n, 2, block)
        assert full.shape == (n, 2)
        # the rows of block b come from generator (seed, *key, b)
        b = (n - 1) // block
        expected = streams.generator(5, "x", b).standard_normal((n - b * block, 2))
        np.testing.assert_array_equal(full[b * block:], expected)

    def test_thread_count_does_not_change_results(self, threads):
        threads(1)
        serial = streams.uniform(9, ("u",), 50000, [-1, 0], [1, 2])
        threads(4)
        parallel = streams.uniform(9, ("u",), 50000, [-1, 0], [1, 2])
        assert serial.tobytes() == parallel.tobytes()
        assert np.all((serial >= [-1, 0]) & (serial < [1, 2]))

    def test_invalid_thread_count(self):
        with pytest.raises(ValueError):
            streams.set_threads(0)

    def test_map_blocks_order(self):
        out = streams.map_blocks(0, (), 10, lambda rng, lo, hi: (lo, hi), block=4)
        assert out == [(0, 4), (4, 8), (8, 10)]
