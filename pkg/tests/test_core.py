import pytest
from hypothesis import given, strategies as st

from camelcc.core import InvariantViolation, SimClock, packetize


def test_packetize_with_remainder():
    assert packetize(3000, 1200) == [1200, 1200, 600]


def test_packetize_single_packet():
    assert packetize(1200, 1200) == [1200]


def test_packetize_exact_multiple():
    assert packetize(2400, 1200) == [1200, 1200]


def test_packetize_empty_frame():
    with pytest.raises(ValueError, match="empty frame"):
        packetize(0, 1200)


@given(st.integers(min_value=1, max_value=200_000),
       st.integers(min_value=1, max_value=2000))
def test_packetize_sums_and_count(frame_size, mtu):
    sizes = packetize(frame_size, mtu)
    assert sum(sizes) == frame_size
    assert len(sizes) == -(-frame_size // mtu)
    assert all(s <= mtu for s in sizes)
    assert all(s == mtu for s in sizes[:-1])


def test_clock_monotone():
    clock = SimClock()
    clock.advance_to(10)
    clock.advance_to(10)
    assert clock.now == 10
    with pytest.raises(InvariantViolation):
        clock.advance_to(9)
