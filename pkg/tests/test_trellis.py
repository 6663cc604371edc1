"""Encoder state machine and generator parsing."""

import numpy as np
import pytest

from scturbo import GeneratorSpec, build_trellis, encode


def test_parse_standard_form():
    g = GeneratorSpec.parse("1,5/7")
    assert g.feedforward == "5"
    assert g.feedback == "7"
    assert g.memory == 2
    assert str(g) == "1,5/7"


def test_parse_without_systematic_prefix():
    assert GeneratorSpec.parse("5/7") == GeneratorSpec.parse("1,5/7")


@pytest.mark.parametrize("text", [
    "5",           # no feedback part
    "1,5/4",       # even feedback has no well-defined recursion
    "1,5/0",
    "1,8/7",       # 8 is not an octal digit
    "1,5/7/3",
    "",
    "1,5/77777",   # memory above the supported range
])
def test_parse_rejects_malformed_generators(text):
    with pytest.raises(ValueError):
        GeneratorSpec.parse(text)


def test_trellis_shape_and_reset_transitions():
    t = build_trellis(GeneratorSpec.parse("1,5/7"))
    assert t.num_states == 4
    assert t.next_state.shape == (4, 2)
    assert t.parity_out.shape == (4, 2)
    # from the zero state the zero input loops back with zero parity
    assert t.next_state[0, 0] == 0
    assert t.parity_out[0, 0] == 0


def test_incoming_lists_invert_next_state():
    t = build_trellis(GeneratorSpec.parse("1,5/7"))
    pairs = {(s, u) for s in range(t.num_states) for u in (0, 1)}
    seen = set()
    for state in range(t.num_states):
        for prev, u in t.incoming[state]:
            assert t.next_state[prev, u] == state
            seen.add((prev, u))
    assert seen == pairs


def test_termination_tail_returns_to_zero():
    t = build_trellis(GeneratorSpec.parse("1,5/7"))
    for start in range(t.num_states):
        s = start
        for u in t.termination_inputs(start):
            s = int(t.next_state[s, u])
        assert s == 0


def test_encode_zero_input_is_all_zero():
    t = build_trellis(GeneratorSpec.parse("1,5/7"))
    sys_bits, par_bits, final = encode(t, np.zeros(16, dtype=np.uint8))
    assert final == 0
    assert not sys_bits.any()
    assert not par_bits.any()


def test_encode_impulse_response_frozen():
    t = build_trellis(GeneratorSpec.parse("1,5/7"))
    sys_bits, par_bits, final = encode(t, [1, 0, 0, 0, 0, 0])
    assert final == 0
    assert sys_bits.tolist() == [1, 0, 0, 0, 0, 0, 1, 0]
    assert par_bits.tolist() == [1, 1, 1, 0, 1, 1, 1, 0]


def test_encode_is_linear_over_terminated_blocks():
    t = build_trellis(GeneratorSpec.parse("1,5/7"))
    rng = np.random.default_rng(7)
    for _ in range(25):
        a = rng.integers(0, 2, size=40, dtype=np.uint8)
        b = rng.integers(0, 2, size=40, dtype=np.uint8)
        sa, pa, _ = encode(t, a)
        sb, pb, _ = encode(t, b)
        sc, pc, _ = encode(t, a ^ b)
        assert np.array_equal(sc, sa ^ sb)
        assert np.array_equal(pc, pa ^ pb)


def test_encode_without_termination_tracks_state():
    t = build_trellis(GeneratorSpec.parse("1,5/7"))
    info = [1, 1, 0, 1]
    sys_bits, par_bits, final = encode(t, info, terminate=False)
    assert sys_bits.tolist() == info
    assert len(par_bits) == len(info)
    s = 0
    for u in info:
        s = int(t.next_state[s, u])
    assert final == s


@pytest.mark.parametrize("bad", [
    [[0, 1], [1, 0]],   # not one-dimensional
    [0, 2, 1],          # non-binary symbol
    [0.5, 0.5],
])
def test_encode_rejects_invalid_input(bad):
    t = build_trellis(GeneratorSpec.parse("1,5/7"))
    with pytest.raises(ValueError):
        encode(t, bad)


def test_accumulator_generator():
    # 1/(1+D): parity accumulates the running input parity
    t = build_trellis(GeneratorSpec.parse("1,1/3"))
    assert t.num_states == 2
    info = np.array([1, 0, 1, 1, 0], dtype=np.uint8)
    _, par, _ = encode(t, info, terminate=False)
    assert np.array_equal(par, np.cumsum(info) % 2)
