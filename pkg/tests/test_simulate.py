"""Finite-length chain simulator: wiring, channel, decoding, sweeps."""

import numpy as np
import pytest

from scturbo import (ERASED, EnsembleSpec, GeneratorSpec, build_instance,
                     build_trellis, decode_chain, encode, encode_chain,
                     simulated_profiles, sweep, transmit)
from scturbo.simulate import PAD, VIRTUAL, _coupling_maps

GEN = GeneratorSpec.parse("1,5/7")


def _spec(m=1, length=6):
    return EnsembleSpec("pcc", (GEN, GEN), coupling_memory=m,
                        coupling_length=length)


@pytest.mark.parametrize("seed", range(5))
def test_coupling_maps_wiring(seed):
    rng = np.random.default_rng(seed)
    length, bits, m = 7, 12, 2
    slot_pos, slot_idx, src_pos, src_idx = _coupling_maps(rng, length, bits, m)
    per = bits // (m + 1)
    # offsets stay inside the window and are perfectly balanced where the
    # whole window fits in the chain
    for t in range(length):
        real = slot_pos[t] != VIRTUAL
        offsets = slot_pos[t, real] - t
        assert ((offsets >= 0) & (offsets <= m)).all()
        if t < length - m:
            assert real.all()
            assert (np.bincount(offsets, minlength=m + 1) == per).all()
    # slot_pos/slot_idx and src_pos/src_idx are inverse of each other
    for t in range(length):
        for i in range(bits):
            tau, k = slot_pos[t, i], slot_idx[t, i]
            if tau == VIRTUAL:
                assert t >= length - m
            else:
                assert src_pos[tau, k] == t
                assert src_idx[tau, k] == i
    # slots with no source sit at the chain start, fed by known zeros
    for tau in range(length):
        pads = int((src_pos[tau] == PAD).sum())
        assert pads == max(m - tau, 0) * per
        assert (src_idx[tau][src_pos[tau] == PAD] == -1).all()


def test_build_instance_validation():
    with pytest.raises(ValueError):
        build_instance(_spec(m=1, length=4), 1)   # block inside the window
    with pytest.raises(ValueError):
        build_instance(_spec(m=2, length=4), 8)   # 8 bits over 3 offsets
    with pytest.raises(ValueError):
        encode_chain(build_instance(_spec(m=1, length=4), 8),
                     np.zeros((4, 6), dtype=np.uint8))


def test_all_zero_input_gives_all_zero_codeword():
    rng = np.random.default_rng(1)
    inst = build_instance(_spec(), 12, rng)
    cw = encode_chain(inst, np.zeros((6, 12), dtype=np.uint8))
    for stream in cw.streams.values():
        assert not stream.any()


def test_single_one_excites_only_its_consumer_block():
    rng = np.random.default_rng(10)
    inst = build_instance(_spec(m=1, length=6), 8, rng)
    info = np.zeros((6, 8), dtype=np.uint8)
    info[2, 3] = 1
    cw = encode_chain(inst, info)
    tau = int(inst.upper_maps[0][2, 3])
    assert tau in (2, 3)
    assert not cw.streams["upper_par"][:tau].any()
    assert cw.streams["upper_par"][tau].any()


def test_uncoupled_encoding_matches_component_encoder():
    spec = EnsembleSpec("pcc", (GEN, GEN))
    rng = np.random.default_rng(11)
    inst = build_instance(spec, 16, rng)
    info = rng.integers(0, 2, size=(1, 16), dtype=np.uint8)
    cw = encode_chain(inst, info)
    trellis = build_trellis(GEN)
    for maps, stream in ((inst.upper_maps, "upper_par"),
                         (inst.lower_maps, "lower_par")):
        block_in = info[0][maps[3][0]]
        _, par, _ = encode(trellis, block_in, terminate=False)
        assert np.array_equal(cw.streams[stream][0], par)


def test_transmit_endpoints_and_validation():
    rng = np.random.default_rng(2)
    inst = build_instance(_spec(), 12, rng)
    info = rng.integers(0, 2, size=(6, 12), dtype=np.uint8)
    cw = encode_chain(inst, info)
    clean = transmit(inst, cw, 0.0, rng)
    for name, bits in cw.streams.items():
        assert np.array_equal(clean.streams[name], bits)
    blank = transmit(inst, cw, 1.0, rng)
    for obs in blank.streams.values():
        assert (obs == ERASED).all()
    with pytest.raises(ValueError):
        transmit(inst, cw, 1.5, rng)


def test_transmit_applies_puncturing():
    spec = EnsembleSpec("pcc", (GEN, GEN), coupling_memory=1,
                        coupling_length=6, rho=0.4)
    rng = np.random.default_rng(3)
    inst = build_instance(spec, 12, rng)
    info = rng.integers(0, 2, size=(6, 12), dtype=np.uint8)
    cw = encode_chain(inst, info)
    obs = transmit(inst, cw, 0.0, rng)
    assert np.array_equal(obs.streams["sys"], info)  # systematic always sent
    erased = obs.streams["upper_par"] == ERASED
    assert np.array_equal(erased, ~inst.upper_keep)


def test_decode_clean_channel_is_immediate():
    rng = np.random.default_rng(4)
    inst = build_instance(_spec(), 12, rng)
    info = rng.integers(0, 2, size=(6, 12), dtype=np.uint8)
    cw = encode_chain(inst, info)
    result = decode_chain(inst, transmit(inst, cw, 0.0, rng), cw)
    assert result.resolved
    assert result.iterations == 1
    assert np.array_equal(result.info_estimate, info)
    assert result.bit_erasure_rate == 0.0
    assert not result.frame_error


@pytest.mark.parametrize("seed,eps", [(0, 0.5), (1, 0.5), (2, 0.8), (3, 1.0)])
def test_decoding_profiles_shrink_without_contradiction(seed, eps):
    rng = np.random.default_rng(100 + seed)
    inst = build_instance(_spec(m=1, length=6), 12, rng)
    info = rng.integers(0, 2, size=(6, 12), dtype=np.uint8)
    cw = encode_chain(inst, info)
    obs = transmit(inst, cw, eps, rng)
    result = decode_chain(inst, obs, cw, max_iterations=30,
                          record_profiles=True)
    assert result.profiles.shape == (31, 6)
    assert result.profiles.min() >= 0.0 and result.profiles.max() <= 1.0
    assert (np.diff(result.profiles, axis=0) <= 1e-12).all()
    if result.resolved:
        assert np.array_equal(result.info_estimate, info)
    else:
        unresolved = result.info_estimate == ERASED
        assert np.array_equal(np.where(unresolved, info, result.info_estimate),
                              info)


def test_scc_chain_round_trip():
    spec = EnsembleSpec("scc", (GEN, GEN), coupling_memory=1,
                        coupling_length=4)
    rng = np.random.default_rng(12)
    inst = build_instance(spec, 12, rng)
    info = rng.integers(0, 2, size=(4, 12), dtype=np.uint8)
    cw = encode_chain(inst, info)
    result = decode_chain(inst, transmit(inst, cw, 0.0, rng), cw)
    assert result.resolved and result.iterations == 1
    assert np.array_equal(result.info_estimate, info)
    noisy = decode_chain(inst, transmit(inst, cw, 0.35, rng), cw,
                         max_iterations=30)
    assert noisy.unresolved_info >= 0  # ran without contradiction


def test_sweep_reproducible_and_sane():
    spec = _spec(m=1, length=4)
    a = sweep(spec, 8, [0.0, 0.2, 0.9], trials=6, seed=3, max_iterations=20)
    b = sweep(spec, 8, [0.0, 0.2, 0.9], trials=6, seed=3, max_iterations=20)
    assert a == b
    assert a[0].bit_erasure_rate == 0.0
    assert a[0].frame_erasure_rate == 0.0
    assert a[2].bit_erasure_rate >= a[1].bit_erasure_rate
    assert a[2].bit_erasure_rate > 0.1
    assert all(p.trials == 6 for p in a)


def test_sweep_threads_preserve_results():
    spec = _spec(m=1, length=4)
    serial = sweep(spec, 8, [0.1, 0.8], trials=4, seed=5)
    threaded = sweep(spec, 8, [0.1, 0.8], trials=4, seed=5, threads=2)
    assert serial == threaded


def test_simulated_profiles_shape_and_monotonicity():
    prof = simulated_profiles(_spec(m=1, length=5), 8, 0.6, trials=3,
                              iterations=6, seed=7)
    assert prof.shape == (7, 5)
    assert prof.min() >= 0.0 and prof.max() <= 1.0
    assert (np.diff(prof, axis=0) <= 1e-12).all()
