"""Erasure-channel a-posteriori component decoding."""

import numpy as np
import pytest

from scturbo import (ERASED, GeneratorSpec, bcjr_erasure_decode, build_trellis,
                     decoder_for, encode, encode_batch, mc_transfer_oracle)

GEN = GeneratorSpec.parse("1,5/7")


@pytest.fixture(scope="module")
def trellis():
    return build_trellis(GEN)


@pytest.fixture(scope="module")
def dec():
    return decoder_for(GEN)


def _random_codeword(trellis, rng, n=32):
    info = rng.integers(0, 2, size=n, dtype=np.uint8)
    sys_bits, par_bits, _ = encode(trellis, info)
    return sys_bits.astype(np.uint8), par_bits.astype(np.uint8)


def test_no_erasures_resolves_everything(trellis, dec):
    rng = np.random.default_rng(1)
    sys_bits, par_bits = _random_codeword(trellis, rng)
    ext_sys, ext_par = dec.decode(sys_bits, par_bits, terminated=True)
    assert np.array_equal(ext_sys, sys_bits)
    assert np.array_equal(ext_par, par_bits)


def test_all_erased_open_block_stays_erased(dec):
    blank = np.full(12, ERASED, dtype=np.uint8)
    ext_sys, ext_par = dec.decode(blank, blank)
    assert (ext_sys == ERASED).all()
    assert (ext_par == ERASED).all()


def test_single_erasure_recovered_from_termination(trellis, dec):
    rng = np.random.default_rng(2)
    for _ in range(20):
        sys_bits, par_bits = _random_codeword(trellis, rng)
        k = int(rng.integers(sys_bits.size))
        hole = sys_bits.copy()
        hole[k] = ERASED
        ext_sys, _ = dec.decode(hole, par_bits, terminated=True)
        assert ext_sys[k] == sys_bits[k]


def test_parity_erasure_recovered(trellis, dec):
    rng = np.random.default_rng(3)
    sys_bits, par_bits = _random_codeword(trellis, rng)
    hole = par_bits.copy()
    hole[5] = ERASED
    _, ext_par = dec.decode(sys_bits, hole, terminated=True)
    assert ext_par[5] == par_bits[5]


def test_contradictory_observations_raise(dec):
    sys_obs = np.zeros(6, dtype=np.uint8)
    par_obs = np.zeros(6, dtype=np.uint8)
    par_obs[0] = 1  # impossible from the zero state with a zero input
    with pytest.raises(RuntimeError):
        dec.decode(sys_obs, par_obs, terminated=True)


def test_batched_decode_matches_single_rows(trellis, dec):
    rng = np.random.default_rng(4)
    rows_s, rows_p = [], []
    for _ in range(6):
        sys_bits, par_bits = _random_codeword(trellis, rng, n=24)
        mask = rng.uniform(size=sys_bits.size) < 0.4
        sys_bits = np.where(mask, ERASED, sys_bits).astype(np.uint8)
        mask = rng.uniform(size=par_bits.size) < 0.4
        par_bits = np.where(mask, ERASED, par_bits).astype(np.uint8)
        rows_s.append(sys_bits)
        rows_p.append(par_bits)
    batch_s, batch_p = dec.decode(np.stack(rows_s), np.stack(rows_p),
                                  terminated=True)
    for i in range(6):
        one_s, one_p = dec.decode(rows_s[i], rows_p[i], terminated=True)
        assert np.array_equal(batch_s[i], one_s)
        assert np.array_equal(batch_p[i], one_p)


def test_module_level_wrapper(trellis):
    rng = np.random.default_rng(5)
    sys_bits, par_bits = _random_codeword(trellis, rng)
    ext_sys, ext_par = bcjr_erasure_decode(trellis, sys_bits, par_bits,
                                           terminated=True)
    assert np.array_equal(ext_sys, sys_bits)
    assert np.array_equal(ext_par, par_bits)


def test_encode_batch_matches_scalar_encode(trellis):
    rng = np.random.default_rng(6)
    info = rng.integers(0, 2, size=(8, 30), dtype=np.uint8)
    batch_sys, batch_par, final = encode_batch(trellis, info)
    assert not final.any()
    for i in range(info.shape[0]):
        sys_bits, par_bits, _ = encode(trellis, info[i])
        assert np.array_equal(batch_sys[i], sys_bits)
        assert np.array_equal(batch_par[i], par_bits)


def test_encode_batch_unterminated(trellis):
    rng = np.random.default_rng(7)
    info = rng.integers(0, 2, size=(4, 10), dtype=np.uint8)
    batch_sys, batch_par, final = encode_batch(trellis, info, terminate=False)
    assert batch_sys.shape == info.shape
    assert np.array_equal(batch_sys, info)
    for i in range(info.shape[0]):
        _, row_par, state = encode(trellis, info[i], terminate=False)
        assert np.array_equal(batch_par[i], row_par)
        assert final[i] == state


def test_oracle_is_reproducible(trellis):
    a = mc_transfer_oracle(trellis, 0.6, 0.4, block_length=400, trials=8,
                           seed=9)
    b = mc_transfer_oracle(trellis, 0.6, 0.4, block_length=400, trials=8,
                           seed=9)
    assert a == b
    assert a.trials == 8
    assert 0.0 < a.sys_extrinsic < 1.0
    assert a.sys_std_error > 0.0
