"""Erasure-channel a-posteriori decoding of one convolutional component.

On an erasure channel the forward/backward decoder never has to weigh
likelihoods: a state is either compatible with the observations or it is
not.  Both recursions therefore operate on *sets* of states, and every
output is again either a known bit or an erasure.  Sets are bit masks over
trellis states; one transition table per (mask, observation class) makes
the whole sweep a sequence of table lookups, vectorized across a batch of
independent blocks.

Observations use 0/1 for known bits and ERASED (2) for erasures, so each
trellis step sees one of 9 observation classes.

`mc_transfer_oracle` estimates the extrinsic-erasure rates of a long
terminated block by direct simulation.  It shares nothing with the
subset-chain analysis in `transfer` beyond the trellis itself, which is
what makes it a useful cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .trellis import GeneratorSpec, Trellis, build_trellis

ERASED = 2

_MAX_TABLE_STATES = 16  # 2^num_states table rows; memory above 4 needs another decoder


def _observation_classes(sys_obs: np.ndarray, par_obs: np.ndarray) -> np.ndarray:
    if sys_obs.max(initial=0) > 2 or par_obs.max(initial=0) > 2:
        raise ValueError("observations must be 0, 1 or ERASED")
    return sys_obs.astype(np.int64) * 3 + par_obs.astype(np.int64)


class ErasureBcjr:
    """Set-propagation a-posteriori decoder for one rate-1/2 component."""

    def __init__(self, trellis: Trellis):
        ns = trellis.num_states
        if ns > _MAX_TABLE_STATES:
            raise ValueError(f"table-driven decoder supports at most "
                             f"{_MAX_TABLE_STATES} states, got {ns}")
        self.trellis = trellis
        self.num_states = ns
        self.full_mask = (1 << ns) - 1

        fwd1 = np.zeros((ns, 9), dtype=np.int64)
        bwd1 = np.zeros((ns, 9), dtype=np.int64)
        trans = []
        for s in range(ns):
            for u in (0, 1):
                t = int(trellis.next_state[s, u])
                p = int(trellis.parity_out[s, u])
                trans.append((s, u, t, p))
                for c in range(9):
                    cs, cp = divmod(c, 3)
                    if (cs == ERASED or cs == u) and (cp == ERASED or cp == p):
                        fwd1[s, c] |= 1 << t
                        bwd1[t, c] |= 1 << s
        self._transitions = trans

        # set-valued steps distribute over unions, so tables for arbitrary
        # masks follow from the singleton rows by popcount-ordered DP
        size = 1 << ns
        fwd = np.zeros((size, 9), dtype=np.int64)
        bwd = np.zeros((size, 9), dtype=np.int64)
        for s in range(ns):
            fwd[1 << s] = fwd1[s]
            bwd[1 << s] = bwd1[s]
        masks = np.arange(size, dtype=np.int64)
        popcnt = np.bitwise_count(masks)
        for k in range(2, ns + 1):
            mk = masks[popcnt == k]
            rest = mk & (mk - 1)
            low = mk & -mk
            fwd[mk] = fwd[rest] | fwd[low]
            bwd[mk] = bwd[rest] | bwd[low]
        self._fwd_flat = fwd.reshape(-1)
        self._bwd_flat = bwd.reshape(-1)

    def decode(self, sys_obs, par_obs, terminated: bool = False):
        """Extrinsic estimates (systematic, parity) for one block or a batch.

        The extrinsic for a position never uses that position's own
        observation of the same bit; the companion observation of the step
        (parity for the systematic output and vice versa) is used.
        Returns arrays over {0, 1, ERASED} matching the input shape.
        Inconsistent observations raise RuntimeError.
        """
        sys_in = np.asarray(sys_obs, dtype=np.int64)
        par_in = np.asarray(par_obs, dtype=np.int64)
        squeeze = sys_in.ndim == 1
        sys_in = np.atleast_2d(sys_in)
        par_in = np.atleast_2d(par_in)
        if sys_in.shape != par_in.shape:
            raise ValueError("systematic and parity observations must align")
        classes = _observation_classes(sys_in, par_in)
        nblk, n = classes.shape

        alpha = np.empty((nblk, n + 1), dtype=np.int64)
        alpha[:, 0] = 1  # encoder starts in state zero
        fwd = self._fwd_flat
        for t in range(n):
            alpha[:, t + 1] = fwd[alpha[:, t] * 9 + classes[:, t]]
        beta = np.empty((nblk, n + 1), dtype=np.int64)
        beta[:, n] = 1 if terminated else self.full_mask
        bwd = self._bwd_flat
        for t in range(n - 1, -1, -1):
            beta[:, t] = bwd[beta[:, t + 1] * 9 + classes[:, t]]
        if not (alpha[:, n].all() and beta[:, 0].all()):
            raise RuntimeError("observations are inconsistent with the code")

        before = alpha[:, :-1]
        after = beta[:, 1:]
        sys_can = [np.zeros((nblk, n), dtype=bool), np.zeros((nblk, n), dtype=bool)]
        par_can = [np.zeros((nblk, n), dtype=bool), np.zeros((nblk, n), dtype=bool)]
        for s, u, t, p in self._transitions:
            alive = (((before >> s) & 1) & ((after >> t) & 1)).astype(bool)
            sys_can[u] |= alive & ((par_in == ERASED) | (par_in == p))
            par_can[p] |= alive & ((sys_in == ERASED) | (sys_in == u))
        if not (np.all(sys_can[0] | sys_can[1]) and np.all(par_can[0] | par_can[1])):
            raise RuntimeError("observations are inconsistent with the code")
        sys_ext = np.where(sys_can[0] & sys_can[1], ERASED, sys_can[1].astype(np.int64))
        par_ext = np.where(par_can[0] & par_can[1], ERASED, par_can[1].astype(np.int64))
        sys_ext = sys_ext.astype(np.uint8)
        par_ext = par_ext.astype(np.uint8)
        if squeeze:
            return sys_ext[0], par_ext[0]
        return sys_ext, par_ext


@lru_cache(maxsize=32)
def _cached_decoder(generators: GeneratorSpec) -> ErasureBcjr:
    return ErasureBcjr(build_trellis(generators))


def decoder_for(generators: GeneratorSpec | str) -> ErasureBcjr:
    if isinstance(generators, str):
        generators = GeneratorSpec.parse(generators)
    return _cached_decoder(generators)


def bcjr_erasure_decode(trellis: Trellis, sys_obs, par_obs, terminated: bool = False):
    """Convenience wrapper; caches one decoder per generator pair."""
    return decoder_for(trellis.generators).decode(sys_obs, par_obs, terminated)


def encode_batch(trellis: Trellis, info_bits: np.ndarray, terminate: bool = True):
    """Vectorized encoder for a batch of blocks; rows are independent."""
    u = np.asarray(info_bits, dtype=np.int64)
    if u.ndim != 2:
        raise ValueError("info_bits must be (blocks, length)")
    nblk, n = u.shape
    nxt = trellis.next_state
    par = trellis.parity_out
    tail = trellis.memory if terminate else 0
    sys_out = np.empty((nblk, n + tail), dtype=np.int64)
    par_out = np.empty((nblk, n + tail), dtype=np.int64)
    state = np.zeros(nblk, dtype=np.int64)
    for t in range(n):
        b = u[:, t]
        sys_out[:, t] = b
        par_out[:, t] = par[state, b]
        state = nxt[state, b]
    if terminate:
        fb = trellis.generators.feedback_poly
        drive = np.array([bin((fb >> 1) & s).count("1") & 1
                          for s in range(trellis.num_states)], dtype=np.int64)
        for t in range(n, n + tail):
            b = drive[state]
            sys_out[:, t] = b
            par_out[:, t] = par[state, b]
            state = nxt[state, b]
        assert not state.any()
    return sys_out, par_out, state


@dataclass(frozen=True)
class OracleEstimate:
    """Monte Carlo transfer-function estimate with trial-level errors."""

    sys_erasure: float
    par_erasure: float
    sys_extrinsic: float
    sys_std_error: float
    par_extrinsic: float
    par_std_error: float
    trials: int
    block_length: int


def mc_transfer_oracle(trellis: Trellis, sys_erasure: float, par_erasure: float,
                       block_length: int = 10000, trials: int = 100,
                       seed: int = 0, margin: int | None = None) -> OracleEstimate:
    """Estimate extrinsic erasure rates by decoding random terminated blocks.

    Random data (not the all-zero word) exercises the value-carrying decode
    path.  Positions within `margin` of either end are excluded so the
    estimate reflects the stationary middle of a long block.
    """
    if margin is None:
        margin = max(64, 16 * trellis.memory)
    if block_length <= 4 * margin:
        raise ValueError("block_length too small for the boundary margin")
    rng = np.random.default_rng(seed)
    decoder = decoder_for(trellis.generators)
    info = rng.integers(0, 2, size=(trials, block_length))
    sys_bits, par_bits, _ = encode_batch(trellis, info, terminate=True)
    n = sys_bits.shape[1]
    sys_obs = np.where(rng.random((trials, n)) < sys_erasure, ERASED, sys_bits)
    par_obs = np.where(rng.random((trials, n)) < par_erasure, ERASED, par_bits)
    sys_ext, par_ext = decoder.decode(sys_obs, par_obs, terminated=True)
    keep = slice(margin, block_length - margin)
    sys_rates = np.mean(sys_ext[:, keep] == ERASED, axis=1)
    par_rates = np.mean(par_ext[:, keep] == ERASED, axis=1)

    def level(rates):
        mean = float(rates.mean())
        if trials > 1:
            se = float(rates.std(ddof=1) / np.sqrt(trials))
        else:
            se = float("nan")
        return mean, se

    sys_mean, sys_se = level(sys_rates)
    par_mean, par_se = level(par_rates)
    return OracleEstimate(float(sys_erasure), float(par_erasure),
                          sys_mean, sys_se, par_mean, par_se,
                          trials, block_length)
