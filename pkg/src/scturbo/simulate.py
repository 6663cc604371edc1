"""Finite-length Monte Carlo simulation of coupled turbo ensembles.

One instance samples the random structure of a chain: for every position
each bit picks one consumer slot uniformly over the next `m+1` positions
(balanced, so every component block stays exactly full), slot order is a
fresh permutation per block, and puncturing survival is drawn per bit.

Termination mirrors the analysis boundary: component inputs drawn from
before the chain are known zeros, and bits whose consumer slot falls
beyond the last position keep a pinned (known) companion message, the
finite-length face of the perfectly-decoded positions past the end.

Decoding alternates the two component a-posteriori decoders with a full
parallel message schedule: both updates in an iteration read the
previous iteration's extrinsics.  That keeps per-iteration erasure
profiles directly comparable with density evolution traces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bcjr import ERASED, decoder_for, encode_batch
from .ensemble import EnsembleSpec
from .trellis import build_trellis

PAD = -1       # slot fed by a known zero from before the chain start
VIRTUAL = -2   # consumer slot beyond the chain end; message stays pinned


def _coupling_maps(rng: np.random.Generator, length: int, bits: int, memory: int):
    """Sample the bit<->slot wiring of one coupled stream.

    Returns (slot_pos, slot_idx, src_pos, src_idx), all (length, bits).
    slot_* say where bit (t, i) is consumed (VIRTUAL past the end);
    src_* say which bit feeds slot (tau, k) (PAD for leading zeros).
    """
    per = bits // (memory + 1)
    if per * (memory + 1) != bits:
        raise ValueError("stream width must be divisible by coupling_memory + 1")
    offsets = np.empty((length, bits), dtype=np.int64)
    base = np.repeat(np.arange(memory + 1), per)
    for t in range(length):
        offsets[t] = rng.permutation(base)
    slot_pos = np.full((length, bits), VIRTUAL, dtype=np.int64)
    slot_idx = np.full((length, bits), -1, dtype=np.int64)
    src_pos = np.full((length, bits), PAD, dtype=np.int64)
    src_idx = np.full((length, bits), -1, dtype=np.int64)
    for tau in range(length):
        order = rng.permutation(bits)
        k = 0
        for j in range(memory + 1):
            t = tau - j
            if t < 0:
                continue
            sel = np.nonzero(offsets[t] == j)[0]
            slots = order[k:k + sel.size]
            k += sel.size
            src_pos[tau, slots] = t
            src_idx[tau, slots] = sel
            slot_pos[t, sel] = tau
            slot_idx[t, sel] = slots
    return slot_pos, slot_idx, src_pos, src_idx


def _gather(values: np.ndarray, src_pos: np.ndarray, src_idx: np.ndarray) -> np.ndarray:
    out = np.zeros(src_pos.shape, dtype=np.uint8)  # PAD slots read a known zero
    real = src_pos >= 0
    out[real] = values[src_pos[real], src_idx[real]]
    return out


def _scatter(slot_values: np.ndarray, slot_pos: np.ndarray, slot_idx: np.ndarray,
             pinned: np.ndarray) -> np.ndarray:
    out = np.where(slot_pos == VIRTUAL, pinned, 0).astype(np.uint8)
    real = slot_pos >= 0
    out[real] = slot_values[slot_pos[real], slot_idx[real]]
    return out


@dataclass
class PccInstance:
    spec: EnsembleSpec
    block_length: int
    upper_maps: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    lower_maps: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    upper_keep: np.ndarray
    lower_keep: np.ndarray

    @property
    def transmitted_symbols(self) -> int:
        sys = self.spec.coupling_length * self.block_length
        return sys + int(self.upper_keep.sum()) + int(self.lower_keep.sum())


@dataclass
class SccInstance:
    spec: EnsembleSpec
    block_length: int
    inner_maps: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    sys_keep: np.ndarray
    outer_par_keep: np.ndarray
    inner_par_keep: np.ndarray

    @property
    def transmitted_symbols(self) -> int:
        return int(self.sys_keep.sum() + self.outer_par_keep.sum()
                   + self.inner_par_keep.sum())


CoupledCodeInstance = PccInstance | SccInstance


def build_instance(spec: EnsembleSpec, block_length: int, rng=None) -> CoupledCodeInstance:
    """Sample permutations, coupling offsets and puncturing for one chain."""
    if block_length < spec.coupling_memory + 1:
        raise ValueError("block_length must exceed the coupling memory")
    rng = np.random.default_rng(rng)
    length, m = spec.coupling_length, spec.coupling_memory
    if spec.family == "pcc":
        upper = _coupling_maps(rng, length, block_length, m)
        lower = _coupling_maps(rng, length, block_length, m)
        upper_keep = rng.random((length, block_length)) < spec.rho
        lower_keep = rng.random((length, block_length)) < spec.rho
        return PccInstance(spec, block_length, upper, lower, upper_keep, lower_keep)
    inner = _coupling_maps(rng, length, 2 * block_length, m)
    sys_keep = rng.random((length, block_length)) < spec.rho0
    outer_par_keep = rng.random((length, block_length)) < spec.rho1
    inner_par_keep = rng.random((length, 2 * block_length)) < spec.rho2
    return SccInstance(spec, block_length, inner, sys_keep, outer_par_keep,
                       inner_par_keep)


@dataclass
class ChainCodeword:
    info: np.ndarray
    streams: dict[str, np.ndarray]


@dataclass
class ChainObservation:
    streams: dict[str, np.ndarray]


def encode_chain(instance: CoupledCodeInstance, info: np.ndarray) -> ChainCodeword:
    """Map information bits (length, block_length) to transmitted streams."""
    spec = instance.spec
    info = np.asarray(info, dtype=np.uint8)
    expected = (spec.coupling_length, instance.block_length)
    if info.shape != expected:
        raise ValueError(f"info must have shape {expected}")
    if spec.family == "pcc":
        up_in = _gather(info, instance.upper_maps[2], instance.upper_maps[3])
        low_in = _gather(info, instance.lower_maps[2], instance.lower_maps[3])
        upper_tr = build_trellis(spec.generators[0])
        lower_tr = build_trellis(spec.generators[1])
        _, upper_par, _ = encode_batch(upper_tr, up_in, terminate=False)
        _, lower_par, _ = encode_batch(lower_tr, low_in, terminate=False)
        return ChainCodeword(info, {"sys": info,
                                    "upper_par": upper_par.astype(np.uint8),
                                    "lower_par": lower_par.astype(np.uint8)})
    outer_tr = build_trellis(spec.generators[0])
    inner_tr = build_trellis(spec.generators[1])
    _, outer_par, _ = encode_batch(outer_tr, info, terminate=False)
    outer_code = np.concatenate([info, outer_par.astype(np.uint8)], axis=1)
    inner_in = _gather(outer_code, instance.inner_maps[2], instance.inner_maps[3])
    _, inner_par, _ = encode_batch(inner_tr, inner_in, terminate=False)
    return ChainCodeword(info, {"sys": info,
                                "outer_par": outer_par.astype(np.uint8),
                                "inner_par": inner_par.astype(np.uint8)})


def transmit(instance: CoupledCodeInstance, codeword: ChainCodeword, eps: float,
             rng=None) -> ChainObservation:
    """Puncture and erase; punctured bits arrive as erasures."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    rng = np.random.default_rng(rng)
    if instance.spec.family == "pcc":
        keeps = {"sys": None, "upper_par": instance.upper_keep,
                 "lower_par": instance.lower_keep}
    else:
        keeps = {"sys": instance.sys_keep, "outer_par": instance.outer_par_keep,
                 "inner_par": instance.inner_par_keep}
    streams = {}
    for name, bits in codeword.streams.items():
        survive = rng.random(bits.shape) >= eps
        keep = keeps[name]
        if keep is not None:
            survive &= keep
        streams[name] = np.where(survive, bits, ERASED).astype(np.uint8)
    return ChainObservation(streams)


def _check_no_miscorrection(ext: np.ndarray, truth: np.ndarray):
    if not np.all((ext == ERASED) | (ext == truth)):
        raise RuntimeError("decoder emitted a bit contradicting the codeword")


@dataclass
class DecodeResult:
    resolved: bool
    iterations: int
    unresolved_info: int
    bit_erasure_rate: float
    frame_error: bool
    info_estimate: np.ndarray
    profiles: np.ndarray | None = None


def decode_chain(instance: CoupledCodeInstance, observation: ChainObservation,
                 codeword: ChainCodeword, max_iterations: int = 50,
                 record_profiles: bool = False) -> DecodeResult:
    """Iterative chain decoding until clean, stalled, or out of iterations.

    The codeword is consulted only for the pinned termination messages and
    for integrity checks; on an erasure channel the decoder can stall but
    must never contradict what was sent.
    """
    if instance.spec.family == "pcc":
        return _decode_pcc(instance, observation, codeword, max_iterations,
                           record_profiles)
    return _decode_scc(instance, observation, codeword, max_iterations,
                       record_profiles)


def _combine(channel: np.ndarray, extrinsic: np.ndarray) -> np.ndarray:
    return np.where(channel != ERASED, channel, extrinsic).astype(np.uint8)


def _run_schedule(update, ext_a, ext_b, unresolved_profile, max_iterations,
                  record_profiles):
    """Shared Jacobi loop; `update` maps old messages to new ones."""
    profile = unresolved_profile(ext_a, ext_b)
    profiles = None
    if record_profiles:
        profiles = np.zeros((max_iterations + 1, profile.shape[0]))
        profiles[0] = profile
    resolved = False
    iterations = max_iterations
    for it in range(1, max_iterations + 1):
        new_a, new_b = update(ext_a, ext_b)
        changed = (new_a != ext_a).any() or (new_b != ext_b).any()
        ext_a, ext_b = new_a, new_b
        profile = unresolved_profile(ext_a, ext_b)
        if record_profiles:
            profiles[it] = profile
        if not profile.any():
            resolved = True
            iterations = it
            break
        if not changed:
            iterations = it
            break
    if record_profiles and iterations < max_iterations:
        profiles[iterations + 1:] = profile
    return ext_a, ext_b, resolved, iterations, profiles


def _decode_pcc(instance, observation, codeword, max_iterations, record_profiles):
    spec = instance.spec
    sys_ch = observation.streams["sys"]
    upar_ch = observation.streams["upper_par"]
    lpar_ch = observation.streams["lower_par"]
    up_slot_pos, up_slot_idx, up_src_pos, up_src_idx = instance.upper_maps
    low_slot_pos, low_slot_idx, low_src_pos, low_src_idx = instance.lower_maps
    upper_dec = decoder_for(spec.generators[0])
    lower_dec = decoder_for(spec.generators[1])
    info = codeword.info

    ext_up = np.where(up_slot_pos == VIRTUAL, info, ERASED).astype(np.uint8)
    ext_low = np.where(low_slot_pos == VIRTUAL, info, ERASED).astype(np.uint8)

    def update(ext_up, ext_low):
        upper_in = _gather(_combine(sys_ch, ext_low), up_src_pos, up_src_idx)
        lower_in = _gather(_combine(sys_ch, ext_up), low_src_pos, low_src_idx)
        up_ext_slots, _ = upper_dec.decode(upper_in, upar_ch)
        low_ext_slots, _ = lower_dec.decode(lower_in, lpar_ch)
        new_up = _scatter(up_ext_slots, up_slot_pos, up_slot_idx, info)
        new_low = _scatter(low_ext_slots, low_slot_pos, low_slot_idx, info)
        _check_no_miscorrection(new_up, info)
        _check_no_miscorrection(new_low, info)
        return new_up, new_low

    def unresolved_profile(ext_up, ext_low):
        open_bits = (sys_ch == ERASED) & (ext_up == ERASED) & (ext_low == ERASED)
        return open_bits.mean(axis=1)

    ext_up, ext_low, resolved, iterations, profiles = _run_schedule(
        update, ext_up, ext_low, unresolved_profile, max_iterations, record_profiles)
    estimate = _combine(_combine(sys_ch, ext_up), ext_low)
    _check_no_miscorrection(estimate, info)
    unresolved = int((estimate == ERASED).sum())
    return DecodeResult(resolved, iterations, unresolved,
                        unresolved / estimate.size, unresolved > 0,
                        estimate, profiles)


def _decode_scc(instance, observation, codeword, max_iterations, record_profiles):
    spec = instance.spec
    n = instance.block_length
    sys_ch = observation.streams["sys"]
    opar_ch = observation.streams["outer_par"]
    ipar_ch = observation.streams["inner_par"]
    in_slot_pos, in_slot_idx, in_src_pos, in_src_idx = instance.inner_maps
    outer_dec = decoder_for(spec.generators[0])
    inner_dec = decoder_for(spec.generators[1])
    outer_code = np.concatenate(
        [codeword.info, codeword.streams["outer_par"]], axis=1)
    chan_outer = np.concatenate([sys_ch, opar_ch], axis=1)

    ext_inner = np.where(in_slot_pos == VIRTUAL, outer_code, ERASED).astype(np.uint8)
    ext_outer = np.full_like(ext_inner, ERASED)

    def update(ext_inner, ext_outer):
        inner_in = _gather(_combine(chan_outer, ext_outer), in_src_pos, in_src_idx)
        inner_ext_slots, _ = inner_dec.decode(inner_in, ipar_ch)
        new_inner = _scatter(inner_ext_slots, in_slot_pos, in_slot_idx, outer_code)
        outer_in = _combine(chan_outer, ext_inner)
        o_sys_ext, o_par_ext = outer_dec.decode(outer_in[:, :n], outer_in[:, n:])
        new_outer = np.concatenate([o_sys_ext, o_par_ext], axis=1)
        _check_no_miscorrection(new_inner, outer_code)
        _check_no_miscorrection(new_outer, outer_code)
        return new_inner, new_outer

    def unresolved_profile(ext_inner, ext_outer):
        open_bits = (sys_ch == ERASED) & (ext_outer[:, :n] == ERASED) \
            & (ext_inner[:, :n] == ERASED)
        return open_bits.mean(axis=1)

    ext_inner, ext_outer, resolved, iterations, profiles = _run_schedule(
        update, ext_inner, ext_outer, unresolved_profile, max_iterations,
        record_profiles)
    estimate = _combine(_combine(sys_ch, ext_outer[:, :n]), ext_inner[:, :n])
    _check_no_miscorrection(estimate, codeword.info)
    unresolved = int((estimate == ERASED).sum())
    return DecodeResult(resolved, iterations, unresolved,
                        unresolved / estimate.size, unresolved > 0,
                        estimate, profiles)


@dataclass
class SweepPoint:
    eps: float
    trials: int
    bit_erasure_rate: float
    frame_erasure_rate: float
    mean_iterations: float


def _sweep_point(spec: EnsembleSpec, block_length: int, eps: float, trials: int,
                 child: np.random.SeedSequence, max_iterations: int) -> SweepPoint:
    bit_rates = []
    frames = 0
    iters = []
    for trial_seed in child.spawn(trials):
        rng = np.random.default_rng(trial_seed)
        instance = build_instance(spec, block_length, rng)
        info = rng.integers(0, 2, size=(spec.coupling_length, block_length),
                            dtype=np.uint8)
        codeword = encode_chain(instance, info)
        obs = transmit(instance, codeword, eps, rng)
        result = decode_chain(instance, obs, codeword, max_iterations)
        bit_rates.append(result.bit_erasure_rate)
        frames += int(result.frame_error)
        iters.append(result.iterations)
    return SweepPoint(eps, trials, float(np.mean(bit_rates)), frames / trials,
                      float(np.mean(iters)))


def sweep(spec: EnsembleSpec, block_length: int, eps_values, trials: int,
          seed: int = 0, max_iterations: int = 50,
          threads: int = 1) -> list[SweepPoint]:
    """Monte Carlo waterfall: fresh instance and data for every trial.

    Results are independent of `threads`; every channel point draws from its
    own seed stream.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    eps_list = [float(e) for e in eps_values]
    root = np.random.SeedSequence(seed)
    children = root.spawn(len(eps_list))
    if threads > 1 and len(eps_list) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_sweep_point, spec, block_length, eps,
                                   trials, child, max_iterations)
                       for eps, child in zip(eps_list, children)]
            return [f.result() for f in futures]
    return [_sweep_point(spec, block_length, eps, trials, child, max_iterations)
            for eps, child in zip(eps_list, children)]


def simulated_profiles(spec: EnsembleSpec, block_length: int, eps: float,
                       trials: int, iterations: int, seed: int = 0) -> np.ndarray:
    """Mean unresolved-bit profile per iteration, shape (iterations+1, length)."""
    root = np.random.SeedSequence(seed)
    acc = np.zeros((iterations + 1, spec.coupling_length))
    for trial_seed in root.spawn(trials):
        rng = np.random.default_rng(trial_seed)
        instance = build_instance(spec, block_length, rng)
        info = rng.integers(0, 2, size=(spec.coupling_length, block_length),
                            dtype=np.uint8)
        codeword = encode_chain(instance, info)
        obs = transmit(instance, codeword, eps, rng)
        result = decode_chain(instance, obs, codeword, iterations,
                              record_profiles=True)
        acc += result.profiles
    return acc / trials
