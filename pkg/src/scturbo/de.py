"""Density evolution for coupled and uncoupled turbo ensembles.

State variables are per-position erasure probabilities of the extrinsic
messages each component decoder emits, four streams per ensemble.  One
iteration updates every stream from the previous iteration's values
(full parallel schedule), with positions outside the chain pinned to
zero erasure: the chain is terminated by known bits on both sides.

Coupling enters through sliding-window averages.  A bit at position t is
used by the companion decoder at a uniformly random offset in t..t+m, so
extrinsics about it come back averaged over a forward window, priors are
collected over a backward window, and the two independent offsets of a
parallel concatenation compose into a triangular window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ensemble import EnsembleSpec
from .transfer import TransferFunction


@dataclass(frozen=True)
class DEParams:
    """Stopping rules for the fixed-point iteration."""

    max_iterations: int = 20000
    delta: float = 1e-10       # sup-norm stall threshold
    p_target: float = 1e-8     # a-posteriori erasure level counted as decoded

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not 0 < self.p_target < 1:
            raise ValueError("p_target must lie in (0, 1)")


def effective_erasure(eps: float, survival: float) -> float:
    """Erasure probability of a stream after random puncturing."""
    return 1.0 - (1.0 - eps) * survival


def _shifted(x: np.ndarray, d: int) -> np.ndarray:
    """x evaluated at t+d with zero padding outside the chain."""
    n = x.shape[0]
    out = np.zeros_like(x)
    if d >= 0:
        out[: n - d] = x[d:]
    else:
        out[-d:] = x[: n + d]
    return out

def box_average(x: np.ndarray, memory: int, direction: int) -> np.ndarray:
    """Mean of x[t], x[t+dir], ..., x[t+dir*memory], zero outside the chain."""
    acc = np.zeros_like(x)
    for j in range(memory + 1):
        acc += _shifted(x, direction * j)
    return acc / (memory + 1)


def triangle_average(x: np.ndarray, memory: int) -> np.ndarray:
    """Single triangular window; equals the composition of a forward and a
    backward uniform window away from the chain ends."""
    acc = np.zeros_like(x)
    for d in range(-memory, memory + 1):
        acc += (memory + 1 - abs(d)) * _shifted(x, d)
    return acc / (memory + 1) ** 2


def coupled_prior(x: np.ndarray, memory: int) -> np.ndarray:
    """Backward average of the forward average, padded at each stage.

    This is the prior erasure seen by one parallel component: a bit from
    position t-j reports back the companion extrinsic averaged over its
    own forward window.  Padding the stages separately keeps bits from
    before the chain at exactly zero; collapsing both stages into one
    triangular window would leak neighboring values into those slots.
    """
    return box_average(box_average(x, memory, +1), memory, -1)


_STREAMS = {
    "pcc": ("upper_sys", "upper_par", "lower_sys", "lower_par"),
    "scc": ("outer_sys", "outer_par", "inner_sys", "inner_par"),
}


@dataclass
class DEState:
    """Extrinsic erasure probabilities, one array of length L per stream."""

    family: str
    streams: dict[str, np.ndarray]

    def __getattr__(self, key):
        try:
            return self.__dict__["streams"][key]
        except KeyError:
            raise AttributeError(key) from None

    def copy(self) -> "DEState":
        return DEState(self.family, {k: v.copy() for k, v in self.streams.items()})

    def max_change(self, other: "DEState") -> float:
        return max(float(np.max(np.abs(self.streams[k] - other.streams[k])))
                   for k in self.streams)


def initial_state(spec: EnsembleSpec) -> DEState:
    names = _STREAMS[spec.family]
    length = spec.coupling_length
    return DEState(spec.family, {k: np.ones(length) for k in names})


def _transfers(spec: EnsembleSpec) -> tuple[TransferFunction, TransferFunction]:
    return (TransferFunction.for_generators(spec.generators[0]),
            TransferFunction.for_generators(spec.generators[1]))


def pcc_step(state: DEState, eps: float, spec: EnsembleSpec) -> DEState:
    m = spec.coupling_memory
    upper, lower = _transfers(spec)
    par_eps = effective_erasure(eps, spec.rho)
    prior_upper = eps * coupled_prior(state.lower_sys, m)
    prior_lower = eps * coupled_prior(state.upper_sys, m)
    upper_sys, upper_par = upper.batch(prior_upper, par_eps)
    lower_sys, lower_par = lower.batch(prior_lower, par_eps)
    return DEState("pcc", {"upper_sys": upper_sys, "upper_par": upper_par,
                           "lower_sys": lower_sys, "lower_par": lower_par})


def scc_step(state: DEState, eps: float, spec: EnsembleSpec) -> DEState:
    m = spec.coupling_memory
    outer, inner = _transfers(spec)
    eps_sys = effective_erasure(eps, spec.rho0)
    eps_opar = effective_erasure(eps, spec.rho1)
    eps_ipar = effective_erasure(eps, spec.rho2)
    # the inner decoder's systematic input mixes both halves of the outer
    # codeword, collected over the backward window
    prior_inner = 0.5 * (eps_sys * box_average(state.outer_sys, m, -1)
                         + eps_opar * box_average(state.outer_par, m, -1))
    inner_sys, inner_par = inner.batch(prior_inner, eps_ipar)
    # inner extrinsics return from the forward window, one average per
    # outer stream scaled by that stream's channel quality
    back = box_average(state.inner_sys, m, +1)
    outer_sys, outer_par = outer.batch(eps_sys * back, eps_opar * back)
    return DEState("scc", {"outer_sys": outer_sys, "outer_par": outer_par,
                           "inner_sys": inner_sys, "inner_par": inner_par})


def de_step(state: DEState, eps: float, spec: EnsembleSpec) -> DEState:
    if spec.family == "pcc":
        return pcc_step(state, eps, spec)
    return scc_step(state, eps, spec)


def aposteriori_profile(state: DEState, eps: float, spec: EnsembleSpec) -> np.ndarray:
    """Per-position erasure probability of information bits after combining."""
    m = spec.coupling_memory
    if spec.family == "pcc":
        return eps * box_average(state.upper_sys, m, +1) \
            * box_average(state.lower_sys, m, +1)
    eps_sys = effective_erasure(eps, spec.rho0)
    return eps_sys * state.outer_sys * box_average(state.inner_sys, m, +1)


@dataclass
class DEResult:
    spec: EnsembleSpec
    eps: float
    status: str                 # "decoded" | "stalled" | "iteration-cap"
    iterations: int
    max_aposteriori: float
    state: DEState
    profile_trace: list[np.ndarray] | None = None
    stream_trace: list[dict[str, np.ndarray]] | None = None

    @property
    def converged(self) -> bool:
        return self.status == "decoded"


def de_fixed_point(spec: EnsembleSpec, eps: float, params: DEParams | None = None,
                   record_trace: bool = False, trace_limit: int = 1000) -> DEResult:
    """Iterate the coupled recursion from the all-erased state.

    Runs until the a-posteriori profile drops below `p_target` everywhere
    (decoded), the sup-norm update falls below `delta` (stalled at a
    nontrivial fixed point), or the iteration cap is hit.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    params = params or DEParams()
    state = initial_state(spec)
    profile_trace = None
    stream_trace = None
    if record_trace:
        profile_trace = [aposteriori_profile(state, eps, spec)]
        stream_trace = [{k: v.copy() for k, v in state.streams.items()}]
    status = "iteration-cap"
    iterations = params.max_iterations
    profile = aposteriori_profile(state, eps, spec)
    for it in range(1, params.max_iterations + 1):
        new = de_step(state, eps, spec)
        change = new.max_change(state)
        state = new
        profile = aposteriori_profile(state, eps, spec)
        if record_trace and it <= trace_limit:
            profile_trace.append(profile)
            stream_trace.append({k: v.copy() for k, v in state.streams.items()})
        if profile.max() < params.p_target:
            status = "decoded"
            iterations = it
            break
        if change < params.delta:
            status = "stalled"
            iterations = it
            break
    return DEResult(spec, eps, status, iterations, float(profile.max()), state,
                    profile_trace, stream_trace)
