"""Rate-1/2 recursive systematic convolutional encoders.

Generators are given in octal, feedforward over feedback, e.g. "1,5/7"
for the 4-state component used throughout: feedback 1 + D + D^2,
feedforward 1 + D^2.  Octal digit strings map to polynomial coefficients
with bit i of the integer being the coefficient of D^i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _parse_octal(text: str) -> int:
    try:
        value = int(text, 8)
    except ValueError:
        raise ValueError(f"not an octal polynomial: {text!r}") from None
    if value <= 0:
        raise ValueError(f"polynomial must be nonzero: {text!r}")
    return value


@dataclass(frozen=True)
class GeneratorSpec:
    """Octal generator pair of a rate-1/2 recursive systematic encoder."""

    feedforward: str
    feedback: str

    def __post_init__(self):
        ff = _parse_octal(self.feedforward)
        fb = _parse_octal(self.feedback)
        if fb % 2 == 0:
            # constant feedback tap is required for a well-defined recursion
            raise ValueError(f"feedback polynomial must have a 1 term: {self.feedback!r}")
        if max(ff, fb).bit_length() - 1 > 12:
            raise ValueError("encoder memory above 12 is not supported")

    @classmethod
    def parse(cls, text: str) -> "GeneratorSpec":
        """Parse "1,5/7" (the leading systematic "1," is optional)."""
        body = text.strip()
        if "," in body:
            head, body = body.split(",", 1)
            if head.strip() != "1":
                raise ValueError(f"first output must be systematic: {text!r}")
        if "/" not in body:
            raise ValueError(f"expected feedforward/feedback: {text!r}")
        ff, fb = body.split("/", 1)
        return cls(feedforward=ff.strip(), feedback=fb.strip())

    @property
    def feedforward_poly(self) -> int:
        return _parse_octal(self.feedforward)

    @property
    def feedback_poly(self) -> int:
        return _parse_octal(self.feedback)

    @property
    def memory(self) -> int:
        return max(self.feedforward_poly, self.feedback_poly).bit_length() - 1

    def __str__(self) -> str:
        return f"1,{self.feedforward}/{self.feedback}"


def _parity(x: int) -> int:
    return bin(x).count("1") & 1


class Trellis:
    """State machine of a rate-1/2 recursive systematic encoder.

    States are the shift-register contents in controller canonical form.
    `next_state[s, u]` and `parity_out[s, u]` tabulate the transition for
    input bit u; the systematic output always equals the input bit.
    `incoming[s]` lists (previous_state, input) pairs ending in s.
    """

    def __init__(self, generators: GeneratorSpec):
        self.generators = generators
        ff = generators.feedforward_poly
        fb = generators.feedback_poly
        nu = generators.memory
        ns = 1 << nu
        self.memory = nu
        self.num_states = ns
        nxt = np.zeros((ns, 2), dtype=np.int64)
        par = np.zeros((ns, 2), dtype=np.int64)
        mask = ns - 1
        for s in range(ns):
            for u in (0, 1):
                w = u ^ _parity((fb >> 1) & s)
                p = ((ff & 1) & w) ^ _parity((ff >> 1) & s)
                nxt[s, u] = ((s << 1) | w) & mask
                par[s, u] = p
        self.next_state = nxt
        self.parity_out = par
        incoming: list[list[tuple[int, int]]] = [[] for _ in range(ns)]
        for s in range(ns):
            for u in (0, 1):
                incoming[nxt[s, u]].append((s, u))
        self.incoming = incoming

    def systematic_out(self, state: int, u: int) -> int:
        # transparent systematic branch
        return u

    def termination_inputs(self, state: int) -> list[int]:
        """Input bits that drive `state` back to zero in `memory` steps."""
        fb = self.generators.feedback_poly
        tail = []
        s = state
        for _ in range(self.memory):
            # choose u so the register shifts in a zero
            u = _parity((fb >> 1) & s)
            tail.append(u)
            s = self.next_state[s, u]
        assert s == 0
        return tail


def build_trellis(generators: GeneratorSpec | str) -> Trellis:
    if isinstance(generators, str):
        generators = GeneratorSpec.parse(generators)
    return Trellis(generators)


def encode(trellis: Trellis, info_bits, terminate: bool = True):
    """Encode a bit sequence; returns (systematic, parity, final_state).

    With `terminate` a tail of `trellis.memory` input bits is appended so
    the encoder ends in state zero; the tail shows up in both outputs.
    """
    u = np.asarray(info_bits)
    if u.ndim != 1:
        raise ValueError("info_bits must be one-dimensional")
    if u.size and not np.isin(u, (0, 1)).all():
        raise ValueError("info_bits must be binary")
    u = u.astype(np.int64)
    bits = list(u)
    state = 0
    sys_out = []
    par_out = []
    for b in bits:
        sys_out.append(int(b))
        par_out.append(int(trellis.parity_out[state, b]))
        state = int(trellis.next_state[state, b])
    if terminate:
        for b in trellis.termination_inputs(state):
            sys_out.append(b)
            par_out.append(int(trellis.parity_out[state, b]))
            state = int(trellis.next_state[state, b])
        assert state == 0
    return np.array(sys_out, dtype=np.int64), np.array(par_out, dtype=np.int64), state
