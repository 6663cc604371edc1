"""Exact erasure-rate transfer functions of a-posteriori component decoders.

On a memoryless erasure channel the optimal symbol decoder of a terminated
convolutional code leaves a bit erased exactly when both bit values extend
to valid codeword paths consistent with everything observed elsewhere.
Which bits stay erased depends only on the *pattern* of erasures, so the
decoder can be analyzed by tracking the set of trellis states compatible
with the observations before (forward) and after (backward) each step.
Under i.i.d. erasures those state sets evolve as finite Markov chains over
subsets of states.  The long-run erasure rate of the extrinsic outputs is
then a bilinear form in the two stationary distributions, which is what
`TransferFunction` evaluates: given the erasure probability seen on the
systematic input and on the parity input, it returns the exact probability
that the extrinsic estimate of a systematic bit (respectively a parity
bit) is still erased.

All-zero codeword transmission is assumed throughout; by linearity of the
code and symmetry of the channel this loses no generality.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .trellis import GeneratorSpec, Trellis, build_trellis

# observation pattern order: (systematic erased?, parity erased?)
PATTERN_ORDER = ((0, 0), (0, 1), (1, 0), (1, 1))

_RESIDUAL_TOL = 1e-12
_MAX_CHAIN_NODES = 20000


def _forward_step(mask: int, sys_erased: int, par_erased: int, trellis: Trellis) -> int:
    """Next forward state set after one observed trellis step."""
    out = 0
    nxt = trellis.next_state
    par = trellis.parity_out
    for s in range(trellis.num_states):
        if not (mask >> s) & 1:
            continue
        for u in (0, 1):
            if not sys_erased and u != 0:
                continue
            if not par_erased and par[s, u] != 0:
                continue
            out |= 1 << int(nxt[s, u])
    return out


def _backward_step(mask: int, sys_erased: int, par_erased: int, trellis: Trellis) -> int:
    """States from which some consistent branch leads into `mask`."""
    out = 0
    nxt = trellis.next_state
    par = trellis.parity_out
    for s in range(trellis.num_states):
        for u in (0, 1):
            if not sys_erased and u != 0:
                continue
            if not par_erased and par[s, u] != 0:
                continue
            if (mask >> int(nxt[s, u])) & 1:
                out |= 1 << s
                break
    return out


@dataclass
class SubsetChain:
    """Markov chain over state subsets induced by i.i.d. erasure patterns.

    `node_masks[i]` is the i-th reachable subset as a bit mask over trellis
    states; `successors[i, p]` is the node reached from it under pattern
    `PATTERN_ORDER[p]`.  Node 0 is the singleton {zero state}, the exact
    knowledge available at a terminated boundary.
    """

    generators: GeneratorSpec
    direction: str
    node_masks: list[int]
    successors: np.ndarray
    index: dict[int, int] = field(repr=False)

    def __len__(self) -> int:
        return len(self.node_masks)

    def to_jsonable(self) -> dict:
        num_states = 1 << self.generators.memory
        states = [[s for s in range(num_states) if (m >> s) & 1] for m in self.node_masks]
        return {
            "generators": str(self.generators),
            "direction": self.direction,
            "patterns": [list(p) for p in PATTERN_ORDER],
            "nodes": states,
            "successors": self.successors.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_jsonable(), indent=2, sort_keys=True)


def build_subset_chain(trellis: Trellis, direction: str) -> SubsetChain:
    """Explore all subsets reachable from {zero state} under the 4 patterns."""
    if direction == "forward":
        step = _forward_step
    elif direction == "backward":
        step = _backward_step
    else:
        raise ValueError(f"direction must be 'forward' or 'backward': {direction!r}")
    root = 1  # {state 0}
    masks = [root]
    index = {root: 0}
    frontier = [root]
    while frontier:
        mask = frontier.pop()
        for sys_e, par_e in PATTERN_ORDER:
            nxt = step(mask, sys_e, par_e, trellis)
            if nxt == 0:
                raise RuntimeError("empty state subset; trellis tables are inconsistent")
            if nxt not in index:
                if len(masks) >= _MAX_CHAIN_NODES:
                    raise RuntimeError("subset chain exceeds the supported node budget")
                index[nxt] = len(masks)
                masks.append(nxt)
                frontier.append(nxt)
    succ = np.zeros((len(masks), 4), dtype=np.int64)
    for i, mask in enumerate(masks):
        for p, (sys_e, par_e) in enumerate(PATTERN_ORDER):
            succ[i, p] = index[step(mask, sys_e, par_e, trellis)]
    return SubsetChain(trellis.generators, direction, masks, succ, index)


def _pattern_weights(sys_erasure: float, par_erasure: float) -> np.ndarray:
    ps, pp = sys_erasure, par_erasure
    return np.array([(1 - ps) * (1 - pp), (1 - ps) * pp, ps * (1 - pp), ps * pp])


def _solve_stationary(transition_t: np.ndarray) -> np.ndarray:
    """Stationary law of a chain given its transposed transition matrix."""
    n = transition_t.shape[0]
    m = transition_t - np.eye(n)
    m[0, :] = 1.0  # replace one redundant balance equation by normalization
    rhs = np.zeros(n)
    rhs[0] = 1.0
    return np.linalg.solve(m, rhs)


def _tarjan_scc(adj: list[list[int]]) -> list[list[int]]:
    """Strongly connected components, iterative, in reverse topological order."""
    n = len(adj)
    order = [0] * n
    low = [0] * n
    on_stack = [False] * n
    comp_stack: list[int] = []
    comps: list[list[int]] = []
    counter = 1
    for root in range(n):
        if order[root]:
            continue
        work = [(root, 0)]
        while work:
            v, ei = work[-1]
            if ei == 0:
                order[v] = low[v] = counter
                counter += 1
                comp_stack.append(v)
                on_stack[v] = True
            advanced = False
            for k in range(ei, len(adj[v])):
                w = adj[v][k]
                if not order[w]:
                    work[-1] = (v, k + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], order[w])
            if advanced:
                continue
            work.pop()
            if low[v] == order[v]:
                comp = []
                while True:
                    w = comp_stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
            if work:
                pv, _ = work[-1]
                low[pv] = min(low[pv], low[v])
    return comps


def _limit_distribution(successors: np.ndarray, weights: np.ndarray, start: int = 0) -> np.ndarray:
    """Long-run state distribution started from `start`.

    Handles reducible chains (degenerate pattern weights): finds the closed
    communicating classes reachable from the start, solves the stationary
    law of each, and mixes them with the absorption probabilities.
    """
    n = successors.shape[0]
    active = [p for p in range(4) if weights[p] > 0.0]
    reach = {start}
    stack = [start]
    while stack:
        i = stack.pop()
        for p in active:
            j = int(successors[i, p])
            if j not in reach:
                reach.add(j)
                stack.append(j)
    nodes = sorted(reach)
    pos = {v: k for k, v in enumerate(nodes)}
    m = len(nodes)
    prob = np.zeros((m, m))
    for k, v in enumerate(nodes):
        for p in active:
            prob[k, pos[int(successors[v, p])]] += weights[p]
    adj = [sorted({pos[int(successors[v, p])] for p in active}) for v in nodes]
    comps = _tarjan_scc(adj)
    comp_of = np.zeros(m, dtype=np.int64)
    for ci, comp in enumerate(comps):
        for v in comp:
            comp_of[v] = ci
    closed = []
    for ci, comp in enumerate(comps):
        if all(comp_of[w] == ci for v in comp for w in adj[v]):
            closed.append(ci)
    pis = {}
    for ci in closed:
        comp = sorted(comps[ci])
        sub = prob[np.ix_(comp, comp)]
        pi_c = _solve_stationary(sub.T)
        pis[ci] = (comp, np.clip(pi_c, 0.0, None) / np.clip(pi_c, 0.0, None).sum())
    start_pos = pos[start]
    out = np.zeros(n)
    if comp_of[start_pos] in closed:
        comp, pi_c = pis[comp_of[start_pos]]
        for k, v in enumerate(comp):
            out[nodes[v]] = pi_c[k]
        return out
    transient = [v for v in range(m) if comp_of[v] not in closed]
    t_pos = {v: k for k, v in enumerate(transient)}
    q = prob[np.ix_(transient, transient)]
    lhs = np.eye(len(transient)) - q
    for ci in closed:
        comp, pi_c = pis[ci]
        r = prob[np.ix_(transient, comp)].sum(axis=1)
        absorb = np.linalg.solve(lhs, r)
        a = absorb[t_pos[start_pos]]
        if a <= 0.0:
            continue
        for k, v in enumerate(comp):
            out[nodes[v]] += a * pi_c[k]
    total = out.sum()
    if not np.isfinite(total) or abs(total - 1.0) > 1e-9:
        raise RuntimeError("limit distribution did not normalize; chain analysis failed")
    return out / total


def stationary_distribution(chain: SubsetChain, sys_erasure: float, par_erasure: float) -> np.ndarray:
    """Long-run distribution over subset-chain nodes for given erasure rates.

    Uses a direct linear solve and falls back to explicit closed-class
    analysis when the chain is reducible for the given weights.
    """
    weights = _pattern_weights(sys_erasure, par_erasure)
    trans_t = np.zeros((len(chain), len(chain)))
    for p in range(4):
        if weights[p] == 0.0:
            continue
        np.add.at(trans_t, (chain.successors[:, p], np.arange(len(chain))), weights[p])
    try:
        pi = _solve_stationary(trans_t)
    except np.linalg.LinAlgError:
        return _limit_distribution(chain.successors, weights)
    residual = np.max(np.abs(trans_t @ pi - pi))
    if residual > _RESIDUAL_TOL or pi.min() < -_RESIDUAL_TOL or abs(pi.sum() - 1.0) > 1e-9:
        return _limit_distribution(chain.successors, weights)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


@dataclass(frozen=True)
class TransferPoint:
    sys_erasure: float
    par_erasure: float
    sys_extrinsic: float
    par_extrinsic: float


class TransferFunction:
    """Exact extrinsic-erasure map of one component decoder.

    Precomputes both subset chains and the indicator tables coupling them,
    so repeated evaluations reduce to small batched linear solves.
    """

    def __init__(self, trellis: Trellis):
        self.trellis = trellis
        self.generators = trellis.generators
        self.forward = build_subset_chain(trellis, "forward")
        self.backward = build_subset_chain(trellis, "backward")
        nf, nb = len(self.forward), len(self.backward)
        # transposed one-pattern transition matrices for fast weighting
        self._fwd_t = np.zeros((4, nf, nf))
        self._bwd_t = np.zeros((4, nb, nb))
        for p in range(4):
            self._fwd_t[p, self.forward.successors[:, p], np.arange(nf)] = 1.0
            self._bwd_t[p, self.backward.successors[:, p], np.arange(nb)] = 1.0

        # Indicator tables over (forward node, backward node):
        #   sys_free_*: the one branch with input 1 survives, so the erased
        #               systematic bit is not pinned down
        #   par_one_*:  some surviving branch carries parity 1, so the
        #               erased parity bit is not pinned down
        # suffix *_pk / *_sk: the step's other observation is known (all-zero),
        # *_pe / *_se: it is erased.
        in_f = np.array([[(m >> s) & 1 for m in self.forward.node_masks]
                         for s in range(trellis.num_states)], dtype=bool)
        in_b = np.array([[(m >> s) & 1 for m in self.backward.node_masks]
                         for s in range(trellis.num_states)], dtype=bool)
        sys_free_pk = np.zeros((nf, nb), dtype=bool)
        sys_free_pe = np.zeros((nf, nb), dtype=bool)
        par_one_sk = np.zeros((nf, nb), dtype=bool)
        par_one_se = np.zeros((nf, nb), dtype=bool)
        for s in range(trellis.num_states):
            for u in (0, 1):
                t = int(trellis.next_state[s, u])
                reach = np.outer(in_f[s], in_b[t])
                p = int(trellis.parity_out[s, u])
                if u == 1:
                    sys_free_pe |= reach
                    if p == 0:
                        sys_free_pk |= reach
                if p == 1:
                    par_one_se |= reach
                    if u == 0:
                        par_one_sk |= reach
        self._sys_free_pk = sys_free_pk.astype(float)
        self._sys_free_pe = sys_free_pe.astype(float)
        self._par_one_sk = par_one_sk.astype(float)
        self._par_one_se = par_one_se.astype(float)

    @classmethod
    def for_generators(cls, generators: GeneratorSpec | str) -> "TransferFunction":
        if isinstance(generators, str):
            generators = GeneratorSpec.parse(generators)
        return _cached_transfer_function(generators)

    def _stationary_batch(self, weights: np.ndarray, pattern_t: np.ndarray,
                          successors: np.ndarray) -> np.ndarray:
        """Stationary law per weight row; falls back per point if needed."""
        k, n = weights.shape[0], pattern_t.shape[1]
        trans_t = np.einsum("kp,pij->kij", weights, pattern_t)
        lhs = trans_t - np.eye(n)
        lhs[:, 0, :] = 1.0
        rhs = np.zeros((k, n, 1))
        rhs[:, 0, 0] = 1.0
        try:
            pi = np.linalg.solve(lhs, rhs)[:, :, 0]
        except np.linalg.LinAlgError:
            pi = np.full((k, n), np.nan)
        residual = np.max(np.abs(np.einsum("kij,kj->ki", trans_t, pi) - pi), axis=1)
        bad = ~(np.isfinite(residual)) | (residual > _RESIDUAL_TOL) \
            | (pi.min(axis=1) < -_RESIDUAL_TOL) | (np.abs(pi.sum(axis=1) - 1.0) > 1e-9)
        for i in np.nonzero(bad)[0]:
            pi[i] = _limit_distribution(successors, weights[i])
        pi = np.clip(pi, 0.0, None)
        return pi / pi.sum(axis=1, keepdims=True)

    def batch(self, sys_erasure, par_erasure) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized evaluation; returns (sys extrinsic, parity extrinsic) arrays."""
        ps = np.atleast_1d(np.asarray(sys_erasure, dtype=float))
        pp = np.atleast_1d(np.asarray(par_erasure, dtype=float))
        ps, pp = np.broadcast_arrays(ps, pp)
        if ps.min() < 0.0 or ps.max() > 1.0 or pp.min() < 0.0 or pp.max() > 1.0:
            raise ValueError("erasure probabilities must lie in [0, 1]")
        fs = np.zeros(ps.shape)
        fp = np.zeros(ps.shape)
        # exact boundary cases, kept out of the solver path
        all_erased = (ps == 1.0) & (pp == 1.0)
        fs[all_erased] = 1.0
        fp[all_erased] = 1.0
        trivial = all_erased | ((ps == 0.0) & (pp < 1.0))
        idx = np.nonzero(~trivial)
        if idx[0].size:
            psa, ppa = ps[idx], pp[idx]
            weights = np.stack([(1 - psa) * (1 - ppa), (1 - psa) * ppa,
                                psa * (1 - ppa), psa * ppa], axis=-1)
            pf = self._stationary_batch(weights, self._fwd_t, self.forward.successors)
            pb = self._stationary_batch(weights, self._bwd_t, self.backward.successors)
            coupling_s = np.multiply.outer(1 - ppa, self._sys_free_pk) \
                + np.multiply.outer(ppa, self._sys_free_pe)
            coupling_p = np.multiply.outer(1 - psa, self._par_one_sk) \
                + np.multiply.outer(psa, self._par_one_se)
            fs[idx] = np.einsum("ki,kij,kj->k", pf, coupling_s, pb)
            fp[idx] = np.einsum("ki,kij,kj->k", pf, coupling_p, pb)
        np.clip(fs, 0.0, 1.0, out=fs)
        np.clip(fp, 0.0, 1.0, out=fp)
        return fs, fp

    def point(self, sys_erasure: float, par_erasure: float) -> TransferPoint:
        fs, fp = self.batch([sys_erasure], [par_erasure])
        return TransferPoint(float(sys_erasure), float(par_erasure), float(fs[0]), float(fp[0]))


@lru_cache(maxsize=32)
def _cached_transfer_function(generators: GeneratorSpec) -> TransferFunction:
    return TransferFunction(build_trellis(generators))


def transfer(trellis: Trellis, sys_erasure: float, par_erasure: float) -> TransferPoint:
    """One-off evaluation; heavy users should hold a TransferFunction."""
    return TransferFunction.for_generators(trellis.generators).point(sys_erasure, par_erasure)
