"""Decoding thresholds on the erasure channel.

Belief-propagation thresholds come from a coarse scan plus bisection on
the channel parameter.  The scan must show successes exactly up to some
point and failures after it; anything else indicates a broken recursion
and is reported instead of silently bisected.

The maximum-a-posteriori threshold of an uncoupled ensemble is estimated
from the fixed-point extrinsic entropy curve: the area under that curve
from a trial channel parameter up to 1 is matched against the design
rate, and the matching parameter is the estimate.  The curve is sampled
densely right after its jump at the belief-propagation threshold, where
it changes fastest.
"""

from __future__ import annotations

import io
import csv
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .de import DEParams, DEResult, box_average, de_fixed_point
from .ensemble import EnsembleSpec

_MIN_RESOLUTION = 1e-5


class ScanMonotonicityError(RuntimeError):
    """Coarse scan successes were not a prefix of the grid."""


class MapAreaError(RuntimeError):
    """The entropy-curve area never reaches the design rate."""


@dataclass(frozen=True)
class Probe:
    eps: float
    status: str
    iterations: int


@dataclass
class BPThreshold:
    value: float
    lower: float
    upper: float
    resolution: float
    probes: list[Probe]


def _decodes(spec: EnsembleSpec, eps: float, params: DEParams,
             probes: list[Probe]) -> bool:
    result = de_fixed_point(spec, eps, params)
    probes.append(Probe(eps, result.status, result.iterations))
    return result.converged


def bp_threshold(spec: EnsembleSpec, resolution: float = 1e-4,
                 params: DEParams | None = None,
                 scan_step: float = 0.1) -> BPThreshold:
    """Largest channel erasure rate the iterative decoder survives."""
    if resolution < _MIN_RESOLUTION:
        raise ValueError(f"resolution below {_MIN_RESOLUTION} is not supported")
    if not 0.0 < scan_step <= 0.5:
        raise ValueError("scan_step must lie in (0, 0.5]")
    params = params or DEParams()
    probes: list[Probe] = []
    grid = np.arange(0.0, 1.0 + scan_step / 2, scan_step)
    grid[-1] = 1.0
    outcomes = [_decodes(spec, float(e), params, probes) for e in grid]
    successes = [i for i, ok in enumerate(outcomes) if ok]
    if not successes:
        raise ScanMonotonicityError("decoding failed even at eps=0")
    last = successes[-1]
    if successes != list(range(last + 1)):
        raise ScanMonotonicityError(
            f"non-monotone scan outcomes at eps={[float(g) for g in grid]}: {outcomes}")
    if last == len(grid) - 1:
        raise ScanMonotonicityError("decoding succeeded even at eps=1")
    lo, hi = float(grid[last]), float(grid[last + 1])
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if _decodes(spec, mid, params, probes):
            lo = mid
        else:
            hi = mid
    return BPThreshold(0.5 * (lo + hi), lo, hi, resolution, probes)


def _entropy_value(result: DEResult, eps: float, spec: EnsembleSpec) -> float:
    """Average extrinsic erasure seen by a transmitted bit at a fixed point.

    Streams are weighted by their surviving fractions; what multiplies
    each stream is the erasure rate of the complementary information the
    combiner holds about that bit.
    """
    s = result.state
    m = spec.coupling_memory
    if spec.family == "pcc":
        num = s.upper_sys * s.lower_sys + spec.rho * (s.upper_par + s.lower_par)
        den = 1.0 + 2.0 * spec.rho
    else:
        back = box_average(s.inner_sys, m, +1)
        num = spec.rho0 * s.outer_sys * back + spec.rho1 * s.outer_par * back \
            + 2.0 * spec.rho2 * s.inner_par
        den = spec.rho0 + spec.rho1 + 2.0 * spec.rho2
    return float(num[0] if num.shape[0] == 1 else num.mean()) / den


def bp_exit_curve(spec: EnsembleSpec, eps_grid, params: DEParams | None = None) -> np.ndarray:
    """Fixed-point entropy values over a channel grid; shape (len(grid), 2).

    Only defined for uncoupled ensembles (one position, no windows).
    """
    if spec.coupled:
        raise ValueError("the entropy curve is defined for uncoupled ensembles")
    params = params or DEParams()
    rows = []
    for eps in np.asarray(eps_grid, dtype=float):
        result = de_fixed_point(spec, float(eps), params)
        h = 0.0 if result.converged else _entropy_value(result, float(eps), spec)
        rows.append((float(eps), h))
    return np.array(rows)


@dataclass
class MapEstimate:
    value: float
    bp_value: float
    design_rate: float
    total_area: float
    area_error: float
    value_error: float
    grid: np.ndarray      # channel erasure samples used for quadrature
    curve: np.ndarray     # fixed-point entropy at each grid sample


def _area_crossing(eps: np.ndarray, h: np.ndarray, rate: float):
    """Point where the right-tail trapezoid area first drops below rate."""
    seg = 0.5 * (h[1:] + h[:-1]) * np.diff(eps)
    tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    if tail[0] < rate:
        return None, float(tail[0])
    k = int(np.searchsorted(-tail, -rate, side="right")) - 1
    k = min(max(k, 0), len(eps) - 2)
    t0, t1 = tail[k], tail[k + 1]
    frac = 0.0 if t0 == t1 else (t0 - rate) / (t0 - t1)
    return float(eps[k] + frac * (eps[k + 1] - eps[k])), float(tail[0])


def map_threshold(spec: EnsembleSpec, grid_step: float = 1e-3,
                  tolerance: float = 1e-3,
                  params: DEParams | None = None,
                  jump_window: float = 0.01, jump_points: int = 60) -> MapEstimate:
    """Area-matching threshold estimate for an uncoupled ensemble.

    `grid_step` is the sample spacing away from the jump; the step is
    halved (at most twice) until the estimated quadrature error in the
    returned value is below `tolerance`.
    """
    if spec.coupled:
        raise ValueError("map_threshold expects an uncoupled ensemble")
    params = params or DEParams()
    bp = bp_threshold(spec, resolution=1e-5, params=params).value
    rate = spec.design_rate
    step = grid_step
    for _ in range(3):
        dense = bp + np.linspace(0.0, 1.0, jump_points) ** 2 * jump_window
        coarse = np.arange(bp + jump_window + step, 1.0, step)
        grid = np.concatenate([dense, coarse, [1.0]])
        curve = bp_exit_curve(spec, grid, params)
        h = curve[:, 1]
        value, total = _area_crossing(grid, h, rate)
        half_idx = list(range(0, len(grid), 2))
        if half_idx[-1] != len(grid) - 1:
            half_idx.append(len(grid) - 1)
        half_value, _ = _area_crossing(grid[half_idx], h[half_idx], rate)
        if value is None:
            raise MapAreaError(
                f"area {total:.4f} over [{bp:.4f}, 1] is below the design rate {rate:.4f}")
        value_error = abs(value - half_value) / 3.0 if half_value is not None else np.inf
        if value_error < tolerance:
            break
        step /= 2.0
    area_error = value_error * max(h[np.searchsorted(grid, value) - 1], 1e-12)
    return MapEstimate(value, bp, rate, total, area_error, value_error, grid, h)


@dataclass
class ThresholdReport:
    """One table row: an ensemble with its uncoupled and coupled thresholds."""

    name: str
    rate_label: str
    bp: float | None = None
    map_estimate: float | None = None
    coupled: dict[int, float] | None = None


def tabulate(spec: EnsembleSpec, coupling_memories=(1, 3), coupling_length: int = 100,
             resolution: float = 1e-4, params: DEParams | None = None,
             with_map: bool = True) -> ThresholdReport:
    """Compute the full threshold row for one ensemble family."""
    base = spec.uncoupled()
    report = ThresholdReport(spec.label if spec.name else base.label, spec.rate_label,
                             coupled={})
    report.bp = bp_threshold(base, resolution=resolution, params=params).value
    if with_map:
        report.map_estimate = map_threshold(base, params=params).value
    for m in coupling_memories:
        sc = base.with_coupling(m, coupling_length)
        report.coupled[m] = bp_threshold(sc, resolution=resolution, params=params).value
    return report


def emit_table(reports: list[ThresholdReport]) -> str:
    """Render reports as CSV; absent entries become empty cells."""
    memories = sorted({m for r in reports for m in (r.coupled or {})})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["Ensemble", "Rate", "eps_BP", "eps_MAP"]
                    + [f"eps_SC{m}" for m in memories])
    for r in reports:
        def cell(x):
            return "" if x is None else f"{x:.4f}"
        coupled = r.coupled or {}
        writer.writerow([r.name, r.rate_label, cell(r.bp), cell(r.map_estimate)]
                        + [cell(coupled.get(m)) for m in memories])
    return buf.getvalue()
