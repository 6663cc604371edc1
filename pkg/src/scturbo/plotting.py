"""Figure rendering for the command line report path.

Every function takes already-computed arrays and writes one PNG next to
the delimited output it illustrates.  The non-interactive backend is
forced so figures render identically in headless runs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150, format="png")
    plt.close(fig)
    return path


def transfer_figure(sys_grid, par_grid, sys_ext, par_ext, path):
    """Two heat maps of the extrinsic erasure surfaces over the input grid."""
    fig, axes = plt.subplots(1, 2, figsize=(9.6, 4.2))
    extent = [min(par_grid), max(par_grid), min(sys_grid), max(sys_grid)]
    for ax, z, title in ((axes[0], sys_ext, "systematic extrinsic"),
                         (axes[1], par_ext, "parity extrinsic")):
        im = ax.imshow(z, origin="lower", aspect="auto", extent=extent,
                       vmin=0.0, vmax=1.0, cmap="viridis")
        ax.set_xlabel("parity input erasure")
        ax.set_ylabel("systematic input erasure")
        ax.set_title(title)
        fig.colorbar(im, ax=ax, fraction=0.046)
    return _finish(fig, path)


def exit_curve_figure(eps, entropy, rate, bp_value, path, map_value=None):
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    ax.plot(eps, entropy, lw=1.8, label="fixed-point entropy")
    ax.axvline(bp_value, color="tab:red", ls="--", lw=1.0,
               label=f"iterative threshold {bp_value:.4f}")
    if map_value is not None:
        ax.axvline(map_value, color="tab:green", ls=":", lw=1.2,
                   label=f"area-matched threshold {map_value:.4f}")
        mask = np.asarray(eps) >= map_value
        ax.fill_between(np.asarray(eps)[mask], np.asarray(entropy)[mask],
                        alpha=0.2, color="tab:green",
                        label=f"tail area = rate {rate:.4f}")
    ax.set_xlabel("channel erasure probability")
    ax.set_ylabel("extrinsic entropy")
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="upper left", fontsize=8)
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def de_trace_figure(profiles, path):
    """Iteration-by-position erasure map plus a few profile snapshots."""
    profiles = np.asarray(profiles)
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9.6, 4.2))
    im = ax0.imshow(profiles, aspect="auto", origin="lower", cmap="magma",
                    extent=[1, profiles.shape[1], 0, profiles.shape[0] - 1])
    ax0.set_xlabel("chain position")
    ax0.set_ylabel("iteration")
    ax0.set_title("bit erasure probability")
    fig.colorbar(im, ax=ax0, fraction=0.046)
    picks = np.unique(np.linspace(0, profiles.shape[0] - 1, 6).astype(int))
    positions = np.arange(1, profiles.shape[1] + 1)
    for it in picks:
        ax1.plot(positions, profiles[it], lw=1.2, label=f"iteration {it}")
    ax1.set_xlabel("chain position")
    ax1.set_ylabel("bit erasure probability")
    ax1.legend(fontsize=7)
    ax1.grid(alpha=0.3)
    return _finish(fig, path)


def waterfall_figure(points, path):
    """Bit and frame erasure rates against the channel parameter."""
    eps = [p.eps for p in points]
    ber = [p.bit_erasure_rate for p in points]
    fer = [p.frame_erasure_rate for p in points]
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    floor = 1e-7
    ax.semilogy(eps, np.maximum(ber, floor), "o-", label="bit erasure rate")
    ax.semilogy(eps, np.maximum(fer, floor), "s--", label="frame erasure rate")
    ax.set_xlabel("channel erasure probability")
    ax.set_ylabel("post-decoding erasure rate")
    ax.grid(alpha=0.3, which="both")
    ax.legend()
    return _finish(fig, path)


def threshold_figure(probes, value, path):
    """Bisection history: iterations spent per probe, split by outcome."""
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for status, marker, color in (("decoded", "o", "tab:green"),
                                  ("stalled", "x", "tab:red"),
                                  ("iteration-cap", "s", "tab:orange")):
        xs = [p.eps for p in probes if p.status == status]
        ys = [p.iterations for p in probes if p.status == status]
        if xs:
            ax.semilogy(xs, ys, marker, color=color, ls="none", label=status)
    ax.axvline(value, color="k", ls="--", lw=1.0, label=f"threshold {value:.4f}")
    ax.set_xlabel("channel erasure probability")
    ax.set_ylabel("iterations until stop")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def table_figure(reports, path):
    """Grouped bars comparing thresholds across ensembles."""
    memories = sorted({m for r in reports for m in (r.coupled or {})})
    series = [("iterative", [r.bp for r in reports]),
              ("area-matched", [r.map_estimate for r in reports])]
    for m in memories:
        series.append((f"coupled m={m}",
                       [(r.coupled or {}).get(m) for r in reports]))
    fig, ax = plt.subplots(figsize=(1.8 + 1.4 * len(reports), 4.4))
    width = 0.8 / len(series)
    base = np.arange(len(reports))
    for k, (label, values) in enumerate(series):
        xs = [base[i] + k * width for i, v in enumerate(values) if v is not None]
        ys = [v for v in values if v is not None]
        ax.bar(xs, ys, width=width, label=label)
    ax.set_xticks(base + 0.4 - width / 2)
    ax.set_xticklabels([r.name for r in reports], fontsize=8)
    ax.set_ylabel("threshold")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, axis="y")
    return _finish(fig, path)
