"""Figure rendering for scans, loop traces, detections, and probes.

Everything draws straight to a file with the Agg backend so the CLI can
run headless.  Each function returns the path it wrote.
"""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .continuation import ContinuationTrace
from .detector import DetectionResult
from .embedding import ProbeResult
from .model import Rect, SigmaSurface
from .phase import PhaseReport


def _finish(fig, path) -> str:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=140)
    plt.close(fig)
    return str(out)


def save_surface_plot(surface: SigmaSurface, path) -> str:
    """Heatmap of the smallest singular value with its grid minimum marked."""
    fig, ax = plt.subplots(figsize=(6.4, 5.2))
    mesh = ax.pcolormesh(
        surface.xs, surface.ys, surface.sigma_min, shading="auto", cmap="viridis"
    )
    fig.colorbar(mesh, ax=ax, label="smallest singular value")
    mx, my, mval = surface.argmin_sigma()
    ax.plot(mx, my, "r+", markersize=12, markeredgewidth=2)
    ax.annotate(
        f"min {mval:.2e}",
        (mx, my),
        textcoords="offset points",
        xytext=(8, 8),
        color="white",
        fontsize=9,
    )
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title("sigma_min over the scan box")
    return _finish(fig, path)


def _running_phases(trace: ContinuationTrace) -> np.ndarray:
    """Cumulative per-step u-column phase increments, shape (samples, n)."""
    n = trace.n
    out = np.zeros((trace.num_samples, n))
    for k in range(trace.num_samples - 1):
        uk = trace.triples[k].u
        un = trace.triples[k + 1].u
        for j in range(n):
            z = complex(np.vdot(uk[:, j], un[:, j]))
            out[k + 1, j] = out[k, j] + math.atan2(z.imag, z.real)
    return out


def save_loop_plot(trace: ContinuationTrace, report: PhaseReport | None, path) -> str:
    """Singular values and running transport phases along one loop."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.8, 7.2), sharex=True)
    ts = np.asarray(trace.ts)
    sig = np.array([tr.sigma for tr in trace.triples])
    for j in range(trace.n):
        ax1.plot(ts, sig[:, j], label=f"sigma_{j + 1}")
    ax1.set_ylabel("singular values")
    ax1.legend(loc="best", fontsize=8)
    ax1.set_title(f"loop continuation ({trace.gauge.value} gauge)")

    phases = _running_phases(trace)
    for j in range(trace.n):
        label = f"column {j + 1}"
        if report is not None:
            label += f" (total {report.connection_sum[j]:+.4f})"
        ax2.plot(ts, phases[:, j], label=label)
    for level in (0.0, math.pi, -math.pi):
        ax2.axhline(level, color="gray", linewidth=0.6, linestyle=":")
    ax2.set_xlabel("loop parameter t")
    ax2.set_ylabel("stepwise transport phase (rad)")
    ax2.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _finish(fig, path)


def save_detection_plot(
    result: DetectionResult,
    box: Rect,
    path,
    surface: SigmaSurface | None = None,
) -> str:
    """Search box, inconclusive cells, and located rank-loss points."""
    fig, ax = plt.subplots(figsize=(6.4, 5.6))
    if surface is not None:
        mesh = ax.pcolormesh(
            surface.xs, surface.ys, surface.sigma_min, shading="auto", cmap="viridis"
        )
        fig.colorbar(mesh, ax=ax, label="smallest singular value")
    ax.add_patch(
        plt.Rectangle(
            (box.xmin, box.ymin),
            box.width,
            box.height,
            fill=False,
            edgecolor="black",
            linewidth=1.2,
        )
    )
    for cell in result.inconclusive:
        r = cell.rect
        ax.add_patch(
            plt.Rectangle(
                (r.xmin, r.ymin),
                r.width,
                r.height,
                facecolor="orange",
                alpha=0.35,
                edgecolor="orange",
            )
        )
    for p in result.points:
        marker = "o" if p.genericity.regular else "s"
        ax.plot(p.location[0], p.location[1], marker, color="red", markersize=7)
        ax.annotate(
            f"({p.location[0]:+.4f}, {p.location[1]:+.4f})",
            p.location,
            textcoords="offset points",
            xytext=(8, 6),
            fontsize=8,
        )
    pad_x = 0.05 * box.width
    pad_y = 0.05 * box.height
    ax.set_xlim(box.xmin - pad_x, box.xmax + pad_x)
    ax.set_ylim(box.ymin - pad_y, box.ymax + pad_y)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    flags = []
    if result.budget_exhausted:
        flags.append("budget exhausted")
    if result.inconclusive:
        flags.append(f"{len(result.inconclusive)} inconclusive")
    suffix = f" [{', '.join(flags)}]" if flags else ""
    ax.set_title(
        f"rank-loss detection: {len(result.points)} point(s), "
        f"{result.cells_tested} cells{suffix}"
    )
    return _finish(fig, path)


def save_probe_plot(probes: list[ProbeResult], path) -> str:
    """Directional limit ratios against the ray parameter, one panel each."""
    probes = [p for p in probes if p is not None]
    if not probes:
        raise ValueError("no probes to plot")
    fig, axes = plt.subplots(1, len(probes), figsize=(5.6 * len(probes), 4.6), squeeze=False)
    for ax, probe in zip(axes[0], probes):
        ts = np.asarray(probe.t_values)
        ax.set_xscale("log")
        if bool(np.all(probe.ratios > 0.0)):
            ax.set_yscale("log")
        for row in probe.ratios:
            ax.plot(ts, row, marker=".", linewidth=0.8, alpha=0.7)
        ax.set_xlabel("ray parameter t")
        ax.set_ylabel(probe.kind)
        ax.set_title(f"{probe.kind}: {probe.verdict}")
        ax.invert_xaxis()
    fig.tight_layout()
    return _finish(fig, path)


__all__ = [
    "save_surface_plot",
    "save_loop_plot",
    "save_detection_plot",
    "save_probe_plot",
]
