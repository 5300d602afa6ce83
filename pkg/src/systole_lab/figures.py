"""Chart-plane figure rendering.

All figures live in the stereographic chart: the unit circle is the
football equator, ramification points are drawn as crosses.  SVG output is
made byte-deterministic by fixing the hash salt and dropping the date.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "systole-lab"

import numpy as np  # noqa: E402

_UNIT_T = np.linspace(0.0, 2.0 * math.pi, 361)


def _chart_axes(ax, bound: float = 2.2):
    ax.plot(np.cos(_UNIT_T), np.sin(_UNIT_T), color="0.6", lw=0.8, ls="--",
            zorder=1)
    ax.axhline(0.0, color="0.85", lw=0.6, zorder=0)
    ax.set_aspect("equal")
    ax.set_xlim(-bound, bound)
    ax.set_ylim(-bound, bound)
    ax.set_xlabel("Re z")
    ax.set_ylabel("Im z")


def _draw_points(ax, points, marker="x", color="k", label=None):
    pts = np.asarray([complex(p) for p in points])
    if len(pts):
        ax.plot(pts.real, pts.imag, marker, color=color, ms=7, mew=1.6,
                ls="none", label=label, zorder=5)


def _draw_polyline(ax, samples, closed=True, **kw):
    z = np.asarray([complex(p) for p in samples])
    if closed and abs(z[0] - z[-1]) > 1e-12:
        z = np.concatenate([z, z[:1]])
    ax.plot(z.real, z.imag, **kw)


def football_figure(geodesics, hoop_lengths=None):
    fig, ax = plt.subplots(figsize=(6, 6))
    _chart_axes(ax)
    colors = plt.cm.viridis(np.linspace(0.1, 0.85, max(len(geodesics), 1)))
    for k, g in enumerate(geodesics):
        label = f"figure eight {k}"
        if hoop_lengths is not None:
            label += f" (hoop {hoop_lengths[k]:.6f})"
        _draw_polyline(ax, g.image_samples, closed=True, color=colors[k],
                       lw=1.1, label=label)
        if g.self_intersection is not None:
            ax.plot([g.self_intersection.real], [g.self_intersection.imag],
                    "o", color=colors[k], ms=4, zorder=6)
    _draw_points(ax, [0.0], marker="x", color="k", label="cone point")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title("figure-eight geodesics on the football")
    return fig


def surgery_figure(before_loops, after_loop, points):
    fig, axes = plt.subplots(1, 2, figsize=(11, 5.5), sharex=True, sharey=True)
    all_pts = np.concatenate([lp.vertices for lp in before_loops])
    bound = 1.25 * float(np.max(np.abs(np.concatenate(
        [all_pts.real, all_pts.imag, np.asarray([complex(p).real for p in points]),
         ]))) + 1.0)
    colors = plt.cm.tab10(np.linspace(0, 1, 10))
    for k, lp in enumerate(before_loops):
        _draw_polyline(axes[0], lp.vertices, closed=True,
                       color=colors[k % 10], lw=1.1, label=f"loop {k}")
        axes[0].plot([lp.basepoint.real], [lp.basepoint.imag], "s",
                     color=colors[k % 10], ms=5)
    _draw_polyline(axes[1], after_loop.vertices, closed=True, color="crimson",
                   lw=1.3, label="odd loop")
    axes[1].plot([after_loop.basepoint.real], [after_loop.basepoint.imag],
                 "s", color="crimson", ms=5)
    for ax, title in zip(axes, ("input loops", "surgery output")):
        _draw_points(ax, points, label="labeled points")
        ax.axhline(0.0, color="0.8", lw=0.8)
        ax.set_aspect("equal")
        ax.set_xlim(-bound, bound)
        ax.set_ylim(-0.2 * bound, bound)
        ax.set_title(title)
        ax.legend(loc="upper right", fontsize=8)
    return fig


def certificate_figure(cert, ramification_points):
    fig, ax = plt.subplots(figsize=(6.5, 6.5))
    verts = np.asarray([complex(z) for z in cert.path.samples])
    bound = 1.3 * float(np.max(np.abs(np.concatenate([
        verts.real, verts.imag,
        np.asarray([complex(p).real for p in ramification_points])])))) + 0.5
    _chart_axes(ax, bound=bound)
    _draw_polyline(ax, verts, closed=True, color="crimson", lw=1.2,
                   label=f"certificate loop (L={cert.path_length:.5f})")
    _draw_points(ax, ramification_points, label="ramification points")
    ax.plot([cert.p.real], [cert.p.imag], "s", color="crimson", ms=6,
            label="basepoint p")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title(f"ratio {cert.ratio:.5f}  <=  pi/4 (1+{cert.slack:.2e})")
    return fig


def save_figure(fig, path: str) -> None:
    kwargs = {}
    if str(path).lower().endswith(".svg"):
        kwargs["metadata"] = {"Date": None}
    fig.savefig(path, **kwargs)
    plt.close(fig)
