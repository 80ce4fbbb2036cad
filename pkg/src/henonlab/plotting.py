"""Static figures for experiment records (matplotlib, non-interactive backend)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps PNG output byte-identical across reruns
_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)


def census_figure(rows, path):
    n = [r.n for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    ax1.plot(n, [r.ratio for r in rows], "o-", label="#SPer / d^n")
    ax1.plot(n, [r.fix_count / r.sper_count if r.sper_count else np.nan for r in rows], "s--",
             label="#Fix / #SPer")
    ax1.set_xlabel("n")
    ax1.legend(fontsize=8)
    ax2.plot(n, [r.weighted_chi_u for r in rows], "o-", label="d^-n sum")
    ax2.plot(n, [r.mean_chi_u for r in rows], "s--", label="mean")
    ax2.set_xlabel("n")
    ax2.set_ylabel("chi_u (nats)")
    ax2.legend(fontsize=8)
    _save(fig, path)


def slice_figure(sample, path, title=None):
    fig, ax = plt.subplots(figsize=(5, 5))
    g = np.where(sample.inside, sample.green, np.nan)
    r = sample.radius
    ax.imshow(np.sqrt(g), origin="lower", extent=(-r, r, -r, r), cmap="viridis")
    pts = sample.boundary_points
    if len(pts):
        ax.plot(pts.real, pts.imag, ",", color="red")
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    if title:
        ax.set_title(title, fontsize=9)
    _save(fig, path)


def homoclinic_figure(points, annulus, path):
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    t = np.linspace(0, 2 * math.pi, 256)
    for r in annulus:
        ax.plot(r * np.cos(t), r * np.sin(t), color="0.7", lw=0.8)
    if points:
        z = np.array([h.zeta for h in points])
        sc = ax.scatter(z.real, z.imag, c=[h.landing for h in points], s=14, cmap="plasma")
        fig.colorbar(sc, ax=ax, label="landing k")
    ax.set_aspect("equal")
    ax.set_xlabel("Re zeta")
    ax.set_ylabel("Im zeta")
    _save(fig, path)


def asymptotics_figure(table, path):
    rows = table.rows
    n = np.array([r.n for r in rows])
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    axes[0].plot(n, [r.lambda_u_log.real for r in rows], "o-")
    axes[0].set_ylabel("log |lambda_u(q_n)|")
    axes[1].plot(n, [abs(r.normalized) for r in rows], "o-")
    axes[1].set_ylabel("|lambda_u(q_n)| / |lambda_u(p)|^n")
    d = np.array([r.mid_distance for r in rows])
    ok = d > 0
    axes[2].semilogy(n[ok], d[ok], "o-")
    axes[2].set_ylabel("mid-segment distance")
    for ax in axes:
        ax.set_xlabel("n")
    _save(fig, path)


def lyapunov_figure(saddles, chi_mu, path, log_d=None):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    chis = [o.chi_u for o in saddles]
    ax.hist(chis, bins=min(40, max(5, len(chis) // 3)), color="0.6")
    ax.axvline(chi_mu, color="C3", label="saddle average")
    if log_d is not None:
        ax.axvline(log_d, color="C0", ls="--", label="log d")
    ax.set_xlabel("chi_u (nats)")
    ax.legend(fontsize=8)
    _save(fig, path)


def render_figure(times, radius, path):
    fig, ax = plt.subplots(figsize=(5, 5))
    img = np.where(times < 0, np.nan, times).astype(float)
    cmap = matplotlib.colormaps["magma"].copy()
    cmap.set_bad("black")
    ax.imshow(img, origin="lower", extent=(-radius, radius, -radius, radius), cmap=cmap)
    ax.set_xlabel("s")
    ax.set_ylabel("t")
    _save(fig, path)
