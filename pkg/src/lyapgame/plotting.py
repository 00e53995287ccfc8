"""Static figures written next to the CSV outputs (Agg backend, no display)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 120,
}
# PNG metadata is pinned so reruns give identical bytes
PNG_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata=PNG_META)
    plt.close(fig)


def silhouette(points, hull, path, title="achievable utilities"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.6))
        pts = np.asarray(points)
        ax.scatter(pts[:, 0], pts[:, 1], s=8, color="0.5", label="direction optima", zorder=3)
        h = np.asarray(hull)
        if len(h) >= 3:
            ring = np.vstack([h, h[:1]])
            ax.fill(ring[:, 0], ring[:, 1], color="tab:blue", alpha=0.25, lw=0)
            ax.plot(ring[:, 0], ring[:, 1], color="tab:blue", lw=1.2)
        ax.scatter(h[:, 0], h[:, 1], color="tab:blue", s=18, zorder=4, label="hull vertices")
        for x, y in h:
            ax.annotate(f"({x:.4g}, {y:.4g})", (x, y), textcoords="offset points", xytext=(4, 4), fontsize=7)
        ax.set_xlabel(r"$\bar u_1$")
        ax.set_ylabel(r"$\bar u_2$")
        ax.set_title(title)
        ax.legend(loc="best", frameon=False)
        _save(fig, path)


def trace(t, norm_per_t, envelope, phi_gammabar, phi_star, lower_bound, path):
    """Left: queue norm per slot against its envelope.  Right: objective against its bounds."""
    with plt.rc_context(STYLE):
        fig, (a0, a1) = plt.subplots(1, 2, figsize=(8, 3.2))
        a0.loglog(t, norm_per_t, color="tab:blue", lw=1, label=r"$\|X(t)\|/t$")
        a0.loglog(t, envelope, color="k", ls="--", lw=1, label="envelope")
        a0.set_xlabel("t")
        a0.legend(frameon=False)
        a1.semilogx(t, phi_gammabar, color="tab:blue", lw=1, label=r"$\phi(\bar\gamma(t))$")
        a1.axhline(phi_star, color="k", lw=1, label=r"$\phi^*$")
        if np.isfinite(lower_bound):
            a1.axhline(lower_bound, color="k", ls="--", lw=1, label=r"$\phi^* - B/V$")
        a1.set_xlabel("t")
        a1.legend(frameon=False)
        _save(fig, path)


def sweep(V, gap, bound_gap, norm_per_T, envelope_T, path):
    with plt.rc_context(STYLE):
        fig, (a0, a1) = plt.subplots(1, 2, figsize=(8, 3.2))
        a0.plot(V, gap, "o-", color="tab:blue", label=r"$\phi^* - \phi(\bar\gamma(T))$")
        a0.plot(V, bound_gap, "s--", color="k", label="B/V")
        a0.set_xscale("log")
        a0.set_yscale("symlog", linthresh=1e-2)
        a0.set_xlabel("V")
        a0.legend(frameon=False)
        a1.plot(V, norm_per_T, "o-", color="tab:blue", label=r"$\|X(T)\|/T$")
        a1.plot(V, envelope_T, "s--", color="k", label="envelope at T")
        a1.set_xscale("log")
        a1.set_xlabel("V")
        a1.legend(frameon=False)
        _save(fig, path)
