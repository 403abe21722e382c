"""Figure rendering for run reports (headless matplotlib)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_curves"]


def render_curves(
    times,
    pe_master=None,
    pe_mean=None,
    pe_stderr=None,
    pe_traj=None,
    pe_oracle=None,
    title: str = "",
    path: str = "pe.png",
    max_traj: int = 8,
):
    """Write a PNG of the excitation-probability curves.

    Any of the curve arguments may be omitted; trajectories beyond
    `max_traj` are not drawn.
    """
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    if pe_traj is not None and len(pe_traj):
        for row in np.asarray(pe_traj)[:max_traj]:
            ax.plot(times, row, lw=0.6, alpha=0.45)
    if pe_mean is not None:
        ax.plot(times, pe_mean, "r-", lw=1.6, label="trajectory mean")
        if pe_stderr is not None:
            ax.fill_between(
                times,
                np.asarray(pe_mean) - 3 * np.asarray(pe_stderr),
                np.asarray(pe_mean) + 3 * np.asarray(pe_stderr),
                color="r",
                alpha=0.15,
                lw=0,
            )
    if pe_master is not None:
        ax.plot(times, pe_master, "k-", lw=1.8, label="master equation")
    if pe_oracle is not None:
        ax.plot(times, pe_oracle, "b--", lw=1.2, label="augmented model")
    ax.set_xlabel("t")
    ax.set_ylabel(r"$P_e(t)$")
    if title:
        ax.set_title(title)
    if pe_master is not None or pe_mean is not None or pe_oracle is not None:
        ax.legend(loc="best", frameon=False)
    ax.set_ylim(bottom=min(0.0, ax.get_ylim()[0]))
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
