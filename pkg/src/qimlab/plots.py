"""Figure rendering for the experiment commands.

Every experiment command writes its figure next to the CSV it produced.
Rendering is headless (Agg) and strips volatile PNG metadata so that runs
are reproducible; the CSV remains the primary artifact and plotting can be
switched off with ``--no-plot``.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_SAVE_KW = {"dpi": 150, "metadata": {"Software": None}}

_STYLE = {"qim2": "o-", "qim3": "s-", "wf": "^-", "qim1": "d-"}


def save_success_rate_plot(rows, path) -> None:
    """rows: (model, n, m, trials, successes, rate)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    by_model = {}
    for model, n, m, _, _, rate in rows:
        by_model.setdefault(model, []).append((m / n, rate))
    for model, pts in by_model.items():
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                _STYLE.get(model, "o-"), label=model, markersize=4)
    ax.set_xlabel("m / n")
    ax.set_ylabel("empirical success rate")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_convergence_plot(trajectories, path) -> None:
    """trajectories: mapping name -> list of (iter, rel_error)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, traj in trajectories.items():
        its = [t for t, _ in traj]
        rels = [max(r, 1e-17) for _, r in traj]
        ax.semilogy(its, rels, _STYLE.get(name, "-"), label=name,
                    markersize=3, markevery=max(1, len(its) // 20))
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_noise_plot(rows, path) -> None:
    """rows: (model, snr_db, trials, mse_db)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    by_model = {}
    for model, snr, _, mse in rows:
        by_model.setdefault(model, []).append((snr, mse))
    for model, pts in by_model.items():
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                _STYLE.get(model, "o-"), label=model, markersize=4)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("MSE (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
