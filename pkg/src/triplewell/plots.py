"""Optional PNG figures drawn from the exported data (needs matplotlib)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def energies(path, es) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(es.scaled_energies, ".", ms=1)
    ax.set_xlabel("level index")
    ax.set_ylabel("E/N")
    _save(fig, path)


def entropy(path, prof) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    E = prof.scaled_energies
    for raw, smooth, label in (
        (prof.sh_total, prof.smooth_total, "total"),
        (prof.sh_upper, prof.smooth_upper, "N2 >= N1+N3"),
        (prof.sh_lower, prof.smooth_lower, "N2 < N1+N3"),
    ):
        ax.plot(E, raw, ".", ms=1, alpha=0.3)
        ax.plot(E, smooth, lw=1.5, label=label)
    ax.set_xlabel("E/N")
    ax.set_ylabel("Shannon entropy")
    ax.legend()
    _save(fig, path)


def grid(path, g, power=None) -> None:
    vals = np.where(g.mask, g.values, np.nan)
    if power:
        vals = vals**power
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(vals.T, origin="lower", extent=(0, 1, 0, 1), cmap="viridis")
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("N1/N")
    ax.set_ylabel("N3/N")
    _save(fig, path)


def histogram(path, hist) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(hist.density().T, origin="lower", extent=(0, 1, 0, 1), cmap="magma")
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("N1/N")
    ax.set_ylabel("N3/N")
    _save(fig, path)


def points(path, pts) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.plot(pts[:, 0], pts[:, 1], ".", ms=2, alpha=0.3)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel("N1/N")
    ax.set_ylabel("N3/N")
    _save(fig, path)


def section(path, events) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    if events:
        n1 = np.array([e.n1 for e in events])
        phi = np.array([e.phi12 for e in events])
        ax.plot(phi, n1, ",", alpha=0.5)
    ax.set_xlim(-np.pi, np.pi)
    ax.set_ylim(0, 1)
    ax.set_xlabel("phi12")
    ax.set_ylabel("N1/N")
    _save(fig, path)
