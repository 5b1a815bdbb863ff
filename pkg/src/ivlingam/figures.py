"""Matplotlib rendering of power-table bodies to image files.

Companion to the delimited power output: a grouped-bar comparison of the
five tests, rejection-rate curves across violation sizes, and a side-by-side
heatmap of a nonparametric vs a parametric test. All functions consume the
JSON body dict, mirroring the text renderers.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .report import POWER_HEADERS

_TEST_KEYS = [key for key, _ in POWER_HEADERS]
_TEST_LABELS = {key: label for key, label in POWER_HEADERS}


def _cells_sorted(body: dict) -> list[dict]:
    return sorted(body["cells"], key=lambda c: (c["alpha_zy"], c["n"]))


def rejection_bars(body: dict, path: Path) -> None:
    """Grouped bars: per-test rejection rate for up to three scenarios."""
    cells = _cells_sorted(body)
    picks = [cells[0]]
    if len(cells) > 2:
        picks.append(cells[len(cells) // 2])
    if len(cells) > 1:
        picks.append(cells[-1])

    x = np.arange(len(_TEST_KEYS))
    width = 0.8 / len(picks)
    fig, ax = plt.subplots(figsize=(8, 4))
    for i, cell in enumerate(picks):
        rates = [cell["rates"][k] for k in _TEST_KEYS]
        ax.bar(
            x + i * width,
            rates,
            width,
            label=f"violation={cell['alpha_zy']:g}, n={cell['n']}",
        )
    ax.set_xticks(x + width * (len(picks) - 1) / 2)
    ax.set_xticklabels([_TEST_LABELS[k] for k in _TEST_KEYS])
    ax.set_ylabel("rejection rate")
    ax.set_ylim(0, 1.05)
    ax.axhline(0.05, color="grey", linestyle=":", linewidth=1)
    ax.legend(fontsize=8)
    ax.set_title("Rejection rates by test")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def power_curves(body: dict, path: Path) -> None:
    """Rejection rate vs violation size, one line per sample size, per test."""
    cells = _cells_sorted(body)
    n_values = sorted({c["n"] for c in cells})
    alpha_values = sorted({c["alpha_zy"] for c in cells})
    fig, axes = plt.subplots(1, len(_TEST_KEYS), figsize=(3 * len(_TEST_KEYS), 3), sharey=True)
    for ax, key in zip(np.atleast_1d(axes), _TEST_KEYS):
        for n in n_values:
            ys = []
            for a in alpha_values:
                match = [c for c in cells if c["n"] == n and c["alpha_zy"] == a]
                ys.append(match[0]["rates"][key] if match else np.nan)
            ax.plot(alpha_values, ys, marker="o", markersize=3, label=f"n={n}")
        ax.set_title(_TEST_LABELS[key], fontsize=9)
        ax.set_xlabel("violation size")
        ax.set_ylim(-0.02, 1.05)
        ax.axhline(0.05, color="grey", linestyle=":", linewidth=1)
    np.atleast_1d(axes)[0].set_ylabel("rejection rate")
    np.atleast_1d(axes)[-1].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def rate_heatmap(body: dict, path: Path, tests: tuple[str, str] = ("HSIC", "AsymptoticNormal")) -> None:
    """Violation-size x sample-size heatmaps for two representative tests."""
    cells = _cells_sorted(body)
    n_values = sorted({c["n"] for c in cells})
    alpha_values = sorted({c["alpha_zy"] for c in cells})
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for ax, key in zip(axes, tests):
        grid = np.full((len(alpha_values), len(n_values)), np.nan)
        for cell in cells:
            i = alpha_values.index(cell["alpha_zy"])
            j = n_values.index(cell["n"])
            grid[i, j] = cell["rates"][key]
        image = ax.imshow(grid, vmin=0, vmax=1, cmap="viridis", aspect="auto", origin="lower")
        ax.set_xticks(range(len(n_values)), [str(n) for n in n_values])
        ax.set_yticks(range(len(alpha_values)), [f"{a:g}" for a in alpha_values])
        ax.set_xlabel("n")
        ax.set_ylabel("violation size")
        ax.set_title(_TEST_LABELS.get(key, key), fontsize=10)
        for i in range(len(alpha_values)):
            for j in range(len(n_values)):
                if grid[i, j] == grid[i, j]:
                    ax.text(j, i, f"{grid[i, j]:.2f}", ha="center", va="center",
                            color="white" if grid[i, j] < 0.6 else "black", fontsize=7)
    fig.colorbar(image, ax=axes, shrink=0.85, label="rejection rate")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def save_power_figures(body: dict, outdir: str | Path) -> list[Path]:
    """Render all three power figures into a directory; returns the paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = [
        outdir / "rejection_rates_bars.png",
        outdir / "rejection_rates_curves.png",
        outdir / "rejection_rates_heatmap.png",
    ]
    rejection_bars(body, paths[0])
    power_curves(body, paths[1])
    rate_heatmap(body, paths[2])
    return paths
