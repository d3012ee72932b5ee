"""Figure rendering for the report path: every runner's CSV gets a matching
PNG written next to it.  Headless-safe (Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .gam import GamModel


def plot_scenario_a(panels: dict[str, pd.DataFrame], out_dir: str | Path) -> list[Path]:
    """One panel per experiment: mean test R^2 against the swept variable."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    axes = {"exp1": ("n_train", "training set size"),
            "exp2": ("noise_sd", "noise standard deviation"),
            "exp3": ("k", "sparsity")}
    written = []
    for exp, frame in panels.items():
        axis, label = axes[exp]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for method, sub in frame.groupby("method"):
            sub = sub.sort_values(axis)
            ax.errorbar(sub[axis], sub["r2_mean"], yerr=sub["r2_std"].fillna(0),
                        marker="o", capsize=3, label=method)
        ax.set_xlabel(label)
        ax.set_ylabel("test $R^2$")
        ax.set_title(exp)
        if exp == "exp2":
            ax.set_xscale("log")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / f"scenario_a_{exp}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def plot_scenario_b(report_frame: pd.DataFrame, out_dir: str | Path) -> list[Path]:
    """One panel per fidelity metric: mean score against teacher depth."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for metric, sub in report_frame.groupby("metric"):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        agg = sub.groupby(["depth", "method"])["value"].agg(["mean", "std"]).reset_index()
        for method, rows in agg.groupby("method"):
            rows = rows.sort_values("depth")
            ax.errorbar(rows["depth"], rows["mean"], yerr=rows["std"].fillna(0),
                        marker="o", capsize=3, label=method)
        ax.set_xlabel("teacher tree depth")
        ax.set_ylabel(f"fidelity {metric}")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / f"scenario_b_{metric}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def plot_rank_table(rank_frame: pd.DataFrame, out_dir: str | Path) -> list[Path]:
    """Average rank against interaction budget, one panel per metric."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for metric, sub in rank_frame.groupby("metric"):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for method, rows in sub.groupby("method"):
            rows = rows.sort_values("n_int")
            ax.plot(rows["n_int"], rows["avg_rank"], marker="o", label=method)
        ax.set_xlabel("interaction budget")
        ax.set_ylabel("average rank (lower is better)")
        ax.set_title(metric)
        ax.invert_yaxis()
        ax.legend(fontsize=7, ncol=2)
        fig.tight_layout()
        path = out_dir / f"rank_{metric}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def plot_stability(stability_frame: pd.DataFrame, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for method, rows in stability_frame.groupby("method"):
        rows = rows.sort_values("sample_size")
        ax.plot(rows["sample_size"], rows["overlap"], marker="o", label=method)
    ax.set_xlabel("explanation sample size")
    ax.set_ylabel("top-8 overlap with reference")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    path = out_dir / "stability.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_gam_terms(model: GamModel, out_dir: str | Path,
                   feature_names: list[str] | None = None,
                   max_terms: int = 12) -> list[Path]:
    """Shape-function plots: line charts for univariate terms, heatmaps for
    pairs; order-3 terms are rendered as one heatmap per slice of the third
    feature."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def name(j: int) -> str:
        return feature_names[j] if feature_names else f"x{j}"

    written = []
    for t in model.terms[:max_terms]:
        table = t.table
        if table.ndim > len(t.subset):  # multiclass: plot the last class column
            table = table[..., -1]
        if len(t.subset) == 1:
            fig, ax = plt.subplots(figsize=(4, 3))
            edges = np.concatenate([[t.cuts[0][0] - 1] if len(t.cuts[0]) else [0],
                                    t.cuts[0],
                                    [t.cuts[0][-1] + 1] if len(t.cuts[0]) else [1]])
            centers = (edges[:-1] + edges[1:]) / 2
            ax.step(centers, table, where="mid")
            ax.set_xlabel(name(t.subset[0]))
            ax.set_ylabel("contribution")
        elif len(t.subset) == 2:
            fig, ax = plt.subplots(figsize=(4, 3.2))
            im = ax.imshow(table.T, origin="lower", aspect="auto", cmap="RdBu_r")
            fig.colorbar(im, ax=ax)
            ax.set_xlabel(f"{name(t.subset[0])} bin")
            ax.set_ylabel(f"{name(t.subset[1])} bin")
        else:
            n_slices = table.shape[2]
            fig, axs = plt.subplots(1, n_slices, figsize=(2.2 * n_slices, 2.6),
                                    squeeze=False)
            vmax = float(np.abs(table).max()) or 1.0
            for s in range(n_slices):
                ax = axs[0][s]
                ax.imshow(table[:, :, s].T, origin="lower", aspect="auto",
                          cmap="RdBu_r", vmin=-vmax, vmax=vmax)
                ax.set_title(f"{name(t.subset[2])} bin {s}", fontsize=7)
                ax.set_xticks([])
                ax.set_yticks([])
            fig.supxlabel(f"{name(t.subset[0])} bin", fontsize=8)
            fig.supylabel(f"{name(t.subset[1])} bin", fontsize=8)
        tag = "_".join(str(j) for j in t.subset)
        fig.tight_layout()
        path = out_dir / f"term_{tag}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
