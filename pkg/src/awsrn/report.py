"""File-based reporting: delimited tables plus rendered figures.

Every writer takes an output path and produces one artifact; the CLI
composes them under a report directory. Figures render headlessly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .analysis import ComplexityReport, WeightReport


@dataclass(frozen=True)
class EvalRow:
    image_id: str
    psnr: float
    ssim: float
    psnr_bicubic: float
    ssim_bicubic: float
    note: str = ""


def write_complexity_csv(report: ComplexityReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["layer", "params", "multi_adds"])
        for layer in report.layers:
            w.writerow([layer.name, layer.params, layer.mults])
        w.writerow(["total", report.total_params, report.multi_adds])


def plot_complexity(report: ComplexityReport, path) -> None:
    convs = [l for l in report.layers if l.mults > 0]
    names = [l.name for l in convs]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(max(6, 0.45 * len(convs)), 7),
                                   sharex=True)
    ax1.bar(names, [l.params for l in convs], color="#4878d0")
    ax1.set_ylabel("parameters")
    ax1.set_title(
        f"scale x{report.config.scale}, {report.total_params} params, "
        f"{report.multi_adds / 1e9:.2f}G multi-adds at {report.out_w}x{report.out_h}"
    )
    ax2.bar(names, [l.mults / 1e9 for l in convs], color="#ee854a")
    ax2.set_ylabel("multi-adds (G)")
    ax2.tick_params(axis="x", rotation=90)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def write_weights_csv(report: WeightReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "depth", "block", "unit", "kernel", "w_res", "w_x", "alpha"])
        for u in report.units:
            w.writerow(["unit", u.depth, u.block, u.unit, "", u.w_res, u.w_x, ""])
        for b in report.blocks:
            w.writerow(["block", "", b.block, "", "", b.w_res, b.w_x, ""])
        for br in report.branches:
            w.writerow(["branch", "", "", "", br.kernel, "", "", br.alpha])


def plot_weights(report: WeightReport, path) -> None:
    n_panels = (1 if report.units or report.blocks else 0) + (
        1 if report.branches else 0
    )
    n_panels = max(n_panels, 1)
    fig, axes = plt.subplots(1, n_panels, figsize=(6 * n_panels, 4))
    if n_panels == 1:
        axes = [axes]
    i = 0
    if report.units or report.blocks:
        ax = axes[i]
        i += 1
        if report.units:
            depths = [u.depth for u in report.units]
            ax.plot(depths, [u.w_res for u in report.units], "o-", label="unit w_res")
            ax.plot(depths, [u.w_x for u in report.units], "s-", label="unit w_x")
        if report.blocks:
            xs = [b.block for b in report.blocks]
            ax.plot(xs, [b.w_res for b in report.blocks], "^--", label="block w_res")
            ax.plot(xs, [b.w_x for b in report.blocks], "v--", label="block w_x")
        ax.set_xlabel("depth")
        ax.set_ylabel("weight")
        ax.legend()
        ax.set_title("residual and shortcut weights")
    if report.branches:
        ax = axes[i]
        kernels = [str(b.kernel) for b in report.branches]
        ax.bar(kernels, [b.alpha for b in report.branches], color="#6acc64")
        ax.set_xlabel("branch kernel size")
        ax.set_ylabel("alpha")
        ax.set_title("reconstruction branch weights")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_loss_curve(trace: Sequence[float], path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(range(len(trace)), trace, linewidth=0.8, label="loss")
    if len(trace) >= 100:
        kernel = 100
        avg = [
            sum(trace[t - kernel : t]) / kernel for t in range(kernel, len(trace) + 1)
        ]
        ax.plot(range(kernel - 1, len(trace)), avg, linewidth=1.6,
                label="100-iter mean")
        ax.legend()
    ax.set_xlabel("iteration")
    ax.set_ylabel("L1 loss")
    if trace and min(trace) > 0:
        ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def write_eval_csv(rows: Sequence[EvalRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["image", "psnr", "ssim", "psnr_bicubic", "ssim_bicubic", "note"])
        for r in rows:
            w.writerow([r.image_id, r.psnr, r.ssim, r.psnr_bicubic, r.ssim_bicubic,
                        r.note])


def plot_eval(rows: Sequence[EvalRow], path) -> None:
    ok = [r for r in rows if not r.note and math.isfinite(r.psnr)]
    fig, ax = plt.subplots(figsize=(max(6, 0.8 * len(ok) + 2), 4))
    if ok:
        xs = range(len(ok))
        width = 0.38
        ax.bar([x - width / 2 for x in xs], [r.psnr for r in ok], width,
               label="model")
        ax.bar([x + width / 2 for x in xs], [r.psnr_bicubic for r in ok], width,
               label="bicubic")
        ax.set_xticks(list(xs))
        ax.set_xticklabels([r.image_id for r in ok], rotation=45, ha="right")
        ax.set_ylabel("PSNR (dB)")
        ax.legend()
    else:
        ax.text(0.5, 0.5, "no finite rows to plot", ha="center", va="center")
    ax.set_title("per-image PSNR")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
