"""Report emission: delimited output, aligned text, and rendered figures.

Every report path writes machine-readable CSV plus a matplotlib figure of
the same content, so a fit or study can be inspected without extra tooling.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .basis import transformed_basis_matrix
from .model import Dataset, FittedModel, index_values
from .simulate import StudyReport

FLOAT_FMT = "{:.17g}"
_GRID_POINTS = 100

_FIG_STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 150,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}

#: Fixed PNG metadata so reruns produce byte-identical figures.
_PNG_METADATA = {"Software": "vmicm"}


def _save(fig, path: Path) -> None:
    fig.savefig(path, metadata=_PNG_METADATA)
    plt.close(fig)


def function_grid(fit: FittedModel, dataset: Dataset,
                  n_grid: int = _GRID_POINTS) -> tuple[np.ndarray, np.ndarray]:
    """Index grid over the fitted range and all f_k evaluated on it."""
    u = index_values(dataset, fit.beta)
    grid = np.linspace(float(u.min()), float(u.max()), n_grid)
    T = transformed_basis_matrix(fit.spec, grid, clamp_all=True)
    values = fit.coef.constant[None, :] + T[:, 1:] @ fit.coef.varying.T
    return grid, values


def write_fit_report(fit: FittedModel, dataset: Dataset, out_dir) -> list[Path]:
    """Write the full fit report into ``out_dir``; returns the file list."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    cls = fit.classification
    with (out / "classification.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["gene", "status", "constant_value"])
        for k in range(1, fit.coef.num_functions):
            status = cls.category(k)
            const = fit.coef.constant[k] if status == "constant" else ""
            writer.writerow([f"g{k}", status,
                             FLOAT_FMT.format(const) if const != "" else ""])
    written.append(out / "classification.csv")

    with (out / "beta.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["loading", "estimate", "selected"])
        for d, b in enumerate(fit.beta.beta, start=1):
            writer.writerow([f"beta{d}", FLOAT_FMT.format(b), int(b != 0.0)])
    written.append(out / "beta.csv")

    grid, values = function_grid(fit, dataset)
    with (out / "functions.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["u"] + [f"f{k}" for k in range(fit.coef.num_functions)])
        for j, u in enumerate(grid):
            writer.writerow([FLOAT_FMT.format(u)]
                            + [FLOAT_FMT.format(v) for v in values[j]])
    written.append(out / "functions.csv")

    tun = fit.tuning
    diag = fit.diagnostics
    lines = [
        "vmicm fit summary",
        "=================",
        f"n={dataset.n} q={dataset.q} p={dataset.p}",
        f"selected K={tun.get('K')} h={tun.get('h')} tau={tun.get('tau')}",
        f"lambda1={tun.get('lambda1', 0.0):.6g} "
        f"lambda2={tun.get('lambda2', 0.0):.6g} "
        f"lambda3={tun.get('lambda3', 0.0):.6g}",
        f"outer_iterations={diag.get('outer_iterations')} "
        f"converged={diag.get('converged')} rss={diag.get('rss', float('nan')):.6g}",
        "",
        "classification: varying=" + (",".join(f"g{k}" for k in cls.varying) or "-"),
        "                constant=" + (",".join(f"g{k}" for k in cls.constant) or "-"),
        "                zero=" + (",".join(f"g{k}" for k in cls.zero) or "-"),
        "beta: " + " ".join(f"{b:+.6f}" for b in fit.beta.beta),
    ]
    if diag.get("degenerate_beta1"):
        lines.append("warning: first loading is numerically zero (degenerate fit)")
    (out / "fit_summary.txt").write_text("\n".join(lines) + "\n")
    written.append(out / "fit_summary.txt")

    with plt.rc_context(_FIG_STYLE):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        shown = [0] + list(cls.varying)
        for k in shown[:8]:
            ax.plot(grid, values[:, k], label=f"f{k}")
        ax.set_xlabel("index u")
        ax.set_ylabel("coefficient function")
        ax.set_title("Estimated varying coefficient functions")
        ax.legend(loc="best", fontsize=8)
        _save(fig, out / "functions.png")
    written.append(out / "functions.png")
    return written


def write_study_report(report: StudyReport, out_dir) -> list[Path]:
    """Write study CSV, aligned text table, and summary figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "study_report.csv").write_text(report.to_csv())
    (out / "study_report.txt").write_text(report.to_text())

    rows = list(report.function_rows)
    with plt.rc_context(_FIG_STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.8))
        names = [r.name for r in rows]
        ax1.bar(names, [r.oracle_pct for r in rows], color="#4878d0")
        ax1.set_ylim(0, 105)
        ax1.set_ylabel("oracle %")
        ax1.set_title("Classification accuracy")
        ax1.tick_params(axis="x", rotation=45)
        width = 0.4
        xs = np.arange(len(rows))
        ax2.bar(xs - width / 2, [max(r.model_metric, 1e-12) for r in rows],
                width, label="model")
        ax2.bar(xs + width / 2, [max(r.oracle_metric, 1e-12) for r in rows],
                width, label="oracle")
        ax2.set_yscale("log")
        ax2.set_xticks(xs, names, rotation=45)
        ax2.set_ylabel("IMSE")
        ax2.set_title("Estimation accuracy")
        ax2.legend(fontsize=8)
        fig.tight_layout()
        _save(fig, out / "study_summary.png")
    return [out / "study_report.csv", out / "study_report.txt",
            out / "study_summary.png"]
