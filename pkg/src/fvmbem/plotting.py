"""Static figures: log-log convergence plots and solution snapshots."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import matplotlib.tri as mtri  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

LABELS = {
    "err_V": r"$\|\phi-\phi_{h,\tau}\|_{L^2(0,T;V)}$",
    "err_H1": r"$\|u-u_{h,\tau}\|_{H_T}$",
    "err_sum": "sum",
}


def plot_convergence(report, path, slope=None):
    hinv = np.array([1.0 / r.h for r in report.rows])
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    for key, marker in (("err_V", "o"), ("err_H1", "s"), ("err_sum", "^")):
        ax.loglog(hinv, [getattr(r, key) for r in report.rows], marker=marker,
                  label=LABELS[key])
    if slope is None:
        slope = report.final_eoc() or 1.0
    if len(hinv) > 1:
        ref = report.rows[-1].err_sum * 0.5 * (hinv / hinv[-1]) ** (-slope)
        ax.loglog(hinv, ref, "k--", lw=0.8, label=f"slope -{slope:.2f}")
    ax.set_xlabel("1/h")
    ax.set_ylabel("error")
    ax.set_title(report.problem)
    ax.legend(fontsize=8, frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_snapshots(traj, times, path, boxes=None):
    mesh = traj.mesh
    tri = mtri.Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles)
    idx = [int(np.argmin(np.abs(traj.grid.knots - t))) for t in times]
    vmin = min(traj.U[i].min() for i in idx)
    vmax = max(traj.U[i].max() for i in idx)
    cols = min(3, len(idx))
    rows = -(-len(idx) // cols)
    fig, axes = plt.subplots(rows, cols, figsize=(3.4 * cols, 3.1 * rows), squeeze=False)
    for ax in axes.ravel()[len(idx):]:
        ax.axis("off")
    for ax, i in zip(axes.ravel(), idx):
        im = ax.tripcolor(tri, traj.U[i], shading="gouraud", vmin=vmin, vmax=vmax)
        for box in boxes or ():
            (a, b), (c, d) = box[0], box[1]
            ax.add_patch(Rectangle((a, c), b - a, d - c, fill=False, ec="w", lw=0.7))
        ax.set_title(f"t = {traj.grid.knots[i]:.4g}", fontsize=9)
        ax.set_xlim(mesh.vertices[:, 0].min(), mesh.vertices[:, 0].max())
        ax.set_ylim(mesh.vertices[:, 1].min(), mesh.vertices[:, 1].max())
        ax.set_aspect("equal")
        ax.set_xticks([])
        ax.set_yticks([])
    fig.colorbar(im, ax=axes.ravel().tolist(), shrink=0.8)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
