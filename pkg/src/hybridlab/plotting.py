"""Optional PNG figures next to the CSV output (``--figures``).

matplotlib is imported lazily with the Agg backend, so the rest of the package
never needs a display or even matplotlib itself.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

# per experiment kind: (x column, y column, log axes, title)
_REPORT_AXES = {
    "lip_j1": ("dH_linf", "dq_linf", True, "coefficient vs data difference"),
    "lip_j2": ("dH_linf", "dq_linf", True, "coefficient vs data difference"),
    "mt3": ("pair", "main_ratio", False, "|q-q~| / (K |v-v~|) per pair"),
    "hs1": ("du_l2", "dq_linf", True, "potential difference vs solution difference"),
    "hs3": ("du_l2", "da_linf_omega", True, "diffusion difference on omega vs solution difference"),
    "glb": ("sample", "eta", False, "boundary gradient minimum"),
    "pos": (None, "harnack_ratio", False, "Harnack ratio per case"),
    "interp": ("member", "sobolev_ratio", False, "Sobolev interpolation ratio"),
    "vanish": ("radius", "energy", True, "ball energy of |grad w|^2"),
    "contract": ("magnitude", "max_ratio", False, "observed contraction factor"),
}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_field(field, path, title: str = "") -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(field.values, origin="lower", extent=(0, 1, 0, 1), cmap="viridis")
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    path = Path(path)
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_report(report, out_dir) -> Path | None:
    """One summary figure for a stability report; ``None`` for kinds without a plot."""
    spec = _REPORT_AXES.get(report.kind)
    if spec is None or not report.rows:
        return None
    xcol, ycol, logs, title = spec
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    y = report.column(ycol)
    x = np.arange(len(y)) if xcol is None else report.column(xcol)
    group = None
    for name in ("sample", "group", "center", "grid", "shape"):
        if name in report.columns and name != xcol:
            group = report.column(name)
            break
    finite = np.isfinite(x) & np.isfinite(y)
    if group is None:
        ax.plot(x[finite], y[finite], "o")
    else:
        for gval in np.unique(group):
            sel = finite & (group == gval)
            ax.plot(x[sel], y[sel], "o-", ms=3, lw=0.8)
    if logs:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(xcol or "case")
    ax.set_ylabel(ycol)
    ax.set_title(f"{report.kind}: {title}", fontsize=9)
    path = Path(out_dir) / f"{report.kind}.png"
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path
