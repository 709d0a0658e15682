"""Static figures for a scenario report."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["render_figures"]

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 110,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}


def _energy_figure(report, path: Path) -> None:
    fig, ax = plt.subplots()
    cmap = plt.get_cmap("viridis")
    eps = list(report.tables)
    for i, e in enumerate(eps):
        tab = report.tables[e]["energy"]
        ax.plot(tab[:, 0], tab[:, 1], color=cmap(i / max(len(eps) - 1, 1)), lw=1.2,
                label=f"mechanical, eps={e:g}")
    tab = report.tables[eps[-1]]["energy"]
    ax.plot(tab[:, 0], tab[:, 2], "k--", lw=1.0, label=f"approximate, eps={eps[-1]:g}")
    ax.plot(tab[:, 0], tab[:, 3], color="tab:red", lw=1.0, label="Gronwall bound")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.set_title(report.config.name)
    ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _solution_figure(report, path: Path) -> None:
    cont = report.continuation
    u = cont.limit_candidate
    t = cont.observation_times
    x = cont.base.space.x
    fig, ax = plt.subplots()
    vmax = float(np.max(np.abs(u))) or 1.0
    mesh = ax.pcolormesh(x, t, u, cmap="RdBu_r", vmin=-vmax, vmax=vmax, shading="auto")
    fig.colorbar(mesh, ax=ax, label="u")
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.set_title(f"limit candidate, eps={cont.epsilons[-1]:g}")
    ax.grid(False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _cauchy_figure(report, path: Path) -> None:
    cont = report.continuation
    fig, ax = plt.subplots()
    if cont.cauchy_diffs:
        ax.loglog(cont.epsilons[1:], cont.cauchy_diffs, "o-", label="cauchy diff")
    for name in ("exact_linear_wave", "leapfrog"):
        rows = report.comparisons.get(name, {}).get("per_epsilon")
        if rows:
            ax.loglog([r["epsilon"] for r in rows], [max(r["l2_diff"], 1e-300) for r in rows],
                      "s--", label=f"vs {name}")
    ax.set_xlabel("eps")
    ax.set_ylabel("L2 difference")
    ax.invert_xaxis()
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_figures(report, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    paths = []
    with plt.rc_context(_STYLE):
        for name, fn in (("energy.png", _energy_figure), ("solution.png", _solution_figure),
                         ("cauchy.png", _cauchy_figure)):
            path = out_dir / name
            fn(report, path)
            paths.append(path)
    return paths
