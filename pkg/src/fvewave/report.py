"""Study outputs: delimited error tables, figures, field snapshots.

Figures are rendered straight to files through the Agg canvas so that
importing this module never touches an interactive backend.
"""

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

CSV_HEADER = "n,h,k,err_max,rate_max,err_l2,rate_l2,err_h1,rate_h1,runtime_seconds"

_NORM_LABELS = {"max": "nodal max", "l2": "L2", "h1": "H1"}
_NORM_COLORS = {"max": "#1f77b4", "l2": "#d62728", "h1": "#2ca02c"}


def _cell(value, fmt="{:.12e}"):
    return "" if value is None else fmt.format(value)


def write_study_csv(path, report, deterministic=False):
    """Write one row per level; rate cells of the first level stay empty."""
    lines = [CSV_HEADER]
    for idx, lvl in enumerate(report.levels):
        cells = [str(lvl.n), _cell(lvl.h), _cell(lvl.k)]
        for norm in ("max", "l2", "h1"):
            cells.append(_cell(lvl.error(norm)))
            rate = report.rates[norm][idx - 1] if idx > 0 else None
            cells.append(_cell(rate, "{:.6f}"))
        runtime = 0.0 if deterministic else lvl.runtime_seconds
        cells.append("{:.6f}".format(runtime))
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")
    return path


def render_convergence_figure(path, report, title=None):
    """Log-log error plot with first and second order guide lines."""
    levels = [lvl for lvl in report.levels
              if any(lvl.error(norm) for norm in report.norms)]
    if len(levels) < 2:
        return None
    hs = np.array([lvl.h for lvl in levels])

    fig = Figure(figsize=(6.0, 4.5), dpi=150)
    ax = fig.add_subplot(111)
    for norm in report.norms:
        errs = [lvl.error(norm) for lvl in levels]
        if any(e is None or e <= 0.0 for e in errs):
            continue
        ax.loglog(hs, errs, "o-", color=_NORM_COLORS[norm],
                  label=f"{_NORM_LABELS[norm]} error")

    anchor = None
    for norm in ("max", "l2", "h1"):
        err_last = levels[-1].error(norm)
        if norm in report.norms and err_last:
            anchor = err_last
            break
    if anchor is not None:
        for order, style in ((1, ":"), (2, "--")):
            guide = anchor * (hs / hs[-1]) ** order
            ax.loglog(hs, guide, style, color="0.5", linewidth=1.0,
                      label=f"order {order}")

    ax.set_xlabel("mesh size h")
    ax.set_ylabel("error at final time")
    ax.grid(True, which="both", linewidth=0.3, alpha=0.5)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    FigureCanvasAgg(fig).print_png(str(path))
    return path


def write_snapshot(path, mesh, values):
    """Write an 'x y value' line for every mesh node."""
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_nodes,):
        raise ValueError("snapshot needs one value per mesh node")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for (x, y), v in zip(mesh.nodes, values):
            handle.write(f"{float(x)!r} {float(y)!r} {float(v)!r}\n")
    return path


def render_snapshot_figure(path, mesh, values, title=None):
    """Filled contour rendering of a nodal field."""
    fig = Figure(figsize=(5.0, 4.2), dpi=150)
    ax = fig.add_subplot(111)
    img = ax.tripcolor(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.triangles,
                       np.asarray(values, dtype=float), shading="gouraud")
    fig.colorbar(img, ax=ax, shrink=0.9)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    FigureCanvasAgg(fig).print_png(str(path))
    return path
