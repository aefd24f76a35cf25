"""Delimited output and figure rendering for runs, comparisons and analyses.

Every writer in this module produces comma-separated files with a one-line
header; floating-point values carry 17 significant digits so files re-read
to the bit.  The plotting helpers render to image files (Agg backend) right
next to the delimited output and never open a display.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import FieldSample, NewtonPath, OneCellSolution  # noqa: E402
from .compare import ComparisonMatrix  # noqa: E402
from .mesh import Grid  # noqa: E402
from .solver import RunReport, State  # noqa: E402

_LOCUS_STYLE = {
    "phase_w": ("tab:blue", "phase-w potential = 0"),
    "phase_g": ("tab:green", "phase-g potential = 0"),
    "total": ("tab:red", "total flux = 0"),
    "capillary": ("tab:purple", "capillary contrast = 0"),
}


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def write_rows(path: str, header, rows) -> str:
    """Write a CSV with a single header line and 17-significant-digit floats."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_fmt(v) for v in row) + "\n")
    return path


# -- simulation runs ---------------------------------------------------------


def write_run_outputs(report: RunReport, grid: Grid, phase_names,
                      out_dir: str, stem: str | None = None,
                      render: bool = True) -> list[str]:
    """Write summary, step log, mass audit and final state for one run."""
    stem = stem or report.label.replace(":", "_") or "run"
    base = os.path.join(out_dir, stem)
    paths = []

    n_comp = len(report.mass_initial)
    header = ["label", "scheme", "iterations", "wasted", "total_iterations",
              "cuts", "aborted", "final_time"]
    row = [report.label, report.scheme, report.iterations, report.wasted,
           report.total_iterations, report.cuts, report.aborted,
           report.final_time]
    for c in range(n_comp):
        header += [f"mass_initial_{c}", f"mass_final_{c}", f"conservation_defect_{c}"]
        row += [report.mass_initial[c], report.mass_final[c],
                report.conservation_defect[c]]
    paths.append(write_rows(base + "_summary.csv", header, [row]))

    step_rows = []
    for s in report.steps:
        step_rows.append([
            s.time_start, s.dt, s.depth, s.accepted,
            s.report.iterations, s.report.converged,
            s.report.residual_history[-1] if s.report.residual_history else np.nan,
        ])
    paths.append(write_rows(
        base + "_steps.csv",
        ["time_start", "dt", "depth", "accepted", "iterations", "converged",
         "final_residual"],
        step_rows,
    ))

    mass_rows = [[t, *m] for t, m in report.mass_history]
    paths.append(write_rows(
        base + "_mass.csv",
        ["time"] + [f"mass_{c}" for c in range(n_comp)],
        mass_rows,
    ))

    paths.append(write_state(report.final_state, grid, phase_names,
                             base + "_state.csv"))
    if render:
        paths.append(plot_state(report.final_state, grid, phase_names,
                                base + "_state.png",
                                title=f"{stem}: final saturations"))
    return paths


def write_state(state: State, grid: Grid, phase_names, path: str) -> str:
    rows = []
    for i in range(grid.cell_count):
        rows.append([i, grid.depths[i], state.pressure[i],
                     *state.saturations[i]])
    header = ["cell", "depth", "pressure"] + [f"s_{n}" for n in phase_names]
    return write_rows(path, header, rows)


def plot_state(state: State, grid: Grid, phase_names, path: str,
               title: str = "") -> str:
    """Render saturations: depth profiles for 1-D columns, maps for 2-D."""
    nx, ny, nz = grid.shape
    n_ph = state.saturations.shape[1]
    if nx * ny == 1 or nz == 1:  # 1-D column: saturation vs depth
        fig, ax = plt.subplots(figsize=(4.8, 6.0))
        for ell in range(n_ph):
            ax.plot(state.saturations[:, ell], grid.depths,
                    label=f"s_{phase_names[ell]}")
        ax.invert_yaxis()
        ax.set_xlabel("saturation")
        ax.set_ylabel("depth [m]")
        ax.legend()
    else:
        fig, axes = plt.subplots(1, n_ph, figsize=(4.2 * n_ph, 4.2),
                                 squeeze=False)
        for ell in range(n_ph):
            field = state.saturations[:, ell].reshape(nz, ny, nx)[:, ny // 2, :]
            im = axes[0, ell].imshow(field, origin="upper", vmin=0.0, vmax=1.0,
                                     cmap="viridis", aspect="equal")
            axes[0, ell].set_title(f"s_{phase_names[ell]}")
            fig.colorbar(im, ax=axes[0, ell], shrink=0.8)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


# -- comparison matrices ------------------------------------------------------


def write_matrix_outputs(matrix: ComparisonMatrix, out_dir: str,
                         stem: str = "comparison", render: bool = True) -> list[str]:
    """Write the per-run summary table plus cumulative-iteration curves."""
    paths = []
    rows = matrix.rows()
    header = list(rows[0].keys())
    paths.append(write_rows(
        os.path.join(out_dir, stem + ".csv"),
        header, [[r[k] for k in header] for r in rows],
    ))
    for case in matrix.cases:
        series_rows = []
        for scheme in matrix.schemes:
            for t, total in matrix.cumulative_iterations(case, scheme):
                series_rows.append([case, scheme, t, total])
        paths.append(write_rows(
            os.path.join(out_dir, f"{stem}_{case}_iterations.csv"),
            ["case", "scheme", "time", "cumulative_iterations"],
            series_rows,
        ))
        if render:
            paths.append(plot_cumulative_iterations(
                matrix, case, os.path.join(out_dir, f"{stem}_{case}_iterations.png")))
    return paths


def plot_cumulative_iterations(matrix: ComparisonMatrix, case: str,
                               path: str) -> str:
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for scheme in matrix.schemes:
        series = np.array(matrix.cumulative_iterations(case, scheme))
        label = scheme
        if matrix.runs[(case, scheme)].aborted:
            label += " (aborted)"
        ax.plot(series[:, 0], series[:, 1], label=label)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("cumulative Newton iterations")
    ax.set_title(case)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


# -- one-cell analysis ---------------------------------------------------------


def write_surface_outputs(sample: FieldSample, out_dir: str, stem: str,
                          paths: dict[str, NewtonPath] | None = None,
                          solution: OneCellSolution | None = None,
                          render: bool = True) -> list[str]:
    """Write a sampled surface, its zero loci, and optional solver paths."""
    out = []
    grid_rows = []
    for j, s in enumerate(sample.s_axis):
        for i, p in enumerate(sample.p_axis):
            grid_rows.append([p, s, sample.values[j, i]])
    out.append(write_rows(os.path.join(out_dir, stem + "_surface.csv"),
                          ["pressure", "s_w", sample.kind or "value"],
                          grid_rows))

    locus_rows = []
    for name, pts in sample.loci.items():
        for p, s in np.atleast_2d(pts) if len(pts) else []:
            locus_rows.append([name, p, s])
    out.append(write_rows(os.path.join(out_dir, stem + "_loci.csv"),
                          ["locus", "pressure", "s_w"], locus_rows))

    if paths:
        path_rows = []
        for label, np_path in paths.items():
            for k, (p, s) in enumerate(np_path.points):
                path_rows.append([label, k, p, s])
        out.append(write_rows(os.path.join(out_dir, stem + "_paths.csv"),
                              ["start", "step", "pressure", "s_w"], path_rows))

    if render:
        out.append(plot_surface(sample, os.path.join(out_dir, stem + ".png"),
                                paths=paths, solution=solution))
    return out


def plot_surface(sample: FieldSample, path: str,
                 paths: dict[str, NewtonPath] | None = None,
                 solution: OneCellSolution | None = None) -> str:
    fig, ax = plt.subplots(figsize=(6.4, 5.0))
    pcm = ax.pcolormesh(sample.p_axis, sample.s_axis, sample.values,
                        shading="nearest", cmap="RdBu_r")
    fig.colorbar(pcm, ax=ax, label=sample.kind or "value")
    for name, pts in sample.loci.items():
        color, label = _LOCUS_STYLE.get(name, ("k", name))
        pts = np.atleast_2d(pts)
        if len(pts):
            ax.plot(pts[:, 0], pts[:, 1], ".", ms=2.0, color=color, label=label)
    if paths:
        for label, np_path in paths.items():
            pts = np_path.points
            ax.plot(pts[:, 0], pts[:, 1], "-", lw=1.0, color="k", alpha=0.7)
            ax.plot(pts[0, 0], pts[0, 1], "o", ms=4, color="k")
    if solution is not None:
        ax.plot(solution.pressure, solution.s_w, "*", ms=12, color="gold",
                mec="k", label="solution")
    ax.set_xlabel("cell pressure")
    ax.set_ylabel("cell water saturation")
    ax.set_title(sample.kind)
    ax.legend(loc="upper right", fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
