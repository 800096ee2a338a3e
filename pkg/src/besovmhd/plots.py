"""Static SVG line charts of norm trajectories and inequality sides."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

params = {
    "axes.labelsize": 9,
    "font.size": 8,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "figure.figsize": (5.0, 3.4),
    "svg.hashsalt": "besovmhd",
    "svg.fonttype": "none",
}

NORM_PANELS = (
    ("energy", ("L2_u", "L2_B", "E")),
    ("besov", ("u_Bn2m1", "u_Bn2", "B_Bn2", "grad_u_Bn2")),
    ("bootstrap", ("X", "Y", "Z")),
    ("time_derivative", ("dudt_Bn2m1", "nu_lap_u_Bn2m1", "dBdt_Bn2m1")),
)


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _logscale_ok(cols) -> bool:
    return all(np.all(np.asarray(c) > 0) for c in cols)


def plot_series(series: dict[str, np.ndarray], out_dir: str | Path, prefix: str = "norms") -> list[Path]:
    """One chart per panel of columns present in the series."""
    out_dir = Path(out_dir)
    written = []
    t = np.asarray(series["t"])
    with plt.rc_context(params):
        for name, keys in NORM_PANELS:
            present = [k for k in keys if k in series]
            if not present:
                continue
            fig, ax = plt.subplots()
            for k in present:
                ax.plot(t, series[k], label=k)
            if _logscale_ok([series[k] for k in present]):
                ax.set_yscale("log")
            ax.set_xlabel("t")
            ax.legend(frameon=False)
            fig.tight_layout()
            written.append(_save(fig, out_dir / f"{prefix}_{name}.svg"))
    return written


def plot_check(report, out_dir: str | Path) -> Path:
    """LHS and RHS of one inequality check against time."""
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        ax.plot(report.times, report.lhs, label="lhs")
        ax.plot(report.times, report.rhs, "--", label="rhs")
        finite = np.isfinite(report.rhs)
        if _logscale_ok([report.lhs, report.rhs[finite]]) and finite.any():
            ax.set_yscale("log")
        if report.violations:
            tv = [v[0] for v in report.violations]
            lv = [v[1] for v in report.violations]
            ax.plot(tv, lv, "x", color="C3", label="violation")
        ax.set_title(f"{report.name}  worst ratio {report.worst_ratio:.3g}")
        ax.set_xlabel("t")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, Path(out_dir) / f"check_{report.name}.svg")


def plot_split(split: dict[str, np.ndarray], out_dir: str | Path) -> Path:
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        for piece in ("h", "v", "w"):
            ax.plot(split["t"], split[f"{piece}_Hhalf"], label=f"{piece} H^1/2")
        ax.set_xlabel("t")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, Path(out_dir) / "split_pieces.svg")
