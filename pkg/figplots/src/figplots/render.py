"""Figure rendering from harness CSV files.

Strictly read-only consumers of the two documented CSV schemas: the
long-format magnitude grids of the single-trial two-domain figure, and the
per-trial metric table of the Monte Carlo experiments.  Medians are taken
across trials at each transmit power.
"""

import csv
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GAIN_BOUND = 4096.0

FIGURE_IDS = ("fig2", "pos-los", "gain-los", "pos-nlos", "gain-nlos",
              "gain-cases35", "gain-cases2468")

_GRID_COLUMNS = ["domain", "row", "col", "magnitude"]
_POS_COLUMNS = ["case", "p_t_dbm", "err_ris_ipebtts", "err_tar_ipebtts",
                "err_ris_spebtts", "err_tar_spebtts"]
_GAIN_COLUMNS = ["case", "p_t_dbm", "gain_proposed", "gain_sweep"]


class SchemaError(ValueError):
    """The input CSV is empty or lacks required columns."""


@dataclass
class FigureSpec:
    figure_id: str
    csv_path: str
    out_path: str

    def validate(self) -> None:
        if self.figure_id not in FIGURE_IDS:
            raise SchemaError(
                f"unknown figure id {self.figure_id!r}; expected one of "
                f"{', '.join(FIGURE_IDS)}")


def _read_csv(path, required) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty CSV, no header row")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise SchemaError(
                f"{path}: missing required columns: {', '.join(missing)}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _to_db(mags: np.ndarray, floor_db: float = 80.0) -> np.ndarray:
    peak = float(np.max(mags))
    if peak <= 0.0:
        raise SchemaError("all-zero magnitude grid")
    clipped = np.maximum(mags, peak * 10.0 ** (-floor_db / 20.0))
    return 20.0 * np.log10(clipped)


def _render_grids(rows, out_path) -> None:
    panels = {}
    for r in rows:
        panels.setdefault(r["domain"], []).append(
            (int(r["row"]), int(r["col"]), float(r["magnitude"])))
    fig, axes = plt.subplots(1, len(panels), figsize=(6 * len(panels), 4.5))
    if len(panels) == 1:
        axes = [axes]
    titles = {"angle_delay": "angle-delay domain",
              "doppler_delay": "Doppler-delay domain"}
    ylabels = {"angle_delay": "RIS sweep index",
               "doppler_delay": "Doppler bin"}
    for ax, (name, entries) in zip(axes, sorted(panels.items())):
        n_row = max(e[0] for e in entries) + 1
        n_col = max(e[1] for e in entries) + 1
        grid = np.zeros((n_row, n_col))
        for i, j, m in entries:
            grid[i, j] = m
        im = ax.imshow(_to_db(grid), aspect="auto", origin="lower",
                       cmap="viridis")
        ax.set_title(titles.get(name, name))
        ax.set_xlabel("delay bin")
        ax.set_ylabel(ylabels.get(name, "bin"))
        fig.colorbar(im, ax=ax, label="magnitude (dB)")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def _medians(rows, value_col, case):
    by_power = {}
    for r in rows:
        if int(r["case"]) != case or r[value_col] in ("", None):
            continue
        by_power.setdefault(float(r["p_t_dbm"]), []).append(
            float(r[value_col]))
    powers = sorted(by_power)
    return powers, [float(np.median(by_power[p])) for p in powers]


def _cases(rows):
    return sorted({int(r["case"]) for r in rows})


def _render_positioning(rows, out_path) -> None:
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    series = [("err_ris_ipebtts", "RIS, cross-domain", "C0", "-"),
              ("err_ris_spebtts", "RIS, separate-domain", "C0", "--"),
              ("err_tar_ipebtts", "targets, cross-domain", "C1", "-"),
              ("err_tar_spebtts", "targets, separate-domain", "C1", "--")]
    for case in _cases(rows):
        suffix = f" (case {case})" if len(_cases(rows)) > 1 else ""
        for col, label, color, style in series:
            powers, med = _medians(rows, col, case)
            if powers:
                ax.semilogy(powers, med, style, color=color, marker="o",
                            label=label + suffix)
    ax.set_xlabel("transmit power (dBm)")
    ax.set_ylabel("median positioning error (m)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def _render_gain(rows, out_path) -> None:
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    cases = _cases(rows)
    for i, case in enumerate(cases):
        suffix = f" (case {case})" if len(cases) > 1 else ""
        color = f"C{i}"
        for col, label, style in (("gain_proposed", "proposed", "-"),
                                  ("gain_sweep", "beam sweep", "--")):
            powers, med = _medians(rows, col, case)
            if powers:
                ax.plot(powers, med, style, color=color, marker="o",
                        label=label + suffix)
    ax.axhline(GAIN_BOUND, color="k", linestyle=":",
               label=f"upper bound {GAIN_BOUND:g}")
    ax.set_xlabel("transmit power (dBm)")
    ax.set_ylabel("median beamforming gain")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def render(spec: FigureSpec) -> str:
    """Render one figure from its CSV; returns the output path."""
    spec.validate()
    if spec.figure_id == "fig2":
        rows = _read_csv(spec.csv_path, _GRID_COLUMNS)
        _render_grids(rows, spec.out_path)
    elif spec.figure_id.startswith("pos"):
        rows = _read_csv(spec.csv_path, _POS_COLUMNS)
        _render_positioning(rows, spec.out_path)
    else:
        rows = _read_csv(spec.csv_path, _GAIN_COLUMNS)
        _render_gain(rows, spec.out_path)
    return str(spec.out_path)
