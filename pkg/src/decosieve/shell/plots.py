"""Deterministic SVG diagnostics rendered from the run's own CSV output.

Plots are regeneratable artifacts: they read the CSV the run produced (not
live objects), and the SVG bytes are reproducible across reruns — fixed
hash salt, no embedded creation date, fixed figure geometry.
"""

import csv

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "decosieve"

from matplotlib import pyplot as plt  # noqa: E402

PLOT_KINDS = ("entropy_curves", "offdiag_decay", "coefficient_traces")


def _read_rows(csv_path):
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _save(fig, out_path):
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_plot(kind, csv_path, out_path):
    """Render ``kind`` from ``csv_path`` into the SVG ``out_path``."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"plot kind must be one of {PLOT_KINDS}, got {kind!r}")
    rows = _read_rows(csv_path)
    if not rows:
        raise ValueError(f"{csv_path}: no data rows")
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=100)

    if kind == "entropy_curves":
        cp_cols = sorted(
            (c for c in rows[0] if c.startswith("entropy_cp")),
            key=lambda c: int(c.rsplit("cp", 1)[1]),
        )
        if not cp_cols:
            raise ValueError(f"{csv_path}: no entropy_cp* columns")
        shown = 0
        for row in rows:
            if row.get("excluded"):
                continue
            curve = [float(row[c]) for c in cp_cols]
            ax.plot(range(len(curve)), curve, marker="o", label=row["label"])
            shown += 1
            if shown >= 8:
                break
        ax.set_xlabel("checkpoint")
        ax.set_ylabel("entropy")
        ax.legend(fontsize=7)

    elif kind == "offdiag_decay":
        re_cols = [c for c in rows[0] if c.startswith("re_rho_")]
        if not re_cols:
            raise ValueError(f"{csv_path}: no re_rho_* columns")
        t = [float(r["t"]) for r in rows]
        for rc in re_cols:
            ic = "im" + rc[2:]
            mag = [abs(complex(float(r[rc]), float(r[ic]))) for r in rows]
            pts = [(ti, mi) for ti, mi in zip(t, mag) if mi > 0]
            if pts:
                ax.plot([p[0] for p in pts], [p[1] for p in pts],
                        label=rc[3:].replace("_", ""))
        ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel("|rho_nm|")
        ax.legend(fontsize=7)

    else:  # coefficient_traces
        t = [float(r["t"]) for r in rows]
        for col in ("omega_ren_sq", "gamma", "D", "f"):
            ax.plot(t, [float(r[col]) for r in rows], label=col)
        ax.set_xlabel("t")
        ax.set_ylabel("coefficient")
        ax.legend(fontsize=8)

    fig.tight_layout()
    _save(fig, out_path)
