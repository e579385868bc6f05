"""Static figures rendered next to the CSV output (matplotlib, Agg backend)."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

DPI = 120


def _label(record):
    tau = record.metadata.get("tau")
    if record.method.startswith("dxl"):
        return f"{record.name} (K={record.metadata['K']}, tau={tau:g})"
    return record.method.upper()


def _save(fig, path):
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_efficiency(records, path, title=None):
    """Efficiency against gradient broadcasts, one curve per run."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for r in records:
        ax.plot(r.broadcasts, r.efficiency, label=_label(r), lw=1.4)
    ax.axhline(0.99, color="grey", ls=":", lw=0.8)
    ax.set_xlabel("gradient broadcasts")
    ax.set_ylabel("efficiency")
    ax.set_ylim(0, 1.05)
    ax.set_title(title or records[0].name)
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_comparison(table, path, title="baseline comparison"):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    x = table["broadcasts"]
    for method, values in table.items():
        if method != "broadcasts":
            ax.step(x, values, where="post", label=method.upper().replace("DXL-", "DXL "))
    ax.axhline(0.99, color="grey", ls=":", lw=0.8)
    ax.set_xlabel("gradient broadcasts")
    ax.set_ylabel("efficiency")
    ax.set_ylim(0, 1.05)
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_tracking(record, path):
    """Achieved sum rate against the per-epoch optimum and the uniform profile."""
    t = record.column("time_ms")
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(t, record.column("max_sum_rate_nats"), label="maximum", color="k", lw=1.0)
    ax.plot(t, record.column("sum_rate_nats"), label="DXL", lw=1.4)
    ax.plot(t, record.column("uniform_sum_rate_nats"), label="uniform", ls="--", lw=1.0)
    ax.set_xlabel("time (ms)")
    ax.set_ylabel("sum rate (nats)")
    ax.set_title(record.name)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_residuals(iterations, residuals, path, title):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.semilogy(iterations, residuals, lw=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("fixed-point residual")
    ax.set_title(title)
    return _save(fig, path)


def render(records, out, table=None):
    """Write the figures appropriate for ``records`` into ``out``; return their paths."""
    out = Path(out)
    dxl = [r for r in records if r.method.startswith("dxl")]
    paths = [plot_efficiency(dxl, out / f"{dxl[0].name}-efficiency.png")]
    if table is not None:
        paths.append(plot_comparison(table, out / "comparison.png"))
    for r in dxl:
        if "max_sum_rate_nats" in r.columns:
            paths.append(plot_tracking(r, out / f"{r.name}-tracking.png"))
    return paths
