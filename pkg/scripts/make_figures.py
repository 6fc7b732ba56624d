"""Regenerate every figure's CSV data and gnuplot script; render PNGs with
matplotlib when it is installed.

    python3 scripts/make_figures.py [out_dir]
"""
import os
import sys

from ambigg import cli


def render(out_dir, fig_id):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return False
    y, window, _, _ = cli.FIGURES[fig_id]
    curves = cli.figure_curves(fig_id)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, (k, v) in curves.items():
        ax.plot(k, v, label=label, lw=1.6 if label.startswith("min") else 1.0)
    ax.axhline(0.0, color="k", lw=0.6)
    ax.set_xlim(*window)
    ax.set_xlabel("kappa")
    ax.set_ylabel("worst-case payoff to investing at x = kappa")
    ax.set_title(f"{fig_id}: y={y}, eta={cli.FIGURE_ETA}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, f"{fig_id}.png"), dpi=120)
    plt.close(fig)
    return True


def main(out_dir="figures"):
    os.makedirs(out_dir, exist_ok=True)
    for fig_id in cli.FIGURES:
        code = cli.main(["figure", fig_id, "--out", out_dir])
        if code:
            return code
        if render(out_dir, fig_id):
            print(f"{fig_id}.png written")
    return 0


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:]))
