#!/usr/bin/env python3
"""Render figures from the experiment result CSVs.

Usage: render.py --kind KIND --input CSV --out IMG [--log-x]

Kinds and their expected inputs:
  synthetic       regret_grid.csv      prediction and regret curves over t
  bound-overlay   regret_grid.csv      empirical regret vs analytic bound
  threshold       threshold_curve.csv  logloss and retained fraction vs threshold
  double-descent  double_descent_aggregated.csv  mean curves with 95% CI bands

Inputs are read-only; output is deterministic for identical inputs.
"""

import argparse
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# no timestamps or version strings in the output file
SAVE_KWARGS = {"dpi": 120, "metadata": {"Software": None}}

REQUIRED_COLUMNS = {
    "synthetic": ("t", "M", "prediction", "regret", "bound", "mn_norm"),
    "bound-overlay": ("t", "M", "regret", "bound"),
    "threshold": ("threshold", "cdf", "pnml_logloss", "mn_logloss"),
    "double-descent": (
        "m_over_n",
        "pnml_logloss_mean", "pnml_logloss_ci95",
        "mn_logloss_mean", "mn_logloss_ci95",
        "regret_mean", "regret_ci95",
    ),
}


class RenderError(Exception):
    pass


def read_table(path, kind):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise RenderError(f"{path}: empty file")
        missing = [c for c in REQUIRED_COLUMNS[kind] if c not in reader.fieldnames]
        if missing:
            raise RenderError(f"{path}: missing columns {missing} for kind {kind!r}")
        rows = []
        for row in reader:
            parsed = {}
            for key, value in row.items():
                try:
                    parsed[key] = float(value)
                except (TypeError, ValueError):
                    parsed[key] = value
            rows.append(parsed)
    if not rows:
        raise RenderError(f"{path}: no data rows")
    return rows


def column(rows, name):
    return [row[name] for row in rows]


def groups(rows, key):
    out = {}
    for row in rows:
        out.setdefault(row[key], []).append(row)
    return {k: out[k] for k in sorted(out)}


def render_synthetic(rows, log_x):
    fig, (ax_pred, ax_regret) = plt.subplots(2, 1, figsize=(7, 7), sharex=True)
    for m, block in groups(rows, "M").items():
        block.sort(key=lambda r: r["t"])
        ts = column(block, "t")
        ax_pred.plot(ts, column(block, "prediction"), label=f"M={int(m)}")
        ax_regret.plot(ts, column(block, "regret"), label=f"M={int(m)}")
    ax_pred.set_ylabel("pNML mean prediction")
    ax_regret.set_ylabel("regret")
    ax_regret.set_xlabel("t")
    ax_pred.legend()
    ax_regret.legend()
    fig.suptitle("pNML prediction and regret on the cosine-feature grid")
    return fig


def render_bound_overlay(rows, log_x):
    blocks = groups(rows, "M")
    fig, axes = plt.subplots(1, len(blocks), figsize=(4 * len(blocks), 4), squeeze=False)
    for ax, (m, block) in zip(axes[0], blocks.items()):
        block.sort(key=lambda r: r["t"])
        ts = column(block, "t")
        ax.plot(ts, column(block, "regret"), label="empirical")
        ax.plot(ts, column(block, "bound"), linestyle="--", label="analytic bound")
        ax.set_title(f"M={int(m)}")
        ax.set_xlabel("t")
        ax.legend()
    axes[0][0].set_ylabel("regret")
    fig.suptitle("Empirical regret and analytic upper bound")
    return fig


def render_threshold(rows, log_x):
    rows = sorted(rows, key=lambda r: r["threshold"])
    thr = column(rows, "threshold")
    fig, (ax_loss, ax_cdf) = plt.subplots(1, 2, figsize=(9, 4))
    ax_loss.plot(thr, column(rows, "pnml_logloss"), label="pNML")
    ax_loss.plot(thr, column(rows, "mn_logloss"), linestyle="--", label="minimum norm")
    ax_loss.set_xlabel("regret threshold")
    ax_loss.set_ylabel("mean test logloss (retained samples)")
    ax_loss.legend()
    ax_cdf.plot(thr, column(rows, "cdf"))
    ax_cdf.set_xlabel("regret threshold")
    ax_cdf.set_ylabel("retained fraction")
    ax_cdf.set_ylim(0.0, 1.05)
    if log_x:
        ax_loss.set_xscale("log")
        ax_cdf.set_xscale("log")
    fig.suptitle("Test performance under a regret threshold")
    return fig


def render_double_descent(rows, log_x):
    rows = sorted(rows, key=lambda r: r["m_over_n"])
    ratio = column(rows, "m_over_n")
    fig, (ax_loss, ax_regret) = plt.subplots(1, 2, figsize=(9, 4))

    def band(ax, means, cis, label, style="-"):
        lo = [m - c for m, c in zip(means, cis)]
        hi = [m + c for m, c in zip(means, cis)]
        ax.plot(ratio, means, style, label=label)
        ax.fill_between(ratio, lo, hi, alpha=0.25)

    band(ax_loss, column(rows, "pnml_logloss_mean"), column(rows, "pnml_logloss_ci95"), "pNML")
    band(ax_loss, column(rows, "mn_logloss_mean"), column(rows, "mn_logloss_ci95"),
         "minimum norm", style="--")
    band(ax_regret, column(rows, "regret_mean"), column(rows, "regret_ci95"), "regret")
    for ax, ylabel in ((ax_loss, "mean test logloss"), (ax_regret, "mean regret")):
        ax.axvline(1.0, color="grey", linestyle=":", linewidth=1)
        ax.set_xlabel("M / N")
        ax.set_ylabel(ylabel)
        ax.legend()
        if log_x:
            ax.set_xscale("log")
    fig.suptitle("Double descent across training set size")
    return fig


RENDERERS = {
    "synthetic": render_synthetic,
    "bound-overlay": render_bound_overlay,
    "threshold": render_threshold,
    "double-descent": render_double_descent,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--kind", required=True, choices=sorted(RENDERERS))
    parser.add_argument("--input", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--log-x", action="store_true")
    args = parser.parse_args(argv)

    try:
        rows = read_table(args.input, args.kind)
    except (RenderError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    fig = RENDERERS[args.kind](rows, args.log_x)
    fig.savefig(args.out, **SAVE_KWARGS)
    plt.close(fig)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
