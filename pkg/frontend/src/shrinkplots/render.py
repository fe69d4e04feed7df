"""Render figures from shrinkreg's delimited outputs.

Two kinds are supported, matching the two public CSV schemas exactly:

- risk-curves:    `p,estimator,mean_loss,std_error,reps,failures`
                  one line per estimator over p, with a +-2 SE band
- shrink-factors: `player_id,estimator,factor,variance`
                  factor against sampling variance, one series per estimator

Rendering is read-only and deterministic given the input; no statistics are
computed here beyond the plotted bands.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from collections import OrderedDict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

RISK_HEADER = ["p", "estimator", "mean_loss", "std_error", "reps", "failures"]
FACTORS_HEADER = ["player_id", "estimator", "factor", "variance"]

KINDS = ("risk-curves", "shrink-factors")


class SchemaError(ValueError):
    """Input file does not match the declared CSV schema."""


def _read_rows(path, expected_header):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if header != expected_header:
            raise SchemaError(
                f"{path}: header {','.join(header)!r} does not match "
                f"expected {','.join(expected_header)!r}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(expected_header):
                raise SchemaError(f"{path}: line {lineno}: wrong field count")
            rows.append(row)
    return rows


def _group_by_estimator(rows, key_idx, fields):
    series: "OrderedDict[str, list]" = OrderedDict()
    for row in rows:
        est = row[key_idx]
        try:
            values = [float(row[i]) for i in fields]
        except ValueError as exc:
            raise SchemaError(f"non-numeric field in row {row!r}") from exc
        series.setdefault(est, []).append(values)
    return series


def render_risk_curves(path, title=None):
    """Figure with one mean-loss line per estimator and a +-2 SE band."""
    rows = _read_rows(path, RISK_HEADER)
    series = _group_by_estimator(rows, 1, (0, 2, 3))
    if not series:
        raise SchemaError(f"{path}: no estimator rows to plot")
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for est, values in series.items():
        values.sort(key=lambda v: v[0])
        ps = [v[0] for v in values if math.isfinite(v[1])]
        means = [v[1] for v in values if math.isfinite(v[1])]
        ses = [v[2] for v in values if math.isfinite(v[1])]
        if not ps:
            continue
        (line,) = ax.plot(ps, means, marker="o", markersize=3, label=est)
        lo = [m - 2 * s for m, s in zip(means, ses)]
        hi = [m + 2 * s for m, s in zip(means, ses)]
        ax.fill_between(ps, lo, hi, alpha=0.15, color=line.get_color())
    ax.set_xlabel("number of units p")
    ax.set_ylabel("average loss")
    ax.set_title(title or "Monte Carlo risk by estimator")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return fig


def render_shrink_factors(path, title=None):
    """Scatter of the per-unit shrinkage factor against its variance."""
    rows = _read_rows(path, FACTORS_HEADER)
    series = _group_by_estimator(rows, 1, (2, 3))
    if not series:
        raise SchemaError(f"{path}: no estimator rows to plot")
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    markers = ["o", "s", "^", "v", "D", "x", "+", "*", "<", ">", "p", "h"]
    for i, (est, values) in enumerate(series.items()):
        variances = [v[1] for v in values]
        factors = [v[0] for v in values]
        ax.scatter(
            variances, factors, s=12, alpha=0.6,
            marker=markers[i % len(markers)], label=est,
        )
    ax.set_xlabel("sampling variance")
    ax.set_ylabel("weight kept on the observation")
    ax.set_title(title or "Shrinkage factors")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return fig


def render(kind, in_path, out_path, title=None):
    """Validate, draw, and write one figure; returns the matplotlib figure."""
    if kind not in KINDS:
        raise SchemaError(f"unknown kind {kind!r}; valid: {', '.join(KINDS)}")
    if kind == "risk-curves":
        fig = render_risk_curves(in_path, title)
    else:
        fig = render_shrink_factors(in_path, title)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return fig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="shrinkreg-render",
        description="Render shrinkreg CSV outputs as figures",
    )
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="in_path", required=True)
    parser.add_argument("--out", dest="out_path", required=True)
    parser.add_argument("--title", default=None)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        render(args.kind, args.in_path, args.out_path, args.title)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
