#!/usr/bin/env python3
"""Batch figure rendering for secbeam CSV outputs.

    python plots/render.py --kind beampattern --csv out/beampattern.csv --out fig2.png
    python plots/render.py --kind convergence --csv out/convergence.csv --out fig3.png
    python plots/render.py --kind sweep --csv out/sweep.csv --out fig6.png
    python plots/render.py --kind probability --csv out/lemma1.json --out fig_l1.png
    python plots/render.py --spec figures.json

A spec file is a JSON list of {kind, csv, out, title?, xlabel?, ylabel?}
entries.  Rendering is read-only over the CSVs and reproducible: PNGs carry
no timestamps, so re-running is byte-for-byte idempotent.
"""

import argparse
import csv
import json
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

DPI = 150
KINDS = ("beampattern", "convergence", "sweep", "probability")
_META = {"Software": "secbeam-plots"}


class RenderError(ValueError):
    pass


def read_csv_columns(path, required):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows) < 2:
        raise RenderError(f"{path}: empty CSV")
    header, data = rows[0], rows[1:]
    for col in required:
        if col not in header:
            raise RenderError(f"{path}: missing column {col!r} (have {header})")
    cols = {name: [] for name in header}
    for row in data:
        for name, val in zip(header, row):
            cols[name].append(val)
    return header, cols


def render_beampattern(csv_path, out_path, title=None):
    """Dual-axis angle sweep: private-stream SINRs on the left axis,
    the common stream on the right axis."""
    header, cols = read_csv_columns(csv_path, ["theta_deg", "sinr_common_db"])
    theta = [float(v) for v in cols["theta_deg"]]
    private_cols = [h for h in header if h.startswith("sinr_private_")]
    if not private_cols:
        raise RenderError(f"{csv_path}: no private-stream columns")
    fig, ax_left = plt.subplots(figsize=(7.2, 4.4))
    ax_right = ax_left.twinx()
    for name in private_cols:
        label = name.replace("sinr_private_", "private ").replace("_db", "")
        ax_left.plot(theta, [float(v) for v in cols[name]], lw=1.2, label=label)
    ax_right.plot(theta, [float(v) for v in cols["sinr_common_db"]],
                  color="tab:red", lw=1.4, ls="--", label="common")
    ax_left.set_xlabel("azimuth (deg)")
    ax_left.set_ylabel("private received SINR (dB)")
    ax_right.set_ylabel("common received SINR (dB)")
    lines = ax_left.get_lines() + ax_right.get_lines()
    ax_left.legend(lines, [ln.get_label() for ln in lines], loc="lower left", fontsize=8)
    ax_left.grid(alpha=0.3)
    if title:
        ax_left.set_title(title)
    _save(fig, out_path)
    return fig


def render_convergence(csv_path, out_path, title=None):
    header, cols = read_csv_columns(csv_path, ["algorithm", "iter", "objective"])
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    by_alg = {}
    for alg, it, obj in zip(cols["algorithm"], cols["iter"], cols["objective"]):
        by_alg.setdefault(alg, []).append((int(it), float(obj)))
    for alg, pts in by_alg.items():
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=alg)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective (bits/s/Hz)")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    if title:
        ax.set_title(title)
    _save(fig, out_path)
    return fig


def render_sweep(csv_path, out_path, title=None, xlabel=None):
    header, cols = read_csv_columns(csv_path, ["sweep_var", "value", "algorithm",
                                               "ssr_mean", "ssr_se"])
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    by_alg = {}
    for alg, val, mean, se in zip(cols["algorithm"], cols["value"],
                                  cols["ssr_mean"], cols["ssr_se"]):
        by_alg.setdefault(alg, []).append((float(val), float(mean), float(se)))
    for alg, pts in by_alg.items():
        pts.sort()
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        es = [p[2] for p in pts]
        ax.errorbar(xs, ys, yerr=es, marker="s", ms=4, capsize=2, label=alg)
    ax.set_xlabel(xlabel or cols["sweep_var"][0])
    ax.set_ylabel("average system SSR (bits/s/Hz)")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    if title:
        ax.set_title(title)
    _save(fig, out_path)
    return fig


def render_probability(path, out_path, title=None):
    """Per-stream empirical secrecy probability with the kappa line."""
    with open(path, encoding="utf-8") as fh:
        rep = json.load(fh)
    for key in ("empirical_prob", "binomial_se", "kappa"):
        if key not in rep:
            raise RenderError(f"{path}: missing field {key!r}")
    prob = rep["empirical_prob"]
    se = rep["binomial_se"]
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    xs = list(range(1, len(prob) + 1))
    ax.errorbar(xs, prob, yerr=[3 * s for s in se], fmt="o", capsize=4,
                label="empirical (3-sigma)")
    ax.axhline(rep["kappa"], color="tab:red", ls="--", label=f"kappa = {rep['kappa']}")
    ax.set_xticks(xs)
    ax.set_xlabel("private stream")
    ax.set_ylabel("Pr(worst-Eve SINR <= cap)")
    ax.set_ylim(min(min(prob), rep["kappa"]) - 0.01, 1.005)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    if title:
        ax.set_title(title)
    _save(fig, out_path)
    return fig


def _save(fig, out_path):
    fig.tight_layout()
    fig.savefig(out_path, dpi=DPI, metadata=_META)
    plt.close(fig)


RENDERERS = {
    "beampattern": render_beampattern,
    "convergence": render_convergence,
    "sweep": render_sweep,
    "probability": render_probability,
}


def render(kind, csv_path, out_path, **kwargs):
    if kind not in RENDERERS:
        raise RenderError(f"unknown figure kind {kind!r} (choose from {KINDS})")
    return RENDERERS[kind](csv_path, out_path, **kwargs)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--spec", help="JSON list of figure specs")
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--csv", help="input CSV (or JSON for probability)")
    p.add_argument("--out", help="output PNG path")
    p.add_argument("--title", default=None)
    args = p.parse_args(argv)
    try:
        if args.spec:
            with open(args.spec, encoding="utf-8") as fh:
                specs = json.load(fh)
            for spec in specs:
                kwargs = {k: spec[k] for k in ("title",) if k in spec}
                render(spec["kind"], spec["csv"], spec["out"], **kwargs)
                print(f"rendered {spec['kind']} -> {spec['out']}")
        else:
            if not (args.kind and args.csv and args.out):
                p.error("need --spec or all of --kind/--csv/--out")
            render(args.kind, args.csv, args.out, title=args.title)
            print(f"rendered {args.kind} -> {args.out}")
        return 0
    except (RenderError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
