"""Figure rendering for experiment reports.

Each experiment's report path renders PNG figures next to the CSV output;
figures re-plot the already-written delimited data, so disabling them never
changes the reports.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _selectability(summary, csv_paths, out):
    header, rows = _read_csv(_find(csv_paths, "elements.csv"))
    elems, estimates, lo, hi = [], [], [], []
    for row in rows:
        if row[3] == "insufficient data":
            continue
        elems.append(int(row[0]))
        estimates.append(float(row[3]))
        lo.append(float(row[4]))
        hi.append(float(row[5]))
    fig, ax = plt.subplots(figsize=(7, 4))
    if elems:
        err = [
            [e - l for e, l in zip(estimates, lo)],
            [h - e for e, h in zip(estimates, hi)],
        ]
        ax.errorbar(elems, estimates, yerr=err, fmt="o", ms=3, lw=1, capsize=2)
    ax.axhline(1 / math.e, color="tab:red", ls="--", lw=1, label="1/e")
    ax.set_xlabel("element")
    ax.set_ylabel("P(accepted | active)")
    ax.set_title("per-element selectability (Wilson 95% CI)")
    ax.legend(loc="best")
    return [_save(fig, out / "selectability.png")]


def _minimize_fn(summary, csv_paths, out):
    _, rows = _read_csv(_find(csv_paths, "minima.csv"))
    ks = [int(r[0]) for r in rows]
    closed = [float(r[1]) for r in rows]
    results = summary["results"]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, closed, "o-", ms=4, label="closed form")
    ax.plot([results["n"]], [results["min"]], "x", ms=10, color="tab:red", label="optimizer")
    ax.axhline(2 / math.e, color="gray", ls=":", lw=1, label="2/e limit")
    ax.set_xlabel("n")
    ax.set_ylabel("min over the simplex")
    ax.set_title("worst-case at-most-one-mark probability")
    ax.legend(loc="best")
    return [_save(fig, out / "minima.png")]


def _counting(summary, csv_paths, out):
    header, rows = _read_csv(_find(csv_paths, "grid.csv"))
    depth = len(header) - 1
    best = {}
    for row in rows:
        p1, p2 = float(row[0]), float(row[1]) if depth >= 2 else 0.0
        v = float(row[-1])
        key = (p1, p2)
        if key not in best or v > best[key]:
            best[key] = v
    p1s = sorted({k[0] for k in best})
    p2s = sorted({k[1] for k in best})
    grid = [[best[(a, b)] for a in p1s] for b in p2s]
    fig, ax = plt.subplots(figsize=(6, 5))
    pad = 0.5 / max(len(p2s) - 1, 1)  # depth-1 grids collapse to one row
    im = ax.imshow(
        grid,
        origin="lower",
        extent=[min(p1s), max(p1s), min(p2s) - pad, max(p2s) + pad],
        aspect="auto",
        cmap="viridis",
    )
    fig.colorbar(im, ax=ax, label="selectability of the last element")
    ax.set_xlabel("p1")
    ax.set_ylabel("p2")
    ax.set_title(
        f"counting strategies, max over later steps (cap 1/e ≈ {1/math.e:.4f})"
    )
    return [_save(fig, out / "counting_grid.png")]


def _threshold_buckets(summary, csv_paths, out):
    header, rows = _read_csv(_find(csv_paths, "buckets.csv"))
    eps = summary["results"]["epsilon"]
    xs = list(range(len(rows)))
    targets = [float(r[2]) for r in rows]
    estimates = [float(r[3]) for r in rows]
    ok = [bool(int(r[6])) for r in rows]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.fill_between(
        xs,
        targets,
        [t + 2 * eps * eps for t in targets],
        alpha=0.3,
        label="target band [p_k, p_k + 2eps^2]",
    )
    colors = ["tab:blue" if o else "tab:red" for o in ok]
    ax.scatter(xs, estimates, s=12, c=colors, label="estimated Pr[T_k > tau]")
    ax.set_xlabel("(element, bucket) pairs")
    ax.set_ylabel("exceedance probability")
    ax.set_title("threshold goodness")
    ax.legend(loc="best")
    return [_save(fig, out / "threshold_goodness.png")]


def _marginals_figure(summary, csv_paths, out):
    header, rows = _read_csv(_find(csv_paths, "marginals.csv"))
    elems = [int(r[0]) for r in rows]
    x_hat = [float(r[1]) for r in rows]
    se = [float(r[2]) for r in rows]
    opt_hat = [float(r[3]) for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.errorbar(elems, x_hat, yerr=[1.96 * s for s in se], fmt="o", ms=4, label="P(active)")
    ax.plot(elems, opt_hat, "s", ms=4, color="tab:orange", label="P(in optimum)")
    ax.set_xlabel("element")
    ax.set_ylabel("probability")
    ax.set_title("induced activation marginals vs optimum membership")
    ax.legend(loc="best")
    return [_save(fig, out / "marginals.png")]


def _prophet(summary, csv_paths, out):
    paths = _threshold_buckets(summary, csv_paths, out)
    paths += _marginals_figure(summary, csv_paths, out)
    ratio = summary["results"]["ratio"]
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.bar([0], [ratio["ratio"]], width=0.5)
    ax.errorbar(
        [0],
        [ratio["ratio"]],
        yerr=[[ratio["ratio"] - ratio["ci_lo"]], [ratio["ci_hi"] - ratio["ratio"]]],
        fmt="none",
        ecolor="black",
        capsize=4,
    )
    ax.set_xticks([0])
    ax.set_xticklabels(["ALG / OPT"])
    ax.set_ylabel("competitive ratio")
    ax.set_title(f"ratio = {ratio['ratio']:.4f} (bootstrap 95% CI)")
    paths.append(_save(fig, out / "ratio.png"))
    return paths


def _hard_instance(summary, csv_paths, out):
    header, rows = _read_csv(_find(csv_paths, "histogram.csv"))
    sizes = [int(r[0]) for r in rows]
    counts = [int(r[1]) for r in rows]
    pmf = [float(r[2]) for r in rows]
    total = sum(counts)
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.bar(sizes, [c / total for c in counts], width=0.8, alpha=0.6, label="empirical")
    ax.plot(sizes, pmf, "o-", color="tab:red", ms=4, label="binomial(N, M^-M)")
    ax.set_xlabel("fully active blocks")
    ax.set_ylabel("probability")
    bound = summary["results"]["bound"]
    ax.set_title(f"hidden-block counts; balancedness cap {bound:.5f}")
    ax.legend(loc="best")
    return [_save(fig, out / "full_blocks.png")]


def _find(csv_paths, name):
    for p in csv_paths:
        if Path(p).name == name:
            return p
    raise FileNotFoundError(name)


_RENDERERS = {
    "selectability": _selectability,
    "minimize_fn": _minimize_fn,
    "counting": _counting,
    "thresholds": lambda s, c, o: _threshold_buckets(s, c, o) + _marginals_figure(s, c, o),
    "prophet": _prophet,
    "hard_instance": _hard_instance,
}


def render(kind, summary, csv_paths, out_dir):
    """Render the figures for one experiment; returns the written paths."""
    out = Path(out_dir)
    return _RENDERERS[kind](summary, csv_paths, out)
