"""Experiment configs: validation, dispatch, and deterministic report writing.

Each experiment kind consumes a JSON config and emits a summary.json plus one
or more plot-ready CSV files (and rendered figures unless disabled). Reports
embed a hash of the resolved config; everything outside the summary's "meta"
section is byte-identical across reruns with the same config and any worker
count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .distributions import distribution_from_config
from .errors import ConfigError
from .evaluation import estimate_selectability
from .hard_instances import (
    balancedness_upper_bound,
    build_hard_instance,
    conditional_identity_check,
    full_block_experiment,
    stress_scheme_on_hard_instance,
)
from .matroids import LaminarMatroid, matroid_from_config, polytope_membership
from .prophet import (
    active_value_vs_opt,
    bucket_count,
    default_sample_count,
    estimate_prophet_ratio,
    exact_quantile_thresholds,
    induced_marginals,
    learn_thresholds,
    verify_good_thresholds,
)
from .schemes import (
    ORDER_KINDS,
    counting_selectability_uniform,
    make_order,
    minimize_f_n,
    f_n_minimum_closed_form,
    scheme_from_config,
)

EXPERIMENT_KINDS = (
    "selectability",
    "minimize_fn",
    "counting",
    "prophet",
    "thresholds",
    "hard_instance",
)

OUTPUT_DIR_ENV = "CRSLAB_OUTPUT_DIR"

_DEFAULTS = {
    "seed": 20240801,
    "trials": 10_000,
}


def _json_scalar(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_scalar)


def config_hash(config):
    """Hash of the resolved config, excluding output locations."""
    trimmed = {k: v for k, v in config.items() if k != "output_dir"}
    return hashlib.sha256(canonical_json(trimmed).encode()).hexdigest()[:12]


def resolve_config(config, seed=None, trials=None):
    """Fill defaults and apply CLI overrides; returns a new dict."""
    out = dict(config)
    out.setdefault("seed", _DEFAULTS["seed"])
    out.setdefault("trials", _DEFAULTS["trials"])
    if seed is not None:
        out["seed"] = int(seed)
    if trials is not None:
        out["trials"] = int(trials)
    return out


def _distributions(config, n):
    spec = config.get("distributions")
    if spec is None:
        raise ConfigError("missing 'distributions'")
    if isinstance(spec, dict):
        return [distribution_from_config(spec)] * n
    dists = [distribution_from_config(d) for d in spec]
    if len(dists) != n:
        raise ConfigError(f"need {n} distributions, got {len(dists)}")
    return dists


def validate_config(config):
    """Static diagnostics; empty list means the config is runnable.

    Performs no experiment work: parses sub-configs, checks parameter ranges,
    polytope membership where an explicit constraint system exists, and the
    threshold order-statistic indices.
    """
    diags = []
    kind = config.get("kind")
    if kind not in EXPERIMENT_KINDS:
        return [f"unknown experiment kind: {kind!r}"]
    seed = config.get("seed", 0)
    if not isinstance(seed, int):
        diags.append("seed must be an integer")

    def check_trials():
        trials = config.get("trials", _DEFAULTS["trials"])
        if not isinstance(trials, int) or trials < 1:
            diags.append(f"trials must be a positive integer, got {trials!r}")

    def check_matroid():
        try:
            return matroid_from_config(config.get("matroid") or {})
        except (ValueError, KeyError, TypeError) as exc:
            diags.append(f"bad matroid config: {exc}")
            return None

    def check_scheme():
        try:
            return scheme_from_config(config.get("scheme") or {})
        except (ValueError, KeyError, TypeError) as exc:
            diags.append(f"bad scheme config: {exc}")
            return None

    def check_order(n, allow_random=True):
        spec = config.get("order", {"kind": "identity"})
        if not isinstance(spec, dict):
            diags.append("order must be an object with a 'kind'")
            return
        okind = spec.get("kind")
        if okind not in ORDER_KINDS:
            diags.append(f"unknown order kind: {okind!r}")
        elif okind == "target_last":
            target = spec.get("target")
            if not isinstance(target, int) or not 0 <= target < n:
                diags.append("target_last order needs a 'target' element index")
        elif okind == "random" and not allow_random:
            diags.append("prophet runs use a fixed arrival order")

    def check_epsilon():
        eps = config.get("epsilon")
        if not isinstance(eps, (int, float)) or not 0 < eps < 1:
            diags.append(f"epsilon out of (0,1): {eps!r}")
            return None
        try:
            bucket_count(eps)
        except ValueError as exc:
            diags.append(str(exc))
            return None
        return float(eps)

    if kind == "selectability":
        check_trials()
        m = check_matroid()
        check_scheme()
        if m is not None:
            check_order(m.n)
            x = config.get("x")
            if not isinstance(x, list) or len(x) != m.n:
                diags.append(f"x must list {m.n} marginals")
            elif any(not isinstance(v, (int, float)) or not 0 <= v <= 1 for v in x):
                diags.append("x entries must lie in [0, 1]")
            elif isinstance(m, LaminarMatroid):
                for s, cap in zip(m.sets, m.capacities):
                    total = sum(x[e] for e in s)
                    if total > cap + 1e-9:
                        diags.append(
                            f"x violates the laminar constraint on {sorted(s)}: "
                            f"sum {total} > capacity {cap}"
                        )
            else:
                try:
                    if not polytope_membership(m, x):
                        diags.append("x lies outside the matroid polytope")
                except ValueError:
                    pass  # unsupported size: checked at run time via warnings
    elif kind == "minimize_fn":
        n = config.get("n")
        if not isinstance(n, int) or not 1 <= n <= 6:
            diags.append(f"minimize_fn needs integer n in [1, 6], got {n!r}")
    elif kind == "counting":
        n = config.get("n")
        if not isinstance(n, int) or n < 1:
            diags.append(f"counting needs a positive integer n, got {n!r}")
        steps = config.get("grid_steps", 21)
        depth = config.get("depth", 3)
        if not isinstance(steps, int) or steps < 2:
            diags.append("grid_steps must be an integer >= 2")
        if not isinstance(depth, int) or not 1 <= depth <= 4:
            diags.append("depth must be an integer in [1, 4]")
        elif isinstance(steps, int) and steps**depth > 2_000_000:
            diags.append("grid too large: steps**depth exceeds 2e6")
    elif kind in ("prophet", "thresholds"):
        check_trials()
        m = check_matroid()
        eps = check_epsilon()
        dists = None
        if m is not None:
            try:
                dists = _distributions(config, m.n)
            except (ConfigError, ValueError, KeyError, TypeError) as exc:
                diags.append(f"bad distributions config: {exc}")
            check_order(m.n, allow_random=(kind != "prophet"))
        if kind == "prophet":
            check_scheme()
        samples = config.get("samples")
        if samples is not None and (not isinstance(samples, int) or samples < 1):
            diags.append("samples must be a positive integer")
        # order-statistic indices ceil(eps(1+eps)^k N) always fit once N >= 1
        if config.get("exact_quantiles") and m is not None and dists is not None:
            if m.family != "uniform" or not 1 <= m.r < m.n:
                diags.append("exact_quantiles needs a uniform matroid with 1 <= r < n")
            elif any(not d.continuous for d in dists):
                diags.append("exact_quantiles needs continuous value distributions")
    elif kind == "hard_instance":
        check_trials()
        family = config.get("family")
        if family not in ("graphic", "transversal"):
            diags.append(f"hard_instance family must be graphic|transversal, got {family!r}")
        for key in ("N", "M"):
            v = config.get(key)
            if not isinstance(v, int) or v < 1:
                diags.append(f"{key} must be a positive integer, got {v!r}")
        s = config.get("samples", 0)
        if not isinstance(s, int) or s < 0:
            diags.append("samples must be a nonnegative integer")
    return diags


# ---------------------------------------------------------------------------
# per-kind runners: return (results dict, {csv name: rows iterable})
# ---------------------------------------------------------------------------


def _run_selectability(config, workers):
    matroid = matroid_from_config(config["matroid"])
    scheme = scheme_from_config(config["scheme"])
    order = config.get("order", {"kind": "identity"})
    report = estimate_selectability(
        scheme,
        matroid,
        config["x"],
        order=order["kind"],
        trials=config["trials"],
        seed=config["seed"],
        workers=workers,
        target=order.get("target"),
    )
    results = report.summary()
    results["scheme"] = scheme.to_config()
    results["matroid"] = matroid.to_config()
    return results, {"elements.csv": report.csv_rows()}


def _run_minimize_fn(config, workers):
    n = config["n"]
    argmin, value = minimize_f_n(n)
    closed = f_n_minimum_closed_form(n)
    rows = [("n", "closed_form_min")]
    rows += [(k, repr(f_n_minimum_closed_form(k))) for k in range(1, max(n, 8) + 1)]
    results = {
        "n": n,
        "min": value,
        "argmin": list(argmin),
        "closed_form": closed,
        "abs_error": abs(value - closed),
    }
    return results, {"minima.csv": rows}


def counting_grid(n, steps, depth):
    """Vectorized last-element selectability of every depth-step counting
    strategy on the uniform instance; returns (axis values, value tensor)."""
    grid = np.linspace(0.0, 1.0, steps)
    q = [(1.0 - 1.0 / n) ** (n - 1)]
    for k in range(1, depth):
        q.append(q[-1] * (n - k) / (k * (n - 1.0)))
    shape = [steps] * depth
    total = np.zeros(shape)
    survive = np.ones(shape)
    for k in range(depth):
        axis_view = [1] * depth
        axis_view[k] = steps
        pk = grid.reshape(axis_view)
        total = total + q[k] * survive * pk
        survive = survive * (1.0 - pk)
    return grid, total


def _run_counting(config, workers):
    n = config["n"]
    steps = config.get("grid_steps", 21)
    depth = config.get("depth", 3)
    grid, total = counting_grid(n, steps, depth)
    best_flat = int(np.argmax(total))
    best_idx = np.unravel_index(best_flat, total.shape)
    argmax = [float(grid[i]) for i in best_idx]
    mixture = counting_selectability_uniform([0.5, 1.0], n)
    rows = [tuple(f"p{k+1}" for k in range(depth)) + ("value",)]
    for flat in range(total.size):
        idx = np.unravel_index(flat, total.shape)
        rows.append(tuple(repr(float(grid[i])) for i in idx) + (repr(float(total[idx])),))
    results = {
        "n": n,
        "grid_steps": steps,
        "depth": depth,
        "max_value": float(total[best_idx]),
        "argmax": argmax,
        "reference_1_over_e": 1.0 / math.e,
        "mixture_value": mixture,
    }
    return results, {"grid.csv": rows}


def _build_table(config, matroid, dists):
    eps = float(config["epsilon"])
    if config.get("exact_quantiles"):
        return exact_quantile_thresholds(matroid, dists[0], eps), 0
    n_samples = config.get("samples")
    if n_samples is None:
        n_samples = default_sample_count(
            matroid.n, eps, c=float(config.get("sample_rate_constant", 1.0))
        )
    table = learn_thresholds(matroid, dists, eps, n_samples, config["seed"])
    return table, n_samples


def _run_thresholds(config, workers):
    matroid = matroid_from_config(config["matroid"])
    dists = _distributions(config, matroid.n)
    table, n_samples = _build_table(config, matroid, dists)
    goodness = verify_good_thresholds(
        table, matroid, dists, trials=config["trials"], seed=config["seed"]
    )
    marginals = induced_marginals(
        table, matroid, dists,
        trials=config.get("marginal_trials", min(config["trials"], 4000)),
        seed=config["seed"],
    )
    results = {
        "sample_count": n_samples,
        "epsilon": config["epsilon"],
        "buckets": table.buckets,
        "goodness": goodness.summary(),
        "marginals": marginals.summary(),
    }
    return results, {"buckets.csv": goodness.csv_rows(), "marginals.csv": marginals.csv_rows()}


def _run_prophet(config, workers):
    matroid = matroid_from_config(config["matroid"])
    dists = _distributions(config, matroid.n)
    scheme = scheme_from_config(config["scheme"])
    order_spec = config.get("order", {"kind": "identity"})
    order = make_order(order_spec["kind"], matroid.n, target=order_spec.get("target"))
    table, n_samples = _build_table(config, matroid, dists)
    goodness = verify_good_thresholds(
        table, matroid, dists,
        trials=config.get("verify_trials", min(config["trials"], 4000)),
        seed=config["seed"],
    )
    marginals = induced_marginals(
        table, matroid, dists,
        trials=config.get("marginal_trials", min(config["trials"], 4000)),
        seed=config["seed"],
    )
    ratio = estimate_prophet_ratio(
        matroid, dists, table, scheme,
        trials=config["trials"], seed=config["seed"],
        order=np.asarray(order.permutation),
    )
    active_value = active_value_vs_opt(
        table, matroid, dists,
        trials=config.get("active_value_trials", min(config["trials"], 5000)),
        seed=config["seed"],
    )
    warning = scheme.compatibility_warning(matroid)
    results = {
        "sample_count": n_samples,
        "epsilon": config["epsilon"],
        "scheme": scheme.to_config(),
        "ratio": ratio.summary(),
        "active_value": active_value.summary(),
        "goodness": goodness.summary(),
        "marginals": marginals.summary(),
        "warnings": [warning] if warning else [],
    }
    return results, {"buckets.csv": goodness.csv_rows(), "marginals.csv": marginals.csv_rows()}


def _run_hard_instance(config, workers):
    inst = build_hard_instance(config["family"], config["N"], config["M"])
    stats = full_block_experiment(inst, trials=config["trials"], seed=config["seed"])
    bound = balancedness_upper_bound(config["N"], config["M"], config.get("samples", 0))
    results = {
        "family": config["family"],
        "N": config["N"],
        "M": config["M"],
        "bound": bound,
        "bound_samples": config.get("samples", 0),
        "full_blocks": stats.summary(),
        "certificates_ok": True,  # verified during construction
    }
    if inst.n <= 12:
        results["conditional_identity"] = conditional_identity_check(inst, 0).summary()
    if "stress_scheme" in config:
        scheme = scheme_from_config(config["stress_scheme"])
        stress = stress_scheme_on_hard_instance(
            scheme, inst,
            trials=config.get("stress_trials", 1000),
            seed=config["seed"],
            workers=workers,
        )
        results["stress"] = stress.summary()
    pmf = {}
    p_full = float(config["M"]) ** (-config["M"])
    for size, _count in stats.histogram:
        pmf[size] = math.comb(config["N"], size) * p_full**size * (1 - p_full) ** (
            config["N"] - size
        )
    rows = [("full_blocks", "count", "binomial_pmf")]
    rows += [(size, count, repr(pmf[size])) for size, count in stats.histogram]
    return results, {"histogram.csv": rows}


_RUNNERS = {
    "selectability": _run_selectability,
    "minimize_fn": _run_minimize_fn,
    "counting": _run_counting,
    "thresholds": _run_thresholds,
    "prophet": _run_prophet,
    "hard_instance": _run_hard_instance,
}


@dataclass(frozen=True)
class ExperimentResult:
    summary: dict
    summary_path: Path
    csv_paths: tuple
    figure_paths: tuple


def run_experiment(config, output_dir, workers=1, figures=True):
    """Validate, run, and write reports for one experiment config.

    Raises ConfigError when validation fails; propagates contract violations
    (IndependenceViolation, MatroidContractError) from the harness.
    """
    config = resolve_config(config)
    diags = validate_config(config)
    if diags:
        raise ConfigError("; ".join(diags))
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    results, csv_payloads = _RUNNERS[config["kind"]](config, workers)
    wall = time.perf_counter() - started

    csv_paths = []
    for name, rows in csv_payloads.items():
        path = out / name
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
        csv_paths.append(path)

    summary = {
        "experiment": config["kind"],
        "config_hash": config_hash(config),
        "seed": config["seed"],
        "config": {k: v for k, v in config.items() if k != "output_dir"},
        "results": results,
        "meta": {
            "generated_at": datetime.now(timezone.utc).isoformat(),
            "wall_time_s": wall,
            "crslab_version": __version__,
        },
    }
    summary_path = out / "summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2, default=_json_scalar)
        fh.write("\n")

    figure_paths = ()
    if figures:
        from . import figures as figmod

        figure_paths = tuple(figmod.render(config["kind"], summary, csv_paths, out))
    return ExperimentResult(
        summary=summary,
        summary_path=summary_path,
        csv_paths=tuple(csv_paths),
        figure_paths=figure_paths,
    )
