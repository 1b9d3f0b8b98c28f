"""Every experiment kind renders its figures from the written CSV data."""

import pytest

from crslab.experiments import run_experiment

CONFIGS = {
    "selectability": {
        "kind": "selectability",
        "matroid": {"family": "uniform", "n": 4, "r": 1},
        "x": [0.2] * 4,
        "scheme": {"kind": "even_mixture"},
        "trials": 400,
        "seed": 1,
    },
    "minimize_fn": {"kind": "minimize_fn", "n": 2},
    "counting": {"kind": "counting", "n": 30, "grid_steps": 5, "depth": 3},
    "thresholds": {
        "kind": "thresholds",
        "matroid": {"family": "uniform", "n": 3, "r": 1},
        "distributions": {"kind": "uniform"},
        "epsilon": 0.25,
        "samples": 200,
        "trials": 300,
        "seed": 1,
    },
    "prophet": {
        "kind": "prophet",
        "matroid": {"family": "uniform", "n": 3, "r": 1},
        "distributions": {"kind": "uniform"},
        "epsilon": 0.25,
        "samples": 200,
        "scheme": {"kind": "even_mixture"},
        "trials": 500,
        "seed": 1,
    },
    "hard_instance": {
        "kind": "hard_instance",
        "family": "graphic",
        "N": 4,
        "M": 2,
        "trials": 300,
        "seed": 1,
    },
}


@pytest.mark.parametrize("kind", sorted(CONFIGS))
def test_figures_render(kind, tmp_path):
    result = run_experiment(CONFIGS[kind], tmp_path, figures=True)
    assert result.figure_paths
    for path in result.figure_paths:
        assert path.suffix == ".png"
        assert path.stat().st_size > 1000
