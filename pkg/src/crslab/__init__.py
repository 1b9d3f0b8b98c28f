"""crslab: a contention-resolution-scheme laboratory.

Matroid oracles and concrete families, oblivious OCRS policies with exact and
Monte Carlo selectability analysis, a sample-based matroid prophet pipeline,
adversarial hard instances, and a deterministic experiment harness with CSV,
JSON and figure output.
"""

__version__ = "0.1.0"

from .errors import ConfigError, IndependenceViolation, MatroidContractError
from .matroids import (
    ExplicitMatroid,
    GraphicMatroid,
    LaminarMatroid,
    Matroid,
    TransversalMatroid,
    UniformMatroid,
    matroid_from_config,
    polytope_membership,
)
from .schemes import (
    AcceptSecondScheme,
    BGreedyScheme,
    CountingScheme,
    EvenMixtureScheme,
    GreedyScheme,
    b_greedy_lower_bound,
    counting_selectability_uniform,
    f_n,
    make_order,
    minimize_f_n,
    scheme_from_config,
    uniform_rank_bound,
)
from .evaluation import estimate_selectability, exact_selectability, wilson_interval
from .prophet import (
    compute_tau,
    exact_quantile_thresholds,
    learn_thresholds,
    opt_value,
    run_prophet,
    verify_good_thresholds,
)
from .hard_instances import (
    balancedness_upper_bound,
    build_graphic_instance,
    build_transversal_instance,
)

__all__ = [
    "__version__",
    "ConfigError",
    "IndependenceViolation",
    "MatroidContractError",
    "Matroid",
    "UniformMatroid",
    "LaminarMatroid",
    "GraphicMatroid",
    "TransversalMatroid",
    "ExplicitMatroid",
    "matroid_from_config",
    "polytope_membership",
    "GreedyScheme",
    "AcceptSecondScheme",
    "EvenMixtureScheme",
    "CountingScheme",
    "BGreedyScheme",
    "scheme_from_config",
    "make_order",
    "f_n",
    "minimize_f_n",
    "counting_selectability_uniform",
    "b_greedy_lower_bound",
    "uniform_rank_bound",
    "estimate_selectability",
    "exact_selectability",
    "wilson_interval",
    "compute_tau",
    "opt_value",
    "learn_thresholds",
    "exact_quantile_thresholds",
    "verify_good_thresholds",
    "run_prophet",
    "build_graphic_instance",
    "build_transversal_instance",
    "balancedness_upper_bound",
]
