from ._core import (
    FUNCTIONS,
    PseudoPanelError,
    analyze,
    elasticity,
    run_all,
    simulate,
    true_elasticities,
    wilks_lambda,
    within_total_share,
)

__all__ = [
    "FUNCTIONS",
    "PseudoPanelError",
    "analyze",
    "elasticity",
    "run_all",
    "simulate",
    "true_elasticities",
    "wilks_lambda",
    "within_total_share",
]
