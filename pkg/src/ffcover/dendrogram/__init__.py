"""Bayesian dendrogram model sampled with spanning-tree Gibbs updates, plus baselines."""

from .baselines import (
    birth_acceptance,
    death_acceptance,
    move_probabilities,
    rj_run,
    spr_acceptance,
    spr_run,
)
from .diagnostics import ChainDiagnostics, acf, ess, tree_summaries
from .ingest import read_data_csv
from .model import (
    GibbsState,
    ModelConfig,
    gibbs_run,
    initial_state,
    log_joint,
    niw_posterior,
    update_assignments,
    update_params,
    update_tree,
    update_weights,
)
from .prune import ReducedDendrogram, marginal_log_likelihood, prune, similarity_matrix

__all__ = [
    "ChainDiagnostics",
    "GibbsState",
    "ModelConfig",
    "ReducedDendrogram",
    "acf",
    "birth_acceptance",
    "death_acceptance",
    "ess",
    "gibbs_run",
    "initial_state",
    "log_joint",
    "marginal_log_likelihood",
    "move_probabilities",
    "niw_posterior",
    "prune",
    "read_data_csv",
    "rj_run",
    "similarity_matrix",
    "spr_acceptance",
    "spr_run",
    "tree_summaries",
    "update_assignments",
    "update_params",
    "update_tree",
    "update_weights",
]
