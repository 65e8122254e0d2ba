"""Monotone boosted-tree additive models with purified pairwise interactions."""

from .anova import (InteractionTerm, MainEffectTerm, MonotoneReport, TermStore,
                    check_monotone_full, export_terms, orthogonality_audit,
                    parse_ensemble, purify, term_importance)
from .booster import (BoostConfig, ConstraintSpec, StructureError, TreeEnsemble,
                      TreeNode, allowed_split_features,
                      audit_interaction_compliance, fit_boosted, grow_tree,
                      load_model, loss_grad_hess, loss_value, predict_ensemble,
                      save_model)
from .data import (BinnedDataset, Dataset, SimConfig, bin_features,
                   first_order_signal, generate_first_order,
                   generate_second_order, read_dataset_csv,
                   second_order_signal, split_dataset, write_dataset_csv)
from .pipeline import (FittedModel, PipelineConfig, PipelineError,
                       UndefinedMetricError, default_hyper_grid,
                       evaluate_metrics, roc_auc, run_pipeline)
from .screening import PairScore, fast_filter, fit_initial_gam, residuals

__version__ = "0.1.0"

__all__ = [
    "BinnedDataset", "BoostConfig", "ConstraintSpec", "Dataset", "FittedModel",
    "InteractionTerm", "MainEffectTerm", "MonotoneReport", "PairScore",
    "PipelineConfig", "PipelineError", "SimConfig", "StructureError",
    "TermStore", "TreeEnsemble", "TreeNode", "UndefinedMetricError",
    "allowed_split_features", "audit_interaction_compliance", "bin_features",
    "check_monotone_full", "default_hyper_grid", "evaluate_metrics",
    "export_terms", "fast_filter", "first_order_signal", "fit_boosted",
    "fit_initial_gam", "generate_first_order", "generate_second_order",
    "grow_tree", "load_model", "loss_grad_hess", "loss_value",
    "orthogonality_audit", "parse_ensemble", "predict_ensemble", "purify",
    "read_dataset_csv", "residuals", "roc_auc", "run_pipeline", "save_model",
    "second_order_signal", "split_dataset", "term_importance",
    "write_dataset_csv",
]
