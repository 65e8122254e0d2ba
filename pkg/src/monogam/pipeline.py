"""End-to-end orchestration: screen pairs, tune, fit, decompose, evaluate."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .anova import TermStore, parse_ensemble, purify, term_importance
from .booster import BoostConfig, ConstraintSpec, TreeEnsemble, fit_boosted, loss_value
from .data import Dataset, bin_features
from .screening import fast_filter, fit_initial_gam, residuals


class PipelineError(RuntimeError):
    """A pipeline stage failed; the message names the stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


class UndefinedMetricError(ValueError):
    """Requested metric is undefined for the given response."""


def default_hyper_grid() -> dict:
    """The documented default search grid (override via PipelineConfig)."""
    return {
        "n_trees": [2000],
        "max_depth": [2],
        "learning_rate": [0.03, 0.1],
        "reg_lambda": [0.0, 1.0],
        "min_child_hessian": [1.0, 10.0],
    }


_GRID_KEYS = ("n_trees", "max_depth", "learning_rate", "reg_lambda",
              "min_child_hessian")


@dataclass(frozen=True)
class PipelineConfig:
    """Interaction count, tuning grid, constraints, and bookkeeping."""

    k: int
    monotone: tuple
    hyper_grid: dict = field(default_factory=default_hyper_grid)
    fractions: tuple = (0.5, 0.25, 0.25)
    seed: int = 0
    early_stopping_rounds: int = 50
    n_bins: int = 32

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")
        grid = dict(self.hyper_grid)
        for key in _GRID_KEYS:
            if not grid.get(key):
                raise ValueError(f"hyper grid entry {key!r} must be non-empty")
        if any(d not in (1, 2) for d in grid["max_depth"]):
            raise ValueError("max_depth candidates must be 1 or 2")
        object.__setattr__(self, "monotone", tuple(int(m) for m in self.monotone))
        object.__setattr__(self, "hyper_grid", grid)


@dataclass
class FittedModel:
    """Everything the pipeline produces for one run."""

    terms: TermStore
    ensemble: TreeEnsemble
    selected_pairs: list
    chosen_hypers: dict
    metrics: dict
    importances: list


def rmse(pred, y) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return float(np.sqrt(np.mean((pred - y) ** 2)))


def roc_auc(scores, y) -> float:
    """Rank-based AUC with half credit for tied scores."""
    y = np.asarray(y, dtype=np.float64)
    pos = y == 1.0
    n1 = int(pos.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    ranks = rankdata(np.asarray(scores, dtype=np.float64))
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def evaluate_metrics(model, ds: Dataset) -> float:
    """Test-style metric in response space: RMSE, or AUC for binary data."""
    expected = "squared" if ds.response_kind == "continuous" else "logistic"
    if model.loss_kind != expected:
        raise ValueError(f"model loss {model.loss_kind!r} does not match "
                         f"response kind {ds.response_kind!r}")
    preds = model.predict(ds.features)
    if ds.response_kind == "continuous":
        return rmse(preds, ds.response)
    return roc_auc(preds, ds.response)


def _tuning_objective(ens: TreeEnsemble, valid: Dataset) -> float:
    preds = ens.predict(valid.features)
    if valid.response_kind == "continuous":
        return rmse(preds, valid.response)
    return float(np.mean(loss_value("logistic", valid.response, preds)))


def run_pipeline(train: Dataset, valid: Dataset, test: Dataset,
                 cfg: PipelineConfig) -> FittedModel:
    """Screen, tune, fit, parse, purify, and evaluate, deterministically.

    Stages: (1) depth-1 screening fit on train; (2) residuals; (3) top-k
    pair search; (4) constrained grid search picking the lowest validation
    RMSE (continuous) or log-loss (binary), ties going to fewer trees then
    earlier grid order; (5) parse + purify + importances; (6) metrics on
    all three splits. The screening fit uses fixed hypers (learning rate
    0.1, reg_lambda 1) since it only feeds the residual search.
    """
    if len(cfg.monotone) != train.p:
        raise ValueError("monotone spec length must match feature count")

    def stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except Exception as exc:
            raise PipelineError(name, exc) from exc

    grid = cfg.hyper_grid
    gam_cfg = BoostConfig(n_trees=max(grid["n_trees"]), max_depth=1,
                          learning_rate=0.1, reg_lambda=1.0,
                          min_child_hessian=1.0,
                          early_stopping_rounds=cfg.early_stopping_rounds,
                          seed=cfg.seed)
    gam = stage("initial-gam", fit_initial_gam, train, valid, gam_cfg)
    resid = stage("residuals", residuals, train, gam)
    binned = stage("filter", bin_features, train, cfg.n_bins)
    pairs = stage("filter", fast_filter, resid, binned, cfg.k)

    spec = ConstraintSpec.from_pairs(cfg.monotone, [(s.j, s.k) for s in pairs])

    def tune():
        depths = [1] if cfg.k == 0 else grid["max_depth"]
        best = None  # (objective, n_trees, ensemble, hypers)
        for combo in itertools.product(grid["n_trees"], depths,
                                       grid["learning_rate"], grid["reg_lambda"],
                                       grid["min_child_hessian"]):
            hypers = dict(zip(_GRID_KEYS, combo))
            bc = BoostConfig(n_trees=int(hypers["n_trees"]),
                             max_depth=int(hypers["max_depth"]),
                             learning_rate=float(hypers["learning_rate"]),
                             reg_lambda=float(hypers["reg_lambda"]),
                             min_child_hessian=float(hypers["min_child_hessian"]),
                             early_stopping_rounds=cfg.early_stopping_rounds,
                             seed=cfg.seed)
            ens = fit_boosted(train, valid, spec, bc)
            obj = _tuning_objective(ens, valid)
            size = len(ens.trees)
            if best is None or obj < best[0] or (obj == best[0] and size < best[1]):
                best = (obj, size, ens, hypers)
        return best[2], best[3]

    ensemble, chosen = stage("tune", tune)
    store = stage("parse", parse_ensemble, ensemble)
    store = stage("purify", purify, store, train)
    importances = stage("importance", term_importance, store, train)

    metric = "rmse" if train.response_kind == "continuous" else "auc"
    metrics = {"metric": metric}
    for name, ds in (("train", train), ("valid", valid), ("test", test)):
        metrics[name] = stage("metrics", evaluate_metrics, ensemble, ds)

    return FittedModel(terms=store, ensemble=ensemble, selected_pairs=pairs,
                      chosen_hypers=chosen, metrics=metrics,
                      importances=importances)
