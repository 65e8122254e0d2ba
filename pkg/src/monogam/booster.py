"""Second-order boosting of shallow regression trees under hard constraints.

Trees are grown by exact greedy search over raw feature values. Two hard
constraints shape the search:

* monotonicity: a candidate split on a constrained feature is rejected
  unless the (clipped) child weights are ordered the right way; once a
  split is accepted, the midpoint of the child weights becomes a value
  bound inherited by everything grown beneath it, and every node weight is
  clipped into its bounds before use;
* interaction sets: the split features collected along any root-to-leaf
  path must stay fully contained in one of the allowed feature sets.

The learning rate is folded into leaf values at fit time, so a stored tree
routes an input and returns its additive contribution directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import Dataset

LOSS_KINDS = ("squared", "logistic")

_PROB_EPS = 1e-6


class StructureError(RuntimeError):
    """A tree violates the interaction constraints it was grown under."""


# ---------------------------------------------------------------------------
# Loss derivatives
# ---------------------------------------------------------------------------

def loss_value(loss_kind: str, y, pred):
    """Per-observation loss in link space.

    Squared loss is 0.5*(pred - y)^2; logistic loss is the negative
    Bernoulli log-likelihood log(1 + e^pred) - y*pred.
    """
    y = np.asarray(y, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if loss_kind == "squared":
        return 0.5 * (pred - y) ** 2
    if loss_kind == "logistic":
        return np.logaddexp(0.0, pred) - y * pred
    raise ValueError(f"unknown loss {loss_kind!r}")


def loss_grad_hess(loss_kind: str, y, pred):
    """First and second derivatives of the loss w.r.t. the link score.

    Both losses are convex in the score, so the returned hessian is
    always >= 0 and the Newton leaf weight -g/(h + reg) is well defined.
    """
    y = np.asarray(y, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if loss_kind == "squared":
        return pred - y, np.ones_like(pred)
    if loss_kind == "logistic":
        if not np.isin(y, (0.0, 1.0)).all():
            raise ValueError("logistic loss requires responses in {0, 1}")
        p_hat = 1.0 / (1.0 + np.exp(-pred))
        return p_hat - y, p_hat * (1.0 - p_hat)
    raise ValueError(f"unknown loss {loss_kind!r}")


# ---------------------------------------------------------------------------
# Constraints
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintSpec:
    """Per-feature monotone directions plus the allowed split-feature sets."""

    monotone: tuple                  # per feature, -1 / 0 / +1
    interaction_sets: tuple          # sorted tuples of feature indices

    def __post_init__(self):
        mono = tuple(int(m) for m in self.monotone)
        if any(m not in (-1, 0, 1) for m in mono):
            raise ValueError("monotone directions must be -1, 0 or +1")
        p = len(mono)
        sets = []
        for s in self.interaction_sets:
            t = tuple(sorted(int(i) for i in s))
            if len(set(t)) != len(t):
                raise ValueError(f"duplicate feature in constraint set {s}")
            if any(i < 0 or i >= p for i in t):
                raise ValueError(f"feature index out of range in set {s}")
            if len(t) > 2:
                raise ValueError("constraint sets are limited to two features")
            sets.append(t)
        object.__setattr__(self, "monotone", mono)
        object.__setattr__(self, "interaction_sets", tuple(sets))

    @classmethod
    def from_pairs(cls, monotone, pairs) -> "ConstraintSpec":
        """All singletons plus the given pairs; main effects stay fittable."""
        singletons = [(j,) for j in range(len(tuple(monotone)))]
        return cls(tuple(monotone), tuple(singletons) + tuple(
            tuple(sorted(pair)) for pair in pairs))

    @property
    def p(self) -> int:
        return len(self.monotone)


def allowed_split_features(path_features, spec: ConstraintSpec):
    """Features f such that path_features + {f} fits inside some allowed set."""
    path = frozenset(path_features)
    out = []
    for f in range(spec.p):
        need = path | {f}
        if any(need.issubset(s) for s in spec.interaction_sets):
            out.append(f)
    return out


# ---------------------------------------------------------------------------
# Trees
# ---------------------------------------------------------------------------

@dataclass
class TreeNode:
    """Internal split (feature/threshold/children) or leaf (value).

    ``lower``/``upper`` record the value bounds that were active while the
    node was grown; they are not part of the serialized model.
    """

    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    leaf_value: float = 0.0
    lower: float = -np.inf
    upper: float = np.inf

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def leaves(self, _path=()):
        """Yield (path, leaf) with path entries (feature, threshold, went_left)."""
        if self.is_leaf:
            yield _path, self
            return
        yield from self.left.leaves(_path + ((self.feature, self.threshold, True),))
        yield from self.right.leaves(_path + ((self.feature, self.threshold, False),))


def _accumulate_tree(node: TreeNode, X: np.ndarray, idx: np.ndarray, out: np.ndarray):
    if node.is_leaf:
        out[idx] += node.leaf_value
        return
    go_left = X[idx, node.feature] <= node.threshold
    _accumulate_tree(node.left, X, idx[go_left], out)
    _accumulate_tree(node.right, X, idx[~go_left], out)


@dataclass
class TreeEnsemble:
    """Intercept plus a sequence of constraint-compliant trees."""

    base_score: float
    trees: list
    loss_kind: str
    constraints: ConstraintSpec
    learning_rate: float

    @property
    def p(self) -> int:
        return self.constraints.p

    def predict(self, X) -> np.ndarray:
        return predict_ensemble(self, X)


def predict_ensemble(ens: TreeEnsemble, X):
    """Link-space score: base plus routed leaf values, tree by tree.

    Accumulation runs in tree order for every row, which keeps predictions
    exactly non-decreasing along any hard-constrained coordinate.
    """
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != ens.p:
        raise ValueError(f"expected {ens.p} features, got {X.shape[1]}")
    out = np.full(X.shape[0], ens.base_score, dtype=np.float64)
    idx = np.arange(X.shape[0])
    for tree in ens.trees:
        _accumulate_tree(tree, X, idx, out)
    return float(out[0]) if single else out


def audit_interaction_compliance(ens: TreeEnsemble):
    """Root-to-leaf paths whose split-feature set escapes every allowed set."""
    sets = [frozenset(s) for s in ens.constraints.interaction_sets]
    bad = []
    for t, tree in enumerate(ens.trees):
        for path, _leaf in tree.leaves():
            used = frozenset(f for f, _, _ in path)
            if used and not any(used.issubset(s) for s in sets):
                bad.append((t, tuple(sorted(used))))
    return bad


# ---------------------------------------------------------------------------
# Growth
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoostConfig:
    """Knobs for a single boosted fit.

    The exact greedy search is deterministic; ``seed`` is carried only so a
    fit's configuration can be echoed and reproduced verbatim.
    """

    n_trees: int = 500
    max_depth: int = 2
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_hessian: float = 1.0
    early_stopping_rounds: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be >= 0")
        if self.early_stopping_rounds is not None and self.early_stopping_rounds < 1:
            raise ValueError("early_stopping_rounds must be >= 1 when set")


def _node_weight(G, H, reg_lambda):
    denom = H + reg_lambda
    return -G / denom if denom > 0 else 0.0


def _grow_node(X, g, h, spec, cfg, orders, depth, path, lb, ub, contrib):
    rows = orders[0]
    G = float(np.sum(g[rows]))
    H = float(np.sum(h[rows]))
    lam = cfg.reg_lambda
    w = min(max(_node_weight(G, H, lam), lb), ub)

    def make_leaf():
        value = w * cfg.learning_rate
        contrib[rows] = value
        return TreeNode(leaf_value=value, lower=lb, upper=ub)

    if depth >= cfg.max_depth or H < cfg.min_child_hessian:
        return make_leaf()

    best = None  # (gain, feature, threshold, n_left)
    for feat in allowed_split_features(path, spec):
        ord_f = orders[feat]
        x_s = X[ord_f, feat]
        cuts = np.nonzero(x_s[:-1] < x_s[1:])[0]
        if cuts.size == 0:
            continue
        GL = np.cumsum(g[ord_f])[cuts]
        HL = np.cumsum(h[ord_f])[cuts]
        GR, HR = G - GL, H - HL
        ok = (HL >= cfg.min_child_hessian) & (HR >= cfg.min_child_hessian)
        direction = spec.monotone[feat]
        if direction != 0:
            with np.errstate(divide="ignore", invalid="ignore"):
                wL = np.clip(np.where(HL + lam > 0, -GL / (HL + lam), 0.0), lb, ub)
                wR = np.clip(np.where(HR + lam > 0, -GR / (HR + lam), 0.0), lb, ub)
            ok &= (wL <= wR) if direction > 0 else (wL >= wR)
        if not ok.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            score = (np.where(HL + lam > 0, GL * GL / (HL + lam), 0.0)
                     + np.where(HR + lam > 0, GR * GR / (HR + lam), 0.0))
        base = G * G / (H + lam) if H + lam > 0 else 0.0
        gains = np.where(ok, 0.5 * (score - base) - cfg.gamma, -np.inf)
        i = int(np.argmax(gains))  # first max: lowest threshold wins ties
        gain = float(gains[i])
        if gain > 0.0 and (best is None or gain > best[0]):
            cut = cuts[i]
            best = (gain, feat, float(0.5 * (x_s[cut] + x_s[cut + 1])), int(cut) + 1)

    if best is None:
        return make_leaf()

    _, feat, threshold, n_left = best
    ord_f = orders[feat]
    left_mask = np.zeros(X.shape[0], dtype=bool)
    left_mask[ord_f[:n_left]] = True
    left_orders = [o[left_mask[o]] for o in orders]
    right_orders = [o[~left_mask[o]] for o in orders]

    child_lb_l, child_ub_l = lb, ub
    child_lb_r, child_ub_r = lb, ub
    direction = spec.monotone[feat]
    if direction != 0:
        GL = float(np.sum(g[left_orders[0]]))
        HL = float(np.sum(h[left_orders[0]]))
        wL = min(max(_node_weight(GL, HL, lam), lb), ub)
        wR = min(max(_node_weight(G - GL, H - HL, lam), lb), ub)
        mid = 0.5 * (wL + wR)
        if direction > 0:
            child_ub_l = mid
            child_lb_r = mid
        else:
            child_lb_l = mid
            child_ub_r = mid

    child_path = path | {feat}
    left = _grow_node(X, g, h, spec, cfg, left_orders, depth + 1,
                      child_path, child_lb_l, child_ub_l, contrib)
    right = _grow_node(X, g, h, spec, cfg, right_orders, depth + 1,
                       child_path, child_lb_r, child_ub_r, contrib)
    return TreeNode(feature=feat, threshold=threshold, left=left, right=right,
                    lower=lb, upper=ub)


def _grow_with_contrib(X, g, h, spec, cfg):
    n, p = X.shape
    contrib = np.zeros(n, dtype=np.float64)
    if n == 0:
        return TreeNode(leaf_value=0.0), contrib
    if np.any(h < 0):
        raise ValueError("hessians must be non-negative")
    orders = [np.argsort(X[:, j], kind="stable") for j in range(p)]
    root = _grow_node(X, g, h, spec, cfg, orders, 0, frozenset(),
                      -np.inf, np.inf, contrib)
    return root, contrib


def grow_tree(X, g, h, spec: ConstraintSpec, cfg: BoostConfig) -> TreeNode:
    """Exact greedy growth of one tree on gradients g and hessians h.

    Candidate thresholds are midpoints of adjacent distinct sorted values;
    split gain is the usual regularized Newton gain minus ``gamma``. Ties
    break to the lowest feature index, then the lowest threshold, so the
    result is independent of evaluation order.
    """
    X = np.asarray(X, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    root, _ = _grow_with_contrib(X, g, h, spec, cfg)
    return root


def fit_boosted(train: Dataset, valid: Dataset | None, spec: ConstraintSpec,
                cfg: BoostConfig) -> TreeEnsemble:
    """Newton boosting with optional early stopping on the validation loss.

    The intercept is the link-space optimum of the constant model. When
    early stopping is enabled, fitting stops after the validation loss has
    failed to improve for ``early_stopping_rounds`` consecutive trees and
    the ensemble is truncated at its validation-loss minimum.
    """
    if spec.p != train.p:
        raise ValueError("constraint spec does not match feature count")
    loss = "squared" if train.response_kind == "continuous" else "logistic"
    if cfg.early_stopping_rounds is not None and (valid is None or valid.n == 0):
        raise ValueError("early stopping requires a non-empty validation set")

    X, y = train.features, train.response
    if loss == "squared":
        base = float(np.mean(y))
    else:
        mean = min(max(float(np.mean(y)), _PROB_EPS), 1.0 - _PROB_EPS)
        base = float(np.log(mean / (1.0 - mean)))

    pred = np.full(train.n, base, dtype=np.float64)
    if valid is not None:
        pred_valid = np.full(valid.n, base, dtype=np.float64)
        idx_valid = np.arange(valid.n)

    trees = []
    best_loss, best_size, stale = np.inf, 0, 0
    for _ in range(cfg.n_trees):
        g, h = loss_grad_hess(loss, y, pred)
        tree, contrib = _grow_with_contrib(X, g, h, spec, cfg)
        trees.append(tree)
        pred += contrib
        if cfg.early_stopping_rounds is None:
            continue
        _accumulate_tree(tree, valid.features, idx_valid, pred_valid)
        vloss = float(np.mean(loss_value(loss, valid.response, pred_valid)))
        if vloss < best_loss:
            best_loss, best_size, stale = vloss, len(trees), 0
        else:
            stale += 1
            if stale >= cfg.early_stopping_rounds:
                break
    if cfg.early_stopping_rounds is not None:
        trees = trees[:best_size]

    return TreeEnsemble(base_score=base, trees=trees, loss_kind=loss,
                        constraints=spec, learning_rate=cfg.learning_rate)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _nodes_to_list(root: TreeNode) -> list:
    nodes = []

    def walk(node):
        i = len(nodes)
        if node.is_leaf:
            nodes.append({"leaf_value": float(node.leaf_value)})
            return i
        nodes.append(None)
        entry = {"feature": int(node.feature), "threshold": float(node.threshold)}
        entry["left"] = walk(node.left)
        entry["right"] = walk(node.right)
        nodes[i] = entry
        return i

    walk(root)
    return nodes


def _nodes_from_list(nodes: list) -> TreeNode:
    def build(i):
        spec = nodes[i]
        if "leaf_value" in spec:
            return TreeNode(leaf_value=float(spec["leaf_value"]))
        return TreeNode(feature=int(spec["feature"]),
                        threshold=float(spec["threshold"]),
                        left=build(spec["left"]), right=build(spec["right"]))

    return build(0)


def ensemble_to_dict(ens: TreeEnsemble) -> dict:
    return {
        "base_score": float(ens.base_score),
        "loss": ens.loss_kind,
        "learning_rate": float(ens.learning_rate),
        "constraints": {
            "monotone": [int(m) for m in ens.constraints.monotone],
            "interaction_sets": [list(s) for s in ens.constraints.interaction_sets],
        },
        "trees": [{"nodes": _nodes_to_list(t)} for t in ens.trees],
    }


def ensemble_from_dict(d: dict) -> TreeEnsemble:
    cons = d["constraints"]
    spec = ConstraintSpec(tuple(cons["monotone"]),
                          tuple(tuple(s) for s in cons["interaction_sets"]))
    if d["loss"] not in LOSS_KINDS:
        raise ValueError(f"unknown loss {d['loss']!r}")
    return TreeEnsemble(
        base_score=float(d["base_score"]),
        trees=[_nodes_from_list(t["nodes"]) for t in d["trees"]],
        loss_kind=d["loss"],
        constraints=spec,
        learning_rate=float(d["learning_rate"]),
    )


def save_model(ens: TreeEnsemble, path) -> None:
    """Single-line, key-sorted JSON; save -> load -> predict is bit-exact."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(ensemble_to_dict(ens), fh, sort_keys=True,
                  separators=(",", ":"))
        fh.write("\n")


def load_model(path) -> TreeEnsemble:
    with open(path, "r", encoding="utf-8") as fh:
        return ensemble_from_dict(json.load(fh))
