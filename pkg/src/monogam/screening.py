"""Interaction screening: initial additive fit, residuals, and pair ranking.

Pairs are scored by how much a best-cut 4-quadrant piecewise-constant model
reduces the residual sum of squares. The search runs on 2-D histograms with
prefix sums, trying every interior bin boundary of each axis.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .booster import BoostConfig, ConstraintSpec, TreeEnsemble, fit_boosted
from .data import BinnedDataset, Dataset

_PROB_EPS = 1e-6


@dataclass(frozen=True)
class PairScore:
    """RSS reduction achieved by the best 4-quadrant model for pair (j, k)."""

    j: int
    k: int
    score: float

    def __post_init__(self):
        if not 0 <= self.j < self.k:
            raise ValueError("pair indices must satisfy 0 <= j < k")
        if not np.isfinite(self.score) or self.score < 0:
            raise ValueError("score must be finite and non-negative")


def fit_initial_gam(train: Dataset, valid: Dataset | None,
                    cfg: BoostConfig) -> TreeEnsemble:
    """Depth-1 boosted fit of main effects only, with no monotone constraints.

    This is just a screening fit; the residuals it leaves behind are what
    the pair search consumes.
    """
    spec = ConstraintSpec.from_pairs((0,) * train.p, ())
    return fit_boosted(train, valid, spec, replace(cfg, max_depth=1))


def residuals(ds: Dataset, ens: TreeEnsemble) -> np.ndarray:
    """Link-space residuals of ``ens`` on ``ds``.

    Continuous: y - f(x). Binary: (y - p)/(p(1-p)) with p clamped away
    from 0 and 1, which approximates the residual on the logit scale.
    """
    expected = "squared" if ds.response_kind == "continuous" else "logistic"
    if ens.loss_kind != expected:
        raise ValueError(f"model loss {ens.loss_kind!r} does not match "
                         f"response kind {ds.response_kind!r}")
    pred = ens.predict(ds.features)
    if ds.response_kind == "continuous":
        return ds.response - pred
    p_hat = np.clip(1.0 / (1.0 + np.exp(-pred)), _PROB_EPS, 1.0 - _PROB_EPS)
    return (ds.response - p_hat) / (p_hat * (1.0 - p_hat))


def _pair_score(resid, bi, bj, nb_i, nb_j):
    """Best RSS reduction over all cut pairs for one feature pair."""
    if nb_i < 2 or nb_j < 2:
        return 0.0
    flat = bi * nb_j + bj
    size = nb_i * nb_j
    count = np.bincount(flat, minlength=size).reshape(nb_i, nb_j).astype(np.float64)
    total = np.bincount(flat, weights=resid, minlength=size).reshape(nb_i, nb_j)
    sumsq = np.bincount(flat, weights=resid * resid, minlength=size).reshape(nb_i, nb_j)

    # prefix sums; quadrant (a, b) stats by inclusion-exclusion
    cn = count.cumsum(axis=0).cumsum(axis=1)
    cs = total.cumsum(axis=0).cumsum(axis=1)
    n_all, s_all, q_all = cn[-1, -1], cs[-1, -1], float(sumsq.sum())

    n11 = cn[:-1, :-1]
    s11 = cs[:-1, :-1]
    n12 = cn[:-1, -1:] - n11
    s12 = cs[:-1, -1:] - s11
    n21 = cn[-1:, :-1] - n11
    s21 = cs[-1:, :-1] - s11
    n22 = n_all - n11 - n12 - n21
    s22 = s_all - s11 - s12 - s21

    def mean_term(s, n):
        return np.where(n > 0, s * s / np.where(n > 0, n, 1.0), 0.0)

    rss_quad = q_all - (mean_term(s11, n11) + mean_term(s12, n12)
                        + mean_term(s21, n21) + mean_term(s22, n22))
    rss_null = q_all - (s_all * s_all / n_all if n_all > 0 else 0.0)
    return max(0.0, float(np.max(rss_null - rss_quad)))


def fast_filter(resid: np.ndarray, binned: BinnedDataset, k: int):
    """Rank all feature pairs by 4-quadrant RSS reduction; keep the top k.

    Empty quadrants predict 0 and contribute nothing, which keeps the
    search total. Ties break lexicographically on (j, k).
    """
    resid = np.asarray(resid, dtype=np.float64)
    resid = resid - resid.mean()  # scores are shift-invariant; center for conditioning
    index = binned.bin_index
    p = index.shape[1]
    n_pairs = p * (p - 1) // 2
    if k < 0 or k > n_pairs:
        raise ValueError(f"k must be in [0, {n_pairs}]")
    nb = binned.n_bins
    scores = []
    for j in range(p):
        for l in range(j + 1, p):
            scores.append(PairScore(j, l, _pair_score(
                resid, index[:, j], index[:, l], nb[j], nb[l])))
    scores.sort(key=lambda s: (-s.score, s.j, s.k))
    return scores[:k]
