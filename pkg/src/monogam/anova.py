"""Exact decomposition of a fitted ensemble into additive terms.

Parsing re-expresses every leaf as a constant over an interval (one split
feature) or a rectangle (two split features), accumulated into per-feature
step functions and per-pair cell grids. Purification then projects each
pair grid onto additive piecewise-linear functions of its two features and
moves that content into the main effects, leaving interactions with no
additive part. Both operations are rearrangements: the represented
function never changes.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .booster import StructureError, TreeEnsemble
from .data import Dataset

N_SPLINE_KNOTS = 22  # 20 interior knots plus the two range endpoints

RIDGE_FALLBACK = 1e-8


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

@dataclass
class MainEffectTerm:
    """Step function (from parsed leaves) plus a piecewise-linear part."""

    feature: int
    step_breaks: np.ndarray
    step_values: np.ndarray
    spline_knots: np.ndarray = field(default_factory=lambda: np.empty(0))
    spline_coefs: np.ndarray = field(default_factory=lambda: np.empty(0))

    def step_at(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.step_values[np.searchsorted(self.step_breaks, x, side="left")]

    def value(self, x):
        v = self.step_at(x)
        if self.spline_knots.size:
            v = v + np.interp(x, self.spline_knots, self.spline_coefs)
        return v

    def copy(self):
        return MainEffectTerm(self.feature, self.step_breaks.copy(),
                              self.step_values.copy(), self.spline_knots.copy(),
                              self.spline_coefs.copy())


@dataclass
class InteractionTerm:
    """Cell grid over threshold rectangles plus per-axis linear offsets.

    The offsets hold the negated additive content removed by purification;
    they share the knot grid of the corresponding main effects.
    """

    j: int
    k: int
    x_breaks: np.ndarray
    y_breaks: np.ndarray
    cell_values: np.ndarray
    offset_knots_j: np.ndarray = field(default_factory=lambda: np.empty(0))
    offset_coefs_j: np.ndarray = field(default_factory=lambda: np.empty(0))
    offset_knots_k: np.ndarray = field(default_factory=lambda: np.empty(0))
    offset_coefs_k: np.ndarray = field(default_factory=lambda: np.empty(0))

    def cell_at(self, x, y):
        ix = np.searchsorted(self.x_breaks, np.asarray(x, dtype=np.float64), side="left")
        iy = np.searchsorted(self.y_breaks, np.asarray(y, dtype=np.float64), side="left")
        return self.cell_values[ix, iy]

    def value(self, x, y):
        v = self.cell_at(x, y)
        if self.offset_knots_j.size:
            v = v + np.interp(x, self.offset_knots_j, self.offset_coefs_j)
        if self.offset_knots_k.size:
            v = v + np.interp(y, self.offset_knots_k, self.offset_coefs_k)
        return v

    def copy(self):
        return InteractionTerm(self.j, self.k, self.x_breaks.copy(),
                               self.y_breaks.copy(), self.cell_values.copy(),
                               self.offset_knots_j.copy(), self.offset_coefs_j.copy(),
                               self.offset_knots_k.copy(), self.offset_coefs_k.copy())


@dataclass
class TermStore:
    """Intercept, main effects, and pairwise interactions of one model."""

    intercept: float
    mains: list
    interactions: list                    # sorted by (j, k)
    loss_kind: str
    feature_ranges: np.ndarray | None = None
    source: TreeEnsemble | None = None    # ensemble this store was parsed from

    @property
    def p(self) -> int:
        return len(self.mains)

    def predict(self, X) -> np.ndarray:
        """Sum of all terms.

        Step and cell content accumulates first; the piecewise-linear parts
        are netted per feature (main-effect spline plus every interaction
        offset on that axis) before evaluation, so the mass moved around by
        purification cancels exactly instead of leaving rounding wiggle.
        """
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        out = np.full(X.shape[0], self.intercept, dtype=np.float64)
        for m in self.mains:
            out += m.step_at(X[:, m.feature])
        for t in self.interactions:
            out += t.cell_at(X[:, t.j], X[:, t.k])
        for j, net in self._net_linear_coefs():
            knots = self.mains[j].spline_knots
            out += np.interp(X[:, j], knots, net)
        return float(out[0]) if single else out

    def _net_linear_coefs(self):
        for j, m in enumerate(self.mains):
            if m.spline_knots.size == 0:
                continue
            offset_total = np.zeros_like(m.spline_coefs)
            for t in self.interactions:
                if t.j == j and t.offset_coefs_j.size:
                    offset_total = offset_total + t.offset_coefs_j
                elif t.k == j and t.offset_coefs_k.size:
                    offset_total = offset_total + t.offset_coefs_k
            net = m.spline_coefs + offset_total
            if np.any(net):
                yield j, net

    def term_values(self, key, train: Dataset) -> np.ndarray:
        """Evaluate one term, keyed (j,) or (j, k), on the training rows."""
        if len(key) == 1:
            return self.mains[key[0]].value(train.features[:, key[0]])
        for t in self.interactions:
            if (t.j, t.k) == tuple(key):
                return t.value(train.features[:, t.j], train.features[:, t.k])
        raise KeyError(f"no interaction term {key}")

    def copy(self):
        return TermStore(self.intercept, [m.copy() for m in self.mains],
                         [t.copy() for t in self.interactions], self.loss_kind,
                         None if self.feature_ranges is None else self.feature_ranges.copy(),
                         self.source)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _path_interval(path, feature):
    lo, hi = -np.inf, np.inf
    for f, threshold, went_left in path:
        if f != feature:
            continue
        if went_left:
            hi = min(hi, threshold)
        else:
            lo = max(lo, threshold)
    return lo, hi


def _cover_slice(breaks, lo, hi):
    """Index range of cells fully inside the interval (lo, hi]."""
    start = 0 if lo == -np.inf else int(np.searchsorted(breaks, lo, side="left")) + 1
    stop = breaks.size if hi == np.inf else int(np.searchsorted(breaks, hi, side="left"))
    return start, stop + 1


def parse_ensemble(ens: TreeEnsemble) -> TermStore:
    """Aggregate every leaf into the term its split features select.

    Leaves with an empty path add to the intercept; one split feature adds
    a constant over the leaf interval to that main effect; two features add
    over the leaf rectangle of the pair grid. Accumulation runs in tree
    order so constrained orderings between neighbouring cells survive
    floating-point rounding.
    """
    p = ens.p
    records = []
    main_breaks = [set() for _ in range(p)]
    pair_breaks = {}
    for s in ens.constraints.interaction_sets:
        if len(s) == 2:
            pair_breaks[tuple(s)] = (set(), set())

    for tree in ens.trees:
        for path, leaf in tree.leaves():
            feats = sorted({f for f, _, _ in path})
            if len(feats) > 2:
                raise StructureError(
                    f"leaf path splits on features {tuple(feats)}; at most two "
                    "distinct features are allowed per branch")
            if not feats:
                records.append((None, None, leaf.leaf_value))
                continue
            if len(feats) == 1:
                j = feats[0]
                lo, hi = _path_interval(path, j)
                for v in (lo, hi):
                    if np.isfinite(v):
                        main_breaks[j].add(v)
                records.append(((j,), (lo, hi), leaf.leaf_value))
            else:
                j, k = feats
                bx, by = pair_breaks.setdefault((j, k), (set(), set()))
                lo_x, hi_x = _path_interval(path, j)
                lo_y, hi_y = _path_interval(path, k)
                for v in (lo_x, hi_x):
                    if np.isfinite(v):
                        bx.add(v)
                for v in (lo_y, hi_y):
                    if np.isfinite(v):
                        by.add(v)
                records.append(((j, k), (lo_x, hi_x, lo_y, hi_y), leaf.leaf_value))

    mains = [MainEffectTerm(j, np.array(sorted(main_breaks[j]), dtype=np.float64),
                            np.zeros(len(main_breaks[j]) + 1))
             for j in range(p)]
    inters = {}
    for (j, k), (bx, by) in sorted(pair_breaks.items()):
        xb = np.array(sorted(bx), dtype=np.float64)
        yb = np.array(sorted(by), dtype=np.float64)
        inters[(j, k)] = InteractionTerm(j, k, xb, yb,
                                         np.zeros((xb.size + 1, yb.size + 1)))

    intercept = float(ens.base_score)
    for key, bounds, value in records:
        if key is None:
            intercept += value
        elif len(key) == 1:
            m = mains[key[0]]
            a, b = _cover_slice(m.step_breaks, bounds[0], bounds[1])
            m.step_values[a:b] += value
        else:
            t = inters[key]
            ax, bx = _cover_slice(t.x_breaks, bounds[0], bounds[1])
            ay, by = _cover_slice(t.y_breaks, bounds[2], bounds[3])
            t.cell_values[ax:bx, ay:by] += value

    return TermStore(intercept, mains, [inters[k] for k in sorted(inters)],
                     ens.loss_kind, source=ens)


# ---------------------------------------------------------------------------
# Purification
# ---------------------------------------------------------------------------

def _feature_knots(train: Dataset, j: int) -> np.ndarray:
    lo = float(train.features[:, j].min())
    hi = float(train.features[:, j].max())
    if hi <= lo:
        return np.empty(0)
    return np.linspace(lo, hi, N_SPLINE_KNOTS)


def _hat_design(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Dense hat-function design; constant extrapolation past the end knots."""
    m = knots.size
    pos = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, m - 2)
    w = np.clip((x - knots[pos]) / (knots[pos + 1] - knots[pos]), 0.0, 1.0)
    B = np.zeros((x.size, m))
    rows = np.arange(x.size)
    B[rows, pos] = 1.0 - w
    B[rows, pos + 1] = w
    return B


def _fit_additive_spline(ytilde, B_j, B_k):
    """Least-squares fit ytilde ~ g_j + g_k in the hat basis.

    The basis carries an exact partition-of-unity rank deficiency, so the
    primary solve is an SVD least squares; a ridge of RIDGE_FALLBACK backs
    it up if the result degenerates. Each g is re-centered to sample mean
    zero and the freed constant is returned separately.
    """
    A = np.hstack([B_j, B_k])
    coefs, *_ = np.linalg.lstsq(A, ytilde, rcond=None)
    if not np.all(np.isfinite(coefs)):
        ata = A.T @ A + RIDGE_FALLBACK * np.eye(A.shape[1])
        coefs = np.linalg.solve(ata, A.T @ ytilde)
    c_j, c_k = coefs[:B_j.shape[1]], coefs[B_j.shape[1]:]
    m_j = float(np.mean(B_j @ c_j))
    m_k = float(np.mean(B_k @ c_k))
    return c_j - m_j, c_k - m_k, m_j + m_k


def purify(store: TermStore, train: Dataset) -> TermStore:
    """Move additive content out of every interaction, then center.

    For each pair grid (lexicographic order), its training predictions are
    regressed on mean-zero piecewise-linear functions of the two features
    plus a constant; the fits move to the main effects and intercept while
    their negations stay behind as axis offsets, so predictions are an
    exact rearrangement. Finally every main effect is re-centered to
    train-mean zero via its step values, pushing the shift into the
    intercept. Main effects of monotone features are reported as fitted,
    never re-monotonized.
    """
    out = store.copy()
    out.feature_ranges = np.column_stack([train.features.min(axis=0),
                                          train.features.max(axis=0)])
    knots = [_feature_knots(train, j) for j in range(out.p)]
    for j, m in enumerate(out.mains):
        if m.spline_knots.size == 0 and knots[j].size:
            m.spline_knots = knots[j].copy()
            m.spline_coefs = np.zeros(knots[j].size)

    designs = {}

    def design(j):
        if j not in designs:
            designs[j] = _hat_design(train.features[:, j], knots[j])
        return designs[j]

    for t in out.interactions:
        if knots[t.j].size == 0 or knots[t.k].size == 0:
            continue  # constant feature: nothing additive to identify
        ytilde = t.value(train.features[:, t.j], train.features[:, t.k])
        g_j, g_k, alpha = _fit_additive_spline(ytilde, design(t.j), design(t.k))
        out.mains[t.j].spline_coefs += g_j
        out.mains[t.k].spline_coefs += g_k
        if t.offset_coefs_j.size:
            t.offset_coefs_j = t.offset_coefs_j + (-g_j)
        else:
            t.offset_knots_j = out.mains[t.j].spline_knots
            t.offset_coefs_j = -g_j
        if t.offset_coefs_k.size:
            t.offset_coefs_k = t.offset_coefs_k + (-g_k)
        else:
            t.offset_knots_k = out.mains[t.k].spline_knots
            t.offset_coefs_k = -g_k
        t.cell_values -= alpha
        out.intercept += alpha

    for j, m in enumerate(out.mains):
        shift = float(np.mean(m.value(train.features[:, j])))
        m.step_values -= shift
        out.intercept += shift
    return out


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

def term_importance(store: TermStore, train: Dataset):
    """Terms ranked by the standard deviation of their training predictions.

    Returns (key, importance) pairs, keys (j,) for mains and (j, k) for
    interactions, ranked descending with lexicographic tie-breaks.
    """
    entries = []
    for j in range(store.p):
        entries.append(((j,), float(np.std(store.term_values((j,), train)))))
    for t in store.interactions:
        entries.append(((t.j, t.k),
                        float(np.std(store.term_values((t.j, t.k), train)))))
    entries.sort(key=lambda e: (-e[1], e[0]))
    return entries


@dataclass(frozen=True)
class MonotoneViolation:
    feature: int
    line: int
    grid_index: int
    x_value: float
    drop: float


@dataclass
class MonotoneReport:
    n_checked: int
    violations: list

    @property
    def passed(self) -> bool:
        return not self.violations


def _sweep_ranges(store: TermStore, ranges):
    if ranges is not None:
        return np.asarray(ranges, dtype=np.float64)
    if store.feature_ranges is not None:
        return store.feature_ranges
    out = np.empty((store.p, 2))
    for j, m in enumerate(store.mains):
        pts = [m.step_breaks, m.spline_knots]
        for t in store.interactions:
            if t.j == j:
                pts.append(t.x_breaks)
            elif t.k == j:
                pts.append(t.y_breaks)
        pts = np.concatenate([np.asarray(q, dtype=np.float64) for q in pts])
        out[j] = (pts.min(), pts.max()) if pts.size else (0.0, 1.0)
    return out


def check_monotone_full(store: TermStore, spec, n_lines: int = 1000,
                        n_grid: int = 50, seed: int = 0,
                        ranges=None) -> MonotoneReport:
    """Sweep the full model along each constrained coordinate.

    Every strictly wrong-signed step between adjacent grid points is a
    violation; there is no tolerance. When the store remembers its source
    ensemble, sweeps are evaluated through the tree sum, whose ordering is
    exact in floating point; otherwise the netted term sum is used (the
    two agree to parse tolerance).
    """
    ranges = _sweep_ranges(store, ranges)
    evaluate = store.source.predict if store.source is not None else store.predict
    rng = np.random.Generator(np.random.PCG64(seed))
    lo, hi = ranges[:, 0], ranges[:, 1]
    violations = []
    n_checked = 0
    for j, direction in enumerate(spec.monotone):
        if direction == 0:
            continue
        anchors = lo + (hi - lo) * rng.random((n_lines, store.p))
        grid = np.linspace(lo[j], hi[j], n_grid)
        pts = np.repeat(anchors, n_grid, axis=0)
        pts[:, j] = np.tile(grid, n_lines)
        preds = evaluate(pts).reshape(n_lines, n_grid)
        steps = np.diff(preds, axis=1) * direction
        n_checked += steps.size
        for line, gi in zip(*np.nonzero(steps < 0)):
            violations.append(MonotoneViolation(
                feature=j, line=int(line), grid_index=int(gi),
                x_value=float(grid[gi + 1]), drop=float(-steps[line, gi])))
    return MonotoneReport(n_checked=n_checked, violations=violations)


def orthogonality_audit(store: TermStore, train: Dataset) -> dict:
    """Refit the purification model to each interaction's predictions.

    Returns, per pair, the largest recovered coefficient magnitude relative
    to the term's importance. A purified store should sit at rounding
    level; values above 1e-6 mean additive content is still hiding in the
    interaction.
    """
    norms = {}
    for t in store.interactions:
        kj = _feature_knots(train, t.j)
        kk = _feature_knots(train, t.k)
        if kj.size == 0 or kk.size == 0:
            norms[(t.j, t.k)] = 0.0
            continue
        ytilde = t.value(train.features[:, t.j], train.features[:, t.k])
        g_j, g_k, _ = _fit_additive_spline(
            ytilde, _hat_design(train.features[:, t.j], kj),
            _hat_design(train.features[:, t.k], kk))
        peak = max(float(np.max(np.abs(g_j))), float(np.max(np.abs(g_k))))
        scale = float(np.std(ytilde))
        norms[(t.j, t.k)] = peak / scale if scale > 0 else peak
    return norms


# ---------------------------------------------------------------------------
# Term export
# ---------------------------------------------------------------------------

MAIN_GRID = 201
PAIR_GRID = 51


def export_terms(store: TermStore, train: Dataset, out_dir,
                 feature_names=None) -> dict:
    """Write per-term grids as CSV plus a manifest JSON; returns the manifest.

    Main effects go to ``x,value`` files on a 201-point grid over the train
    range; interactions to ``x,y,value`` files on a 51x51 grid.
    """
    names = list(feature_names or train.feature_names)
    os.makedirs(out_dir, exist_ok=True)
    ranges = (store.feature_ranges if store.feature_ranges is not None
              else np.column_stack([train.features.min(axis=0),
                                    train.features.max(axis=0)]))
    ranked = term_importance(store, train)
    entries = []
    for key, importance in ranked:
        if len(key) == 1:
            j = key[0]
            fname = f"main_{names[j]}.csv"
            grid = np.linspace(ranges[j, 0], ranges[j, 1], MAIN_GRID)
            values = store.mains[j].value(grid)
            lines = ["x,value"] + [f"{x!r},{v!r}" for x, v in
                                   zip(grid.tolist(), values.tolist())]
            entry = {"kind": "main", "features": [j], "names": [names[j]]}
        else:
            j, k = key
            term = next(t for t in store.interactions if (t.j, t.k) == (j, k))
            fname = f"pair_{names[j]}_{names[k]}.csv"
            gx = np.linspace(ranges[j, 0], ranges[j, 1], PAIR_GRID)
            gy = np.linspace(ranges[k, 0], ranges[k, 1], PAIR_GRID)
            lines = ["x,y,value"]
            for x in gx.tolist():
                vals = term.value(np.full(PAIR_GRID, x), gy)
                lines.extend(f"{x!r},{y!r},{v!r}" for y, v in
                             zip(gy.tolist(), vals.tolist()))
            entry = {"kind": "pair", "features": [j, k],
                     "names": [names[j], names[k]]}
        with open(os.path.join(out_dir, fname), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        entry["importance"] = importance
        entry["file"] = fname
        entries.append(entry)
    manifest = {"intercept": float(store.intercept), "loss": store.loss_kind,
                "terms": entries}
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    return manifest
