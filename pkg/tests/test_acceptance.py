"""Acceptance gate: full-scale benchmark runs checked at fixed tolerances.

Each criterion prints one PASS/FAIL line (run with ``pytest -s`` to see them
as they happen). The four benchmark fits share module-scoped fixtures; a
full pass takes a couple of minutes on one core.
"""

import time

import numpy as np
import pytest

import monogam as mg

from test_booster import MIXED_SETS, appendix_style_tree
from test_screening import brute_force_pair_score, random_binned

GEN_SEED = 1
SPLIT_SEED = 2
N = 15000
SIGMA = 2.0
MONOTONE = (1, 1, 1, 1)


def _criterion(num, ok, detail):
    print(f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"criterion {num}: {detail}"


def _run(generator, kind, k):
    ds = generator(mg.SimConfig(n=N, sigma=SIGMA, seed=GEN_SEED,
                                response_kind=kind))
    train, valid, test = mg.split_dataset(ds, (0.5, 0.25, 0.25), SPLIT_SEED)
    cfg = mg.PipelineConfig(k=k, monotone=MONOTONE)
    start = time.perf_counter()
    fitted = mg.run_pipeline(train, valid, test, cfg)
    seconds = time.perf_counter() - start
    return {"fit": fitted, "train": train, "valid": valid, "test": test,
            "seconds": seconds}


@pytest.fixture(scope="module")
def first_cont():
    return _run(mg.generate_first_order, "continuous", k=0)


@pytest.fixture(scope="module")
def first_bin():
    return _run(mg.generate_first_order, "binary", k=0)


@pytest.fixture(scope="module")
def second_cont():
    return _run(mg.generate_second_order, "continuous", k=2)


@pytest.fixture(scope="module")
def second_bin():
    return _run(mg.generate_second_order, "binary", k=2)


def test_criterion_1_first_order_continuous(first_cont):
    rmse = first_cont["fit"].metrics["test"]
    ok = 1.93 <= rmse <= 2.05 and first_cont["seconds"] <= 120.0
    _criterion(1, ok, f"test rmse {rmse:.4f} in [1.93, 2.05], "
                      f"runtime {first_cont['seconds']:.1f}s <= 120s")


def test_criterion_2_first_order_binary(first_bin):
    auc = first_bin["fit"].metrics["test"]
    _criterion(2, 0.64 <= auc <= 0.70, f"test auc {auc:.4f} in [0.64, 0.70]")


def test_criterion_3_second_order_continuous(second_cont):
    fit = second_cont["fit"]
    rmse = fit.metrics["test"]
    pairs = {(s.j, s.k) for s in fit.selected_pairs}
    ok = 1.96 <= rmse <= 2.08 and pairs == {(0, 1), (2, 3)}
    _criterion(3, ok, f"test rmse {rmse:.4f} in [1.96, 2.08], "
                      f"top-2 pairs {sorted(pairs)} == [(0,1), (2,3)]")


def test_criterion_4_second_order_binary(second_bin):
    fit = second_bin["fit"]
    auc, gap = fit.metrics["test"], fit.metrics["train"] - fit.metrics["test"]
    ok = 0.70 <= auc <= 0.75 and gap <= 0.03
    _criterion(4, ok, f"test auc {auc:.4f} in [0.70, 0.75], "
                      f"train-test gap {gap:+.4f} <= 0.03")


def test_criterion_5_monotonicity_is_hard(first_cont, first_bin, second_cont,
                                          second_bin):
    total_violations = 0
    total_checked = 0
    for run in (first_cont, first_bin, second_cont, second_bin):
        report = mg.check_monotone_full(run["fit"].terms,
                                        run["fit"].ensemble.constraints,
                                        n_lines=1000, n_grid=50, seed=5)
        total_violations += len(report.violations)
        total_checked += report.n_checked
    _criterion(5, total_violations == 0,
               f"{total_violations} violations over {total_checked} steps "
               "(1000 lines x 50-point grids, 4 features, 4 models, exact)")


def test_criterion_6_parse_identity(first_cont, first_bin, second_cont,
                                    second_bin):
    rng = np.random.Generator(np.random.PCG64(17))
    worst = 0.0
    for run in (first_cont, first_bin, second_cont, second_bin):
        ens = run["fit"].ensemble
        store = mg.parse_ensemble(ens)
        pts = rng.uniform(-1, 1, (1000, 4))
        worst = max(worst, float(np.abs(store.predict(pts)
                                        - ens.predict(pts)).max()))
    _criterion(6, worst <= 1e-8,
               f"max |terms - ensemble| = {worst:.3e} <= 1e-8 at 1000 points "
               "per model")


def test_criterion_7_purification(second_cont, second_bin):
    rng = np.random.Generator(np.random.PCG64(19))
    worst_gap, worst_post, best_pre = 0.0, 0.0, 0.0
    for run in (second_cont, second_bin):
        ens = run["fit"].ensemble
        parsed = mg.parse_ensemble(ens)
        pure = mg.purify(parsed, run["train"])
        pts = rng.uniform(-1, 1, (1000, 4))
        worst_gap = max(worst_gap, float(np.abs(pure.predict(pts)
                                                - parsed.predict(pts)).max()))
        pre = mg.orthogonality_audit(parsed, run["train"])
        post = mg.orthogonality_audit(pure, run["train"])
        best_pre = max(best_pre, max(pre.values()))
        worst_post = max(worst_post, max(post.values()))
    ok = worst_gap <= 1e-8 and worst_post <= 1e-6 and best_pre > 1e-3
    _criterion(7, ok, f"prediction gap {worst_gap:.3e} <= 1e-8, "
                      f"post-purify norm {worst_post:.3e} <= 1e-6, "
                      f"pre-purify norm {best_pre:.3e} > 1e-3")


def test_criterion_8_fast_oracle_equivalence():
    rng = np.random.Generator(np.random.PCG64(23))
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(50, 501))
        n_bins = int(rng.integers(2, 9))
        ds, binned = random_binned(rng, n, 4, n_bins)
        resid = rng.normal(size=n) + ds.features[:, 0] * ds.features[:, 1]
        nb = binned.n_bins
        for s in mg.fast_filter(resid, binned, 6):
            want = max(0.0, brute_force_pair_score(
                resid, binned.bin_index[:, s.j], binned.bin_index[:, s.k],
                nb[s.j], nb[s.k]))
            worst = max(worst, abs(s.score - want))
    _criterion(8, worst <= 1e-9,
               f"max |histogram - brute force| = {worst:.3e} <= 1e-9 "
               "over 20 instances")


def test_criterion_9_gradients_and_pseudo_residuals():
    rng = np.random.Generator(np.random.PCG64(29))
    eps, worst_rel = 1e-5, 0.0
    for loss, ys in (("squared", (0.0, 2.5)), ("logistic", (0.0, 1.0))):
        for y in ys:
            preds = rng.uniform(-3, 3, 50)
            g, h = mg.loss_grad_hess(loss, np.full(50, y), preds)
            num_g = (mg.loss_value(loss, y, preds + eps)
                     - mg.loss_value(loss, y, preds - eps)) / (2 * eps)
            gp, _ = mg.loss_grad_hess(loss, np.full(50, y), preds + eps)
            gm, _ = mg.loss_grad_hess(loss, np.full(50, y), preds - eps)
            num_h = (gp - gm) / (2 * eps)
            worst_rel = max(worst_rel,
                            float(np.max(np.abs(g - num_g)
                                         / np.maximum(1.0, np.abs(num_g)))),
                            float(np.max(np.abs(h - num_h)
                                         / np.maximum(1.0, np.abs(num_h)))))

    # pseudo-residual == -g/h of the logistic loss, to 1e-12
    spec = mg.ConstraintSpec.from_pairs((0,), ())
    scores = rng.uniform(-2.5, 2.5, 200)
    y = (rng.random(200) < 0.5).astype(float)
    gap = 0.0
    for score in np.unique(np.round(scores, 3))[:40]:
        ens = mg.TreeEnsemble(float(score), [], "logistic", spec, 0.1)
        ds = mg.Dataset(np.zeros((200, 1)), y, ("a",), "binary")
        g, h = mg.loss_grad_hess("logistic", y, np.full(200, float(score)))
        gap = max(gap, float(np.abs(mg.residuals(ds, ens) - (-g / h)).max()))
    ok = worst_rel <= 1e-6 and gap <= 1e-12
    _criterion(9, ok, f"gradient check rel err {worst_rel:.3e} <= 1e-6, "
                      f"pseudo-residual vs -g/h gap {gap:.3e} <= 1e-12")


def test_criterion_10_interaction_constraint_structure():
    ds = mg.generate_second_order(mg.SimConfig(n=N, sigma=SIGMA, seed=GEN_SEED))
    train, valid, _ = mg.split_dataset(ds, (0.5, 0.25, 0.25), SPLIT_SEED)
    spec = mg.ConstraintSpec((0, 0, 0, 0), MIXED_SETS)
    cfg = mg.BoostConfig(n_trees=300, max_depth=2, learning_rate=0.1,
                         reg_lambda=1.0, early_stopping_rounds=30)
    ens = mg.fit_boosted(train, valid, spec, cfg)
    used = set()
    for tree in ens.trees:
        for path, _ in tree.leaves():
            used.add(tuple(sorted({f for f, _, _ in path})))
    no_triple = (0, 1, 3) not in used and not any(len(u) > 2 for u in used)
    audit_clean = mg.audit_interaction_compliance(ens) == []

    tree = appendix_style_tree(3.0, 4.0, 5.0, 6.0)
    store = mg.parse_ensemble(
        mg.TreeEnsemble(0.0, [tree], "squared", spec, 1.0))
    by_key = {(t.j, t.k): t for t in store.interactions}
    parse_ok = (
        by_key[(1, 3)].cell_values.tolist() == [[3.0, 4.0], [0.0, 0.0]]
        and by_key[(0, 1)].cell_values.tolist() == [[0.0, 5.0], [0.0, 6.0]]
        and all(np.all(m.step_values == 0.0) for m in store.mains))
    ok = no_triple and audit_clean and parse_ok
    _criterion(10, ok, f"{len(ens.trees)} trees grown, no path splits "
                       "{0,1,3}; reference tree parses into the (1,3) and "
                       "(0,1) rectangles only")
