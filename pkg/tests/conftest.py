import numpy as np
import pytest

import monogam as mg


def small_split(generator, kind, n=2400, seed=11):
    ds = generator(mg.SimConfig(n=n, sigma=2.0, seed=seed, response_kind=kind))
    return mg.split_dataset(ds, (0.5, 0.25, 0.25), seed=seed + 1)


@pytest.fixture(scope="session")
def first_small():
    return small_split(mg.generate_first_order, "continuous")


@pytest.fixture(scope="session")
def second_small():
    return small_split(mg.generate_second_order, "continuous")


@pytest.fixture(scope="session")
def second_small_fit(second_small):
    """One constrained depth-2 fit with both true pairs, reused across tests."""
    train, valid, _ = second_small
    spec = mg.ConstraintSpec.from_pairs((1, 1, 1, 1), [(0, 1), (2, 3)])
    cfg = mg.BoostConfig(n_trees=300, max_depth=2, learning_rate=0.1,
                         reg_lambda=1.0, min_child_hessian=1.0,
                         early_stopping_rounds=30)
    return mg.fit_boosted(train, valid, spec, cfg)


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.PCG64(99))
