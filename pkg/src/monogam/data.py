"""Dataset containers, synthetic benchmarks, splitting, binning, and CSV I/O.

All randomness goes through numpy's PCG64 generator with an explicit integer
seed, so identical seeds reproduce identical datasets across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RESPONSE_KINDS = ("continuous", "binary")


@dataclass(frozen=True)
class Dataset:
    """An n x p feature matrix with a continuous or {0,1} response.

    Arrays are frozen after construction; a Dataset is safe to share
    across threads.
    """

    features: np.ndarray
    response: np.ndarray
    feature_names: tuple
    response_kind: str

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        resp = np.ascontiguousarray(self.response, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValueError("features must be a non-empty 2-D matrix")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features must be finite")
        if resp.shape != (feats.shape[0],):
            raise ValueError("response length must match feature rows")
        if self.response_kind not in RESPONSE_KINDS:
            raise ValueError(f"unknown response_kind {self.response_kind!r}")
        if self.response_kind == "binary" and not np.isin(resp, (0.0, 1.0)).all():
            raise ValueError("binary response must contain only 0 and 1")
        names = tuple(self.feature_names)
        if len(names) != feats.shape[1]:
            raise ValueError("feature_names length must match feature columns")
        feats.flags.writeable = False
        resp.flags.writeable = False
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "response", resp)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def take(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.features[idx], self.response[idx],
                       self.feature_names, self.response_kind)


@dataclass(frozen=True)
class BinnedDataset:
    """Per-feature quantile bin assignments plus the cut values used."""

    bin_index: np.ndarray        # n x p ints, bin_index[i, j] in [0, n_bins[j])
    bin_edges: tuple             # per feature, ascending cut values

    def __post_init__(self):
        idx = np.ascontiguousarray(self.bin_index, dtype=np.int64)
        idx.flags.writeable = False
        object.__setattr__(self, "bin_index", idx)
        object.__setattr__(self, "bin_edges", tuple(
            np.asarray(e, dtype=np.float64) for e in self.bin_edges))

    @property
    def n_bins(self) -> tuple:
        return tuple(e.size + 1 for e in self.bin_edges)


@dataclass(frozen=True)
class SimConfig:
    """Size, noise level, seed, and response kind for the simulators."""

    n: int
    sigma: float = 2.0
    seed: int = 0
    response_kind: str = "continuous"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.response_kind not in RESPONSE_KINDS:
            raise ValueError(f"unknown response_kind {self.response_kind!r}")


FEATURE_NAMES_4 = ("x1", "x2", "x3", "x4")


def first_order_signal(X: np.ndarray) -> np.ndarray:
    """Additive four-variable signal, monotone increasing in every coordinate."""
    X = np.asarray(X, dtype=np.float64)
    x1, x2, x3, x4 = X[..., 0], X[..., 1], X[..., 2], X[..., 3]
    e = np.exp(6.0 * x4)
    return (0.5 * x1 + x2 * (x2 > 0) + x3 * (x3 < 0)
            + 0.5 * (e - 1.0) / (1.0 + e))


def second_order_signal(X: np.ndarray) -> np.ndarray:
    """max(x1, x2) plus a bilinear term in (x3, x4)."""
    X = np.asarray(X, dtype=np.float64)
    x1, x2, x3, x4 = X[..., 0], X[..., 1], X[..., 2], X[..., 3]
    return np.maximum(x1, x2) + x3 + x4 + x3 * x4


def _generate(cfg: SimConfig, signal) -> Dataset:
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    X = rng.uniform(-1.0, 1.0, size=(cfg.n, 4))
    f = signal(X)
    if cfg.response_kind == "continuous":
        y = f + rng.normal(0.0, cfg.sigma, size=cfg.n)
    else:
        prob = 1.0 / (1.0 + np.exp(-f))
        y = (rng.random(cfg.n) < prob).astype(np.float64)
    return Dataset(X, y, FEATURE_NAMES_4, cfg.response_kind)


def generate_first_order(cfg: SimConfig) -> Dataset:
    """Draw the additive benchmark: x ~ U(-1,1)^4, y = f(x) + noise.

    Continuous responses add N(0, sigma^2) noise; binary responses are
    Bernoulli with logit equal to the signal.
    """
    return _generate(cfg, first_order_signal)


def generate_second_order(cfg: SimConfig) -> Dataset:
    """Draw the two-interaction benchmark under the same sampling scheme."""
    return _generate(cfg, second_order_signal)


def split_dataset(ds: Dataset, fractions, seed: int):
    """Partition rows into (train, valid, test) by a seeded shuffle.

    Sizes are floor(n * fraction); leftover rows go to train so the
    partition is exhaustive and deterministic.
    """
    f_train, f_valid, f_test = (float(f) for f in fractions)
    if min(f_train, f_valid, f_test) <= 0:
        raise ValueError("fractions must be positive")
    if abs(f_train + f_valid + f_test - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    n = ds.n
    n_valid = math.floor(n * f_valid)
    n_test = math.floor(n * f_test)
    n_train = n - n_valid - n_test
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = rng.permutation(n)
    return (ds.take(perm[:n_train]),
            ds.take(perm[n_train:n_train + n_valid]),
            ds.take(perm[n_train + n_valid:]))


def bin_features(ds: Dataset, n_bins: int) -> BinnedDataset:
    """Quantile-bin every feature into at most ``n_bins`` bins.

    Edges sit at the lower-interpolation empirical quantiles k/B for
    k = 1..B-1; duplicate edges collapse silently, and edges that fail to
    separate any value are dropped, so a constant feature yields a single
    bin with an empty edge list. Assignment puts x <= edge in the lower
    bin, matching the tree routing rule.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    n, p = ds.features.shape
    ranks = np.arange(1, n_bins) / n_bins
    edges = []
    index = np.empty((n, p), dtype=np.int64)
    for j in range(p):
        col = ds.features[:, j]
        e = np.unique(np.quantile(col, ranks, method="lower"))
        e = e[e < col.max()]
        edges.append(e)
        index[:, j] = np.searchsorted(e, col, side="left")
    return BinnedDataset(index, tuple(edges))


def write_dataset_csv(ds: Dataset, path) -> None:
    """Write ``x1,...,xp,y`` rows with full-precision decimal values."""
    lines = [",".join(ds.feature_names) + ",y"]
    for row, y in zip(ds.features, ds.response):
        lines.append(",".join(repr(float(v)) for v in row) + "," + repr(float(y)))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_dataset_csv(path, response_kind: str | None = None) -> Dataset:
    """Read a dataset written by :func:`write_dataset_csv`.

    When ``response_kind`` is omitted it is inferred: a response containing
    only 0 and 1 is treated as binary.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        names = header.split(",")
        if len(names) < 2 or names[-1] != "y":
            raise ValueError(f"{path}: expected header 'x1,...,xp,y'")
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    X, y = body[:, :-1], body[:, -1]
    if response_kind is None:
        response_kind = "binary" if np.isin(y, (0.0, 1.0)).all() else "continuous"
    return Dataset(X, y, tuple(names[:-1]), response_kind)
