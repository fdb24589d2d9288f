"""Linear classification and stratified cross-validation of document vectors.

The classifier is a one-vs-rest linear model trained by seeded mini-batch
stochastic subgradient descent on an L2-regularized hinge or logistic loss.
Training is a deterministic function of the data and the config.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch, InvalidArgument, LengthMismatch, SingleClass, TooFewExamples

THREADS_ENV = "SPMTEXT_THREADS"


@dataclass
class EvalDataset:
    X: np.ndarray
    y: np.ndarray
    classes: list = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise InvalidArgument("X must be (n, K) with one label per row")
        if self.X.shape[0] < 2:
            raise TooFewExamples("need at least 2 examples")
        if not np.all(np.isfinite(self.X)):
            raise InvalidArgument("X contains NaN or Inf")
        if not self.classes:
            self.classes = list(range(int(self.y.max()) + 1))
        if self.y.min() < 0 or self.y.max() >= len(self.classes):
            raise InvalidArgument("labels must lie in [0, n_classes)")
        if len(np.unique(self.y)) != len(self.classes):
            raise InvalidArgument("every class needs at least one example")

    @classmethod
    def from_labels(cls, X, labels):
        """Encode arbitrary labels as 0..C-1 (numeric order if all labels are integers)."""
        if any(lab is None for lab in labels):
            raise InvalidArgument("every row needs a label for evaluation")
        uniq = set(labels)
        try:
            classes = sorted(uniq, key=lambda s: int(s))
        except (TypeError, ValueError):
            classes = sorted(uniq, key=str)
        code = {c: i for i, c in enumerate(classes)}
        return cls(X, np.array([code[lab] for lab in labels]), classes=classes)

    def subset(self, rows):
        """Rows of the dataset keeping the full class coding (classes may be absent)."""
        sub = object.__new__(EvalDataset)
        sub.X, sub.y, sub.classes = self.X[rows], self.y[rows], self.classes
        return sub

    @property
    def n_classes(self):
        return len(self.classes)

    def __len__(self):
        return len(self.y)


@dataclass(frozen=True)
class LinearConfig:
    loss: str = "hinge"
    l2: float = 1e-4
    epochs: int = 30
    lr0: float = 0.5
    batch_size: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.loss not in ("hinge", "logistic"):
            raise InvalidArgument(f"loss must be 'hinge' or 'logistic', got {self.loss!r}")
        if self.l2 < 0 or self.epochs < 1 or self.lr0 <= 0 or self.batch_size < 1:
            raise InvalidArgument("invalid linear classifier settings")


@dataclass
class LinearModel:
    weights: np.ndarray   # (C, K)
    bias: np.ndarray      # (C,)

    def scores(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.size == 0:
            return np.zeros((0, len(self.bias)))
        if X.ndim != 2 or X.shape[1] != self.weights.shape[1]:
            raise DimensionMismatch(f"expected {self.weights.shape[1]} features, got shape {X.shape}")
        return X @ self.weights.T + self.bias

    def scaled(self, c):
        """The model with its weights multiplied by ``c``."""
        return LinearModel(self.weights * c, self.bias.copy())


def train_linear(data, cfg=None, n_classes=None):
    """Fit a one-vs-rest linear model on ``data``.

    Uses the step size lr0 / (1 + lr0 * l2 * t) and returns the average of
    the iterates from the second epoch on (the last iterate if there is only
    one epoch).
    """
    cfg = cfg or LinearConfig()
    X, y = data.X, data.y
    C = n_classes or data.n_classes
    if len(np.unique(y)) < 2:
        raise SingleClass("training data contains a single class")
    n, K = X.shape
    targets = np.where(y[:, None] == np.arange(C)[None, :], 1.0, -1.0)
    W = np.zeros((C, K))
    b = np.zeros(C)
    W_avg, b_avg, n_avg = np.zeros_like(W), np.zeros_like(b), 0
    rng = np.random.default_rng(cfg.seed)
    t = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb, yb = X[idx], targets[idx]
            margin = yb * (xb @ W.T + b)
            if cfg.loss == "hinge":
                g = np.where(margin < 1.0, -yb, 0.0)
            else:
                g = -yb * expit(-margin)
            lr = cfg.lr0 / (1.0 + cfg.lr0 * cfg.l2 * t)
            W *= 1.0 - lr * cfg.l2
            W -= lr * (g.T @ xb) / len(idx)
            b -= lr * g.mean(axis=0)
            t += 1
            if epoch >= 1:
                n_avg += 1
                W_avg += (W - W_avg) / n_avg
                b_avg += (b - b_avg) / n_avg
    if n_avg:
        W, b = W_avg, b_avg
    return LinearModel(W, b)


def predict(model, X):
    """Class with the highest score; exact ties go to the lowest class index."""
    return np.argmax(model.scores(X), axis=1) if np.size(X) else np.zeros(0, dtype=np.int64)


def accuracy(pred, gold):
    pred, gold = np.asarray(pred), np.asarray(gold)
    if pred.shape != gold.shape:
        raise LengthMismatch(f"{pred.shape[0] if pred.ndim else 0} predictions "
                             f"for {gold.shape[0] if gold.ndim else 0} labels")
    if pred.size == 0:
        raise LengthMismatch("accuracy of an empty prediction set is undefined")
    return float(np.mean(pred == gold))


def stratified_folds(y, k, seed):
    """Fold index for every example.

    Each class is shuffled and dealt round-robin, continuing the deal across
    classes, so fold sizes differ by at most one overall and per class.
    """
    y = np.asarray(y)
    if k < 2:
        raise InvalidArgument("k must be at least 2")
    if len(y) < k:
        raise TooFewExamples(f"{len(y)} examples cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    dealt = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in np.unique(y)])
    folds = np.empty(len(y), dtype=np.int64)
    folds[dealt] = np.arange(len(y)) % k
    return folds


@dataclass
class CVResult:
    mean_accuracy: float
    fold_accuracies: list
    folds: np.ndarray


def _n_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def kfold_cv(data, k=10, cfg=None, seed=0):
    """Stratified k-fold accuracy; fold f trains with seed ``cfg.seed ^ f``."""
    cfg = cfg or LinearConfig()
    if k < 2:
        raise InvalidArgument("k must be at least 2")
    if len(data) < k:
        raise TooFewExamples(f"{len(data)} examples cannot fill {k} folds")
    folds = stratified_folds(data.y, k, seed)

    def run(f):
        train = folds != f
        model = train_linear(data.subset(train), replace(cfg, seed=cfg.seed ^ f), n_classes=data.n_classes)
        return accuracy(predict(model, data.X[~train]), data.y[~train])

    with ThreadPoolExecutor(max_workers=_n_threads()) as pool:
        accs = list(pool.map(run, range(k)))
    return CVResult(float(np.mean(accs)), accs, folds)


def train_test_accuracy(train, test, cfg=None):
    """Accuracy on ``test`` of a model fitted on ``train`` (shared class coding)."""
    model = train_linear(train, cfg, n_classes=max(train.n_classes, test.n_classes))
    return accuracy(predict(model, test.X), test.y)
