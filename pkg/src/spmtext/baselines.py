"""Baseline representations: averaged word vectors and a vMF mixture."""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .directional import KAPPA_MAX, _check_dim, _log_norm_const, estimate_kappa, normalize
from .errors import DimensionMismatch, EmptyDocument, InvalidArgument

_RBAR_CEIL = np.nextafter(1.0, 0.0)
MIN_CLUSTER_MASS = 1e-8
MIN_KAPPA = 1e-3


def cbow_vector(doc, table):
    """Average of the document's unit word vectors, multiplicity included."""
    if doc.length == 0:
        raise EmptyDocument(f"document {doc.id!r} has no tokens")
    return table.vectors[doc.tokens].mean(axis=0)


def cbow_matrix(corpus):
    return corpus.token_sums / corpus.lengths[:, None]


@dataclass
class MovmfConfig:
    max_iters: int = 100
    tol: float = 1e-8
    seed: int = 0
    shared_kappa: bool = False


@dataclass
class MovmfModel:
    weights: np.ndarray
    means: np.ndarray
    kappas: np.ndarray

    def __post_init__(self):
        if abs(self.weights.sum() - 1.0) > 1e-12 or np.any(self.weights < 0):
            raise InvalidArgument("mixture weights must lie on the simplex")

    @property
    def n_clusters(self):
        return len(self.weights)

    @property
    def dim(self):
        return self.means.shape[1]


@dataclass
class MovmfTrace:
    loglik: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    reinitialized: list = field(default_factory=list)


def _log_joint(model, X):
    """log(pi_m) + log c(kappa_m) + kappa_m mu_m^T x_i, shape (n, M)."""
    K = model.dim
    with np.errstate(divide="ignore"):
        log_w = np.log(model.weights)
    return log_w + _log_norm_const(K, model.kappas) + (X @ model.means.T) * model.kappas


def _responsibilities(model, X):
    lj = _log_joint(model, X)
    norm = logsumexp(lj, axis=1, keepdims=True)
    return np.exp(lj - norm), float(norm.sum())


def _farthest_point_init(X, M, rng):
    """Seeded farthest-point sweep over cosine similarity."""
    chosen = [int(rng.integers(len(X)))]
    best_sim = X @ X[chosen[0]]
    for _ in range(1, M):
        sim = best_sim.copy()
        sim[chosen] = np.inf
        nxt = int(np.argmin(sim))
        chosen.append(nxt)
        best_sim = np.maximum(best_sim, X @ X[nxt])
    return X[chosen].copy()


def _m_step(X, resp, shared_kappa):
    n, K = X.shape
    mass = resp.sum(axis=0)
    weights = mass / n
    sums = resp.T @ X
    lengths = np.linalg.norm(sums, axis=1)
    means = sums / np.where(lengths > 0, lengths, 1.0)[:, None]
    if shared_kappa:
        rbar = np.full(len(mass), lengths.sum() / n)
    else:
        rbar = lengths / np.where(mass > 0, mass, 1.0)
    kappas = np.clip(estimate_kappa(np.clip(rbar, 0.0, _RBAR_CEIL), K), MIN_KAPPA, KAPPA_MAX)
    return weights / weights.sum(), means, kappas, mass, lengths


def _keep_better_kappa(K, new, old, mass, lengths, shared_kappa):
    """Per component, whichever of the estimated and the previous kappa scores higher
    on mass * log c(kappa) + kappa * |weighted resultant|.

    The closed-form estimate is only approximately optimal; this guard keeps
    every M-step from lowering the expected complete log-likelihood, which
    is what makes the mixture log-likelihood non-decreasing.
    """
    if shared_kappa:
        mass, lengths = mass.sum(), lengths.sum()
    score_new = mass * _log_norm_const(K, new) + new * lengths
    score_old = mass * _log_norm_const(K, old) + old * lengths
    return np.where(score_old > score_new, old, new)


def movmf_fit(points, M, cfg=None):
    """Soft-assignment EM for a mixture of ``M`` vMF components.

    Returns ``(model, trace)``.  ``trace.loglik[t]`` is the data
    log-likelihood under the parameters of iteration t.  A component whose
    responsibility mass falls below 1e-8 gets its mean reset to the point
    least similar to all current means; such events are listed in
    ``trace.reinitialized``.
    """
    cfg = cfg or MovmfConfig()
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidArgument("points must be an (n, K) array")
    _check_dim(X.shape[1])
    if M < 1 or len(X) < M:
        raise InvalidArgument(f"need M >= 1 and at least M points (M={M}, n={len(X)})")
    rng = np.random.default_rng(cfg.seed)

    # hard assignment to the farthest-point seeds, then one M-step
    seeds = _farthest_point_init(X, M, rng)
    hard = np.zeros((len(X), M))
    hard[np.arange(len(X)), np.argmax(X @ seeds.T, axis=1)] = 1.0
    weights, means, kappas, mass, _ = _m_step(X, hard, cfg.shared_kappa)
    means[mass == 0] = seeds[mass == 0]
    weights = np.maximum(weights, MIN_CLUSTER_MASS)
    model = MovmfModel(weights / weights.sum(), means, kappas)

    trace = MovmfTrace()
    for it in range(cfg.max_iters):
        resp, ll = _responsibilities(model, X)
        trace.loglik.append(ll)
        trace.iterations = it + 1
        if it > 0 and abs(ll - trace.loglik[-2]) <= cfg.tol * abs(trace.loglik[-2]):
            trace.converged = True
            break
        weights, means, kappas, mass, lengths = _m_step(X, resp, cfg.shared_kappa)
        kappas = _keep_better_kappa(X.shape[1], kappas, model.kappas, mass, lengths, cfg.shared_kappa)
        dead = np.flatnonzero(mass < MIN_CLUSTER_MASS)
        for m in dead:
            alive = np.delete(np.arange(M), m)
            sim = (X @ means[alive].T).max(axis=1) if len(alive) else np.zeros(len(X))
            means[m] = X[int(np.argmin(sim))]
            weights[m] = 1.0 / len(X)
            kappas[m] = np.median(kappas[alive]) if len(alive) else 1.0
            trace.reinitialized.append((it + 1, int(m)))
        model = MovmfModel(weights / weights.sum(), means, kappas)
    return model, trace


def movmf_assign(model, x):
    """``(cluster index, responsibilities)`` for one point; ties go to the lowest index."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise DimensionMismatch(f"point has shape {x.shape}, model dimension {model.dim}")
    resp, _ = _responsibilities(model, x[None, :])
    resp = resp[0] / resp[0].sum()
    return int(np.argmax(resp)), resp


def movmf_features(model, X):
    """Posterior responsibilities for every row of ``X``, shape (n, M)."""
    resp, _ = _responsibilities(model, np.asarray(X, dtype=np.float64))
    return resp


def movmf_doc_inputs(corpus):
    """Normalized averaged word vectors; the mixture's view of each document."""
    return np.stack([normalize(v) for v in cbow_matrix(corpus)])
