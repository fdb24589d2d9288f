"""Spherical paragraph model: variational EM over von Mises-Fisher distributions.

Generative story, for every document n::

    d_n   ~ vMF(mu0, kappa0)          document direction
    w_i^n ~ vMF(d_n, kappa_n)         each (unit) word vector of the document

The variational posterior of every d_n is itself a vMF(mu'_n, kappa'_n).
Because every quantity enters through dot products, the corpus is summarized
by per-document token sums S_n = sum_i w_i^n and lengths l_n.

The evidence lower bound is a sum of per-document terms::

    log c(kappa0)  + kappa0  mu0^T E_n
  + l_n log c(kappa_n) + kappa_n S_n^T E_n
  - log c(kappa'_n) - kappa'_n A(kappa'_n)

with E_n = A(kappa'_n) mu'_n the posterior mean and c, A the vMF normalizer
and Bessel ratio in dimension K.
"""

import json
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from .directional import (
    KAPPA_MAX,
    ZERO_NORM_EPS,
    _bessel_ratio,
    _log_norm_const,
    estimate_kappa,
)
from .errors import (
    DegenerateResultant,
    DimensionMismatch,
    EmptyCorpus,
    EmptyDocument,
    FingerprintMismatch,
    InvalidArgument,
    ParseError,
)

KAPPA_MIN = 1e-3
MODEL_FORMAT = "spmtext-model"
MODEL_VERSION = 1
REPR_MODES = ("mean-direction", "posterior-expectation")

_RBAR_CEIL = np.nextafter(1.0, 0.0)


@dataclass
class SpmConfig:
    """Training and inference settings.

    ``keyed_init`` seeds each document's initial state from (seed, doc id)
    instead of its position, so the fit does not depend on document order.
    """

    K: int | None = None
    kappa0_init: float = 1500.0
    kappa_n_init_range: tuple = (1000.0, 1500.0)
    max_iters: int = 100
    tol: float = 1e-5
    seed: int = 0
    infer_rounds: int = 10
    keyed_init: bool = False

    def __post_init__(self):
        lo, hi = self.kappa_n_init_range
        self.kappa_n_init_range = (float(lo), float(hi))
        if not 0 < lo <= hi <= KAPPA_MAX:
            raise InvalidArgument(f"kappa_n_init_range must satisfy 0 < lo <= hi, got {(lo, hi)}")
        if not 0 < self.kappa0_init <= KAPPA_MAX:
            raise InvalidArgument("kappa0_init must be positive")
        if self.tol <= 0:
            raise InvalidArgument("tol must be positive")
        if self.max_iters < 1:
            raise InvalidArgument("max_iters must be at least 1")
        if self.infer_rounds < 1:
            raise InvalidArgument("infer_rounds must be at least 1")
        if self.K is not None and self.K < 2:
            raise InvalidArgument("K must be at least 2")

    def to_dict(self):
        d = asdict(self)
        d["kappa_n_init_range"] = list(self.kappa_n_init_range)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["kappa_n_init_range"] = tuple(d["kappa_n_init_range"])
        return cls(**d)


@dataclass
class SpmModel:
    """Fitted (or initialized) model state.

    Per-document arrays are aligned with ``doc_ids``.
    """

    mu0: np.ndarray
    kappa0: float
    doc_kappa: np.ndarray
    mu_prime: np.ndarray
    kappa_prime: np.ndarray
    config: SpmConfig
    fingerprint: str = ""
    doc_ids: list = field(default_factory=list)

    @property
    def dim(self):
        return self.mu0.shape[0]

    @property
    def n_docs(self):
        return self.mu_prime.shape[0]

    def copy(self):
        return SpmModel(self.mu0.copy(), self.kappa0, self.doc_kappa.copy(),
                        self.mu_prime.copy(), self.kappa_prime.copy(),
                        SpmConfig.from_dict(self.config.to_dict()),
                        self.fingerprint, list(self.doc_ids))


@dataclass
class FitTrace:
    elbo: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    warnings: list = field(default_factory=list)


def _unit_rows(m):
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def init_model(corpus, cfg):
    """Random initial state.

    Document directions are normalized draws from U[-0.5, 0.5]^K, the
    per-document concentrations come from U[lo, hi] and also seed kappa'_n,
    kappa0 starts at ``cfg.kappa0_init`` and mu0 is the mean direction of the
    initial document directions.
    """
    if len(corpus) == 0:
        raise EmptyCorpus("cannot initialize a model on an empty corpus")
    K = corpus.dim
    if cfg.K is not None and cfg.K != K:
        raise DimensionMismatch(f"config K={cfg.K} but embeddings have dimension {K}")
    N = len(corpus)
    lo, hi = cfg.kappa_n_init_range
    if cfg.keyed_init:
        raw = np.empty((N, K))
        doc_kappa = np.empty(N)
        for n, doc_id in enumerate(corpus.ids):
            rng = np.random.default_rng([cfg.seed, zlib.crc32(doc_id.encode("utf-8"))])
            raw[n] = rng.uniform(-0.5, 0.5, size=K)
            doc_kappa[n] = rng.uniform(lo, hi)
    else:
        rng = np.random.default_rng(cfg.seed)
        raw = rng.uniform(-0.5, 0.5, size=(N, K))
        doc_kappa = rng.uniform(lo, hi, size=N)
    mu_prime = _unit_rows(raw)
    total = mu_prime.sum(axis=0)
    norm = np.linalg.norm(total)
    if norm > ZERO_NORM_EPS:
        mu0 = total / norm
    else:
        mu0 = np.zeros(K)
        mu0[0] = 1.0
    if N == 1:
        mu0 = mu_prime[0].copy()
    return SpmModel(
        mu0=mu0,
        kappa0=float(cfg.kappa0_init),
        doc_kappa=doc_kappa,
        mu_prime=mu_prime,
        kappa_prime=doc_kappa.copy(),
        config=cfg,
        fingerprint=corpus.table.fingerprint(),
        doc_ids=corpus.ids,
    )


# ---------------------------------------------------------------------------
# E-step

def _e_step(mu0, kappa0, doc_kappa, token_sums):
    resultant = kappa0 * mu0 + doc_kappa[:, None] * token_sums
    norms = np.linalg.norm(resultant, axis=1)
    if np.any(norms <= ZERO_NORM_EPS):
        bad = int(np.flatnonzero(norms <= ZERO_NORM_EPS)[0])
        raise DegenerateResultant(f"document {bad}: prior and word resultant cancel")
    return resultant / norms[:, None], np.minimum(norms, KAPPA_MAX)


def e_step_doc(model, token_sum, kappa_doc):
    """Closed-form variational update for one document.

    ``token_sum`` is the document's summed word vectors.  Returns
    ``(mu_prime, kappa_prime)``: the direction and length of
    kappa0 mu0 + kappa_doc * token_sum.
    """
    token_sum = np.asarray(token_sum, dtype=np.float64)
    if token_sum.shape != (model.dim,):
        raise DimensionMismatch(f"token sum has shape {token_sum.shape}, model K={model.dim}")
    mu, kappa = _e_step(model.mu0, model.kappa0, np.array([float(kappa_doc)]), token_sum[None, :])
    return mu[0], float(kappa[0])


def e_step(model, corpus):
    """Variational update for every document; returns (mu_prime, kappa_prime) arrays."""
    return _e_step(model.mu0, model.kappa0, model.doc_kappa, corpus.token_sums)


# ---------------------------------------------------------------------------
# Posterior means, M-step, ELBO

def _posterior_means(K, mu_prime, kappa_prime):
    return _bessel_ratio(K, kappa_prime)[:, None] * mu_prime


def posterior_mean(model, n):
    """E_q[d_n] = A_K(kappa'_n) mu'_n."""
    return _posterior_means(model.dim, model.mu_prime[n:n + 1], model.kappa_prime[n:n + 1])[0]


def posterior_means(model):
    return _posterior_means(model.dim, model.mu_prime, model.kappa_prime)


def _kappa_from_rbar(rbar, K):
    rbar = np.clip(rbar, 0.0, _RBAR_CEIL)
    return np.clip(estimate_kappa(rbar, K), KAPPA_MIN, KAPPA_MAX)


def _doc_kappa_update(K, means, token_sums, lengths):
    rbar = np.einsum("nk,nk->n", means, token_sums) / lengths
    return _kappa_from_rbar(rbar, K)


@dataclass
class MStepResult:
    mu0: np.ndarray
    kappa0: float
    doc_kappa: np.ndarray
    degenerate: bool = False


def m_step(model, corpus):
    """Closed-form updates of mu0, kappa0 and every kappa_n given q.

    Concentrations are clamped to [KAPPA_MIN, KAPPA_MAX]; a negative per-doc
    resultant is treated as zero.  If the posterior means cancel, mu0 is kept
    and ``degenerate`` is set on the result.
    """
    K = model.dim
    means = posterior_means(model)
    total = means.sum(axis=0)
    norm = np.linalg.norm(total)
    degenerate = norm <= ZERO_NORM_EPS
    mu0 = model.mu0.copy() if degenerate else total / norm
    kappa0 = float(_kappa_from_rbar(np.array([norm / len(means)]), K)[0])
    doc_kappa = _doc_kappa_update(K, means, corpus.token_sums, corpus.lengths)
    return MStepResult(mu0, kappa0, doc_kappa, bool(degenerate))


def elbo_terms(K, mu0, kappa0, doc_kappa, mu_prime, kappa_prime, token_sums, lengths):
    """Per-document contributions to the evidence lower bound."""
    ratio = _bessel_ratio(K, kappa_prime)
    means = ratio[:, None] * mu_prime
    prior = _log_norm_const(K, np.array([kappa0]))[0] + kappa0 * (means @ mu0)
    words = lengths * _log_norm_const(K, doc_kappa) + doc_kappa * np.einsum(
        "nk,nk->n", token_sums, means)
    entropy = _log_norm_const(K, kappa_prime) + kappa_prime * ratio
    return prior + words - entropy


def elbo(model, corpus):
    return float(np.sum(elbo_terms(model.dim, model.mu0, model.kappa0, model.doc_kappa,
                                   model.mu_prime, model.kappa_prime,
                                   corpus.token_sums, corpus.lengths)))


def check_corpus(model, corpus):
    if corpus.dim != model.dim:
        raise DimensionMismatch(f"corpus dimension {corpus.dim} != model dimension {model.dim}")
    fp = corpus.table.fingerprint()
    if model.fingerprint and fp != model.fingerprint:
        raise FingerprintMismatch(
            f"model was trained with embeddings {model.fingerprint}, corpus uses {fp}")


def fit(corpus, cfg=None, callback=None):
    """Variational EM until the relative ELBO change drops below ``cfg.tol``.

    Returns ``(model, trace)``; ``trace.elbo[0]`` is the bound at
    initialization and one entry is appended per EM iteration.
    ``callback(iteration, model, elbo)`` is called after every iteration.
    """
    cfg = cfg or SpmConfig()
    model = init_model(corpus, cfg)
    trace = FitTrace(elbo=[elbo(model, corpus)])
    for it in range(1, cfg.max_iters + 1):
        model.mu_prime, model.kappa_prime = e_step(model, corpus)
        upd = m_step(model, corpus)
        if upd.degenerate:
            trace.warnings.append(f"iteration {it}: posterior means cancel, mu0 kept")
        model.mu0, model.kappa0, model.doc_kappa = upd.mu0, upd.kappa0, upd.doc_kappa
        value = elbo(model, corpus)
        prev = trace.elbo[-1]
        trace.elbo.append(value)
        trace.iterations = it
        if callback is not None:
            callback(it, model, value)
        if abs(value - prev) <= cfg.tol * abs(prev):
            trace.converged = True
            break
    return model, trace


def refresh_variational(model, corpus):
    """One extra E-step so every (mu'_n, kappa'_n) matches the final parameters.

    ``fit`` ends on an M-step; exported training representations should come
    from the same coordinate-ascent state that :func:`infer` converges to.
    """
    model.mu_prime, model.kappa_prime = e_step(model, corpus)
    return model


# ---------------------------------------------------------------------------
# Held-out inference and export

def _infer(model, token_sums, lengths):
    """Document-local coordinate ascent with mu0 and kappa0 frozen."""
    K = model.dim
    kappa_doc = np.full(len(lengths), float(np.mean(model.doc_kappa)))
    for _ in range(model.config.infer_rounds):
        mu, kappa = _e_step(model.mu0, model.kappa0, kappa_doc, token_sums)
        kappa_doc = _doc_kappa_update(K, _posterior_means(K, mu, kappa), token_sums, lengths)
    mu, kappa = _e_step(model.mu0, model.kappa0, kappa_doc, token_sums)
    return mu, kappa, kappa_doc


def infer(model, doc, table):
    """Infer ``(mu_prime, kappa_prime, kappa_doc)`` for a document outside the training set.

    The document-level concentration starts at the mean training value and
    alternates with the variational update ``config.infer_rounds`` times.
    """
    if table.fingerprint() != model.fingerprint:
        raise FingerprintMismatch(
            f"model was trained with embeddings {model.fingerprint}, got {table.fingerprint()}")
    if doc.length == 0:
        raise EmptyDocument(f"document {doc.id!r} has no in-vocabulary tokens")
    token_sum = table.vectors[doc.tokens].sum(axis=0)
    mu, kappa, kappa_doc = _infer(model, token_sum[None, :], np.array([float(doc.length)]))
    return mu[0], float(kappa[0]), float(kappa_doc[0])


def infer_corpus(model, corpus):
    """Vectorized :func:`infer` for every document of ``corpus``."""
    check_corpus(model, corpus)
    return _infer(model, corpus.token_sums, corpus.lengths)


def state_repr(mu_prime, kappa_prime, mode="mean-direction"):
    """Representation vectors from variational parameters (rows are documents)."""
    mu_prime = np.asarray(mu_prime, dtype=np.float64)
    if mode == "mean-direction":
        return mu_prime.copy()
    if mode == "posterior-expectation":
        single = mu_prime.ndim == 1
        mu2 = np.atleast_2d(mu_prime)
        out = _posterior_means(mu2.shape[1], mu2, np.atleast_1d(np.asarray(kappa_prime, float)))
        return out[0] if single else out
    raise InvalidArgument(f"unknown representation mode {mode!r}; choose from {REPR_MODES}")


def doc_repr(model, n=None, mode="mean-direction"):
    """Representation of training document ``n`` (all documents if ``n`` is None)."""
    if n is None:
        return state_repr(model.mu_prime, model.kappa_prime, mode)
    return state_repr(model.mu_prime[n], model.kappa_prime[n], mode)


# ---------------------------------------------------------------------------
# Model files

def model_to_json(model):
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "K": model.dim,
        "N": model.n_docs,
        "embedding_fingerprint": model.fingerprint,
        "config": model.config.to_dict(),
        "doc_ids": list(model.doc_ids),
        "mu0": model.mu0.tolist(),
        "kappa0": float(model.kappa0),
        "doc_kappa": model.doc_kappa.tolist(),
        "kappa_prime": model.kappa_prime.tolist(),
        "mu_prime": model.mu_prime.tolist(),
    }
    return json.dumps(payload, separators=(",", ":")) + "\n"


def model_from_json(text, source=None):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"model file is not valid JSON: {exc.msg}", line=exc.lineno,
                         source=source) from None
    if d.get("format") != MODEL_FORMAT:
        raise ParseError("not an spmtext model file", source=source)
    if d.get("version") != MODEL_VERSION:
        raise ParseError(f"unsupported model version {d.get('version')!r}", source=source)
    K, N = d["K"], d["N"]
    model = SpmModel(
        mu0=np.array(d["mu0"], dtype=np.float64),
        kappa0=float(d["kappa0"]),
        doc_kappa=np.array(d["doc_kappa"], dtype=np.float64),
        mu_prime=np.array(d["mu_prime"], dtype=np.float64).reshape(N, K),
        kappa_prime=np.array(d["kappa_prime"], dtype=np.float64),
        config=SpmConfig.from_dict(d["config"]),
        fingerprint=d["embedding_fingerprint"],
        doc_ids=list(d["doc_ids"]),
    )
    if model.mu0.shape != (K,) or model.doc_kappa.shape != (N,) or model.kappa_prime.shape != (N,):
        raise ParseError("model arrays do not match the header shape", source=source)
    return model


def save_model(model, path):
    from .io import atomic_write_text

    atomic_write_text(path, model_to_json(model))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_json(fh.read(), source=str(path))
