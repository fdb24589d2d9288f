"""Synthetic corpora drawn from the spherical paragraph generative process.

Every sampled word vector becomes its own vocabulary entry, so the resulting
corpus reproduces the sampled vectors exactly.
"""

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Document, EmbeddingTable
from .directional import VmfParams, normalize, sample_vmf


@dataclass
class SyntheticCorpus:
    corpus: Corpus
    doc_vectors: np.ndarray
    mu0: np.ndarray
    labels: np.ndarray


def random_direction(K, rng):
    return normalize(rng.standard_normal(K))


def corpus_from_word_vectors(word_vectors, labels=None, prefix="doc"):
    """Build a corpus from a list of (l_n, K) arrays of unit word vectors."""
    words, rows, docs = [], [], []
    offset = 0
    for n, wv in enumerate(word_vectors):
        wv = np.asarray(wv, dtype=np.float64)
        tokens = np.arange(offset, offset + len(wv))
        offset += len(wv)
        words.extend(f"w{i}" for i in tokens)
        rows.append(wv)
        label = None if labels is None else str(labels[n])
        docs.append(Document(id=f"{prefix}{n}", tokens=tokens, label=label))
    table = EmbeddingTable(tuple(words), np.concatenate(rows))
    return Corpus(docs, table)


def sample_corpus(K, n_docs, doc_length, kappa0, kappa_n, seed, mu0=None):
    """Sample documents from vMF(mu0, kappa0) and words from vMF(d_n, kappa_n)."""
    rng = np.random.default_rng(seed)
    mu0 = random_direction(K, rng) if mu0 is None else normalize(mu0)
    docs = sample_vmf(VmfParams(mu0, kappa0), n_docs, seed=rng.integers(2**63))
    word_vectors = [sample_vmf(VmfParams(d, kappa_n), doc_length, seed=rng.integers(2**63))
                    for d in docs]
    corpus = corpus_from_word_vectors(word_vectors)
    return SyntheticCorpus(corpus, docs, mu0, np.zeros(n_docs, dtype=int))


def sample_uniform_corpus(K, n_docs, doc_length, seed):
    """Documents whose word vectors are uniform on the sphere."""
    rng = np.random.default_rng(seed)
    word_vectors = []
    for _ in range(n_docs):
        g = rng.standard_normal((doc_length, K))
        word_vectors.append(g / np.linalg.norm(g, axis=1, keepdims=True))
    return corpus_from_word_vectors(word_vectors)


def sample_two_topic_corpus(K, n_per_class, doc_length, kappa0, kappa_n, cosine, seed,
                            length_range=None):
    """Two classes whose document priors have mean directions at the given cosine.

    ``length_range=(lo, hi)`` draws document lengths uniformly instead of
    using a fixed ``doc_length``.
    """
    rng = np.random.default_rng(seed)
    a = random_direction(K, rng)
    r = rng.standard_normal(K)
    r -= (r @ a) * a
    r = normalize(r)
    b = cosine * a + np.sqrt(1.0 - cosine**2) * r
    word_vectors, labels, doc_vectors = [], [], []
    for label, mu in enumerate((a, b)):
        ds = sample_vmf(VmfParams(mu, kappa0), n_per_class, seed=rng.integers(2**63))
        for d in ds:
            length = doc_length if length_range is None else int(rng.integers(*length_range))
            word_vectors.append(sample_vmf(VmfParams(d, kappa_n), length,
                                           seed=rng.integers(2**63)))
            labels.append(label)
            doc_vectors.append(d)
    order = rng.permutation(len(labels))
    word_vectors = [word_vectors[i] for i in order]
    labels = np.array(labels)[order]
    corpus = corpus_from_word_vectors(word_vectors, labels=labels)
    return SyntheticCorpus(corpus, np.array(doc_vectors)[order], normalize(a + b), labels)
