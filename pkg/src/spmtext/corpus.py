"""Word-embedding tables, text preprocessing and bag-of-word-embedding corpora."""

import hashlib
import io
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .directional import ZERO_NORM_EPS, normalize_rows
from .errors import EmptyCorpus, EmptyDocument, ParseError

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[a-z]+")


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Unit-normalized word vectors indexed by a vocabulary.

    ``skipped_zero`` and ``skipped_duplicate`` count rows dropped while
    loading (zero vectors, repeated words).
    """

    words: tuple
    vectors: np.ndarray
    skipped_zero: int = 0
    skipped_duplicate: int = 0
    vocab: dict = field(init=False, repr=False)

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(self.words):
            raise ValueError("vectors must be an (M, K) array with one row per word")
        vectors = normalize_rows(vectors) if len(vectors) else vectors
        vectors.setflags(write=False)
        vocab = {w: i for i, w in enumerate(self.words)}
        if len(vocab) != len(self.words):
            raise ValueError("duplicate words in embedding table")
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "vocab", vocab)

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.vocab

    def fingerprint(self):
        """SHA-256 over the vocabulary and the exact vector bytes."""
        h = hashlib.sha256()
        h.update(f"{len(self.words)} {self.dim}\n".encode())
        for w in self.words:
            h.update(w.encode("utf-8") + b"\n")
        h.update(np.ascontiguousarray(self.vectors, dtype="<f8").tobytes())
        return h.hexdigest()


def _text_lines(source):
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif hasattr(source, "read"):
        data = source.read()
    else:
        data = source
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data.splitlines()


def load_embeddings(source, format="word2vec-text"):
    """Read a word2vec text-format embedding file.

    ``source`` is a path, a binary or text stream, or raw bytes.  The first
    line is ``"M K"``; each of the M following lines is a word and K floats.
    Zero vectors are skipped, as are repeated words (first one wins).
    """
    if format != "word2vec-text":
        raise ValueError(f"unsupported embedding format {format!r}")
    name = str(source) if isinstance(source, (str, Path)) else None
    lines = _text_lines(source)
    if not lines:
        raise ParseError("empty embedding file", line=1, source=name)
    header = lines[0].split()
    try:
        n_rows, dim = (int(t) for t in header)
    except ValueError:
        raise ParseError(f"bad header {lines[0]!r}, expected 'M K'", line=1, source=name) from None
    if n_rows < 0 or dim < 2:
        raise ParseError(f"bad header {lines[0]!r}", line=1, source=name)

    words, rows = [], []
    seen = set()
    n_zero = n_dup = n_read = 0
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.rstrip().split(" ")
        if parts == [""]:
            continue
        n_read += 1
        if len(parts) != dim + 1:
            raise ParseError(f"expected a word and {dim} values, got {len(parts) - 1} values",
                             line=lineno, source=name)
        try:
            vec = np.array([float(t) for t in parts[1:]])
        except ValueError:
            raise ParseError("non-numeric vector component", line=lineno, source=name) from None
        if not np.all(np.isfinite(vec)):
            raise ParseError("non-finite vector component", line=lineno, source=name)
        word = parts[0]
        if word in seen:
            n_dup += 1
            continue
        if np.linalg.norm(vec) <= ZERO_NORM_EPS:
            n_zero += 1
            continue
        seen.add(word)
        words.append(word)
        rows.append(vec)
    if n_read != n_rows:
        raise ParseError(f"header declares {n_rows} rows but {n_read} were found",
                         line=len(lines), source=name)
    if n_dup:
        logger.warning("skipped %d duplicate embedding rows", n_dup)
    if n_zero:
        logger.warning("skipped %d zero-norm embedding rows", n_zero)
    vectors = np.array(rows).reshape(len(rows), dim)
    return EmbeddingTable(tuple(words), vectors, skipped_zero=n_zero, skipped_duplicate=n_dup)


def write_embeddings(table, stream):
    """Write ``table`` in word2vec text format with 17 significant digits."""
    stream.write(f"{len(table)} {table.dim}\n")
    for word, vec in zip(table.words, table.vectors):
        stream.write(word + " " + " ".join(f"{v:.17g}" for v in vec) + "\n")


def embeddings_to_text(table):
    buf = io.StringIO()
    write_embeddings(table, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Text

def load_stopwords(source=None):
    """Stopword set from a one-word-per-line file; the bundled English list by default."""
    if source is None:
        text = resources.files("spmtext").joinpath("data/stopwords_en.txt").read_text("utf-8")
        lines = text.splitlines()
    else:
        lines = _text_lines(source)
    words = set()
    for line in lines:
        line = line.strip().lower()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def preprocess(text, stopwords=frozenset()):
    """Lowercase and split into runs of ``a-z``; everything else separates tokens."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if t not in stopwords]


@dataclass(frozen=True, eq=False)
class Document:
    id: str
    tokens: np.ndarray
    label: str | None = None

    @property
    def length(self):
        return len(self.tokens)


@dataclass
class IngestReport:
    n_input: int = 0
    excluded: list = field(default_factory=list)
    n_tokens: int = 0
    n_oov_tokens: int = 0

    @property
    def n_admitted(self):
        return self.n_input - len(self.excluded)


class Corpus:
    """An immutable list of documents over one embedding table.

    ``token_sums`` (N, K) and ``lengths`` (N,) are the only per-document
    statistics the spherical model needs.
    """

    def __init__(self, docs, table):
        docs = tuple(docs)
        if not docs:
            raise EmptyCorpus("corpus has no documents")
        for d in docs:
            if d.length == 0:
                raise EmptyDocument(f"document {d.id!r} has no tokens")
            if d.tokens.min() < 0 or d.tokens.max() >= len(table):
                raise ValueError(f"document {d.id!r} has token indices outside the table")
        self.docs = docs
        self.table = table
        sums = np.stack([doc_token_sum(d, table) for d in docs])
        sums.setflags(write=False)
        self.token_sums = sums
        lengths = np.array([d.length for d in docs], dtype=np.float64)
        lengths.setflags(write=False)
        self.lengths = lengths

    def __len__(self):
        return len(self.docs)

    def __iter__(self):
        return iter(self.docs)

    def __getitem__(self, i):
        return self.docs[i]

    @property
    def ids(self):
        return [d.id for d in self.docs]

    @property
    def labels(self):
        return [d.label for d in self.docs]

    @property
    def dim(self):
        return self.table.dim


def embed_tokens(words, table):
    """Vocabulary indices of the in-vocabulary words, multiplicity kept."""
    return np.array([table.vocab[w] for w in words if w in table.vocab], dtype=np.int64)


def build_corpus(raw, table, stopwords=frozenset()):
    """Build a corpus from ``(id, label, text)`` triples.

    Out-of-vocabulary words are dropped.  Documents left with no tokens are
    excluded and listed in the returned :class:`IngestReport`.
    """
    report = IngestReport()
    docs = []
    for doc_id, label, text in raw:
        report.n_input += 1
        words = preprocess(text, stopwords)
        tokens = embed_tokens(words, table)
        report.n_tokens += len(words)
        report.n_oov_tokens += len(words) - len(tokens)
        if len(tokens) == 0:
            report.excluded.append(doc_id)
            continue
        tokens.setflags(write=False)
        docs.append(Document(id=doc_id, tokens=tokens, label=label))
    if not docs:
        raise EmptyCorpus(f"none of the {report.n_input} documents has an in-vocabulary token")
    return Corpus(docs, table), report


def doc_token_sum(doc, table):
    """Sum of the document's token vectors (with multiplicity), not normalized."""
    return table.vectors[doc.tokens].sum(axis=0)


def read_corpus_tsv(source):
    """Parse ``id<TAB>label<TAB>text`` lines into ``(id, label, text)`` triples.

    Blank lines and lines starting with ``#`` are ignored; an empty label
    becomes ``None``.
    """
    name = str(source) if isinstance(source, (str, Path)) else None
    out = []
    for lineno, line in enumerate(_text_lines(source), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t", 2)
        if len(parts) != 3:
            raise ParseError("expected 'id<TAB>label<TAB>text'", line=lineno, source=name)
        doc_id, label, text = parts
        if not doc_id:
            raise ParseError("empty document id", line=lineno, source=name)
        out.append((doc_id, label or None, text))
    return out
