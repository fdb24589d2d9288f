"""File helpers: atomic writes and the representation-matrix TSV format.

Representation files hold one document per line::

    id<TAB>label<TAB>v1 v2 ... vK

with an empty label field for unlabeled documents and values written with
17 significant digits.
"""

import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ParseError


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and an atomic rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def format_repr_tsv(ids, labels, X):
    lines = []
    for doc_id, label, row in zip(ids, labels, np.asarray(X, dtype=np.float64)):
        values = " ".join(f"{v:.17g}" for v in row)
        lines.append(f"{doc_id}\t{'' if label is None else label}\t{values}")
    return "\n".join(lines) + ("\n" if lines else "")


def write_repr_tsv(path, ids, labels, X):
    atomic_write_text(path, format_repr_tsv(ids, labels, X))


def read_repr_tsv(path):
    """Return ``(ids, labels, X)``; labels are strings or ``None``."""
    ids, labels, rows = [], [], []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError("expected 'id<TAB>label<TAB>values'", line=lineno, source=str(path))
            try:
                row = [float(v) for v in parts[2].split()]
            except ValueError:
                raise ParseError("non-numeric value", line=lineno, source=str(path)) from None
            if width is None:
                width = len(row)
            if not row or len(row) != width:
                raise ParseError(f"expected {width} values, got {len(row)}", line=lineno,
                                 source=str(path))
            if not np.all(np.isfinite(row)):
                raise ParseError("non-finite value", line=lineno, source=str(path))
            ids.append(parts[0])
            labels.append(parts[1] or None)
            rows.append(row)
    X = np.array(rows, dtype=np.float64).reshape(len(rows), width or 0)
    return ids, labels, X
