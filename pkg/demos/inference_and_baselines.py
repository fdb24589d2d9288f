# %% [markdown]
# # Inference for unseen documents, and the two baselines
#
# Train on the small bundled fixture (sports vs space vocabulary), then embed
# new text with the frozen model and compare with averaged word vectors and a
# two-component vMF mixture.

# %%
from pathlib import Path

import numpy as np

from spmtext.baselines import cbow_vector, movmf_doc_inputs, movmf_features, movmf_fit
from spmtext.corpus import Document, build_corpus, embed_tokens, load_embeddings, load_stopwords, preprocess, read_corpus_tsv
from spmtext.model import SpmConfig, fit, infer, state_repr

fixtures = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
table = load_embeddings(fixtures / "embeddings.txt")
stopwords = load_stopwords()
corpus, report = build_corpus(read_corpus_tsv(fixtures / "corpus.tsv"), table, stopwords)
print(len(corpus), "documents kept; excluded:", report.excluded)

# %%
model, trace = fit(corpus, SpmConfig(seed=0))
print("trained in", trace.iterations, "iterations")

# %% [markdown]
# A new document goes through the same preprocessing; words missing from the
# embedding table are dropped.

# %%
text = "The team scored a late goal and the match ended with the coach smiling"
tokens = embed_tokens(preprocess(text, stopwords), table)
doc = Document("new", tokens)
mu, kappa, _ = infer(model, doc, table)
print("inferred concentration:", round(kappa, 2))

sports = [d for d in range(len(corpus)) if corpus.labels[d] == "sports"]
space = [d for d in range(len(corpus)) if corpus.labels[d] == "space"]
print("mean cosine to sports docs:", float(np.mean(model.mu_prime[sports] @ mu)))
print("mean cosine to space docs :", float(np.mean(model.mu_prime[space] @ mu)))
print("representation norm:", float(np.linalg.norm(state_repr(mu[None], np.array([kappa]))[0])))

# %%
print("cBow vector norm:", float(np.linalg.norm(cbow_vector(doc, table))))

points = movmf_doc_inputs(corpus)
mix, mix_trace = movmf_fit(points, 2)
resp = movmf_features(mix, points)
for label in ("sports", "space"):
    rows = [i for i, lab in enumerate(corpus.labels) if lab == label]
    print(label, "mean responsibilities:", np.round(resp[rows].mean(axis=0), 3))
