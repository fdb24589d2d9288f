# %% [markdown]
# # Fitting the spherical paragraph model on synthetic text
#
# Documents are directions drawn around a corpus-level mean; each "word" is a
# unit vector drawn around its document's direction. We fit the model and
# check what comes back.

# %%
import numpy as np

from spmtext.model import SpmConfig, doc_repr, fit
from spmtext.synthetic import sample_corpus

sc = sample_corpus(K=10, n_docs=500, doc_length=50, kappa0=50.0, kappa_n=200.0, seed=4)
corpus = sc.corpus
print(len(corpus), "documents,", corpus.dim, "dimensions")

# %%
iterations = []
model, trace = fit(corpus, SpmConfig(), callback=lambda it, m, value: iterations.append(value))
print("converged:", trace.converged, "after", trace.iterations, "iterations")
print("ELBO first/last:", round(trace.elbo[0], 2), round(trace.elbo[-1], 2))
print("ELBO never went down:", bool(np.all(np.diff(trace.elbo) >= -1e-6 * np.abs(trace.elbo[1:]))))

# %% [markdown]
# Recovered corpus direction and concentration, and agreement between each
# document's posterior direction and the direction it was generated from.

# %%
print("mu0 cosine :", float(model.mu0 @ sc.mu0))
print("kappa0     :", round(model.kappa0, 2), "(true 50)")
print("mean kappa_n:", round(float(model.doc_kappa.mean()), 1), "(true 200)")
reps = doc_repr(model)
print("mean doc cosine:", float(np.mean(np.sum(reps * sc.doc_vectors, axis=1))))

# %%
# posterior-expectation vectors are shorter: their length is A_K(kappa'_n)
lengths = np.linalg.norm(doc_repr(model, mode="posterior-expectation"), axis=1)
print("posterior mean lengths: min %.4f  max %.4f" % (lengths.min(), lengths.max()))
