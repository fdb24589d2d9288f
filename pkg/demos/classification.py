# %% [markdown]
# # Classifying documents with their representations
#
# Two topics whose mean directions sit at cosine 0.5, short and uneven
# documents, and a linear classifier under stratified 10-fold
# cross-validation.

# %%
from spmtext.baselines import cbow_matrix
from spmtext.evaluation import EvalDataset, LinearConfig, kfold_cv, train_test_accuracy
from spmtext.model import SpmConfig, doc_repr, fit
from spmtext.synthetic import sample_two_topic_corpus

sc = sample_two_topic_corpus(10, 200, None, kappa0=50.0, kappa_n=10.0, cosine=0.5, seed=0,
                             length_range=(3, 40))
model, _ = fit(sc.corpus, SpmConfig())

# %%
features = {
    "spm mean-direction": doc_repr(model),
    "spm posterior-expectation": doc_repr(model, mode="posterior-expectation"),
    "cbow": cbow_matrix(sc.corpus),
}
for name, X in features.items():
    res = kfold_cv(EvalDataset(X, sc.labels), k=10, cfg=LinearConfig(), seed=0)
    print(f"{name:26s} {100 * res.mean_accuracy:6.2f}%")

# %% [markdown]
# A fixed split instead of folds; logistic loss this time.

# %%
X = doc_repr(model)
half = len(X) // 2
train = EvalDataset(X[:half], sc.labels[:half])
test = EvalDataset(X[half:], sc.labels[half:])
print("held-out accuracy:", train_test_accuracy(train, test, LinearConfig(loss="logistic")))
