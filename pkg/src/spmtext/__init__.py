"""Document vectors on the unit hypersphere from bags of word embeddings."""

__version__ = "0.1.0"

from .corpus import (  # noqa: E402
    Corpus,
    Document,
    EmbeddingTable,
    build_corpus,
    load_embeddings,
    load_stopwords,
    preprocess,
)
from .directional import (  # noqa: E402
    VmfParams,
    bessel_ratio,
    estimate_kappa,
    log_bessel_i,
    log_norm_const,
    mean_resultant,
    normalize,
    sample_vmf,
    vmf_log_density,
)
from .model import SpmConfig, SpmModel, doc_repr, elbo, fit, infer, load_model, save_model  # noqa: E402
