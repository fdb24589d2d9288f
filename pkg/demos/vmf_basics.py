# %% [markdown]
# # von Mises-Fisher basics
#
# Sampling, density evaluation and concentration estimation on the sphere.

# %%
import numpy as np

from spmtext.directional import (
    VmfParams,
    bessel_ratio,
    estimate_kappa,
    log_norm_const,
    mean_resultant,
    normalize,
    sample_vmf,
    vmf_log_density,
)

K = 10
mu = normalize(np.arange(1.0, K + 1))

# %% [markdown]
# The expected cosine between a sample and the mean direction is the Bessel
# ratio A_K(kappa). Compare it to an empirical average.

# %%
for kappa in (1.0, 10.0, 100.0, 1000.0):
    x = sample_vmf(VmfParams(mu, kappa), 5000, seed=0)
    print(f"kappa={kappa:7.1f}  A_K={bessel_ratio(K, kappa):.4f}  mean cos={np.mean(x @ mu):.4f}")

# %% [markdown]
# Fitting a vMF to a sample: mean direction plus the closed-form kappa
# approximation from the mean resultant length.

# %%
x = sample_vmf(VmfParams(mu, 250.0), 2000, seed=1)
stats = mean_resultant(x)
kappa_hat = estimate_kappa(stats.rbar, K)
print("direction cosine:", float(stats.direction @ mu))
print("estimated kappa :", round(float(kappa_hat), 2))

# %%
# the normalizer stays finite far past where I_v(kappa) overflows
for kappa in (1e-3, 1.0, 1e3, 1e5):
    print(f"log c_{K}({kappa:g}) = {log_norm_const(K, kappa):.6f}")
print("log density at the mode:", vmf_log_density(mu, VmfParams(mu, 250.0)))
