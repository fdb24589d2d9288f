"""Von Mises-Fisher primitives on the unit hypersphere.

Everything Bessel-related is evaluated in log space or as a ratio of
exponentially scaled values, so concentrations in the thousands (typical for
word-embedding text models) never overflow.

Unit vectors are plain 1-d ``numpy`` arrays; :func:`check_unit` enforces the
norm invariant where it matters.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegenerateResultant, DimensionMismatch, InvalidArgument, ZeroNorm

KAPPA_MAX = 1e6
ZERO_NORM_EPS = 1e-12
UNIT_TOL = 1e-9

_TINY = np.finfo(np.float64).tiny
# normalize() leaves vectors this close to unit norm untouched (bitwise)
_IDEMPOTENT_TOL = 4 * np.finfo(np.float64).eps


def normalize(v):
    """Return ``v / ||v||``.

    Vectors whose norm is already 1 up to a few ulps are returned as an
    unmodified copy, which makes the operation exactly idempotent.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidArgument(f"expected a 1-d vector, got shape {v.shape}")
    norm = np.linalg.norm(v)
    if not np.isfinite(norm):
        raise InvalidArgument("vector has non-finite entries")
    if norm <= ZERO_NORM_EPS:
        raise ZeroNorm(f"vector norm {norm:g} is below {ZERO_NORM_EPS:g}")
    if abs(norm - 1.0) <= _IDEMPOTENT_TOL:
        return v.copy()
    return v / norm


def normalize_rows(m):
    """Row-wise :func:`normalize` for a 2-d array."""
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms <= ZERO_NORM_EPS):
        bad = int(np.flatnonzero(norms <= ZERO_NORM_EPS)[0])
        raise ZeroNorm(f"row {bad} has norm {norms[bad]:g}")
    keep = np.abs(norms - 1.0) <= _IDEMPOTENT_TOL
    out = m / norms[:, None]
    out[keep] = m[keep]
    return out


def check_unit(v, name="vector"):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] < 2:
        raise InvalidArgument(f"{name} must be a 1-d vector with at least 2 components")
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise InvalidArgument(f"{name} is not unit length (norm={np.linalg.norm(v)!r})")
    return v


@dataclass(frozen=True)
class VmfParams:
    """Mean direction and concentration of a von Mises-Fisher distribution."""

    mu: np.ndarray
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "mu", check_unit(self.mu, "mu"))
        kappa = float(self.kappa)
        if not np.isfinite(kappa) or kappa < 0 or kappa > KAPPA_MAX:
            raise InvalidArgument(f"kappa must lie in [0, {KAPPA_MAX:g}], got {kappa!r}")
        object.__setattr__(self, "kappa", kappa)

    @property
    def dim(self):
        return self.mu.shape[0]


@dataclass(frozen=True)
class ResultantStats:
    direction: np.ndarray
    rbar: float
    count: int


# ---------------------------------------------------------------------------
# Bessel functions

def _log_bessel_series(nu, x):
    """log I_nu(x) from the ascending series, summed in log space.

    Used where the scaled Bessel value underflows (large order, small
    argument).  All terms are positive so there is no cancellation.
    """
    if x == 0.0:
        return 0.0 if nu == 0.0 else -np.inf
    half = np.log(0.5 * x)
    # index of the largest term: (x/2)^2 = k (k + nu)
    peak = 0.5 * (-nu + np.sqrt(nu * nu + x * x))
    n_terms = int(peak + 12.0 * np.sqrt(peak + 1.0) + 40)
    k = np.arange(1, n_terms + 1, dtype=np.float64)
    log_ratio = 2.0 * half - np.log(k) - np.log(k + nu)
    log_terms = np.concatenate(([0.0], np.cumsum(log_ratio)))
    return nu * half - special.gammaln(nu + 1.0) + special.logsumexp(log_terms)


def _as_checked_pair(order, x):
    order = np.asarray(order, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(order)) or np.any(np.isnan(x)):
        raise InvalidArgument("NaN passed to a Bessel function")
    if np.any(order < 0) or np.any(x < 0):
        raise InvalidArgument("Bessel order and argument must be non-negative")
    return np.broadcast_arrays(order, x)


def _log_bessel_i(order, x):
    scalar = np.ndim(order) == 0 and np.ndim(x) == 0
    order, x = np.broadcast_arrays(np.atleast_1d(np.asarray(order, dtype=np.float64)),
                                   np.atleast_1d(np.asarray(x, dtype=np.float64)))
    with np.errstate(all="ignore"):
        scaled = special.ive(order, x)
    out = np.empty(order.shape, dtype=np.float64)
    ok = np.isfinite(scaled) & (scaled > _TINY)
    with np.errstate(divide="ignore"):
        out[ok] = np.log(scaled[ok]) + x[ok]
    for idx in zip(*np.nonzero(~ok)):
        out[idx] = _log_bessel_series(float(order[idx]), float(x[idx]))
    return float(out[0]) if scalar else out


def log_bessel_i(order, x):
    """Natural log of the modified Bessel function of the first kind, I_order(x).

    Accepts scalars or broadcastable arrays.  Returns ``-inf`` for x = 0 and a
    positive order.
    """
    _as_checked_pair(order, x)
    return _log_bessel_i(order, x)


def _check_dim(K):
    if int(K) != K or K < 2:
        raise InvalidArgument(f"dimension K must be an integer >= 2, got {K!r}")
    return int(K)


def _check_kappa(kappa):
    kappa = np.asarray(kappa, dtype=np.float64)
    if np.any(~np.isfinite(kappa)) or np.any(kappa < 0) or np.any(kappa > KAPPA_MAX):
        raise InvalidArgument(f"kappa must lie in [0, {KAPPA_MAX:g}]")
    return kappa


def _bessel_ratio(K, kappa):
    # unchecked; kappa is a float array
    nu = 0.5 * K - 1.0
    with np.errstate(all="ignore"):
        num = special.ive(nu + 1.0, kappa)
        den = special.ive(nu, kappa)
        out = num / den
    ok = (den > _TINY) & (num > _TINY) & np.isfinite(out)
    out = np.where(kappa == 0.0, 0.0, out)
    redo = ~ok & (kappa > 0.0)
    if np.any(redo):
        k = kappa[redo]
        out[redo] = np.exp(_log_bessel_i(nu + 1.0, k) - _log_bessel_i(nu, k))
    return out


def bessel_ratio(K, kappa):
    """A_K(kappa) = I_{K/2}(kappa) / I_{K/2-1}(kappa).

    This is the mean resultant length of vMF(mu, kappa) on S^{K-1}; it lies in
    [0, 1) and increases strictly with kappa.
    """
    K = _check_dim(K)
    scalar = np.ndim(kappa) == 0
    kappa = np.atleast_1d(_check_kappa(kappa))
    out = _bessel_ratio(K, kappa)
    return float(out[0]) if scalar else out


def _log_norm_const(K, kappa):
    nu = 0.5 * K - 1.0
    out = np.empty_like(kappa)
    zero = kappa == 0.0
    out[zero] = special.gammaln(0.5 * K) - np.log(2.0) - 0.5 * K * np.log(np.pi)
    k = kappa[~zero]
    out[~zero] = nu * np.log(k) - 0.5 * K * np.log(2.0 * np.pi) - _log_bessel_i(nu, k)
    return out


def log_norm_const(K, kappa):
    """log c_K(kappa), the log normalizer of the vMF density on S^{K-1}.

    At kappa = 0 this is minus the log surface area of the sphere.
    """
    K = _check_dim(K)
    scalar = np.ndim(kappa) == 0
    kappa = np.atleast_1d(_check_kappa(kappa))
    out = _log_norm_const(K, kappa)
    return float(out[0]) if scalar else out


def vmf_log_density(x, params):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.dim:
        raise DimensionMismatch(f"x has dimension {x.shape[-1]}, mu has {params.dim}")
    return log_norm_const(params.dim, params.kappa) + params.kappa * (x @ params.mu)


def estimate_kappa(rbar, K):
    """Closed-form concentration estimate from a mean resultant length.

    Uses kappa ~= (rbar K - rbar^3) / (1 - rbar^2), clamped to [0, KAPPA_MAX].
    """
    K = _check_dim(K)
    scalar = np.ndim(rbar) == 0
    r = np.atleast_1d(np.asarray(rbar, dtype=np.float64))
    if np.any(np.isnan(r)) or np.any(r < 0) or np.any(r >= 1):
        raise InvalidArgument("rbar must lie in [0, 1)")
    with np.errstate(divide="ignore", over="ignore"):
        kappa = (r * K - r**3) / (1.0 - r * r)
    kappa = np.clip(np.nan_to_num(kappa, posinf=KAPPA_MAX), 0.0, KAPPA_MAX)
    return float(kappa[0]) if scalar else kappa


# ---------------------------------------------------------------------------
# Sampling and sample statistics

def _sample_cosines(kappa, K, n, rng):
    """Wood's rejection sampler for w = mu^T x."""
    m = K - 1
    b = m / (2.0 * kappa + np.sqrt(4.0 * kappa * kappa + m * m))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + m * np.log(1.0 - x0 * x0)
    out = np.empty(n)
    filled = 0
    while filled < n:
        want = n - filled
        batch = max(16, int(1.3 * want))
        z = rng.beta(0.5 * m, 0.5 * m, size=batch)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.uniform(size=batch)
        accept = kappa * w + m * np.log(1.0 - x0 * w) - c >= np.log(u)
        got = w[accept][:want]
        out[filled:filled + got.size] = got
        filled += got.size
    return out


def sample_vmf(params, n, seed):
    """Draw ``n`` samples from ``params`` as an (n, K) array.

    Deterministic for a given seed.  kappa = 0 gives the uniform distribution.
    """
    if int(n) != n or n < 1:
        raise InvalidArgument(f"n must be a positive integer, got {n!r}")
    n = int(n)
    rng = np.random.default_rng(seed)
    K = params.dim
    mu = params.mu
    if params.kappa == 0.0:
        g = rng.standard_normal((n, K))
        return g / np.linalg.norm(g, axis=1, keepdims=True)
    w = _sample_cosines(params.kappa, K, n, rng)
    # uniform direction in the tangent space at mu
    v = rng.standard_normal((n, K))
    v -= np.outer(v @ mu, mu)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    x = w[:, None] * mu + np.sqrt(np.clip(1.0 - w * w, 0.0, None))[:, None] * v
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def mean_resultant(vs):
    vs = np.asarray(vs, dtype=np.float64)
    if vs.ndim != 2 or vs.shape[0] == 0:
        raise InvalidArgument("mean_resultant needs a non-empty (n, K) collection")
    total = vs.sum(axis=0)
    norm = np.linalg.norm(total)
    if norm <= ZERO_NORM_EPS:
        raise DegenerateResultant("resultant vector vanishes; mean direction undefined")
    n = vs.shape[0]
    return ResultantStats(direction=normalize(total), rbar=min(norm / n, 1.0), count=n)
