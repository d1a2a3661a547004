"""f-divergence generators, sample-based JS/KLS estimates, kernels over
stationary distributions, surrogate rewards, and Gram positive-definiteness
search.

Divergence convention: D_f(p, q) = sum_x q(x) f(p(x) / q(x)) for convex f
with f(1) = 0. Kernels are k_f = exp(-D_f / T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ContractError, DomainError, NumericError

LOG2 = math.log(2.0)

ZETA_CLAMP_LO = 1e-6
ZETA_CLAMP_HI = 1e6


class FDivergenceKind(Enum):
    JS = "JS"
    TRIANGULAR = "TriangularDiscrimination"
    SQ_HELLINGER = "SquaredHellinger"
    TOTAL_VARIATION = "TotalVariation"
    KL = "KL"
    REVERSE_KL = "ReverseKL"
    SYMMETRIC_KL = "SymmetricKL"

    @property
    def is_pd(self) -> bool:
        """Claimed positive-definiteness of exp(-D_f/T); the first four are
        squared metrics, the KL family is not."""
        return self in _PD_KINDS


_PD_KINDS = frozenset({
    FDivergenceKind.JS,
    FDivergenceKind.TRIANGULAR,
    FDivergenceKind.SQ_HELLINGER,
    FDivergenceKind.TOTAL_VARIATION,
})


def generator_f(kind: FDivergenceKind, u):
    """The convex generator f(u); vectorized over u >= 0.

    At u = 0 kinds with a finite limit return it; KL-family kinds whose
    limit diverges return +inf.
    """
    u = np.asarray(u, dtype=np.float64)
    if (u < 0).any():
        raise DomainError("generator argument must be non-negative")
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    pos = u > 0
    out = np.empty_like(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind is FDivergenceKind.JS:
            out[pos] = 0.5 * u[pos] * np.log(u[pos]) - 0.5 * (1 + u[pos]) * np.log(0.5 * (1 + u[pos]))
            out[~pos] = 0.5 * LOG2
        elif kind is FDivergenceKind.TRIANGULAR:
            out = (u - 1.0) ** 2 / (u + 1.0)
        elif kind is FDivergenceKind.SQ_HELLINGER:
            out = (np.sqrt(u) - 1.0) ** 2
        elif kind is FDivergenceKind.TOTAL_VARIATION:
            out = 0.5 * np.abs(u - 1.0)
        elif kind is FDivergenceKind.KL:
            out[pos] = u[pos] * np.log(u[pos])
            out[~pos] = 0.0
        elif kind is FDivergenceKind.REVERSE_KL:
            out[pos] = -np.log(u[pos])
            out[~pos] = np.inf
        elif kind is FDivergenceKind.SYMMETRIC_KL:
            out[pos] = (u[pos] - 1.0) * np.log(u[pos])
            out[~pos] = np.inf
        else:
            raise ContractError(f"unknown divergence kind {kind}")
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class DivergenceValue:
    value: float
    infinite: bool = False

    def __float__(self):
        return math.inf if self.infinite else self.value


def exact_divergence_tables(kind: FDivergenceKind, p: np.ndarray, q: np.ndarray) -> DivergenceValue:
    """Direct summation of the divergence integrand over matching tables.

    Values are floored at 0: the mathematical result is non-negative and
    roundoff can otherwise leak a tiny negative for near-identical measures.
    """
    raw = _divergence_sum(kind, p, q)
    if raw.infinite:
        return raw
    return DivergenceValue(max(raw.value, 0.0))


def _divergence_sum(kind: FDivergenceKind, p: np.ndarray, q: np.ndarray) -> DivergenceValue:
    p = np.asarray(p, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64).ravel()
    if p.shape != q.shape:
        raise NumericError(f"measure shapes differ: {p.shape} vs {q.shape}")

    if kind is FDivergenceKind.JS:
        m = p + q
        val = 0.0
        mask = p > 0
        val += 0.5 * float((p[mask] * np.log(2.0 * p[mask] / m[mask])).sum())
        mask = q > 0
        val += 0.5 * float((q[mask] * np.log(2.0 * q[mask] / m[mask])).sum())
        return DivergenceValue(val)
    if kind is FDivergenceKind.TRIANGULAR:
        m = p + q
        mask = m > 0
        return DivergenceValue(float(((p[mask] - q[mask]) ** 2 / m[mask]).sum()))
    if kind is FDivergenceKind.SQ_HELLINGER:
        return DivergenceValue(float(((np.sqrt(p) - np.sqrt(q)) ** 2).sum()))
    if kind is FDivergenceKind.TOTAL_VARIATION:
        return DivergenceValue(0.5 * float(np.abs(p - q).sum()))
    if kind is FDivergenceKind.KL:
        if ((p > 0) & (q == 0)).any():
            return DivergenceValue(math.inf, infinite=True)
        mask = p > 0
        return DivergenceValue(float((p[mask] * np.log(p[mask] / q[mask])).sum()))
    if kind is FDivergenceKind.REVERSE_KL:
        return _divergence_sum(FDivergenceKind.KL, q, p)
    if kind is FDivergenceKind.SYMMETRIC_KL:
        fwd = _divergence_sum(FDivergenceKind.KL, p, q)
        rev = _divergence_sum(FDivergenceKind.KL, q, p)
        if fwd.infinite or rev.infinite:
            return DivergenceValue(math.inf, infinite=True)
        return DivergenceValue(fwd.value + rev.value)
    raise ContractError(f"unknown divergence kind {kind}")


# ---------------------------------------------------------------------------
# sample-based JS / KLS estimates in terms of the distribution ratio


@dataclass(frozen=True)
class DivergenceEstimate:
    value: float
    infinite: bool = False
    n_i: int = 0
    n_j: int = 0

    def __float__(self):
        return math.inf if self.infinite else self.value


@dataclass(frozen=True)
class KernelSpec:
    kind: FDivergenceKind
    temperature: float

    def __post_init__(self):
        if not self.temperature > 0:
            raise ContractError(f"temperature must be positive, got {self.temperature}")


def _normalized_weights(samples, n: int) -> np.ndarray:
    w = getattr(samples, "disc_w", None)
    w = np.ones(n) if w is None else np.asarray(w, dtype=np.float64)
    if w.shape != (n,):
        raise NumericError(f"weights shape {w.shape} != ({n},)")
    return w / w.sum()


def _eval_zeta(samples, zeta_fn, side: str) -> np.ndarray:
    z = np.asarray(zeta_fn(samples), dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(z))
    if bad.size:
        raise NumericError(f"non-finite ratio on {side} sample {int(bad[0])}")
    return z


def estimate_djs(samples_i, samples_j, zeta_fn) -> DivergenceEstimate:
    """Jensen-Shannon estimate
    0.5 E_i[log(z/(1+z))] + 0.5 E_j[log(1/(1+z))] + log 2, clamped to [0, log 2]."""
    zi = _eval_zeta(samples_i, zeta_fn, "i")
    zj = _eval_zeta(samples_j, zeta_fn, "j")
    if zi.size == 0 or zj.size == 0:
        raise ContractError("both sample sets must be non-empty")
    # floor keeps the log finite when a clamped estimator returns exactly 0
    zi = np.maximum(zi, 1e-12)
    wi = _normalized_weights(samples_i, zi.size)
    wj = _normalized_weights(samples_j, zj.size)
    term_i = float((wi * np.log(zi / (1.0 + zi))).sum())
    term_j = float((wj * np.log(1.0 / (1.0 + zj))).sum())
    raw = 0.5 * term_i + 0.5 * term_j + LOG2
    return DivergenceEstimate(min(max(raw, 0.0), LOG2), n_i=zi.size, n_j=zj.size)


def estimate_dkls(samples_i, samples_j, zeta_fn) -> DivergenceEstimate:
    """Symmetric-KL estimate E_i[log z] - E_j[log z], clamped below at 0."""
    zi = _eval_zeta(samples_i, zeta_fn, "i")
    zj = _eval_zeta(samples_j, zeta_fn, "j")
    if zi.size == 0 or zj.size == 0:
        raise ContractError("both sample sets must be non-empty")
    for side, z in (("i", zi), ("j", zj)):
        zero = np.flatnonzero(z <= 0.0)
        if zero.size:
            raise NumericError(f"ratio is zero on {side} sample {int(zero[0])}")
    wi = _normalized_weights(samples_i, zi.size)
    wj = _normalized_weights(samples_j, zj.size)
    raw = float((wi * np.log(zi)).sum() - (wj * np.log(zj)).sum())
    return DivergenceEstimate(max(raw, 0.0), n_i=zi.size, n_j=zj.size)


def estimate_divergence(kind: FDivergenceKind, samples_i, samples_j, zeta_fn) -> DivergenceEstimate:
    if kind is FDivergenceKind.JS:
        return estimate_djs(samples_i, samples_j, zeta_fn)
    if kind is FDivergenceKind.SYMMETRIC_KL:
        return estimate_dkls(samples_i, samples_j, zeta_fn)
    raise ContractError(f"sample-based estimation implemented for JS and SymmetricKL only, got {kind}")


def kernel_value(spec: KernelSpec, d) -> float:
    """k_f = exp(-d / T); an infinite divergence maps cleanly to 0."""
    if isinstance(d, (DivergenceEstimate, DivergenceValue)):
        if d.infinite:
            return 0.0
        d = d.value
    if math.isinf(d):
        return 0.0
    if d < 0:
        raise ContractError(f"divergence must be non-negative, got {d}")
    return math.exp(-d / spec.temperature)


def surrogate_reward(kind: FDivergenceKind, zeta):
    """Per-step reward whose policy gradient equals the divergence gradient.

    JS: -0.5 log(1 + z); KLS: -z - log z. Input is clamped to
    [1e-6, 1e6] first. Only these two kinds have such a form.
    """
    z = np.clip(np.asarray(zeta, dtype=np.float64), ZETA_CLAMP_LO, ZETA_CLAMP_HI)
    if kind is FDivergenceKind.JS:
        out = -0.5 * np.log1p(z)
    elif kind is FDivergenceKind.SYMMETRIC_KL:
        out = -z - np.log(z)
    else:
        raise ContractError(f"surrogate reward defined for JS and SymmetricKL only, got {kind}")
    return float(out) if out.ndim == 0 else out


def divergence_gradient(policy_j, batch_j, zeta_fn, kind: FDivergenceKind) -> np.ndarray:
    """Sample estimate of the divergence gradient w.r.t. the source policy.

    Realized as a policy-gradient vector on batch_j with the surrogate
    reward; the ratio is treated as a constant w.r.t. the policy.
    """
    from .ppo import policy_gradient_vector  # local import; ppo pulls in heavier deps

    rewards = surrogate_reward(kind, zeta_fn(batch_j))
    return policy_gradient_vector(policy_j, batch_j, rewards)


# ---------------------------------------------------------------------------
# Gram positive-definiteness search


def gram_matrix(kind: FDivergenceKind, dists, temperature: float) -> np.ndarray:
    n = len(dists)
    k = np.empty((n, n))
    spec = KernelSpec(kind, temperature)
    for a in range(n):
        for b in range(n):
            k[a, b] = kernel_value(spec, exact_divergence_tables(kind, dists[a], dists[b]))
    # asymmetric kinds (KL / reverse KL) are symmetrized; no-op for the rest
    return 0.5 * (k + k.T)


def gram_min_eig(kind: FDivergenceKind, dists, temperature: float) -> float:
    return float(np.linalg.eigvalsh(gram_matrix(kind, dists, temperature)).min())


# Dirichlet concentrations cycled over trials; sparse draws are where the
# KL-family kernels reveal negative eigenvalues.
_SEARCH_ALPHAS = (1.0, 0.3, 0.1, 0.05)


def gram_pd_check(kind: FDivergenceKind, temperature: float, trials: int,
                  n_dists: int = 8, n_atoms: int = 6,
                  rng: np.random.Generator | None = None,
                  distributions=None) -> float:
    """Minimum Gram eigenvalue across random distribution sets.

    With explicit `distributions` a single Gram matrix is checked. The
    random search is best-effort: it can certify a violation but never
    positive-definiteness.
    """
    if distributions is not None:
        return gram_min_eig(kind, list(distributions), temperature)
    if trials < 1:
        raise ContractError("trials must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    worst = math.inf
    for t in range(trials):
        alpha = _SEARCH_ALPHAS[t % len(_SEARCH_ALPHAS)]
        dists = [rng.dirichlet(np.full(n_atoms, alpha)) for _ in range(n_dists)]
        worst = min(worst, gram_min_eig(kind, dists, temperature))
    return worst
