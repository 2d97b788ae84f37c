"""Uncertainty quantification for inactivity-time quantile regression.

Two complementary routes are provided. Multiplier perturbation re-solves
the weighted estimating equation with i.i.d. unit-exponential multipliers
applied to both the weights and the censoring survival estimate; the sample
covariance of the replicate coefficients estimates the sampling covariance
of the fit, giving normal-approximation confidence intervals. The score
route estimates the covariance of the estimating function itself through
per-subject influence terms (including the censoring Kaplan-Meier
contribution) and drives a chi-square test of a fully specified null
coefficient vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import qreg
from .dataset import Dataset, ModelConfig
from .errors import (DegenerateEnsemble, NegativeVariance, SingularGamma,
                     TooManyRedraws, RankDeficient)
from .km import StepFunction, fit_censoring_km
from .model import (FitResult, _FitContext, _fit_from_context,
                    compute_ipcw_weights, estimating_equation)

_MAX_ATTEMPTS = 64


@dataclass(frozen=True)
class PerturbationEnsemble:
    """B replicate coefficient vectors plus the fit they perturb."""

    replicates: np.ndarray = field(repr=False)
    B: int
    seed: int
    base_fit: FitResult = field(repr=False)
    redraws: int = 0


@dataclass(frozen=True)
class InferenceReport:
    """Normal-approximation summary of a perturbation ensemble."""

    beta: np.ndarray
    se: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    covariance: np.ndarray = field(repr=False)
    wald_z: np.ndarray
    significant: np.ndarray
    alpha: float


@dataclass(frozen=True)
class GammaEstimate:
    """Empirical covariance of the estimating function's influence terms."""

    gamma: np.ndarray
    zeta: np.ndarray = field(repr=False)


def _exponential_multipliers(seed: int, replicate: int, attempt: int, n: int) -> np.ndarray:
    """Unit-exponential multipliers from a counter-based stream.

    Each (replicate, attempt) pair owns an independent Philox stream keyed by
    (seed, replicate, attempt), so replicate b is reproducible no matter in
    which order replicates are computed.
    """
    key = np.array([seed, (np.uint64(replicate) << np.uint64(8)) | np.uint64(attempt)],
                   dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.standard_exponential(n)


def perturb_fit(data: Dataset, config: ModelConfig, B: int = 400, *, seed: int,
                base_fit: FitResult | None = None,
                xi_sampler=None) -> PerturbationEnsemble:
    """Draw B perturbed coefficient vectors.

    For each replicate a fresh vector of unit-exponential multipliers
    reweights both the censoring Kaplan-Meier estimate and the estimating
    equation, and the weighted regression is re-solved (warm-started at the
    base fit's vertex). Replicates whose multiplier draw degenerates are
    redrawn from a fresh stream; more than 10% redraws aborts.

    ``xi_sampler`` is a testing hook: a callable ``(replicate, n) -> array``
    replacing the exponential draw (e.g. all-ones multipliers must reproduce
    the base fit exactly).
    """
    if B < 2:
        raise ValueError("B must be at least 2")
    seed = int(seed)
    if not (0 <= seed < 2**64):
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    ctx = _FitContext(data, config)
    if base_fit is None:
        base_fit = _fit_from_context(ctx)
    k = base_fit.beta.shape[0]
    start = np.searchsorted(ctx.rows, base_fit.active_set)
    n = ctx.data.n
    replicates = np.empty((B, k))
    redraws = 0
    budget = 0.1 * B
    for b in range(1, B + 1):
        attempt = 0
        while True:
            if xi_sampler is not None:
                xi = np.asarray(xi_sampler(b, n), dtype=np.float64)
            else:
                xi = _exponential_multipliers(seed, b, attempt, n)
            ok = xi.shape == (n,) and bool(np.all(np.isfinite(xi)) and np.all(xi > 0))
            if ok:
                w_pos, _ = ctx.weights_for(xi)
                ok = w_pos is not None
            if ok:
                try:
                    beta_b, _, _ = qreg._solve_arrays(
                        ctx.design, ctx.response, w_pos, config.quantile,
                        start_basis=start,
                    )
                except RankDeficient:
                    ok = False
            if ok:
                break
            redraws += 1
            attempt += 1
            if redraws > budget or attempt >= _MAX_ATTEMPTS:
                raise TooManyRedraws(redraws, int(budget))
        replicates[b - 1] = beta_b
    replicates.setflags(write=False)
    return PerturbationEnsemble(replicates=replicates, B=B, seed=seed,
                                base_fit=base_fit, redraws=redraws)


def covariance_from_ensemble(ens: PerturbationEnsemble) -> np.ndarray:
    """Sample covariance (divisor B - 1) of the replicate coefficients."""
    dev = ens.replicates - ens.replicates.mean(axis=0)
    cov = dev.T @ dev / (ens.B - 1)
    for j, v in enumerate(np.diag(cov)):
        if v == 0.0:
            raise DegenerateEnsemble(j)
    return cov


def percentile_intervals(ens: PerturbationEnsemble, alpha: float):
    """Ensemble percentile intervals. Diagnostic only; reported intervals
    are the normal-approximation ones from :func:`wald_report`."""
    lo = np.quantile(ens.replicates, alpha / 2, axis=0)
    hi = np.quantile(ens.replicates, 1 - alpha / 2, axis=0)
    return lo, hi


def wald_report(fit_result: FitResult, cov: np.ndarray, alpha: float) -> InferenceReport:
    """Normal-approximation intervals ``beta +- z_{1-alpha/2} * se``."""
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    var = np.diag(cov)
    for j, v in enumerate(var):
        if v <= 0.0:
            raise NegativeVariance(j, float(v))
    se = np.sqrt(var)
    z = stats.norm.ppf(1.0 - alpha / 2.0)
    beta = fit_result.beta
    lo = beta - z * se
    hi = beta + z * se
    return InferenceReport(
        beta=beta,
        se=se,
        ci_lower=lo,
        ci_upper=hi,
        covariance=cov,
        wald_z=beta / se,
        significant=(lo > 0.0) | (hi < 0.0),
        alpha=alpha,
    )


class _InfluenceParts:
    """Per-subject pieces of the censoring-KM influence function.

    With ``R(s) = #{Y_j >= s}`` and censoring jump times ``s_m`` carrying
    ``d_m`` censorings, the plug-in influence of subject i on the estimate
    at time t is

        G(t) * [ I(Y_i <= t, cens_i) / (R(Y_i)/n) - n * K(min(t, Y_i)) ]

    where ``K(u) = sum_{s_m <= u} d_m / R(s_m)^2`` accumulates the
    compensator. ``K`` is nondecreasing, so ``K(min(a, b)) = min(K(a), K(b))``.
    """

    def __init__(self, data: Dataset):
        times = data.times
        n = data.n
        sorted_t = np.sort(times)
        at_risk = n - np.searchsorted(sorted_t, times, side="left")
        cens = data.status == 0
        jump_t = np.unique(times[cens])
        sorted_cens = np.sort(times[cens])
        d = (np.searchsorted(sorted_cens, jump_t, side="right")
             - np.searchsorted(sorted_cens, jump_t, side="left"))
        risk_at_jump = n - np.searchsorted(sorted_t, jump_t, side="left")
        self.n = n
        self.jump_times = jump_t
        self.k_cum = np.cumsum(d / risk_at_jump**2)
        self.term1 = np.where(cens, n / at_risk, 0.0)
        self.k_at_own = self.k_of(times)

    def k_of(self, t):
        idx = np.searchsorted(self.jump_times, np.asarray(t, dtype=np.float64),
                              side="right")
        padded = np.concatenate(([0.0], self.k_cum))
        return padded[idx]


def influence_function_censoring(data: Dataset, G: StepFunction, i: int, t: float) -> float:
    """Plug-in influence of record ``i`` on the censoring KM at time ``t``.

    Summed over subjects this vanishes at every jump time (the counting
    process and its compensator balance exactly).
    """
    parts = _InfluenceParts(data)
    n = data.n
    if not (0 <= i < n):
        raise IndexError(f"record index {i} out of range for n={n}")
    term1 = parts.term1[i] if data.times[i] <= t else 0.0
    term2 = parts.n * min(parts.k_at_own[i], float(parts.k_of(t)))
    return float(G.evaluate(t)) * (term1 - term2)


def _influence_matrix(data: Dataset, G: StepFunction) -> np.ndarray:
    """Matrix of influences ``M[i, j] = IF_i(Y_j)`` for all record pairs."""
    parts = _InfluenceParts(data)
    times = data.times
    reach = times[:, None] <= times[None, :]
    term1 = parts.term1[:, None] * reach
    term2 = parts.n * np.minimum(parts.k_at_own[:, None], parts.k_at_own[None, :])
    g_at = np.asarray(G.evaluate(times), dtype=np.float64)
    return (term1 - term2) * g_at[None, :]


def _zeta_matrix(data: Dataset, t0: float, quantile: float, beta,
                 G: StepFunction, if_matrix: np.ndarray) -> np.ndarray:
    beta = np.asarray(beta, dtype=np.float64)
    # ZeroCensoringSurvival propagates from here when G vanishes at an event
    w = compute_ipcw_weights(data, t0, G)
    design = np.hstack([np.ones((data.n, 1)), data.covariates])
    rows = np.flatnonzero(w > 0)
    bracket = np.zeros(data.n)
    u = np.log(t0 - data.times[rows]) - design[rows] @ beta
    bracket[rows] = (u <= 0.0) - quantile
    zeta1 = (w * bracket)[:, None] * design
    a = (w**2 * bracket)[:, None] * design
    zeta2 = -(if_matrix @ a) / data.n
    return zeta1 + zeta2


def estimate_gamma(data: Dataset, config: ModelConfig, beta,
                   G: StepFunction) -> GammaEstimate:
    """Empirical covariance of the per-subject estimating-function terms.

    The first term is the subject's own weighted score contribution; the
    second propagates its influence on the censoring KM through every other
    subject's weight. Without censoring the second term vanishes.
    """
    if_matrix = _influence_matrix(data, G)
    zeta = _zeta_matrix(data, config.t0, config.quantile, beta, G, if_matrix)
    gamma = zeta.T @ zeta / data.n
    return GammaEstimate(gamma=gamma, zeta=zeta)


def cross_quantile_gamma(data: Dataset, config: ModelConfig, beta_a, beta_b,
                         quantile_b: float) -> np.ndarray:
    """Cross-covariance of the estimating function at two quantile levels.

    Evaluates the influence terms at ``(beta_a, config.quantile)`` and at
    ``(beta_b, quantile_b)`` and averages their outer products.
    """
    working = (data.truncate_censoring(config.truncation_bound)
               if config.truncation_bound is not None else data)
    G = fit_censoring_km(working)
    if_matrix = _influence_matrix(working, G)
    za = _zeta_matrix(working, config.t0, config.quantile, beta_a, G, if_matrix)
    zb = _zeta_matrix(working, config.t0, quantile_b, beta_b, G, if_matrix)
    return za.T @ zb / working.n


def global_test(data: Dataset, config: ModelConfig, beta0):
    """Chi-square test of a fully specified coefficient vector.

    The statistic is the quadratic form of the estimating equation at
    ``beta0`` in the inverse of its estimated covariance; under the null it
    is approximately chi-square with p + 1 degrees of freedom.

    Returns ``(statistic, p_value, df)``.
    """
    beta0 = np.asarray(beta0, dtype=np.float64)
    working = (data.truncate_censoring(config.truncation_bound)
               if config.truncation_bound is not None else data)
    G = fit_censoring_km(working)
    q = estimating_equation(working, config, beta0, G)
    gamma = estimate_gamma(working, config, beta0, G).gamma
    cond = float(np.linalg.cond(gamma))
    if not np.isfinite(cond) or cond >= 1e12:
        raise SingularGamma(cond)
    stat = float(q @ np.linalg.solve(gamma, q))
    stat = max(stat, 0.0)
    df = data.p + 1
    return stat, float(stats.chi2.sf(stat, df)), df
