"""Quantile regression for the inactivity time of right-censored data.

Only subjects with an observed event strictly before the conditioning time
``t0`` carry information about the inactivity time ``t0 - Y``. Censoring
makes that subgroup selectively observed, which is undone by weighting each
contributing event by the inverse of the censoring survival estimate at its
event time. The weighted check loss in ``log(t0 - Y)`` is then minimized
exactly, and ``exp(beta' (1, z))`` estimates the quantile inactivity time
at covariates ``z``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import qreg
from .dataset import Dataset, ModelConfig
from .errors import InsufficientEvents, ZeroCensoringSurvival
from .km import CensoringLayout, StepFunction

# events closer to t0 than this would dominate the fit through log(t0 - Y)
EVENT_TIME_GUARD = 1e-12


def _contributing_mask(times, status, t0):
    """Rows that carry inactivity-time information: events strictly before t0.

    Events within EVENT_TIME_GUARD of t0 are dropped with a warning; the
    log response would otherwise overflow toward -inf.
    """
    strict = (status == 1) & (times < t0)
    mask = strict & (t0 - times >= EVENT_TIME_GUARD)
    dropped = int(strict.sum() - mask.sum())
    if dropped:
        warnings.warn(
            f"excluded {dropped} event(s) within {EVENT_TIME_GUARD} of t0; "
            "log inactivity time would overflow",
            RuntimeWarning,
            stacklevel=3,
        )
    return mask


@dataclass(frozen=True)
class FitResult:
    """Fitted coefficients for one (quantile, t0) with weights and diagnostics."""

    beta: np.ndarray
    quantile: float
    t0: float
    n_effective: int
    weights: np.ndarray = field(repr=False)
    censoring_km: StepFunction = field(repr=False)
    eq_residual: np.ndarray
    active_set: np.ndarray = field(repr=False)
    objective: float
    iterations: int

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def predict(self, z) -> float:
        return predict_quantile_inactivity(self, z)


def compute_ipcw_weights(data: Dataset, t0: float, G: StepFunction) -> np.ndarray:
    """Inverse-probability-of-censoring weights ``I(event, Y < t0) / G(Y)``.

    ``G`` is evaluated by left limit, so an event at ``Y`` counts as still at
    risk of censoring there. Raises :class:`ZeroCensoringSurvival` when a
    contributing event sits beyond the censoring support.
    """
    mask = _contributing_mask(data.times, data.status, t0)
    g = np.asarray(G.evaluate(data.times), dtype=np.float64)
    dead = mask & (g <= 0.0)
    if np.any(dead):
        i = int(np.flatnonzero(dead)[0])
        raise ZeroCensoringSurvival(i, float(data.times[i]))
    w = np.zeros(data.n)
    np.divide(1.0, g, out=w, where=mask)
    w[~mask] = 0.0
    return w


class _FitContext:
    """Everything about (data, config) that perturbation replicates reuse.

    Holds the truncated arrays, the censoring-KM layout, the contributing
    rows, and the fixed design/response of the weighted regression. Weight
    vectors are the only thing that changes across multiplier draws.
    """

    def __init__(self, data: Dataset, config: ModelConfig):
        if config.truncation_bound is not None:
            if config.truncation_bound > data.times.max():
                raise ValueError(
                    "truncation_bound exceeds the largest observed time"
                )
            working = data.truncate_censoring(config.truncation_bound)
        else:
            working = data
        self.data = working
        self.config = config
        self.events_before_t0 = int(
            np.sum((working.times < config.t0) & (working.status == 1))
        )
        self.mask = _contributing_mask(working.times, working.status, config.t0)
        self.rows = np.flatnonzero(self.mask)
        self.layout = CensoringLayout(working.times, working.status)
        self.event_idx = self.layout.eval_index(working.times[self.rows])
        ones = np.ones((self.rows.size, 1))
        self.design = np.ascontiguousarray(
            np.hstack([ones, working.covariates[self.rows]])
        )
        self.response = np.log(config.t0 - working.times[self.rows])

    def weights_for(self, multipliers: np.ndarray) -> np.ndarray:
        """Weights of the contributing rows for one multiplier vector.

        Computes the multiplier-weighted censoring KM and divides the row
        multipliers by its left-limit value at each event time. Returns None
        in place of raising when the weighted KM vanishes at a needed time
        (callers redraw); with strictly positive multipliers that cannot
        happen on data where the unweighted fit succeeded.
        """
        values = self.layout.survival_values(multipliers)[0]
        g = self.layout.survival_at(values, self.event_idx)
        if np.any(g <= 0.0):
            return None, values
        return multipliers[self.rows] / g, values


def fit(data: Dataset, config: ModelConfig) -> FitResult:
    """Fit the quantile inactivity-time regression.

    Estimates the censoring survival function (after optional truncation),
    forms the IPCW weights, and minimizes the weighted check loss of
    ``log(t0 - Y)`` on the intercept-plus-covariates design.
    """
    ctx = _FitContext(data, config)
    return _fit_from_context(ctx)


def _fit_from_context(ctx: _FitContext) -> FitResult:
    config = ctx.config
    if ctx.events_before_t0 < config.min_events:
        raise InsufficientEvents(ctx.events_before_t0, config.min_events)
    unit = np.ones(ctx.data.n)
    w_pos, km_values = ctx.weights_for(unit)
    if w_pos is None:
        g = ctx.layout.survival_at(km_values, ctx.event_idx)
        i = int(ctx.rows[np.flatnonzero(g <= 0.0)[0]])
        raise ZeroCensoringSurvival(i, float(ctx.data.times[i]))
    G = StepFunction(ctx.layout.jump_times, km_values)
    beta, active_local, iters = qreg._solve_arrays(
        ctx.design, ctx.response, w_pos, config.quantile
    )
    active = ctx.rows[active_local]
    weights = np.zeros(ctx.data.n)
    weights[ctx.rows] = w_pos
    r = ctx.response - ctx.design @ beta
    r[active_local] = 0.0
    objective = float(np.sum(w_pos * qreg.check_loss(r, config.quantile)))
    eq = estimating_equation(ctx.data, config, beta, G, active_rows=active)
    return FitResult(
        beta=beta,
        quantile=config.quantile,
        t0=config.t0,
        n_effective=int(ctx.rows.size),
        weights=weights,
        censoring_km=G,
        eq_residual=eq,
        active_set=np.sort(active),
        objective=objective,
        iterations=iters,
    )


def estimating_equation(data: Dataset, config: ModelConfig, beta, G: StepFunction,
                        active_rows=None) -> np.ndarray:
    """Weighted score ``n^{-1/2} sum_i w_i Z_i [lam - I(log(t0 - Y_i) <= beta'Z_i)]``.

    ``w_i`` is the IPCW weight, zero off the contributing rows. At an exact
    minimizer this vector is pinned near zero by the active-set bound.
    ``active_rows`` marks rows whose residual is exactly zero by
    construction (the solver interpolates them); their indicator is then
    evaluated at zero rather than at recomputation noise.
    """
    beta = np.asarray(beta, dtype=np.float64)
    w = compute_ipcw_weights(data, config.t0, G)
    rows = np.flatnonzero(w > 0)
    design = np.hstack([np.ones((rows.size, 1)), data.covariates[rows]])
    u = np.log(config.t0 - data.times[rows]) - design @ beta
    if active_rows is not None:
        u[np.isin(rows, active_rows)] = 0.0
    bracket = config.quantile - (u <= 0.0)
    total = design.T @ (w[rows] * bracket)
    return total / np.sqrt(data.n)


def predict_quantile_inactivity(fit_result: FitResult, z) -> float:
    """Predicted quantile inactivity time ``exp(beta' (1, z))`` at covariates ``z``."""
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if z.shape[0] != fit_result.beta.shape[0] - 1:
        raise ValueError(
            f"expected {fit_result.beta.shape[0] - 1} covariates, got {z.shape[0]}"
        )
    if not np.all(np.isfinite(z)):
        raise ValueError("covariates must be finite")
    return float(np.exp(fit_result.beta[0] + z @ fit_result.beta[1:]))
