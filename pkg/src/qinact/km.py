"""Kaplan-Meier estimation of the censoring survival function G(t) = P(C >= t).

The product-limit estimator here treats censorings as the events of
interest, which is what inverse-probability-of-censoring weighting needs.
A multiplier-weighted variant supports perturbation resampling: the counts
entering each product factor are replaced by weighted sums with the same
risk-set structure.

Conventions, fixed across the package:

* Evaluation is by left limit: ``G(t)`` is the value just before ``t``, so a
  subject with an event at ``t`` still counts as at risk of censoring there.
* At tied event/censoring times, events leave the risk set before
  censorings are counted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import LengthMismatch, NonPositiveWeight


@dataclass(frozen=True)
class StepFunction:
    """Right-piecewise-constant survival curve with left-limit evaluation.

    ``values[m]`` is the value of the curve just after ``jump_times[m]``;
    the curve starts at ``initial_value`` (1 for a survival function).
    """

    jump_times: np.ndarray
    values: np.ndarray
    initial_value: float = 1.0

    def __post_init__(self):
        jt = np.ascontiguousarray(self.jump_times, dtype=np.float64)
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if jt.ndim != 1 or vals.ndim != 1 or jt.shape != vals.shape:
            raise ValueError("jump_times and values must be 1-d arrays of equal length")
        if jt.size:
            if np.any(jt < 0) or np.any(np.diff(jt) <= 0):
                raise ValueError("jump_times must be strictly increasing and nonnegative")
            levels = np.concatenate(([self.initial_value], vals))
            if np.any(np.diff(levels) > 0) or np.any(vals < 0) or np.any(vals > 1):
                raise ValueError("values must be nonincreasing and within [0, 1]")
        jt.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "jump_times", jt)
        object.__setattr__(self, "values", vals)

    def evaluate(self, t):
        """Left-limit evaluation: the value just before ``t``.

        Accepts a scalar or an array; ``evaluate(0) == initial_value``.
        """
        t_arr = np.asarray(t, dtype=np.float64)
        if np.any(t_arr < 0):
            raise ValueError("evaluation points must be nonnegative")
        idx = np.searchsorted(self.jump_times, t_arr, side="left")
        if t_arr.ndim == 0:
            return float(self.values[idx - 1]) if idx > 0 else float(self.initial_value)
        if self.values.size == 0:
            return np.full(t_arr.shape, self.initial_value)
        return np.where(idx > 0, self.values[np.maximum(idx - 1, 0)],
                        self.initial_value)

    __call__ = evaluate


def evaluate(f: StepFunction, t):
    """Module-level alias for :meth:`StepFunction.evaluate`."""
    return f.evaluate(t)


class CensoringLayout:
    """Precomputed sort/group structure for (weighted) censoring KM fits.

    Sorting and grouping depend only on the observed times and statuses, so
    one layout serves every multiplier vector over the same data. This is
    the workhorse behind perturbation resampling, where hundreds of weighted
    fits run against identical structure.
    """

    def __init__(self, times: np.ndarray, status: np.ndarray):
        times = np.asarray(times, dtype=np.float64)
        status = np.asarray(status)
        self.n = times.shape[0]
        order = np.argsort(times, kind="stable")
        t_sorted = times[order]
        cens_sorted = (status[order] == 0).astype(np.float64)
        first = np.ones(self.n, dtype=bool)
        first[1:] = t_sorted[1:] != t_sorted[:-1]
        starts = np.flatnonzero(first)
        distinct = t_sorted[starts]
        group_cens = np.add.reduceat(cens_sorted, starts)
        jump_mask = group_cens > 0
        self.order = order
        self.cens_sorted = cens_sorted
        self.starts = starts
        self.jump_mask = jump_mask
        self.jump_times = distinct[jump_mask]

    def survival_values(self, multipliers: np.ndarray) -> np.ndarray:
        """Post-jump values of the weighted censoring KM at each jump time.

        ``multipliers`` is an ``(n,)`` or ``(B, n)`` array of strictly
        positive weights in original record order; the result has one row
        per multiplier vector. Unit weights reproduce the unweighted
        estimator bit for bit.
        """
        xi = np.atleast_2d(np.asarray(multipliers, dtype=np.float64))
        xs = xi[:, self.order]
        group_tot = np.add.reduceat(xs, self.starts, axis=1)
        group_cens = np.add.reduceat(xs * self.cens_sorted, self.starts, axis=1)
        group_event = group_tot - group_cens
        at_risk = np.cumsum(group_tot[:, ::-1], axis=1)[:, ::-1]
        # events at tied times leave the risk set before censorings count
        denom = (at_risk - group_event)[:, self.jump_mask]
        num = group_cens[:, self.jump_mask]
        factors = 1.0 - num / denom
        np.clip(factors, 0.0, 1.0, out=factors)
        return np.cumprod(factors, axis=1)

    def eval_index(self, t) -> np.ndarray:
        """Index such that ``values[idx - 1]`` is the left-limit value at ``t``."""
        return np.searchsorted(self.jump_times, np.asarray(t, dtype=np.float64),
                               side="left")

    def survival_at(self, values_row: np.ndarray, idx: np.ndarray) -> np.ndarray:
        """Gather left-limit survival values given indices from :meth:`eval_index`."""
        if values_row.size == 0:
            return np.ones(idx.shape)
        return np.where(idx > 0, values_row[np.maximum(idx - 1, 0)], 1.0)


def fit_censoring_km(data: Dataset) -> StepFunction:
    """Product-limit estimate of P(C >= t) from ``(time, 1 - status)`` data.

    At each distinct time with ``d`` censorings among ``r`` at risk the
    survival is multiplied by ``1 - d/r``; events tied with censorings leave
    the risk set first.
    """
    return fit_weighted_censoring_km(data, np.ones(data.n))


def fit_weighted_censoring_km(data: Dataset, xi: np.ndarray) -> StepFunction:
    """Censoring KM with multiplier-weighted counts.

    Both the censoring count and the at-risk total at each distinct time are
    weighted sums of ``xi``, so a common scaling of the multipliers cancels.
    """
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (data.n,):
        raise LengthMismatch(data.n, xi.shape[0] if xi.ndim == 1 else xi.shape)
    bad = np.flatnonzero(~(xi > 0))
    if bad.size:
        raise NonPositiveWeight(int(bad[0]))
    layout = CensoringLayout(data.times, data.status)
    values = layout.survival_values(xi)[0]
    return StepFunction(layout.jump_times, values)
