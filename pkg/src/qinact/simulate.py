"""Monte-Carlo engine: two-group Weibull proportional-hazards data,
censoring calibration, closed-form truth, and estimator/test summaries.

Event times follow ``S(t) = exp(-(rho*t)^eta * exp(beta*z))`` with a binary
group covariate ``z``. Censoring times are uniform on a calibrated
``[a, b]``. Every cell of the (t0 x censoring x beta) grid simulates
datasets, fits the two-parameter median-inactivity model, runs perturbation
inference, and aggregates bias, spread, average standard errors, group
median estimates, and rejection rates against the closed-form truth.

Reproducibility: each (cell, sim) pair owns counter-based substreams
derived from the master seed, so the whole table is a pure function of its
configuration no matter the execution order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .dataset import Dataset, ModelConfig
from .errors import CellFailure, InvalidRegime, NoSolution, QinactError
from .inference import covariance_from_ensemble, global_test, perturb_fit, wald_report
from .model import fit

_DOMAIN_DATA = 0
_DOMAIN_PERTURB = 1


@dataclass(frozen=True)
class WeibullPHSpec:
    """Two-group Weibull proportional-hazards generator settings."""

    rho: float = 0.2
    eta: float = 2.0
    beta: float = 0.0
    group_sizes: tuple[int, int] = (200, 200)

    def __post_init__(self):
        if not (self.rho > 0 and self.eta > 0):
            raise ValueError("rho and eta must be positive")
        if min(self.group_sizes) < 1:
            raise ValueError("both group sizes must be at least 1")

    @property
    def n(self) -> int:
        return int(self.group_sizes[0] + self.group_sizes[1])


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulation study."""

    spec: WeibullPHSpec
    t0_list: tuple[float, ...]
    quantile: float
    censoring_targets: tuple[float, ...]
    seed: int
    n_sims: int = 1000
    n_perturb: int = 400
    alpha: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "t0_list", tuple(float(t) for t in self.t0_list))
        object.__setattr__(self, "censoring_targets",
                           tuple(float(c) for c in self.censoring_targets))
        if self.n_sims < 1:
            raise ValueError("n_sims must be at least 1")
        if self.n_perturb < 2:
            raise ValueError("n_perturb must be at least 2")
        if not (0.0 < self.quantile < 1.0):
            raise ValueError("quantile must be in (0, 1)")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must be in (0, 1)")
        if any(not (0.0 <= c < 1.0) for c in self.censoring_targets):
            raise ValueError("censoring targets must be in [0, 1)")
        if not self.t0_list or not self.censoring_targets:
            raise ValueError("t0_list and censoring_targets must be nonempty")


@dataclass(frozen=True)
class SimCell:
    """Aggregated results for one (t0, censoring, beta) grid cell."""

    t0: float
    censoring_target: float
    beta: float
    beta0_true: float
    beta1_true: float
    theta0_true: float
    theta1_true: float
    bias_beta0: float
    sd_beta0: float
    ase_beta0: float
    bias_beta1: float
    sd_beta1: float
    ase_beta1: float
    theta0_hat: float
    theta1_hat: float
    rejection_rate: float
    chi2_rejection_rate: float
    achieved_censoring: float
    n_sims_done: int
    n_errors: int
    max_root_bound_ratio: float
    censor_interval: tuple[float, float | None]


@dataclass(frozen=True)
class SimulationTable:
    """All grid cells of a study plus the configuration that produced them."""

    config: SimConfig
    betas: tuple[float, ...]
    cells: tuple[SimCell, ...]

    def cell(self, t0: float, censoring: float, beta: float | None = None) -> SimCell:
        if beta is None:
            beta = self.betas[0]
        for c in self.cells:
            if c.t0 == t0 and c.censoring_target == censoring and c.beta == beta:
                return c
        raise KeyError((t0, censoring, beta))


def true_median_inactivity(rho: float, eta: float, beta: float, z: float,
                           t0: float) -> float:
    """Closed-form median of ``t0 - T`` given ``T <= t0`` under the Weibull model.

    Solving ``(S(t0 - theta) - S(t0)) / (1 - S(t0)) = 1/2`` for ``theta`` gives

        theta = t0 - (1/rho) * [exp(-beta z) * (log 2 - log(1 + exp(-(rho t0)^eta exp(beta z))))]^(1/eta)
    """
    hazard_scale = math.exp(beta * z)
    tail = math.exp(-((rho * t0) ** eta) * hazard_scale)
    bracket = (math.log(2.0) - math.log1p(tail)) / hazard_scale
    if bracket <= 0.0:
        raise InvalidRegime(
            f"median inactivity time undefined for t0={t0}: interior term {bracket} <= 0"
        )
    theta = t0 - (bracket ** (1.0 / eta)) / rho
    if theta <= 0.0:
        raise InvalidRegime(
            f"median inactivity time {theta} is not positive at t0={t0}"
        )
    return theta


def generate_weibull_ph(spec: WeibullPHSpec, rng: np.random.Generator):
    """Event times and group labels via the inverse survival transform.

    ``T = (1/rho) * (E * exp(-beta*z))^(1/eta)`` with ``E`` unit exponential
    (equivalently ``-log U`` for uniform ``U``).
    """
    z = np.repeat(np.array([0.0, 1.0]), spec.group_sizes)
    e = rng.standard_exponential(spec.n)
    times = (e * np.exp(-spec.beta * z)) ** (1.0 / spec.eta) / spec.rho
    return times, z


def _prob_censored(spec: WeibullPHSpec, b: float) -> float:
    """P(C < T) for C ~ Uniform[0, b], averaged over the two groups."""
    n0, n1 = spec.group_sizes
    w1 = n1 / (n0 + n1)

    def mixture_survival(c):
        s0 = np.exp(-((spec.rho * c) ** spec.eta))
        s1 = np.exp(-((spec.rho * c) ** spec.eta) * np.exp(spec.beta))
        return (1.0 - w1) * s0 + w1 * s1

    area, _ = integrate.quad(mixture_survival, 0.0, b, limit=200)
    return area / b


def calibrate_censoring_interval(spec: WeibullPHSpec, target: float):
    """Uniform censoring support ``[0, b]`` achieving the target censoring rate.

    The overall proportion censored is ``P(C < T)``, computed by quadrature
    of the group-averaged survival curve against the uniform density, and
    ``b`` is found by root bracketing (censoring shrinks as ``b`` grows).
    """
    if not (0.0 < target < 1.0):
        raise ValueError(f"target censoring proportion must be in (0, 1), got {target}")

    def gap(b):
        return _prob_censored(spec, b) - target

    lo = 1e-8
    hi = 1.0
    doublings = 0
    while gap(hi) > 0.0:
        hi *= 2.0
        doublings += 1
        if doublings > 60:
            raise NoSolution(
                f"no uniform censoring horizon reaches proportion {target}"
            )
    b = optimize.brentq(gap, lo, hi, xtol=1e-10, rtol=1e-12)
    return 0.0, float(b)


def _cell_truth(spec: WeibullPHSpec, t0: float):
    theta0 = true_median_inactivity(spec.rho, spec.eta, spec.beta, 0.0, t0)
    theta1 = true_median_inactivity(spec.rho, spec.eta, spec.beta, 1.0, t0)
    return theta0, theta1, math.log(theta0), math.log(theta1) - math.log(theta0)


def _run_cell(config: SimConfig, spec: WeibullPHSpec, t0: float, target: float,
              cell_index: int) -> SimCell:
    a, b = calibrate_censoring_interval(spec, target) if target > 0 else (0.0, None)
    theta0_true, theta1_true, beta0_true, beta1_true = _cell_truth(spec, t0)
    truth = np.array([beta0_true, beta1_true])
    mcfg = ModelConfig(t0=t0, quantile=config.quantile)

    betas = np.empty((config.n_sims, 2))
    ses = np.empty((config.n_sims, 2))
    rejects = np.empty(config.n_sims, dtype=bool)
    chi2_rejects = np.empty(config.n_sims, dtype=bool)
    censored = np.empty(config.n_sims)
    done = 0
    n_errors = 0
    max_ratio = 0.0

    for s in range(config.n_sims):
        data_ss = np.random.SeedSequence(entropy=config.seed,
                                         spawn_key=(_DOMAIN_DATA, cell_index, s))
        rng = np.random.Generator(np.random.Philox(data_ss))
        times, z = generate_weibull_ph(spec, rng)
        if b is not None:
            c = rng.uniform(a, b, spec.n)
            observed = np.minimum(times, c)
            status = (times <= c).astype(np.int8)
        else:
            observed = times
            status = np.ones(spec.n, dtype=np.int8)
        data = Dataset.from_arrays(observed, status, z[:, None], ("group",))
        perturb_ss = np.random.SeedSequence(entropy=config.seed,
                                            spawn_key=(_DOMAIN_PERTURB, cell_index, s))
        pseed = int(perturb_ss.generate_state(1, dtype=np.uint64)[0])
        try:
            fit_result = fit(data, mcfg)
            ens = perturb_fit(data, mcfg, B=config.n_perturb, seed=pseed,
                              base_fit=fit_result)
            cov = covariance_from_ensemble(ens)
            report = wald_report(fit_result, cov, config.alpha)
            _, pvalue, _ = global_test(data, mcfg, truth)
        except QinactError:
            n_errors += 1
            continue
        betas[done] = fit_result.beta
        ses[done] = report.se
        rejects[done] = bool(report.significant[1])
        chi2_rejects[done] = pvalue < config.alpha
        censored[done] = float(np.mean(status == 0))
        active_w = fit_result.weights[fit_result.active_set]
        zmax = np.maximum(1.0, np.abs(data.covariates[fit_result.active_set]).max(axis=1, initial=0.0))
        bound = float(active_w @ zmax) / math.sqrt(data.n)
        ratio = float(np.abs(fit_result.eq_residual).max()) / bound
        max_ratio = max(max_ratio, ratio)
        done += 1

    if n_errors > 0.02 * config.n_sims:
        raise CellFailure((t0, target, spec.beta), n_errors, config.n_sims)
    mean_beta = betas[:done].mean(axis=0)
    return SimCell(
        t0=t0,
        censoring_target=target,
        beta=spec.beta,
        beta0_true=beta0_true,
        beta1_true=beta1_true,
        theta0_true=theta0_true,
        theta1_true=theta1_true,
        bias_beta0=float(mean_beta[0] - beta0_true),
        sd_beta0=float(betas[:done, 0].std(ddof=1)) if done > 1 else 0.0,
        ase_beta0=float(ses[:done, 0].mean()),
        bias_beta1=float(mean_beta[1] - beta1_true),
        sd_beta1=float(betas[:done, 1].std(ddof=1)) if done > 1 else 0.0,
        ase_beta1=float(ses[:done, 1].mean()),
        theta0_hat=float(np.exp(betas[:done, 0]).mean()),
        theta1_hat=float(np.exp(betas[:done].sum(axis=1)).mean()),
        rejection_rate=float(rejects[:done].mean()),
        chi2_rejection_rate=float(chi2_rejects[:done].mean()),
        achieved_censoring=float(censored[:done].mean()),
        n_sims_done=done,
        n_errors=n_errors,
        max_root_bound_ratio=max_ratio,
        censor_interval=(a, b),
    )


def _run_cell_job(job):
    return _run_cell(*job)


def run_power_study(config: SimConfig, betas, processes: int = 1) -> SimulationTable:
    """Run the full (t0 x censoring x beta) grid.

    Cell substreams are keyed by (seed, cell index, sim index), with cells
    enumerated in configuration order: t0 outermost, then censoring target,
    then beta. Cells are independent given their substreams, so
    ``processes > 1`` farms them out to a process pool; results are
    identical to the sequential run and assembled in cell order.
    """
    betas = tuple(float(v) for v in betas)
    if not betas:
        raise ValueError("betas must be nonempty")
    if processes < 1:
        raise ValueError("processes must be at least 1")
    jobs = []
    cell_index = 0
    for t0 in config.t0_list:
        for target in config.censoring_targets:
            for beta in betas:
                spec = WeibullPHSpec(rho=config.spec.rho, eta=config.spec.eta,
                                     beta=beta, group_sizes=config.spec.group_sizes)
                jobs.append((config, spec, t0, target, cell_index))
                cell_index += 1
    if processes == 1 or len(jobs) == 1:
        cells = [_run_cell_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(processes, len(jobs))) as pool:
            cells = list(pool.map(_run_cell_job, jobs))
    return SimulationTable(config=config, betas=betas, cells=tuple(cells))


def run_simulation(config: SimConfig, processes: int = 1) -> SimulationTable:
    """Run the grid at the configuration's own effect size."""
    return run_power_study(config, (config.spec.beta,), processes=processes)
