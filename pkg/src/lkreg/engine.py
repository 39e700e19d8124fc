"""Outer Landweber-Kaczmarz iteration with inexact inner solves.

The engine minimizes data misfit for a block-structured forward operator
F_0..F_{N-1} by dual ascent on a convex penalty Theta.  Starting from
x_0 = xi_0 = 0 it cycles through the blocks; at outer step n with block
i = n mod N it

1. evaluates the residual r = F_i(x) - y_i (at the Nesterov extrapolant
   in accelerated mode),
2. with noisy data checks the discrepancy test ||r||^p + sigma eps_n <=
   (tau delta)^p, counting consecutive passes in q and stopping at q = N,
3. otherwise takes the dual step xi <- xi - mu L_i(x)* J_s(r) with the
   capped adaptive step size mu from `step_size`,
4. recovers the next primal iterate from xi through the inner solver,
   warm started and driven to a summable relative-gap target, which
   certifies the new eps.

Every iterate visited, including the final one, contributes one StepRecord
to the trace; runs end by `discrepancy`, by the iteration `cap`, or by
`inner-failure` when the inner solver cannot reach its gap target.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .pdhg import inner_solver
from .penalty import PrimalDualPair, bregman_eps_distance, duality_map


class ForwardProblem:
    """Block-structured forward map with attached data.

    Subclasses define `num_blocks`, `domain_shape`, the block maps
    `apply(i, x)`, their linearizations `derivative(i, x, h)` and adjoints
    `adjoint(i, x, w)`, and per-block data vectors `data(i)`.
    """

    num_blocks = 1
    domain_shape = None

    def apply(self, i, x):
        raise NotImplementedError

    def derivative(self, i, x, h):
        raise NotImplementedError

    def adjoint(self, i, x, w):
        raise NotImplementedError

    def data(self, i):
        raise NotImplementedError

    def residual(self, i, x):
        return self.apply(i, x) - self.data(i)


@dataclass
class SolverConfig:
    """Scalar knobs of the outer iteration.

    delta is the absolute noise level; delta = 0 switches to exact-data mode
    (no discrepancy test, run to n_max).  Inner gap targets follow
    eta0 * (n+1)^(-gap_exponent) for the solve that produces iterate n, and
    certified eps values are floored at eps_floor wherever the step size or
    the discrepancy test consumes them.
    """

    p: float = 2.0
    s: float = 2.0
    beta0: float = 0.1
    beta1: float = 10.0
    sigma: float = 1e-3
    tau: float = 1.01
    alpha: float = 5.0
    delta: float = 0.0
    eta0: float = 1.0
    gap_exponent: float = 2.2
    eps_floor: float = 1e-14
    n_max: int = 10000
    n_blocks: int = 0
    inner_max_iter: int = 5000

    def __post_init__(self):
        if not self.p >= 1.0:
            raise ValueError("residual exponent p must satisfy p >= 1")
        if not self.s > 1.0:
            raise ValueError("duality-map exponent s must satisfy s > 1")
        if not self.beta0 > 0.0:
            raise ValueError("beta0 must be positive")
        if not self.beta1 > 0.0:
            raise ValueError("beta1 must be positive")
        if not self.sigma > 0.0:
            raise ValueError("sigma must be positive")
        if not self.tau > 1.0:
            raise ValueError("tau must exceed 1")
        if not self.alpha >= 3.0:
            raise ValueError("alpha must be at least 3")
        if self.delta < 0.0:
            raise ValueError("delta must be nonnegative")
        if not self.eta0 > 0.0:
            raise ValueError("eta0 must be positive")
        if not self.eps_floor > 0.0:
            raise ValueError("eps_floor must be positive")
        if self.n_max < 0:
            raise ValueError("n_max must be nonnegative")
        if self.n_blocks < 0:
            raise ValueError("n_blocks must be nonnegative")
        if not self.gap_target(1) < 1.0:
            raise ValueError("gap target at n = 1 must lie below 1")

    def gap_target(self, n):
        """Relative duality-gap target for the inner solve producing iterate n."""
        return self.eta0 * float(n + 1) ** (-self.gap_exponent)


def step_size(r_norm, ljr_norm, eps_n, cfg, noisy):
    """Capped adaptive step size (mu_tilde, mu) for one outer step.

    mu_tilde = min(beta0 ||r||^(p(s-1)) / ||L* J_s(r)||^p, beta1), with the
    degenerate ||L* J_s(r)|| = 0 case falling back to beta1.  The applied
    step is mu = mu_tilde (||r||^p + sigma eps_n)^(1 - s/p), except that in
    noisy mode mu = 0 whenever the discrepancy test holds.
    """
    p, s = cfg.p, cfg.s
    test_value = r_norm ** p + cfg.sigma * eps_n
    if noisy and test_value <= (cfg.tau * cfg.delta) ** p:
        return 0.0, 0.0
    if ljr_norm == 0.0:
        mu_tilde = cfg.beta1
    else:
        mu_tilde = min(cfg.beta0 * r_norm ** (p * (s - 1.0)) / ljr_norm ** p, cfg.beta1)
    return mu_tilde, mu_tilde * test_value ** (1.0 - s / p)


@dataclass
class StepRecord:
    """Quantities observed at one outer iterate."""

    n: int
    i_n: int
    residual_norm: float
    mu_tilde: float
    mu: float
    eps_n: float
    inner_iterations: int
    q_n: int
    rel_error: float = None
    bregman_to_truth: float = None


@dataclass
class RunTrace:
    records: list = field(default_factory=list)
    terminated_by: str = "cap"
    n_final: int = 0


def run(problem, penalty, cfg, mode="plain", truth=None, diag_every=1):
    """Drive the outer iteration to termination.

    Parameters
    ----------
    problem : ForwardProblem
    penalty : QuadraticPenalty or TotalVariationPenalty
    cfg : SolverConfig
        cfg.n_blocks, when nonzero, must match problem.num_blocks.
    mode : {"plain", "accelerated"}
        Accelerated mode applies Nesterov extrapolation with weight
        n / (n + alpha) to both x and xi before each step; at n = 0 the two
        modes coincide.
    truth : ndarray, optional
        Ground-truth grid; when given, records carry the relative error and
        the eps-Bregman distance from the iterate to the truth, evaluated
        every `diag_every` outer steps (and always at the final iterate).

    Returns (pair, trace) with the final certified PrimalDualPair.
    """
    if mode not in ("plain", "accelerated"):
        raise ValueError(f"unknown mode: {mode!r}")
    n_blocks = problem.num_blocks
    if cfg.n_blocks and cfg.n_blocks != n_blocks:
        raise ValueError("cfg.n_blocks disagrees with problem.num_blocks")
    if n_blocks < 1:
        raise ValueError("forward problem must expose at least one block")
    accel = mode == "accelerated"
    noisy = cfg.delta > 0.0
    threshold = (cfg.tau * cfg.delta) ** cfg.p

    shape = problem.domain_shape
    pair = PrimalDualPair(x=np.zeros(shape), xi=np.zeros(shape), eps=0.0)
    prev = pair
    lam_warm = None
    theta_truth = penalty.value(truth) if truth is not None else None

    trace = RunTrace(records=[], terminated_by="cap", n_final=cfg.n_max)
    q = 0
    for n in range(cfg.n_max + 1):
        i = n % n_blocks
        if accel and n > 0:
            w = n / (n + cfg.alpha)
            x_eval = pair.x + w * (pair.x - prev.x)
            xi_eval = pair.xi + w * (pair.xi - prev.xi)
        else:
            x_eval, xi_eval = pair.x, pair.xi

        r = problem.residual(i, x_eval)
        r_norm = float(np.linalg.norm(r))
        eps_n = max(pair.eps, cfg.eps_floor)
        held = noisy and r_norm ** cfg.p + cfg.sigma * eps_n <= threshold
        q = q + 1 if held else 0

        rec = StepRecord(
            n=n, i_n=i, residual_norm=r_norm, mu_tilde=0.0, mu=0.0,
            eps_n=eps_n, inner_iterations=0, q_n=q,
        )
        if truth is not None and (n % diag_every == 0 or n == cfg.n_max):
            rec.rel_error = _relative_error(pair.x, truth)
            rec.bregman_to_truth = _bregman(penalty, pair, truth, eps_n, theta_truth)
        trace.records.append(rec)

        if held:
            if q == n_blocks:
                trace.terminated_by = "discrepancy"
                trace.n_final = n
                break
            prev = pair  # idle step: iterate frozen, momentum collapses
            continue

        jr = duality_map(r, cfg.s)
        g = problem.adjoint(i, x_eval, jr)
        g_norm = float(np.linalg.norm(g))
        rec.mu_tilde, rec.mu = step_size(r_norm, g_norm, eps_n, cfg, noisy)

        if n == cfg.n_max:
            break  # cap: final iterate recorded, no further update
        if not accel and g_norm == 0.0:
            prev = pair  # zero update direction: nothing would change
            continue

        xi_next = xi_eval - rec.mu * g
        new_pair, info = inner_solver(
            xi_next, penalty,
            gap_target=cfg.gap_target(n + 1),
            warm_x=pair.x, warm_lam=lam_warm,
            max_iter=cfg.inner_max_iter,
        )
        rec.inner_iterations = info.iterations
        if not info.converged:
            trace.terminated_by = "inner-failure"
            trace.n_final = n
            break
        lam_warm = info.lam if info.lam is not None else lam_warm
        prev = pair
        pair = new_pair

    last = trace.records[-1] if trace.records else None
    if truth is not None and last is not None and last.rel_error is None:
        last.rel_error = _relative_error(pair.x, truth)
        last.bregman_to_truth = _bregman(penalty, pair, truth, last.eps_n, theta_truth)
    return pair, trace


def _relative_error(x, truth):
    denom = float(np.linalg.norm(truth))
    if denom == 0.0:
        return float(np.linalg.norm(x))
    return float(np.linalg.norm(x - truth)) / denom


def _bregman(penalty, pair, truth, eps_n, theta_truth):
    if math.isinf(theta_truth):
        return math.inf
    inflated = PrimalDualPair(x=pair.x, xi=pair.xi, eps=eps_n)
    return bregman_eps_distance(penalty, inflated, truth)


@dataclass
class ValidationReport:
    """Admissibility summary for a configuration; advisory, never blocking."""

    kappa: float
    kappa_beta1_sigma: float
    step_cap_ok: bool
    c1: float = None
    c1_ok: bool = None
    eps_budget: float = None
    warnings: list = field(default_factory=list)


def validate_config(cfg, beta=None, c0=None, gamma=None, rho=None):
    """Check the step-size admissibility conditions and collect warnings.

    kappa is 1 for p >= s and (beta^(p/(s-p)) - 1)^((p-s)/p) otherwise, for
    an auxiliary constant beta > 1.  When beta is omitted it defaults to 2,
    or to min(2, (1 + 1/max(gamma, 1e-3)) / 2) when gamma is supplied, which
    keeps beta * gamma < 1 whenever possible.  The report states whether
    kappa * beta1 * sigma <= 1 and, when c0 (and optionally the nonlinearity
    bound gamma) are given, whether

        c1 = 1/beta - gamma - (1+gamma)/tau - (2/p*) (beta0 / (2 c0))^(p*-1)

    is positive, p* being the conjugate exponent of p.  With rho and c0 both
    given the report also carries the eps budget c0 rho^p / 16 that the
    certified eps sequence should stay below in total.
    """
    if beta is None:
        beta = 2.0 if gamma is None else min(2.0, (1.0 + 1.0 / max(gamma, 1e-3)) / 2.0)
    if not beta > 1.0:
        raise ValueError("auxiliary constant beta must exceed 1")
    p, s = cfg.p, cfg.s
    if p >= s:
        kappa = 1.0
    else:
        kappa = (beta ** (p / (s - p)) - 1.0) ** ((p - s) / p)
    product = kappa * cfg.beta1 * cfg.sigma
    report = ValidationReport(kappa=kappa, kappa_beta1_sigma=product, step_cap_ok=product <= 1.0)
    if not report.step_cap_ok:
        report.warnings.append(
            f"kappa * beta1 * sigma = {product:g} exceeds 1; "
            "the step-size cap is outside the admissible range"
        )
    if gamma is not None and not 0.0 <= gamma * beta < 1.0:
        report.warnings.append(
            f"nonlinearity bound gamma = {gamma:g} with beta = {beta:g} "
            "violates beta * gamma < 1"
        )
    if c0 is not None:
        g = 0.0 if gamma is None else gamma
        if p > 1.0:
            p_conj = p / (p - 1.0)
            slope_term = (2.0 / p_conj) * (cfg.beta0 / (2.0 * c0)) ** (p_conj - 1.0)
        else:
            # conjugate exponent is infinite: the term survives only above ratio 1
            slope_term = 0.0 if cfg.beta0 <= 2.0 * c0 else math.inf
        report.c1 = 1.0 / beta - g - (1.0 + g) / cfg.tau - slope_term
        report.c1_ok = report.c1 > 0.0
        if not report.c1_ok:
            report.warnings.append(
                f"descent margin c1 = {report.c1:g} is not positive for beta = {beta:g}"
            )
        if rho is not None:
            report.eps_budget = c0 * rho ** p / 16.0
    if cfg.gap_exponent <= 1.0:
        report.warnings.append(
            f"gap_exponent = {cfg.gap_exponent:g} makes the inner gap targets "
            "non-summable"
        )
    return report
