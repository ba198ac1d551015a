"""Minimization of the filtered identification cost.

A short steepest-descent phase with Armijo backtracking escapes poor
initializations, then Levenberg-Marquardt takes over.  Candidate steps that
throw (root on the unit circle, degenerate leading coefficient, unstable
loop filter) or produce a non-finite cost count as rejected steps: the
damping grows and the iterate stays put.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .controller import ControllerStructure
from .errors import AllStartsFailed, NonFiniteCost, OcituneError
from .predictor import Theta
from .refmodel import RefModelSpec

__all__ = ["OptimOptions", "OptimReport", "minimize", "audit_gradient", "default_init"]

_LAMBDA_MAX = 1e15
_ARMIJO_C = 1e-4
_MAX_HALVINGS = 30
_MAX_SHRINK_PROBES = 25


@dataclass(frozen=True)
class OptimOptions:
    sd_iters: int = 20
    lm_max_iters: int = 500
    lm_lambda0: float = 1e-2
    lm_up: float = 10.0
    lm_down: float = 0.1
    grad_tol: float = 1e-8
    cost_rel_tol: float = 1e-10
    multistart: int = 1
    multistart_std: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if min(self.grad_tol, self.cost_rel_tol, self.lm_lambda0) <= 0:
            raise ValueError("tolerances and the initial damping must be positive")
        if not (self.lm_up > 1.0 > self.lm_down > 0.0):
            raise ValueError("need lm_up > 1 > lm_down > 0")
        if self.multistart < 1:
            raise ValueError("multistart must be >= 1")
        if self.multistart_std <= 0:
            raise ValueError("multistart perturbation scale must be positive")


@dataclass
class OptimReport:
    theta: np.ndarray
    cost: float
    iterations: int
    termination: str
    cost_trace: list = field(default_factory=list)
    grad_norm: float = float("nan")
    n_rejected: int = 0
    start_index: int = 0


def _safe_cost(problem, x: np.ndarray) -> float:
    try:
        c = problem.cost(x)
    except OcituneError:
        return float("inf")
    return c if np.isfinite(c) else float("inf")


def _single_start(problem, x0: np.ndarray, opts: OptimOptions) -> OptimReport:
    x = np.array(x0, dtype=float)
    cost = _safe_cost(problem, x)
    if not np.isfinite(cost):
        raise NonFiniteCost("initial point has non-finite cost")
    trace = [cost]
    rejected = 0

    # steepest-descent warm-up
    for _ in range(opts.sd_iters):
        r, jac = problem.residual_jacobian(x)
        grad = 2.0 * jac.T.dot(r)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < opts.grad_tol:
            return OptimReport(x, cost, 0, "gradient", trace, gnorm, rejected)
        alpha = 1.0 / max(gnorm, 1.0)
        moved = False
        for _ in range(_MAX_HALVINGS):
            cand = x - alpha * grad
            c = _safe_cost(problem, cand)
            if c <= cost - _ARMIJO_C * alpha * gnorm ** 2:
                x, cost = cand, c
                trace.append(cost)
                moved = True
                break
            alpha *= 0.5
        if not moved:
            break

    # Levenberg-Marquardt
    lam = opts.lm_lambda0
    gnorm = float("nan")
    iterations = 0
    termination = "max_iterations"
    for it in range(opts.lm_max_iters):
        iterations = it + 1
        r, jac = problem.residual_jacobian(x)
        grad = 2.0 * jac.T.dot(r)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < opts.grad_tol:
            iterations = it
            termination = "gradient"
            break
        jtj = jac.T.dot(jac)
        jtr = jac.T.dot(r)
        eye = np.eye(jtj.shape[0])

        def try_step(lam_try):
            try:
                step = np.linalg.solve(jtj + lam_try * eye, -jtr)
            except np.linalg.LinAlgError:
                return None, float("inf")
            return step, _safe_cost(problem, x + step)

        accepted = None
        while True:
            step, c_new = try_step(lam)
            if c_new < cost:
                accepted = (step, c_new)
                break
            rejected += 1
            lam *= opts.lm_up
            if lam > _LAMBDA_MAX:
                break
        if accepted is None:
            termination = "damping_overflow"
            break
        step, c_new = accepted
        # keep relaxing the damping while it strictly helps (same Jacobian)
        for _ in range(_MAX_SHRINK_PROBES):
            lam_try = lam * opts.lm_down
            step2, c2 = try_step(lam_try)
            if c2 < c_new:
                step, c_new, lam = step2, c2, lam_try
            else:
                break
        prev = cost
        x = x + step
        cost = c_new
        trace.append(cost)
        lam = max(lam * opts.lm_down, 1e-300)
        if prev - cost <= opts.cost_rel_tol * max(prev, 1e-300):
            termination = "cost_stall"
            break

    return OptimReport(x, cost, iterations, termination, trace, gnorm, rejected)


def minimize(problem, theta0: np.ndarray, opts: OptimOptions | None = None) -> OptimReport:
    """Minimize the problem's cost from theta0, optionally from several
    perturbed starts; returns the best report found."""
    opts = opts or OptimOptions()
    x0 = np.asarray(theta0, dtype=float).reshape(-1)
    starts = [x0]
    if opts.multistart > 1:
        rng = np.random.default_rng(opts.seed)
        starts += [x0 + rng.normal(scale=opts.multistart_std, size=x0.size)
                   for _ in range(opts.multistart - 1)]
    best = None
    failures = []
    for idx, xs in enumerate(starts):
        try:
            rep = _single_start(problem, xs, opts)
        except NonFiniteCost as exc:
            failures.append(exc)
            continue
        rep.start_index = idx
        if best is None or rep.cost < best.cost:
            best = rep
    if best is None:
        if opts.multistart == 1:
            raise failures[0]
        raise AllStartsFailed(f"all {opts.multistart} starts failed: {failures[0]}")
    return best


def audit_gradient(problem, x: np.ndarray, step: float = 1e-6) -> float:
    """Max relative deviation between the analytic Jacobian columns and
    central finite differences of the residual."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size == 0:
        return 0.0
    _, jac = problem.residual_jacobian(x)
    worst = 0.0
    for k in range(x.size):
        h = step * (1.0 + abs(x[k]))
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        fd = (problem.residual(xp) - problem.residual(xm)) / (2.0 * h)
        col = jac[:, k]
        denom = max(np.linalg.norm(col), np.linalg.norm(fd), 1e-12)
        worst = max(worst, float(np.linalg.norm(fd - col) / denom))
    return worst


def default_init(structure: ControllerStructure, spec: RefModelSpec) -> Theta:
    """Starting point: mildly-tuned diagonal PI action, zero couplings, and
    minimum-phase reference numerators (all free slots at zero)."""
    p = np.zeros(structure.n_params)
    pos = 0
    for i in range(structure.n):
        for j in range(structure.n):
            if not structure.mask[i][j]:
                continue
            width = structure.degrees[i][j] + 1
            if i == j:
                p[pos] = 0.1
                if width > 1:
                    p[pos + 1] = -0.05
            pos += width
    return Theta(p=p, eta=np.zeros(spec.n_eta))
