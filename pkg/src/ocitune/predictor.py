"""Output-error predictor for the controller-identification reformulation.

The plant model is G(q,theta) = L_d(q,eta) N(q,P) / D(q,P), where N/D
decomposes the controller inverse.  When D has roots outside the unit
circle the plain output-error recursion diverges, so the prediction error
is pre-multiplied by the all-pass filter D_U/D_U*; the filtered error

    eps_F = (D_U/D_U*) y  -  L_d N / (D_S D_U*) u

runs entirely on stable recursions and keeps the residual's power spectrum
magnitude.  The analytic Jacobian treats the stable/unstable coefficient
split as an implicit function of P and resolves it through the (square)
Sylvester-structured Jacobian of the coefficient-convolution map.

L_d and its eta sensitivities are assembled structurally from the
reference-model templates (diagonal or single-coupled-row patterns) instead
of through generic rational-matrix algebra: every filter coefficient is then
a polynomial function of eta, the structural poles at q=1 are tracked as
integer counts and cancelled exactly against the (q-1) factors carried by
the controller-inverse numerators, and no root finding enters the
evaluation path.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .controller import (
    ControllerStructure,
    N_jacobian,
    delta_jacobian,
    inverse_decomposition,
)
from .errors import ImproperPredictor, SylvesterSingular, UnstableFilter
from .polynomial import FactoredDenominator, Polynomial, factor_unit_circle, sylvester_jacobian
from .refmodel import RefModelSpec
from .transfer import filter_series

__all__ = [
    "Theta",
    "PredictionResult",
    "predict",
    "prediction_error",
    "filtered_error",
    "cost_VNF",
    "jacobian_eps_F",
    "OCIProblem",
]

_QM1 = np.array([1.0, -1.0])


@dataclass
class Theta:
    """Joint parameter point theta = [P; eta]."""

    p: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).reshape(-1)
        self.eta = np.asarray(self.eta, dtype=float).reshape(-1)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.eta])

    @classmethod
    def from_vector(cls, x: np.ndarray, structure: ControllerStructure,
                    spec: RefModelSpec) -> "Theta":
        x = np.asarray(x, dtype=float).reshape(-1)
        n_p = structure.n_params
        if x.size != n_p + spec.n_eta:
            raise ValueError(f"expected {n_p + spec.n_eta} parameters, got {x.size}")
        return cls(p=x[:n_p], eta=x[n_p:])


@dataclass
class PredictionResult:
    eps_f: np.ndarray               # (n, N_kept) residual series
    cost: float                     # (1/N_kept) sum of squared norms
    jacobian: np.ndarray | None     # (N_kept*n, n_P+n_eta) stacked blocks
    factorization: FactoredDenominator | None = None


@dataclass
class _Term:
    """One loop-filter entry num/((q-1)^units * den) with stable den."""

    num: np.ndarray
    den: np.ndarray
    units: int


def _conv_all(factors) -> np.ndarray:
    out = np.ones(1)
    for f in factors:
        out = np.convolve(out, np.atleast_1d(f))
    return out


def _make_term(num_factors, unit_num: int, den_factors, unit_den: int) -> _Term:
    num = _conv_all(num_factors)
    net = unit_den - unit_num
    while net < 0:
        num = np.convolve(num, _QM1)
        net += 1
    return _Term(num=num, den=_conv_all(den_factors), units=net)


def _split_unit_root(g: Polynomial) -> tuple[np.ndarray, int]:
    """Deflate one structural (q-1) factor when the synthetic-division
    remainder is below 1e-9 relative."""
    scale = np.max(np.abs(g.coeffs))
    if scale > 0 and abs(g(1.0)) <= 1e-9 * scale:
        quot, _ = g.deflate(1.0)
        return quot.coeffs, 1
    return g.coeffs, 0


class _StructuredLoop:
    """Closed-form L_d entries and eta sensitivities for the supported
    reference-model patterns.

    With tau_j = n_j/Delta_j the diagonal entries and t_kj the distinguished
    row's couplings, the resolvent of I - T_d gives

        L_d[j,j] = n_j / g_j,            g_j = Delta_j - n_j,
        L_d[k,j] = t_kj Delta_k Delta_j / (Delta_kj g_k g_j),

    and dL_d = R dT_d R reduces to the same pieces.  Each g_j is split as
    (q-1)^h * w_j so the unit poles are integers, never float roots.
    """

    def __init__(self, spec: RefModelSpec):
        self.spec = spec
        self.n = spec.n
        self.k = spec.row_k if spec.structure == "triangular" else None
        self.diag_dens = [spec.entries[j][j].denominator() for j in range(self.n)]
        self.coup_dens = {}
        for j in range(self.n):
            if self.k is not None and j != self.k:
                t = spec.entries[self.k][j]
                if t.kind != "zero":
                    self.coup_dens[j] = t.denominator()

    def _pieces(self, eta: np.ndarray):
        spec = self.spec
        values = spec._slot_values(eta)
        n_diag, w, has1 = [], [], []
        for j in range(self.n):
            t = spec.entries[j][j]
            nj = (Polynomial([0.0]) if t.kind == "zero"
                  else t.numerator(values.get((j, j), {})))
            gj = self.diag_dens[j] - nj
            wj, hj = _split_unit_root(gj)
            if len(wj) > 1:
                roots = np.roots(wj)
                if np.any(np.abs(roots) >= 1.0):
                    raise UnstableFilter(
                        f"loop filter pole at {roots[np.argmax(np.abs(roots))]:.6g} "
                        f"from diagonal entry {j + 1}"
                    )
            n_diag.append(nj)
            w.append(wj)
            has1.append(hj)
        cores = {}
        if self.k is not None:
            for j in self.coup_dens:
                t = self.spec.entries[self.k][j]
                cores[j] = t.core_numerator(values.get((self.k, j), {}))
        return n_diag, w, has1, cores, values

    def terms(self, eta: np.ndarray, with_derivatives: bool):
        n_diag, w, has1, cores, _ = self._pieces(eta)
        k = self.k
        ld: dict[tuple[int, int], _Term] = {}
        for j in range(self.n):
            if not n_diag[j].is_zero:
                ld[(j, j)] = _make_term([n_diag[j].coeffs], 0, [w[j]], has1[j])
        for j, core in cores.items():
            if np.any(core.coeffs):
                dkj = self.coup_dens[j].coeffs
                ld[(k, j)] = _make_term(
                    [core.coeffs, self.diag_dens[k].coeffs, self.diag_dens[j].coeffs], 1,
                    [dkj, w[k], w[j]], has1[k] + has1[j])

        if not with_derivatives:
            return ld, None

        dld: list[dict[tuple[int, int], _Term]] = []
        for (i, j, slot) in self.spec.slots():
            t = self.spec.entries[i][j]
            sens: dict[tuple[int, int], _Term] = {}
            if i == j:
                dn, pn = t.core_slot_derivative(slot)
                sens[(j, j)] = _make_term(
                    [dn.coeffs, self.diag_dens[j].coeffs], pn,
                    [w[j], w[j]], 2 * has1[j])
                if k is not None and j == k:
                    for b, core in cores.items():
                        if not np.any(core.coeffs):
                            continue
                        sens[(k, b)] = _make_term(
                            [dn.coeffs, core.coeffs, self.diag_dens[k].coeffs,
                             self.diag_dens[b].coeffs], pn + 1,
                            [self.coup_dens[b].coeffs, w[k], w[k], w[b]],
                            2 * has1[k] + has1[b])
                elif k is not None and j in cores:
                    core = cores[j]
                    if np.any(core.coeffs):
                        sens[(k, j)] = _make_term(
                            [dn.coeffs, core.coeffs, self.diag_dens[k].coeffs,
                             self.diag_dens[j].coeffs], pn + 1,
                            [self.coup_dens[j].coeffs, w[k], w[j], w[j]],
                            has1[k] + 2 * has1[j])
            else:
                dm, pm = t.core_slot_derivative(slot)
                sens[(k, j)] = _make_term(
                    [dm.coeffs, self.diag_dens[k].coeffs, self.diag_dens[j].coeffs],
                    pm + 1,
                    [self.coup_dens[j].coeffs, w[k], w[j]], has1[k] + has1[j])
            dld.append(sens)
        return ld, dld


@lru_cache(maxsize=32)
def _structured_loop(spec: RefModelSpec) -> _StructuredLoop:
    return _StructuredLoop(spec)


class _Plan:
    """Everything assembled at one theta that the filters need."""

    def __init__(self, theta: Theta, structure: ControllerStructure,
                 spec: RefModelSpec, factor: bool, with_derivatives: bool = False):
        self.n = structure.n
        dec = inverse_decomposition(structure, theta.p)
        self.dec = dec
        self.delta = dec.delta
        self.ntil = [[dec.n_reduced[i][j].coeffs for j in range(self.n)]
                     for i in range(self.n)]
        if factor:
            self.fac = factor_unit_circle(dec.D)
            self.den_core = np.convolve(self.fac.d_s.coeffs, self.fac.d_u_star.coeffs)
        else:
            self.fac = None
            self.den_core = dec.delta
        self.ld, self.dld = _structured_loop(spec).terms(theta.eta, with_derivatives)

    def entry_filter(self, term: _Term, num_poly: np.ndarray):
        """Combine a loop-filter term with a controller-side numerator
        polynomial (which carries one structural (q-1)) into one proper
        scalar filter over the active denominator."""
        pending = term.units - 1
        if pending > 0:
            raise UnstableFilter("uncancelled pole at q=1 in a predictor filter; "
                                 "the reference model lacks the structural (q-1) zeros")
        num = np.convolve(term.num, num_poly)
        if pending < 0:
            num = np.convolve(num, _QM1)
        den = np.convolve(term.den, self.den_core)
        if len(num) > len(den):
            raise ImproperPredictor(
                "assembled predictor filter is non-causal; check the relative "
                "degrees of the reference model and controller structure"
            )
        return num, den

    def forced_output(self, u: np.ndarray) -> np.ndarray:
        """L_d N / den_core applied to u, channel by channel."""
        out = np.zeros_like(u)
        for (i, k), term in self.ld.items():
            for j in range(self.n):
                npoly = self.ntil[k][j]
                if not np.any(npoly):
                    continue
                num, den = self.entry_filter(term, npoly)
                out[i] += filter_series(num, den, u[j])
        return out


def _check_series(u: np.ndarray, n: int) -> np.ndarray:
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[0] != n:
        raise ValueError(f"series has {u.shape[0]} channels, expected {n}")
    return u


def predict(theta: Theta, structure: ControllerStructure, spec: RefModelSpec,
            u: np.ndarray) -> np.ndarray:
    """One-step-ahead output prediction L_d N/D u with zero initial
    conditions.  Runs the unfactored denominator: it diverges when D has
    unstable roots, which is exactly what the filtered error avoids."""
    u = _check_series(u, structure.n)
    plan = _Plan(theta, structure, spec, factor=False)
    return plan.forced_output(u)


def prediction_error(theta: Theta, structure: ControllerStructure, spec: RefModelSpec,
                     u: np.ndarray, y: np.ndarray) -> np.ndarray:
    """eps = y - y_hat."""
    y = _check_series(y, structure.n)
    yhat = predict(theta, structure, spec, u)
    if y.shape != yhat.shape:
        raise ValueError("input and output series lengths differ")
    return y - yhat


def filtered_error(theta: Theta, structure: ControllerStructure, spec: RefModelSpec,
                   u: np.ndarray, y: np.ndarray, with_jacobian: bool = False,
                   transient_skip: int = 0) -> PredictionResult:
    """All-pass-filtered prediction error, cost, and (optionally) the
    analytic Jacobian with respect to theta.

    With no unstable roots in D the result equals the plain prediction
    error sample for sample.
    """
    n = structure.n
    u = _check_series(u, n)
    y = _check_series(y, n)
    if u.shape != y.shape:
        raise ValueError("input and output series shapes differ")
    nsamp = u.shape[1]
    plan = _Plan(theta, structure, spec, factor=True, with_derivatives=with_jacobian)
    fac = plan.fac

    y_term = np.empty_like(y)
    for i in range(n):
        y_term[i] = filter_series(fac.d_u.coeffs, fac.d_u_star.coeffs, y[i])
    u_term = plan.forced_output(u)
    eps = y_term - u_term

    jac = None
    if with_jacobian:
        n_p = structure.n_params
        n_eta = spec.n_eta
        jac = np.zeros((nsamp, n, n_p + n_eta))

        # direct P block: only N depends on P once the split is frozen
        for m, sparse in enumerate(N_jacobian(structure, theta.p, reduced=True)):
            for (k, j), dpoly in sparse.items():
                for i in range(n):
                    term = plan.ld.get((i, k))
                    if term is None:
                        continue
                    num, den = plan.entry_filter(term, dpoly.coeffs)
                    jac[:, i, m] -= filter_series(num, den, u[j])

        # split-coefficient block, folded back through the implicit map
        n_s, n_u = fac.n_s, fac.n_u
        d_s = fac.d_s.coeffs
        d_u = fac.d_u.coeffs
        d_us = fac.d_u_star.coeffs
        cols = np.zeros((nsamp, n, n_s + 1 + n_u))
        for idx in range(n_s + 1):
            num = np.concatenate([[1.0], np.zeros(n_s - idx)])
            for ch in range(n):
                cols[:, ch, idx] = filter_series(num, d_s, u_term[ch])
        d_us2 = np.convolve(d_us, d_us)
        for iu in range(1, n_u + 1):
            shift = np.concatenate([[1.0], np.zeros(iu)])
            adv = np.concatenate([[1.0], np.zeros(n_u - iu)])
            num2 = np.convolve(d_u, shift)
            for ch in range(n):
                t1 = filter_series(adv, d_us, y[ch])
                t2 = filter_series(num2, d_us2, y[ch])
                t3 = filter_series(shift, d_us, u_term[ch])
                cols[:, ch, n_s + iu] = t1 - t2 + t3
        syl = sylvester_jacobian(d_s, d_u[1:])
        try:
            split_map = np.linalg.solve(syl, delta_jacobian(structure, theta.p))
        except np.linalg.LinAlgError as exc:
            raise SylvesterSingular(
                "stable and unstable factors share a root; factorization corrupted"
            ) from exc
        jac[:, :, :n_p] += cols.reshape(nsamp * n, -1).dot(split_map).reshape(nsamp, n, n_p)

        # eta block from the structured sensitivities
        for m, sens in enumerate(plan.dld):
            for (i, k), term in sens.items():
                for j in range(n):
                    npoly = plan.ntil[k][j]
                    if not np.any(npoly):
                        continue
                    num, den = plan.entry_filter(term, npoly)
                    jac[:, i, n_p + m] -= filter_series(num, den, u[j])

    keep = slice(int(transient_skip), None)
    eps_kept = eps[:, keep]
    n_kept = eps_kept.shape[1]
    if n_kept == 0:
        raise ValueError("transient_skip removed every sample")
    cost = float(np.sum(eps_kept ** 2) / n_kept)
    if jac is not None:
        jac = jac[keep].reshape(n_kept * n, -1)
    return PredictionResult(eps_f=eps_kept, cost=cost, jacobian=jac, factorization=fac)


def cost_VNF(theta: Theta, structure: ControllerStructure, spec: RefModelSpec,
             u: np.ndarray, y: np.ndarray, transient_skip: int = 0) -> float:
    return filtered_error(theta, structure, spec, u, y,
                          transient_skip=transient_skip).cost


def jacobian_eps_F(theta: Theta, structure: ControllerStructure, spec: RefModelSpec,
                   u: np.ndarray, y: np.ndarray, transient_skip: int = 0) -> np.ndarray:
    return filtered_error(theta, structure, spec, u, y, with_jacobian=True,
                          transient_skip=transient_skip).jacobian


class OCIProblem:
    """Least-squares view of the filtered cost for the optimizer.

    Residual is the stacked filtered error scaled by 1/sqrt(N) so that
    ||residual||^2 equals the mean-square cost.
    """

    def __init__(self, structure: ControllerStructure, spec: RefModelSpec,
                 u: np.ndarray, y: np.ndarray, transient_skip: int = 0):
        self.structure = structure
        self.spec = spec
        self.u = np.atleast_2d(np.asarray(u, dtype=float))
        self.y = np.atleast_2d(np.asarray(y, dtype=float))
        self.transient_skip = int(transient_skip)

    @property
    def n_params(self) -> int:
        return self.structure.n_params + self.spec.n_eta

    def split(self, x: np.ndarray) -> Theta:
        return Theta.from_vector(x, self.structure, self.spec)

    def cost(self, x: np.ndarray) -> float:
        return cost_VNF(self.split(x), self.structure, self.spec, self.u, self.y,
                        transient_skip=self.transient_skip)

    def residual(self, x: np.ndarray) -> np.ndarray:
        res = filtered_error(self.split(x), self.structure, self.spec, self.u, self.y,
                             transient_skip=self.transient_skip)
        return res.eps_f.T.reshape(-1) / np.sqrt(res.eps_f.shape[1])

    def residual_jacobian(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        res = filtered_error(self.split(x), self.structure, self.spec, self.u, self.y,
                             with_jacobian=True, transient_skip=self.transient_skip)
        s = 1.0 / np.sqrt(res.eps_f.shape[1])
        return res.eps_f.T.reshape(-1) * s, res.jacobian * s


class FrozenEtaProblem:
    """View of an OCIProblem with the reference-model parameters pinned.

    Used for staged warm starts: fit the controller block first under a
    fixed, typically non-minimum-phase-seeded reference model, then release
    everything for the joint refinement.
    """

    def __init__(self, problem: OCIProblem, eta: np.ndarray):
        self.problem = problem
        self.eta = np.asarray(eta, dtype=float).reshape(-1)
        self.n_p = problem.structure.n_params

    def _full(self, p: np.ndarray) -> np.ndarray:
        return np.concatenate([np.asarray(p, dtype=float).reshape(-1), self.eta])

    def cost(self, p: np.ndarray) -> float:
        return self.problem.cost(self._full(p))

    def residual(self, p: np.ndarray) -> np.ndarray:
        return self.problem.residual(self._full(p))

    def residual_jacobian(self, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        r, jac = self.problem.residual_jacobian(self._full(p))
        return r, jac[:, :self.n_p]
