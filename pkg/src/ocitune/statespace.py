"""State-space backbone for numeric feedback composition.

Rational-matrix algebra with pole-zero cancellation is exact for the
structural identities in this package (ideal controllers, loop filters),
but chained products around a feedback loop with *identified* coefficients
push polynomial degrees past what root finding can reduce reliably.  The
closed-loop paths that consume inexact controllers therefore run on a
column-wise state-space realization: poles come from one eigenvalue
problem and simulations from a linear recursion, with no polynomial
conditioning involved.  Hidden modes created by plant/controller
cancellations remain present in the interconnection state matrix, which is
exactly what an internal-stability test needs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.signal

from .errors import AlgebraicLoop
from .polynomial import Polynomial
from .rational import LCM_CLUSTER_RADIUS, _cluster_roots
from .transfer import TransferMatrix

__all__ = ["StateSpace", "tm_to_ss", "feedback_maps", "ss_simulate", "closed_loop_poles"]


@dataclass
class StateSpace:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    @property
    def order(self) -> int:
        return self.a.shape[0]

    def poles(self) -> np.ndarray:
        if self.order == 0:
            return np.array([], dtype=complex)
        return np.linalg.eigvals(self.a)


def _column_lcm_roots(dens: list[Polynomial]) -> list[complex]:
    """Least common denominator of a column as a root multiset."""
    acc: list[tuple[complex, int]] = []
    for den in dens:
        if den.degree == 0:
            continue
        clusters = _cluster_roots(den.roots(), LCM_CLUSTER_RADIUS)
        merged = []
        used = [False] * len(acc)
        for v, m in clusters:
            hit = None
            for idx, (va, ma) in enumerate(acc):
                if not used[idx] and abs(v - va) <= LCM_CLUSTER_RADIUS:
                    hit = idx
                    break
            if hit is None:
                merged.append((v, m))
            else:
                used[hit] = True
                va, ma = acc[hit]
                merged.append((va, max(ma, m)))
        acc = [pair for idx, pair in enumerate(acc) if not used[idx]] + merged
    roots: list[complex] = []
    for v, m in acc:
        roots.extend([v] * m)
    return roots


def tm_to_ss(tm: TransferMatrix) -> StateSpace:
    """Column-wise common-denominator realization of a proper transfer matrix.

    Each input column gets one companion block over the column's least
    common denominator, so shared poles (like the controller's integral
    action) appear once per column instead of once per entry.
    """
    n = tm.n
    a_blocks, b_blocks, c_blocks = [], [], []
    d = np.zeros((n, n))
    for j in range(n):
        dens = [tm[i, j].den for i in range(n) if not tm[i, j].is_zero]
        roots = _column_lcm_roots(dens) if dens else []
        if not roots:
            for i in range(n):
                e = tm[i, j]
                if not e.is_zero:
                    d[i, j] += float(e.num.coeffs[0] / e.den.coeffs[0])
            continue
        den = Polynomial.from_roots(np.array(roots))
        m = den.degree
        num_rows = np.zeros((n, m + 1))
        for i in range(n):
            e = tm[i, j]
            if e.is_zero:
                continue
            quot, rem = np.polydiv(den.coeffs, e.den.coeffs)
            scale = max(np.max(np.abs(den.coeffs)), 1.0)
            if np.max(np.abs(np.atleast_1d(rem))) > 1e-7 * scale:
                raise ValueError("column denominator division left a large remainder")
            ext = np.convolve(e.num.coeffs, quot)
            if len(ext) > m + 1:
                raise ValueError(f"entry ({i},{j}) is not proper")
            num_rows[i, m + 1 - len(ext):] = ext
        with warnings.catch_warnings():
            # zero leading numerator coefficients are expected here
            warnings.simplefilter("ignore", scipy.signal.BadCoefficients)
            a_j, b_j, c_j, d_j = scipy.signal.tf2ss(num_rows, den.coeffs)
        a_blocks.append(a_j)
        b_blocks.append((j, b_j))
        c_blocks.append(c_j)
        d[:, j] += d_j[:, 0]
    if not a_blocks:
        return StateSpace(np.zeros((0, 0)), np.zeros((0, n)), np.zeros((n, 0)), d)
    a = scipy.linalg.block_diag(*a_blocks)
    total = a.shape[0]
    b = np.zeros((total, n))
    row = 0
    for j, b_j in b_blocks:
        b[row:row + b_j.shape[0], j] = b_j[:, 0]
        row += b_j.shape[0]
    c = np.hstack(c_blocks)
    return StateSpace(a, b, c, d)


def feedback_maps(plant: TransferMatrix, controller: TransferMatrix):
    """Closed-loop maps r -> y and r -> u for u = C (r - y), y = G u.

    Returns (ss_ry, ss_ru) sharing the same state matrix.
    """
    g = tm_to_ss(plant)
    c = tm_to_ss(controller)
    n = plant.n
    loop_gain = np.eye(n) + g.d @ c.d
    if abs(np.linalg.det(loop_gain)) < 1e-12:
        raise AlgebraicLoop("I + G*C is singular at q = infinity")
    minv = np.linalg.inv(loop_gain)
    ycg = minv @ g.c
    ycc = minv @ g.d @ c.c
    yr = minv @ g.d @ c.d
    a = np.block([
        [g.a - g.b @ c.d @ ycg, g.b @ (c.c - c.d @ ycc)],
        [-c.b @ ycg, c.a - c.b @ ycc],
    ])
    b = np.vstack([g.b @ c.d @ (np.eye(n) - yr), c.b @ (np.eye(n) - yr)])
    c_y = np.hstack([ycg, ycc])
    d_y = yr
    c_u = np.hstack([-c.d @ ycg, c.c - c.d @ ycc])
    d_u = c.d @ (np.eye(n) - yr)
    return StateSpace(a, b, c_y, d_y), StateSpace(a, b, c_u, d_u)


def ss_simulate(ss: StateSpace, u: np.ndarray) -> np.ndarray:
    """Zero-initial-condition response of x+ = Ax + Bu, y = Cx + Du."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    nsamp = u.shape[1]
    x = np.zeros(ss.order)
    y = np.empty((ss.c.shape[0], nsamp))
    for t in range(nsamp):
        y[:, t] = ss.c @ x + ss.d @ u[:, t]
        x = ss.a @ x + ss.b @ u[:, t]
    return y


def closed_loop_poles(plant: TransferMatrix, controller: TransferMatrix) -> np.ndarray:
    """Eigenvalues of the full interconnection state matrix.

    Modes hidden by plant/controller pole-zero cancellation stay in the
    state matrix, so an unstable cancellation cannot slip through.
    """
    ss_ry, _ = feedback_maps(plant, controller)
    return ss_ry.poles()
