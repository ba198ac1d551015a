"""Fixed-structure controllers C(q,P) and the decomposition of their inverse.

A structure fixes the grid dimension, a shared denominator c(q) with
integral action, a numerator degree for every entry, and a sparsity mask.
The parameter vector P stacks the numerator coefficients row-major over
active entries, each entry's coefficients in descending powers.

The inverse decomposition writes C^-1 = c(q) adj(B) / det(B) = N / D with
B the numerator matrix; D = det(B) is kept unreduced so that the
coefficient map delta(P) is an explicit polynomial map with an exact
Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularController
from .polynomial import Polynomial, coeff_embed, poly_mat_adj, poly_mat_det
from .rational import RationalFunction, rf_zero
from .transfer import TransferMatrix

__all__ = [
    "ControllerStructure",
    "InverseDecomposition",
    "pid_structure",
    "pi_structure",
    "build_controller",
    "inverse_decomposition",
    "delta_of_P",
    "delta_jacobian",
    "N_jacobian",
]

_SLOT_LETTERS = "abcdefgh"


@dataclass(frozen=True)
class ControllerStructure:
    """Declarative controller class: numerators over a shared denominator."""

    n: int
    den: Polynomial                      # shared c(q), divisible by (q-1)
    degrees: tuple                       # n x n numerator degrees
    mask: tuple                          # n x n, True = entry present

    def __post_init__(self):
        den = self.den if isinstance(self.den, Polynomial) else Polynomial(self.den)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "degrees", tuple(tuple(int(d) for d in row) for row in self.degrees))
        object.__setattr__(self, "mask", tuple(tuple(bool(m) for m in row) for row in self.mask))
        if len(self.degrees) != self.n or len(self.mask) != self.n:
            raise ValueError("degrees and mask must be n x n")
        scale = np.max(np.abs(den.coeffs))
        if abs(den(1.0)) > 1e-12 * scale:
            raise ValueError("controller denominator must vanish at q=1 (integral action)")
        for i in range(self.n):
            if len(self.degrees[i]) != self.n or len(self.mask[i]) != self.n:
                raise ValueError("degrees and mask must be n x n")
            for j in range(self.n):
                if self.mask[i][j] and self.degrees[i][j] > den.degree:
                    raise ValueError(f"entry ({i},{j}) would not be proper over c(q)")

    # -- parameter layout -------------------------------------------------
    @property
    def n_params(self) -> int:
        return sum(self.degrees[i][j] + 1
                   for i in range(self.n) for j in range(self.n) if self.mask[i][j])

    def slots(self) -> list[tuple[int, int, int]]:
        """Row-major (i, j, power-of-q) triple per parameter."""
        out = []
        for i in range(self.n):
            for j in range(self.n):
                if not self.mask[i][j]:
                    continue
                d = self.degrees[i][j]
                out.extend((i, j, d - k) for k in range(d + 1))
        return out

    def slot_names(self) -> list[str]:
        names = []
        for i in range(self.n):
            for j in range(self.n):
                if not self.mask[i][j]:
                    continue
                d = self.degrees[i][j]
                names.extend(f"C{i+1}{j+1}.{_SLOT_LETTERS[k]}" for k in range(d + 1))
        return names

    def den_reduced(self) -> Polynomial:
        """c(q)/(q-1), exact by the integral-action invariant."""
        quot, rem = self.den.deflate(1.0)
        scale = np.max(np.abs(self.den.coeffs))
        if abs(rem) > 1e-9 * scale:
            raise ValueError("denominator not divisible by (q-1)")
        return quot

    # -- numerator matrix ---------------------------------------------------
    def numerator_grid(self, p: np.ndarray) -> list[list[np.ndarray]]:
        """Coefficient arrays of B(q,P); masked entries are the zero array."""
        p = self._check_params(p)
        grid = [[np.zeros(1) for _ in range(self.n)] for _ in range(self.n)]
        pos = 0
        for i in range(self.n):
            for j in range(self.n):
                if not self.mask[i][j]:
                    continue
                w = self.degrees[i][j] + 1
                grid[i][j] = np.asarray(p[pos:pos + w], dtype=float)
                pos += w
        return grid

    def _check_params(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float).reshape(-1)
        if p.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {p.size}")
        return p

    def structural_det_length(self) -> int:
        """Length of det(B)'s structural coefficient vector (n_D + 1)."""
        lengths = [[self.degrees[i][j] + 1 if self.mask[i][j] else 1
                    for j in range(self.n)] for i in range(self.n)]
        probe = [[np.zeros(lengths[i][j]) for j in range(self.n)] for i in range(self.n)]
        return len(poly_mat_det(probe))


def pid_structure(n: int, mask=None) -> ControllerStructure:
    """PID grid: (a q^2 + b q + c) / (q(q-1)) per entry."""
    mask = mask if mask is not None else [[True] * n for _ in range(n)]
    return ControllerStructure(n=n, den=Polynomial([1.0, -1.0, 0.0]),
                               degrees=tuple(tuple(2 for _ in range(n)) for _ in range(n)),
                               mask=tuple(tuple(row) for row in mask))


def pi_structure(n: int, mask=None) -> ControllerStructure:
    """PI grid: (a q + b) / (q-1) per entry."""
    mask = mask if mask is not None else [[True] * n for _ in range(n)]
    return ControllerStructure(n=n, den=Polynomial([1.0, -1.0]),
                               degrees=tuple(tuple(1 for _ in range(n)) for _ in range(n)),
                               mask=tuple(tuple(row) for row in mask))


@dataclass
class InverseDecomposition:
    """N(q,P), D(q,P), and the coefficient vector delta(P) of C^-1."""

    N: list                     # n x n grid of Polynomial, c(q) * adj(B)
    D: Polynomial               # det(B), unreduced
    delta: np.ndarray           # structural coefficients of det(B)
    c: Polynomial               # the shared denominator used
    n_reduced: list = field(default=None)   # (c(q)/(q-1)) * adj(B)


def build_controller(structure: ControllerStructure, p: np.ndarray) -> TransferMatrix:
    """Assemble C(q,P); masked entries are exactly zero."""
    grid = structure.numerator_grid(p)
    entries = []
    for i in range(structure.n):
        row = []
        for j in range(structure.n):
            if not structure.mask[i][j] or not np.any(grid[i][j]):
                row.append(rf_zero())
            else:
                row.append(RationalFunction(grid[i][j], structure.den.coeffs))
        entries.append(row)
    return TransferMatrix(entries)


def delta_of_P(structure: ControllerStructure, p: np.ndarray) -> np.ndarray:
    """Structural coefficient vector of det(B(q,P))."""
    return poly_mat_det(structure.numerator_grid(p))


def inverse_decomposition(structure: ControllerStructure, p: np.ndarray) -> InverseDecomposition:
    """Decompose C^-1 as N/D with D = det(B) and N = c(q) adj(B)."""
    grid = structure.numerator_grid(p)
    delta = poly_mat_det(grid)
    scale = np.linalg.norm(delta)
    if scale == 0.0:
        raise SingularController("det of the controller numerator matrix is identically zero")
    if abs(delta[0]) <= 1e-10 * scale:
        raise SingularController("leading coefficient of D(q,P) is degenerate")
    adj = poly_mat_adj(grid)
    c = structure.den
    c_red = structure.den_reduced()
    n_grid = [[c * Polynomial(adj[i][j]) for j in range(structure.n)] for i in range(structure.n)]
    n_red = [[c_red * Polynomial(adj[i][j]) for j in range(structure.n)] for i in range(structure.n)]
    return InverseDecomposition(N=n_grid, D=Polynomial(delta), delta=delta, c=c, n_reduced=n_red)


def delta_jacobian(structure: ControllerStructure, p: np.ndarray) -> np.ndarray:
    """Exact (n_D+1) x n_P Jacobian of delta(P) via Jacobi's rule:
    d det(B)/dP_k = adj(B)_{ji} q^m for P_k the q^m coefficient of B_ij."""
    grid = structure.numerator_grid(p)
    adj = poly_mat_adj(grid)
    length = structure.structural_det_length()
    jac = np.zeros((length, structure.n_params))
    for k, (i, j, m) in enumerate(structure.slots()):
        col = np.concatenate([np.atleast_1d(adj[j][i]), np.zeros(m)])
        jac[:, k] = coeff_embed(col, length)
    return jac


def N_jacobian(structure: ControllerStructure, p: np.ndarray,
               reduced: bool = False) -> list[dict]:
    """Per-parameter sparse grids of dN/dP_k as {(row, col): Polynomial}.

    With ``reduced`` the common factor c(q)/(q-1) is used instead of c(q),
    matching the predictor's symbolically cancelled numerators.
    """
    grid = structure.numerator_grid(p)
    n = structure.n
    c = structure.den_reduced() if reduced else structure.den
    out = []
    for (r, s, m) in structure.slots():
        d_entries = {}
        for i in range(n):
            for j in range(n):
                # adj(B)_{ij} = +/- det of B with row j and column i removed
                if r == j or s == i:
                    continue
                rows = [rr for rr in range(n) if rr != j]
                cols = [cc for cc in range(n) if cc != i]
                minor = [[grid[rr][cc] for cc in cols] for rr in rows]
                rr_pos = rows.index(r)
                cc_pos = cols.index(s)
                if n == 2:
                    dminor = np.ones(1)
                else:
                    sub_adj = poly_mat_adj(minor)
                    dminor = sub_adj[cc_pos][rr_pos]
                sign = 1.0 if (i + j) % 2 == 0 else -1.0
                dpoly = sign * (c * Polynomial(dminor)).shifted(m)
                if not dpoly.is_zero:
                    d_entries[(i, j)] = dpoly
        out.append(d_entries)
    return out
