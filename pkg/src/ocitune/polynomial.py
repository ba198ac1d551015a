"""Polynomial arithmetic in the forward-shift variable q.

Coefficients are stored in descending powers of q everywhere in the package:
``coeffs[0]`` multiplies ``q**degree`` and ``coeffs[-1]`` is the constant
term.  Mixing this convention with the ascending one is the classic silent
bug in filter code, so every public function sticks to descending order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import RootOnUnitCircle

#: Roots this close (absolute distance) are considered a common factor when
#: reducing rational functions.
CANCEL_TOL = 1e-7

#: Default half-width of the forbidden band around the unit circle for the
#: stable/unstable factorization.
UNIT_CIRCLE_MARGIN = 1e-9


def as_coeffs(p) -> np.ndarray:
    """Coerce a Polynomial, scalar, or coefficient sequence to a 1-d array."""
    if isinstance(p, Polynomial):
        return p.coeffs
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    if arr.ndim != 1:
        raise ValueError("polynomial coefficients must be one-dimensional")
    return arr


def _trim_exact(c: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return np.zeros(1)
    return c[nz[0]:]


def trim_leading(c: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    """Drop leading coefficients below ``rel_tol`` times the largest magnitude.

    Used before root finding to discard float residue left by subtractive
    cancellation; never applied to structurally meaningful coefficient
    vectors such as delta(P).
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    scale = np.max(np.abs(c))
    if scale == 0.0:
        return np.zeros(1)
    keep = np.flatnonzero(np.abs(c) > rel_tol * scale)
    return c[keep[0]:]


class Polynomial:
    """Immutable real polynomial in q, coefficients in descending powers."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = _trim_exact(np.array(as_coeffs(coeffs), dtype=float))
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    def __reduce__(self):
        return (Polynomial, (np.array(self.coeffs),))

    # -- basic queries -------------------------------------------------
    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0.0

    @property
    def lead(self) -> float:
        return float(self.coeffs[0])

    def __call__(self, z):
        return np.polyval(self.coeffs, z)

    def __repr__(self):
        return f"Polynomial({self.coeffs.tolist()})"

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.allclose(other, rtol=0.0)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def allclose(self, other: "Polynomial", rtol: float = 1e-9) -> bool:
        """Coefficient-wise comparison scaled by the max-magnitude coefficient."""
        a, b = self.coeffs, other.coeffs
        n = max(len(a), len(b))
        pa = np.concatenate([np.zeros(n - len(a)), a])
        pb = np.concatenate([np.zeros(n - len(b)), b])
        scale = max(np.max(np.abs(pa)), np.max(np.abs(pb)), 1e-300)
        return bool(np.all(np.abs(pa - pb) <= rtol * scale))

    # -- arithmetic ----------------------------------------------------
    def __add__(self, other):
        a = self.coeffs
        b = as_coeffs(other)
        n = max(len(a), len(b))
        out = np.zeros(n)
        out[n - len(a):] += a
        out[n - len(b):] += b
        return Polynomial(out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self.coeffs)

    def __sub__(self, other):
        return self + (-Polynomial(other) if not isinstance(other, Polynomial) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return Polynomial(self.coeffs * other)
        return Polynomial(np.convolve(self.coeffs, as_coeffs(other)))

    __rmul__ = __mul__

    def shifted(self, k: int) -> "Polynomial":
        """Multiply by q**k."""
        if self.is_zero:
            return self
        return Polynomial(np.concatenate([self.coeffs, np.zeros(k)]))

    def monic(self) -> "Polynomial":
        if self.is_zero:
            raise ValueError("zero polynomial has no monic form")
        return Polynomial(self.coeffs / self.lead)

    def roots(self) -> np.ndarray:
        """Roots via companion-matrix eigenvalues of the monic normalization."""
        if self.is_zero:
            raise ValueError("zero polynomial has no roots")
        if self.degree == 0:
            return np.array([], dtype=complex)
        return np.roots(self.coeffs)

    @classmethod
    def from_roots(cls, roots, lead: float = 1.0) -> "Polynomial":
        roots = np.asarray(roots, dtype=complex)
        if roots.size == 0:
            return cls([lead])
        c = np.poly(roots)
        imax = np.max(np.abs(c.imag))
        if imax > 1e-6 * max(1.0, np.max(np.abs(c.real))):
            raise ValueError("roots are not conjugate-symmetric; cannot build a real polynomial")
        return cls(lead * c.real)

    def deflate(self, root: float) -> tuple["Polynomial", float]:
        """Synthetic division by (q - root): returns (quotient, remainder)."""
        if self.degree == 0:
            return Polynomial([0.0]), float(self.coeffs[0])
        q = np.empty(self.degree)
        acc = 0.0
        for i, c in enumerate(self.coeffs[:-1]):
            acc = c + root * acc
            q[i] = acc
        rem = float(self.coeffs[-1] + root * acc)
        return Polynomial(q), rem


# module-level operation aliases matching the package's public surface
def poly_mul(a: Polynomial, b: Polynomial) -> Polynomial:
    """Product of two polynomials (coefficient convolution)."""
    return Polynomial(a) * Polynomial(b) if not isinstance(a, Polynomial) else a * b


def poly_roots(p: Polynomial) -> np.ndarray:
    """Roots of a polynomial of degree >= 1."""
    p = p if isinstance(p, Polynomial) else Polynomial(p)
    if p.degree < 1:
        raise ValueError("root finding requires degree >= 1")
    return p.roots()


@dataclass(frozen=True)
class FactoredDenominator:
    """Split of a polynomial about the unit circle.

    ``d_s`` collects the strictly stable roots and carries the leading
    coefficient of the source; ``d_u`` is the monic factor of roots with
    magnitude > 1; ``d_u_star`` is ``d_u`` with reversed coefficients, whose
    roots are the reciprocals of the roots of ``d_u``.
    """

    d_s: Polynomial
    d_u: Polynomial
    d_u_star: Polynomial
    n_s: int
    n_u: int


def factor_unit_circle(d: Polynomial, margin: float = UNIT_CIRCLE_MARGIN) -> FactoredDenominator:
    """Factor ``d`` into stable and unstable parts about the unit circle.

    Raises RootOnUnitCircle when any root has ``| |r| - 1 | <= margin``;
    the factorization is undefined there.
    """
    d = d if isinstance(d, Polynomial) else Polynomial(d)
    if d.is_zero:
        raise ValueError("cannot factor the zero polynomial")
    if d.degree == 0:
        return FactoredDenominator(d, Polynomial([1.0]), Polynomial([1.0]), 0, 0)
    roots = d.roots()
    mags = np.abs(roots)
    if np.any(np.abs(mags - 1.0) <= margin):
        offenders = roots[np.abs(mags - 1.0) <= margin]
        raise RootOnUnitCircle(f"roots within {margin:g} of the unit circle: {offenders}")
    unstable = roots[mags > 1.0]
    n_u = unstable.size
    n_s = d.degree - n_u
    if n_u == 0:
        d_u = Polynomial([1.0])
        d_s = d
    else:
        d_u = Polynomial.from_roots(unstable)
        quot, rem = np.polydiv(d.coeffs, d_u.coeffs)
        scale = np.max(np.abs(d.coeffs))
        if np.max(np.abs(np.atleast_1d(rem))) > 1e-8 * scale:
            raise RootOnUnitCircle(
                "unstable-factor division left a large remainder; "
                "roots are too close to the unit circle to separate"
            )
        d_s = Polynomial(quot)
    return FactoredDenominator(d_s, d_u, reverse_unstable(d_u), n_s, n_u)


def reverse_unstable(d_u: Polynomial) -> Polynomial:
    """Reversed-coefficient polynomial; roots become reciprocals.

    Requires a monic input (the unstable factor is monic by construction).
    """
    d_u = d_u if isinstance(d_u, Polynomial) else Polynomial(d_u)
    if abs(d_u.lead - 1.0) > 1e-9:
        raise ValueError("reverse_unstable expects a monic polynomial")
    return Polynomial(d_u.coeffs[::-1])


def convolve_split(delta_s: Sequence[float], delta_u: Sequence[float]) -> np.ndarray:
    """Coefficients of D_S*D_U from the stable coefficients and the
    (implicitly monic) unstable coefficients ``[u_1, ..., u_nU]``."""
    ds = np.atleast_1d(np.asarray(delta_s, dtype=float))
    du = np.asarray(delta_u, dtype=float).reshape(-1)
    return np.convolve(ds, np.concatenate([[1.0], du]))


def sylvester_jacobian(delta_s: Sequence[float], delta_u: Sequence[float]) -> np.ndarray:
    """Jacobian of ``convolve_split`` with respect to ``[delta_s, delta_u]``.

    Shape (n_D+1) x (n_S+1+n_U) with the banded structure whose lower-right
    block is the Sylvester matrix of the two factors; nonsingular exactly
    when the factors are coprime.
    """
    ds = np.atleast_1d(np.asarray(delta_s, dtype=float))
    du = np.asarray(delta_u, dtype=float).reshape(-1)
    n_s = ds.size - 1
    n_u = du.size
    n_d = n_s + n_u
    full_u = np.concatenate([[1.0], du])
    jac = np.zeros((n_d + 1, n_s + 1 + n_u))
    for j in range(n_s + 1):
        jac[j:j + n_u + 1, j] = full_u
    for j in range(1, n_u + 1):
        jac[j:j + n_s + 1, n_s + j] = ds
    return jac


# -- polynomial-matrix helpers (plain coefficient arrays) ---------------

def coeff_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Add coefficient arrays aligning constant terms at the tail."""
    la, lb = len(a), len(b)
    n = max(la, lb)
    out = np.zeros(n)
    out[n - la:] += a
    out[n - lb:] += b
    return out


def coeff_embed(a: np.ndarray, length: int) -> np.ndarray:
    """Left-pad a coefficient array to the given structural length."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if len(a) > length:
        raise ValueError("coefficient array longer than structural length")
    return np.concatenate([np.zeros(length - len(a)), a])


def poly_mat_det(grid: list[list[np.ndarray]]) -> np.ndarray:
    """Determinant of a square grid of coefficient arrays (Laplace expansion).

    Lengths combine structurally: products convolve, sums pad to the longer
    operand, so the output length is fixed by the entry lengths alone.
    """
    n = len(grid)
    if n == 1:
        return np.atleast_1d(np.asarray(grid[0][0], dtype=float))
    acc = None
    for j in range(n):
        minor = [[grid[r][c] for c in range(n) if c != j] for r in range(1, n)]
        term = np.convolve(np.atleast_1d(grid[0][j]), poly_mat_det(minor))
        if j % 2:
            term = -term
        acc = term if acc is None else coeff_add(acc, term)
    return acc


def poly_mat_adj(grid: list[list[np.ndarray]]) -> list[list[np.ndarray]]:
    """Adjugate of a square grid of coefficient arrays."""
    n = len(grid)
    if n == 1:
        return [[np.ones(1)]]
    adj = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [[grid[r][c] for c in range(n) if c != i]
                     for r in range(n) if r != j]
            m = poly_mat_det(minor)
            adj[i][j] = m if (i + j) % 2 == 0 else -m
    return adj
