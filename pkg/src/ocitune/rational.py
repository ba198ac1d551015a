"""Scalar rational functions in q with automatic pole-zero cancellation."""

from __future__ import annotations

import numpy as np

from .errors import PoleHit
from .polynomial import CANCEL_TOL, Polynomial, trim_leading

__all__ = ["RationalFunction", "rf_zero", "rf_one", "rf_const"]


#: Radius used to cluster repeated roots before matching denominators in
#: addition.  Root finding scatters a multiplicity-m root by roughly
#: eps**(1/m), so exact repeated poles (multiplicity <= 4) must be clustered
#: far wider than CANCEL_TOL to be recognized as shared factors.
LCM_CLUSTER_RADIUS = 1e-5


def _cluster_roots(roots: np.ndarray, radius: float) -> list[tuple[complex, int]]:
    """Greedy clustering of a root multiset into (centroid, multiplicity)."""
    items: list[list] = []
    for r in roots:
        for item in items:
            if abs(r - item[0] / item[1]) <= radius:
                item[0] += r
                item[1] += 1
                break
        else:
            items.append([r, 1])
    return [(s / m, m) for s, m in items]


def _cancel_common_roots(num: Polynomial, den: Polynomial, tol: float):
    """Remove common root clusters of num and den.

    Roots are clustered first (a multiplicity-m root scatters by roughly
    eps**(1/m) under companion-matrix root finding, far beyond ``tol``);
    cluster centroids closer than ``tol`` cancel with the shared
    multiplicity.  When nothing cancels the original coefficient arrays are
    returned untouched.
    """
    if num.degree == 0 or den.degree == 0:
        return num, den
    cn = _cluster_roots(num.roots(), LCM_CLUSTER_RADIUS)
    cd = _cluster_roots(den.roots(), LCM_CLUSTER_RADIUS)
    mult_n = [m for _, m in cn]
    mult_d = [m for _, m in cd]
    cancelled = False
    for i, (vd, _) in enumerate(cd):
        if mult_d[i] == 0:
            continue
        for j, (vn, _) in enumerate(cn):
            if mult_n[j] and abs(vn - vd) < tol:
                shared = min(mult_n[j], mult_d[i])
                mult_n[j] -= shared
                mult_d[i] -= shared
                cancelled = True
                break
    if not cancelled:
        return num, den
    rn = [v for (v, _), m in zip(cn, mult_n) for _ in range(m)]
    rd = [v for (v, _), m in zip(cd, mult_d) for _ in range(m)]
    num2 = Polynomial.from_roots(np.array(rn), lead=num.lead)
    den2 = Polynomial.from_roots(np.array(rd), lead=den.lead)
    return num2, den2


class RationalFunction:
    """num/den with canonical monic denominator.

    Construction reduces near-common root pairs (tolerance CANCEL_TOL) unless
    ``reduce=False``; tiny leading-coefficient residue from subtractive
    cancellation is trimmed relative to the largest coefficient first.
    """

    __slots__ = ("num", "den")

    def __init__(self, num, den, reduce: bool = True):
        num = num if isinstance(num, Polynomial) else Polynomial(num)
        den = den if isinstance(den, Polynomial) else Polynomial(den)
        num = Polynomial(trim_leading(num.coeffs))
        den = Polynomial(trim_leading(den.coeffs))
        if den.is_zero:
            raise ZeroDivisionError("rational function with zero denominator")
        if num.is_zero:
            num, den = Polynomial([0.0]), Polynomial([1.0])
        elif reduce:
            num, den = _cancel_common_roots(num, den, CANCEL_TOL)
        lead = den.lead
        object.__setattr__(self, "num", Polynomial(num.coeffs / lead))
        object.__setattr__(self, "den", Polynomial(den.coeffs / lead))

    def __setattr__(self, name, value):
        raise AttributeError("RationalFunction is immutable")

    def __reduce__(self):
        return (RationalFunction, (self.num, self.den, False))

    # -- queries ---------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    @property
    def relative_degree(self) -> int:
        return self.den.degree - self.num.degree

    @property
    def is_proper(self) -> bool:
        return self.is_zero or self.relative_degree >= 0

    @property
    def is_strictly_proper(self) -> bool:
        return self.is_zero or self.relative_degree >= 1

    def poles(self) -> np.ndarray:
        return self.den.roots() if self.den.degree >= 1 else np.array([], dtype=complex)

    def zeros(self) -> np.ndarray:
        if self.is_zero or self.num.degree < 1:
            return np.array([], dtype=complex)
        return self.num.roots()

    def __call__(self, z):
        dz = self.den(z)
        scale = np.max(np.abs(self.den.coeffs)) * max(1.0, abs(z)) ** self.den.degree
        if abs(dz) < 1e-12 * scale:
            raise PoleHit(f"evaluation at z={z} hits a pole")
        return self.num(z) / dz

    def __repr__(self):
        return f"RationalFunction({self.num.coeffs.tolist()}, {self.den.coeffs.tolist()})"

    def allclose(self, other: "RationalFunction", rtol: float = 1e-9) -> bool:
        """Equality as rational functions: cross-multiplied coefficient match."""
        lhs = self.num * other.den
        rhs = other.num * self.den
        return lhs.allclose(rhs, rtol=rtol)

    # -- arithmetic --------------------------------------------------------
    @staticmethod
    def _coerce(x) -> "RationalFunction":
        if isinstance(x, RationalFunction):
            return x
        if isinstance(x, Polynomial):
            return RationalFunction(x, [1.0], reduce=False)
        if np.isscalar(x):
            return RationalFunction([float(x)], [1.0], reduce=False)
        raise TypeError(f"cannot coerce {type(x)!r} to RationalFunction")

    def __add__(self, other):
        o = self._coerce(other)
        if self.is_zero:
            return o
        if o.is_zero:
            return self
        if self.den.degree == 0 or o.den.degree == 0:
            return RationalFunction(self.num * o.den + o.num * self.den,
                                    self.den * o.den)
        return _add_common_denominator(self, o)

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(-self.num, self.den, reduce=False)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if self.is_zero or o.is_zero:
            return rf_zero()
        return RationalFunction(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o.is_zero:
            raise ZeroDivisionError("division by the zero rational function")
        if self.is_zero:
            return rf_zero()
        return RationalFunction(self.num * o.den, self.den * o.num)

    def __rtruediv__(self, other):
        return self._coerce(other) / self


def _add_common_denominator(a: RationalFunction, b: RationalFunction) -> RationalFunction:
    """Addition over the least common denominator at root level.

    Shared pole clusters are recognized once instead of being re-multiplied,
    which keeps degrees minimal and avoids building high-multiplicity root
    clusters that companion-matrix root finding cannot resolve.
    Denominators are monic by the class invariant.
    """
    ca = _cluster_roots(a.den.roots(), LCM_CLUSTER_RADIUS)
    cb = _cluster_roots(b.den.roots(), LCM_CLUSTER_RADIUS)
    matched_b = [False] * len(cb)
    lcm_roots: list[complex] = []
    comp_a: list[complex] = []   # lcm / den_a
    comp_b: list[complex] = []   # lcm / den_b
    for va, ma in ca:
        best, best_dist = None, LCM_CLUSTER_RADIUS
        for idx, (vb, mb) in enumerate(cb):
            if not matched_b[idx] and abs(va - vb) <= best_dist:
                best, best_dist = idx, abs(va - vb)
        if best is None:
            lcm_roots.extend([va] * ma)
            comp_b.extend([va] * ma)
        else:
            matched_b[best] = True
            vb, mb = cb[best]
            v = (va * ma + vb * mb) / (ma + mb)
            m = max(ma, mb)
            lcm_roots.extend([v] * m)
            comp_a.extend([v] * (m - ma))
            comp_b.extend([v] * (m - mb))
    for idx, (vb, mb) in enumerate(cb):
        if not matched_b[idx]:
            lcm_roots.extend([vb] * mb)
            comp_a.extend([vb] * mb)
    num = (a.num * Polynomial.from_roots(np.array(comp_a))
           + b.num * Polynomial.from_roots(np.array(comp_b)))
    return RationalFunction(num, Polynomial.from_roots(np.array(lcm_roots)))


def rf_zero() -> RationalFunction:
    return RationalFunction([0.0], [1.0], reduce=False)


def rf_one() -> RationalFunction:
    return RationalFunction([1.0], [1.0], reduce=False)


def rf_const(c: float) -> RationalFunction:
    return RationalFunction([float(c)], [1.0], reduce=False)
