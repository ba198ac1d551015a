"""Square transfer-matrix algebra, closed-loop composition, zero analysis,
and time-domain simulation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import AlgebraicLoop, ImproperEntry, SingularTransferMatrix
from .rational import RationalFunction, rf_const, rf_one, rf_zero

__all__ = [
    "TransferMatrix",
    "ZeroDirection",
    "closed_loop",
    "ideal_controller",
    "filter_series",
]


def filter_series(num, den, x: np.ndarray) -> np.ndarray:
    """Run a proper rational filter num(q)/den(q) over a series (zero ICs).

    The numerator is left-padded so scipy's z^-1 convention realizes the
    forward-shift transfer function exactly.
    """
    num = np.atleast_1d(np.asarray(num, dtype=float))
    den = np.atleast_1d(np.asarray(den, dtype=float))
    pad = len(den) - len(num)
    if pad < 0:
        raise ImproperEntry("filter numerator degree exceeds denominator degree")
    b = np.concatenate([np.zeros(pad), num])
    return lfilter(b, den, x)


@dataclass(frozen=True)
class ZeroDirection:
    """A transmission zero with its unit-norm left (output) direction."""

    z: complex
    y_dir: np.ndarray


class TransferMatrix:
    """n x n grid of rational functions in q."""

    __slots__ = ("entries", "n")

    def __init__(self, entries):
        n = len(entries)
        for row in entries:
            if len(row) != n:
                raise ValueError("transfer matrix must be square")
        ent = tuple(
            tuple(e if isinstance(e, RationalFunction) else RationalFunction._coerce(e)
                  for e in row)
            for row in entries
        )
        object.__setattr__(self, "entries", ent)
        object.__setattr__(self, "n", n)

    def __setattr__(self, name, value):
        raise AttributeError("TransferMatrix is immutable")

    def __reduce__(self):
        return (TransferMatrix, ([list(row) for row in self.entries],))

    def __getitem__(self, idx):
        i, j = idx
        return self.entries[i][j]

    # -- constructors ---------------------------------------------------
    @classmethod
    def identity(cls, n: int) -> "TransferMatrix":
        return cls([[rf_one() if i == j else rf_zero() for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, n: int) -> "TransferMatrix":
        return cls([[rf_zero() for _ in range(n)] for _ in range(n)])

    @classmethod
    def diagonal(cls, diag) -> "TransferMatrix":
        n = len(diag)
        return cls([[diag[i] if i == j else rf_zero() for j in range(n)] for i in range(n)])

    @classmethod
    def scalar(cls, rf: RationalFunction, n: int) -> "TransferMatrix":
        return cls.diagonal([rf] * n)

    @classmethod
    def gain(cls, g: float, n: int) -> "TransferMatrix":
        return cls.scalar(rf_const(g), n)

    # -- algebra ----------------------------------------------------------
    def __add__(self, other: "TransferMatrix") -> "TransferMatrix":
        self._check_dim(other)
        return TransferMatrix(
            [[self[i, j] + other[i, j] for j in range(self.n)] for i in range(self.n)]
        )

    def __sub__(self, other: "TransferMatrix") -> "TransferMatrix":
        self._check_dim(other)
        return TransferMatrix(
            [[self[i, j] - other[i, j] for j in range(self.n)] for i in range(self.n)]
        )

    def __neg__(self) -> "TransferMatrix":
        return TransferMatrix([[-self[i, j] for j in range(self.n)] for i in range(self.n)])

    def __matmul__(self, other: "TransferMatrix") -> "TransferMatrix":
        self._check_dim(other)
        n = self.n
        out = []
        for i in range(n):
            row = []
            for j in range(n):
                acc = rf_zero()
                for k in range(n):
                    a, b = self[i, k], other[k, j]
                    if a.is_zero or b.is_zero:
                        continue
                    acc = acc + a * b
                row.append(acc)
            out.append(row)
        return TransferMatrix(out)

    def _check_dim(self, other: "TransferMatrix"):
        if self.n != other.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")

    def det(self) -> RationalFunction:
        return _rf_det([[self[i, j] for j in range(self.n)] for i in range(self.n)])

    def inverse(self) -> "TransferMatrix":
        """Adjugate over determinant, with pole-zero cancellation applied."""
        d = self.det()
        if d.is_zero:
            raise SingularTransferMatrix("determinant is identically zero")
        grid = [[self[i, j] for j in range(self.n)] for i in range(self.n)]
        adj = _rf_adj(grid)
        return TransferMatrix([[adj[i][j] / d for j in range(self.n)] for i in range(self.n)])

    # -- evaluation and analysis ------------------------------------------
    def eval(self, z: complex) -> np.ndarray:
        """Entrywise value at z; raises PoleHit at entry poles."""
        out = np.empty((self.n, self.n), dtype=complex)
        for i in range(self.n):
            for j in range(self.n):
                out[i, j] = self[i, j](z)
        return out

    def is_proper(self) -> bool:
        return all(self[i, j].is_proper for i in range(self.n) for j in range(self.n))

    def poles(self) -> np.ndarray:
        """Poles of the minimal entrywise representation (union over entries)."""
        acc = []
        for i in range(self.n):
            for j in range(self.n):
                e = self[i, j]
                if not e.is_zero:
                    acc.append(e.poles())
        if not acc:
            return np.array([], dtype=complex)
        return np.concatenate(acc)

    def is_stable(self) -> tuple[bool, np.ndarray]:
        """True iff every entrywise pole is strictly inside the unit circle."""
        p = self.poles()
        return bool(np.all(np.abs(p) < 1.0)), p

    def transmission_zeros(self) -> list[ZeroDirection]:
        """Finite zeros of det (after cancellation), each with the unit left
        null direction of the evaluated matrix (smallest singular direction)."""
        d = self.det()
        if d.is_zero:
            raise SingularTransferMatrix("determinant is identically zero")
        zs = d.num.roots() if d.num.degree >= 1 else np.array([], dtype=complex)
        out = []
        for z in zs:
            gz = self.eval(complex(z))
            u_mat, _, _ = np.linalg.svd(gz)
            y = u_mat[:, -1].conj()
            k = int(np.argmax(np.abs(y)))
            phase = y[k] / abs(y[k])
            y = y / phase
            if abs(z.imag) < 1e-9 * max(1.0, abs(z.real)):
                z = complex(z.real, 0.0)
            out.append(ZeroDirection(z=z, y_dir=y))
        return out

    # -- time domain -------------------------------------------------------
    def simulate(self, u: np.ndarray) -> np.ndarray:
        """y = T u with zero initial conditions; u has shape (n, N)."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if u.shape[0] != self.n:
            raise ValueError(f"input has {u.shape[0]} channels, expected {self.n}")
        y = np.zeros_like(u)
        for i in range(self.n):
            for j in range(self.n):
                e = self[i, j]
                if e.is_zero:
                    continue
                if not e.is_proper:
                    raise ImproperEntry(f"entry ({i},{j}) is not proper")
                y[i] += filter_series(e.num.coeffs, e.den.coeffs, u[j])
        return y

    def step_response(self, channel: int, nsamples: int) -> np.ndarray:
        """Response to a unit step on one reference channel, zeros elsewhere."""
        r = np.zeros((self.n, nsamples))
        r[channel, :] = 1.0
        return self.simulate(r)


def _rf_det(grid) -> RationalFunction:
    n = len(grid)
    if n == 1:
        return grid[0][0]
    acc = rf_zero()
    for j in range(n):
        if grid[0][j].is_zero:
            continue
        minor = [[grid[r][c] for c in range(n) if c != j] for r in range(1, n)]
        term = grid[0][j] * _rf_det(minor)
        acc = acc + (term if j % 2 == 0 else -term)
    return acc


def _rf_adj(grid):
    n = len(grid)
    if n == 1:
        return [[rf_one()]]
    adj = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [[grid[r][c] for c in range(n) if c != i]
                     for r in range(n) if r != j]
            m = _rf_det(minor)
            adj[i][j] = m if (i + j) % 2 == 0 else -m
    return adj


def closed_loop(plant: TransferMatrix, controller: TransferMatrix) -> TransferMatrix:
    """Complementary sensitivity [I + G C]^-1 G C."""
    gc = plant @ controller
    a = TransferMatrix.identity(plant.n) + gc
    d = a.det()
    if d.is_zero:
        raise SingularTransferMatrix("I + G*C is identically singular")
    if d.num.degree < d.den.degree:
        raise AlgebraicLoop("I + G*C is singular at q = infinity")
    return a.inverse() @ gc


def ideal_controller(plant: TransferMatrix, refmodel: TransferMatrix) -> TransferMatrix:
    """Controller realizing the reference model exactly:
    G^-1 T_d (I - T_d)^-1."""
    eye = TransferMatrix.identity(plant.n)
    return plant.inverse() @ refmodel @ (eye - refmodel).inverse()
