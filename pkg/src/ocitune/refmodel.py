"""Parametrized reference models T_d(q,eta) and the loop filter
L_d = T_d (I - T_d)^-1.

Each entry is declared by a template:

* ``zero``      -- structurally zero entry.
* ``fixed``     -- numerator polynomial given fully.
* ``gain``      -- numerator eta*q + (g - eta) with g the denominator value at
                   q=1, so the entry has unit static gain for every eta
                   (a single free slot; the constraint is substituted
                   directly, no equality constraint enters the optimizer).
* ``free``      -- affine numerator c1*q + c0 with both slots free.
* ``coupling``  -- numerator (c1*q + c0)(q-1); each of c1, c0 individually
                   free or pinned.  The (q-1) factor makes the entry vanish
                   at q=1 so constant references stay decoupled.

Denominators are built from fixed pole lists, with an optional q^(nu-1)
factor to raise the relative degree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularIminusTd, ZeroOutputComponent
from .polynomial import Polynomial
from .rational import RationalFunction, rf_zero
from .transfer import TransferMatrix

__all__ = [
    "EntryTemplate",
    "RefModelSpec",
    "build_refmodel",
    "td_eta_derivative",
    "build_Ld",
    "eta_jacobian",
    "extract_nmp_zero",
    "principal_unstable_zero",
    "verify_zero_constraint",
    "coupling_zero_from_direction",
]

_KINDS = ("zero", "fixed", "gain", "free", "coupling")

#: sentinel used in configs for a free template coefficient
FREE = None


@dataclass(frozen=True)
class EntryTemplate:
    kind: str
    poles: tuple = ()
    rel_degree: int = 1
    num: tuple = ()          # fixed kind only
    c1: float | None = None  # free/coupling: None marks a free slot
    c0: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown template kind {self.kind!r}")
        object.__setattr__(self, "poles", tuple(float(p) for p in self.poles))
        object.__setattr__(self, "num", tuple(float(c) for c in self.num))
        if self.rel_degree < 1:
            raise ValueError("relative degree must be >= 1")
        if self.kind == "gain" and not self.poles:
            raise ValueError("gain template needs at least one pole")
        if self.kind == "fixed" and not self.num:
            raise ValueError("fixed template needs numerator coefficients")

    @property
    def free_slots(self) -> tuple[str, ...]:
        if self.kind == "gain":
            return ("eta1",)
        if self.kind in ("free", "coupling"):
            return tuple(name for name, v in (("eta1", self.c1), ("eta2", self.c0))
                         if v is None)
        return ()

    def denominator(self) -> Polynomial:
        return Polynomial.from_roots(self.poles).shifted(self.rel_degree - 1)

    def unit_gain_value(self) -> float:
        """Denominator value at q=1 (the numerator value enforcing T(1)=1)."""
        return float(np.prod([1.0 - p for p in self.poles]))

    def numerator(self, slot_values: dict) -> Polynomial:
        if self.kind == "zero":
            return Polynomial([0.0])
        if self.kind == "fixed":
            return Polynomial(self.num)
        if self.kind == "gain":
            eta = slot_values["eta1"]
            return Polynomial([eta, self.unit_gain_value() - eta])
        c1 = slot_values["eta1"] if self.c1 is None else self.c1
        c0 = slot_values["eta2"] if self.c0 is None else self.c0
        core = Polynomial([c1, c0])
        if self.kind == "free":
            return core
        return core * Polynomial([1.0, -1.0])

    def numerator_slot_derivative(self, slot: str) -> Polynomial:
        """d(numerator)/d(slot); constant in eta since templates are affine."""
        if self.kind == "gain":
            return Polynomial([1.0, -1.0])
        base = Polynomial([1.0, 0.0]) if slot == "eta1" else Polynomial([1.0])
        if self.kind == "coupling":
            return base * Polynomial([1.0, -1.0])
        return base

    @property
    def unit_zero_factors(self) -> int:
        """Structural (q-1) factors carried by the numerator template."""
        return 1 if self.kind == "coupling" else 0

    def core_numerator(self, slot_values: dict) -> Polynomial:
        """Numerator with the structural (q-1) factors stripped."""
        if self.kind != "coupling":
            return self.numerator(slot_values)
        c1 = slot_values["eta1"] if self.c1 is None else self.c1
        c0 = slot_values["eta2"] if self.c0 is None else self.c0
        return Polynomial([c1, c0])

    def core_slot_derivative(self, slot: str) -> tuple[Polynomial, int]:
        """d(core numerator)/d(slot) plus any extra (q-1) factors of the
        derivative itself (the gain substitution differentiates to q-1)."""
        if self.kind == "gain":
            return Polynomial([1.0]), 1
        base = Polynomial([1.0, 0.0]) if slot == "eta1" else Polynomial([1.0])
        return base, 0


@dataclass(frozen=True)
class RefModelSpec:
    """Grid of entry templates plus the structural pattern."""

    n: int
    entries: tuple            # n x n EntryTemplate grid
    structure: str = "diagonal"         # "diagonal" | "triangular"
    row_k: int | None = None            # distinguished row (0-based) for triangular

    def __post_init__(self):
        ent = tuple(tuple(row) for row in self.entries)
        object.__setattr__(self, "entries", ent)
        if len(ent) != self.n or any(len(r) != self.n for r in ent):
            raise ValueError("entries must be an n x n grid")
        if self.structure not in ("diagonal", "triangular"):
            raise ValueError(f"unknown structure {self.structure!r}")
        if self.structure == "triangular" and self.row_k is None:
            raise ValueError("triangular structure needs row_k")
        for row in ent:
            for t in row:
                if t.kind != "zero" and any(abs(p) >= 1.0 for p in t.poles):
                    raise ValueError("reference-model poles must be strictly stable")
        for i in range(self.n):
            for j in range(self.n):
                t = ent[i][j]
                off_diag = i != j
                if self.structure == "diagonal" and off_diag and t.kind != "zero":
                    raise ValueError("diagonal spec must have zero off-diagonal entries")
                if (self.structure == "triangular" and off_diag
                        and i != self.row_k and t.kind != "zero"):
                    raise ValueError("triangular spec allows couplings only in the "
                                     "distinguished row")
                if not off_diag and t.kind == "zero":
                    continue
                if not off_diag and t.kind == "fixed":
                    if len(t.num) - 1 >= t.denominator().degree:
                        raise ValueError(f"diagonal entry ({i},{j}) must be strictly proper")

    def slots(self) -> list[tuple[int, int, str]]:
        out = []
        for i in range(self.n):
            for j in range(self.n):
                out.extend((i, j, s) for s in self.entries[i][j].free_slots)
        return out

    @property
    def n_eta(self) -> int:
        return len(self.slots())

    def slot_names(self) -> list[str]:
        return [f"Td{i+1}{j+1}.{s}" for i, j, s in self.slots()]

    def _slot_values(self, eta: np.ndarray) -> dict:
        eta = np.asarray(eta, dtype=float).reshape(-1)
        if eta.size != self.n_eta:
            raise ValueError(f"expected {self.n_eta} reference-model parameters, got {eta.size}")
        per_entry: dict = {}
        for val, (i, j, s) in zip(eta, self.slots()):
            per_entry.setdefault((i, j), {})[s] = float(val)
        return per_entry


def build_refmodel(spec: RefModelSpec, eta: np.ndarray) -> TransferMatrix:
    """Assemble T_d(q,eta) from the templates."""
    values = spec._slot_values(eta)
    rows = []
    for i in range(spec.n):
        row = []
        for j in range(spec.n):
            t = spec.entries[i][j]
            if t.kind == "zero":
                row.append(rf_zero())
                continue
            num = t.numerator(values.get((i, j), {}))
            if num.is_zero:
                row.append(rf_zero())
            else:
                row.append(RationalFunction(num, t.denominator(), reduce=False))
        rows.append(row)
    return TransferMatrix(rows)


def td_eta_derivative(spec: RefModelSpec, m: int) -> TransferMatrix:
    """dT_d/deta_m: a single-entry transfer matrix, constant in eta."""
    i, j, slot = spec.slots()[m]
    t = spec.entries[i][j]
    entry = RationalFunction(t.numerator_slot_derivative(slot), t.denominator(), reduce=False)
    rows = [[entry if (a, b) == (i, j) else rf_zero() for b in range(spec.n)]
            for a in range(spec.n)]
    return TransferMatrix(rows)


def build_Ld(td: TransferMatrix) -> TransferMatrix:
    """L_d = T_d (I - T_d)^-1 with the structural pole at q=1 left explicit.

    Consumers cancel that pole against the (q-1) carried by the controller
    inverse's numerators.
    """
    eye = TransferMatrix.identity(td.n)
    a = eye - td
    if a.det().is_zero:
        raise SingularIminusTd("I - T_d is singular as a rational matrix")
    return td @ a.inverse()


def eta_jacobian(spec: RefModelSpec, eta: np.ndarray) -> list[TransferMatrix]:
    """Exact dL_d/deta_m for every slot, via
    dL_d = (I - T_d)^-1 dT_d (I - T_d)^-1."""
    td = build_refmodel(spec, eta)
    eye = TransferMatrix.identity(spec.n)
    resolvent = (eye - td).inverse()
    return [resolvent @ td_eta_derivative(spec, m) @ resolvent
            for m in range(spec.n_eta)]


def extract_nmp_zero(spec: RefModelSpec, eta: np.ndarray,
                     cluster_tol: float = 1e-6) -> list[complex]:
    """Roots of the identified free numerators with magnitude > 1,
    deduplicated across entries.  Structural (q-1) factors of coupling
    templates are not identified quantities and are excluded."""
    values = spec._slot_values(eta)
    found: list[complex] = []
    for i in range(spec.n):
        for j in range(spec.n):
            t = spec.entries[i][j]
            if not t.free_slots:
                continue
            num = t.core_numerator(values.get((i, j), {}))
            if num.is_zero or num.degree < 1:
                continue
            for r in num.roots():
                if abs(r) > 1.0:
                    found.append(complex(r))
    out: list[complex] = []
    for z in sorted(found, key=lambda v: (abs(v), v.real, v.imag)):
        if not any(abs(z - w) <= cluster_tol for w in out):
            out.append(z)
    return out


def principal_unstable_zero(zeros) -> float | None:
    """Largest-magnitude identified unstable zero as a real number.

    Real part when the zero is (numerically) real, magnitude otherwise.
    """
    if not zeros:
        return None
    z = max(zeros, key=abs)
    if abs(z.imag) <= 1e-9 * max(1.0, abs(z.real)):
        return float(z.real)
    return float(abs(z))


def verify_zero_constraint(td: TransferMatrix, z: complex, y_dir: np.ndarray) -> float:
    """Residual || y^H T_d(z) ||_2 of the zero-direction constraint."""
    y = np.asarray(y_dir, dtype=complex).reshape(-1)
    return float(np.linalg.norm(np.conj(y) @ td.eval(complex(z))))


def coupling_zero_from_direction(z: complex, y_dir: np.ndarray, k: int, j: int,
                                 gain_kj: float, poles_jj, poles_kk) -> float:
    """Coupling-entry zero that satisfies the known-direction constraint.

    Given the zero location ``z`` and its output direction, the retained
    degree of freedom is the coupling gain; the entry's zero follows as

        z_kj = z + y_j T_d_jj(z) / (y_k K_j Tbar_kj(z))

    with T_d_jj the unit-static-gain all-pole diagonal entry on the j-th
    loop and Tbar_kj = (q-1)/prod(q - p) over the poles of both loops.
    """
    y = np.asarray(y_dir, dtype=complex).reshape(-1)
    yk = np.conj(y[k])
    yj = np.conj(y[j])
    if abs(yk) < 1e-12:
        raise ZeroOutputComponent("output-direction component y_k is zero")
    t_jj = RationalFunction([np.prod([1.0 - p for p in poles_jj])],
                            Polynomial.from_roots(poles_jj))
    tbar = RationalFunction([1.0, -1.0],
                            Polynomial.from_roots(tuple(poles_jj) + tuple(poles_kk)))
    out = z + (yj * t_jj(z)) / (yk * gain_kj * tbar(z))
    if abs(np.imag(out)) > 1e-9 * max(1.0, abs(np.real(out))):
        raise ValueError("coupling zero came out complex; check the inputs")
    return float(np.real(out))
