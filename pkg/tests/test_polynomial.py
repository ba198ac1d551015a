import numpy as np
import pytest

from ocitune.errors import RootOnUnitCircle
from ocitune.polynomial import (
    Polynomial,
    convolve_split,
    factor_unit_circle,
    poly_mat_adj,
    poly_mat_det,
    poly_mul,
    poly_roots,
    reverse_unstable,
    sylvester_jacobian,
)


class TestPolyMul:
    def test_hand_expansion(self):
        p = poly_mul(Polynomial([1, -0.5]), Polynomial([1, -1.2]))
        assert p.allclose(Polynomial([1, -1.7, 0.6]))

    def test_identity(self):
        p = Polynomial([2.0, -1.0, 0.3])
        assert poly_mul(p, Polynomial([1.0])).allclose(p)

    def test_numerator_entry_pattern(self):
        # (q-1)(a*q+b) as it appears in the controller-inverse numerators
        a, b = 0.7, -0.2
        p = poly_mul(Polynomial([1, -1]), Polynomial([a, b]))
        assert p.allclose(Polynomial([a, b - a, -b]))

    def test_commutative(self):
        rng = np.random.default_rng(0)
        a = Polynomial(rng.normal(size=4))
        b = Polynomial(rng.normal(size=3))
        assert (a * b).allclose(b * a)
        assert (a * b).degree == a.degree + b.degree


class TestPolyRoots:
    def test_linear(self):
        assert np.allclose(poly_roots(Polynomial([1, -1.2])), [1.2])

    def test_quadratic_formula(self):
        # roots of q^2 - 1.7q + 0.6 from the quadratic formula
        disc = np.sqrt(1.7 ** 2 - 4 * 0.6)
        expected = sorted([(1.7 - disc) / 2, (1.7 + disc) / 2])
        got = sorted(poly_roots(Polynomial([1, -1.7, 0.6])).real)
        assert np.allclose(got, expected)

    def test_plant_determinant_numerator(self):
        # det numerator of the case-study plant by direct 2x2 expansion:
        # 1.5(q-0.7) - 2.5(q-0.9) = -(q-1.2)
        num = np.polysub(1.5 * np.array([1, -0.7]), 2.5 * np.array([1, -0.9]))
        roots = poly_roots(Polynomial(num))
        assert np.allclose(roots, [1.2])

    def test_residual_bound(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            c = rng.normal(size=rng.integers(2, 9))
            p = Polynomial(c)
            if p.degree < 1:
                continue
            for r in p.roots():
                bound = 1e-8 * (1 + abs(r)) ** p.degree * np.linalg.norm(p.coeffs)
                assert abs(p(r)) <= bound

    def test_zero_polynomial_rejected(self):
        with pytest.raises(ValueError):
            poly_roots(Polynomial([0.0]))


class TestFactorUnitCircle:
    def test_mixed_quadratic(self):
        fac = factor_unit_circle(Polynomial([1, -1.7, 0.6]))
        assert fac.n_s == 1 and fac.n_u == 1
        assert fac.d_s.allclose(Polynomial([1, -0.5]), rtol=1e-9)
        assert fac.d_u.allclose(Polynomial([1, -1.2]), rtol=1e-9)

    def test_all_stable(self):
        fac = factor_unit_circle(Polynomial([1, -0.5]))
        assert fac.n_u == 0
        assert fac.d_u.allclose(Polynomial([1.0]))
        assert fac.d_s.allclose(Polynomial([1, -0.5]))

    def test_example_denominator(self):
        # denominator of the unstable controller inverse in the worked example
        d = Polynomial(np.convolve(np.convolve([1, -0.8], [1, -0.9]), [1, -1.2]))
        fac = factor_unit_circle(d)
        assert fac.d_u.allclose(Polynomial([1, -1.2]), rtol=1e-8)
        assert fac.n_s == 2

    def test_root_on_circle_rejected(self):
        with pytest.raises(RootOnUnitCircle):
            factor_unit_circle(Polynomial(np.convolve([1, -1.0], [1, -0.5])))
        with pytest.raises(RootOnUnitCircle):
            # complex pair on the circle
            factor_unit_circle(Polynomial([1, -2 * np.cos(0.3), 1.0]))

    def test_reconvolution_property(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            n_s = rng.integers(0, 4)
            n_u = rng.integers(0, 3)
            if n_s + n_u == 0:
                continue
            stable = rng.uniform(-0.9, 0.9, size=n_s)
            unstable = rng.uniform(1.1, 2.0, size=n_u) * rng.choice([-1, 1], size=n_u)
            lead = rng.uniform(0.2, 2.0)
            d = Polynomial.from_roots(np.concatenate([stable, unstable]), lead=lead)
            fac = factor_unit_circle(d)
            assert fac.n_s == n_s and fac.n_u == n_u
            recon = fac.d_s * fac.d_u
            scale = np.max(np.abs(d.coeffs))
            assert np.max(np.abs(recon.coeffs - d.coeffs)) < 1e-10 * scale
            # root classification with the margin guard band
            if fac.n_u:
                assert np.all(np.abs(fac.d_u.roots()) > 1 + 5e-10)
            if fac.d_s.degree:
                assert np.all(np.abs(fac.d_s.roots()) < 1 - 5e-10)


class TestReverseUnstable:
    def test_single_root(self):
        assert reverse_unstable(Polynomial([1, -1.2])).allclose(Polynomial([-1.2, 1]))

    def test_empty_product(self):
        assert reverse_unstable(Polynomial([1.0])).allclose(Polynomial([1.0]))

    def test_two_roots(self):
        d = Polynomial(np.convolve([1, -1.2], [1, -1.5]))
        rev = reverse_unstable(d)
        assert rev.allclose(Polynomial([1.8, -2.7, 1]))
        assert np.allclose(sorted(rev.roots().real), sorted([1 / 1.2, 1 / 1.5]))

    def test_involution(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            roots = rng.uniform(1.1, 3.0, size=rng.integers(1, 4))
            d = Polynomial.from_roots(roots)
            back = reverse_unstable(Polynomial(reverse_unstable(d).coeffs
                                               / reverse_unstable(d).lead))
            # un-normalized reversal is an involution up to the leading factor
            rev2 = Polynomial(reverse_unstable(d).coeffs[::-1])
            assert Polynomial(rev2.coeffs / rev2.lead).allclose(Polynomial(d.coeffs / d.lead))

    def test_requires_monic(self):
        with pytest.raises(ValueError):
            reverse_unstable(Polynomial([2.0, -1.0]))


class TestConvolveSplit:
    def test_worked_example(self):
        s0, s1, u1 = 1.3, -0.4, -1.7
        assert np.allclose(convolve_split([s0, s1], [u1]),
                           [s0, s0 * u1 + s1, s1 * u1])

    def test_empty_unstable(self):
        assert np.allclose(convolve_split([1.0], []), [1.0])

    def test_direct_convolution(self):
        assert np.allclose(convolve_split([2, -1], [-1.2]), [2, -3.4, 1.2])


class TestSylvesterJacobian:
    def test_paper_3x3(self):
        s0, s1, u1 = 0.7, -0.3, -1.4
        expected = np.array([[1, 0, 0], [u1, 1, s0], [0, u1, s1]])
        assert np.allclose(sylvester_jacobian([s0, s1], [u1]), expected)

    def test_banded_6x6(self):
        s = np.array([0.5, -0.2, 0.1, 0.05])
        u = np.array([-1.3, 0.4])
        jac = sylvester_jacobian(s, u)
        expected = np.array([
            [1,    0,    0,    0,    0,    0],
            [u[0], 1,    0,    0,    s[0], 0],
            [u[1], u[0], 1,    0,    s[1], s[0]],
            [0,    u[1], u[0], 1,    s[2], s[1]],
            [0,    0,    u[1], u[0], s[3], s[2]],
            [0,    0,    0,    u[1], 0,    s[3]],
        ])
        assert np.allclose(jac, expected)

    def test_identity_when_all_stable(self):
        assert np.allclose(sylvester_jacobian([0.3, -0.1, 0.7], []), np.eye(3))

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            s = rng.normal(size=rng.integers(1, 5))
            u = rng.normal(size=rng.integers(0, 4))
            jac = sylvester_jacobian(s, u)
            x = np.concatenate([s, u])
            h = 1e-6
            fd = np.zeros_like(jac)
            for k in range(x.size):
                xp, xm = x.copy(), x.copy()
                xp[k] += h
                xm[k] -= h
                fp = convolve_split(xp[:s.size], xp[s.size:])
                fm = convolve_split(xm[:s.size], xm[s.size:])
                fd[:, k] = (fp - fm) / (2 * h)
            assert np.max(np.abs(jac - fd)) < 1e-8


class TestRoundTrip:
    def test_roots_poly_round_trip(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            deg = rng.integers(1, 9)
            roots = np.sort(rng.choice(np.linspace(-2, 2, 41), size=deg, replace=False))
            p = Polynomial.from_roots(roots)
            got = np.sort(p.roots().real)
            assert np.max(np.abs(got - roots)) < 1e-7


class TestPolyMatrixHelpers:
    def test_det_2x2(self):
        grid = [[np.array([1.0, 2.0]), np.array([3.0])],
                [np.array([1.0]), np.array([2.0, -1.0])]]
        # (q+2)(2q-1) - 3 = 2q^2 + 3q - 5
        assert np.allclose(poly_mat_det(grid), [2.0, 3.0, -5.0])

    def test_adj_times_matrix_is_det(self):
        rng = np.random.default_rng(2)
        for n in (2, 3):
            grid = [[rng.normal(size=3) for _ in range(n)] for _ in range(n)]
            det = poly_mat_det(grid)
            adj = poly_mat_adj(grid)
            # (adj(B) B)[0][0] must equal det(B)
            acc = np.zeros(1)
            for k in range(n):
                term = np.convolve(adj[0][k], grid[k][0])
                m = max(len(acc), len(term))
                padded = np.zeros(m)
                padded[m - len(acc):] += acc
                padded[m - len(term):] += term
                acc = padded
            assert np.allclose(acc[-len(det):], det, atol=1e-12)
            head = acc[:len(acc) - len(det)]
            assert head.size == 0 or np.max(np.abs(head)) < 1e-12
