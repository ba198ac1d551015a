import numpy as np
import pytest

from ocitune.errors import ImproperEntry, PoleHit
from ocitune.rational import RationalFunction
from ocitune.transfer import TransferMatrix, closed_loop, ideal_controller


def diag_refmodel():
    entry = RationalFunction([-0.4, 0.48], np.convolve([1, -0.6], [1, -0.8]))
    return TransferMatrix.diagonal([entry, entry])


def tri_refmodel():
    return TransferMatrix([
        [RationalFunction([-0.4, 0.48], np.convolve([1, -0.8], [1, -0.6])),
         RationalFunction([1.0, -1.0], np.convolve([1, -0.6], [1, -0.75]))],
        [RationalFunction([0.0], [1.0]),
         RationalFunction([0.25], [1.0, -0.75])],
    ])


class TestEval:
    def test_plant_at_zero_location(self, plant):
        got = plant.eval(1.2)
        assert np.allclose(got, [[25 / 6, 5.0], [3.125, 3.75]], atol=1e-9)

    def test_identity(self):
        eye = TransferMatrix.identity(3)
        assert np.allclose(eye.eval(0.37 + 0.2j), np.eye(3))

    def test_direction_annihilates_refmodel(self):
        td = tri_refmodel()
        y = np.array([-0.6, 0.8])
        assert np.linalg.norm(y @ td.eval(1.2)) < 1e-10

    def test_pole_hit_propagates(self):
        t = TransferMatrix.diagonal([RationalFunction([1.0], [1, -0.5])])
        with pytest.raises(PoleHit):
            t.eval(0.5)


class TestInverse:
    def test_identity(self):
        eye = TransferMatrix.identity(2)
        inv = eye.inverse()
        assert np.allclose(inv.eval(1.7j), np.eye(2))

    def test_ideal_controller_inverse_is_unstable(self, plant):
        c_d = ideal_controller(plant, diag_refmodel())
        c_inv = c_d.inverse()
        stable, poles = c_inv.is_stable()
        assert not stable
        unstable = poles[np.abs(poles) > 1]
        assert np.any(np.abs(unstable - 1.2) < 1e-6)

    def test_diagonal(self):
        t = TransferMatrix.diagonal([RationalFunction([2.0], [1, -0.5]),
                                     RationalFunction([0.5], [1.0])])
        inv = t.inverse()
        assert inv[0, 0].allclose(RationalFunction([0.5, -0.25], [1.0]))
        assert inv[1, 1].allclose(RationalFunction([2.0], [1.0]))

    def test_inverse_identity_random(self):
        rng = np.random.default_rng(12)
        for n in (2, 3):
            entries = [[RationalFunction(rng.normal(size=2),
                                         [1, rng.uniform(-0.8, 0.8)])
                        for _ in range(n)] for _ in range(n)]
            # dominant diagonal keeps the matrix well conditioned
            for i in range(n):
                entries[i][i] = RationalFunction([3.0, rng.normal()],
                                                 [1, rng.uniform(-0.8, 0.8)])
            t = TransferMatrix(entries)
            inv = t.inverse()
            for z in rng.normal(size=4) + 1j * rng.normal(size=4):
                prod = t.eval(z) @ inv.eval(z)
                assert np.max(np.abs(prod - np.eye(n))) < 1e-8


class TestIdealController:
    def test_example_golden_values(self, plant):
        c_d = ideal_controller(plant, diag_refmodel())
        gains = {(0, 0): 0.6, (0, 1): -0.8, (1, 0): -0.5, (1, 1): 0.4}
        zeros = {(0, 0): (0.8, 0.9), (0, 1): (0.8, 0.9),
                 (1, 0): (0.8, 0.9), (1, 1): (0.7, 0.8)}
        for (i, j), gain in gains.items():
            e = c_d[i, j]
            assert e.den.allclose(RationalFunction([1.0], [1, -1, 0]).den, rtol=1e-8)
            assert abs(e.num.lead - gain) < 5e-3
            got = np.sort(e.num.roots().real)
            assert np.allclose(got, zeros[(i, j)], atol=5e-3)

    def test_zero_refmodel(self, plant):
        c_d = ideal_controller(plant, TransferMatrix.zeros(2))
        assert all(c_d[i, j].is_zero for i in range(2) for j in range(2))

    def test_triangular_round_trip(self, plant):
        td = tri_refmodel()
        c_d = ideal_controller(plant, td)
        t = closed_loop(plant, c_d)
        for w in np.linspace(0.05, 3.1, 16):
            z = np.exp(1j * w)
            assert np.max(np.abs(t.eval(z) - td.eval(z))) < 1e-7


class TestClosedLoop:
    def test_reproduces_refmodel_on_circle(self, plant):
        td = diag_refmodel()
        t = closed_loop(plant, ideal_controller(plant, td))
        for w in np.linspace(0, np.pi, 64):
            z = np.exp(1j * w) if w > 0 else 1.0001  # avoid the integrator pole
            assert np.max(np.abs(t.eval(z) - td.eval(z))) < 1e-7

    def test_zero_controller(self, plant):
        t = closed_loop(plant, TransferMatrix.zeros(2))
        assert all(t[i, j].is_zero for i in range(2) for j in range(2))

    def test_proportional_loop_is_stable(self, plant):
        t = closed_loop(plant, TransferMatrix.gain(0.5, 2))
        stable, _ = t.is_stable()
        assert stable


class TestTransmissionZeros:
    def test_plant_zero_and_direction(self, plant):
        zd = plant.transmission_zeros()
        assert len(zd) == 1
        assert abs(zd[0].z - 1.2) < 1e-9
        expected = np.array([-0.6, 0.8])
        cosang = abs(np.vdot(expected, zd[0].y_dir)) / np.linalg.norm(expected)
        assert np.arccos(min(cosang, 1.0)) < 1e-6

    def test_no_finite_zeros(self):
        t = TransferMatrix.diagonal([RationalFunction([1.0], [1, -0.5]),
                                     RationalFunction([1.0], [1, -0.5])])
        assert t.transmission_zeros() == []

    def test_perturbed_plant_direction_residual(self, plant):
        entries = [[plant[i, j] for j in range(2)] for i in range(2)]
        entries[0][0] = RationalFunction([1.0, -0.6], np.convolve([1, -0.9], [1, -0.8]))
        g = TransferMatrix(entries)
        for zd in g.transmission_zeros():
            gz = g.eval(zd.z)
            res = np.linalg.norm(np.conj(zd.y_dir) @ gz)
            assert res < 1e-8 * np.linalg.norm(gz)


class TestSimulation:
    def test_identity_passthrough(self):
        eye = TransferMatrix.identity(2)
        u = np.random.default_rng(0).normal(size=(2, 50))
        assert np.allclose(eye.simulate(u), u)

    def test_unit_delay(self):
        t = TransferMatrix.diagonal([RationalFunction([1.0], [1.0, 0.0])])
        u = np.zeros((1, 5))
        u[0, 0] = 1.0
        y = t.simulate(u)
        assert np.allclose(y[0], [0, 1, 0, 0, 0])

    def test_undershoot_and_steady_state(self):
        td = tri_refmodel()
        y = td.step_response(0, 200)
        assert y[0, -1] == pytest.approx(1.0, abs=1e-6)
        assert np.min(y[0]) < -0.1  # inverse response from the zero at 1.2

    def test_structural_decoupling(self):
        td = diag_refmodel()
        y = td.step_response(0, 100)
        assert np.allclose(y[1], 0.0)

    def test_first_order_step_values(self):
        td = tri_refmodel()
        y = td.step_response(1, 200)
        assert y[1, 0] == pytest.approx(0.0)
        assert y[1, 1] == pytest.approx(0.25)
        assert y[1, -1] == pytest.approx(1.0, abs=1e-6)

    def test_improper_entry_rejected(self):
        t = TransferMatrix.diagonal([RationalFunction([1.0, 0.0, 0.0], [1, -0.5])])
        with pytest.raises(ImproperEntry):
            t.simulate(np.ones((1, 4)))

    def test_linearity(self, plant):
        rng = np.random.default_rng(1)
        u1 = rng.normal(size=(2, 80))
        u2 = rng.normal(size=(2, 80))
        a, b = 0.7, -1.3
        lhs = plant.simulate(a * u1 + b * u2)
        rhs = a * plant.simulate(u1) + b * plant.simulate(u2)
        assert np.max(np.abs(lhs - rhs)) < 1e-10

    def test_time_invariance(self, plant):
        rng = np.random.default_rng(2)
        u = rng.normal(size=(2, 60))
        k = 7
        shifted = np.concatenate([np.zeros((2, k)), u], axis=1)
        y = plant.simulate(u)
        y_shift = plant.simulate(shifted)
        assert np.max(np.abs(y_shift[:, k:] - y[:, :])) < 1e-10
