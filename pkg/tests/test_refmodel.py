import numpy as np
import pytest

from ocitune.errors import ZeroOutputComponent
from ocitune.polynomial import Polynomial
from ocitune.rational import RationalFunction
from ocitune.refmodel import (
    EntryTemplate,
    RefModelSpec,
    build_Ld,
    build_refmodel,
    coupling_zero_from_direction,
    eta_jacobian,
    extract_nmp_zero,
    principal_unstable_zero,
    verify_zero_constraint,
)
from ocitune.transfer import TransferMatrix


class TestTemplates:
    def test_gain_template_identified_entry(self, diag_spec):
        # first-loop numerator root lands at 1.204 for eta = -0.3921...
        eta1 = 0.08 / (1 - 1.204)
        td = build_refmodel(diag_spec, np.array([eta1, 0.0]))
        e = td[0, 0]
        assert np.allclose(e.num.roots(), [1.204])
        assert e.den.allclose(Polynomial(np.convolve([1, -0.6], [1, -0.8])))

    def test_matched_triangular_model(self, tri_spec, tri_refmodel_matched):
        td = build_refmodel(tri_spec, np.array([-0.4, 1.0, -0.8]))
        for i in range(2):
            for j in range(2):
                assert td[i, j].allclose(tri_refmodel_matched[i, j], rtol=1e-9)

    def test_static_gain_constraint_for_random_eta(self, diag_spec, tri_spec):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            eta = rng.normal(scale=2.0, size=2)
            td = build_refmodel(diag_spec, eta)
            assert np.max(np.abs(td.eval(1.0) - np.eye(2))) < 1e-10
        for _ in range(200):
            eta = rng.normal(scale=2.0, size=3)
            td = build_refmodel(tri_spec, eta)
            val = td.eval(1.0)
            assert abs(val[0, 0] - 1.0) < 1e-10
            assert abs(val[0, 1]) < 1e-10  # coupling vanishes at q=1
            assert abs(val[1, 1] - 1.0) < 1e-10

    def test_rel_degree_extension(self):
        spec = RefModelSpec(n=1, entries=((EntryTemplate("gain", poles=(0.5, 0.4),
                                                         rel_degree=2),),))
        td = build_refmodel(spec, np.array([0.3]))
        assert td[0, 0].den.degree == 3
        assert abs(td[0, 0](1.0) - 1.0) < 1e-12

    def test_unstable_pole_rejected(self):
        with pytest.raises(ValueError):
            RefModelSpec(n=1, entries=((EntryTemplate("gain", poles=(1.1,)),),))

    def test_structure_validation(self):
        with pytest.raises(ValueError):
            RefModelSpec(n=2, structure="diagonal", entries=(
                (EntryTemplate("gain", poles=(0.5,)), EntryTemplate("fixed", num=(1.0,), poles=(0.5,))),
                (EntryTemplate("zero"), EntryTemplate("gain", poles=(0.5,))),
            ))


class TestBuildLd:
    def test_scalar_first_order(self):
        td = TransferMatrix.diagonal([RationalFunction([0.25], [1, -0.75])])
        ld = build_Ld(td)
        assert ld[0, 0].allclose(RationalFunction([0.25], [1, -1]))

    def test_zero_refmodel(self):
        ld = build_Ld(TransferMatrix.zeros(2))
        assert all(ld[i, j].is_zero for i in range(2) for j in range(2))

    def test_diagonal_design_entry(self):
        # expansion oracle: (q-0.6)(q-0.8) + 0.4(q-1.2) = q^2 - q,
        # so L_d = -0.4(q-1.2)/(q(q-1))
        den = np.convolve([1, -0.6], [1, -0.8])
        check = np.polyadd(den, [0.4, -0.48])
        assert np.allclose(check, [1, -1, 0])
        entry = RationalFunction([-0.4, 0.48], den)
        ld = build_Ld(TransferMatrix.diagonal([entry, entry]))
        expected = RationalFunction([-0.4, 0.48], [1, -1, 0])
        assert ld[0, 0].allclose(expected, rtol=1e-8)
        assert ld[1, 1].allclose(expected, rtol=1e-8)

    def test_unit_pole_deflation_remainder(self, diag_spec):
        rng = np.random.default_rng(1)
        for _ in range(50):
            eta = rng.normal(scale=1.5, size=2)
            ld = build_Ld(build_refmodel(diag_spec, eta))
            for j in range(2):
                den = ld[j, j].den
                scale = np.max(np.abs(den.coeffs))
                _, rem = den.deflate(1.0)
                assert abs(rem) < 1e-9 * scale


class TestEtaJacobian:
    def test_matches_structured_predictor_terms(self, tri_spec):
        # dual route: generic rational derivative vs the predictor's
        # closed-form assembly, compared pointwise off the poles
        from ocitune.predictor import _structured_loop

        eta = np.array([-0.31, 0.7, -0.2])
        generic = eta_jacobian(tri_spec, eta)
        _, dld = _structured_loop(tri_spec).terms(eta, with_derivatives=True)
        qm1 = np.array([1.0, -1.0])
        for m in range(tri_spec.n_eta):
            for (i, k), term in dld[m].items():
                den = np.convolve(term.den, [1.0, -1.0]) if term.units else term.den
                structured = RationalFunction(term.num, den, reduce=False)
                for z in (1.7 + 0.3j, -0.9 + 1.1j, 2.4):
                    a = generic[m][i, k](z)
                    b = structured(z)
                    assert abs(a - b) < 1e-8 * max(1.0, abs(a))

    def test_fixed_entries_have_zero_sensitivity(self, tri_spec):
        eta = np.array([-0.4, 1.0, -0.8])
        jac = eta_jacobian(tri_spec, eta)
        for m in range(3):
            assert jac[m][1, 0].is_zero  # structurally zero entry stays zero

    def test_matches_finite_differences(self, diag_spec):
        eta = np.array([-0.35, -0.45])
        jac = eta_jacobian(diag_spec, eta)
        h = 1e-6
        for m in range(2):
            ep, em = eta.copy(), eta.copy()
            ep[m] += h
            em[m] -= h
            lp = build_Ld(build_refmodel(diag_spec, ep))
            lm = build_Ld(build_refmodel(diag_spec, em))
            for z in (1.6 + 0.4j, 2.2, -1.4 + 0.2j):
                for i in range(2):
                    fd = (lp[i, i](z) - lm[i, i](z)) / (2 * h)
                    an = jac[m][i, i](z)
                    if abs(an) < 1e-12 and abs(fd) < 1e-6:
                        continue
                    assert abs(fd - an) / max(abs(an), 1e-9) < 1e-6


class TestZeroExtraction:
    def test_paper_values(self, diag_spec):
        eta = np.array([-0.379, 0.0])
        zeros = extract_nmp_zero(diag_spec, eta)
        assert len(zeros) == 1
        assert abs(zeros[0].real - 1.211) < 1e-3

        spec63 = RefModelSpec(n=1, entries=((EntryTemplate("gain", poles=(0.6, 0.6)),),))
        zeros = extract_nmp_zero(spec63, np.array([-0.835]))
        assert abs(zeros[0].real - 1.192) < 1e-3

    def test_constant_numerator_gives_nothing(self, diag_spec):
        assert extract_nmp_zero(diag_spec, np.zeros(2)) == []

    def test_structural_unit_zero_not_reported(self, tri_spec):
        # coupling (q-1) factor must not count as an identified unstable zero
        zeros = extract_nmp_zero(tri_spec, np.array([0.0, 0.5, 0.1]))
        assert zeros == []

    def test_principal_zero(self):
        assert principal_unstable_zero([]) is None
        assert principal_unstable_zero([complex(1.2, 0)]) == pytest.approx(1.2)
        assert principal_unstable_zero([complex(1.1, 0), complex(-1.4, 0)]) == pytest.approx(-1.4)


class TestZeroConstraint:
    def test_matched_triangular(self, tri_refmodel_matched):
        res = verify_zero_constraint(tri_refmodel_matched, 1.2, np.array([-0.6, 0.8]))
        assert res < 1e-10

    def test_diagonal_annihilates_everything(self):
        entry = RationalFunction([-0.4, 0.48], np.convolve([1, -0.6], [1, -0.8]))
        td = TransferMatrix.diagonal([entry, entry])
        res = verify_zero_constraint(td, 1.2, np.array([0.3, 0.7]))
        assert res < 1e-12

    def test_wrong_direction_fails(self, tri_refmodel_matched):
        res = verify_zero_constraint(tri_refmodel_matched, 1.2, np.array([1.0, 0.0]))
        assert res > 0.5


class TestCouplingZero:
    def test_golden_value(self):
        z = coupling_zero_from_direction(1.2, np.array([-0.6, 0.8]), k=0, j=1,
                                         gain_kj=1.0, poles_jj=(0.75,),
                                         poles_kk=(0.8, 0.6))
        assert z == pytest.approx(0.8, abs=1e-12)

    def test_gain_scaling_halves_offset(self):
        y = np.array([-0.6, 0.8])
        z1 = coupling_zero_from_direction(1.2, y, 0, 1, 1.0, (0.75,), (0.8, 0.6))
        z2 = coupling_zero_from_direction(1.2, y, 0, 1, 2.0, (0.75,), (0.8, 0.6))
        assert (z2 - 1.2) == pytest.approx((z1 - 1.2) / 2)

    def test_zero_component_of_direction(self):
        z = coupling_zero_from_direction(1.2, np.array([1.0, 0.0]), 0, 1, 1.0,
                                         (0.75,), (0.8, 0.6))
        assert z == pytest.approx(1.2)

    def test_rejects_zero_k_component(self):
        with pytest.raises(ZeroOutputComponent):
            coupling_zero_from_direction(1.2, np.array([0.0, 1.0]), 0, 1, 1.0,
                                         (0.75,), (0.8, 0.6))

    def test_resulting_refmodel_satisfies_constraint(self):
        # build the full coupled model with the computed zero and check it
        y = np.array([-0.6, 0.8])
        k_gain = 1.0
        z_kj = coupling_zero_from_direction(1.2, y, 0, 1, k_gain, (0.75,), (0.8, 0.6))
        t11 = RationalFunction([-0.4, 0.48], np.convolve([1, -0.8], [1, -0.6]))
        num12 = k_gain * np.convolve([1, -1], [1, -z_kj])
        den12 = np.convolve(np.convolve([1, -0.75], [1, -0.8]), [1, -0.6])
        t12 = RationalFunction(num12, den12)
        t22 = RationalFunction([0.25], [1, -0.75])
        td = TransferMatrix([[t11, t12], [RationalFunction([0.0], [1.0]), t22]])
        assert verify_zero_constraint(td, 1.2, y) < 1e-10
