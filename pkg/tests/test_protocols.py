import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from weakmeas.evolution import PostselectionError
from weakmeas.hilbert import (
    DensityMatrix,
    StateVector,
    fourier_ket,
    projector,
    random_density,
    random_state,
    s_ab_operator,
    standard_ket,
    trace_distance,
)
from weakmeas.oracle import density_from_triple_exact, dirac_exact, weak_average
from weakmeas.protocols import (
    ProtocolParams,
    calibrate_scheme1,
    convergence_slope,
    dirac_to_density,
    direct_density,
    direct_dirac,
    direct_wavefunction,
    extrapolate_sweep,
    invert_dirac,
    mixed_state_response,
    scheme1_weak_product,
    scheme2_weak_product,
    weak_strong_product,
)

PI0 = projector(standard_ket(2, 0))
B0 = fourier_ket(2, 0)
PLUS = StateVector(np.array([1.0, 1.0]) / np.sqrt(2))


class TestProtocolParams:
    def test_defaults(self):
        p = ProtocolParams()
        assert p.gt == 0.02
        assert p.scheme == "substitution"
        assert p.couplings(3) == (0.02, 0.02, 0.02)

    def test_explicit_second_coupling(self):
        p = ProtocolParams(gt=0.04, gt2=0.01)
        assert p.couplings(2) == (0.04, 0.01)

    def test_grid_defaults_shrink_with_pointer_count(self):
        p = ProtocolParams()
        assert p.grid(1).positions.size == 512
        assert p.grid(2).positions.size == 256
        assert p.grid(3).positions.size == 64
        assert p.grid(1).half_width == 16.0

    def test_validation(self):
        with pytest.raises(ValueError):
            ProtocolParams(scheme="scheme3")
        with pytest.raises(ValueError):
            ProtocolParams(gt=0.0)
        with pytest.raises(ValueError):
            ProtocolParams(sigma=-1.0)
        with pytest.raises(ValueError):
            ProtocolParams().grid(4)


class TestDirectWavefunction:
    def test_reference_state_gives_uniform_weak_values(self):
        out = direct_wavefunction(PLUS, B0)
        assert_allclose(out.weak_values, [0.5, 0.5], atol=1e-3)
        assert_allclose(out.normalized, PLUS.amps, atol=1e-3)

    def test_real_amplitudes_recovered(self):
        psi = StateVector(np.array([0.6, 0.8]))
        out = direct_wavefunction(psi, B0)
        assert_allclose(out.normalized, psi.amps, atol=1e-3)

    def test_complex_phase_recovered(self):
        psi = StateVector(np.array([1.0, 1.0j]) / np.sqrt(2))
        out = direct_wavefunction(psi, B0)
        assert_allclose(out.normalized, psi.amps, atol=1e-3)

    def test_postselect_probs_reported(self):
        out = direct_wavefunction(PLUS, B0)
        assert out.postselect_probs.shape == (2,)
        assert np.all(out.postselect_probs > 0.9)

    def test_biased_reference_rejected(self):
        with pytest.raises(ValueError):
            direct_wavefunction(PLUS, standard_ket(2, 0))

    def test_orthogonal_reference_aborts(self):
        psi = StateVector(np.array([1.0, -1.0]) / np.sqrt(2))
        with pytest.raises(PostselectionError):
            direct_wavefunction(psi, B0, ProtocolParams(gt=0.001))


class TestMixedStateResponse:
    def test_mixed_and_reference_indistinguishable(self):
        """rho|b0> is the same column for I/2 and |b0><b0|, so the scan
        output coincides: the protocol certifies a pure state only if
        purity is known beforehand."""
        mixed = mixed_state_response(DensityMatrix(np.eye(2) / 2), B0)
        pure = mixed_state_response(
            DensityMatrix(np.outer(B0.amps, B0.amps.conj())), B0
        )
        assert_allclose(mixed, pure, atol=1e-14)
        assert_allclose(mixed, [0.5, 0.5], atol=1e-14)

    def test_pure_state_response_proportional_to_amplitudes(self):
        psi = StateVector(np.array([0.6, 0.8]))
        rho = DensityMatrix(np.outer(psi.amps, psi.amps.conj()))
        response = mixed_state_response(rho, B0)
        ratio = response / psi.amps
        assert abs(ratio[0] - ratio[1]) < 1e-12

    def test_matches_weak_scan_in_weak_limit(self):
        psi = StateVector(np.array([0.6, 0.8]))
        rho = DensityMatrix(np.outer(psi.amps, psi.amps.conj()))
        scan = direct_wavefunction(psi, B0, ProtocolParams(gt=0.005))
        assert_allclose(mixed_state_response(rho, B0), scan.weak_values, atol=1e-4)

    def test_zero_overlap_rejected(self):
        rho = DensityMatrix(np.outer(PLUS.amps, PLUS.amps.conj()))
        minus = StateVector(np.array([1.0, -1.0]) / np.sqrt(2))
        with pytest.raises(ValueError):
            mixed_state_response(rho, minus)


class TestScheme1Product:
    def test_exact_on_shared_eigenstate(self):
        """No weak-regime error at all when rho is an E and F eigenstate."""
        value = scheme1_weak_product(standard_ket(2, 0), PI0, PI0,
                                     ProtocolParams(gt=0.1, scheme="scheme1"))
        assert value == pytest.approx(1.0, abs=1e-10)

    def test_projector_pair(self):
        value = scheme1_weak_product(standard_ket(2, 0), projector(B0), PI0,
                                     ProtocolParams(scheme="scheme1"))
        assert value == pytest.approx(0.5, abs=1e-3)

    def test_complex_product_against_oracle(self):
        psi = StateVector(np.array([0.8, 0.6j]))
        rho = DensityMatrix(np.outer(psi.amps, psi.amps.conj()))
        e_op = projector(fourier_ket(2, 1))
        oracle = weak_average(
            type(e_op)(e_op.matrix @ PI0.matrix), rho
        )
        value = scheme1_weak_product(rho, e_op, PI0, ProtocolParams(scheme="scheme1"))
        assert abs(oracle.imag) > 0.05
        assert value == pytest.approx(oracle, abs=1e-3)

    def test_quadratic_convergence(self):
        rho = random_density(2, seed=5, rank=2)
        e_op = projector(fourier_ket(2, 1))
        oracle = weak_average(type(e_op)(e_op.matrix @ PI0.matrix), rho)
        errors = []
        gts = (0.08, 0.04, 0.02)
        for gt in gts:
            value = scheme1_weak_product(
                rho, e_op, PI0, ProtocolParams(gt=gt, scheme="scheme1")
            )
            errors.append(abs(value - oracle))
        assert convergence_slope(gts, errors) == pytest.approx(2.0, abs=0.2)

    def test_strong_coupling_warns(self):
        with pytest.warns(RuntimeWarning):
            scheme1_weak_product(standard_ket(2, 0), PI0, PI0,
                                 ProtocolParams(gt=0.3, scheme="scheme1"))


class TestScheme2Product:
    def test_exact_on_shared_eigenstate(self):
        value = scheme2_weak_product(standard_ket(2, 0), PI0, PI0,
                                     ProtocolParams(gt=0.1, scheme="scheme2"))
        assert value == pytest.approx(1.0, abs=1e-10)

    def test_agrees_with_scheme1(self):
        rho = random_density(2, seed=6, rank=2)
        e_op = projector(fourier_ket(2, 1))
        p1 = ProtocolParams(gt=0.02, scheme="scheme1")
        p2 = ProtocolParams(gt=0.02, scheme="scheme2")
        v1 = scheme1_weak_product(rho, e_op, PI0, p1)
        v2 = scheme2_weak_product(rho, e_op, PI0, p2)
        assert v2 == pytest.approx(v1, abs=1e-3)

    def test_complex_product_against_oracle(self):
        rho = random_density(2, seed=6, rank=2)
        e_op = projector(fourier_ket(2, 1))
        oracle = weak_average(type(e_op)(e_op.matrix @ PI0.matrix), rho)
        value = scheme2_weak_product(rho, e_op, PI0,
                                     ProtocolParams(scheme="scheme2"))
        assert value == pytest.approx(oracle, abs=1e-3)


class TestWeakStrongProduct:
    def test_single_factor_identity_readout(self):
        rho = DensityMatrix(np.eye(2) / 2)
        basis = [fourier_ket(2, b) for b in range(2)]
        total = weak_strong_product(rho, PI0, basis, [1.0, 1.0])
        assert total == pytest.approx(0.5, abs=1e-3)

    def test_signed_readout_vanishes_on_eigenstate(self):
        basis = [fourier_ket(2, b) for b in range(2)]
        total = weak_strong_product(standard_ket(2, 0), PI0, basis, [1.0, -1.0])
        assert total == pytest.approx(0.0, abs=1e-10)

    def test_chain_estimates_density_element(self):
        rho = random_density(2, seed=7, rank=2)
        basis = [standard_ket(2, a) for a in range(2)]
        chain = [projector(standard_ket(2, 0)), projector(B0)]
        total = weak_strong_product(rho, chain, basis, [0.0, 1.0])
        assert total == pytest.approx(rho.matrix[0, 1] / 2, abs=1e-3)

    def test_chain_length_validated(self):
        basis = [standard_ket(2, a) for a in range(2)]
        with pytest.raises(ValueError):
            weak_strong_product(standard_ket(2, 0), [], basis, [1.0, 1.0])
        with pytest.raises(ValueError):
            weak_strong_product(standard_ket(2, 0), [PI0] * 4, basis, [1.0, 1.0])

    def test_values_length_validated(self):
        basis = [standard_ket(2, a) for a in range(2)]
        with pytest.raises(ValueError):
            weak_strong_product(standard_ket(2, 0), PI0, basis, [1.0])


class TestDirectDirac:
    def test_standard_eigenstate(self):
        out = direct_dirac(DensityMatrix(np.diag([1.0, 0.0]).astype(complex)))
        assert_allclose(out.distribution.entries, [[0.5, 0.5], [0.0, 0.0]],
                        atol=1e-3)

    def test_maximally_mixed(self):
        out = direct_dirac(DensityMatrix(np.eye(2) / 2))
        assert_allclose(out.distribution.entries, 0.25 * np.ones((2, 2)),
                        atol=1e-3)

    def test_random_state_against_oracle(self):
        rho = random_density(3, seed=2, rank=2)
        out = direct_dirac(rho)
        assert_allclose(out.distribution.entries, dirac_exact(rho).entries,
                        atol=1e-4)

    def test_scheme1_route_agrees(self):
        rho = random_density(2, seed=3, rank=2)
        out = direct_dirac(rho, ProtocolParams(scheme="scheme1"))
        assert_allclose(out.distribution.entries, dirac_exact(rho).entries,
                        atol=1e-3)

    def test_scheme2_route_agrees(self):
        rho = random_density(2, seed=3, rank=2)
        out = direct_dirac(rho, ProtocolParams(scheme="scheme2"))
        assert_allclose(out.distribution.entries, dirac_exact(rho).entries,
                        atol=1e-3)

    def test_estimates_carry_settings(self):
        out = direct_dirac(DensityMatrix(np.eye(2) / 2))
        settings_seen = {e.setting for e in out.estimates}
        assert (("a", 0), ("b", 1)) in settings_seen
        assert len(settings_seen) == 4


class TestDirectDensity:
    def test_maximally_mixed(self):
        out = direct_density(DensityMatrix(np.eye(2) / 2))
        assert_allclose(out.raw, np.eye(2) / 4, atol=1e-4)
        assert_allclose(out.matrix, np.eye(2) / 2, atol=1e-4)

    def test_pure_eigenstate(self):
        rho = DensityMatrix(np.diag([1.0, 0.0]).astype(complex))
        out = direct_density(rho)
        assert trace_distance(out.matrix, rho.matrix) < 1e-3

    def test_error_shrinks_with_coupling(self):
        rho = random_density(4, seed=7, rank=2)
        errs = [
            trace_distance(direct_density(rho, params=ProtocolParams(gt=gt)).matrix,
                           rho.matrix)
            for gt in (0.04, 0.02)
        ]
        assert errs[1] < errs[0]

    def test_triple_pointer_route(self):
        rho = random_density(2, seed=8, rank=2)
        out = direct_density(rho, params=ProtocolParams(scheme="scheme1"))
        assert trace_distance(out.matrix, rho.matrix) < 1e-3
        assert_allclose(out.raw, density_from_triple_exact(rho, B0), atol=1e-3)

    def test_scheme2_refused(self):
        with pytest.raises(ValueError, match="biased"):
            direct_density(DensityMatrix(np.eye(2) / 2),
                           params=ProtocolParams(scheme="scheme2"))

    def test_biased_reference_refused(self):
        with pytest.raises(ValueError):
            direct_density(DensityMatrix(np.eye(2) / 2), b0=standard_ket(2, 0))

    def test_diagnostics_reported(self):
        out = direct_density(random_density(2, seed=9, rank=2))
        assert set(out.diagnostics) == {
            "trace_raw", "hermiticity_defect", "min_eigenvalue"
        }
        assert out.diagnostics["hermiticity_defect"] < 1e-3
        assert np.trace(out.matrix).real == pytest.approx(1.0, abs=1e-12)


class TestDiracInversion:
    def test_eigenstate_round_trip(self):
        rho = DensityMatrix(np.diag([1.0, 0.0]).astype(complex))
        assert_allclose(dirac_to_density(dirac_exact(rho)).matrix, rho.matrix,
                        atol=1e-12)

    def test_random_round_trip(self):
        rho = random_density(4, seed=3, rank=3)
        back = invert_dirac(dirac_exact(rho).entries)
        assert np.max(np.abs(back - rho.matrix)) < 1e-12

    def test_inverts_estimated_distribution(self):
        rho = random_density(2, seed=4, rank=2)
        out = direct_dirac(rho)
        back = invert_dirac(out.distribution.entries)
        assert np.max(np.abs(back - rho.matrix)) < 1e-3


class TestCalibration:
    def test_ratios_are_unity(self):
        result = calibrate_scheme1()
        assert_allclose(np.asarray(result.ratios, dtype=complex), 1.0, atol=1e-10)
        assert result.extrapolated == pytest.approx(1.0, abs=1e-10)

    def test_kappa_values(self):
        result = calibrate_scheme1(sweep=(0.1, 0.05))
        assert result.kappas == ((2 / 0.1) ** 2, (2 / 0.05) ** 2)


class TestSweepHelpers:
    def test_exact_quadratic_recovery(self):
        gts = np.array([0.08, 0.04, 0.02, 0.01])
        values = 0.7 - 3.0 * gts**2 + 5.0 * gts**4
        assert extrapolate_sweep(gts, values) == pytest.approx(0.7, abs=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(
        v0=st.floats(-5, 5),
        c1=st.floats(-10, 10),
        c2=st.floats(-10, 10),
    )
    def test_recovers_any_even_expansion(self, v0, c1, c2):
        gts = np.array([0.08, 0.04, 0.02, 0.01])
        values = v0 + c1 * gts**2 + c2 * gts**4
        assert extrapolate_sweep(gts, values) == pytest.approx(v0, abs=1e-7)

    def test_too_few_points_rejected(self):
        with pytest.raises(ValueError):
            extrapolate_sweep([0.02], [0.5])

    def test_slope_of_quadratic_errors(self):
        gts = np.array([0.08, 0.04, 0.02])
        assert convergence_slope(gts, 3 * gts**2) == pytest.approx(2.0, abs=1e-6)

    def test_unresolvable_errors_rejected(self):
        with pytest.raises(ValueError):
            convergence_slope([0.08, 0.04], [1e-16, 1e-16])


def test_sab_weak_average_matches_scheme1():
    """The non-Hermitian S_ab operator is a pi_b pi_a product, so scheme 1
    estimates its weak average without any post-selection."""
    rho = random_density(2, seed=10, rank=2)
    oracle = weak_average(s_ab_operator(2, 0, 1), rho)
    value = scheme1_weak_product(
        rho, projector(fourier_ket(2, 1)), PI0,
        ProtocolParams(gt=0.01, scheme="scheme1"),
    )
    assert value == pytest.approx(oracle, abs=5e-4)
