import numpy as np
import pytest

from errors import DegenerateDecompositionError, RejectedInputError
from spectral import (
    BIAS_AS_FEATURE,
    DEGENERATE,
    INACTIVE,
    NEGATIVE_BIAS,
    PASS,
    POSITIVE_BIAS,
    ZERO_BIAS,
    EnergyDecomposition,
    bias_mode_of,
    check_theorem_pair,
    conjugate_partner,
    dft_1d,
    dft_2d,
    energy_bound_holds,
    idft_1d,
    idft_2d,
    mutual_energy,
    naive_dft,
    neuron_decomposition,
    snr,
    trial_setting,
    verify_theorem1,
)


def quadruple_loop_dft(s):
    rows, cols = s.shape
    out = np.zeros((rows, cols), dtype=complex)
    for u in range(rows):
        for v in range(cols):
            total = 0j
            for x in range(rows):
                for y in range(cols):
                    total += s[x, y] * np.exp(-2j * np.pi * (u * x / rows + v * y / cols))
            out[u, v] = total
    return out


class TestDft1d:
    def test_constant_signal_has_only_dc(self):
        coefficients = dft_1d(np.full(8, 2.5)).coefficients
        assert coefficients[0] == pytest.approx(8 * 2.5)
        np.testing.assert_allclose(coefficients[1:], 0, atol=1e-12)

    def test_impulse_is_flat(self):
        x = np.zeros(8)
        x[0] = 1.0
        np.testing.assert_allclose(dft_1d(x).coefficients, np.ones(8), atol=1e-15)

    def test_matches_naive_loop(self, rng):
        x = rng.normal(size=16)
        np.testing.assert_allclose(dft_1d(x).coefficients, naive_dft(x), atol=1e-10)

    def test_inverse_recovers_signal(self, rng):
        x = rng.normal(size=13)
        np.testing.assert_allclose(idft_1d(dft_1d(x)), x, atol=1e-12)

    @pytest.mark.parametrize("signal", [[], [1.0, np.inf], [[1.0, 2.0]]])
    def test_rejects_bad_signals(self, signal):
        with pytest.raises(RejectedInputError):
            dft_1d(signal)


class TestDft2d:
    def test_zero_map(self):
        np.testing.assert_array_equal(dft_2d(np.zeros((8, 8))).coefficients, 0)

    def test_separable_map(self, rng):
        f, g = rng.normal(size=8), rng.normal(size=6)
        expected = np.outer(np.fft.fft(f), np.fft.fft(g))
        np.testing.assert_allclose(dft_2d(np.outer(f, g)).coefficients, expected, atol=1e-9)

    def test_matches_quadruple_loop(self, rng):
        s = rng.normal(size=(8, 8))
        np.testing.assert_allclose(dft_2d(s).coefficients, quadruple_loop_dft(s), atol=1e-9)
        np.testing.assert_allclose(idft_2d(dft_2d(s)), s, atol=1e-12)

    def test_ragged_matrix_rejected(self):
        with pytest.raises(RejectedInputError):
            dft_2d([[1.0, 2.0], [3.0]])

    def test_conjugate_partner(self):
        assert conjugate_partner((0, 0), (8, 8)) == (0, 0)
        assert conjugate_partner((1, 3), (8, 8)) == (7, 5)
        assert conjugate_partner((4,), (8,)) == (4,)


class TestMutualEnergy:
    def test_self_pair_is_all_feature(self, rng):
        x = rng.normal(size=16)
        decomp = mutual_energy(x, x)
        np.testing.assert_allclose(decomp.per_frequency_mutual, decomp.per_frequency_x)
        assert np.all(decomp.per_frequency_mutual >= 0)
        assert decomp.noise_set.size == 0

    def test_negated_pair_is_all_noise(self, rng):
        x = rng.normal(size=16)
        decomp = mutual_energy(x, -x)
        nonzero = np.abs(decomp.per_frequency_mutual) > 1e-12
        assert np.all(decomp.per_frequency_mutual[nonzero] < 0)
        assert decomp.feature_set.size == 0

    def test_total_is_scaled_dot_product(self, rng):
        x, y = rng.normal(size=32), rng.normal(size=32)
        direct = sum(a * b for a, b in zip(x, y))
        assert mutual_energy(x, y).mutual_total == pytest.approx(32 * direct, rel=1e-12, abs=1e-10)

    def test_length_mismatch(self):
        with pytest.raises(RejectedInputError):
            mutual_energy(np.ones(4), np.ones(5))

    def test_asymmetric_cross_spectrum_rejected(self, monkeypatch):
        monkeypatch.setattr(np.fft, "fft", lambda a: a + 1j * np.roll(a, 1))
        with pytest.raises(RejectedInputError):
            mutual_energy([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])


class TestSpectralIdentities:
    @pytest.fixture
    def signals(self):
        rng = np.random.default_rng(100)
        return [rng.normal(size=int(n)) for n in rng.integers(2, 65, size=100)]

    def test_parseval(self, signals):
        for x in signals:
            energy = np.sum(np.abs(dft_1d(x).coefficients) ** 2) / x.size
            assert energy == pytest.approx(np.sum(x ** 2), rel=1e-9)

    def test_real_spectra_are_conjugate_symmetric(self, signals):
        for x in signals:
            X = dft_1d(x).coefficients
            partners = [conjugate_partner((k,), X.shape)[0] for k in range(x.size)]
            np.testing.assert_allclose(X[partners], np.conj(X), atol=1e-9)

    def test_mutual_energy_is_symmetric(self, signals):
        rng = np.random.default_rng(101)
        for x in signals:
            y = rng.normal(size=x.size)
            np.testing.assert_allclose(
                mutual_energy(x, y).per_frequency_mutual, mutual_energy(y, x).per_frequency_mutual, atol=1e-9
            )

    def test_agrees_with_naive_transform(self, signals):
        for x in signals:
            np.testing.assert_allclose(dft_1d(x).coefficients, naive_dft(x), atol=1e-9)

    def test_linearity(self, signals):
        rng = np.random.default_rng(102)
        for x in signals:
            y = rng.normal(size=x.size)
            combined = dft_1d(2.5 * x - 0.75 * y).coefficients
            expected = 2.5 * dft_1d(x).coefficients - 0.75 * dft_1d(y).coefficients
            np.testing.assert_allclose(combined, expected, atol=1e-9)

    def test_per_pair_energy_bound(self, signals):
        rng = np.random.default_rng(103)
        for x in signals:
            decomp = mutual_energy(x, rng.normal(size=x.size))
            bound = np.sqrt(decomp.per_frequency_x * decomp.per_frequency_y)
            assert np.all(np.abs(decomp.per_frequency_mutual) <= bound * (1 + 1e-12) + 1e-12)
            assert energy_bound_holds(decomp)


class TestSnr:
    def test_hand_built_pair(self):
        decomp = EnergyDecomposition(
            per_frequency_mutual=[1.0, -0.5],
            per_frequency_x=[1.0, 1.0],
            per_frequency_y=[1.0, 1.0],
        )
        report = snr(decomp)
        assert report.snr_original == pytest.approx(1.0)
        assert report.snr_compound == pytest.approx(4.0)
        assert report.activated

    def test_identical_pair_is_degenerate(self, rng):
        x = rng.normal(size=8)
        with pytest.raises(DegenerateDecompositionError):
            snr(mutual_energy(x, x))

    def test_bias_modes(self):
        assert bias_mode_of(0.0) == ZERO_BIAS
        assert bias_mode_of(-0.3) == NEGATIVE_BIAS
        assert bias_mode_of(0.3) == POSITIVE_BIAS
        assert bias_mode_of(0.3, bias_as_feature=True) == BIAS_AS_FEATURE

    def test_bias_as_feature_extends_the_pair(self, rng):
        x, w = rng.normal(size=8), rng.normal(size=8)
        decomp = neuron_decomposition(x, w, bias=0.7, bias_as_feature=True)
        assert decomp.length == 9
        assert decomp.mutual_total == pytest.approx(9 * (x @ w + 0.7))

    def test_negative_bias_can_deactivate(self):
        x = np.array([1.0, 0.0, 0.0, 0.0])
        w = np.array([1.0, 0.0, -1.5, 0.0])
        # dot = 1
        assert snr(mutual_energy(x, w), bias=-2.0).activated is False
        assert snr(mutual_energy(x, w), bias=-0.5).activated is True


class TestTheoremCheck:
    def test_identical_pair_skipped(self, rng):
        x = rng.normal(size=8)
        assert check_theorem_pair(x, x) == DEGENERATE

    def test_non_activated_pair_excluded(self, rng):
        x = rng.normal(size=8)
        assert check_theorem_pair(x, -x + 0.01 * rng.normal(size=8)) == INACTIVE

    def test_activated_pair_passes(self):
        x = np.array([1.0, 2.0, 0.5, -1.0])
        w = np.array([1.0, 1.5, -0.5, 0.2])
        assert check_theorem_pair(x, w) == PASS

    def test_thousand_trials_without_failure(self):
        report = verify_theorem1(1000, seed=2024, dims=(8, 16, 32))
        assert report.failed == 0
        assert report.bound_violations == 0
        assert report.checked > 0
        assert report.checked + report.skipped_degenerate + report.skipped_inactive == 1000
        assert set(report.by_mode) == {ZERO_BIAS, NEGATIVE_BIAS, BIAS_AS_FEATURE}
        assert report.ok

    def test_every_mode_meets_every_length(self):
        modes = (ZERO_BIAS, NEGATIVE_BIAS, BIAS_AS_FEATURE)
        seen = {trial_setting(t, (8, 16, 32), modes) for t in range(1000)}
        assert seen == {(d, m) for d in (8, 16, 32) for m in modes}

    def test_deterministic(self):
        a = verify_theorem1(60, seed=5)
        b = verify_theorem1(60, seed=5)
        assert (a.passed, a.skipped_inactive) == (b.passed, b.skipped_inactive)

    def test_zero_trials_rejected(self):
        with pytest.raises(RejectedInputError):
            verify_theorem1(0, seed=0)
