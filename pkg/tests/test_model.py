import numpy as np
import pytest

from temfri import (
    FourierCoeffs,
    PreconditionError,
    VpwPulse,
    VpwSignal,
    amplitude_bound,
    bandlimited_evaluate,
    evaluate,
    fourier_coeffs,
)

from helpers import closed_form_eval, plain_series_sum, quadrature_fsc

CANON = VpwSignal(period=1.0, pulses=(VpwPulse(c=1.0, d=0.0, r=0.1, tau=0.5),))

# e**(-0.2*pi): magnitude of the first harmonic of the canonical pulse.
EXP_02PI = 0.5334880910911033


def random_signal(rng, k, period=1.0):
    pulses = tuple(
        VpwPulse(
            c=float(rng.uniform(0.2, 2.0) * rng.choice([-1, 1])),
            d=float(rng.uniform(0.1, 1.0) * rng.choice([-1, 1])),
            r=float(rng.uniform(0.02, 0.1) * period),
            tau=float(rng.uniform(0.0, period)),
        )
        for _ in range(k)
    )
    return VpwSignal(period=period, pulses=pulses)


class TestTypes:
    def test_zero_width_rejected(self):
        with pytest.raises(PreconditionError):
            VpwPulse(c=1.0, d=0.0, r=0.0, tau=0.1)

    def test_tau_normalized_modulo_period(self):
        sig = VpwSignal(period=1.0, pulses=(VpwPulse(c=1.0, d=0.0, r=0.1, tau=2.25),))
        assert sig.pulses[0].tau == pytest.approx(0.25, abs=0)

    def test_empty_signal_rejected(self):
        with pytest.raises(PreconditionError):
            VpwSignal(period=1.0, pulses=())

    def test_coeffs_immutable(self):
        co = fourier_coeffs(CANON, 4)
        with pytest.raises(ValueError):
            co.data[0] = 1.0


class TestEvaluate:
    def test_truncation_matches_large_p_oracle(self):
        # p_terms = 200 against the same summation at p_terms = 1e6: the
        # analytic tail makes both sit on the true value.
        v200 = evaluate(CANON, 0.5, p_terms=200)
        v1e6 = evaluate(CANON, 0.5, p_terms=10**6)
        assert abs(v200 - v1e6) < 1e-9

    def test_matches_closed_form(self):
        assert abs(evaluate(CANON, 0.5, p_terms=200) - closed_form_eval(CANON, 0.5)) < 1e-9

    def test_plain_truncation_tail_documented(self):
        # The bare sum at 1e6 terms still carries its ~2r/(pi*T^2*P) tail;
        # this pins why the tail correction exists.
        bare = plain_series_sum(CANON, 0.5, 10**6)
        exact = closed_form_eval(CANON, 0.5)
        assert 1e-9 < abs(bare - exact) < 1e-6

    def test_zero_amplitudes(self):
        sig = VpwSignal(period=1.0, pulses=(VpwPulse(c=0.0, d=0.0, r=0.1, tau=0.5),))
        for t in (0.0, 0.3, 0.99):
            assert evaluate(sig, t) == 0.0

    def test_symmetric_pulse_even_about_tau(self):
        s = 0.01
        left = evaluate(CANON, 0.5 - s, p_terms=200)
        right = evaluate(CANON, 0.5 + s, p_terms=200)
        assert abs(left - right) < 1e-10

    def test_asymmetric_matches_closed_form(self):
        rng = np.random.default_rng(0)
        sig = random_signal(rng, 3)
        for t in rng.uniform(0.0, 1.0, size=20):
            assert abs(evaluate(sig, t, p_terms=64) - closed_form_eval(sig, t)) < 1e-9

    def test_non_finite_t_rejected(self):
        with pytest.raises(PreconditionError):
            evaluate(CANON, np.nan)
        with pytest.raises(PreconditionError):
            evaluate(CANON, np.inf)

    def test_vectorized_matches_scalar(self):
        ts = np.linspace(0.0, 1.0, 7)
        vec = evaluate(CANON, ts)
        assert vec.shape == (7,)
        for t, v in zip(ts, vec):
            assert v == evaluate(CANON, float(t))


class TestFourierCoeffs:
    def test_first_harmonic_closed_form(self):
        co = fourier_coeffs(CANON, 8)
        expected = EXP_02PI * np.exp(-1j * np.pi)  # = -e^(-0.2*pi)
        assert co.get(1) == pytest.approx(expected, abs=1e-15)

    def test_first_harmonic_quadrature(self):
        got = fourier_coeffs(CANON, 8).get(1)
        assert abs(got - quadrature_fsc(CANON, 1)) < 1e-10

    def test_dc_is_c_over_period(self):
        co = fourier_coeffs(CANON, 4)
        assert co.get(0) == pytest.approx(1.0, abs=1e-15)

    def test_conjugate_symmetry_bit_exact(self):
        rng = np.random.default_rng(1)
        for k in (1, 3, 7):
            co = fourier_coeffs(random_signal(rng, k), 12)
            for m in (1, 3, 12):
                assert co.get(-m) == np.conj(co.get(m))  # bit-for-bit

    def test_decay_bound(self):
        rng = np.random.default_rng(2)
        sig = random_signal(rng, 4)
        co = fourier_coeffs(sig, 40)
        r_min = min(p.r for p in sig.pulses)
        scale = sum(np.hypot(p.c, p.d) for p in sig.pulses) / sig.period
        for m in range(1, 41):
            bound = scale * np.exp(-2.0 * np.pi * r_min * m / sig.period)
            assert abs(co.get(m)) <= bound * (1.0 + 1e-12)

    def test_quadrature_equivalence_k10_m60(self):
        rng = np.random.default_rng(3)
        sig = random_signal(rng, 10)
        co = fourier_coeffs(sig, 60)
        for m in (1, 7, 33, 60):
            ref = quadrature_fsc(sig, m, n_grid=16384)
            assert abs(co.get(m) - ref) <= 1e-8 * max(abs(ref), 1e-12)

    def test_dirac_limit(self):
        sig = VpwSignal(period=1.0, pulses=(VpwPulse(c=0.7, d=0.0, r=1e-6, tau=0.3),))
        co = fourier_coeffs(sig, 10)
        for m in range(1, 11):
            ideal = 0.7 * np.exp(-2j * np.pi * 0.3 * m)
            assert abs(co.get(m) - ideal) < 1e-4


class TestBandlimitedEvaluate:
    def test_all_zero(self):
        co = FourierCoeffs.zeros(8, 1.0)
        assert bandlimited_evaluate(co, 0.37) == 0.0

    def test_matches_direct_sum(self):
        co = fourier_coeffs(CANON, 8)
        t = 0.25
        direct = sum(
            (co.get(m) * np.exp(2j * np.pi * m * t) for m in range(-8, 9) if m != 0)
        )
        assert abs(direct.imag) < 1e-12
        assert abs(bandlimited_evaluate(co, t) - direct.real) < 1e-12

    def test_real_for_random_times(self):
        rng = np.random.default_rng(4)
        co = fourier_coeffs(random_signal(rng, 3), 10)
        for t in rng.uniform(-5.0, 5.0, size=1000):
            full = sum(
                co.get(m) * np.exp(2j * np.pi * m * t) for m in range(-10, 11) if m != 0
            )
            assert abs(full.imag) < 1e-10

    def test_asymmetric_map_rejected(self):
        data = np.zeros(9, dtype=complex)
        data[5] = 1.0  # X[1] set without its conjugate partner
        co = FourierCoeffs(m_max=4, period=1.0, data=data)
        with pytest.raises(PreconditionError):
            bandlimited_evaluate(co, 0.0)


class TestAmplitudeBound:
    def test_zero(self):
        assert amplitude_bound(FourierCoeffs.zeros(5, 1.0)) == 0.0

    def test_bounds_dense_grid_max(self):
        co = fourier_coeffs(CANON, 8).without_dc()
        grid = np.linspace(0.0, 1.0, 20001)
        actual = np.max(np.abs(bandlimited_evaluate(co, grid)))
        assert amplitude_bound(co) >= actual

    def test_tight_for_single_cosine(self):
        co = FourierCoeffs.from_positive(1, 1.0, np.array([1.0 + 0j]))
        assert amplitude_bound(co) == pytest.approx(2.0, abs=0)
        assert bandlimited_evaluate(co, 0.0) == pytest.approx(2.0, abs=1e-12)


class TestSerializationRoundTrip:
    def test_bit_exact(self, tmp_path):
        from temfri.io import read_signal, write_signal

        rng = np.random.default_rng(5)
        for k in (1, 4):
            sig = random_signal(rng, k)
            path = tmp_path / f"sig_{k}.txt"
            write_signal(sig, path)
            back = read_signal(path)
            assert back.period == sig.period
            for a, b in zip(back.pulses, sig.pulses):
                assert (a.c, a.d, a.r, a.tau) == (b.c, b.d, b.r, b.tau)
