import numpy as np
import pytest
from scipy.integrate import quad

from temfri import (
    FourierCoeffs,
    KernelSpec,
    PreconditionError,
    TemParams,
    VpwPulse,
    VpwSignal,
    amplitude_bound,
    apply_kernel,
    bandlimited_evaluate,
    discretize_record,
    encode,
    fourier_coeffs,
    min_firing_rate,
    suggest_params,
)

from helpers import dense_encoder_oracle
from test_model import random_signal


def scaled_coeffs(sig, m_max, target_bound):
    co = fourier_coeffs(sig, m_max).without_dc()
    factor = target_bound / amplitude_bound(co)
    return FourierCoeffs.from_positive(m_max, sig.period, co.positive * factor)


class TestKernel:
    def test_dc_removed(self):
        co = fourier_coeffs(random_signal(np.random.default_rng(0), 2), 8)
        assert co.has_dc and co.get(0) != 0
        out = apply_kernel(co, KernelSpec(m_max=8, period=1.0))
        assert not out.has_dc
        with pytest.raises(KeyError):
            out.get(0)

    def test_identity_on_passband(self):
        sig = random_signal(np.random.default_rng(1), 2)
        co = fourier_coeffs(sig, 8)
        out = apply_kernel(co, KernelSpec(m_max=8, period=1.0))
        for m in range(1, 9):
            assert out.get(m) == co.get(m)

    def test_entry_count(self):
        co = fourier_coeffs(random_signal(np.random.default_rng(2), 1), 6)
        out = apply_kernel(co, KernelSpec(m_max=6, period=1.0))
        assert out.n_entries == 12
        assert len(list(out.items())) == 12

    def test_narrow_coeffs_rejected(self):
        co = fourier_coeffs(random_signal(np.random.default_rng(3), 1), 4)
        with pytest.raises(PreconditionError):
            apply_kernel(co, KernelSpec(m_max=8, period=1.0))

    def test_supports_order(self):
        assert KernelSpec(m_max=8, period=1.0).supports_order(2)
        assert not KernelSpec(m_max=7, period=1.0).supports_order(2)


class TestTemParams:
    def test_bias_must_exceed_bound(self):
        with pytest.raises(PreconditionError):
            TemParams(b=0.5, kappa=1.0, delta=0.1, c=0.6)

    def test_interval_bounds(self):
        tem = TemParams(b=2.0, kappa=1.0, delta=0.5, c=1.0)
        assert tem.min_interval == pytest.approx(0.5 / 3.0)
        assert tem.max_interval == pytest.approx(0.5)

    def test_rate_validation(self):
        tem = TemParams(b=2.0, kappa=1.0, delta=0.01, c=1.0)  # rate bound 100/s
        tem.validate_for_order(10, 1.0)  # needs 82
        with pytest.raises(PreconditionError):
            tem.validate_for_order(10, 0.5)  # needs 164


class TestEncode:
    def test_zero_input_uniform_intervals(self):
        co = FourierCoeffs.zeros(4, 1.0)
        tem = TemParams(b=1.0, kappa=1.0, delta=0.1, c=0.0)
        ft = encode(co, tem, horizon=1.0)
        assert ft.n == 10
        assert np.max(np.abs(ft.intervals - 0.1)) < 1e-12

    def test_published_operating_point(self):
        # b = 0.78, delta = 0.99, kappa = 0.018: a one-pulse train encoded
        # at this operating point stays within the interval bounds and
        # clears the 8K + 2 = 10 firings needed per period.
        sig = VpwSignal(period=1.0, pulses=(VpwPulse(c=0.05, d=0.0, r=0.1, tau=0.5),))
        co = fourier_coeffs(sig, 4).without_dc()
        tem = TemParams(b=0.78, kappa=0.018, delta=0.99, c=amplitude_bound(co))
        ft = encode(co, tem, horizon=1.0)
        assert ft.n >= 10
        lo, hi = tem.min_interval, tem.max_interval
        assert np.all(ft.intervals >= lo - 1e-12)
        assert np.all(ft.intervals <= hi + 1e-12)

    def test_single_harmonic_matches_dense_oracle(self):
        # y(t) = cos(2*pi*t): X[1] = X[-1] = 1/2.
        co = FourierCoeffs.from_positive(1, 1.0, np.array([0.5 + 0j]))
        tem = TemParams(b=1.5, kappa=1.0, delta=0.05, c=1.0)
        ft = encode(co, tem, horizon=1.0)
        oracle = dense_encoder_oracle(co, tem, 1.0)
        n = min(ft.n, oracle.size)
        assert n >= 10
        assert np.max(np.abs(ft.times[:n] - oracle[:n])) < 1e-8

    def test_bias_not_above_bound_rejected(self):
        co = FourierCoeffs.from_positive(1, 1.0, np.array([0.5 + 0j]))
        with pytest.raises(PreconditionError):
            encode(co, TemParams(b=2.0, kappa=1.0, delta=0.1, c=0.5), horizon=1.0)

    def test_horizon_too_short_flagged(self):
        co = FourierCoeffs.zeros(2, 1.0)
        tem = TemParams(b=1.0, kappa=1.0, delta=2.0, c=0.0)  # needs 2 s to fire
        with pytest.raises(PreconditionError):
            encode(co, tem, horizon=1.0)

    def test_dc_bearing_input_rejected(self):
        co = fourier_coeffs(random_signal(np.random.default_rng(4), 1), 4)
        tem = TemParams(b=10.0, kappa=1.0, delta=0.1, c=9.0)
        with pytest.raises(PreconditionError):
            encode(co, tem, horizon=1.0)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        co = scaled_coeffs(random_signal(rng, 2), 8, 0.5)
        tem = suggest_params(2, 1.0, c=0.5)
        a = encode(co, tem, horizon=1.0)
        b = encode(co, tem, horizon=1.0)
        assert np.array_equal(a.times, b.times)

    def test_quantization_knob(self):
        co = FourierCoeffs.zeros(2, 1.0)
        tem = TemParams(b=1.0, kappa=1.0, delta=0.13, c=0.0)
        ft = encode(co, tem, horizon=1.0, quantize_s=1e-3)
        assert np.allclose(ft.times % 1e-3, 0.0, atol=1e-12)

    def test_interval_bounds_and_count_100_draws(self):
        rng = np.random.default_rng(6)
        for trial in range(100):
            k = int(rng.integers(1, 3))
            sig = random_signal(np.random.default_rng((6, trial)), k)
            co = scaled_coeffs(sig, 4 * k, float(rng.uniform(0.1, 1.0)))
            margin = float(rng.uniform(1.0, 1.5))
            tem = suggest_params(k, 1.0, c=amplitude_bound(co), margin=margin)
            ft = encode(co, tem, horizon=1.2, t0=float(rng.uniform(-1.0, 1.0)))
            assert np.all(ft.intervals >= tem.min_interval - 1e-12)
            assert np.all(ft.intervals <= tem.max_interval + 1e-12)
            # one full period starting at the first firing
            in_window = (ft.times >= ft.times[0]) & (ft.times <= ft.times[0] + 1.0)
            assert np.sum(in_window) >= 8 * k + 2

    def test_integral_consistency_quad(self):
        rng = np.random.default_rng(7)
        co = scaled_coeffs(random_signal(rng, 2), 8, 0.4)
        tem = suggest_params(2, 1.0, c=0.4, margin=1.2)
        ft = encode(co, tem, horizon=1.0)
        f = lambda t: bandlimited_evaluate(co, t) + tem.b
        tol = 10 * 1e-12 * (tem.b + tem.c) / tem.kappa
        for a, b in zip(ft.times[:6], ft.times[1:7]):
            val, _ = quad(f, a, b, epsabs=1e-14, limit=200)
            assert abs(val / tem.kappa - tem.delta) < max(tol, 1e-10)


class TestSuggestParams:
    def test_rate_arithmetic_k10(self):
        tem = suggest_params(10, 1.0, c=1.0, margin=2.0)
        assert (tem.b - tem.c) / (tem.kappa * tem.delta) == pytest.approx(164.0)

    def test_minimum_rate_k5(self):
        assert min_firing_rate(5, 1.0) == pytest.approx(42.0)
        tem = suggest_params(5, 1.0, c=1.0, margin=1.0)
        assert (tem.b - tem.c) / (tem.kappa * tem.delta) == pytest.approx(42.0)

    def test_margin_below_one_rejected(self):
        with pytest.raises(PreconditionError):
            suggest_params(5, 1.0, c=1.0, margin=0.99)

    def test_output_revalidates(self):
        for k in (1, 4, 10):
            tem = suggest_params(k, 2.0, c=0.3, margin=1.5)
            tem.validate_for_order(k, 2.0)


class TestDiscretizeRecord:
    def test_round_trip_bandlimited(self):
        rng = np.random.default_rng(8)
        co = scaled_coeffs(random_signal(rng, 3), 12, 1.0)
        fs, T = 2000.0, 1.0
        grid = np.arange(int(fs * T)) / fs
        samples = bandlimited_evaluate(co, grid)
        back = discretize_record(samples, fs, T, 12)
        assert np.max(np.abs(back.data - co.data)) < 1e-9

    def test_constant_record_all_zero(self):
        out = discretize_record(np.full(2000, 3.3), 2000.0, 1.0, 8)
        assert np.all(out.data == 0.0)

    def test_nyquist_ratio_bookkeeping(self):
        out = discretize_record(np.zeros(2000), 2000.0, 1.0, 40)
        assert out.n_entries == 80
        assert out.n_entries / 2000.0 == pytest.approx(0.04)

    def test_too_short_record(self):
        with pytest.raises(PreconditionError):
            discretize_record(np.zeros(1500), 2000.0, 1.0, 8)

    def test_non_integer_period_rejected(self):
        with pytest.raises(PreconditionError):
            discretize_record(np.zeros(4000), 2000.0, 1.00003, 8)


class TestFiringFile:
    def test_round_trip(self, tmp_path):
        from temfri.io import read_firings, write_firings

        co = FourierCoeffs.zeros(2, 1.0)
        tem = TemParams(b=1.0, kappa=1.0, delta=0.07, c=0.0)
        ft = encode(co, tem, horizon=1.0)
        path = tmp_path / "firings.txt"
        write_firings(ft, tem, path)
        header = path.read_text().splitlines()[0]
        assert header.startswith("# ")
        back, tem_back = read_firings(path)
        assert tem_back.b == tem.b and tem_back.kappa == tem.kappa and tem_back.delta == tem.delta
        assert back.horizon == ft.horizon
        assert np.max(np.abs(back.times - ft.times)) < 1e-12
