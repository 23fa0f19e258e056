import numpy as np
import pytest
from scipy.special import erfc

from kkmodem.metrics import (
    FecThreshold,
    SyncFailure,
    evm,
    frame_sync,
    net_throughput,
    q_from_ber,
    reach,
    windowed_q,
)
from kkmodem.sigcore import ParameterError
from kkmodem.txdsp import prbs_generate


def erfcinv_bisect(y, lo=1e-12, hi=6.0, iters=200):
    """Independent erfcinv oracle: bisection on scipy's forward erfc."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if erfc(mid) > y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestFrameSync:
    def make_bits(self, n=1 << 16):
        return prbs_generate(23, seed=7, n=n)

    def test_known_shift_recovered(self):
        tx = self.make_bits()
        rx = np.roll(tx, 1234)
        offset, a_rx, a_tx = frame_sync(rx, tx)
        assert np.array_equal(a_rx, tx)
        errs = np.sum(a_rx != a_tx)
        assert errs == 0

    def test_shift_with_bit_flips(self):
        rng = np.random.default_rng(0)
        tx = self.make_bits()
        rx = np.roll(tx, 777)
        flips = rng.random(len(rx)) < 0.10
        rx = rx ^ flips.astype(np.uint8)
        offset, a_rx, a_tx = frame_sync(rx, tx)
        ber = np.mean(a_rx != a_tx)
        assert ber == pytest.approx(0.10, abs=0.01)

    def test_subsequence_alignment(self):
        tx = self.make_bits()
        rx = tx[5000:40000]
        offset, a_rx, a_tx = frame_sync(rx, tx)
        assert offset == 5000
        assert np.array_equal(a_rx, a_tx)

    def test_random_bits_fail(self):
        rng = np.random.default_rng(1)
        tx = self.make_bits()
        rx = rng.integers(0, 2, size=len(tx)).astype(np.uint8)
        with pytest.raises(SyncFailure):
            frame_sync(rx, tx)

    def test_circular_shift_invariant_ber(self):
        rng = np.random.default_rng(2)
        tx = self.make_bits()
        noisy = tx ^ (rng.random(len(tx)) < 0.02).astype(np.uint8)
        bers = []
        for shift in (0, 999, 30000):
            rx = np.roll(noisy, shift)
            _, a_rx, a_tx = frame_sync(rx, tx)
            bers.append(np.mean(a_rx != a_tx))
        assert len(set(bers)) == 1


class TestQFromBer:
    def test_against_bisection_oracle(self):
        expected = 20 * np.log10(np.sqrt(2) * erfcinv_bisect(2e-3))
        assert q_from_ber(1e-3) == pytest.approx(expected, abs=1e-9)
        assert q_from_ber(1e-3) == pytest.approx(9.80, abs=0.01)

    def test_monotone_decreasing(self):
        assert q_from_ber(1e-2) < q_from_ber(1e-3) < q_from_ber(1e-4)

    def test_limit_toward_half(self):
        assert q_from_ber(0.4999) < -35.0

    def test_zero_is_error_free_sentinel(self):
        assert q_from_ber(0.0) == np.inf

    def test_invalid_rejected(self):
        with pytest.raises(ParameterError):
            q_from_ber(0.5)
        with pytest.raises(ParameterError):
            q_from_ber(-0.1)

    def test_round_trip_consistency(self):
        for ber in (1e-2, 3.8e-3, 1e-3, 1e-4):
            q_lin = 10 ** (q_from_ber(ber) / 20)
            back = 0.5 * erfc(q_lin / np.sqrt(2))
            assert back == pytest.approx(ber, rel=1e-10)


class TestWindowedQ:
    def test_uniform_errors_stable(self):
        # binomial-fluctuation oracle at the window bit count
        rng = np.random.default_rng(3)
        rate = 1e-3
        n = 10_000_000
        flags = (rng.random(n) < rate).astype(np.uint8)
        series = windowed_q(flags, bit_rate_hz=1e9, window_s=1e-3)
        q_global = q_from_ber(np.mean(flags))
        qs = np.array([q for _, q in series])
        assert len(series) == 10
        assert np.all(np.abs(qs - q_global) < 0.5)

    def test_burst_window_lower(self):
        flags = np.zeros(3_000_000, dtype=np.uint8)
        flags[1_000_000:1_003_000] = 1  # burst inside window 1
        series = windowed_q(flags, bit_rate_hz=1e9, window_s=1e-3)
        qs = [q for _, q in series]
        assert qs[1] < qs[0] and qs[1] < qs[2]

    def test_window_count(self):
        flags = np.zeros(2_500_000, dtype=np.uint8)
        series = windowed_q(flags, bit_rate_hz=1e9, window_s=1e-3)
        assert len(series) == 2

    def test_zero_error_floor_finite(self):
        flags = np.zeros(1_000_000, dtype=np.uint8)
        series = windowed_q(flags, bit_rate_hz=1e9, window_s=1e-3)
        assert np.isfinite(series[0][1])
        assert series[0][1] == pytest.approx(q_from_ber(1e-6), abs=1e-9)


class TestThroughputReach:
    def test_throughput_values(self):
        hd7 = FecThreshold("hd7", 0.067, 3.8e-3)
        hd20 = FecThreshold("hd20", 0.20, 2.7e-2)
        assert net_throughput(1e9, 4, hd7) == pytest.approx(2e9 / 1.067)
        assert net_throughput(1e9, 64, hd20) == pytest.approx(5e9)

    def test_zero_overhead(self):
        fec = FecThreshold("none", 0.0, 1e-3)
        assert net_throughput(1e9, 16, fec) == pytest.approx(4e9)

    def test_linear_in_bits_per_symbol(self):
        fec = FecThreshold("hd7", 0.067, 3.8e-3)
        t4 = net_throughput(1e9, 4, fec)
        t16 = net_throughput(1e9, 16, fec)
        assert t16 / t4 == pytest.approx(2.0)

    def test_reach_selection(self):
        series = [(1000.0, 10.0), (2000.0, 8.0)]
        assert reach(series, 9.0) == 1000.0
        assert reach(series, 7.0) == 2000.0
        assert reach(series, 11.0) is None

    def test_reach_empty_rejected(self):
        with pytest.raises(ParameterError):
            reach([], 5.0)

    def test_fec_threshold_validation(self):
        with pytest.raises(ParameterError):
            FecThreshold("bad", 0.067, 0.6)


class TestEvm:
    def test_identical_zero(self):
        x = np.array([1 + 1j, -1 - 1j]) / np.sqrt(2)
        assert evm(x, x) == 0.0

    def test_uniform_offset(self):
        rng = np.random.default_rng(4)
        ref = (rng.integers(0, 2, 1000) * 2 - 1 + 1j * (rng.integers(0, 2, 1000) * 2 - 1)) / np.sqrt(2)
        assert evm(ref + 0.1, ref) == pytest.approx(10.0, rel=1e-9)

    def test_awgn_snr_20db(self):
        # EVM ~ 10^(-SNR/20) for Gaussian noise on a unit-power constellation
        rng = np.random.default_rng(5)
        n = 200_000
        ref = (rng.integers(0, 2, n) * 2 - 1 + 1j * (rng.integers(0, 2, n) * 2 - 1)) / np.sqrt(2)
        sigma = 10 ** (-20 / 20)
        noisy = ref + sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
        assert evm(noisy, ref) == pytest.approx(10.0, abs=0.5)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ParameterError):
            evm(np.ones(3), np.ones(4))
