"""Link quality metrics: synchronized BER counting, Q-factor, windowed
traces, EVM, FEC reach and net throughput."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import erfcinv

from .sigcore import ParameterError

__all__ = [
    "MetricsReport",
    "FecThreshold",
    "SyncFailure",
    "frame_sync",
    "q_from_ber",
    "windowed_q",
    "net_throughput",
    "reach",
    "evm",
]


class SyncFailure(RuntimeError):
    """Bit streams could not be aligned (pipeline breakdown, not high BER)."""


@dataclass
class FecThreshold:
    """Hard-decision FEC operating point; the BER limit is configuration,
    not a built-in constant."""

    name: str
    overhead_fraction: float
    ber_limit: float

    def __post_init__(self):
        if not (0.0 < self.ber_limit < 0.5):
            raise ParameterError("ber_limit must be in (0, 0.5)")
        if self.overhead_fraction < 0:
            raise ParameterError("overhead_fraction must be nonnegative")


@dataclass
class MetricsReport:
    ber: float
    q_db: float
    evm_pct: float
    n_bits: int
    n_errors: int
    sync_offset: int
    windowed_q: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ber": self.ber,
            "q_db": self.q_db,
            "evm_pct": self.evm_pct,
            "n_bits": self.n_bits,
            "n_errors": self.n_errors,
            "sync_offset": self.sync_offset,
            "windowed_q": [[float(t), float(q)] for t, q in self.windowed_q],
        }


def frame_sync(rx_bits: np.ndarray, tx_bits: np.ndarray,
               min_peak_ratio: float = 3.0) -> tuple[int, np.ndarray, np.ndarray]:
    """Align a received bit stream to the transmitted reference.

    Maximizes the bipolar cross-correlation; equal-length streams use
    circular correlation (making BER invariant to circular shifts), unequal
    lengths use linear correlation over the overlap.  Returns (offset,
    aligned_rx, aligned_tx).  Raises SyncFailure when the correlation peak is
    below min_peak_ratio times the sidelobe RMS.
    """
    rx = np.asarray(rx_bits, dtype=np.int8) * 2 - 1
    tx = np.asarray(tx_bits, dtype=np.int8) * 2 - 1
    if len(tx) < (1 << 14):
        raise ParameterError("reference must be at least 2^14 bits")
    if len(rx) < 64:
        raise SyncFailure("received stream too short")

    if len(rx) == len(tx):
        c = np.fft.ifft(np.fft.fft(rx) * np.conj(np.fft.fft(tx))).real
        mag = np.abs(c)
        k = int(np.argmax(mag))
        side = np.delete(mag, k)
        ratio = mag[k] / (np.max(side) + 1e-30)
        if ratio < min_peak_ratio:
            raise SyncFailure(f"no circular correlation peak (ratio {ratio:.2f})")
        aligned_rx = np.roll(np.asarray(rx_bits, dtype=np.uint8), -k)
        return k, aligned_rx, np.asarray(tx_bits, dtype=np.uint8)

    c = fftconvolve(rx.astype(np.float64), tx[::-1].astype(np.float64), mode="full")
    mag = np.abs(c)
    k = int(np.argmax(mag))
    side = np.delete(mag, np.arange(max(0, k - 2), min(len(mag), k + 3)))
    ratio = mag[k] / (np.max(side) + 1e-30)
    if ratio < min_peak_ratio:
        raise SyncFailure(f"no correlation peak (ratio {ratio:.2f})")
    # peak at k means rx[i] lines up with tx[i + len(tx) - 1 - k]
    lag = (len(tx) - 1) - k
    rx_u = np.asarray(rx_bits, dtype=np.uint8)
    tx_u = np.asarray(tx_bits, dtype=np.uint8)
    if lag >= 0:
        n = min(len(rx_u), len(tx_u) - lag)
        return lag, rx_u[:n], tx_u[lag:lag + n]
    n = min(len(rx_u) + lag, len(tx_u))
    return lag, rx_u[-lag:-lag + n], tx_u[:n]


def count_errors(rx_bits: np.ndarray, tx_bits: np.ndarray) -> tuple[int, int]:
    n = min(len(rx_bits), len(tx_bits))
    errs = int(np.sum(rx_bits[:n] != tx_bits[:n]))
    return errs, n


def q_from_ber(ber: float) -> float:
    """Q-factor in dB from BER: 20*log10(sqrt(2)*erfcinv(2*ber)).

    ber == 0 returns +inf (error-free sentinel); ber >= 0.5 is undefined.
    """
    if ber == 0:
        return np.inf
    if not (0.0 < ber < 0.5):
        raise ParameterError("ber must be in (0, 0.5)")
    return float(20.0 * np.log10(np.sqrt(2.0) * erfcinv(2.0 * ber)))


def windowed_q(error_flags: np.ndarray, bit_rate_hz: float,
               window_s: float = 0.021) -> list[tuple[float, float]]:
    """Q-factor per time window from a per-bit error stream.

    Windows with zero errors are reported at the measurement floor (one
    error per window) so traces stay finite.  Returns (window start time,
    q_db) pairs for floor(duration/window) windows.
    """
    flags = np.asarray(error_flags)
    bits_per_window = int(round(window_s * bit_rate_hz))
    if bits_per_window < 1 or len(flags) < bits_per_window:
        raise ParameterError("stream shorter than one window")
    n_win = len(flags) // bits_per_window
    out = []
    for k in range(n_win):
        seg = flags[k * bits_per_window:(k + 1) * bits_per_window]
        errs = max(int(np.sum(seg)), 1)  # zero-error floor
        out.append((k * window_s, q_from_ber(errs / bits_per_window)))
    return out


def net_throughput(baud_hz: float, order: int, fec: FecThreshold) -> float:
    """Net bit rate after FEC overhead: baud*log2(order)/(1 + overhead)."""
    if order < 2:
        raise ParameterError("order must be >= 2")
    return baud_hz * np.log2(order) / (1.0 + fec.overhead_fraction)


def reach(q_vs_distance: list[tuple[float, float]], threshold_q_db: float) -> float | None:
    """Farthest distance whose Q-factor clears the threshold (no
    interpolation); None if no point qualifies."""
    if not q_vs_distance:
        raise ParameterError("empty series")
    qualifying = [km for km, q in q_vs_distance if q >= threshold_q_db]
    return max(qualifying) if qualifying else None


def evm(soft_symbols: np.ndarray, reference_symbols: np.ndarray) -> float:
    """Error vector magnitude in percent: RMS error over RMS reference."""
    soft = np.asarray(soft_symbols)
    ref = np.asarray(reference_symbols)
    if len(soft) != len(ref):
        raise ParameterError("sequences must have equal length")
    if len(ref) == 0:
        raise ParameterError("sequences are empty")
    return float(100.0 * np.sqrt(np.mean(np.abs(soft - ref) ** 2)
                                 / np.mean(np.abs(ref) ** 2)))
