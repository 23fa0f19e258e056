"""Transmitter DSP: PRBS bits, Gray-mapped QAM, pulse shaping, carrier tone.

Produces minimum-phase test waveforms: a root-raised-cosine QAM payload plus
a digitally inserted carrier tone just above the signal band whose power sets
the carrier-to-signal power ratio (CSPR).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from scipy.signal import fftconvolve

from .sigcore import ComplexSignal, FirFilter, ParameterError, design_rrc, power

__all__ = [
    "ConstellationSpec",
    "TxConfig",
    "make_constellation",
    "prbs_generate",
    "qam_map",
    "shape",
    "add_carrier",
    "measure_cspr",
    "mp_violation_fraction",
    "estimate_tone",
]

# Maximal-length LFSR feedback pairs: bit[n] = bit[n-a] ^ bit[n-b] with b = degree.
_PRBS_TAPS = {7: (6, 7), 15: (14, 15), 23: (18, 23), 31: (28, 31)}

# QPSK quadrant convention: bits (b1, b0) -> quadrant.
_QPSK_TABLE = {
    0b00: 1 + 1j,
    0b01: -1 + 1j,
    0b11: -1 - 1j,
    0b10: 1 - 1j,
}

# Two-ring 8-QAM: inner ring on the diagonals, outer ring on the axes,
# outer/inner radius ratio (1 + sqrt(3))/sqrt(2) ~= 1.932.  First label bit
# selects the ring, remaining two bits Gray-code the quadrant.
_8QAM_RING_RATIO = (1.0 + np.sqrt(3.0)) / np.sqrt(2.0)

# Cross 32-QAM quasi-Gray labels.  A perfect Gray labeling of the cross does
# not exist (exhaustive search); this table is annealing-optimized to the
# minimum total excess: 50 of 52 nearest-neighbor pairs differ in one bit and
# two pairs differ in three.
_32CROSS_LABELS = {
    (-5, -3): 0b11001, (-5, -1): 0b11101, (-5, 1): 0b11111, (-5, 3): 0b11011,
    (-3, -5): 0b11010, (-3, -3): 0b11000, (-3, -1): 0b01101, (-3, 1): 0b01111,
    (-3, 3): 0b01011, (-3, 5): 0b01001,
    (-1, -5): 0b11110, (-1, -3): 0b11100, (-1, -1): 0b01100, (-1, 1): 0b01110,
    (-1, 3): 0b01010, (-1, 5): 0b01000,
    (1, -5): 0b10110, (1, -3): 0b10100, (1, -1): 0b00100, (1, 1): 0b00110,
    (1, 3): 0b00010, (1, 5): 0b00000,
    (3, -5): 0b10010, (3, -3): 0b10000, (3, -1): 0b00101, (3, 1): 0b00111,
    (3, 3): 0b00011, (3, 5): 0b00001,
    (5, -3): 0b10001, (5, -1): 0b10101, (5, 1): 0b10111, (5, 3): 0b10011,
}


@dataclass
class ConstellationSpec:
    """QAM constellation: points normalized to unit mean power, one integer
    bit label per point."""

    order: int
    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.complex128)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.points) != self.order or len(self.labels) != self.order:
            raise ParameterError("points/labels must have `order` entries")
        if sorted(self.labels.tolist()) != list(range(self.order)):
            raise ParameterError("labels must cover all bit patterns exactly once")

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    @property
    def max_radius(self) -> float:
        return float(np.max(np.abs(self.points)))

    def label_to_index(self) -> np.ndarray:
        """Inverse lookup: label value -> point index."""
        inv = np.empty(self.order, dtype=np.int64)
        inv[self.labels] = np.arange(self.order)
        return inv


def _gray(i: int) -> int:
    return i ^ (i >> 1)


def _square_qam(order: int) -> tuple[np.ndarray, np.ndarray]:
    m = int(np.sqrt(order))
    levels = np.arange(-(m - 1), m, 2, dtype=np.float64)
    kb = int(np.log2(m))
    pts, labs = [], []
    # per-axis Gray so that any horizontal or vertical neighbor differs in one bit
    for i_idx in range(m):
        for q_idx in range(m):
            pts.append(levels[i_idx] + 1j * levels[q_idx])
            labs.append((_gray(i_idx) << kb) | _gray(q_idx))
    return np.array(pts), np.array(labs)


@lru_cache(maxsize=None)
def make_constellation(order: int) -> ConstellationSpec:
    """Build the documented constellation for order in {4, 8, 16, 32, 64}."""
    if order == 4:
        labs = np.array(sorted(_QPSK_TABLE))
        pts = np.array([_QPSK_TABLE[k] for k in labs])
    elif order == 8:
        pts, labs = [], []
        inner_angles = np.deg2rad([45, 135, 225, 315])
        outer_angles = np.deg2rad([0, 90, 180, 270])
        quadrant_gray = [0b00, 0b01, 0b11, 0b10]
        for ring, (radius, angles) in enumerate(
            [(1.0, inner_angles), (_8QAM_RING_RATIO, outer_angles)]
        ):
            for k, ang in enumerate(angles):
                pts.append(radius * np.exp(1j * ang))
                labs.append((ring << 2) | quadrant_gray[k])
        pts, labs = np.array(pts), np.array(labs)
    elif order in (16, 64):
        pts, labs = _square_qam(order)
    elif order == 32:
        items = sorted(_32CROSS_LABELS.items())
        pts = np.array([i + 1j * q for (i, q), _ in items])
        labs = np.array([lab for _, lab in items])
    else:
        raise ParameterError(f"unsupported constellation order {order}")
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    return ConstellationSpec(order=order, points=pts, labels=labs)


@dataclass
class TxConfig:
    """Transmitter parameters.

    tone_freq_hz must sit above the shaped band edge baud*(1+rolloff)/2 and
    dac_rate_hz must be an integer multiple of baud_hz.
    """

    baud_hz: float = 1e9
    rolloff: float = 0.01
    dac_rate_hz: float = 12e9
    tone_freq_hz: float = 0.516e9
    cspr_db: float = 10.0
    n_symbols: int = 1 << 20
    prbs_degree: int = 23
    prbs_seed: int = 1
    constellation_order: int = 4
    pulse_span_symbols: int = 256

    def __post_init__(self):
        band_edge = self.baud_hz * (1.0 + self.rolloff) / 2.0
        if self.tone_freq_hz <= band_edge:
            raise ParameterError("tone_freq_hz must sit above the signal band edge")
        ratio = self.dac_rate_hz / self.baud_hz
        if abs(ratio - round(ratio)) > 1e-9:
            raise ParameterError("dac_rate_hz must be an integer multiple of baud_hz")

    @property
    def sps(self) -> int:
        return int(round(self.dac_rate_hz / self.baud_hz))

    @property
    def constellation(self) -> ConstellationSpec:
        return make_constellation(self.constellation_order)


def prbs_generate(degree: int, seed: int, n: int) -> np.ndarray:
    """Maximal-length LFSR bit sequence (uint8 array of 0/1).

    Two-tap Fibonacci LFSR evaluated blockwise: bit[k] = bit[k-a] ^ bit[k-b],
    so generation is vectorized rather than bit-at-a-time.
    """
    if degree not in _PRBS_TAPS:
        raise ParameterError(f"degree must be one of {sorted(_PRBS_TAPS)}")
    if seed == 0:
        raise ParameterError("seed must be nonzero")
    if n < 0:
        raise ParameterError("n must be nonnegative")
    a, b = _PRBS_TAPS[degree]
    # map any nonzero seed onto a nonzero LFSR state, deterministically
    state_val = (abs(int(seed)) - 1) % ((1 << degree) - 1) + 1
    state = np.array([(state_val >> i) & 1 for i in range(degree)], dtype=np.uint8)

    out = np.empty(n + degree, dtype=np.uint8)
    out[:degree] = state
    pos = degree
    while pos < len(out):
        m = min(a, len(out) - pos)  # new bits may only reach back a samples
        out[pos:pos + m] = out[pos - a:pos - a + m] ^ out[pos - b:pos - b + m]
        pos += m
    return out[degree:degree + n]


def qam_map(bits: np.ndarray, spec: ConstellationSpec) -> np.ndarray:
    """Map a bit sequence to constellation symbols by label lookup."""
    bits = np.asarray(bits, dtype=np.int64)
    k = spec.bits_per_symbol
    if len(bits) % k != 0:
        raise ParameterError(f"bit count must be divisible by {k}")
    groups = bits.reshape(-1, k)
    weights = 1 << np.arange(k - 1, -1, -1)
    values = groups @ weights
    return spec.points[spec.label_to_index()[values]]


def shape(symbols: np.ndarray, cfg: TxConfig) -> ComplexSignal:
    """RRC-shape symbols into a waveform at the DAC rate.

    Zero-stuffs to cfg.sps samples per symbol and convolves with the
    unit-energy RRC, scaled by sqrt(sps) so the waveform keeps the symbols'
    mean power.  The waveform is trimmed to n_symbols*sps samples with the
    peak of symbol k at sample k*sps + span/2*sps (causal filter delay).
    """
    symbols = np.asarray(symbols, dtype=np.complex128)
    sps = cfg.sps
    rrc = design_rrc(cfg.rolloff, sps, cfg.pulse_span_symbols).taps.real
    x = np.zeros(len(symbols) * sps, dtype=np.complex128)
    x[::sps] = symbols
    y = fftconvolve(x, rrc) * np.sqrt(sps)
    return ComplexSignal(y[:len(x)], cfg.dac_rate_hz)


def shape_filter_delay(cfg: TxConfig) -> int:
    """Samples from the start of shape() output to the peak of symbol 0."""
    return cfg.pulse_span_symbols * cfg.sps // 2


def add_carrier(signal: ComplexSignal, tone_freq_hz: float, cspr_db: float) -> ComplexSignal:
    """Add a tone at +tone_freq_hz with amplitude set by the CSPR in dB."""
    if abs(tone_freq_hz) >= signal.sample_rate_hz / 2:
        raise ParameterError("tone must be within Nyquist")
    amp = np.sqrt(power(signal) * 10.0 ** (cspr_db / 10.0))
    n = np.arange(len(signal.samples))
    tone = amp * np.exp(2j * np.pi * tone_freq_hz * n / signal.sample_rate_hz)
    return ComplexSignal(signal.samples + tone, signal.sample_rate_hz)


def estimate_tone(signal: ComplexSignal, tone_freq_hz: float) -> complex:
    """Complex amplitude of the tone at a known frequency (direct projection)."""
    n = np.arange(len(signal.samples))
    basis = np.exp(-2j * np.pi * tone_freq_hz * n / signal.sample_rate_hz)
    return complex(np.mean(signal.samples * basis))


def measure_cspr(signal: ComplexSignal, tone_freq_hz: float,
                 window_hz: float = 2e6) -> float:
    """Carrier-to-signal power ratio in dB.

    Tone power is integrated over a +-window_hz band of a Blackman-Harris
    windowed periodogram (the taper keeps off-grid tone leakage out of the
    payload estimate); everything else counts as signal.  Saturates at +inf
    above +60 dB (pure tone).
    """
    from scipy.signal.windows import blackmanharris

    n = len(signal.samples)
    if n < (1 << 14):
        raise ParameterError("need at least 2^14 samples to resolve the tone")
    bin_hz = signal.sample_rate_hz / n
    if 2 * window_hz < 3 * bin_hz:
        raise ParameterError("window captures fewer than 3 FFT bins")
    w = blackmanharris(n, sym=False)
    spec = np.abs(np.fft.fft(signal.samples * w)) ** 2 / (n * np.sum(w * w))
    f = np.fft.fftfreq(n, 1.0 / signal.sample_rate_hz)
    in_window = np.abs(f - tone_freq_hz) <= window_hz
    p_tone = float(np.sum(spec[in_window]))
    p_rest = float(np.sum(spec[~in_window]))
    if p_rest <= 0 or p_tone / p_rest > 1e6:
        return np.inf
    return 10.0 * np.log10(p_tone / p_rest)


def mp_violation_fraction(signal: ComplexSignal, tone_freq_hz: float) -> float:
    """Fraction of samples where the tone-removed envelope exceeds the tone.

    |s(t)| < A everywhere is sufficient for the composite signal to be
    minimum phase; the returned fraction counts violations of that bound.
    """
    if len(signal.samples) < (1 << 14):
        raise ParameterError("need at least 2^14 samples to resolve the tone")
    c = estimate_tone(signal, tone_freq_hz)
    n = np.arange(len(signal.samples))
    tone = c * np.exp(2j * np.pi * tone_freq_hz * n / signal.sample_rate_hz)
    resid = signal.samples - tone
    return float(np.mean(np.abs(resid) > np.abs(c)))
