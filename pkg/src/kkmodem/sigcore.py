"""Core signal types and FFT-based streaming primitives.

Everything downstream (transmitter, channel, front end, receiver) is built on
the pieces in this module: the two signal containers, root-raised-cosine
design, streaming overlap-save convolution, frequency shifting and rational
resampling.  All functions are pure and deterministic; streaming state (the
overlap tail) is an explicit value owned by the caller, so block processing
over a split stream reproduces single-shot processing exactly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ComplexSignal",
    "RealSignal",
    "FirFilter",
    "BlockPlan",
    "design_rrc",
    "fir_frequency_response",
    "overlap_save_filter",
    "frequency_shift",
    "resample_rational",
    "anti_alias_window",
    "power",
    "power_dbm",
    "write_signal_raw",
    "read_signal_raw",
]


class ParameterError(ValueError):
    """Raised when an operation receives arguments violating its contract."""


def _check_finite(x: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(x)):
        raise ParameterError(f"{name} contains non-finite samples")


@dataclass
class ComplexSignal:
    """Uniformly sampled complex baseband waveform.

    Power accounting uses mean |x|^2 in milliwatt units (0 dBm == power 1.0),
    so optical launch powers in dBm map directly onto sample amplitudes.
    """

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.sample_rate_hz <= 0:
            raise ParameterError("sample_rate_hz must be positive")
        _check_finite(self.samples, "samples")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def power(self) -> float:
        """Mean |x|^2 (mW)."""
        if len(self.samples) == 0:
            return 0.0
        return float(np.mean(np.abs(self.samples) ** 2))

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def scaled_to_power(self, target_mw: float) -> "ComplexSignal":
        """Return a copy rescaled to the given mean power (mW)."""
        p = self.power
        if p <= 0:
            raise ParameterError("cannot scale an all-zero signal")
        return ComplexSignal(self.samples * np.sqrt(target_mw / p), self.sample_rate_hz)


@dataclass
class RealSignal:
    """Uniformly sampled real waveform (photocurrent, ADC output)."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate_hz <= 0:
            raise ParameterError("sample_rate_hz must be positive")
        _check_finite(self.samples, "samples")

    def __len__(self) -> int:
        return len(self.samples)


@dataclass
class FirFilter:
    """FIR taps together with the sample rate they are defined at."""

    taps: np.ndarray
    nominal_rate_hz: float

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=np.complex128)
        if len(self.taps) < 1:
            raise ParameterError("filter needs at least one tap")
        if self.nominal_rate_hz <= 0:
            raise ParameterError("nominal_rate_hz must be positive")
        _check_finite(self.taps, "taps")

    def __len__(self) -> int:
        return len(self.taps)


@dataclass
class BlockPlan:
    """Overlap-save blocking plan: each FFT block reuses half its span.

    hop is the number of new samples consumed per block and is pinned to
    fft_size/2 (100% overlap-save).  buffer_len is the nominal streaming
    buffer size and must be a whole number of hops.
    """

    fft_size: int = 1024
    hop: int = field(default=0)
    buffer_len: int = 1 << 22

    def __post_init__(self):
        n = self.fft_size
        if n < 2 or (n & (n - 1)) != 0:
            raise ParameterError("fft_size must be a power of two >= 2")
        if self.hop == 0:
            self.hop = n // 2
        if self.hop != n // 2:
            raise ParameterError("hop must equal fft_size/2")
        if self.buffer_len % self.hop != 0:
            raise ParameterError("buffer_len must be a multiple of hop")

    @property
    def blocks_per_buffer(self) -> int:
        return self.buffer_len // self.hop


def power(x: np.ndarray | ComplexSignal | RealSignal) -> float:
    """Mean |x|^2 of an array or signal."""
    if isinstance(x, (ComplexSignal, RealSignal)):
        x = x.samples
    if len(x) == 0:
        return 0.0
    return float(np.mean(np.abs(np.asarray(x)) ** 2))


def power_dbm(x) -> float:
    p = power(x)
    if p <= 0:
        return -np.inf
    return 10.0 * np.log10(p)


# ---------------------------------------------------------------------------
# root-raised-cosine design
# ---------------------------------------------------------------------------

def design_rrc(rolloff: float, sps: int, span_symbols: int) -> FirFilter:
    """Design a symmetric unit-energy root-raised-cosine filter.

    Parameters
    ----------
    rolloff : excess-bandwidth factor in (0, 1].
    sps : samples per symbol (>= 2).
    span_symbols : even filter span in symbol periods; the filter has
        span_symbols*sps + 1 taps.

    The two singular points of the closed-form impulse response (t = 0 and
    t = +-1/(4*rolloff) symbol periods) are evaluated by their analytic
    limits.  nominal_rate_hz is set to sps (one symbol period == 1 Hz) and is
    rescaled by callers that know the physical rate.
    """
    if not (0.0 < rolloff <= 1.0):
        raise ParameterError("rolloff must be in (0, 1]")
    if sps < 2:
        raise ParameterError("sps must be >= 2")
    if span_symbols < 2 or span_symbols % 2 != 0:
        raise ParameterError("span_symbols must be an even integer >= 2")

    n = span_symbols * sps
    t = (np.arange(n + 1) - n / 2) / sps  # time in symbol periods
    beta = rolloff
    h = np.empty(n + 1, dtype=np.float64)

    t_sing = 1.0 / (4.0 * beta)
    at = np.abs(t)
    is_zero = at < 1e-12
    is_sing = np.abs(at - t_sing) < 1e-9
    regular = ~(is_zero | is_sing)

    tr = t[regular]
    num = np.sin(np.pi * tr * (1 - beta)) + 4 * beta * tr * np.cos(np.pi * tr * (1 + beta))
    den = np.pi * tr * (1 - (4 * beta * tr) ** 2)
    h[regular] = num / den
    h[is_zero] = 1.0 - beta + 4.0 * beta / np.pi
    h[is_sing] = (beta / np.sqrt(2.0)) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
        + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
    )

    h /= np.sqrt(np.sum(h * h))
    return FirFilter(taps=h, nominal_rate_hz=float(sps))


def fir_frequency_response(fir: FirFilter | np.ndarray, freqs_hz: np.ndarray,
                           rate_hz: float | None = None) -> np.ndarray:
    """Evaluate the DTFT of causal taps at the given frequencies."""
    if isinstance(fir, FirFilter):
        taps = fir.taps
        rate = fir.nominal_rate_hz if rate_hz is None else rate_hz
    else:
        taps = np.asarray(fir, dtype=np.complex128)
        if rate_hz is None:
            raise ParameterError("rate_hz required for bare tap arrays")
        rate = rate_hz
    freqs_hz = np.asarray(freqs_hz, dtype=np.float64)
    m = np.arange(len(taps))
    return np.exp(-2j * np.pi * np.outer(freqs_hz, m) / rate) @ taps


# ---------------------------------------------------------------------------
# overlap-save streaming convolution
# ---------------------------------------------------------------------------

def overlap_save_filter(
    signal: ComplexSignal,
    fd_response: np.ndarray,
    plan: BlockPlan,
    tail: np.ndarray | None = None,
) -> tuple[ComplexSignal, np.ndarray]:
    """Filter a stream chunk by blockwise FFT multiplication (overlap-save).

    fd_response is the length-fft_size DFT of the (causal) impulse response;
    for artifact-free output the response must fit within fft_size - hop taps.
    tail carries the final hop input samples of the previous call (zeros at
    stream start).  Output length equals input length and consecutive calls
    over a split stream reproduce one call over the concatenation.
    """
    fd_response = np.asarray(fd_response, dtype=np.complex128)
    if len(fd_response) != plan.fft_size:
        raise ParameterError("fd_response length must equal plan.fft_size")
    hop = plan.hop
    if tail is None:
        tail = np.zeros(hop, dtype=np.complex128)
    tail = np.asarray(tail, dtype=np.complex128)
    if len(tail) != hop:
        raise ParameterError("tail length must equal plan.hop")

    x = signal.samples
    out = np.empty(len(x), dtype=np.complex128)
    pos = 0
    cur_tail = tail.copy()
    while pos < len(x):
        m = min(hop, len(x) - pos)
        block = np.empty(plan.fft_size, dtype=np.complex128)
        block[:hop] = cur_tail
        block[hop:hop + m] = x[pos:pos + m]
        if m < hop:
            block[hop + m:] = 0.0
        y = np.fft.ifft(np.fft.fft(block) * fd_response)
        out[pos:pos + m] = y[hop:hop + m]
        if m == hop:
            cur_tail = block[hop:].copy()
        else:
            cur_tail = np.concatenate([cur_tail[m:], x[pos:pos + m]])
        pos += m
    return ComplexSignal(out, signal.sample_rate_hz), cur_tail


# ---------------------------------------------------------------------------
# frequency shift and rational resampling
# ---------------------------------------------------------------------------

def frequency_shift(signal: ComplexSignal, delta_f_hz: float,
                    start_index: int = 0) -> ComplexSignal:
    """Multiply sample n by exp(+j*2*pi*delta_f*(n + start_index)/fs).

    start_index lets streaming callers keep the shift phase-continuous
    across chunk boundaries.
    """
    if abs(delta_f_hz) >= signal.sample_rate_hz / 2:
        raise ParameterError("|delta_f_hz| must be below Nyquist")
    if delta_f_hz == 0.0 and start_index == 0:
        return ComplexSignal(signal.samples.copy(), signal.sample_rate_hz)
    n = np.arange(start_index, start_index + len(signal.samples), dtype=np.float64)
    rot = np.exp(2j * np.pi * delta_f_hz * n / signal.sample_rate_hz)
    return ComplexSignal(signal.samples * rot, signal.sample_rate_hz)


def anti_alias_window(freqs_hz: np.ndarray, nyquist_hz: float,
                      edge: float = 0.01) -> np.ndarray:
    """Brick-wall spectral window with a raised-cosine edge.

    Unity below (1-edge)*nyquist, cosine taper to zero at nyquist.  Shared by
    resample_rational and the receiver's decimating equalizer so that both
    paths apply the identical nominal response.
    """
    a = np.abs(np.asarray(freqs_hz, dtype=np.float64))
    f_pass = nyquist_hz * (1.0 - edge)
    w = np.zeros_like(a)
    w[a <= f_pass] = 1.0
    trans = (a > f_pass) & (a < nyquist_hz)
    w[trans] = 0.5 * (1.0 + np.cos(np.pi * (a[trans] - f_pass) / (nyquist_hz - f_pass)))
    return w


def resample_rational(signal: ComplexSignal | RealSignal, up: int, down: int,
                      edge: float = 0.01):
    """Resample by the rational factor up/down via whole-signal FFT.

    The anti-alias response is a brick-wall at the lower of the two Nyquist
    frequencies with a raised-cosine edge (fraction `edge`).  The input length
    times up must be divisible by down.
    """
    if up < 1 or down < 1:
        raise ParameterError("up and down must be >= 1")
    is_real = isinstance(signal, RealSignal)
    x = signal.samples
    fs_in = signal.sample_rate_hz
    fs_out = fs_in * up / down
    if up == down:
        return type(signal)(x.copy(), fs_out)
    n = len(x)
    if (n * up) % down != 0:
        raise ParameterError("signal length * up must be divisible by down")
    n_out = n * up // down

    X = np.fft.fft(x)
    f = np.fft.fftfreq(n, 1.0 / fs_in)
    X = X * anti_alias_window(f, min(fs_in, fs_out) / 2.0, edge)
    Y = np.zeros(n_out, dtype=np.complex128)
    h = min(n, n_out) // 2
    Y[:h] = X[:h]
    Y[-h:] = X[-h:]
    y = np.fft.ifft(Y) * (n_out / n)
    if is_real:
        return RealSignal(y.real, fs_out)
    return ComplexSignal(y, fs_out)


# ---------------------------------------------------------------------------
# raw file I/O
# ---------------------------------------------------------------------------

def write_signal_raw(path: str, signal: ComplexSignal | RealSignal,
                     int16_scale: float | None = None) -> None:
    """Write a signal as little-endian raw samples plus a JSON sidecar.

    Complex signals are stored as interleaved (re, im) float32.  Real signals
    are float32, or int16 when int16_scale is given (sample = value/scale),
    which archives a quantized ADC stream bit-exactly.
    """
    meta = {"sample_rate_hz": signal.sample_rate_hz, "length": len(signal)}
    if isinstance(signal, ComplexSignal):
        if int16_scale is not None:
            raise ParameterError("int16 storage is only defined for real signals")
        buf = np.empty(2 * len(signal), dtype="<f4")
        buf[0::2] = signal.samples.real
        buf[1::2] = signal.samples.imag
        meta["kind"] = "complex"
    elif int16_scale is not None:
        buf = np.round(signal.samples * int16_scale).astype("<i2")
        meta["kind"] = "int16"
        meta["scale"] = float(int16_scale)
    else:
        buf = signal.samples.astype("<f4")
        meta["kind"] = "real"
    buf.tofile(path)
    with open(path + ".json", "w") as f:
        json.dump(meta, f, sort_keys=True)


def read_signal_raw(path: str) -> ComplexSignal | RealSignal:
    """Read a signal written by write_signal_raw."""
    with open(path + ".json") as f:
        meta = json.load(f)
    fs = meta["sample_rate_hz"]
    kind = meta["kind"]
    if kind == "complex":
        buf = np.fromfile(path, dtype="<f4")
        return ComplexSignal(buf[0::2] + 1j * buf[1::2], fs)
    if kind == "int16":
        buf = np.fromfile(path, dtype="<i2")
        return RealSignal(buf.astype(np.float64) / meta["scale"], fs)
    buf = np.fromfile(path, dtype="<f4")
    return RealSignal(buf.astype(np.float64), fs)


def remove_raw(path: str) -> None:
    """Delete a raw signal file and its sidecar."""
    for p in (path, path + ".json"):
        if os.path.exists(p):
            os.remove(p)
