"""Streaming receiver chain.

Stages, in order: blockwise Kramers-Kronig field reconstruction from the
photocurrent (square root, log, frequency-domain Hilbert via a 1024-point
100% overlap-save FFT pair), residual-carrier removal, downshift of the
payload band to DC with mirror correction, frequency-domain static
equalization fused with 2:1 resampling, and a 4-tap widely-linear
decision-directed LMS equalizer producing symbol decisions.

Every stage is blockwise with explicit carried state, so feeding the stream
in any chunking produces bit-identical output to single-shot processing.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.constants as const
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import fftconvolve

from .channel import LinkConfig, cd_phase_coefficient
from .frontend import FrontendConfig
from .sigcore import (
    BlockPlan,
    ComplexSignal,
    FirFilter,
    ParameterError,
    RealSignal,
    anti_alias_window,
    design_rrc,
    fir_frequency_response,
    frequency_shift,
)
from .txdsp import ConstellationSpec, TxConfig, make_constellation

log = logging.getLogger(__name__)

__all__ = [
    "DdlmsConfig",
    "EqualizerState",
    "RxPipelineConfig",
    "RxPipeline",
    "SyncError",
    "stream_buffers",
    "kk_reconstruct",
    "downshift_dc",
    "compute_static_taps",
    "static_tap_coverage",
    "design_receive_taps",
    "refine_static_taps",
    "static_equalize_and_resample",
    "ddlms_wl",
    "demap",
    "symbol_sync",
]


class SyncError(RuntimeError):
    """Raised when the receiver cannot align to the reference sequence."""


# ---------------------------------------------------------------------------
# configuration & state
# ---------------------------------------------------------------------------

@dataclass
class DdlmsConfig:
    n_taps: int = 4
    mu: float = 1e-3
    startup_symbols: int = 10_000
    widely_linear: bool = True
    divergence_factor: float = 10.0
    divergence_run: int = 100


@dataclass
class EqualizerState:
    """Widely-linear tap pair plus streaming bookkeeping, carried across
    buffers."""

    w: np.ndarray
    g: np.ndarray
    resid: np.ndarray = dc_field(default_factory=lambda: np.zeros(0, dtype=np.complex128))
    frozen: bool = False
    div_count: int = 0
    symbols_done: int = 0

    @classmethod
    def initial(cls, n_taps: int = 4, spike_index: int = 1) -> "EqualizerState":
        w = np.zeros(n_taps, dtype=np.complex128)
        w[spike_index] = 1.0
        return cls(w=w, g=np.zeros(n_taps, dtype=np.complex128))

    @property
    def diverged(self) -> bool:
        return self.frozen


@dataclass
class RxPipelineConfig:
    adc_rate_hz: float = 4e9
    baud_hz: float = 1e9
    tone_freq_hz: float = 0.516e9
    kk_plan: BlockPlan = dc_field(default_factory=lambda: BlockPlan(1024, buffer_len=1 << 22))
    static_plan: BlockPlan = dc_field(default_factory=lambda: BlockPlan(32768, buffer_len=1 << 22))
    static_taps: FirFilter | None = None
    carrier_removal: bool = True
    carrier_segment_len: int = 1 << 16
    mirror: bool = True
    aa_edge: float = 0.01
    ddlms: DdlmsConfig = dc_field(default_factory=DdlmsConfig)
    constellation_order: int = 4
    sync_symbols: int = 4096
    sync_wait_samples: int = 1 << 16  # 2-sps samples buffered before syncing

    def __post_init__(self):
        if self.sps_in != 4:
            raise ParameterError("pipeline expects 4 samples per symbol at the ADC rate")
        if self.static_taps is not None and len(self.static_taps) % 2 == 0:
            raise ParameterError("static taps length must be odd")

    @property
    def sps_in(self) -> int:
        return int(round(self.adc_rate_hz / self.baud_hz))

    @property
    def sps_out(self) -> int:
        return self.sps_in // 2

    @property
    def constellation(self) -> ConstellationSpec:
        return make_constellation(self.constellation_order)


# ---------------------------------------------------------------------------
# buffer management
# ---------------------------------------------------------------------------

def stream_buffers(adc_stream: RealSignal, plan: BlockPlan):
    """Split a stream into processing buffers with the carried-overlap tail.

    Yields dicts with the buffer samples, the final hop samples of the
    predecessor (zeros at stream start) and the number of padding samples
    appended to flush a final partial buffer.
    """
    x = adc_stream.samples
    if len(x) < plan.hop:
        raise ParameterError("stream shorter than one hop")
    tail = np.zeros(plan.hop, dtype=np.float64)
    index = 0
    for start in range(0, len(x), plan.buffer_len):
        chunk = x[start:start + plan.buffer_len]
        n_pad = plan.buffer_len - len(chunk)
        if n_pad:
            chunk = np.concatenate([chunk, np.zeros(n_pad)])
        yield {"index": index, "samples": chunk, "tail": tail, "n_padding": n_pad}
        tail = chunk[-plan.hop:].copy()
        index += 1


# ---------------------------------------------------------------------------
# Kramers-Kronig reconstruction
# ---------------------------------------------------------------------------

def _hilbert_multiplier(fft_size: int, delay: int) -> np.ndarray:
    """rfft-bin multiplier -j*sgn(f) with DC/Nyquist zeroed, delayed.

    The delay centers the overlap-save valid region on the two-sided Hilbert
    kernel: without it the trailing samples of each block lack future
    context and carry large spikes.
    """
    mult = np.full(fft_size // 2 + 1, -1j, dtype=np.complex128)
    mult[0] = 0.0
    mult[-1] = 0.0
    k = np.arange(fft_size // 2 + 1)
    return mult * np.exp(-2j * np.pi * k * delay / fft_size)


def kk_reconstruct(
    current: RealSignal,
    plan: BlockPlan,
    state: dict | None = None,
    clamp_rel: float = 1e-12,
) -> tuple[ComplexSignal, dict, dict]:
    """Reconstruct the optical field from photocurrent, blockwise.

    Per block: amplitude sqrt(I), phase = Hilbert(log amplitude) computed by
    the overlap-save FFT pair, field = amplitude * exp(j*phase).  The output
    stream is the reconstruction delayed by hop/2 samples, which gives every
    emitted sample at least half a block of context on both sides of the
    Hilbert kernel (downstream synchronization absorbs the constant delay).

    Nonpositive samples (photodiode filter undershoot) are clamped to
    clamp_rel times the mean of their hop block before the log.  state
    carries the cross-call overlap; diagnostics count clamped samples and
    all-zero blocks (their output is zeroed and flagged).
    """
    x = current.samples
    hop, nfft = plan.hop, plan.fft_size
    half = hop // 2
    if len(x) % hop != 0 or len(x) == 0:
        raise ParameterError("chunk length must be a positive multiple of plan.hop")
    if state is None:
        state = {
            "u_tail": np.zeros(hop),
            "a_hist": np.zeros(half),
            "dead_hist": np.zeros(half, dtype=bool),
        }

    hops = x.reshape(-1, hop)
    means = hops.mean(axis=1)
    dead = means <= 0.0
    thresholds = np.where(dead, 1.0, clamp_rel * np.abs(means))
    clamped = int(np.sum((hops < thresholds[:, None]) & ~dead[:, None]))
    safe = np.maximum(hops, thresholds[:, None])
    safe[dead] = 1.0  # log -> 0; output zeroed below

    amp = np.sqrt(safe.reshape(-1))
    u = 0.5 * np.log(safe.reshape(-1))
    dead_mask = np.repeat(dead, hop)

    stream = np.concatenate([state["u_tail"], u])
    blocks = sliding_window_view(stream, nfft)[::hop]
    spec = np.fft.rfft(blocks, axis=1) * _hilbert_multiplier(nfft, half)
    phi = np.fft.irfft(spec, n=nfft, axis=1)[:, hop:].reshape(-1)

    # emitted sample g carries the field at stream position g - hop/2
    amp_del = np.concatenate([state["a_hist"], amp])[:len(x)]
    dead_del = np.concatenate([state["dead_hist"], dead_mask])[:len(x)]
    field = amp_del * np.exp(1j * phi)
    field[dead_del] = 0.0

    new_state = {
        "u_tail": u[-hop:].copy(),
        "a_hist": amp[-half:].copy(),
        "dead_hist": dead_mask[-half:].copy(),
    }
    diag = {"clamped": clamped, "zero_blocks": np.nonzero(dead)[0].tolist()}
    return ComplexSignal(field, current.sample_rate_hz), new_state, diag


def downshift_dc(field: ComplexSignal, tone_freq_hz: float,
                 start_index: int = 0) -> ComplexSignal:
    """Shift the reconstructed payload band down to DC.

    The payload band of the reconstructed field is centered at the tone
    frequency, so this is frequency_shift by -tone_freq_hz; start_index keeps
    the shift phase-continuous across streamed chunks.
    """
    if tone_freq_hz == 0 and start_index == 0:
        return ComplexSignal(field.samples.copy(), field.sample_rate_hz)
    return frequency_shift(field, -tone_freq_hz, start_index=start_index)


# ---------------------------------------------------------------------------
# static equalizer construction
# ---------------------------------------------------------------------------

def compute_static_taps(link: LinkConfig, n_taps: int = 203,
                        rate_hz: float = 2e9) -> FirFilter:
    """Inverse chromatic-dispersion compensator as time-domain taps.

    The link's accumulated dispersion defines an all-pass quadratic spectral
    phase; its inverse is sampled at rate_hz, windowed (Hann) and truncated
    to n_taps with the group-delay center on the middle tap.  DC gain is
    normalized to 1.  A warning is logged if the dispersion delay spread
    exceeds the tap span.
    """
    if n_taps % 2 == 0:
        raise ParameterError("n_taps must be odd")
    ratio = static_tap_coverage(link, n_taps, rate_hz)
    if ratio < 1.0:
        log.warning("static taps cover only %.2fx of the dispersion delay spread", ratio)

    a = cd_phase_coefficient(link.total_dispersion_ps_nm, 1.0, link.center_wavelength_nm)
    m = 1 << max(12, int(np.ceil(np.log2(4 * n_taps))))
    f = np.fft.fftfreq(m, 1.0 / rate_hz)
    h = np.fft.fftshift(np.fft.ifft(np.exp(+1j * a * f * f)))
    center = m // 2
    half = n_taps // 2
    taps = h[center - half:center + half + 1] * np.hanning(n_taps)
    taps = taps / np.sum(taps)  # unit DC gain
    return FirFilter(taps, rate_hz)


def static_tap_coverage(link: LinkConfig, n_taps: int = 203,
                        rate_hz: float = 2e9) -> float:
    """Ratio of the tap time span to the link's group-delay spread across
    the sampled band (inf for a dispersion-free link)."""
    d_si = link.total_dispersion_ps_nm * 1e-6
    lam = link.center_wavelength_nm * 1e-9
    delay_span = abs(d_si) * lam**2 * rate_hz / const.c
    if delay_span == 0:
        return np.inf
    return (n_taps / rate_hz) / delay_span


def _frontend_field_response(freqs_hz: np.ndarray, tone_freq_hz: float,
                             fe: FrontendConfig) -> np.ndarray:
    """Field-domain equivalent of the front end's current-domain droop.

    Payload content at field frequency f beats with the tone at
    |tone - f| in the photocurrent, so the PD and ADC analog responses are
    evaluated there.
    """
    nu = np.abs(tone_freq_hz - freqs_hz)
    resp = np.exp(-0.5 * np.log(2.0) * (nu / fe.pd_bandwidth_hz) ** (2 * fe.pd_filter_order))
    resp *= np.exp(-0.5 * np.log(2.0) * (nu / fe.adc_analog_bandwidth_hz) ** (2 * fe.adc_aa_order))
    return resp


def design_receive_taps(
    link: LinkConfig,
    tx: TxConfig,
    frontend: FrontendConfig | None = None,
    n_taps: int = 203,
    rate_hz: float | None = None,
    ridge: float = 1e-3,
) -> FirFilter:
    """Least-squares receive filter: the off-line-optimized static equalizer.

    Finds the n_taps filter minimizing the residual ISI of the full known
    cascade (transmit pulse, chromatic dispersion, and optionally the front
    end's field-equivalent droop) sampled at the symbol rate.  This folds
    matched filtering and dispersion compensation into one tap set; a small
    ridge term keeps the out-of-band response and noise gain down.
    """
    rate = 2.0 * tx.baud_hz if rate_hz is None else rate_hz
    sps = int(round(rate / tx.baud_hz))
    if abs(rate - sps * tx.baud_hz) > 1e-6 or sps < 2:
        raise ParameterError("rate_hz must be an integer multiple of the baud rate")

    pulse = design_rrc(tx.rolloff, sps, tx.pulse_span_symbols).taps.real
    lp = len(pulse)
    nd = 1 << int(np.ceil(np.log2(4 * (lp + n_taps) + 64)))
    f = np.fft.fftfreq(nd, 1.0 / rate)
    resp = np.exp(-1j * cd_phase_coefficient(link.total_dispersion_ps_nm, 1.0,
                                             link.center_wavelength_nm) * f * f)
    if frontend is not None:
        resp = resp * _frontend_field_response(f, tx.tone_freq_hz, frontend)
    q = np.fft.ifft(np.fft.fft(pulse, nd) * resp)

    n_isi = (lp + n_taps) // (2 * sps) + 8
    shift = 2 * n_isi * sps + n_taps  # keep all design indices positive
    q = np.roll(q, shift)
    t0 = (lp - 1) // 2 + (n_taps - 1) // 2 + shift

    rows = np.arange(-n_isi, n_isi + 1)
    cols = np.arange(n_taps)
    a = q[t0 + sps * rows[:, None] - cols[None, :]]
    b = np.zeros(len(rows), dtype=np.complex128)
    b[n_isi] = 1.0

    a_full = np.vstack([a, np.sqrt(ridge) * np.eye(n_taps)])
    b_full = np.concatenate([b, np.zeros(n_taps)])
    taps, *_ = np.linalg.lstsq(a_full, b_full, rcond=None)
    return FirFilter(taps, rate)


def refine_static_taps(
    input_2sps: np.ndarray,
    training_symbols: np.ndarray,
    n_taps: int = 203,
    rate_hz: float = 2e9,
    ridge: float = 1e-4,
) -> tuple[FirFilter, dict]:
    """Data-aided refinement: least-squares fit of receive taps on a capture.

    input_2sps must already be aligned so that samples 2k..2k+1 belong to
    training symbol k (use symbol_sync).  Returns the fitted causal taps and
    a diagnostic with the relative residual error power of the fit.
    """
    x = np.asarray(input_2sps, dtype=np.complex128)
    d = np.asarray(training_symbols, dtype=np.complex128)
    # row k in causal-convolution order evaluates the filter at sample
    # 2k + n_taps - 1, whose group-delay center lands near symbol k + lag
    lag = (n_taps - 1) // 4
    rows_all = sliding_window_view(x, n_taps)[::2]
    n_rows = min(len(rows_all), len(d) - lag)
    if n_rows < 4 * n_taps:
        raise ParameterError("capture too short for a stable fit")
    rows = rows_all[:n_rows, ::-1]
    tgt = d[lag:lag + n_rows]
    a = np.vstack([rows, np.sqrt(ridge) * np.eye(n_taps)])
    b = np.concatenate([tgt, np.zeros(n_taps)])
    taps, *_ = np.linalg.lstsq(a, b, rcond=None)
    resid = rows @ taps - tgt
    mse = float(np.mean(np.abs(resid) ** 2) / np.mean(np.abs(tgt) ** 2))
    return FirFilter(taps, rate_hz), {"relative_mse": mse}


# ---------------------------------------------------------------------------
# fused static equalization + 2:1 resampling
# ---------------------------------------------------------------------------

def _static_response(taps: FirFilter, plan: BlockPlan, fs_in: float,
                     edge: float, aa_delay: int) -> tuple[np.ndarray, np.ndarray]:
    """Kept-bin indices and combined response for the decimating equalizer."""
    n = plan.fft_size
    m = n // 2
    kept = np.concatenate([np.arange(0, m // 2), np.arange(n - m // 2, n)])
    f = np.fft.fftfreq(n, 1.0 / fs_in)[kept]
    h = fir_frequency_response(taps, f)
    h *= anti_alias_window(f, fs_in / 4.0, edge)
    h *= np.exp(-2j * np.pi * f * aa_delay / fs_in)
    return kept, h


def static_equalize_and_resample(
    field: ComplexSignal,
    static_taps: FirFilter,
    plan: BlockPlan,
    tail: np.ndarray | None = None,
    edge: float = 0.01,
    aa_delay: int | None = None,
) -> tuple[ComplexSignal, np.ndarray]:
    """Apply the static taps and resample 2:1 in a single FD pass.

    Per overlap-save block: forward FFT, multiply by the taps' response
    (defined at the output rate) times the shared anti-alias window, keep the
    half-band bins, inverse FFT at half size.  Output is delayed by
    aa_delay/2 output samples (default fft_size/8), which makes the
    anti-alias kernel causal inside the valid overlap-save region.
    """
    fs_in = field.sample_rate_hz
    if abs(static_taps.nominal_rate_hz - fs_in / 2.0) > 1e-3:
        raise ParameterError("static taps must be defined at half the input rate")
    n, hop = plan.fft_size, plan.hop
    if aa_delay is None:
        aa_delay = n // 4
    if aa_delay % 2 != 0:
        raise ParameterError("aa_delay must be even")
    x = field.samples
    if len(x) % hop != 0 or len(x) == 0:
        raise ParameterError("chunk length must be a positive multiple of plan.hop")
    if tail is None:
        tail = np.zeros(hop, dtype=np.complex128)
    if len(tail) != hop:
        raise ParameterError("tail length must equal plan.hop")

    kept, h = _static_response(static_taps, plan, fs_in, edge, aa_delay)
    m = n // 2
    stream = np.concatenate([tail, x])
    blocks = sliding_window_view(stream, n)[::hop]
    spec = np.fft.fft(blocks, axis=1)[:, kept] * h
    y = np.fft.ifft(spec, axis=1) * (m / n)
    out = y[:, m // 2:].reshape(-1)
    return ComplexSignal(out, fs_in / 2.0), x[-hop:].astype(np.complex128)


# ---------------------------------------------------------------------------
# widely-linear decision-directed LMS
# ---------------------------------------------------------------------------

def _ddlms_core(x, w, g, points, train, mu, widely_linear, max_radius,
                guard_factor, guard_run, frozen, div_count, soft, dec):
    n_taps = w.shape[0]
    n_out = soft.shape[0]
    n_train = train.shape[0]
    for k in range(n_out):
        base = 2 * k
        y = 0.0 + 0.0j
        for i in range(n_taps):
            xi = x[base + i]
            y += np.conj(w[i]) * xi
            if widely_linear:
                y += np.conj(g[i]) * np.conj(xi)
        if k < n_train:
            d = train[k]
        else:
            best = 0
            bd = abs(y - points[0])
            for p in range(1, points.shape[0]):
                dp = abs(y - points[p])
                if dp < bd:
                    bd = dp
                    best = p
            d = points[best]
        if abs(y) > guard_factor * max_radius:
            div_count += 1
            if div_count >= guard_run:
                frozen = True
        else:
            div_count = 0
        if not frozen and mu != 0.0:
            ce = np.conj(d - y)
            for i in range(n_taps):
                xi = x[base + i]
                w[i] = w[i] + mu * ce * xi
                if widely_linear:
                    g[i] = g[i] + mu * ce * np.conj(xi)
        soft[k] = y
        dec[k] = d
    return frozen, div_count


try:  # pragma: no cover - exercised implicitly
    from numba import njit

    _ddlms_core = njit(cache=True)(_ddlms_core)
except ImportError:  # pragma: no cover
    pass


def ddlms_wl(
    x: np.ndarray,
    cfg: DdlmsConfig,
    state: EqualizerState,
    training: np.ndarray | None = None,
    constellation: ConstellationSpec | None = None,
) -> tuple[np.ndarray, np.ndarray, EqualizerState]:
    """Run the widely-linear DDLMS over a 2-sps chunk.

    Emits one decision per 2 input samples: y = w^H x + g^H conj(x) over the
    n_taps window, error against the training symbol (while provided) or the
    nearest constellation point, LMS tap update.  State (taps, the input
    residue shorter than one window, divergence bookkeeping) carries across
    calls, so chunked processing equals single-shot processing exactly.
    """
    spec = constellation if constellation is not None else make_constellation(4)
    x_cat = np.concatenate([state.resid, np.asarray(x, dtype=np.complex128)])
    n_out = max(0, (len(x_cat) - cfg.n_taps) // 2 + 1)
    soft = np.empty(n_out, dtype=np.complex128)
    dec = np.empty(n_out, dtype=np.complex128)
    if training is None:
        train = np.zeros(0, dtype=np.complex128)
    else:
        train = np.asarray(training, dtype=np.complex128)[:n_out]
    if n_out:
        frozen, div_count = _ddlms_core(
            x_cat, state.w, state.g, spec.points, train,
            float(cfg.mu), bool(cfg.widely_linear), float(spec.max_radius),
            float(cfg.divergence_factor), int(cfg.divergence_run),
            bool(state.frozen), int(state.div_count), soft, dec,
        )
        state.frozen = bool(frozen)
        state.div_count = int(div_count)
    state.resid = x_cat[2 * n_out:].copy()
    state.symbols_done += n_out
    return dec, soft, state


def demap(symbols: np.ndarray, spec: ConstellationSpec) -> tuple[np.ndarray, int]:
    """Inverse of qam_map: symbols to bits, nearest-point fallback counted.

    Returns (bits, n_fallback) where n_fallback is the number of inputs that
    were not exact constellation points.
    """
    symbols = np.asarray(symbols, dtype=np.complex128)
    k = spec.bits_per_symbol
    shifts = np.arange(k - 1, -1, -1)
    bits = np.empty(len(symbols) * k, dtype=np.uint8)
    n_fallback = 0
    step = 1 << 16  # bound the pairwise distance matrix
    for a in range(0, len(symbols), step):
        b = min(a + step, len(symbols))
        d = np.abs(symbols[a:b, None] - spec.points[None, :])
        idx = np.argmin(d, axis=1)
        n_fallback += int(np.sum(d[np.arange(b - a), idx] > 1e-9))
        labels = spec.labels[idx]
        bits[a * k:b * k] = ((labels[:, None] >> shifts[None, :]) & 1).reshape(-1)
    return bits, n_fallback


# ---------------------------------------------------------------------------
# symbol-level synchronization
# ---------------------------------------------------------------------------

def symbol_sync(y_2sps: np.ndarray, reference: np.ndarray,
                min_peak_ratio: float = 4.0) -> tuple[int, float]:
    """Locate the reference symbol sequence in a 2-sps stream.

    Cross-correlates both symbol-rate decimation phases against the
    reference; returns the stream sample index of reference symbol 0 and the
    peak-to-rms ratio.  Raises SyncError if no clear peak exists.
    """
    ref = np.asarray(reference, dtype=np.complex128)
    best = None
    for parity in (0, 1):
        z = y_2sps[parity::2]
        if len(z) < len(ref):
            continue
        c = fftconvolve(z, np.conj(ref[::-1]), mode="valid")
        mag = np.abs(c)
        k = int(np.argmax(mag))
        side = np.delete(mag, np.arange(max(0, k - 2), min(len(mag), k + 3)))
        rms = np.sqrt(np.mean(side**2)) if len(side) else 1e-30
        ratio = mag[k] / rms
        if best is None or ratio > best[2]:
            best = (parity, k, ratio)
    if best is None:
        raise SyncError("stream shorter than the reference sequence")
    parity, k, ratio = best
    if ratio < min_peak_ratio:
        raise SyncError(f"no correlation peak (peak-to-rms {ratio:.2f})")
    return 2 * k + parity, float(ratio)


# ---------------------------------------------------------------------------
# streaming pipeline
# ---------------------------------------------------------------------------

class RxPipeline:
    """Streaming receiver: feed ADC chunks of any size, collect decisions.

    With reference_symbols given, the pipeline aligns itself to the
    transmitted sequence by cross-correlation on the equalized 2-sps stream
    (using the first sync_symbols of the reference) and trains the DDLMS on
    the first startup_symbols; afterwards it is decision-directed.  Output is
    bit-identical regardless of the feed chunking.
    """

    def __init__(self, cfg: RxPipelineConfig,
                 reference_symbols: np.ndarray | None = None):
        self.cfg = cfg
        self.reference = (
            None if reference_symbols is None
            else np.asarray(reference_symbols, dtype=np.complex128)
        )
        taps = cfg.static_taps
        if taps is None:
            taps = FirFilter(np.array([1.0 + 0j]), cfg.adc_rate_hz / 2.0)
        self._taps = taps
        self._aa_delay = cfg.static_plan.fft_size // 4
        self._kept, self._resp = _static_response(
            taps, cfg.static_plan, cfg.adc_rate_hz, cfg.aa_edge, self._aa_delay
        )

        self._raw = np.zeros(0, dtype=np.float64)
        self._kk_state: dict | None = None
        self._carrier_fifo = np.zeros(0, dtype=np.complex128)
        self._ds_index = 0  # global sample index for the downshift rotation
        self._static_fifo = np.zeros(0, dtype=np.complex128)
        self._static_tail: np.ndarray | None = None
        self._eq_state = EqualizerState.initial(cfg.ddlms.n_taps)
        self._sync_buf: np.ndarray = np.zeros(0, dtype=np.complex128)
        self._train_left = 0
        self._train_pos = 0
        self._synced = False
        self._eq_scale: float | None = None  # DDLMS input normalization
        self.sync_offset: int | None = None
        self.sync_ratio: float | None = None

        self._dec: list[np.ndarray] = []
        self._soft: list[np.ndarray] = []
        self.diagnostics: list[dict] = []
        self.stage_seconds: dict[str, float] = {
            "kk": 0.0, "carrier": 0.0, "downshift": 0.0, "static": 0.0, "ddlms": 0.0
        }
        self.samples_in = 0
        self._chunk_index = 0

    # -- stage helpers ----------------------------------------------------

    def _run_kk(self, x: np.ndarray) -> np.ndarray:
        sig = RealSignal(x, self.cfg.adc_rate_hz)
        field, self._kk_state, diag = kk_reconstruct(sig, self.cfg.kk_plan, self._kk_state)
        self.diagnostics.append({
            "chunk": self._chunk_index,
            "clamped": diag["clamped"],
            "zero_blocks": diag["zero_blocks"],
            "diverged": self._eq_state.frozen,
        })
        return field.samples

    def _run_carrier(self, x: np.ndarray, flush: bool) -> np.ndarray:
        """Remove the reconstructed carrier (a DC constant) per aligned
        segment; segment boundaries are fixed in the global stream so output
        does not depend on chunking."""
        if not self.cfg.carrier_removal:
            return x
        self._carrier_fifo = np.concatenate([self._carrier_fifo, x])
        seg = self.cfg.carrier_segment_len
        n_full = (len(self._carrier_fifo) // seg) * seg
        take = len(self._carrier_fifo) if flush else n_full
        if take == 0:
            return np.zeros(0, dtype=np.complex128)
        out = self._carrier_fifo[:take].copy()
        self._carrier_fifo = self._carrier_fifo[take:]
        for a in range(0, take, seg):
            b = min(a + seg, take)
            out[a:b] -= np.mean(out[a:b])
        return out

    def _run_downshift(self, x: np.ndarray) -> np.ndarray:
        sig = ComplexSignal(x, self.cfg.adc_rate_hz)
        shifted = downshift_dc(sig, self.cfg.tone_freq_hz, start_index=self._ds_index)
        self._ds_index += len(x)
        if self.cfg.mirror:
            return np.conj(shifted.samples)
        return shifted.samples

    def _run_static(self, x: np.ndarray, flush: bool) -> np.ndarray:
        self._static_fifo = np.concatenate([self._static_fifo, x])
        hop = self.cfg.static_plan.hop
        n_full = (len(self._static_fifo) // hop) * hop
        if flush and len(self._static_fifo) % hop:
            pad = hop - len(self._static_fifo) % hop
            self._static_fifo = np.concatenate(
                [self._static_fifo, np.zeros(pad, dtype=np.complex128)]
            )
            n_full = len(self._static_fifo)
        if n_full == 0:
            return np.zeros(0, dtype=np.complex128)
        chunk = self._static_fifo[:n_full]
        self._static_fifo = self._static_fifo[n_full:]
        if self._static_tail is None:
            self._static_tail = np.zeros(hop, dtype=np.complex128)
        n, m = self.cfg.static_plan.fft_size, self.cfg.static_plan.fft_size // 2
        stream = np.concatenate([self._static_tail, chunk])
        blocks = sliding_window_view(stream, n)[::hop]
        spec = np.fft.fft(blocks, axis=1)[:, self._kept] * self._resp
        y = np.fft.ifft(spec, axis=1) * (m / n)
        self._static_tail = chunk[-hop:].copy()
        return y[:, m // 2:].reshape(-1)

    def _run_ddlms(self, y2: np.ndarray, flush: bool) -> None:
        cfg = self.cfg
        if not self._synced:
            # buffer the stream head once: it fixes the equalizer input
            # normalization (and the training alignment when a reference is
            # given) independent of how the stream was chunked
            self._sync_buf = np.concatenate([self._sync_buf, y2])
            need = cfg.sync_wait_samples + 2 * cfg.sync_symbols
            if len(self._sync_buf) < need and not flush:
                return
            # estimate scale and alignment over a fixed-length prefix so the
            # result cannot depend on how the stream was chunked
            head = self._sync_buf[:need]
            skip = min(len(head) // 2, 1 << 13)  # leading filter fill-in
            rms = np.sqrt(np.mean(np.abs(head[skip:]) ** 2))
            self._eq_scale = 1.0 / rms if rms > 0 else 1.0
            drop = 0
            if self.reference is not None:
                ref = self.reference[:cfg.sync_symbols]
                offset, ratio = symbol_sync(head, ref)
                self.sync_offset = offset
                self.sync_ratio = ratio
                drop = max(0, offset - 1)  # tap window straddles the symbol peak
                self._train_left = min(cfg.ddlms.startup_symbols, len(self.reference))
                self._train_pos = 0
            y2 = self._sync_buf[drop:]
            self._sync_buf = np.zeros(0, dtype=np.complex128)
            self._synced = True
        if len(y2) == 0:
            return
        y2 = y2 * self._eq_scale
        training = None
        if self._train_left > 0:
            training = self.reference[self._train_pos:self._train_pos + self._train_left]
        dec, soft, self._eq_state = ddlms_wl(
            y2, cfg.ddlms, self._eq_state, training, cfg.constellation
        )
        if self._train_left > 0:
            used = min(len(dec), self._train_left)
            self._train_left -= used
            self._train_pos += used
        self._dec.append(dec)
        self._soft.append(soft)

    # -- public API --------------------------------------------------------

    def feed(self, adc_chunk: np.ndarray | RealSignal, flush: bool = False) -> None:
        """Process a chunk of ADC samples (any length)."""
        x = adc_chunk.samples if isinstance(adc_chunk, RealSignal) else np.asarray(adc_chunk, dtype=np.float64)
        self.samples_in += len(x)
        self._raw = np.concatenate([self._raw, x])
        hop = self.cfg.kk_plan.hop
        n_full = (len(self._raw) // hop) * hop
        if flush and len(self._raw) % hop:
            pad = hop - len(self._raw) % hop
            self._raw = np.concatenate([self._raw, np.zeros(pad)])
            n_full = len(self._raw)
        if n_full == 0 and not flush:
            return
        chunk = self._raw[:n_full]
        self._raw = self._raw[n_full:]

        t0 = time.perf_counter()
        field = self._run_kk(chunk) if len(chunk) else np.zeros(0, dtype=np.complex128)
        t1 = time.perf_counter()
        cleaned = self._run_carrier(field, flush)
        t2 = time.perf_counter()
        shifted = self._run_downshift(cleaned)
        t3 = time.perf_counter()
        y2 = self._run_static(shifted, flush)
        t4 = time.perf_counter()
        self._run_ddlms(y2, flush)
        t5 = time.perf_counter()

        self.stage_seconds["kk"] += t1 - t0
        self.stage_seconds["carrier"] += t2 - t1
        self.stage_seconds["downshift"] += t3 - t2
        self.stage_seconds["static"] += t4 - t3
        self.stage_seconds["ddlms"] += t5 - t4
        self._chunk_index += 1

    def drain(self) -> tuple[np.ndarray, np.ndarray]:
        """Return decisions and soft outputs accumulated so far and clear
        them (bounded-memory consumption for long streams)."""
        dec = np.concatenate(self._dec) if self._dec else np.zeros(0, dtype=np.complex128)
        soft = np.concatenate(self._soft) if self._soft else np.zeros(0, dtype=np.complex128)
        self._dec, self._soft = [], []
        return dec, soft

    def finish(self) -> tuple[np.ndarray, np.ndarray]:
        """Flush remaining samples (zero-padded) and return what has not been
        drained of (decisions, soft)."""
        self.feed(np.zeros(0), flush=True)
        return self.drain()

    @property
    def diverged(self) -> bool:
        return self._eq_state.frozen

    def write_diagnostics(self, path: str) -> None:
        with open(path, "w") as f:
            for rec in self.diagnostics:
                f.write(json.dumps(rec, sort_keys=True) + "\n")
