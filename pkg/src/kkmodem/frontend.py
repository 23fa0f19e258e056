"""Direct-detection front end: optical bandpass, square-law photodiode with
bandwidth limit, and the 12-bit ADC model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sigcore import ComplexSignal, ParameterError, RealSignal, resample_rational

__all__ = ["FrontendConfig", "photodetect", "adc_quantize", "super_gaussian_lowpass"]


@dataclass
class FrontendConfig:
    obpf_bandwidth_hz: float = 5e9
    pd_bandwidth_hz: float = 6.5e9
    adc_rate_hz: float = 4e9
    adc_bits: int = 12
    adc_full_scale: float | None = None  # None: auto-scale to 3x RMS
    pd_filter_order: int = 4
    adc_analog_bandwidth_hz: float = 1e9
    adc_aa_order: int = 4
    quantization_enabled: bool = True
    electrical_noise_rms: float = 0.0  # optional additive noise hook

    def __post_init__(self):
        if not (4 <= self.adc_bits <= 16):
            raise ParameterError("adc_bits must be in [4, 16]")
        for r in (self.obpf_bandwidth_hz, self.pd_bandwidth_hz, self.adc_rate_hz):
            if r <= 0:
                raise ParameterError("rates and bandwidths must be positive")


def super_gaussian_lowpass(x: np.ndarray, fs: float, cutoff_hz: float,
                           order: int) -> np.ndarray:
    """Zero-phase super-Gaussian low-pass, -3 dB at cutoff_hz.

    |H(f)| = exp(-ln2/2 * (f/fc)^(2*order)); order 1 is a true Gaussian,
    higher orders flatten the passband without ringing.
    """
    spec = np.fft.rfft(x)
    f = np.fft.rfftfreq(len(x), 1.0 / fs)
    spec *= np.exp(-0.5 * np.log(2.0) * (f / cutoff_hz) ** (2 * order))
    return np.fft.irfft(spec, n=len(x))


def _flat_top_bandpass(x: np.ndarray, fs: float, bandwidth_hz: float,
                       edge_fraction: float = 0.05) -> np.ndarray:
    """Flat-top optical bandpass centered at 0 Hz with raised-cosine edges."""
    spec = np.fft.fft(x)
    f = np.fft.fftfreq(len(x), 1.0 / fs)
    half = bandwidth_hz / 2.0
    f_pass = half * (1.0 - edge_fraction)
    a = np.abs(f)
    w = np.zeros(len(x))
    w[a <= f_pass] = 1.0
    trans = (a > f_pass) & (a < half)
    w[trans] = 0.5 * (1.0 + np.cos(np.pi * (a[trans] - f_pass) / (half - f_pass)))
    return np.fft.ifft(spec * w)


def photodetect(signal: ComplexSignal, cfg: FrontendConfig) -> RealSignal:
    """Optical bandpass, square-law detection, photodiode low-pass.

    I(t) = |E(t)|^2 with responsivity 1 (power units), then a super-Gaussian
    response at pd_bandwidth_hz.  Phase-insensitive by construction.
    """
    if signal.sample_rate_hz < 2.0 * cfg.pd_bandwidth_hz:
        raise ParameterError(
            "sample rate must be at least twice the photodiode bandwidth"
        )
    field = _flat_top_bandpass(signal.samples, signal.sample_rate_hz,
                               cfg.obpf_bandwidth_hz)
    current = np.abs(field) ** 2
    current = super_gaussian_lowpass(current, signal.sample_rate_hz,
                                     cfg.pd_bandwidth_hz, cfg.pd_filter_order)
    return RealSignal(current, signal.sample_rate_hz)


def adc_quantize(current: RealSignal, cfg: FrontendConfig,
                 seed: int = 0) -> tuple[RealSignal, float]:
    """ADC model: analog bandwidth, resampling to adc_rate_hz, mid-rise
    quantization with clipping.

    Returns the quantized stream (values are reconstruction levels) and the
    fraction of samples that hit either clip rail.  With
    quantization_enabled=False the amplitude path is untouched (ideal ADC),
    which isolates the DSP chain from quantization effects in tests.
    """
    x = super_gaussian_lowpass(current.samples, current.sample_rate_hz,
                               cfg.adc_analog_bandwidth_hz, cfg.adc_aa_order)
    if cfg.electrical_noise_rms > 0:
        rng = np.random.default_rng(seed)
        x = x + cfg.electrical_noise_rms * rng.standard_normal(len(x))

    ratio = current.sample_rate_hz / cfg.adc_rate_hz
    if abs(ratio - round(ratio)) > 1e-9:
        raise ParameterError("simulation rate must be an integer multiple of adc_rate_hz")
    sig = resample_rational(RealSignal(x, current.sample_rate_hz), 1, int(round(ratio)))

    full_scale = cfg.adc_full_scale
    if full_scale is None:
        rms = np.sqrt(np.mean(sig.samples**2))
        full_scale = 3.0 * rms if rms > 0 else 1.0
    if not cfg.quantization_enabled:
        return RealSignal(sig.samples, cfg.adc_rate_hz), 0.0

    n_levels = 1 << cfg.adc_bits
    lsb = 2.0 * full_scale / n_levels
    # mid-rise: reconstruction levels at (k + 1/2) * lsb
    codes = np.floor(sig.samples / lsb)
    top = n_levels // 2 - 1
    clipped = (codes > top) | (codes < -n_levels // 2)
    codes = np.clip(codes, -n_levels // 2, top)
    out = (codes + 0.5) * lsb
    return RealSignal(out, cfg.adc_rate_hz), float(np.mean(clipped))
