"""Fiber link simulation: dispersion, loss, amplification with ASE noise,
optional Kerr nonlinearity (split-step), and laser phase noise.

Field amplitudes are in sqrt(mW) (mean |x|^2 == power in mW), so dBm launch
powers map directly onto sample scaling; nonlinear phase uses watts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.constants as const

from .sigcore import ComplexSignal, ParameterError, power

__all__ = [
    "FiberSpan",
    "LinkConfig",
    "apply_cd",
    "add_ase",
    "ssfm_span",
    "propagate_link",
    "wiener_phase_noise",
    "estimate_osnr",
    "cd_phase_coefficient",
]


@dataclass
class FiberSpan:
    length_km: float = 100.0
    loss_db_per_km: float = 0.154
    dispersion_ps_nm_km: float = 20.0
    gamma_per_w_km: float = 0.8
    aeff_um2: float = 112.0  # informational; gamma = 2*pi*n2/(lambda*Aeff)

    def __post_init__(self):
        if self.length_km < 0 or self.loss_db_per_km < 0:
            raise ParameterError("span length and loss must be nonnegative")
        if self.gamma_per_w_km < 0:
            raise ParameterError("gamma must be nonnegative")


def _default_spans() -> list[FiberSpan]:
    return [FiberSpan() for _ in range(100)]


@dataclass
class LinkConfig:
    """Straight-line link of amplified spans with monitoring taps.

    The test channel's per-span launch power is total_launch_dbm +
    rel_launch_db (single-channel stand-in for the relative-launch knob of a
    WDM system).
    """

    spans: list[FiberSpan] = field(default_factory=_default_spans)
    total_launch_dbm: float = 20.0
    rel_launch_db: float = 0.0
    edfa_noise_figure_db: float = 5.0
    center_wavelength_nm: float = 1550.116
    monitor_every_n_spans: int = 20
    nonlinearity_enabled: bool = False
    phase_noise_linewidth_hz: float = 100e3
    ase_enabled: bool = True
    ssfm_step_km: float = 1.0

    @property
    def launch_dbm(self) -> float:
        return self.total_launch_dbm + self.rel_launch_db

    @property
    def total_length_km(self) -> float:
        return sum(s.length_km for s in self.spans)

    @property
    def total_dispersion_ps_nm(self) -> float:
        return sum(s.length_km * s.dispersion_ps_nm_km for s in self.spans)


def cd_phase_coefficient(dispersion_ps_nm_km: float, length_km: float,
                         lambda_nm: float) -> float:
    """Coefficient a in the fiber response H(f) = exp(-j*a*f^2)."""
    d_si = dispersion_ps_nm_km * 1e-6          # s/m^2
    lam = lambda_nm * 1e-9
    return np.pi * d_si * lam**2 * (length_km * 1e3) / const.c


def apply_cd(signal: ComplexSignal, dispersion_ps_nm_km: float, length_km: float,
             lambda_nm: float = 1550.116) -> ComplexSignal:
    """All-pass chromatic dispersion: spectrum times exp(-j*pi*D*lambda^2*L*f^2/c).

    The exact inverse is apply_cd with -D (or -L).
    """
    if len(signal.samples) == 0:
        raise ParameterError("signal must be nonempty")
    if length_km == 0 or dispersion_ps_nm_km == 0:
        return ComplexSignal(signal.samples.copy(), signal.sample_rate_hz)
    a = cd_phase_coefficient(dispersion_ps_nm_km, length_km, lambda_nm)
    f = np.fft.fftfreq(len(signal.samples), 1.0 / signal.sample_rate_hz)
    spec = np.fft.fft(signal.samples) * np.exp(-1j * a * f * f)
    return ComplexSignal(np.fft.ifft(spec), signal.sample_rate_hz)


def add_ase(signal: ComplexSignal, osnr_db: float, ref_bandwidth_hz: float = 12.5e9,
            seed: int | np.random.Generator = 0) -> ComplexSignal:
    """Load circular complex white Gaussian noise to a target OSNR.

    OSNR is signal power over the noise power falling in ref_bandwidth_hz
    (default 12.5 GHz, the 0.1 nm convention).  osnr_db = +inf is a no-op.
    """
    if np.isinf(osnr_db) and osnr_db > 0:
        return ComplexSignal(signal.samples.copy(), signal.sample_rate_hz)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p_sig = power(signal)
    density = p_sig / (10.0 ** (osnr_db / 10.0) * ref_bandwidth_hz)  # mW/Hz
    p_noise = density * signal.sample_rate_hz
    n = len(signal.samples)
    noise = np.sqrt(p_noise / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return ComplexSignal(signal.samples + noise, signal.sample_rate_hz)


def ssfm_span(signal: ComplexSignal, span: FiberSpan, step_km: float | None = None,
              lambda_nm: float = 1550.116) -> ComplexSignal:
    """Propagate one span with the symmetric split-step Fourier method.

    Per step: half-step dispersion, nonlinear phase rotation using the
    effective length of the step (loss applied continuously), half-step
    dispersion.  With gamma = 0 this reduces to apply_cd plus scalar loss.
    """
    if step_km is None:
        step_km = 1.0
    if step_km <= 0:
        raise ParameterError("step_km must be positive")
    step_km = min(step_km, span.length_km) if span.length_km > 0 else step_km
    n_steps = max(1, int(round(span.length_km / step_km)))
    dz = span.length_km / n_steps

    alpha_np_per_km = span.loss_db_per_km * np.log(10.0) / 10.0  # field power decay
    a_half = cd_phase_coefficient(span.dispersion_ps_nm_km, dz / 2.0, lambda_nm)
    f = np.fft.fftfreq(len(signal.samples), 1.0 / signal.sample_rate_hz)
    lin_half = np.exp(-1j * a_half * f * f)

    if alpha_np_per_km > 0:
        l_eff = (1.0 - np.exp(-alpha_np_per_km * dz)) / alpha_np_per_km
    else:
        l_eff = dz
    loss_amp = np.exp(-alpha_np_per_km * dz / 2.0)  # amplitude factor per step

    x = signal.samples.copy()
    for _ in range(n_steps):
        x = np.fft.ifft(np.fft.fft(x) * lin_half)
        p_w = np.abs(x) ** 2 * 1e-3  # mW -> W
        x = x * np.exp(1j * span.gamma_per_w_km * p_w * l_eff)
        x = np.fft.ifft(np.fft.fft(x) * lin_half)
        x *= loss_amp
    return ComplexSignal(x, signal.sample_rate_hz)


def _linear_span(signal: ComplexSignal, span: FiberSpan, lambda_nm: float) -> ComplexSignal:
    out = apply_cd(signal, span.dispersion_ps_nm_km, span.length_km, lambda_nm)
    loss_amp = 10.0 ** (-span.loss_db_per_km * span.length_km / 20.0)
    return ComplexSignal(out.samples * loss_amp, out.sample_rate_hz)


def _edfa(signal: ComplexSignal, target_dbm: float, nf_db: float, lambda_nm: float,
          ase_enabled: bool, rng: np.random.Generator) -> ComplexSignal:
    """Flat-gain amplifier restoring target launch power, plus ASE noise."""
    p_in = power(signal)
    if p_in <= 0:
        raise ParameterError("cannot amplify an all-zero signal")
    target_mw = 10.0 ** (target_dbm / 10.0)
    g = target_mw / p_in
    x = signal.samples * np.sqrt(g)
    if ase_enabled and g > 1.0:
        nf_lin = 10.0 ** (nf_db / 10.0)
        nsp = (g * nf_lin - 1.0) / (2.0 * (g - 1.0))
        nu = const.c / (lambda_nm * 1e-9)
        density_w = (g - 1.0) * nsp * const.h * nu        # W/Hz, one polarization
        p_noise_mw = density_w * signal.sample_rate_hz * 1e3
        n = len(x)
        x = x + np.sqrt(p_noise_mw / 2.0) * (
            rng.standard_normal(n) + 1j * rng.standard_normal(n)
        )
    return ComplexSignal(x, signal.sample_rate_hz)


def propagate_link(signal: ComplexSignal, link: LinkConfig,
                   seed: int = 0) -> tuple[ComplexSignal, dict[float, ComplexSignal]]:
    """Propagate through all spans; return the final field and monitor taps.

    The input is scaled to the test-channel launch power, then each span is
    fiber (split-step if nonlinearity is enabled, otherwise dispersion plus
    loss) followed by an amplifier restoring launch power and adding ASE per
    its noise figure, so N spans accumulate N equal noise contributions.
    Monitor copies are captured after every monitor_every_n_spans spans
    (post-amplifier), keyed by cumulative distance in km.
    """
    if not link.spans:
        raise ParameterError("link has no spans")
    rng = np.random.default_rng(seed)
    lam = link.center_wavelength_nm
    x = signal.scaled_to_power(10.0 ** (link.launch_dbm / 10.0))
    monitors: dict[float, ComplexSignal] = {}
    dist_km = 0.0
    for i, span in enumerate(link.spans):
        if link.nonlinearity_enabled and span.gamma_per_w_km > 0:
            x = ssfm_span(x, span, link.ssfm_step_km, lam)
        else:
            x = _linear_span(x, span, lam)
        x = _edfa(x, link.launch_dbm, link.edfa_noise_figure_db, lam,
                  link.ase_enabled, rng)
        dist_km += span.length_km
        if (i + 1) % link.monitor_every_n_spans == 0 or i == len(link.spans) - 1:
            monitors.setdefault(dist_km, ComplexSignal(x.samples.copy(), x.sample_rate_hz))
    return x, monitors


def wiener_phase_noise(signal: ComplexSignal, linewidth_hz: float,
                       seed: int = 0) -> ComplexSignal:
    """Multiply by exp(j*theta), theta a Wiener process with increment
    variance 2*pi*linewidth/fs per sample."""
    if linewidth_hz < 0:
        raise ParameterError("linewidth must be nonnegative")
    if linewidth_hz == 0:
        return ComplexSignal(signal.samples.copy(), signal.sample_rate_hz)
    rng = np.random.default_rng(seed)
    sigma = np.sqrt(2.0 * np.pi * linewidth_hz / signal.sample_rate_hz)
    theta = np.cumsum(sigma * rng.standard_normal(len(signal.samples)))
    return ComplexSignal(signal.samples * np.exp(1j * theta), signal.sample_rate_hz)


def estimate_osnr(noisy: ComplexSignal, signal_band_hz: tuple[float, float],
                  noise_band_hz: tuple[float, float],
                  ref_bandwidth_hz: float = 12.5e9) -> float:
    """PSD-based OSNR estimate in dB.

    Noise density is measured in a signal-free band and subtracted from the
    in-band power; the result is referenced to ref_bandwidth_hz.
    """
    n = len(noisy.samples)
    p_bin = np.abs(np.fft.fft(noisy.samples)) ** 2 / n**2  # sums to mean power
    f = np.fft.fftfreq(n, 1.0 / noisy.sample_rate_hz)
    bin_hz = noisy.sample_rate_hz / n

    in_band = (f >= signal_band_hz[0]) & (f <= signal_band_hz[1])
    off_band = (np.abs(f) >= noise_band_hz[0]) & (np.abs(f) <= noise_band_hz[1])
    if not np.any(in_band) or not np.any(off_band):
        raise ParameterError("bands resolve no FFT bins")
    density = np.mean(p_bin[off_band]) / bin_hz  # mW/Hz
    p_total = np.sum(p_bin[in_band])
    width = np.sum(in_band) * bin_hz
    p_sig = p_total - density * width
    if p_sig <= 0:
        return -np.inf
    return 10.0 * np.log10(p_sig / (density * ref_bandwidth_hz))
