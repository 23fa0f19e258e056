import numpy as np
import pytest

from kkmodem.frontend import FrontendConfig, adc_quantize, photodetect
from kkmodem.sigcore import ComplexSignal, ParameterError, RealSignal


FS = 16e9


class TestPhotodetect:
    def test_constant_field_gives_constant_current(self):
        amp = 1.7
        sig = ComplexSignal(np.full(1 << 14, amp, dtype=complex), FS)
        out = photodetect(sig, FrontendConfig())
        mid = out.samples[2048:-2048]
        assert np.allclose(mid, amp**2, rtol=1e-6)

    def test_two_tone_beat(self):
        # analytic expansion of |a e^{j2pi f1 t} + b e^{j2pi f2 t}|^2:
        # DC a^2 + b^2 and a beat at |f1-f2| with amplitude 2ab
        a, b = 1.0, 0.5
        f1, f2 = 0.1e9, 0.6e9
        n = 1 << 16
        t = np.arange(n) / FS
        field = a * np.exp(2j * np.pi * f1 * t) + b * np.exp(2j * np.pi * f2 * t)
        out = photodetect(ComplexSignal(field, FS), FrontendConfig())
        spec = np.fft.rfft(out.samples) / n
        f = np.fft.rfftfreq(n, 1 / FS)
        dc = spec[0].real
        k_beat = np.argmin(np.abs(f - abs(f1 - f2)))
        beat_amp = 2 * np.abs(spec[k_beat])  # one-sided -> amplitude
        assert dc == pytest.approx(a**2 + b**2, rel=1e-3)
        assert beat_amp == pytest.approx(2 * a * b, rel=0.01)

    def test_nonnegative_before_filter(self):
        rng = np.random.default_rng(0)
        field = rng.standard_normal(4096) + 1j * rng.standard_normal(4096)
        current = np.abs(field) ** 2
        assert np.all(current >= 0)

    def test_phase_insensitive(self):
        rng = np.random.default_rng(1)
        field = rng.standard_normal(8192) + 1j * rng.standard_normal(8192)
        sig = ComplexSignal(field, FS)
        rot = ComplexSignal(field * np.exp(1j * 1.234), FS)
        a = photodetect(sig, FrontendConfig())
        b = photodetect(rot, FrontendConfig())
        # |.|^2 removes the phase; only FFT rounding separates the two paths
        assert np.allclose(a.samples, b.samples, rtol=1e-12, atol=1e-12)

    def test_dc_equals_mean_power(self):
        rng = np.random.default_rng(2)
        field = (rng.standard_normal(1 << 15) + 1j * rng.standard_normal(1 << 15))
        # confine the field inside the optical bandpass so nothing is clipped
        spec = np.fft.fft(field)
        f = np.fft.fftfreq(len(field), 1 / FS)
        spec[np.abs(f) > 1.0e9] = 0.0
        field = np.fft.ifft(spec)
        sig = ComplexSignal(field, FS)
        out = photodetect(sig, FrontendConfig())
        assert np.mean(out.samples) == pytest.approx(np.mean(np.abs(field) ** 2), rel=1e-3)

    def test_rejects_low_sample_rate(self):
        sig = ComplexSignal(np.ones(1024, dtype=complex), 8e9)
        with pytest.raises(ParameterError):
            photodetect(sig, FrontendConfig())  # needs >= 13 GHz for 6.5 GHz PD


class TestAdcQuantize:
    def test_zero_input(self):
        cfg = FrontendConfig(adc_full_scale=1.0)
        sig = RealSignal(np.zeros(4096), FS)
        out, clip = adc_quantize(sig, cfg)
        assert clip == 0.0
        lsb = 2.0 / (1 << 12)
        assert np.all(np.abs(out.samples) <= lsb)

    def test_full_scale_sine_sqnr(self):
        # measured SQNR vs the 6.02*bits + 1.76 dB formula
        cfg = FrontendConfig(adc_full_scale=1.0, adc_analog_bandwidth_hz=1e15,
                             adc_aa_order=1)
        n = 1 << 16
        f0 = 401e6  # in-band, off-grid enough to exercise many levels
        t = np.arange(n) / 4e9
        x = 0.999 * np.sin(2 * np.pi * f0 * t)
        out, clip = adc_quantize(RealSignal(x, 4e9), cfg)
        err = out.samples - x
        sqnr = 10 * np.log10(np.mean(x**2) / np.mean(err**2))
        assert clip == 0.0
        assert sqnr == pytest.approx(6.02 * 12 + 1.76, abs=0.5)

    def test_clip_fraction_for_2x_sine(self):
        # analytic duty oracle: |2 sin| > 1 for 2/3 of the time (both rails)
        cfg = FrontendConfig(adc_full_scale=1.0, adc_analog_bandwidth_hz=1e15,
                             adc_aa_order=1)
        n = 1 << 16
        t = np.arange(n) / 4e9
        x = 2.0 * np.sin(2 * np.pi * 401e6 * t)
        out, clip = adc_quantize(RealSignal(x, 4e9), cfg)
        assert clip == pytest.approx(2.0 / 3.0, abs=0.01)
        assert np.max(out.samples) <= 1.0

    def test_quantization_error_bounded(self):
        rng = np.random.default_rng(3)
        cfg = FrontendConfig(adc_full_scale=4.0, adc_analog_bandwidth_hz=1e15,
                             adc_aa_order=1)
        x = rng.uniform(-3.9, 3.9, size=4096)
        out, clip = adc_quantize(RealSignal(x, 4e9), cfg)
        lsb = 8.0 / (1 << 12)
        assert clip == 0.0
        assert np.max(np.abs(out.samples - x)) <= lsb / 2 + 1e-12

    def test_resamples_to_adc_rate(self):
        rng = np.random.default_rng(4)
        sig = RealSignal(rng.standard_normal(1 << 14), FS)
        out, _ = adc_quantize(sig, FrontendConfig())
        assert out.sample_rate_hz == pytest.approx(4e9)
        assert len(out) == (1 << 14) // 4

    def test_quantization_disabled_passthrough(self):
        rng = np.random.default_rng(5)
        cfg = FrontendConfig(quantization_enabled=False,
                             adc_analog_bandwidth_hz=1e15, adc_aa_order=1)
        x = rng.standard_normal(1 << 12)
        out, clip = adc_quantize(RealSignal(x, 4e9), cfg)
        assert clip == 0.0
        assert np.allclose(out.samples, x, atol=1e-9)
