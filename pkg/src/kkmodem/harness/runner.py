"""End-to-end orchestration: single runs, sustained streaming runs, and
receiver throughput benchmarking."""

from __future__ import annotations

import json
import os
import time
from fractions import Fraction

import numpy as np

from ..channel import LinkConfig, add_ase, propagate_link, wiener_phase_noise
from ..frontend import adc_quantize, photodetect, super_gaussian_lowpass
from ..metrics import SyncFailure, evm, frame_sync, q_from_ber, windowed_q
from ..rxdsp import (
    RxPipeline,
    RxPipelineConfig,
    DdlmsConfig,
    SyncError,
    compute_static_taps,
    demap,
    design_receive_taps,
)
from ..sigcore import (
    BlockPlan,
    ComplexSignal,
    FirFilter,
    RealSignal,
    overlap_save_filter,
    power,
    resample_rational,
    write_signal_raw,
)
from ..txdsp import TxConfig, add_carrier, make_constellation, prbs_generate, qam_map, shape
from .config import ExperimentConfig

REPORT_SCHEMA_VERSION = 1


def _derive_seeds(seed: int) -> dict[str, int]:
    state = np.random.SeedSequence(seed).generate_state(4)
    return {
        "link": int(state[0]),
        "phase_noise": int(state[1]),
        "rx_osnr": int(state[2]),
        "electrical": int(state[3]),
    }


def build_transmit_side(cfg: ExperimentConfig):
    """Bits, symbols and the launch-ready field at the simulation rate."""
    tx = cfg.tx
    spec = make_constellation(tx.constellation_order)
    bits = prbs_generate(tx.prbs_degree, tx.prbs_seed, spec.bits_per_symbol * tx.n_symbols)
    syms = qam_map(bits, spec)
    wave = shape(syms, tx)
    wave = add_carrier(wave, tx.tone_freq_hz, tx.cspr_db)
    ratio = Fraction(int(cfg.sim_rate_hz), int(tx.dac_rate_hz))
    if ratio != 1:
        wave = resample_rational(wave, ratio.numerator, ratio.denominator)
    return bits, syms, wave


def make_pipeline_config(cfg: ExperimentConfig, link: LinkConfig) -> RxPipelineConfig:
    rx = cfg.rx
    tx = cfg.tx
    rate_out = cfg.frontend.adc_rate_hz / 2.0
    if rx.designed_taps:
        taps = design_receive_taps(
            link, tx,
            frontend=cfg.frontend if rx.compensate_frontend else None,
            n_taps=rx.static_n_taps, rate_hz=rate_out,
        )
    else:
        taps = compute_static_taps(link, n_taps=rx.static_n_taps, rate_hz=rate_out)
    return RxPipelineConfig(
        adc_rate_hz=cfg.frontend.adc_rate_hz,
        baud_hz=tx.baud_hz,
        tone_freq_hz=tx.tone_freq_hz,
        kk_plan=BlockPlan(rx.kk_fft_size, buffer_len=rx.buffer_len),
        static_plan=BlockPlan(rx.static_fft_size, buffer_len=rx.buffer_len),
        static_taps=taps,
        carrier_removal=rx.carrier_removal,
        carrier_segment_len=rx.carrier_segment_len,
        ddlms=DdlmsConfig(mu=rx.mu, startup_symbols=rx.startup_symbols,
                          widely_linear=rx.widely_linear),
        constellation_order=tx.constellation_order,
        sync_symbols=rx.sync_symbols,
        sync_wait_samples=rx.sync_wait_samples,
    )


def receive_stream(adc: RealSignal, pipe_cfg: RxPipelineConfig,
                   reference_symbols: np.ndarray) -> RxPipeline:
    """Feed a whole ADC stream through a fresh pipeline, buffer by buffer."""
    pipe = RxPipeline(pipe_cfg, reference_symbols=reference_symbols)
    blen = pipe_cfg.kk_plan.buffer_len
    for start in range(0, len(adc.samples), blen):
        pipe.feed(adc.samples[start:start + blen])
    return pipe


def measure_point(dec: np.ndarray, soft: np.ndarray, bits: np.ndarray,
                  syms: np.ndarray, cfg: ExperimentConfig) -> dict:
    """BER/Q/EVM over the post-startup region of one receive run."""
    spec = make_constellation(cfg.tx.constellation_order)
    k = spec.bits_per_symbol
    head = cfg.rx.startup_symbols + cfg.metrics.head_guard_symbols
    stop = min(len(dec), len(syms)) - cfg.metrics.tail_guard_symbols
    if stop - head < 1000:
        raise SyncFailure("too few symbols beyond the startup region")

    rx_bits, _ = demap(dec[head:stop], spec)
    offset, a_rx, a_tx = frame_sync(rx_bits, bits)
    errors = a_rx != a_tx
    n_bits = len(errors)
    n_errors = int(np.sum(errors))
    ber = n_errors / n_bits

    point = {
        "ber": ber,
        "q_db": q_from_ber(ber),
        "evm_pct": evm(soft[head:stop], syms[head:stop]),
        "n_bits": n_bits,
        "n_errors": n_errors,
        "sync_offset": int(offset),
    }
    bit_rate = cfg.tx.baud_hz * k
    win = cfg.metrics.windowed_q_window_s
    if n_bits >= int(win * bit_rate):
        point["windowed_q"] = [
            [float(t), float(q)] for t, q in windowed_q(errors, bit_rate, win)
        ]
    else:
        point["windowed_q"] = []
    return point


def run_single(cfg: ExperimentConfig, output_dir: str | None = None,
               save_captures: bool = False) -> dict:
    """Execute tx -> link (with monitors) -> front end -> rx -> metrics.

    Returns the report dict (schema_version, config echo, one entry per
    monitored distance).  A sync failure at one distance marks that point
    "failed" and the run continues.  Deterministic for a fixed config+seed.
    """
    seeds = _derive_seeds(cfg.seed)
    link = cfg.link.build()
    bits, syms, field = build_transmit_side(cfg)
    if link.phase_noise_linewidth_hz > 0:
        field = wiener_phase_noise(field, link.phase_noise_linewidth_hz,
                                   seed=seeds["phase_noise"])
    _, monitors = propagate_link(field, link, seed=seeds["link"])

    pipe_cfg = make_pipeline_config(cfg, link)
    points = []
    for dist in sorted(monitors):
        sig = monitors[dist]
        point = {"distance_km": float(dist), "status": "ok"}
        try:
            if cfg.rx.osnr_override_db is not None:
                sig = add_ase(sig, cfg.rx.osnr_override_db, seed=seeds["rx_osnr"])
            current = photodetect(sig, cfg.frontend)
            adc, clip_frac = adc_quantize(current, cfg.frontend,
                                          seed=seeds["electrical"])
            pipe = receive_stream(adc, pipe_cfg, syms)
            dec, soft = pipe.finish()
            point.update(measure_point(dec, soft, bits, syms, cfg))
            point["clip_fraction"] = clip_frac
            point["diverged"] = pipe.diverged
            if save_captures and output_dir:
                ddir = os.path.join(output_dir, f"dist_{int(dist):06d}km")
                os.makedirs(ddir, exist_ok=True)
                np.packbits(demap(dec, make_constellation(cfg.tx.constellation_order))[0]).tofile(
                    os.path.join(ddir, "decided_bits.bin"))
                soft.astype(np.complex64).view(np.float32).tofile(
                    os.path.join(ddir, "soft_symbols.f32"))
                pipe.write_diagnostics(os.path.join(ddir, "rx_diagnostics.jsonl"))
                write_signal_raw(os.path.join(ddir, "adc_stream.raw"), adc,
                                 int16_scale=2047.0 / max(np.max(np.abs(adc.samples)), 1e-30))
        except (SyncError, SyncFailure) as exc:
            point["status"] = "failed"
            point["reason"] = str(exc)
        points.append(point)

    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "points": points,
    }
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        with open(os.path.join(output_dir, "report.json"), "w") as f:
            json.dump(report, f, indent=2, sort_keys=True)
    return report


# ---------------------------------------------------------------------------
# sustained streaming run (bounded memory, chunked generation)
# ---------------------------------------------------------------------------

class _StreamingFrontend:
    """Chunked back-to-back signal path: shaping, carrier, optional noise
    loading, photodiode and ADC, all with carried overlap state.

    Used for arbitrarily long contiguous streams; the link is back-to-back
    (no dispersion) with optional OSNR noise loading.
    """

    def __init__(self, cfg: ExperimentConfig, osnr_db: float | None, seed: int):
        if cfg.sim_rate_hz != cfg.tx.dac_rate_hz:
            raise ValueError("streaming path shapes directly at the simulation rate")
        self.cfg = cfg
        self.tx = cfg.tx
        self.sps = self.tx.sps
        self.fs = cfg.sim_rate_hz
        self.osnr_db = osnr_db
        self.rng = np.random.default_rng(seed)

        from ..sigcore import design_rrc

        rrc = design_rrc(self.tx.rolloff, self.sps, self.tx.pulse_span_symbols).taps.real
        self.shape_plan = BlockPlan(1 << int(np.ceil(np.log2(2 * len(rrc)))),
                                    buffer_len=1 << 22)
        self.shape_fd = np.fft.fft(rrc * np.sqrt(self.sps), self.shape_plan.fft_size)
        self.shape_tail = np.zeros(self.shape_plan.hop, dtype=np.complex128)

        # photodiode + ADC analog response as one causal overlap-save kernel
        self.pd_plan = BlockPlan(4096, buffer_len=1 << 22)
        n = self.pd_plan.fft_size
        f = np.fft.fftfreq(n, 1.0 / self.fs)
        resp = np.exp(-0.5 * np.log(2.0) * (f / cfg.frontend.pd_bandwidth_hz)
                      ** (2 * cfg.frontend.pd_filter_order))
        resp = resp * np.exp(-0.5 * np.log(2.0) * (f / cfg.frontend.adc_analog_bandwidth_hz)
                             ** (2 * cfg.frontend.adc_aa_order))
        self.pd_delay = 1024
        self.pd_fd = resp * np.exp(-2j * np.pi * f * self.pd_delay / self.fs)
        self.pd_tail = np.zeros(self.pd_plan.hop, dtype=np.complex128)

        self.n_emitted = 0
        self.carrier_amp: float | None = None
        self.noise_sigma: float | None = None
        self.full_scale: float | None = None
        self.decim = int(round(self.fs / cfg.frontend.adc_rate_hz))

    def process_symbols(self, syms: np.ndarray) -> np.ndarray:
        """Symbols in, quantized ADC samples out (4 per symbol)."""
        x = np.zeros(len(syms) * self.sps, dtype=np.complex128)
        x[::self.sps] = syms
        shaped, self.shape_tail = overlap_save_filter(
            ComplexSignal(x, self.fs), self.shape_fd, self.shape_plan, self.shape_tail)
        payload = shaped.samples

        if self.carrier_amp is None:
            # freeze amplitude scales from the first chunk
            p = float(np.mean(np.abs(payload) ** 2))
            self.carrier_amp = np.sqrt(p * 10 ** (self.tx.cspr_db / 10.0))
            if self.osnr_db is not None:
                density = (p * (1 + 10 ** (self.tx.cspr_db / 10.0))
                           / (10 ** (self.osnr_db / 10.0) * 12.5e9))
                self.noise_sigma = np.sqrt(density * self.fs / 2.0)

        n = np.arange(self.n_emitted, self.n_emitted + len(payload))
        self.n_emitted += len(payload)
        field = payload + self.carrier_amp * np.exp(
            2j * np.pi * self.tx.tone_freq_hz * n / self.fs)
        if self.noise_sigma is not None:
            field = field + self.noise_sigma * (
                self.rng.standard_normal(len(field))
                + 1j * self.rng.standard_normal(len(field)))

        current = np.abs(field) ** 2
        filtered, self.pd_tail = overlap_save_filter(
            ComplexSignal(current.astype(np.complex128), self.fs),
            self.pd_fd, self.pd_plan, self.pd_tail)
        adc_in = filtered.samples.real[::self.decim]

        if self.full_scale is None:
            self.full_scale = 3.0 * float(np.sqrt(np.mean(adc_in[len(adc_in) // 2:] ** 2)))
        fe = self.cfg.frontend
        if not fe.quantization_enabled:
            return adc_in
        n_levels = 1 << fe.adc_bits
        lsb = 2.0 * self.full_scale / n_levels
        codes = np.clip(np.floor(adc_in / lsb), -n_levels // 2, n_levels // 2 - 1)
        return (codes + 0.5) * lsb


def run_sustained(cfg: ExperimentConfig, n_adc_samples: int,
                  osnr_db: float | None = None,
                  chunk_symbols: int = 1 << 16) -> dict:
    """Back-to-back contiguous streaming run with bounded memory.

    Generates the ADC stream chunk by chunk, drives the receiver pipeline
    incrementally and accumulates per-bit error flags; reports overall BER/Q
    and the windowed-Q trace.
    """
    tx = cfg.tx
    spec = make_constellation(tx.constellation_order)
    k = spec.bits_per_symbol
    n_symbols = n_adc_samples // 4
    seeds = _derive_seeds(cfg.seed)

    bits = prbs_generate(tx.prbs_degree, tx.prbs_seed, k * n_symbols)
    syms = qam_map(bits, spec)

    from dataclasses import replace

    stream_cfg = replace(cfg, tx=replace(tx, dac_rate_hz=cfg.sim_rate_hz,
                                         n_symbols=n_symbols))
    front = _StreamingFrontend(stream_cfg, osnr_db, seeds["link"])

    # back-to-back: receive taps must not compensate any dispersion
    b2b = replace(stream_cfg, link=replace(stream_cfg.link, n_spans=1,
                                           span_length_km=0.0))
    pipe_cfg = make_pipeline_config(b2b, b2b.link.build())
    pipe = RxPipeline(pipe_cfg, reference_symbols=syms)

    error_flags = np.zeros(k * n_symbols, dtype=np.uint8)
    head = cfg.rx.startup_symbols + cfg.metrics.head_guard_symbols
    stop_sym = n_symbols - cfg.metrics.tail_guard_symbols
    sym_cursor = 0
    for start in range(0, n_symbols, chunk_symbols):
        chunk = syms[start:start + chunk_symbols]
        adc = front.process_symbols(chunk)
        pipe.feed(adc)
        dec, _ = pipe.drain()
        sym_cursor = _accumulate_errors(dec, sym_cursor, bits, spec, error_flags)
    dec, _ = pipe.finish()
    _accumulate_errors(dec, sym_cursor, bits, spec, error_flags)

    region = error_flags[head * k:stop_sym * k]
    n_errors = int(np.sum(region))
    ber = n_errors / len(region)
    bit_rate = tx.baud_hz * k
    series = windowed_q(region, bit_rate, cfg.metrics.windowed_q_window_s)
    qs = [q for _, q in series]
    return {
        "n_symbols": int(stop_sym - head),
        "n_bits": int(len(region)),
        "n_errors": n_errors,
        "ber": ber,
        "q_db": q_from_ber(ber) if ber > 0 else np.inf,
        "diverged": pipe.diverged,
        "windowed_q": series,
        "windowed_q_std_db": float(np.std(qs)) if len(qs) > 1 else 0.0,
    }


def _accumulate_errors(dec: np.ndarray, sym_cursor: int, bits: np.ndarray,
                       spec, error_flags: np.ndarray) -> int:
    if len(dec) == 0:
        return sym_cursor
    k = spec.bits_per_symbol
    n_total = len(error_flags) // k
    usable = min(len(dec), n_total - sym_cursor)
    if usable <= 0:
        return sym_cursor + len(dec)
    rx_bits, _ = demap(dec[:usable], spec)
    ref = bits[sym_cursor * k:(sym_cursor + usable) * k]
    error_flags[sym_cursor * k:(sym_cursor + usable) * k] = rx_bits != ref
    return sym_cursor + len(dec)


# ---------------------------------------------------------------------------
# throughput benchmark
# ---------------------------------------------------------------------------

def bench_throughput(cfg: ExperimentConfig, n_samples: int,
                     repeats: int = 3) -> dict:
    """Wall-clock throughput of the receiver chain over pre-generated input.

    The input stream is a tiled back-to-back capture (content does not affect
    arithmetic cost).  Reports the median samples/s over `repeats`, the ratio
    to the ADC rate, and the per-stage time breakdown of the last repeat.
    """
    blen = cfg.rx.buffer_len
    if n_samples < 4 * blen:
        raise ValueError("need at least 4 buffers of samples")
    base_cfg = ExperimentConfig.from_dict(cfg.to_dict())
    base_cfg.tx.n_symbols = blen // 4
    base_cfg.link.n_spans = 1
    base_cfg.link.span_length_km = 0.0
    base_cfg.link.ase_enabled = False
    bits, syms, field = build_transmit_side(base_cfg)
    current = photodetect(field, base_cfg.frontend)
    adc, _ = adc_quantize(current, base_cfg.frontend)
    reps = int(np.ceil(n_samples / len(adc.samples)))
    stream = np.tile(adc.samples, reps)[:n_samples]
    ref = np.tile(syms, reps)[:n_samples // 4]

    pipe_cfg = make_pipeline_config(base_cfg, base_cfg.link.build())
    results = []
    last_pipe = None
    for _ in range(repeats):
        pipe = RxPipeline(pipe_cfg, reference_symbols=ref)
        t0 = time.perf_counter()
        for start in range(0, n_samples, blen):
            pipe.feed(stream[start:start + blen])
        pipe.finish()
        elapsed = time.perf_counter() - t0
        results.append(n_samples / elapsed)
        last_pipe = pipe
    sps = float(np.median(results))
    stage = dict(last_pipe.stage_seconds)
    total_stage = sum(stage.values())
    return {
        "samples_per_second": sps,
        "ratio_to_adc_rate": sps / cfg.frontend.adc_rate_hz,
        "repeats": results,
        "stage_seconds": stage,
        "stage_total_seconds": total_stage,
        "wall_seconds_last": n_samples / results[-1],
    }
