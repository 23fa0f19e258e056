"""Experiment configuration: one JSON document describing transmitter, link,
front end, receiver, metrics and an optional sweep."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from ..channel import FiberSpan, LinkConfig
from ..frontend import FrontendConfig
from ..metrics import FecThreshold
from ..sigcore import ParameterError
from ..txdsp import TxConfig

SWEEP_AXES = ("cspr_db", "rel_launch_db", "distance_km", "format", "osnr_db")

# Example HD-FEC operating points.  The BER limits are placeholders for
# user-supplied code thresholds, not normative values.
DEFAULT_FEC = [
    {"name": "hd7", "overhead_fraction": 0.067, "ber_limit": 3.8e-3},
    {"name": "hd20", "overhead_fraction": 0.20, "ber_limit": 2.7e-2},
]


@dataclass
class LinkParams:
    """JSON-friendly homogeneous link description."""

    n_spans: int = 100
    span_length_km: float = 100.0
    loss_db_per_km: float = 0.154
    dispersion_ps_nm_km: float = 20.0
    gamma_per_w_km: float = 0.8
    total_launch_dbm: float = 20.0
    rel_launch_db: float = 0.0
    edfa_noise_figure_db: float = 5.0
    center_wavelength_nm: float = 1550.116
    monitor_every_n_spans: int = 20
    nonlinearity_enabled: bool = False
    phase_noise_linewidth_hz: float = 100e3
    ase_enabled: bool = True
    ssfm_step_km: float = 1.0

    def build(self) -> LinkConfig:
        span = FiberSpan(
            length_km=self.span_length_km,
            loss_db_per_km=self.loss_db_per_km,
            dispersion_ps_nm_km=self.dispersion_ps_nm_km,
            gamma_per_w_km=self.gamma_per_w_km,
        )
        return LinkConfig(
            spans=[span for _ in range(self.n_spans)],
            total_launch_dbm=self.total_launch_dbm,
            rel_launch_db=self.rel_launch_db,
            edfa_noise_figure_db=self.edfa_noise_figure_db,
            center_wavelength_nm=self.center_wavelength_nm,
            monitor_every_n_spans=self.monitor_every_n_spans,
            nonlinearity_enabled=self.nonlinearity_enabled,
            phase_noise_linewidth_hz=self.phase_noise_linewidth_hz,
            ase_enabled=self.ase_enabled,
            ssfm_step_km=self.ssfm_step_km,
        )


@dataclass
class RxParams:
    kk_fft_size: int = 1024
    buffer_len: int = 1 << 22
    static_fft_size: int = 32768
    static_n_taps: int = 203
    mu: float = 1e-3
    startup_symbols: int = 10_000
    widely_linear: bool = True
    carrier_removal: bool = True
    carrier_segment_len: int = 1 << 16
    sync_symbols: int = 4096
    sync_wait_samples: int = 1 << 16
    designed_taps: bool = True          # ISI-LS receive taps vs plain CD inverse
    compensate_frontend: bool = True    # include front-end droop in the design
    osnr_override_db: float | None = None  # noise loading at the receiver input


@dataclass
class MetricsConfig:
    fec_thresholds: list = field(default_factory=lambda: [dict(d) for d in DEFAULT_FEC])
    windowed_q_window_s: float = 0.021
    head_guard_symbols: int = 2048
    tail_guard_symbols: int = 4096

    def thresholds(self) -> list[FecThreshold]:
        return [FecThreshold(**d) for d in self.fec_thresholds]


@dataclass
class SweepSpec:
    axis: str
    values: list

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ParameterError(f"sweep axis must be one of {SWEEP_AXES}")
        if not self.values:
            raise ParameterError("sweep values must be nonempty")


@dataclass
class ExperimentConfig:
    tx: TxConfig = field(default_factory=TxConfig)
    link: LinkParams = field(default_factory=LinkParams)
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    rx: RxParams = field(default_factory=RxParams)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    sweep: SweepSpec | None = None
    seed: int = 0
    sim_rate_hz: float = 16e9
    common_noise_seeds: bool = True  # variance reduction across sweep points

    def to_dict(self) -> dict:
        d = {
            "tx": asdict(self.tx),
            "link": asdict(self.link),
            "frontend": asdict(self.frontend),
            "rx": asdict(self.rx),
            "metrics": asdict(self.metrics),
            "sweep": asdict(self.sweep) if self.sweep else None,
            "seed": self.seed,
            "sim_rate_hz": self.sim_rate_hz,
            "common_noise_seeds": self.common_noise_seeds,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(
            tx=TxConfig(**d.get("tx", {})),
            link=LinkParams(**d.get("link", {})),
            frontend=FrontendConfig(**d.get("frontend", {})),
            rx=RxParams(**d.get("rx", {})),
            metrics=MetricsConfig(**d.get("metrics", {})),
            sweep=SweepSpec(**d["sweep"]) if d.get("sweep") else None,
            seed=d.get("seed", 0),
            sim_rate_hz=d.get("sim_rate_hz", 16e9),
            common_noise_seeds=d.get("common_noise_seeds", True),
        )

    def save(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def preset(name: str) -> ExperimentConfig:
    """Shipped configurations: 'paper' full scale, 'ci' minutes-scale."""
    if name == "paper":
        return ExperimentConfig(
            tx=TxConfig(n_symbols=1 << 20, cspr_db=10.0),
            link=LinkParams(),
            rx=RxParams(buffer_len=1 << 22),
        )
    if name == "ci":
        return ExperimentConfig(
            tx=TxConfig(n_symbols=1 << 17, cspr_db=10.0),
            link=LinkParams(n_spans=10, monitor_every_n_spans=2),
            rx=RxParams(buffer_len=1 << 18),
        )
    raise ParameterError(f"unknown preset '{name}'")
