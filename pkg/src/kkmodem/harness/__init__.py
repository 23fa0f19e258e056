from .config import ExperimentConfig, MetricsConfig, SweepSpec, preset
from .runner import bench_throughput, run_single
from .sweep import run_sweep
