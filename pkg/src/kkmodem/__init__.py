"""Software-defined optical modem and link simulator.

A minimum-phase QAM transmitter, a multi-span amplified fiber channel, a
direct-detection front end, and a streaming Kramers-Kronig receiver DSP
chain, plus a sweep harness that measures Q-factor, reach and throughput.
"""

from .sigcore import (
    BlockPlan,
    ComplexSignal,
    FirFilter,
    ParameterError,
    RealSignal,
    design_rrc,
    frequency_shift,
    overlap_save_filter,
    resample_rational,
)
from .txdsp import ConstellationSpec, TxConfig, make_constellation
from .channel import FiberSpan, LinkConfig
from .frontend import FrontendConfig
from .rxdsp import RxPipeline, RxPipelineConfig
from .metrics import FecThreshold, MetricsReport

__version__ = "0.1.0"
