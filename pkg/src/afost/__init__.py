"""AFOST: concurrent amplify-and-forward relaying for multi-flow video streaming.

Submodules
----------
channel    Rayleigh realizations, relay gains, stacked effective channels
phy        QPSK, relay synthesis, MMSE-OSIC detection, rate estimates
baseline   direct and orthogonal cooperative AF links
fec        systematic Reed-Solomon erasure code over GF(256)
media      rate-distortion packet traces and decodability
optimizer  Lagrangian per-flow packet selection
harness    end-to-end Monte Carlo sweeps and CSV output
"""

from .config import ExperimentConfig, load_config
from .fec import FecConfig
from .harness import ExperimentResult, compare_modes, run_experiment, sweep_to_csv
from .media import MediaPacket, StreamConfig

__all__ = ["ExperimentConfig", "ExperimentResult", "FecConfig", "MediaPacket", "StreamConfig",
           "compare_modes", "load_config", "run_experiment", "sweep_to_csv"]
__version__ = "0.1.0"
