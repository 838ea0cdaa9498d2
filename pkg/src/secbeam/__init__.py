"""Secure transmit beamforming for multi-user MISO IoT downlinks.

Synthesizes rate-splitting beamformers with artificial noise jamming that
maximize the focused secrecy sum-rate under per-antenna power limits,
private-stream SINR targets and a probabilistic eavesdropping constraint,
and evaluates secrecy performance by Monte-Carlo simulation.
"""

from . import _threads  # noqa: F401  (pins BLAS to one thread; must come first)
from .scenario import SystemConfig, Geometry, load_scenario, save_scenario, validate_config
from .channel import ChannelSet, build_channels, path_loss_db, steering, sample_eve_channels
from .secrecy_stats import phi_inv, phi_cdf, compute_xi, lmi_margin
from .metrics import (
    BeamformingSolution,
    SinrReport,
    iod_sinrs,
    eve_sinrs,
    fssr_objective,
    system_ssr,
    extract_rank1,
)
from .stage1 import run_algorithm1
from .stage2 import run_algorithm2
from .minimax import run_algorithm3
from .baselines import mrt_solution, noan_rs_solution, secrecy_upper_bound

__version__ = "0.1.0"
