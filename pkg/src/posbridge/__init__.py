"""Random walks conditioned to stay positive: exact kernels, renewal
functions, bridge samplers and desk-scale checks of the limit theorems."""

from .errors import PosBridgeError
from .fluctuation import (
    ladder_law,
    renewal_for,
    renewal_table,
    tail_ratio_sequence,
    zeta,
)
from .kernels import q_plus, survival_sequence, transition_pmf
from .samplers import bridge_pmf_exact, sample_bridges, sample_up_walks
from .steps import PRESETS, StableParams, StepLaw, make_step_law, norming

__all__ = [
    "PRESETS",
    "PosBridgeError",
    "StableParams",
    "StepLaw",
    "bridge_pmf_exact",
    "ladder_law",
    "make_step_law",
    "norming",
    "q_plus",
    "renewal_for",
    "renewal_table",
    "sample_bridges",
    "sample_up_walks",
    "survival_sequence",
    "tail_ratio_sequence",
    "transition_pmf",
    "zeta",
]
