"""Diversity-fidelity laboratory for analog MIMO joint source-channel codes."""

__version__ = "0.1.0"

from .bounds import (
    DimensionHypothesis,
    TradeoffCurve,
    corollary_gap,
    d0_upper,
    eigen_outage_exponent,
    figure1_curves,
    optimal_diversity,
    thm1_upper,
    thm2_fidelity_ceiling,
)
from .channel import (
    ChannelRealization,
    NoiseScale,
    SystemConfig,
    eigen_exponents,
    eigen_tail_probability,
    sample_channel,
    transmit,
)
from .dimension import (
    BoxOccupancy,
    ModulationPointCloud,
    box_census,
    box_count,
    effective_box_count,
    effective_dimension,
    fit_dimension,
)
from .errors import ConfigurationError, DomainError, EstimationError
from .lab import (
    conditional_distortion,
    diversity_estimate,
    fidelity_event_probability,
    fidelity_sweep,
)
from .mapping import DecoderSpec, MappingDescriptor, decode, encode, sample_cloud
from .stats import ExponentEstimate
