"""Weighted sum-rate simulator for a dual-side omni-surface full-duplex MIMO link."""

from .algorithm import (ConvergenceTrace, RunConfig, RunResult, Scheme, SchemeSpec,
                        apply_scheme, initial_beamformers, initial_ios,
                        quantize_phases, run_algorithm2)
from .beamformers import DualState, bisect_multiplier, update_beamformers
from .campaign import (CampaignConfig, ResultRow, config_from_dict, emit_figure_data,
                       execute_run, load_config, run_campaign, write_campaign)
from .channels import ChannelSet, FadingParams, sample_channels
from .errors import (ConfigError, ConvergenceError, GeometryError, IosfdError,
                     NumericalError)
from .geometry import GeometryConfig, SpatialLayout, antenna_gain, build_layout
from .phases import (PgdSettings, PhaseQuadratic, QuadraticFormSet,
                     build_quadratic_forms, project_feasible, solve_qcqp, vectorize)
from .system import (BeamformerSet, EffectiveChannels, IosState, RateReport,
                     compose_direct, compose_effective, downlink_rate, uplink_rate,
                     weighted_sum_rate)
from .wmmse import (WmmseState, mse_matrix_down, mse_matrix_up, optimal_decoder_down,
                    optimal_decoder_up, optimal_weight_down, optimal_weight_up,
                    surrogate_objective, update_state)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
