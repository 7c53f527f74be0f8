"""Continuous-time AFDM simulation: transforms, pulse-shaped synthesis, channels, receivers and bounds."""

from .bounds import CrbConfig, crb_closed_afdm, crb_closed_ofdm, crb_numeric, fim_numeric
from .channel import (ChannelPath, DsChannel, EffectiveChannel, PnCfoParams, SjParams, dirichlet_kernel,
                      dt_reference_channel, effective_channel_ideal, effective_channel_pn_cfo,
                      effective_channel_sj, impulse_response, sample_realization)
from .receiver import (RxConfig, ct_pipeline, detect, lmmse_matrix, mismatched_sinr, monte_carlo_ber, qam_demap,
                       qam_map, sinr_per_symbol, theoretical_ber)
from .spectrum import PsdGrid, analytic_psd, oob_energy, welch_psd
from .transforms import ChirpFrame, DaftParams, daft, idaft
from .waveform import ActiveSet, PulseShape, WaveformConfig, synthesize_fd, synthesize_td

__version__ = "0.1.0"
