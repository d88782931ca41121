"""Desk-scale simulator of a Gaussian-modulated CV-QKD link with
RF-heterodyne detection.

The package models the full chain: symbol generation, transmit DSP (RRC
shaping, single-sideband displacement, pilots, Zadoff-Chu preamble), an
emulated fiber channel and trusted coherent receiver, Bob's recovery DSP,
covariance-based parameter estimation, and secret-key-rate analysis
(asymptotic and finite-size), plus offline receiver characterization.

Unit conventions are documented in :mod:`cvqkdsim.snu`.
"""

from .config import ConfigError, DspConfig
from .frames import (Domain, GAUSSIAN, IQFrame, ModulationKind,
                     ModulationSpec, SymbolFrame)
from .snu import (CalibrationError, SnuCalibration, calibrate_noise,
                  normalize_to_snu, photons_per_symbol)
from .modulation import (entropy_source, gen_gaussian, gen_pcs_qam, gen_psk,
                         gen_qam, scale_to_va)
from .filters import FilterTaps, rrc_taps
from .txdsp import (add_pilots, assemble_frame, build_tx_frame,
                    frequency_shift, make_preamble, upsample_and_shape,
                    zadoff_chu)
from .linksim import (ChannelParams, GroundTruth, ReceiverModel,
                      apply_channel, apply_clock_skew,
                      apply_laser_impairments, detect, noise_traces,
                      simulate_link)
from .rxdsp import (FrameRejected, PilotEstimate, RecoveredFrame, SyncResult,
                    carrier_recover, correct_clock, downconvert_and_match,
                    estimate_pilots, global_phase_align, optimal_downsample,
                    phase_correct, receive_frame, synchronize)
from .estimation import (EstimationResult, disclose_split,
                         estimate_excess_noise, estimate_frame,
                         estimate_transmittance, estimate_va, run_estimation)
from .keyrate import (KeyRateReport, LinkParams, SecurityParams,
                      asymptotic_skr, finite_size_skr, g_function,
                      holevo_bound, mutual_information, skr_sweep)
from .characterization import (DEFAULT_CLEARANCE_POINTS, LinearityFit,
                               PsdCurve, bandwidth_at_clearance,
                               clearance_curve, clearance_profile,
                               compute_psd, linearity_fit,
                               responsivity_efficiency)
from .frameio import FrameFormatError, load_frames, persist_frames
from .experiment import (ExperimentConfig, FrameRecord, RunReport,
                         emit_results, run_experiment, sweep_to_csv, va_sweep)

__version__ = "0.1.0"
