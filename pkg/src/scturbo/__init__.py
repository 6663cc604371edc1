"""Erasure-channel analysis of spatially coupled turbo-like codes.

Exact component transfer functions, density evolution for coupled and
uncoupled parallel/serial concatenations, threshold search, and a
finite-length Monte Carlo simulator with an erasure message-passing
decoder.
"""

from .bcjr import (ERASED, ErasureBcjr, OracleEstimate, bcjr_erasure_decode,
                   decoder_for, encode_batch, mc_transfer_oracle)
from .de import (DEParams, DEResult, DEState, aposteriori_profile,
                 box_average, coupled_prior, de_fixed_point, de_step,
                 effective_erasure, initial_state, pcc_step, scc_step,
                 triangle_average)
from .ensemble import FAMILIES, EnsembleSpec, ensemble_from_config
from .simulate import (DecodeResult, SweepPoint, build_instance, decode_chain,
                       encode_chain, simulated_profiles, sweep, transmit)
from .thresholds import (BPThreshold, MapAreaError, MapEstimate, Probe,
                         ScanMonotonicityError, ThresholdReport, bp_exit_curve,
                         bp_threshold, emit_table, map_threshold, tabulate)
from .transfer import (PATTERN_ORDER, SubsetChain, TransferFunction,
                       TransferPoint, build_subset_chain,
                       stationary_distribution, transfer)
from .trellis import GeneratorSpec, Trellis, build_trellis, encode

__version__ = "0.1.0"

__all__ = [
    "ERASED", "ErasureBcjr", "OracleEstimate", "bcjr_erasure_decode",
    "decoder_for", "encode_batch", "mc_transfer_oracle",
    "DEParams", "DEResult", "DEState", "aposteriori_profile", "box_average",
    "coupled_prior", "de_fixed_point", "de_step", "effective_erasure",
    "initial_state", "pcc_step", "scc_step", "triangle_average",
    "FAMILIES", "EnsembleSpec", "ensemble_from_config",
    "DecodeResult", "SweepPoint", "build_instance", "decode_chain",
    "encode_chain", "simulated_profiles", "sweep", "transmit",
    "BPThreshold", "MapAreaError", "MapEstimate", "Probe",
    "ScanMonotonicityError", "ThresholdReport", "bp_exit_curve",
    "bp_threshold", "emit_table", "map_threshold", "tabulate",
    "PATTERN_ORDER", "SubsetChain", "TransferFunction", "TransferPoint",
    "build_subset_chain", "stationary_distribution", "transfer",
    "GeneratorSpec", "Trellis", "build_trellis", "encode",
    "__version__",
]
