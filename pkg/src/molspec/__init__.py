"""Simulation and fitting toolkit for a single organic emitter coupled to
local vibrational modes and a thermal phonon bath: emission spectra with
phonon sidebands, temperature-dependent zero-phonon-line broadening, and
driven second-order photon correlations."""

from .bath import (BulkBathParams, DephasingParams, LocalModeBathParams,
                   PhononCorrelation, bose_occupation, debye_waller, j_bulk,
                   j_lv, lv_damping_rate, mean_displacement,
                   mode_displacement_expectation, phi, phonon_correlation_g,
                   pure_dephasing_rate, solve_alpha_for_dwf)
from .errors import ConfigError, DataError, NumericalError, QuadratureError
from .model import (AssembledModel, DriveParams, Mode, ModelConfig,
                    assemble_driven, assemble_undriven, config_from_dict,
                    config_to_dict, initial_emission_state, polaron_shift_mev,
                    renormalized_rabi, undriven_rates)
from .observables import (CorrelationTrace, GridSpec, SpectrumResult,
                          convolve_jitter, emission_spectrum,
                          estimate_oscillation_frequency, g2_nonresonant_model,
                          g2_resonant, gamma2, peak_table,
                          power_broadened_linewidth, zpl_fwhm_mev)
from .qcore import (CompositeSpace, Liouvillian, Operator, SampledFunction,
                    build_liouvillian, build_space, embed_operator, evolve,
                    regression_correlator, steady_state,
                    time_integrated_source)

__version__ = "0.1.0"
