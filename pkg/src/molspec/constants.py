"""Physical constants and unit conversions.

Internal unit system: energies in meV, times in ps.  Angular frequencies
and rates are in ps^-1 (energy / HBAR).  Conversions to user-facing units
(ns^-1, MHz, nm) happen only at I/O boundaries.
"""

HBAR_MEV_PS = 0.6582119569      # meV * ps
KB_MEV_PER_K = 0.08617333       # meV / K
HC_MEV_NM = 1239841.984236112   # meV * nm, photon energy E = HC / lambda

PS_INV_TO_MHZ = 1.0e6           # 1 ps^-1 = 1e12 Hz = 1e6 MHz
PER_NS_TO_PER_PS = 1.0e-3


def mev_to_angular(energy_mev):
    """Energy in meV to angular frequency in ps^-1."""
    return energy_mev / HBAR_MEV_PS


def angular_to_mev(omega_ps):
    """Angular frequency in ps^-1 to energy in meV."""
    return omega_ps * HBAR_MEV_PS


def wavelength_nm_to_detuning_mev(wavelength_nm, zpl_wavelength_nm):
    """Photon wavelength to detuning from the zero-phonon line.

    detuning = hc (1/lambda - 1/lambda_ZPL); red-shifted light (longer
    wavelength) maps to negative detuning.
    """
    return HC_MEV_NM * (1.0 / wavelength_nm - 1.0 / zpl_wavelength_nm)
