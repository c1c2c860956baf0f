import numpy as np
import pytest

import molspec as ms
from molspec.constants import mev_to_angular

PAPER_GAMMA1_PER_PS = 0.231e-3
PAPER_MODES = (ms.Mode(21.55, 6.98), ms.Mode(28.60, 6.45),
               ms.Mode(31.10, 5.73), ms.Mode(36.31, 9.30))


def make_config(gamma1=PAPER_GAMMA1_PER_PS, temperature=4.7, modes=(),
                alpha=0.0, xi_mev=4.0, lv_scale=0.0, zeta_mev=10.0,
                mu=0.0, omega_c_mev=3.0, drive=None, **kwargs):
    """Physical-units config builder with quiet defaults."""
    return ms.ModelConfig(
        gamma1=gamma1,
        temperature=temperature,
        modes=tuple(modes),
        bulk_bath=ms.BulkBathParams(alpha=alpha, xi=mev_to_angular(xi_mev)),
        lv_bath=ms.LocalModeBathParams(scale=lv_scale,
                                       zeta=mev_to_angular(zeta_mev)),
        dephasing=ms.DephasingParams(mu=mu, omega_c=mev_to_angular(omega_c_mev)),
        drive=drive,
        **kwargs,
    )


@pytest.fixture(scope="session")
def alpha_dwf72():
    """Bulk coupling calibrated to a 72% zero-phonon fraction at 4.7 K."""
    return ms.solve_alpha_for_dwf(0.72, 4.7, mev_to_angular(4.0))


@pytest.fixture(scope="session")
def molecule_config(alpha_dwf72):
    """Four-mode configuration with the experimentally fitted mode list."""
    return make_config(modes=PAPER_MODES, alpha=alpha_dwf72,
                       lv_scale=0.005, mu=2.5e-7,
                       zpl_wavelength_nm=782.32)


@pytest.fixture(scope="session")
def fast_config():
    """Small, ps-rate model where brute-force references are cheap."""
    return make_config(gamma1=1.2, temperature=10.0,
                       modes=(ms.Mode(8.0, 2.4),),
                       alpha=0.01, lv_scale=0.2)


def random_density_matrix(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)
