"""Master-equation assembly for the driven and undriven emitter.

Builds the polaron-frame generator acting on the TLS (x) truncated-mode
space: spontaneous emission through the dressed dipole, pure dephasing,
thermal absorption/decay of each vibrational mode, and (driven case) the
coherent drive plus an eigenoperator-decomposed drive dissipator whose
rates follow from the bath displacement correlation.

The frame rotates at the polaron-shifted zero-phonon line, so the system
Hamiltonian contains only the mode energies (plus drive terms); spectra
computed from this generator are functions of detuning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bath, qcore
from .bath import (BulkBathParams, DephasingParams, LocalModeBathParams,
                   phi_decay_window)
from .constants import HBAR_MEV_PS, PER_NS_TO_PER_PS, mev_to_angular
from .errors import ConfigError, NumericalError
from .numerics import simpson_weights

MAX_CONFIG_MODES = 6
DRIVE_RATE_FLOOR = -1e-12
BOHR_GROUP_TOL_MEV = 1e-9


@dataclass(frozen=True)
class Mode:
    """One local vibrational mode: energy and linear coupling, both meV."""

    delta_mev: float
    eta_mev: float

    def __post_init__(self):
        if self.delta_mev <= 0:
            raise ConfigError("mode energy delta_meV must be > 0")

    @property
    def ratio(self) -> float:
        """Displacement ratio eta / delta."""
        return self.eta_mev / self.delta_mev


@dataclass(frozen=True)
class DriveParams:
    """Continuous resonant drive: Rabi energy, detuning from the
    polaron-shifted ZPL, and whether to keep the O(Omega^2) drive
    dissipator."""

    rabi_mev: float
    detuning_mev: float = 0.0
    include_dissipator: bool = True

    def __post_init__(self):
        if self.rabi_mev < 0:
            raise ConfigError("drive rabi_meV must be >= 0")


@dataclass(frozen=True)
class ModelConfig:
    """Complete physical parameter set (internal units: ps^-1, meV, K)."""

    gamma1: float                       # spontaneous rate, ps^-1
    temperature: float                  # K
    modes: tuple[Mode, ...]
    bulk_bath: BulkBathParams
    lv_bath: LocalModeBathParams
    dephasing: DephasingParams
    drive: DriveParams | None = None
    zpl_wavelength_nm: float | None = None
    jitter_fwhm_ps: float | None = None
    initial_modes_ground: bool = False
    instrument_fwhm_mev: float | None = None

    def __post_init__(self):
        if self.gamma1 <= 0:
            raise ConfigError("gamma1 must be > 0")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if len(self.modes) > MAX_CONFIG_MODES:
            raise ConfigError(f"at most {MAX_CONFIG_MODES} modes supported")
        deltas = [m.delta_mev for m in self.modes]
        for i, a in enumerate(deltas):
            for b in deltas[i + 1:]:
                if abs(a - b) < 1e-6:
                    raise ConfigError(
                        f"mode energies must be distinct; got {a} and {b} meV")

    def with_temperature(self, temperature: float) -> "ModelConfig":
        return _replace(self, temperature=temperature)

    def with_drive(self, drive: DriveParams | None) -> "ModelConfig":
        return _replace(self, drive=drive)

    def with_modes(self, modes) -> "ModelConfig":
        return _replace(self, modes=tuple(modes))


def _replace(config: ModelConfig, **changes) -> ModelConfig:
    import dataclasses
    return dataclasses.replace(config, **changes)


# ---------------------------------------------------------------------------
# config (de)serialization with strict, unit-suffixed keys

def _take(section: dict, context: str, required: dict, optional: dict):
    """Pull typed values out of one config section, rejecting unknown keys."""
    unknown = set(section) - set(required) - set(optional)
    if unknown:
        raise ConfigError(
            f"unknown key(s) in {context}: {', '.join(sorted(unknown))}")
    out = {}
    for key, conv in required.items():
        if key not in section:
            raise ConfigError(f"missing required field '{key}' in {context}")
        out[key] = conv(section[key])
    for key, conv in optional.items():
        if key in section and section[key] is not None:
            out[key] = conv(section[key])
    return out


def config_from_dict(raw: dict) -> ModelConfig:
    """Build a ModelConfig from the unit-suffixed nested-dict form."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    top = _take(
        raw, "config",
        required={"gamma1_per_ns": float, "temperature_K": float,
                  "modes": list, "bulk_bath": dict, "lv_bath": dict,
                  "dephasing": dict},
        optional={"drive": dict, "zpl_wavelength_nm": float,
                  "jitter_fwhm_ps": float, "initial_modes_ground": bool,
                  "instrument_fwhm_meV": float},
    )

    modes = []
    for k, entry in enumerate(top["modes"]):
        m = _take(entry, f"modes[{k}]",
                  required={"delta_meV": float, "eta_meV": float}, optional={})
        modes.append(Mode(delta_mev=m["delta_meV"], eta_mev=m["eta_meV"]))

    bb = _take(top["bulk_bath"], "bulk_bath",
               required={"alpha_ps2": float, "xi_meV": float},
               optional={"omega_max_meV": float, "n_points": int})
    bulk = BulkBathParams(
        alpha=bb["alpha_ps2"],
        xi=mev_to_angular(bb["xi_meV"]),
        omega_max=mev_to_angular(bb["omega_max_meV"]) if "omega_max_meV" in bb else 0.0,
        n_points=bb.get("n_points", 1024),
    )

    lv = _take(top["lv_bath"], "lv_bath",
               required={"scale": float, "zeta_meV": float}, optional={})
    lv_bath = LocalModeBathParams(scale=lv["scale"],
                                  zeta=mev_to_angular(lv["zeta_meV"]))

    de = _take(top["dephasing"], "dephasing",
               required={"mu_ps7": float, "omega_c_meV": float}, optional={})
    dephasing = DephasingParams(mu=de["mu_ps7"],
                                omega_c=mev_to_angular(de["omega_c_meV"]))

    drive = None
    if "drive" in top:
        dr = _take(top["drive"], "drive",
                   required={"rabi_meV": float},
                   optional={"detuning_meV": float,
                             "include_drive_dissipator": bool})
        drive = DriveParams(rabi_mev=dr["rabi_meV"],
                            detuning_mev=dr.get("detuning_meV", 0.0),
                            include_dissipator=dr.get("include_drive_dissipator", True))

    return ModelConfig(
        gamma1=top["gamma1_per_ns"] * PER_NS_TO_PER_PS,
        temperature=top["temperature_K"],
        modes=tuple(modes),
        bulk_bath=bulk,
        lv_bath=lv_bath,
        dephasing=dephasing,
        drive=drive,
        zpl_wavelength_nm=top.get("zpl_wavelength_nm"),
        jitter_fwhm_ps=top.get("jitter_fwhm_ps"),
        initial_modes_ground=top.get("initial_modes_ground", False),
        instrument_fwhm_mev=top.get("instrument_fwhm_meV"),
    )


def config_to_dict(config: ModelConfig) -> dict:
    """Inverse of config_from_dict (unit-suffixed keys)."""
    out = {
        "gamma1_per_ns": config.gamma1 / PER_NS_TO_PER_PS,
        "temperature_K": config.temperature,
        "modes": [{"delta_meV": m.delta_mev, "eta_meV": m.eta_mev}
                  for m in config.modes],
        "bulk_bath": {
            "alpha_ps2": config.bulk_bath.alpha,
            "xi_meV": config.bulk_bath.xi * HBAR_MEV_PS,
            "omega_max_meV": config.bulk_bath.omega_max * HBAR_MEV_PS,
            "n_points": config.bulk_bath.n_points,
        },
        "lv_bath": {
            "scale": config.lv_bath.scale,
            "zeta_meV": config.lv_bath.zeta * HBAR_MEV_PS,
        },
        "dephasing": {
            "mu_ps7": config.dephasing.mu,
            "omega_c_meV": config.dephasing.omega_c * HBAR_MEV_PS,
        },
    }
    if config.drive is not None:
        out["drive"] = {
            "rabi_meV": config.drive.rabi_mev,
            "detuning_meV": config.drive.detuning_mev,
            "include_drive_dissipator": config.drive.include_dissipator,
        }
    for key, value in (("zpl_wavelength_nm", config.zpl_wavelength_nm),
                       ("jitter_fwhm_ps", config.jitter_fwhm_ps),
                       ("instrument_fwhm_meV", config.instrument_fwhm_mev)):
        if value is not None:
            out[key] = value
    if config.initial_modes_ground:
        out["initial_modes_ground"] = True
    return out


# ---------------------------------------------------------------------------
# rates and assembly

@dataclass(frozen=True)
class RateSet:
    """All scalar rates entering the generator (angular, ps^-1)."""

    gamma1: float
    gamma_pd: float
    gamma2: float
    deltas: tuple                 # mode frequencies
    ratios: tuple                 # eta_i / delta_i
    kappas: tuple
    occupations: tuple            # n(delta_i)
    gamma_plus: tuple             # kappa_i * n_i
    gamma_minus: tuple            # kappa_i * (n_i + 1)
    mean_b: float
    mode_b: tuple                 # <B_i> per mode
    polaron_shift_mev: float


@dataclass(frozen=True)
class DriveDissipatorInfo:
    """Diagnostics of the eigenoperator drive dissipator."""

    bohr: tuple                   # distinct Bohr frequencies, ps^-1
    rates_x: tuple                # Lindblad rate per Bohr frequency (X channel)
    rates_y: tuple


@dataclass(frozen=True)
class AssembledModel:
    space: qcore.CompositeSpace
    liouvillian: qcore.Liouvillian
    sigma_a: qcore.Operator
    rates: RateSet
    renormalized_rabi: float | None = None      # ps^-1, driven only
    drive_info: DriveDissipatorInfo | None = field(default=None, repr=False)


def undriven_rates(config: ModelConfig) -> RateSet:
    """Evaluate every rate in the undriven generator without building it."""
    gamma_pd = bath.pure_dephasing_rate(config.temperature, config.dephasing)
    deltas, ratios, kappas, occs, g_plus, g_minus, mode_b = [], [], [], [], [], [], []
    for m in config.modes:
        delta = mev_to_angular(m.delta_mev)
        kap = bath.lv_damping_rate(delta, config.lv_bath)
        n = bath.bose_occupation(m.delta_mev, config.temperature)
        deltas.append(delta)
        ratios.append(m.ratio)
        kappas.append(kap)
        occs.append(n)
        g_plus.append(kap * n)
        g_minus.append(kap * (n + 1.0))
        mode_b.append(bath.mode_displacement_expectation(
            m.eta_mev, m.delta_mev, config.temperature))
    return RateSet(
        gamma1=config.gamma1,
        gamma_pd=gamma_pd,
        gamma2=config.gamma1 / 2.0 + gamma_pd,
        deltas=tuple(deltas),
        ratios=tuple(ratios),
        kappas=tuple(kappas),
        occupations=tuple(occs),
        gamma_plus=tuple(g_plus),
        gamma_minus=tuple(g_minus),
        mean_b=bath.mean_displacement(config.temperature, config.bulk_bath),
        mode_b=tuple(mode_b),
        polaron_shift_mev=polaron_shift_mev(config),
    )


def polaron_shift_mev(config: ModelConfig) -> float:
    """Energy lowering from displacing modes and bath:
    sum_i eta_i^2/delta_i + hbar * integral J(w)/w dw (Gaussian cutoff:
    alpha * sqrt(pi)/4 * xi^3)."""
    mode_part = sum(m.eta_mev**2 / m.delta_mev for m in config.modes)
    bb = config.bulk_bath
    bath_part = HBAR_MEV_PS * bb.alpha * np.sqrt(np.pi) / 4.0 * bb.xi**3
    return float(mode_part + bath_part)


def _base_pieces(config: ModelConfig, rates: RateSet):
    space = qcore.build_space(len(config.modes))
    h = np.zeros((space.dim, space.dim), dtype=complex)
    for i, delta in enumerate(rates.deltas):
        h += delta * qcore.number(space, i).data
    sigma_a = qcore.dressed_sigma(space, rates.ratios)
    lindblads = [(sigma_a, rates.gamma1),
                 (qcore.sigma_dag_sigma(space), 2.0 * rates.gamma_pd)]
    for i in range(space.n_modes):
        a = qcore.annihilation(space, i)
        lindblads.append((a.dag(), rates.gamma_plus[i]))
        lindblads.append((a, rates.gamma_minus[i]))
    return space, h, sigma_a, lindblads


def assemble_undriven(config: ModelConfig) -> AssembledModel:
    """Generator for spontaneous emission: dressed-dipole decay, pure
    dephasing, and thermal mode damping, in the rotating polaron frame."""
    rates = undriven_rates(config)
    space, h, sigma_a, lindblads = _base_pieces(config, rates)
    L = qcore.build_liouvillian(qcore.Operator(space, h), lindblads)
    return AssembledModel(space=space, liouvillian=L, sigma_a=sigma_a,
                          rates=rates)


def renormalized_rabi(config: ModelConfig) -> float:
    """Observed Rabi frequency Omega <B> prod_i <B_i>, angular ps^-1."""
    if config.drive is None:
        raise ConfigError("config has no drive section")
    rates = undriven_rates(config)
    mode_product = float(np.prod(rates.mode_b)) if rates.mode_b else 1.0
    return mev_to_angular(config.drive.rabi_mev) * rates.mean_b * mode_product


def assemble_driven(config: ModelConfig) -> AssembledModel:
    """Driven generator: adds the coherent drive (Omega <B> / 2)(sigma_a +
    sigma_a^dag) and detuning to the Hamiltonian and, optionally, the
    second-order drive dissipator."""
    if config.drive is None:
        raise ConfigError("assemble_driven needs a drive section")
    rates = undriven_rates(config)
    space, h, sigma_a, lindblads = _base_pieces(config, rates)

    omega = mev_to_angular(config.drive.rabi_mev)
    delta_p = mev_to_angular(config.drive.detuning_mev)
    h = h + delta_p * qcore.sigma_dag_sigma(space).data
    h = h + 0.5 * omega * rates.mean_b * (sigma_a.data + sigma_a.data.conj().T)

    drive_info = None
    if config.drive.include_dissipator and omega > 0 and config.bulk_bath.alpha > 0:
        terms, drive_info = _drive_dissipator_terms(
            h, sigma_a.data, omega, config.temperature, config.bulk_bath)
        for mat, rate in terms:
            lindblads.append((qcore.Operator(space, mat), rate))

    L = qcore.build_liouvillian(qcore.Operator(space, h), lindblads)
    return AssembledModel(space=space, liouvillian=L, sigma_a=sigma_a,
                          rates=rates, renormalized_rabi=renormalized_rabi(config),
                          drive_info=drive_info)


def _group_values(values: np.ndarray, tol: float):
    """Cluster sorted scalars whose gaps are below tol; return group reps
    and the index of each value's group."""
    order = np.argsort(values)
    reps, assign = [], np.empty(len(values), dtype=int)
    for rank, idx in enumerate(order):
        v = values[idx]
        if reps and v - reps[-1][0] < tol:
            center, members = reps[-1]
            reps[-1] = (center, members + [idx])
        else:
            reps.append((v, [idx]))
        assign[idx] = len(reps) - 1
    return [r[0] for r in reps], assign


def _drive_dissipator_terms(h: np.ndarray, sigma_a: np.ndarray, omega: float,
                            temperature: float, bulk: BulkBathParams):
    """Secular eigenoperator dissipator of the residual drive-bath coupling.

    The drive couples X = sigma_a + sigma_a^dag and Y = i(sigma_a -
    sigma_a^dag) to bath displacement fluctuations with correlation
    functions C_xx = <B>^2 (e^phi + e^-phi - 2)/2 and C_yy = <B>^2
    (e^phi - e^-phi)/2.  Each Bohr frequency xi of the system Hamiltonian
    receives a Lindblad channel with rate (Omega/2)^2 * 2 Re K(xi); Lamb
    shifts are dropped.
    """
    evals, U = np.linalg.eigh(h)
    x_full = sigma_a + sigma_a.conj().T
    y_full = 1j * (sigma_a - sigma_a.conj().T)
    x_eig = U.conj().T @ x_full @ U
    y_eig = U.conj().T @ y_full @ U

    bohr = evals[None, :] - evals[:, None]       # xi_ab = w_b - w_a
    group_tol = mev_to_angular(BOHR_GROUP_TOL_MEV)
    reps, assign = _group_values(bohr.ravel(), group_tol)
    reps = np.asarray(reps)

    # bath response at every distinct Bohr frequency
    tau_max = phi_decay_window(temperature, bulk, rel=1e-9)
    dtau = min(0.15 / max(np.max(np.abs(reps)), 1.0), 0.01)
    n_tau = int(np.ceil(tau_max / dtau))
    n_tau += n_tau % 2                            # even interval count
    tau = np.linspace(0.0, tau_max, n_tau + 1)
    phi_tau = bath.phi(tau, temperature, bulk)
    b2 = bath.debye_waller(temperature, bulk)
    c_xx = 0.5 * b2 * (np.exp(phi_tau) + np.exp(-phi_tau) - 2.0)
    c_yy = 0.5 * b2 * (np.exp(phi_tau) - np.exp(-phi_tau))
    w_simp = simpson_weights(len(tau), tau[1] - tau[0])
    kernel = np.exp(1j * np.outer(reps, tau))
    g_x = 2.0 * np.real(kernel @ (w_simp * c_xx)) * (omega / 2.0) ** 2
    g_y = 2.0 * np.real(kernel @ (w_simp * c_yy)) * (omega / 2.0) ** 2

    terms = []
    rates_x, rates_y = [], []
    assign = assign.reshape(bohr.shape)
    for g_idx in range(len(reps)):
        mask = assign == g_idx
        for mat_eig, g_val, sink in ((x_eig, g_x[g_idx], rates_x),
                                     (y_eig, g_y[g_idx], rates_y)):
            if g_val < DRIVE_RATE_FLOOR:
                raise NumericalError(
                    f"drive dissipator rate {g_val:.3e} at Bohr frequency "
                    f"{reps[g_idx]:.6f} ps^-1 is negative beyond tolerance")
            g_val = max(g_val, 0.0)
            sink.append(g_val)
            comp = np.where(mask, mat_eig, 0.0)
            if g_val > 0.0 and np.max(np.abs(comp)) > 1e-14:
                terms.append((U @ comp @ U.conj().T, g_val))
    info = DriveDissipatorInfo(bohr=tuple(reps.tolist()),
                               rates_x=tuple(rates_x), rates_y=tuple(rates_y))
    return terms, info


def initial_mode_matrix(config: ModelConfig) -> np.ndarray:
    """Vibrational part of the emission initial state: thermal populations
    per mode (default) or the ground state when initial_modes_ground is set."""
    rho = np.eye(1, dtype=complex)
    for m in config.modes:
        if config.initial_modes_ground:
            p1 = 0.0
        else:
            n = bath.bose_occupation(m.delta_mev, config.temperature)
            p1 = n / (2.0 * n + 1.0)
        rho = np.kron(rho, np.diag([1.0 - p1, p1]).astype(complex))
    return rho


def initial_emission_state(config: ModelConfig) -> qcore.Operator:
    """Excited TLS with the vibrational state from initial_mode_matrix."""
    space = qcore.build_space(len(config.modes))
    excited = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
    return qcore.Operator(space, np.kron(excited, initial_mode_matrix(config)))
