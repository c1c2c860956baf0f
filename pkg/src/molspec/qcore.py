"""Composite Hilbert space, operator algebra and Liouvillian dynamics.

The composite space is a two-level electronic system (TLS) tensored with
N vibrational modes, each truncated to its ground and first excited
state.  Basis ordering is fixed: the TLS factor comes first with levels
(g, e), followed by the modes in index order with levels (0, 1).  Basis
index i decomposes as i = tls * 2**n_modes + sum_k occ_k * 2**(n_modes-1-k),
i.e. the TLS occupies the most significant bit.

Density operators are column-vectorized (Fortran order): with
vec(A X B) = (B^T (x) A) vec(X), the Liouvillian of H and jump operators
{(A_j, r_j)} is

    L = -i (I (x) H - H^T (x) I)
        + sum_j r_j [ conj(A_j) (x) A_j - 1/2 (I (x) A_j^dag A_j)
                                        - 1/2 ((A_j^dag A_j)^T (x) I) ].

All frequencies and rates are angular, in ps^-1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError

MAX_MODES = 12


@dataclass(frozen=True)
class CompositeSpace:
    """TLS (x) truncated-mode tensor space with a fixed basis ordering."""

    n_modes: int
    levels_per_mode: int = 2

    @property
    def dim(self) -> int:
        return 2 * self.levels_per_mode**self.n_modes

    @property
    def mode_dim(self) -> int:
        """Dimension of the vibrational factor alone."""
        return self.levels_per_mode**self.n_modes

    def index(self, tls: int, occupations=()) -> int:
        """Basis index for (TLS level, mode occupations)."""
        occupations = tuple(occupations)
        if len(occupations) != self.n_modes:
            raise ValueError("need one occupation per mode")
        i = tls
        for occ in occupations:
            i = i * self.levels_per_mode + occ
        return i

    def labels(self):
        """All basis labels (tls, occupations) in index order."""
        out = []
        for tls in (0, 1):
            for occs in itertools.product(range(self.levels_per_mode),
                                          repeat=self.n_modes):
                out.append((tls, occs))
        return out


def build_space(n_modes: int) -> CompositeSpace:
    """Composite space for a TLS plus ``n_modes`` two-level vibrational modes."""
    if n_modes < 0:
        raise ValueError("n_modes must be non-negative")
    if n_modes > MAX_MODES:
        raise ValueError(
            f"n_modes={n_modes} exceeds the dimension guard ({MAX_MODES})")
    return CompositeSpace(n_modes=n_modes)


@dataclass(frozen=True)
class Operator:
    """Dense operator on a composite space."""

    space: CompositeSpace
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = self.space.dim
        if self.data.shape != (d, d):
            raise ValueError(f"operator shape {self.data.shape} does not match "
                             f"space dimension {d}")

    def dag(self) -> "Operator":
        return Operator(self.space, self.data.conj().T)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return np.max(np.abs(self.data - self.data.conj().T)) < tol

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def __matmul__(self, other: "Operator") -> "Operator":
        if other.space != self.space:
            raise ValueError("operators live on different spaces")
        return Operator(self.space, self.data @ other.data)

    def __add__(self, other: "Operator") -> "Operator":
        return Operator(self.space, self.data + other.data)

    def __sub__(self, other: "Operator") -> "Operator":
        return Operator(self.space, self.data - other.data)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.space, self.data * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Liouvillian:
    """Superoperator on column-vectorized density operators."""

    space: CompositeSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        d2 = self.space.dim**2
        if self.matrix.shape != (d2, d2):
            raise ValueError("Liouvillian shape does not match space")


@dataclass(frozen=True)
class SampledFunction:
    """Function sampled on a uniform grid (time in ps or detuning in meV)."""

    grid: np.ndarray
    values: np.ndarray


# ---------------------------------------------------------------------------
# elementary operators

_SIGMA = np.array([[0.0, 1.0], [0.0, 0.0]])       # |g><e| in (g, e) ordering
_LOWER = np.array([[0.0, 1.0], [0.0, 0.0]])       # a on a 2-level mode


def _embed(space: CompositeSpace, factors: dict) -> np.ndarray:
    """Kron together single-factor matrices; identity on unspecified factors.

    ``factors`` maps factor position (0 = TLS, 1..n = modes) to a matrix.
    """
    mats = []
    for pos in range(space.n_modes + 1):
        d = 2 if pos == 0 else space.levels_per_mode
        mats.append(factors.get(pos, np.eye(d)))
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out.astype(complex)


def sigma(space: CompositeSpace) -> Operator:
    """Lowering operator |g><e| on the full space."""
    return Operator(space, _embed(space, {0: _SIGMA}))


def sigma_dag_sigma(space: CompositeSpace) -> Operator:
    """Excited-state projector |e><e| on the full space."""
    return Operator(space, _embed(space, {0: _SIGMA.T @ _SIGMA}))


def annihilation(space: CompositeSpace, i: int) -> Operator:
    """Truncated annihilation operator of mode ``i``."""
    _check_mode(space, i)
    return Operator(space, _embed(space, {i + 1: _LOWER}))


def number(space: CompositeSpace, i: int) -> Operator:
    """Occupation operator a_i^dag a_i."""
    _check_mode(space, i)
    return Operator(space, _embed(space, {i + 1: _LOWER.T @ _LOWER}))


def displacement_matrix(r: float) -> np.ndarray:
    """exp(r (a^dag - a)) within the truncated 2-level mode space.

    On two levels the generator r(a^dag - a) is a real rotation, so the
    exponential is [[cos r, -sin r], [sin r, cos r]].
    """
    c, s = np.cos(r), np.sin(r)
    return np.array([[c, -s], [s, c]], dtype=complex)


def displacement(space: CompositeSpace, i: int, r: float) -> Operator:
    """Displacement of mode ``i`` by ratio ``r``, exponentiated in the
    truncated space (unitary on the simulated levels)."""
    _check_mode(space, i)
    return Operator(space, _embed(space, {i + 1: displacement_matrix(r)}))


def dressed_sigma(space: CompositeSpace, ratios) -> Operator:
    """Dressed dipole operator sigma * prod_i exp(r_i (a_i^dag - a_i)).

    ``ratios`` holds one displacement ratio per mode (coupling / mode energy).
    """
    ratios = tuple(ratios)
    if len(ratios) != space.n_modes:
        raise ValueError("need one displacement ratio per mode")
    factors = {0: _SIGMA}
    for i, r in enumerate(ratios):
        factors[i + 1] = displacement_matrix(r)
    return Operator(space, _embed(space, factors))


def embed_operator(space: CompositeSpace, kind: str, i: int | None = None,
                   r=None) -> Operator:
    """Named-operator dispatcher.

    kind: 'sigma' | 'sigma_dag_sigma' | 'a' | 'n' | 'displacement'
          | 'dressed_sigma'.  'a' and 'n' need the mode index ``i``;
    'displacement' needs ``i`` and the scalar ratio ``r``; 'dressed_sigma'
    needs the full ratio sequence in ``r``.
    """
    if kind == "sigma":
        return sigma(space)
    if kind == "sigma_dag_sigma":
        return sigma_dag_sigma(space)
    if kind == "a":
        return annihilation(space, _need_index(i))
    if kind == "n":
        return number(space, _need_index(i))
    if kind == "displacement":
        if r is None:
            raise ValueError("displacement needs a ratio r")
        return displacement(space, _need_index(i), float(r))
    if kind == "dressed_sigma":
        if r is None:
            raise ValueError("dressed_sigma needs the ratio sequence r")
        return dressed_sigma(space, r)
    raise ValueError(f"unknown operator kind {kind!r}")


def _need_index(i):
    if i is None:
        raise ValueError("this operator kind needs a mode index")
    return i


def _check_mode(space, i):
    if not 0 <= i < space.n_modes:
        raise ValueError(f"mode index {i} out of range for {space.n_modes} modes")


# ---------------------------------------------------------------------------
# vectorization and Liouvillian assembly

def vectorize(op: Operator) -> np.ndarray:
    """Column-stacked vector of an operator (Fortran order)."""
    return op.data.flatten(order="F")


def unvectorize(space: CompositeSpace, vec: np.ndarray) -> Operator:
    d = space.dim
    return Operator(space, vec.reshape((d, d), order="F"))


def _spre(a: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(a.shape[0]), a)


def _spost(a: np.ndarray) -> np.ndarray:
    return np.kron(a.T, np.eye(a.shape[0]))


def dissipator_matrix(a: np.ndarray) -> np.ndarray:
    """Superoperator of the Lindblad dissipator A . A^dag - 1/2 {A^dag A, .}."""
    ada = a.conj().T @ a
    return np.kron(a.conj(), a) - 0.5 * (_spre(ada) + _spost(ada))


def build_liouvillian(H: Operator, lindblad_ops=()) -> Liouvillian:
    """Generator of -i[H, rho] + sum_j rate_j D[A_j](rho), vectorized.

    ``lindblad_ops`` is a sequence of (Operator, rate) with rate >= 0.
    """
    if not H.is_hermitian(1e-10):
        raise ValueError("Hamiltonian is not Hermitian")
    space = H.space
    L = -1j * (_spre(H.data) - _spost(H.data))
    for A, rate in lindblad_ops:
        if A.space != space:
            raise ValueError("jump operator lives on a different space")
        if rate < 0:
            raise ValueError(f"negative Lindblad rate {rate}")
        if rate == 0.0:
            continue
        L += rate * dissipator_matrix(A.data)
    return Liouvillian(space, L)


def trace_vector(space: CompositeSpace) -> np.ndarray:
    """Row vector representing Tr on vectorized operators."""
    return vectorize(Operator(space, np.eye(space.dim, dtype=complex)))


# ---------------------------------------------------------------------------
# dynamics

def evolve(L: Liouvillian, rho0: Operator, t_grid) -> list[Operator]:
    """Propagate rho(t) = exp(L t) rho0 on an ascending time grid.

    Uses the scaled-and-squared matrix exponential per distinct time step,
    which is accurate to machine precision for these dense generators.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0:
        raise ValueError("t_grid must be a non-empty 1-D array")
    if np.any(np.diff(t_grid) < 0) or t_grid[0] < 0:
        raise ValueError("t_grid must be sorted ascending with t >= 0")
    if not np.all(np.isfinite(rho0.data)):
        raise NumericalError("initial state contains non-finite entries")

    v = vectorize(rho0)
    out = []
    props = {}
    t_prev = 0.0
    for t in t_grid:
        dt = t - t_prev
        if dt > 0:
            key = round(dt, 15)
            if key not in props:
                props[key] = sla.expm(L.matrix * dt)
            v = props[key] @ v
        t_prev = t
        if not np.all(np.isfinite(v)):
            raise NumericalError(f"non-finite state encountered at t={t}")
        out.append(unvectorize(L.space, v))
    return out


def steady_state(L: Liouvillian, degeneracy_tol: float = 1e-9,
                 residual_tol: float = 1e-10) -> Operator:
    """Unique trace-one null vector of the generator.

    The nullspace is found by SVD; a second singular value within
    ``degeneracy_tol`` (relative to the largest) means the steady state is
    not unique and an error is raised.
    """
    _, s, vh = np.linalg.svd(L.matrix)
    scale = max(s[0], 1.0)
    if len(s) > 1 and s[-2] < degeneracy_tol * scale:
        raise NumericalError(
            "degenerate nullspace: the steady state is not unique "
            f"(two smallest singular values {s[-1]:.3e}, {s[-2]:.3e})")
    rho = unvectorize(L.space, vh[-1].conj()).data
    tr = np.trace(rho)
    if abs(tr) < 1e-12:
        raise NumericalError("null vector is traceless; no valid steady state")
    rho = rho / tr
    rho = 0.5 * (rho + rho.conj().T)
    rho_ss = Operator(L.space, rho)
    resid = np.max(np.abs(L.matrix @ vectorize(rho_ss)))
    if resid > residual_tol * scale:
        raise NumericalError(f"steady-state residual {resid:.3e} exceeds "
                             f"tolerance {residual_tol * scale:.3e}")
    return rho_ss


def time_integrated_source(L: Liouvillian, rho0: Operator, A: Operator,
                           pre_tol: float = 1e-10) -> Operator:
    """chi = integral_0^inf A rho(t) dt for the dynamics rho(t) = e^{Lt} rho0.

    Requires A rho_ss = 0 so the integral converges.  Computed by solving
    L X = rho0 - rho_ss; the component of X along the nullspace is
    irrelevant because A annihilates it, so the least-squares solution is
    used directly and chi = -A X.
    """
    rho_ss = steady_state(L)
    if np.max(np.abs(A.data @ rho_ss.data)) > pre_tol:
        raise NumericalError(
            "A does not annihilate the steady state; the time integral "
            "does not converge")
    rhs = vectorize(rho0) - vectorize(rho_ss)
    x, *_ = np.linalg.lstsq(L.matrix, rhs, rcond=None)
    X = unvectorize(L.space, x)
    return Operator(L.space, -(A.data @ X.data))


def regression_correlator(L: Liouvillian, A_left: Operator, seed: Operator,
                          tau_grid) -> SampledFunction:
    """Two-time correlator f(tau) = Tr[A_left e^{L tau}(seed)].

    The quantum regression theorem reduces the two-time average to
    propagation of the seed operator under the single-time generator.
    ``tau_grid`` must be uniform and ascend from 0.
    """
    tau_grid = np.asarray(tau_grid, dtype=float)
    if len(tau_grid) < 2:
        raise ValueError("tau_grid needs at least two points")
    steps = np.diff(tau_grid)
    if abs(tau_grid[0]) > 1e-14:
        raise ValueError("tau_grid must start at 0")
    step = (tau_grid[-1] - tau_grid[0]) / (len(tau_grid) - 1)
    if np.max(np.abs(steps - step)) > 1e-9 * max(abs(tau_grid[-1]), step):
        raise ValueError("tau_grid must be uniform")

    w = A_left.data.T.flatten(order="F")      # Tr[A M] = vec(A^T) . vec(M)
    P = sla.expm(L.matrix * step)
    v = vectorize(seed)
    values = np.empty(len(tau_grid), dtype=complex)
    values[0] = w @ v
    for k in range(1, len(tau_grid)):
        v = P @ v
        values[k] = w @ v
    return SampledFunction(grid=tau_grid, values=values)
