"""Quadrature and transform helpers shared by the model and observables.

The one-sided Fourier transform int_0^inf f(tau) e^{-i w tau} d tau is
evaluated as a weighted sum on a uniform tau grid (composite Simpson
weights).  For a uniform frequency grid the weighted sum is an exact
chirp-Z transform, so it is evaluated with scipy's CZT; the frequency grid
stays fully independent of the time grid either way.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import CZT

_CZT_CACHE: dict = {}
_CZT_CACHE_MAX = 32


def _czt_plan(n: int, m: int, w: complex, a: complex) -> CZT:
    key = (n, m, w, a)
    plan = _CZT_CACHE.get(key)
    if plan is None:
        if len(_CZT_CACHE) >= _CZT_CACHE_MAX:
            _CZT_CACHE.clear()
        plan = CZT(n, m=m, w=w, a=a)
        _CZT_CACHE[key] = plan
    return plan


def simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights for n points (n odd) with spacing h."""
    if n < 3 or n % 2 == 0:
        raise ValueError("Simpson weights need an odd number of points >= 3")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def half_fourier(values: np.ndarray, tau_step: float,
                 omegas: np.ndarray) -> np.ndarray:
    """int_0^inf f(tau) e^{-i w tau} d tau from samples on a uniform grid.

    ``values`` holds f on tau = 0, h, 2h, ...; the integral is truncated at
    the last sample (callers ensure the tail criterion).  Uniform omega
    grids go through the chirp-Z transform; arbitrary grids fall back to a
    direct evaluation.
    """
    n = len(values)
    weights = simpson_weights(n, tau_step)
    x = values * weights
    omegas = np.asarray(omegas, dtype=float)
    if len(omegas) >= 4:
        step = (omegas[-1] - omegas[0]) / (len(omegas) - 1)
        if np.max(np.abs(np.diff(omegas) - step)) \
                < 1e-9 * max(abs(omegas[-1]), abs(step)):
            a = complex(np.exp(1j * omegas[0] * tau_step))
            w = complex(np.exp(-1j * step * tau_step))
            return _czt_plan(n, len(omegas), w, a)(x)
    tau = np.arange(n) * tau_step
    out = np.empty(len(omegas), dtype=complex)
    block = max(1, int(4e6 // max(n, 1)))
    for start in range(0, len(omegas), block):
        om = omegas[start:start + block, None]
        out[start:start + block] = np.exp(-1j * om * tau[None, :]) @ x
    return out


def gauss_panels(edges: np.ndarray, order: int = 16):
    """Composite Gauss-Legendre nodes and weights over consecutive panels.

    Deterministic fixed-grid quadrature: exact for polynomials of degree
    2*order-1 per panel, and resolves oscillatory integrands when panels
    span only a few radians of phase.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    lo = edges[:-1, None]
    hi = edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + half * (x[None, :] + 1.0)).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def kron_apply(mats, vec: np.ndarray) -> np.ndarray:
    """Apply (mats[0] (x) mats[1] (x) ...) to a vector without forming the
    full Kronecker product."""
    dims = [m.shape[0] for m in mats]
    t = vec.reshape(dims)
    for axis, m in enumerate(mats):
        t = np.moveaxis(np.tensordot(m, t, axes=([1], [axis])), 0, axis)
    return t.reshape(-1)
