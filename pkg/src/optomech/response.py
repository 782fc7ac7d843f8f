"""Intracavity frequency response.

Every function accepts a scalar ``omega`` (returning a 2x2 or 4x4 array) or
an array of frequencies (returning a stack with the matrix axes last). The
Fourier convention is f(omega) = int f(t) exp(i omega t) dt, so d/dt -> -i omega.

Two routes are provided for the optical and mechanical transfer matrices:
``exact=True`` (default) reads them off the 4x4 resolvent; ``exact=False``
assembles them from the closed-form gain, which neglects damping-induced
frequency pulling.
"""
import math

import numpy as np

from .errors import ZeroCoupling
from .params import NEAR_POLE_TOL, SystemParams, drift_matrix

U = np.array([[1.0, -1.0j], [1.0, 1.0j]]) / math.sqrt(2.0)
U_INV = U.conj().T


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def cavity_phase(p: SystemParams) -> float:
    """Carrier phase psi_c = arctan(Delta / kappa) of the driving field."""
    return math.atan2(p.detuning, p.kappa)


def _freq(omega):
    return np.asarray(omega, dtype=float)


def _stack2(a, b, c, d):
    a, b, c, d = np.broadcast_arrays(a, b, c, d)
    return np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)


def cavity_filter(p: SystemParams, omega):
    w = _freq(omega)
    kw = p.kappa - 1j * w
    den = kw**2 + p.detuning**2
    return _stack2(kw, p.detuning + 0 * kw, -p.detuning + 0 * kw, kw) / den[..., None, None]


def mech_filter(p: SystemParams, omega):
    w = _freq(omega)
    gw = p.gamma_m / 2 - 1j * w
    den = gw**2 + p.omega_m**2
    return _stack2(gw, -p.omega_m + 0 * gw, p.omega_m + 0 * gw, gw) / den[..., None, None]


def coupling_matrix(p: SystemParams) -> np.ndarray:
    return np.array([[0.0, 0.0], [p.g_c, 0.0]])


def resolvent(p: SystemParams, omega):
    """(-i omega I - M)^-1 in the ordering (a+, a-, z, p)."""
    w = _freq(omega)
    a = -1j * w[..., None, None] * np.eye(4) - drift_matrix(p)
    return np.linalg.inv(a)


def _inverse_cavity_filter(p, w):
    kw = p.kappa - 1j * w
    zero = 0 * kw
    return _stack2(kw, -p.detuning + zero, p.detuning + zero, kw)


def loop_elements(p: SystemParams, omega):
    """Exact (H+alpha, H-alpha) from the resolvent: R_aa F_a^-1 = [[1+G, 0], [H-, 1]]."""
    w = _freq(omega)
    r = resolvent(p, w)[..., :2, :2]
    closed = r @ _inverse_cavity_filter(p, w)
    return closed[..., 0, 0] - 1.0, closed[..., 1, 0]


def resolvent_gain(p: SystemParams, omega):
    return loop_elements(p, omega)[0]


def _closed_gain(p, w):
    a = p.kappa**2 + p.detuning**2 - w**2
    s = p.omega_m * p.detuning * p.g_c**2 / a
    g_opt = 2 * p.kappa * (p.omega_m**2 - w**2) / a
    return -s / (p.omega_m**2 + s - w**2 - 1j * w * (p.gamma_m + g_opt))


def gain(p: SystemParams, omega):
    """Closed-form optomechanical gain G(omega).

    Inside the band where the real-valued spring forms diverge the exact
    resolvent gain is returned instead.
    """
    w = _freq(omega)
    pole = np.abs(p.kappa**2 + p.detuning**2 - w**2) < NEAR_POLE_TOL * p.kappa**2
    safe = np.where(pole, w + 1.0, w)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = _closed_gain(p, safe)
    if np.any(pole):
        g = np.where(pole, resolvent_gain(p, w), g)
    return g[()] if g.ndim == 0 else g


def _closed_elements(p, w):
    g = gain(p, w)
    if p.detuning == 0:
        # G vanishes linearly in Delta; take the finite ratio from the resolvent
        hm = loop_elements(p, w)[1]
    else:
        hm = g * (p.kappa - 1j * w) / p.detuning
    return g, hm


def h_alpha(p: SystemParams, omega, exact: bool = True):
    """Optical -> intracavity transfer matrix (units 1/rate)."""
    w = _freq(omega)
    if exact:
        return resolvent(p, w)[..., :2, :2]
    g, hm = _closed_elements(p, w)
    left = _stack2(1 + g, 0 * g, hm, 1 + 0 * g)
    return left @ cavity_filter(p, w)


def eta_elements(p: SystemParams, omega):
    """(H+eta, H-eta); undefined without coupling."""
    if p.g_c == 0:
        raise ZeroCoupling("H+eta and H-eta are undefined for g_c = 0")
    w = _freq(omega)
    return -(p.gamma_m / 2 - 1j * w) / (p.omega_m * p.g_c), 1.0 / p.g_c + 0 * w


def h_eta(p: SystemParams, omega, exact: bool = True):
    """Mechanical -> intracavity transfer matrix (units 1/rate)."""
    w = _freq(omega)
    if exact:
        return resolvent(p, w)[..., :2, 2:]
    if p.g_c == 0:
        return np.zeros(w.shape + (2, 2), dtype=complex)
    g, hm = _closed_elements(p, w)
    hpe, hme = eta_elements(p, w)
    return _stack2(g * hpe, g * hme, hm * hpe, hm * hme)


def modulation_transfer(p: SystemParams, omega, exact: bool = True):
    """Transfer matrix from input AM/PM observables to intracavity quadratures."""
    return h_alpha(p, omega, exact) @ rotation(cavity_phase(p))


def single_sideband(p: SystemParams, omega, exact: bool = True):
    """Transfer matrix between (a(omega), a^dag(-omega)) pure tones."""
    return U @ h_alpha(p, omega, exact) @ U_INV
