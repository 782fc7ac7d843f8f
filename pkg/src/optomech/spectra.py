"""Symmetrized output spectra relative to shot noise.

Vacuum inputs carry a unit symmetrized white level per quadrature, so a
spectrum equal to 1 is the shot-noise floor. Every function here returns
values on an (omega, theta) grid with omega as the leading axis.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import constants

from .output import Efficiencies, INPUT_CHANNELS, apply_efficiency, _detection_port, _transfer
from .params import SystemParams
from .response import U, U_INV, _closed_elements, cavity_filter, gain, loop_elements, single_sideband

N_OMEGA = 2000
N_THETA = 181


@dataclass(frozen=True)
class NoiseModel:
    """Mechanical bath occupation and the Fourier bandwidth normalization."""

    n_th: float = 0.0
    f_bw: float = 1.0

    def __post_init__(self):
        if self.n_th < 0:
            raise ValueError("n_th must be non-negative")
        if self.f_bw <= 0:
            raise ValueError("f_bw must be positive")

    @classmethod
    def from_temperature(cls, temperature: float, omega_m_si: float, f_bw: float = 1.0) -> "NoiseModel":
        """Bose occupation at ``temperature`` (K) of a mode at ``omega_m_si`` (rad/s)."""
        if temperature <= 0:
            return cls(0.0, f_bw)
        x = constants.hbar * omega_m_si / (constants.k * temperature)
        return cls(1.0 / math.expm1(x), f_bw)

    @property
    def mech_level(self) -> float:
        return 2.0 * self.n_th + 1.0


@dataclass
class SpectrumTable:
    omega: np.ndarray
    theta: np.ndarray
    values: np.ndarray
    units: str = "shot_noise"
    tag: str = "symmetrized"
    source: list = field(default_factory=list)

    def argmin(self):
        i, k = np.unravel_index(np.argmin(self.values), self.values.shape)
        return float(self.omega[i]), float(self.theta[k]), float(self.values[i, k])

    def argmax(self):
        i, k = np.unravel_index(np.argmax(self.values), self.values.shape)
        return float(self.omega[i]), float(self.theta[k]), float(self.values[i, k])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            for line in self.source:
                fh.write(f"# source: {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["omega_over_kappa", "theta_rad", "value", "units", "tag"])
            for i, om in enumerate(self.omega):
                for k, th in enumerate(self.theta):
                    w.writerow(["%.17g" % om, "%.17g" % th, "%.17g" % self.values[i, k], self.units, self.tag])


def default_omega_grid(p: SystemParams, n: int = N_OMEGA) -> np.ndarray:
    """Uniform grid on [0, 3 max(omega_m, kappa)]."""
    return np.linspace(0.0, 3.0 * max(p.omega_m, p.kappa), n)


def default_theta_grid(n: int = N_THETA) -> np.ndarray:
    return np.linspace(0.0, math.pi, n, endpoint=False)


def symmetrize(spectrum: Callable) -> Callable:
    """Return omega -> (S(omega) + S(-omega)) / 2 for a spectrum callable."""

    def sym(omega, *args, **kwargs):
        w = np.asarray(omega, dtype=float)
        return 0.5 * (spectrum(w, *args, **kwargs) + spectrum(-w, *args, **kwargs))

    return sym


def _grids(p, omega, theta):
    w = default_omega_grid(p) if omega is None else np.atleast_1d(np.asarray(omega, float))
    t = default_theta_grid() if theta is None else np.atleast_1d(np.asarray(theta, float))
    return w, t


def _quadrature_vectors(theta):
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def _one_sided_form(p, w, port, channels, noise, exact):
    out = np.zeros((w.size, 2, 2))
    for k in channels:
        if k == "eta":
            level = noise.mech_level
        else:
            if p.port_rate(k) == 0 and k != port:
                continue
            level = 1.0
        h = _transfer(p, w, port, k, exact)
        out += level * np.einsum("wik,wjk->wij", h, h.conj()).real
    return out


def noise_form(p: SystemParams, omega, port: str = "R", noise: Optional[NoiseModel] = None,
               channels: Sequence[str] = INPUT_CHANNELS, exact: bool = True) -> np.ndarray:
    """Real symmetric B(omega), shape (n, 2, 2), with PSD(theta) = v^T B v.

    ``v = (cos theta, sin theta)``. Optical inputs are vacuum and the
    mechanical bath has level ``2 n_th + 1``; no detection loss is applied.
    """
    j = _detection_port(port)
    noise = noise or NoiseModel()
    w = np.atleast_1d(np.asarray(omega, float))
    return 0.5 * (_one_sided_form(p, w, j, channels, noise, exact)
                  + _one_sided_form(p, -w, j, channels, noise, exact))


def quadrature_psd(p: SystemParams, omega, theta, port: str = "R",
                   noise: Optional[NoiseModel] = None,
                   channels: Sequence[str] = INPUT_CHANNELS, exact: bool = True) -> np.ndarray:
    """Symmetrized PSD of the output quadrature ``theta`` at ``port``.

    Sums the incoherent contributions of each input channel. Returns an array
    of shape (len(omega), len(theta)).
    """
    b = noise_form(p, omega, port, noise, channels, exact)
    v = _quadrature_vectors(np.atleast_1d(np.asarray(theta, float)))
    return np.einsum("ti,wij,tj->wt", v, b, v)


def quadrature_extremes(p: SystemParams, omega, port: str = "R", noise: Optional[NoiseModel] = None,
                        exact: bool = True):
    """Exact minimum and maximum over theta at each frequency.

    Returns
    -------
    s_min, theta_min, s_max, theta_max : ndarray
        Angles lie in [0, pi).
    """
    vals, vecs = np.linalg.eigh(noise_form(p, omega, port, noise, exact=exact))
    th = np.arctan2(vecs[:, 1, :], vecs[:, 0, :]) % math.pi
    return vals[:, 0], th[:, 0], vals[:, 1], th[:, 1]


def vacuum_spectrum(p: SystemParams, omega=None, theta=None, port: str = "R",
                    exact: bool = True) -> SpectrumTable:
    """Output spectrum for vacuum optical inputs and a zero-temperature bath.

    For a one-sided lossless cavity this is the ideal spectrum; extra ports
    enter through their own vacuum inputs.
    """
    w, t = _grids(p, omega, theta)
    vals = quadrature_psd(p, w, t, port, NoiseModel(), exact=exact)
    return SpectrumTable(w, t, vals, "shot_noise", "ideal")


def observed_spectrum(p: SystemParams, omega=None, theta=None, port: str = "R",
                      noise: Optional[NoiseModel] = None, exact: bool = True) -> SpectrumTable:
    """Detected spectrum including extraction and detection loss."""
    w, t = _grids(p, omega, theta)
    vals = apply_efficiency(quadrature_psd(p, w, t, port, noise, exact=exact), p.eps_det)
    return SpectrumTable(w, t, vals, "shot_noise", "observed")


def thermal_spectrum(p: SystemParams, omega=None, noise: Optional[NoiseModel] = None,
                     port: str = "R", exact: bool = True) -> SpectrumTable:
    """Mechanically driven output noise in the + (theta=0) and - (theta=pi/2) quadratures.

    Uses the closed form 2 eps_tot / (C f_BW) (omega_m^2 + omega^2) / omega_m^2
    (2 n_th + 1) |H_alpha^(+/-)|^2.
    """
    noise = noise or NoiseModel()
    w, _ = _grids(p, omega, None)
    eps = Efficiencies.from_params(p, port).eps_tot
    if exact:
        hp, hm = loop_elements(p, w)
    else:
        hp, hm = _closed_elements(p, w)
    if p.g_c == 0:
        vals = np.zeros((w.size, 2))
    else:
        pref = 2 * eps / (p.c_opt * noise.f_bw) * (p.omega_m**2 + w**2) / p.omega_m**2 * noise.mech_level
        vals = np.stack([pref * np.abs(hp) ** 2, pref * np.abs(hm) ** 2], axis=-1)
    return SpectrumTable(w, np.array([0.0, math.pi / 2]), vals, "shot_noise", "thermal")


def mechanical_spectrum(p: SystemParams, omega, theta, noise: Optional[NoiseModel] = None,
                        port: str = "R", exact: bool = True) -> np.ndarray:
    """Bath contribution at any quadrature from the mechanical port transfer alone."""
    noise = noise or NoiseModel()
    return p.eps_det * quadrature_psd(p, omega, theta, port, noise, channels=("eta",), exact=exact)


def force_transduction(p: SystemParams, omega, theta, drive, port: str = "R",
                       exact: bool = True) -> np.ndarray:
    """Force-driven output power per |F_ext|^2, shape (len(omega), len(theta)).

    ``drive`` needs ``f_bw`` and ``p_ho`` attributes. At zero detuning the
    ratio (kappa - i omega)/Delta is replaced by the finite resolvent value of
    H_alpha^-.
    """
    w = np.atleast_1d(np.asarray(omega, float))
    t = np.atleast_1d(np.asarray(theta, float))
    if p.g_c == 0:
        return np.zeros((w.size, t.size))
    eps = Efficiencies.from_params(p, port).eps_tot
    if exact or p.detuning == 0:
        hp, hm = loop_elements(p, w)
    else:
        hp = gain(p, w)
        hm = hp * (p.kappa - 1j * w) / p.detuning
    amp = np.cos(t)[None, :] * hp[:, None] + np.sin(t)[None, :] * hm[:, None]
    return 2 * eps / p.c_opt * np.abs(amp) ** 2 / (p.gamma_m * drive.f_bw**2 * drive.p_ho**2)


def force_spectrum(p: SystemParams, omega=None, theta=None, drive=None, port: str = "R",
                   exact: bool = True) -> SpectrumTable:
    """Force-driven output power S^ext including the |F_ext|^2 factor."""
    w, t = _grids(p, omega, theta)
    vals = force_transduction(p, w, t, drive, port, exact) * abs(drive.f_ext) ** 2
    return SpectrumTable(w, t, vals, "quanta", "force")


def omit_trace(p: SystemParams, omega=None, exact: bool = True):
    """Single-sideband intensity |H^SS_11|^2 + |H^SS_21|^2 (times kappa^2).

    Returns
    -------
    omega, raw, ratio : ndarray
        ``ratio`` divides by the same quantity for the empty cavity.
    """
    w = default_omega_grid(p) if omega is None else np.atleast_1d(np.asarray(omega, float))
    hss = single_sideband(p, w, exact)
    raw = p.kappa**2 * (np.abs(hss[:, 0, 0]) ** 2 + np.abs(hss[:, 1, 0]) ** 2)
    empty = U @ cavity_filter(p, w) @ U_INV
    ref = p.kappa**2 * (np.abs(empty[:, 0, 0]) ** 2 + np.abs(empty[:, 1, 0]) ** 2)
    return w, raw, raw / ref


def squeezing_minimum(p: SystemParams, omega, port: str = "R"):
    """(omega, theta, value) of the smallest ideal spectrum, exact in theta."""
    w = np.atleast_1d(np.asarray(omega, float))
    s_min, th, _, _ = quadrature_extremes(p, w, port)
    i = int(np.argmin(s_min))
    return float(w[i]), float(th[i]), float(s_min[i])


def quadrature_average(p: SystemParams, omega, port: str = "R", n_theta: int = 256) -> np.ndarray:
    """Mean of the vacuum spectrum over theta in [0, pi)."""
    t = np.linspace(0.0, math.pi, n_theta, endpoint=False)
    return quadrature_psd(p, omega, t, port).mean(axis=-1)

