"""Force-sensing signal-to-noise ratio and its optimization.

The SNR compares the force-transduced output power to the full observed
noise (all vacuum inputs, mechanical zero-point and detection loss) in the
same quadrature. For a fixed coupling both are quadratic forms in the
quadrature vector v = (cos theta, sin theta),

    SNR(theta) = scale * (v^T A v) / (v^T B v),

so the best quadrature is the leading generalized eigenvector of (A, B) and
only the cooperativity needs a numerical search.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import constants
from scipy.linalg import eigh
from scipy.optimize import minimize_scalar

from .errors import NotConverged, Unstable, ZeroFrequency
from .output import Efficiencies, _detection_port
from .params import SystemParams, is_stable, static_coupling_limit
from .response import loop_elements
from .spectra import NoiseModel, noise_form

#: Cooperativity ceiling used on resonance, where any coupling is stable.
RESONANT_C_CAP = 1e12


@dataclass(frozen=True)
class ForceDrive:
    """External force of amplitude ``f_ext`` and the momentum scale ``p_ho``."""

    f_ext: float = 1.0
    p_ho: float = 1.0
    f_bw: float = 1.0

    def __post_init__(self):
        if self.p_ho <= 0 or self.f_bw <= 0:
            raise ValueError("p_ho and f_bw must be positive")

    @classmethod
    def from_mass(cls, f_ext: float, mass: float, omega_m_si: float, f_bw: float = 1.0) -> "ForceDrive":
        return cls(f_ext, math.sqrt(constants.hbar * mass * omega_m_si / 2.0), f_bw)

    def scale(self, p: SystemParams) -> float:
        """F^2 / (Gamma_m f_BW p_HO^2), the unit in which SNR prefactors are quoted."""
        return self.f_ext**2 / (p.gamma_m * self.f_bw * self.p_ho**2)


@dataclass(frozen=True)
class SensingOptimum:
    snr: float
    theta: float
    c_opt: float
    delta: float
    omega: float
    converged: bool = True


@dataclass(frozen=True)
class SearchConfig:
    """Settings for :func:`numeric_optimize`.

    ``theta`` fixes the quadrature instead of optimizing it. ``c_max=None``
    picks the stability bound (or :data:`RESONANT_C_CAP` on resonance).
    """

    c_min: float = 1e-3
    c_max: Optional[float] = None
    n_coarse: int = 121
    xtol: float = 1e-10
    max_iter: int = 500
    theta: Optional[float] = None
    strict: bool = False


def quadratic_forms(p: SystemParams, omega: float, port: str = "R",
                    noise: Optional[NoiseModel] = None):
    """Signal and noise forms (A, B) at one frequency; SNR = scale v^T A v / v^T B v."""
    j = _detection_port(port)
    b = noise_form(p, [float(omega)], j, noise)[0]
    b = p.eps_det * b + (1.0 - p.eps_det) * np.eye(2)
    if p.g_c == 0:
        return np.zeros((2, 2)), b
    hp, hm = loop_elements(p, np.array([float(omega)]))
    vec = np.array([hp[0], hm[0]])
    eps = Efficiencies.from_params(p, j).eps_tot
    a = 2.0 * eps / p.c_opt * np.outer(vec, vec.conj()).real
    return a, b


def snr_prefactor(p: SystemParams, omega: float, theta, port: str = "R",
                  noise: Optional[NoiseModel] = None):
    """SNR in units of F^2 / (Gamma_m f_BW p_HO^2)."""
    a, b = quadratic_forms(p, omega, port, noise)
    t = np.asarray(theta, dtype=float)
    v = np.stack([np.cos(t), np.sin(t)], axis=-1)
    return np.einsum("...i,ij,...j->...", v, a, v) / np.einsum("...i,ij,...j->...", v, b, v)


def snr(p: SystemParams, omega: float, theta, drive: ForceDrive, port: str = "R",
        noise: Optional[NoiseModel] = None):
    """Force SNR at one frequency for one or more quadratures."""
    return snr_prefactor(p, omega, theta, port, noise) * drive.scale(p)


def best_quadrature(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Maximize v^T A v / v^T B v; returns (value, theta in [0, pi))."""
    vals, vecs = eigh(a, b)
    v = vecs[:, -1]
    return float(vals[-1]), math.atan2(v[1], v[0]) % math.pi


def sql_limits(p: SystemParams, drive: ForceDrive, noise: Optional[NoiseModel] = None):
    """Resonant standard-quantum-limit figures (r_therm, r_ext, c_sql) at zero detuning."""
    noise = noise or NoiseModel()
    q = p.q
    r_therm = (1.0 + (3.0 / 64.0) / q**2) * noise.n_th
    r_ext = (0.25 - (5.0 / 256.0) / q**2) * drive.scale(p)
    c_sql = 0.5 * (1.0 + p.omega_m**2 / p.kappa**2)
    return r_therm, r_ext, c_sql


def analytic_optimum(p: SystemParams, omega: float, drive: ForceDrive) -> SensingOptimum:
    """Closed-form optimum over quadrature and cooperativity at zero detuning."""
    if omega == 0:
        raise ZeroFrequency("the optimal cooperativity diverges at omega = 0")
    q, wm, gm = p.q, p.omega_m, p.gamma_m
    x = abs(omega / wm)
    r = 1.0 / ((0.5 / q) ** 2 + (1.0 + x) ** 2)
    theta = math.atan2(x / q, (0.5 / q) ** 2 + 1.0 - x**2) % math.pi
    mech = abs(complex(wm**2 + gm**2 / 4 - omega**2, -gm * omega)) ** 2
    c = (1.0 + omega**2 / p.kappa**2) * mech / (2.0 * gm**2 * wm * abs(omega))
    return SensingOptimum(r * drive.scale(p), theta, c, 0.0, float(omega), True)


def cooperativity_cap(p: SystemParams) -> float:
    """Largest cooperativity searched by default for ``p.detuning``."""
    if p.detuning == 0:
        return RESONANT_C_CAP
    g = 0.99 * min(p.kappa, static_coupling_limit(p))
    return g**2 / (p.kappa * p.gamma_m)


def numeric_optimize(p: SystemParams, omega: float, delta: float, drive: ForceDrive,
                     cfg: SearchConfig = SearchConfig(), port: str = "R",
                     noise: Optional[NoiseModel] = None) -> SensingOptimum:
    """Maximize the SNR over cooperativity (and quadrature) at fixed (omega, delta).

    ``p`` supplies every other parameter; its coupling is ignored. A log-spaced
    coarse scan brackets the best cooperativity, then a bounded Brent search
    refines it in log C. Cooperativities with an undamped drift eigenvalue are
    skipped.

    Raises
    ------
    Unstable
        If no cooperativity in the search range is stable.
    NotConverged
        If ``cfg.strict`` and the refinement did not converge.
    """
    if delta > 0:
        raise Unstable("detuning must be <= 0", "detuning")
    base = p.replace(detuning=float(delta))
    c_max = cfg.c_max if cfg.c_max is not None else cooperativity_cap(base)

    def evaluate(log_c):
        q = base.with_cooperativity(10.0**log_c)
        if delta != 0 and not is_stable(q):
            return -math.inf, math.nan
        a, b = quadratic_forms(q, omega, port, noise)
        if cfg.theta is not None:
            v = np.array([math.cos(cfg.theta), math.sin(cfg.theta)])
            return float(v @ a @ v / (v @ b @ v)), cfg.theta % math.pi
        return best_quadrature(a, b)

    grid = np.linspace(math.log10(cfg.c_min), math.log10(c_max), cfg.n_coarse)
    coarse = [evaluate(x)[0] for x in grid]
    i = int(np.argmax(coarse))
    if not np.isfinite(coarse[i]):
        raise Unstable(f"no stable cooperativity in [{cfg.c_min}, {c_max}]", "g_c")
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(lambda x: -evaluate(x)[0], bounds=(lo, hi), method="bounded",
                          options={"xatol": cfg.xtol, "maxiter": cfg.max_iter})
    x = float(res.x) if -res.fun >= coarse[i] else float(grid[i])
    value, theta = evaluate(x)
    best = SensingOptimum(value * drive.scale(base), theta, 10.0**x, float(delta), float(omega),
                          bool(res.success))
    if cfg.strict and not best.converged:
        raise NotConverged("cooperativity search did not converge", best)
    return best


def default_deltas(n: int = 23, lo: float = -6.0, hi: float = -0.5) -> np.ndarray:
    """Log-spaced red detunings from ``lo`` to ``hi`` (both negative)."""
    return -np.logspace(math.log10(-lo), math.log10(-hi), n)


def thread_count() -> int:
    env = os.environ.get("OPTOMECH_THREADS")
    return max(1, int(env)) if env else (os.cpu_count() or 1)


def delta_sweep(p: SystemParams, omegas: Sequence[float], drive: ForceDrive,
                deltas: Optional[Sequence[float]] = None, cfg: SearchConfig = SearchConfig(),
                port: str = "R", include_resonant: bool = True) -> list[SensingOptimum]:
    """Optimize every (omega, delta) cell; rows are omega-major, resonance first."""
    ds = list(default_deltas() if deltas is None else deltas)
    if include_resonant:
        ds = [0.0] + [d for d in ds if d != 0.0]
    cells = [(float(w), float(d)) for w in omegas for d in ds]
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        return list(pool.map(lambda c: numeric_optimize(p, c[0], c[1], drive, cfg, port), cells))
