"""System parameters, derived scalars, validation and preset construction.

All rates share one unit. Configurations loaded through
:func:`params_from_config` are normalized so that ``kappa == 1``.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    BlueDetuned,
    ConfigError,
    NearPole,
    NonPositiveRate,
    NoRoot,
    Overcoupled,
    SumMismatch,
    Unstable,
    ValidationError,
)

NEAR_POLE_TOL = 1e-9
SUM_RTOL = 1e-12
BISECT_TOL = 1e-12


@dataclass(frozen=True)
class SystemParams:
    """Linearized optomechanical system.

    ``gamma_right`` defaults to whatever is left of ``2 * kappa`` after the
    left and loss ports, so the one-sided lossless cavity is the default.
    """

    kappa: float
    detuning: float
    omega_m: float
    gamma_m: float
    g_c: float
    gamma_left: float = 0.0
    gamma_right: Optional[float] = None
    gamma_vac: float = 0.0
    eps_det: float = 1.0

    def __post_init__(self):
        if self.gamma_right is None:
            object.__setattr__(
                self, "gamma_right", 2.0 * self.kappa - self.gamma_left - self.gamma_vac
            )

    @property
    def q(self) -> float:
        return self.omega_m / self.gamma_m

    @property
    def gamma_total(self) -> float:
        return self.gamma_left + self.gamma_right + self.gamma_vac

    @property
    def c_opt(self) -> float:
        return self.g_c**2 / (self.kappa * self.gamma_m)

    def port_rate(self, port: str) -> float:
        return {"L": self.gamma_left, "R": self.gamma_right, "V": self.gamma_vac}[port]

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def with_cooperativity(self, c_opt: float) -> "SystemParams":
        return self.replace(g_c=math.sqrt(c_opt * self.kappa * self.gamma_m))

    def with_q(self, q: float) -> "SystemParams":
        return self.replace(gamma_m=self.omega_m / q)


@dataclass(frozen=True)
class DerivedParams:
    c_opt: float
    d_opt: float
    omega_eff: float
    omega_eff_approx: float
    q: float
    eps_out: float
    eps_tot: float


def drift_matrix(p: SystemParams) -> np.ndarray:
    """Real 4x4 drift matrix acting on (a+, a-, z, p)."""
    k, d, wm, gm, g = p.kappa, p.detuning, p.omega_m, p.gamma_m, p.g_c
    return np.array(
        [
            [-k, d, 0.0, 0.0],
            [-d, -k, g, 0.0],
            [0.0, 0.0, -gm / 2, -wm],
            [g, 0.0, wm, -gm / 2],
        ]
    )


def static_coupling_limit(p: SystemParams) -> float:
    """Coupling above which the red-detuned system loses static stability.

    Infinite at zero detuning. Follows from det(-M) > 0.
    """
    den = p.omega_m * abs(p.detuning)
    if den == 0:
        return math.inf
    return math.sqrt((p.kappa**2 + p.detuning**2) * (p.omega_m**2 + p.gamma_m**2 / 4) / den)


def is_stable(p: SystemParams) -> bool:
    return bool(np.max(np.linalg.eigvals(drift_matrix(p)).real) < 0)


def validate(p: SystemParams, strict: bool = True) -> SystemParams:
    """Check the record and return it unchanged.

    ``strict=False`` skips the sufficient condition ``g_c < kappa`` but still
    requires every eigenvalue of the drift matrix to be damped; the sensing
    optimizer uses this on resonance, where the loop gain vanishes.
    """
    for name in ("kappa", "omega_m", "gamma_m"):
        v = getattr(p, name)
        if not (np.isfinite(v) and v > 0):
            raise NonPositiveRate(f"must be > 0, got {v!r}", name)
    for name in ("gamma_left", "gamma_right", "gamma_vac", "g_c"):
        v = getattr(p, name)
        if not (np.isfinite(v) and v >= 0):
            raise NonPositiveRate(f"must be >= 0, got {v!r}", name)
    if not (0.0 <= p.eps_det <= 1.0):
        raise ValidationError(f"must lie in [0, 1], got {p.eps_det!r}", "eps_det")
    if abs(p.gamma_total - 2 * p.kappa) > SUM_RTOL * 2 * p.kappa:
        raise SumMismatch(
            f"port rates sum to {p.gamma_total!r}, expected 2*kappa = {2 * p.kappa!r}", "ports"
        )
    if p.detuning > 0:
        raise BlueDetuned(f"detuning must be <= 0, got {p.detuning!r}", "detuning")
    if strict and p.g_c >= p.kappa:
        raise Overcoupled(f"g_c must be < kappa, got {p.g_c!r}", "g_c")
    if not is_stable(p):
        raise Unstable("drift matrix has an undamped eigenvalue", "g_c")
    return p


def _optical_denominator(p: SystemParams, omega):
    w = np.asarray(omega, dtype=float)
    den = p.kappa**2 + p.detuning**2 - w**2
    if np.any(np.abs(den) < NEAR_POLE_TOL * p.kappa**2):
        raise NearPole("omega**2 is within tolerance of kappa**2 + detuning**2")
    return den


def spring_shift(p: SystemParams, omega):
    """Optical spring s(omega) = omega_m * Delta * g_c^2 / (kappa^2 + Delta^2 - omega^2)."""
    return p.omega_m * p.detuning * p.g_c**2 / _optical_denominator(p, omega)


def optical_damping(p: SystemParams, omega):
    """Optical damping 2 kappa (omega_m^2 - omega^2) / (kappa^2 + Delta^2 - omega^2).

    Independent of the coupling at fixed omega; the coupling enters through
    the evaluation point when used at omega_eff.
    """
    w = np.asarray(omega, dtype=float)
    return 2 * p.kappa * (p.omega_m**2 - w**2) / _optical_denominator(p, w)


def effective_frequency(p: SystemParams) -> tuple[float, float]:
    """(exact, approx) shifted mechanical frequency.

    The exact value uses the minus branch of the quadratic for omega_eff^2.
    """
    a0 = p.kappa**2 + p.detuning**2
    wm2 = p.omega_m**2
    rad = (a0 - wm2) ** 2 - 4 * p.omega_m * p.detuning * p.g_c**2
    weff2 = 0.5 * (a0 + wm2) - 0.5 * math.sqrt(rad)
    exact = math.sqrt(weff2) if weff2 > 0 else math.nan
    approx2 = wm2 + float(spring_shift(p, p.omega_m))
    approx = math.sqrt(approx2) if approx2 > 0 else math.nan
    return exact, approx


def damping_parameter(p: SystemParams) -> float:
    """D_opt = Gamma_opt(omega_eff) / Gamma_m."""
    if p.g_c == 0 or p.detuning == 0:
        return 0.0
    weff, _ = effective_frequency(p)
    return float(optical_damping(p, weff)) / p.gamma_m


def derive(p: SystemParams, port: str = "R") -> DerivedParams:
    weff, approx = effective_frequency(p)
    eps_out = p.port_rate(port) / (2 * p.kappa)
    return DerivedParams(
        c_opt=p.c_opt,
        d_opt=damping_parameter(p),
        omega_eff=weff,
        omega_eff_approx=approx,
        q=p.q,
        eps_out=eps_out,
        eps_tot=eps_out * p.eps_det,
    )


def from_figure_targets(
    omega_m_over_kappa: float,
    q: float,
    d_opt_target: float,
    delta: float,
    ports: Optional[dict] = None,
    eps_det: float = 1.0,
    kappa: float = 1.0,
) -> SystemParams:
    """Build a parameter set whose damping parameter hits ``d_opt_target``.

    The coupling is found by bisection on ``(0, g_hi)`` where ``g_hi`` is the
    smaller of ``kappa`` and the static stability limit.
    """
    if d_opt_target <= 0:
        raise NoRoot(f"d_opt_target must be > 0, got {d_opt_target!r}")
    if delta > 0:
        raise BlueDetuned(f"detuning must be <= 0, got {delta!r}", "detuning")
    ports = ports or {}
    omega_m = omega_m_over_kappa * kappa
    base = SystemParams(
        kappa=kappa,
        detuning=delta,
        omega_m=omega_m,
        gamma_m=omega_m / q,
        g_c=0.0,
        gamma_left=ports.get("left", 0.0),
        gamma_right=ports.get("right"),
        gamma_vac=ports.get("vac", 0.0),
        eps_det=eps_det,
    )
    if delta == 0:
        raise NoRoot("optical damping vanishes at zero detuning", max_attainable=0.0)
    if omega_m**2 >= kappa**2 + delta**2:
        raise NoRoot("minus branch of omega_eff tracks the optical root when "
                     "omega_m^2 >= kappa^2 + Delta^2")

    def d_of(g):
        return damping_parameter(base.replace(g_c=g))

    # omega_eff^2 from the printed quadratic reaches zero at this coupling
    g_zero = math.sqrt((kappa**2 + delta**2) * omega_m / abs(delta))
    hi = min(kappa, g_zero) * (1 - 1e-9)
    d_hi = d_of(hi)
    if d_hi < d_opt_target:
        raise NoRoot(
            f"D_opt={d_opt_target!r} unreachable; maximum attainable is {d_hi!r}",
            max_attainable=d_hi,
        )
    lo = 0.0
    while hi - lo > BISECT_TOL * kappa:
        mid = 0.5 * (lo + hi)
        if d_of(mid) < d_opt_target:
            lo = mid
        else:
            hi = mid
    return validate(base.replace(g_c=0.5 * (lo + hi)))


def figure_params(omega_m_over_kappa: float, delta: Optional[float] = None,
                  d_opt: float = 30.0, q: float = 1000.0, **kw) -> SystemParams:
    """Preset used by the figures: anti-Stokes sideband at -0.5 kappa unless given."""
    if delta is None:
        delta = -0.5 - omega_m_over_kappa
    return from_figure_targets(omega_m_over_kappa, q, d_opt, delta, **kw)


def params_from_config(cfg: dict) -> SystemParams:
    """Build validated parameters from the JSON config layout.

    Rates are divided by ``kappa`` on ingestion. ``g_c`` may be a number,
    ``{"d_opt": x}``, or replaced by the pair ``g_om`` and ``n_photons``.
    """
    units = cfg.get("units", "kappa")
    if units not in ("kappa", "si"):
        raise ConfigError(f"units must be 'kappa' or 'si', got {units!r}")
    try:
        kappa = float(cfg.get("kappa", 1.0))
        if kappa <= 0:
            raise NonPositiveRate(f"must be > 0, got {kappa!r}", "kappa")
        detuning = float(cfg["detuning"]) / kappa
        omega_m = float(cfg["omega_m"]) / kappa
        if "gamma_m" in cfg:
            gamma_m = float(cfg["gamma_m"]) / kappa
        elif "q" in cfg:
            gamma_m = omega_m / float(cfg["q"])
        else:
            raise KeyError("gamma_m")
        ports = {k: float(v) / kappa for k, v in cfg.get("ports", {}).items()}
        unknown = set(ports) - {"left", "right", "vac"}
        if unknown:
            raise ConfigError(f"ports: unknown keys {sorted(unknown)}")
        eps_det = float(cfg.get("eps_det", 1.0))
        coupling = cfg.get("g_c")
        if coupling is None and "g_om" in cfg:
            coupling = 2 * float(cfg["g_om"]) * math.sqrt(float(cfg["n_photons"]))
        if coupling is None:
            raise KeyError("g_c")
    except KeyError as exc:
        raise ConfigError(f"missing config field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed config value: {exc}") from None

    if isinstance(coupling, dict):
        if "d_opt" not in coupling:
            raise ConfigError("g_c: expected a number or {'d_opt': value}")
        return from_figure_targets(omega_m, omega_m / gamma_m, float(coupling["d_opt"]),
                                   detuning, ports=ports, eps_det=eps_det)
    p = SystemParams(
        kappa=1.0,
        detuning=detuning,
        omega_m=omega_m,
        gamma_m=gamma_m,
        g_c=float(coupling) / kappa,
        gamma_left=ports.get("left", 0.0),
        gamma_right=ports.get("right"),
        gamma_vac=ports.get("vac", 0.0),
        eps_det=eps_det,
    )
    return validate(p)


def load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
