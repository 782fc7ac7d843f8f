"""Output fields: per-port transfer matrices, carrier phases and detection loss.

Ports are labelled ``"L"``, ``"R"`` and ``"V"`` (loss channel); the
mechanical bath input is ``"eta"``. The boundary condition
alpha_in + alpha_out = sqrt(gamma) a gives every matrix below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidPort, ZeroCarrier
from .params import SystemParams
from .response import cavity_phase, h_alpha, h_eta, rotation

OPTICAL_PORTS = ("L", "R", "V")
INPUT_CHANNELS = ("L", "R", "V", "eta")
DETECTION_PORTS = ("L", "R")

_ALIASES = {
    "l": "L", "left": "L",
    "r": "R", "right": "R",
    "v": "V", "vac": "V", "vacuum": "V",
    "eta": "eta", "mech": "eta", "mechanical": "eta",
}


def normalize_channel(label: str) -> str:
    try:
        return _ALIASES[str(label).lower()]
    except KeyError:
        raise InvalidPort(f"unknown port or channel {label!r}") from None


def _detection_port(label: str) -> str:
    j = normalize_channel(label)
    if j not in DETECTION_PORTS:
        raise InvalidPort(f"{label!r} is not a detection port")
    return j


def _transfer(p, omega, j, k, exact):
    gj = p.port_rate(j)
    if k == "eta":
        return math.sqrt(gj * p.gamma_m) * h_eta(p, omega, exact)
    ha = h_alpha(p, omega, exact)
    if k == j:
        return gj * ha - np.eye(2)
    return math.sqrt(gj * p.port_rate(k)) * ha


def port_transfer(p: SystemParams, omega, out_port: str, in_channel: str, exact: bool = True):
    """Transfer matrix H_jk from input channel ``k`` to output port ``j``.

    Parameters
    ----------
    p : SystemParams
    omega : float or array_like
    out_port : {"L", "R"}
    in_channel : {"L", "R", "V", "eta"}
    exact : bool
        Use the resolvent (default) or the closed-form composition.
    """
    j = _detection_port(out_port)
    k = normalize_channel(in_channel)
    return _transfer(p, omega, j, k, exact)


def scattering_matrix(p: SystemParams, omega, exact: bool = True):
    """Full output scattering, shape (..., 6, 8).

    Rows are the output quadratures of (L, R, V); columns are the input
    quadratures of (L, R, V, eta). The loss-port rows are only meant for
    bookkeeping such as passivity checks.
    """
    blocks = [[_transfer(p, omega, j, k, exact) for k in INPUT_CHANNELS] for j in OPTICAL_PORTS]
    return np.concatenate([np.concatenate(row, axis=-1) for row in blocks], axis=-2)


def carrier_phases(p: SystemParams, port: str = "R") -> tuple[float, float]:
    """Carrier phases (psi_c, phi_c) for reflection from ``port``.

    ``phi_c`` is the phase of the static reflected carrier relative to the
    intracavity carrier, from the boundary condition at zero frequency. For a
    one-sided lossless cavity it reduces to -atan2(2 kappa Delta, kappa^2 - Delta^2).

    Raises
    ------
    ZeroCarrier
        If the reflected carrier amplitude vanishes (critical coupling on resonance).
    """
    j = _detection_port(port)
    psi = cavity_phase(p)
    z = complex(p.port_rate(j) - p.kappa, p.detuning)
    if abs(z) <= 1e-12 * p.kappa:
        raise ZeroCarrier(f"no reflected carrier at port {j}")
    phi = -math.atan2(z.imag, z.real) - psi
    phi = math.remainder(phi, 2 * math.pi)
    if phi <= -math.pi:
        phi += 2 * math.pi
    return psi, phi


def reflection_modulation(p: SystemParams, omega, port: str = "R", exact: bool = True):
    """AM/PM modulation transfer in reflection, R(-psi) R(-phi) H_jj R(psi)."""
    j = _detection_port(port)
    psi, phi = carrier_phases(p, j)
    hjj = _transfer(p, omega, j, j, exact)
    return rotation(-psi) @ rotation(-phi) @ hjj @ rotation(psi)


@dataclass(frozen=True)
class Efficiencies:
    eps_out: float
    eps_det: float = 1.0

    def __post_init__(self):
        for name in ("eps_out", "eps_det"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def eps_tot(self) -> float:
        return self.eps_out * self.eps_det

    @classmethod
    def from_params(cls, p: SystemParams, port: str = "R") -> "Efficiencies":
        j = _detection_port(port)
        return cls(p.port_rate(j) / (2 * p.kappa), p.eps_det)


def apply_efficiency(ideal, eps):
    """Mix a shot-noise-relative spectrum with vacuum: eps S + 1 - eps.

    ``eps`` is either an :class:`Efficiencies` or the total efficiency.
    """
    e = eps.eps_tot if isinstance(eps, Efficiencies) else float(eps)
    return e * np.asarray(ideal) + (1.0 - e)
