"""Preset parameter bundles and the tables behind each figure.

Every builder returns a mapping from file name to :class:`Table`, so the
CLI, the golden-file script and the tests share one code path.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Dict

import numpy as np

from .output import reflection_modulation
from .params import SystemParams, figure_params
from .response import cavity_filter, cavity_phase, h_eta, modulation_transfer, rotation
from .sensing import ForceDrive, SearchConfig, analytic_optimum, numeric_optimize
from .spectra import force_transduction, omit_trace, quadrature_psd

CASES = (0.2, 1.0, 5.0)
ELEMENTS = ("11", "12", "21", "22")
PRESET_NOTE = "D_opt = 30, Q = 1000, one-sided lossless cavity, kappa = 1"


@dataclass
class Table:
    header: list
    rows: list
    source: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        i = self.header.index(name)
        return np.array([r[i] for r in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            for line in self.source:
                fh.write(f"# source: {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            for row in self.rows:
                w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def case_params(omega_m_over_kappa: float) -> SystemParams:
    """Anti-Stokes sideband 0.5 kappa red of cavity resonance."""
    return figure_params(omega_m_over_kappa)


def omit_params(omega_m_over_kappa: float) -> SystemParams:
    """As :func:`case_params`, except the resolved case puts the sideband on resonance."""
    if omega_m_over_kappa >= 5.0:
        return figure_params(omega_m_over_kappa, delta=-omega_m_over_kappa)
    return case_params(omega_m_over_kappa)


def case_grid(omega_m_over_kappa: float, n: int = 2001) -> np.ndarray:
    return np.linspace(0.0, max(3.0, 2.0 * omega_m_over_kappa), n)


def _case_line(wm, p):
    return (f"omega_m/kappa = {wm:g}, Delta/kappa = {p.detuning:g}, "
            f"g_c/kappa = {p.g_c:.17g}")


def _element_rows(wm, w, mats):
    rows = []
    for i, om in enumerate(w):
        for e in ELEMENTS:
            rows.append((om, wm, e, float(mats[i, int(e[0]) - 1, int(e[1]) - 1])))
    return rows


def modulation_power(p: SystemParams, omega) -> np.ndarray:
    """|H^MT|^2 element-wise, divided by the coupling-free power per input column."""
    hmt = modulation_transfer(p, omega)
    empty = cavity_filter(p, omega) @ rotation(cavity_phase(p))
    norm = np.sum(np.abs(empty) ** 2, axis=-2, keepdims=True)
    return np.abs(hmt) ** 2 / norm


def figure2(n: int = 2001) -> Dict[str, Table]:
    rows, src = [], [PRESET_NOTE, "modulation transfer element powers, normalized to g_c = 0"]
    for wm in CASES:
        p = case_params(wm)
        w = case_grid(wm, n)
        rows += _element_rows(wm, w, modulation_power(p, w))
        src.append(_case_line(wm, p))
    return {"figure2.csv": Table(["omega_over_kappa", "omega_m_over_kappa", "element", "value"], rows, src)}


def figure3(n: int = 2001) -> Dict[str, Table]:
    rows, src = [], [PRESET_NOTE, "single-sideband intensity response, raw and relative to the empty cavity"]
    for wm in CASES:
        p = omit_params(wm)
        w, raw, ratio = omit_trace(p, case_grid(wm, n))
        empty = raw / ratio
        rows += [(w[i], wm, raw[i], empty[i], ratio[i]) for i in range(w.size)]
        src.append(_case_line(wm, p))
    header = ["omega_over_kappa", "omega_m_over_kappa", "raw", "empty", "ratio"]
    return {"figure3.csv": Table(header, rows, src)}


def figure4(n: int = 2001) -> Dict[str, Table]:
    rows, src = [], [PRESET_NOTE, "Gamma_m |H_eta|^2 element powers (intracavity quanta per phonon flux)"]
    for wm in CASES:
        p = case_params(wm)
        w = case_grid(wm, n)
        rows += _element_rows(wm, w, p.gamma_m * np.abs(h_eta(p, w)) ** 2)
        src.append(_case_line(wm, p))
    return {"figure4.csv": Table(["omega_over_kappa", "omega_m_over_kappa", "element", "value"], rows, src)}


def figure5(n: int = 2001) -> Dict[str, Table]:
    rows, src = [], [PRESET_NOTE, "reflected modulation transfer element powers"]
    for wm in CASES:
        p = case_params(wm)
        w = case_grid(wm, n)
        rows += _element_rows(wm, w, np.abs(reflection_modulation(p, w)) ** 2)
        src.append(_case_line(wm, p))
    return {"figure5.csv": Table(["omega_over_kappa", "omega_m_over_kappa", "element", "value"], rows, src)}


def _spectrum_rows(w, t, vals, units, tag):
    return [(w[i], t[k], vals[i, k], units, tag) for i in range(w.size) for k in range(t.size)]


SPECTRUM_HEADER = ["omega_over_kappa", "theta_rad", "value", "units", "tag"]


def squeeze_grid(omega_m_over_kappa: float, n: int = 400) -> np.ndarray:
    top = 3.0 * omega_m_over_kappa if omega_m_over_kappa < 1 else 2.0 * omega_m_over_kappa
    return np.linspace(top / n, top, n)


def figure6(n_omega: int = 400, n_theta: int = 91) -> Dict[str, Table]:
    t = np.linspace(0.0, math.pi, n_theta, endpoint=False)
    out = {}
    for wm in CASES:
        p = case_params(wm)
        w = squeeze_grid(wm, n_omega)
        vals = quadrature_psd(p, w, t)
        src = [PRESET_NOTE, "vacuum-driven output spectrum relative to shot noise", _case_line(wm, p)]
        out[f"figure6_wm{wm:g}.csv"] = Table(SPECTRUM_HEADER, _spectrum_rows(w, t, vals, "shot_noise", "ideal"), src)
    return out


def figure7(n_omega: int = 400, n_theta: int = 91, n_opt: int = 41) -> Dict[str, Table]:
    drive = ForceDrive()
    t = np.linspace(0.0, math.pi, n_theta, endpoint=False)
    out = {}
    for wm in CASES:
        p = case_params(wm)
        w = squeeze_grid(wm, n_omega)
        vals = force_transduction(p, w, t, drive)
        src = [PRESET_NOTE, "force-driven output power per unit force, F_BW = p_HO = 1", _case_line(wm, p)]
        out[f"figure7_force_wm{wm:g}.csv"] = Table(SPECTRUM_HEADER, _spectrum_rows(w, t, vals, "quanta_per_force2", "force"), src)
    base = figure_params(0.2)
    rows = []
    for x in np.geomspace(0.2, 5.0, n_opt):
        om = x * base.omega_m
        for d in (0.0, -1.0):
            r = numeric_optimize(base, om, d, drive)
            rows.append((om, d, r.theta, r.c_opt, r.snr / drive.scale(base), r.converged, "optimum"))
        ref = numeric_optimize(base, om, 0.0, drive, SearchConfig(theta=math.pi / 2))
        rows.append((om, 0.0, ref.theta, ref.c_opt, ref.snr / drive.scale(base), ref.converged, "theta_pi_2"))
        a = analytic_optimum(base, om, drive)
        rows.append((om, 0.0, a.theta, a.c_opt, a.snr / drive.scale(base), True, "closed_form"))
    src = ["omega_m/kappa = 0.2, Q = 1000, one-sided lossless cavity",
           "snr column is the prefactor of F^2 / (Gamma_m f_BW p_HO^2)"]
    header = ["omega", "delta", "theta_opt", "c_opt", "snr", "converged", "kind"]
    out["figure7_optimum.csv"] = Table(header, rows, src)
    return out


FIGURES: Dict[int, Callable[[], Dict[str, Table]]] = {
    2: figure2, 3: figure3, 4: figure4, 5: figure5, 6: figure6, 7: figure7,
}
