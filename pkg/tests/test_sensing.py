import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optomech.errors import NotConverged, Unstable, ZeroFrequency
from optomech.params import figure_params, static_coupling_limit
from optomech.sensing import (
    ForceDrive,
    SearchConfig,
    analytic_optimum,
    best_quadrature,
    cooperativity_cap,
    default_deltas,
    delta_sweep,
    numeric_optimize,
    quadratic_forms,
    snr,
    snr_prefactor,
    sql_limits,
)
from optomech.spectra import NoiseModel, force_transduction, observed_spectrum

BASE = figure_params(0.2)
RESONANT = BASE.replace(detuning=0.0)


def test_force_drive_validation_and_mass_constructor():
    with pytest.raises(ValueError):
        ForceDrive(p_ho=0.0)
    d = ForceDrive.from_mass(1e-15, 1e-12, 1e6)
    assert d.p_ho == pytest.approx(math.sqrt(1.054571817e-34 * 1e-12 * 1e6 / 2), rel=1e-9)


def test_snr_matches_spectra_ratio(unresolved):
    # SNR = force-driven power / observed noise in the same quadrature
    p = unresolved.replace(eps_det=0.8)
    drive = ForceDrive(f_ext=0.3, p_ho=2.0, f_bw=1.5)
    w, t = 0.19, np.array([0.2, 1.3, 2.5])
    signal = force_transduction(p, [w], t, drive)[0] * drive.f_ext**2 * drive.f_bw
    noise = observed_spectrum(p, [w], t).values[0]
    assert np.allclose(snr(p, w, t, drive), signal / noise, rtol=1e-12)


def test_snr_scales_with_force_squared(unresolved):
    a = snr(unresolved, 0.19, 0.4, ForceDrive(f_ext=1.0))
    b = snr(unresolved, 0.19, 0.4, ForceDrive(f_ext=3.0))
    assert b == pytest.approx(9 * a, rel=1e-14)
    assert snr(unresolved, 0.19, 0.4, ForceDrive(f_ext=0.0)) == 0


def test_quadratic_forms_are_symmetric(unresolved):
    a, b = quadratic_forms(unresolved, 0.2)
    assert np.allclose(a, a.T) and np.allclose(b, b.T)
    assert np.all(np.linalg.eigvalsh(b) > 0)
    assert np.all(np.linalg.eigvalsh(a) >= -1e-12 * np.abs(a).max())


def test_best_quadrature_beats_grid(unresolved):
    a, b = quadratic_forms(unresolved, 0.19)
    value, theta = best_quadrature(a, b)
    grid = snr_prefactor(unresolved, 0.19, np.linspace(0, math.pi, 721))
    assert value >= grid.max() * (1 - 1e-12)
    assert snr_prefactor(unresolved, 0.19, theta) == pytest.approx(value, rel=1e-10)


def test_sql_limits_values():
    drive = ForceDrive()
    r_therm, r_ext, c_sql = sql_limits(RESONANT, drive, NoiseModel(10.0))
    q = RESONANT.q
    assert r_therm == pytest.approx((1 + 3 / 64 / q**2) * 10)
    assert r_ext == pytest.approx((0.25 - 5 / 256 / q**2) * drive.scale(RESONANT))
    assert c_sql == pytest.approx(0.52)
    big_q = RESONANT.with_q(1e12)
    assert sql_limits(big_q, drive)[1] / drive.scale(big_q) == pytest.approx(0.25, rel=1e-15)


def test_analytic_optimum_at_mechanical_frequency():
    opt = analytic_optimum(RESONANT, RESONANT.omega_m, ForceDrive())
    assert opt.theta == pytest.approx(math.atan(4 * RESONANT.q), rel=1e-12)
    assert opt.snr / ForceDrive().scale(RESONANT) == pytest.approx(1 / (0.25e-6 + 4), rel=1e-12)
    with pytest.raises(ZeroFrequency):
        analytic_optimum(RESONANT, 0.0, ForceDrive())
    small = analytic_optimum(RESONANT, 1e-6, ForceDrive())
    assert small.c_opt > 1e6


def test_numeric_optimizer_sql_point():
    drive = ForceDrive()
    r = numeric_optimize(BASE, BASE.omega_m, 0.0, drive, SearchConfig(theta=math.pi / 2))
    assert r.snr / drive.scale(BASE) == pytest.approx(0.25 - 5 / 256 / BASE.q**2, rel=1e-6)
    assert r.c_opt == pytest.approx(0.52, rel=1e-3)
    assert r.converged


@pytest.mark.parametrize("x", [0.2, 0.5, 2.0, 5.0])
def test_numeric_matches_analytic_on_resonance(x):
    drive = ForceDrive()
    w = x * BASE.omega_m
    num = numeric_optimize(BASE, w, 0.0, drive)
    ana = analytic_optimum(BASE, w, drive)
    assert num.snr == pytest.approx(ana.snr, rel=1e-3)
    assert num.c_opt == pytest.approx(ana.c_opt, rel=1e-3)
    assert num.theta == pytest.approx(ana.theta, rel=1e-3)


def test_optimizer_dominates_hand_picked_points():
    drive = ForceDrive()
    w = 0.7 * BASE.omega_m
    best = numeric_optimize(BASE, w, 0.0, drive)
    for c in (0.1, 1.0, 10.0, 100.0):
        p = RESONANT.with_cooperativity(c)
        assert best.snr >= snr(p, w, np.linspace(0, math.pi, 37), drive).max() * (1 - 1e-12)


def test_losses_reduce_snr():
    drive = ForceDrive()
    w = 0.5 * BASE.omega_m
    values = [numeric_optimize(BASE.replace(eps_det=e), w, 0.0, drive).snr for e in (1.0, 0.9, 0.6, 0.3)]
    assert np.all(np.diff(values) < 0)


def test_cooperativity_cap():
    assert cooperativity_cap(RESONANT) == 1e12
    cap = cooperativity_cap(BASE)
    g = math.sqrt(cap * BASE.kappa * BASE.gamma_m)
    assert g == pytest.approx(0.99 * min(BASE.kappa, static_coupling_limit(BASE)), rel=1e-12)


def test_optimizer_errors():
    with pytest.raises(Unstable):
        numeric_optimize(BASE, 0.2, 0.5, ForceDrive())
    with pytest.raises(NotConverged) as info:
        numeric_optimize(BASE, 0.2, 0.0, ForceDrive(), SearchConfig(max_iter=1, strict=True))
    assert info.value.best is not None


def test_default_deltas():
    d = default_deltas()
    assert d.size == 23
    assert d[0] == pytest.approx(-6.0) and d[-1] == pytest.approx(-0.5)
    assert np.all(d < 0)


def test_delta_sweep_never_beats_resonance():
    drive = ForceDrive()
    omegas = BASE.omega_m * np.array([0.5, 1.0, 2.0])
    rows = delta_sweep(BASE, omegas, drive, default_deltas(5))
    assert len(rows) == 3 * 6
    for i in range(3):
        cell = rows[6 * i: 6 * (i + 1)]
        assert cell[0].delta == 0.0
        assert all(r.snr <= cell[0].snr * (1 + 1e-6) for r in cell[1:])
        assert all(r.delta <= 0 and r.c_opt > 0 and r.snr >= 0 for r in cell)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.0, math.pi), st.floats(0.05, 0.6))
def test_snr_rescaling_invariance(t, theta, w):
    a = snr(BASE, w, theta, ForceDrive(f_ext=1.0))
    b = snr(BASE, w, theta, ForceDrive(f_ext=t))
    assert b / t**2 == pytest.approx(a, rel=1e-12)
