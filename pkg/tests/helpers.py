"""Shared strategies and helpers for the test suite."""
import math

import numpy as np
from hypothesis import strategies as st

from optomech.params import SystemParams, figure_params, is_stable, static_coupling_limit


@st.composite
def stable_params(draw, two_sided=False, lossy=False, detuning=None):
    kappa = 1.0
    delta = draw(st.floats(-3.0, 0.0)) if detuning is None else detuning
    omega_m = draw(st.floats(0.05, 5.0))
    q = draw(st.floats(10.0, 1e4))
    base = SystemParams(kappa, delta, omega_m, omega_m / q, 0.0)
    g_max = 0.95 * min(kappa, static_coupling_limit(base))
    g = draw(st.floats(0.0, g_max))
    left = draw(st.floats(0.0, 1.0)) if two_sided else 0.0
    vac = draw(st.floats(0.0, 0.5)) if lossy else 0.0
    eps_det = draw(st.floats(0.0, 1.0))
    p = base.replace(g_c=g, gamma_left=left, gamma_vac=vac, gamma_right=2 * kappa - left - vac,
                     eps_det=eps_det)
    assert is_stable(p)
    return p


def random_params(rng: np.random.Generator, n: int):
    """Deterministic batch of stable parameter sets for accuracy sweeps."""
    out = []
    while len(out) < n:
        delta = -rng.uniform(0.0, 3.0)
        omega_m = rng.uniform(0.05, 5.0)
        q = 10 ** rng.uniform(1, 4)
        base = SystemParams(1.0, delta, omega_m, omega_m / q, 0.0)
        g = rng.uniform(0.0, 0.95) * min(1.0, static_coupling_limit(base))
        left = rng.uniform(0.0, 1.0)
        p = base.replace(g_c=g, gamma_left=left, gamma_right=2.0 - left)
        if is_stable(p):
            out.append(p)
    return out


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


PI = math.pi
