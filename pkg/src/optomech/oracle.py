"""Time-domain oracle for the frequency-domain modules.

The linear Langevin system dx = M x dt + L dW is integrated with white
optical vacuum inputs (unit symmetrized PSD per quadrature) and a mechanical
bath of level 2 n_th + 1. The reflected field at one port is recorded as
block averages of sqrt(gamma_j) (a+, a-) - dW_j / dt.

Two steppers share one compiled kernel:

``"euler"``
    Euler-Maruyama with a midpoint output rule.
``"exact"``
    Exact sampling of the joint Gaussian transition of the state and of the
    integrated output over one step (Van Loan), so the only approximation
    left is the finite record.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np
from scipy.linalg import expm, solve_continuous_lyapunov
from scipy.signal import welch

from .errors import ConfigError, NotSettled, TooShort, UnstableBlowup
from .output import INPUT_CHANNELS, _detection_port
from .params import SystemParams, drift_matrix, effective_frequency, optical_damping
from .spectra import NoiseModel

RESOLUTION_GUARD = 0.05
BLOWUP = 1e150


@dataclass(frozen=True)
class SimConfig:
    """Integration settings.

    Parameters
    ----------
    dt : float
        Step size in the same unit as the rates.
    duration : float
        Recorded time per trajectory, after burn-in.
    n_traj : int
        Independent trajectories, each with its own random stream.
    seed : int
        Root seed; trajectory streams are spawned from it.
    burn_in : float or None
        Discarded initial time. ``None`` uses the minimum allowed value.
    stride : int
        Steps per recorded sample; outputs are averaged over the block.
    method : {"euler", "exact"}
    """

    dt: float = 2e-3
    duration: float = 100.0
    n_traj: int = 1
    seed: int = 0
    burn_in: Optional[float] = None
    stride: int = 1
    method: str = "euler"

    @property
    def tau(self) -> float:
        return self.dt * self.stride


def min_burn_in(p: SystemParams) -> float:
    """5 / min(Gamma_m + Gamma_opt(omega_eff), kappa)."""
    w_eff = effective_frequency(p)[0]
    rate = p.gamma_m + optical_damping(p, w_eff)
    if not np.isfinite(rate) or rate <= 0:
        rate = -float(np.max(np.linalg.eigvals(drift_matrix(p)).real))
    return 5.0 / min(rate, p.kappa)


def check_config(p: SystemParams, cfg: SimConfig) -> float:
    """Validate ``cfg`` against ``p``; returns the burn-in time to use."""
    fastest = max(p.kappa, p.omega_m, abs(p.detuning))
    if not cfg.dt * fastest < RESOLUTION_GUARD:
        raise ConfigError(f"dt * max rate = {cfg.dt * fastest:.3g} must be < {RESOLUTION_GUARD}")
    if cfg.method not in ("euler", "exact"):
        raise ConfigError(f"unknown method {cfg.method!r}")
    if cfg.n_traj < 1 or cfg.stride < 1 or cfg.duration <= 0:
        raise ConfigError("n_traj, stride and duration must be positive")
    lo = min_burn_in(p)
    burn = lo if cfg.burn_in is None else cfg.burn_in
    if burn < lo * (1 - 1e-12):
        raise ConfigError(f"burn_in {burn:.4g} is below the required {lo:.4g}")
    return burn


def noise_channels(p: SystemParams, noise: NoiseModel):
    """Input matrix L (4 x m) and the channel labels, skipping zero-rate ports."""
    cols, labels = [], []
    for k in INPUT_CHANNELS:
        if k == "eta":
            amp, rows = math.sqrt(p.gamma_m * noise.mech_level), (2, 3)
        else:
            rate = p.port_rate(k)
            if rate == 0:
                continue
            amp, rows = math.sqrt(rate), (0, 1)
        for q, r in enumerate(rows):
            c = np.zeros(4)
            c[r] = amp
            cols.append(c)
            labels.append((k, q))
    return np.array(cols).T, labels


def _port_selector(labels, port):
    e = np.zeros((2, len(labels)))
    for i, (k, q) in enumerate(labels):
        if k == port:
            e[q, i] = 1.0
    return e


def step_matrices(p: SystemParams, noise: NoiseModel, dt: float, port: str = "R",
                  method: str = "euler"):
    """Matrices of the one-step map x' = Phi x + Bx z, Y = Cy x + Dy z with z ~ N(0, I).

    ``Y`` is the output integrated over the step.
    """
    m = drift_matrix(p)
    lin, labels = noise_channels(p, noise)
    e = _port_selector(labels, port)
    c = math.sqrt(p.port_rate(port)) * np.eye(2, 4)
    if method == "euler":
        phi = np.eye(4) + m * dt
        bx = math.sqrt(dt) * lin
        cy = dt * c @ (np.eye(4) + phi) / 2
        dy = dt * c @ bx / 2 - math.sqrt(dt) * e
        return phi, bx, cy, dy
    a = np.zeros((6, 6))
    a[:4, :4] = m
    a[4:, :4] = c
    b = np.vstack([lin, -e])
    n = 6
    van = np.zeros((2 * n, 2 * n))
    van[:n, :n] = -a
    van[:n, n:] = b @ b.T
    van[n:, n:] = a.T
    f = expm(van * dt)
    phi_a = f[n:, n:].T
    q = phi_a @ f[:n, n:]
    q = 0.5 * (q + q.T)
    lam, vec = np.linalg.eigh(q)
    s = vec * np.sqrt(np.clip(lam, 0.0, None))
    return phi_a[:4, :4], s[:4], phi_a[4:, :4], s[4:]


@numba.njit(nogil=True, cache=True)
def _kernel(rng, phi, bx, cy, dy, x, n_blocks, stride, states, outputs):
    nz = bx.shape[1]
    z = np.empty(nz)
    xn = np.empty(4)
    for k in range(n_blocks):
        y0 = 0.0
        y1 = 0.0
        for _ in range(stride):
            for i in range(nz):
                z[i] = rng.standard_normal()
            for i in range(4):
                acc = 0.0
                for j in range(4):
                    acc += phi[i, j] * x[j]
                for j in range(nz):
                    acc += bx[i, j] * z[j]
                xn[i] = acc
            a0 = 0.0
            a1 = 0.0
            for j in range(4):
                a0 += cy[0, j] * x[j]
                a1 += cy[1, j] * x[j]
            for j in range(nz):
                a0 += dy[0, j] * z[j]
                a1 += dy[1, j] * z[j]
            y0 += a0
            y1 += a1
            for i in range(4):
                x[i] = xn[i]
        if not (abs(x[0]) + abs(x[1]) + abs(x[2]) + abs(x[3]) < BLOWUP):
            return k
        if states.shape[0] > 0:
            for i in range(4):
                states[k, i] = x[i]
            outputs[k, 0] = y0
            outputs[k, 1] = y1
    return n_blocks


class Stream:
    """One trajectory's integrator state, advanced in blocks of ``stride`` steps."""

    def __init__(self, mats, stride, dt, rng, x0=None):
        self.mats = mats
        self.stride = stride
        self.dt = dt
        self.rng = rng
        self.x = np.zeros(4) if x0 is None else np.array(x0, dtype=float)

    def advance(self, n_blocks: int, record: bool = True):
        shape = (n_blocks if record else 0, 4)
        states = np.empty(shape)
        outputs = np.empty((shape[0], 2))
        done = _kernel(self.rng, *self.mats, self.x, n_blocks, self.stride, states, outputs)
        if done < n_blocks:
            raise UnstableBlowup("state exceeded the overflow guard")
        return states, outputs / (self.stride * self.dt)


@dataclass
class Trajectory:
    """Recorded samples; ``states`` are taken at the end of each block."""

    t: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    tau: float
    port: str
    meta: dict = field(default_factory=dict)


def thread_count() -> int:
    env = os.environ.get("OPTOMECH_THREADS")
    return max(1, int(env)) if env else (os.cpu_count() or 1)


def _streams(p, noise, cfg, port, x0=None):
    burn = check_config(p, cfg)
    mats = step_matrices(p, noise, cfg.dt, port, cfg.method)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_traj)
    streams = [Stream(mats, cfg.stride, cfg.dt, np.random.Generator(np.random.Philox(s)), x0)
               for s in seeds]
    n_burn = int(math.ceil(burn / cfg.tau))
    return streams, n_burn


def _parallel(fn, items):
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def integrate(p: SystemParams, noise: Optional[NoiseModel] = None, cfg: SimConfig = SimConfig(),
              port: str = "R", x0=None) -> Trajectory:
    """Integrate ``cfg.n_traj`` independent trajectories of the Langevin system.

    Raises
    ------
    ConfigError
        If the step violates the resolution guard or burn-in is too short.
    UnstableBlowup
        If a state leaves the overflow guard.
    """
    j = _detection_port(port)
    noise = noise or NoiseModel()
    streams, n_burn = _streams(p, noise, cfg, j, x0)
    n_rec = int(round(cfg.duration / cfg.tau))

    def run(s):
        s.advance(n_burn, record=False)
        return s.advance(n_rec)

    res = _parallel(run, streams)
    t = (np.arange(n_rec) + 1) * cfg.tau
    return Trajectory(t, np.stack([r[0] for r in res]), np.stack([r[1] for r in res]),
                      cfg.tau, j, {"burn_in_blocks": n_burn, "method": cfg.method})


def decay_trajectory(p: SystemParams, x0, t) -> np.ndarray:
    """Noise-free solution x(t) = exp(M t) x0 sampled at times ``t``."""
    m = drift_matrix(p)
    return np.stack([expm(m * ti) @ np.asarray(x0, float) for ti in np.atleast_1d(t)])


def quadrature(outputs: np.ndarray, theta: float) -> np.ndarray:
    return math.cos(theta) * outputs[..., 0] + math.sin(theta) * outputs[..., 1]


def psd_estimate(samples: np.ndarray, tau: float, nperseg: int):
    """Welch estimate (Hann window, 50% overlap) of a real record.

    Parameters
    ----------
    samples : ndarray, shape (..., n)
        Leading axes are independent records and are averaged.
    tau : float
        Sample interval.
    nperseg : int

    Returns
    -------
    omega : ndarray
        Angular frequencies in ascending order.
    psd : ndarray
        Two-sided density in the symmetrized convention (white unit input -> 1).
    n_segments : int
        Total number of averaged segments.
    """
    x = np.asarray(samples, dtype=float)
    n = x.shape[-1]
    per = 0 if n < nperseg else (n - nperseg) // (nperseg // 2) + 1
    total = per * int(np.prod(x.shape[:-1]))
    if total < 8:
        raise TooShort(f"{total} segments, need at least 8")
    f, pxx = welch(x, fs=1.0 / tau, window="hann", nperseg=nperseg, noverlap=nperseg // 2,
                   return_onesided=False, detrend=False, scaling="density", axis=-1)
    pxx = pxx.reshape(-1, pxx.shape[-1]).mean(axis=0)
    order = np.argsort(f)
    return 2 * math.pi * f[order], pxx[order], total


class WelchAccumulator:
    """Streaming Welch average for one record, identical to a single long call."""

    def __init__(self, tau: float, nperseg: int):
        self.tau = tau
        self.nperseg = nperseg
        self.hop = nperseg // 2
        self.tail = np.empty(0)
        self.total = None
        self.count = 0

    def feed(self, chunk: np.ndarray) -> None:
        buf = np.concatenate([self.tail, chunk])
        if buf.size < self.nperseg:
            self.tail = buf
            return
        k = (buf.size - self.nperseg) // self.hop + 1
        used = buf[: (k - 1) * self.hop + self.nperseg]
        f, pxx = welch(used, fs=1.0 / self.tau, window="hann", nperseg=self.nperseg,
                       noverlap=self.nperseg - self.hop, return_onesided=False,
                       detrend=False, scaling="density")
        self.freq = f
        self.total = pxx * k if self.total is None else self.total + pxx * k
        self.count += k
        self.tail = buf[k * self.hop:]

    def result(self):
        order = np.argsort(self.freq)
        return 2 * math.pi * self.freq[order], self.total[order] / self.count


@dataclass
class StreamResult:
    """Streamed Welch estimates plus the sample covariance of the state."""

    omega: np.ndarray
    psd: np.ndarray
    n_segments: int
    covariance: np.ndarray
    n_samples: int


def stream_psd(p: SystemParams, thetas: Sequence[float], nperseg: int, n_segments: int,
               noise: Optional[NoiseModel] = None, cfg: SimConfig = SimConfig(),
               port: str = "R", chunk_segments: int = 4) -> StreamResult:
    """Welch estimates of several output quadratures without storing the record.

    ``n_segments`` counts segments over all trajectories and ``cfg.duration``
    is ignored. ``psd`` has shape (len(thetas), nperseg).
    """
    j = _detection_port(port)
    noise = noise or NoiseModel()
    streams, n_burn = _streams(p, noise, cfg, j)
    per = int(math.ceil(n_segments / len(streams)))
    hop = nperseg // 2

    def run(s):
        s.advance(n_burn, record=False)
        accs = [WelchAccumulator(cfg.tau, nperseg) for _ in thetas]
        second = np.zeros((4, 4))
        need = (per - 1) * hop + nperseg
        done = 0
        while done < need:
            n = min(chunk_segments * hop, need - done)
            states, out = s.advance(n)
            second += states.T @ states
            for acc, th in zip(accs, thetas):
                acc.feed(quadrature(out, th))
            done += n
        return accs, second, need

    res = _parallel(run, streams)
    omega = None
    psd = np.zeros((len(thetas), nperseg))
    count, samples, second = 0, 0, np.zeros((4, 4))
    for accs, sec, n in res:
        for i, acc in enumerate(accs):
            omega, val = acc.result()
            psd[i] += val * acc.count
        count += accs[0].count
        second += sec
        samples += n
    return StreamResult(omega, psd / count, count, second / samples, samples)


def _dirichlet(nu, n):
    """sum_{k<n} exp(-2 pi i nu k) in closed form."""
    den = np.sin(math.pi * nu)
    small = np.abs(den) < 1e-15
    safe = np.where(small, 1.0, den)
    ratio = np.where(small, float(n), np.sin(math.pi * nu * n) / safe)
    return np.exp(-1j * math.pi * nu * (n - 1)) * ratio


def hann_kernel(d_omega: np.ndarray, tau: float, nperseg: int) -> np.ndarray:
    """Spectral window of the Welch estimator; integrates to 1 against d omega / 2 pi."""
    nu = np.asarray(d_omega, dtype=float) * tau / (2 * math.pi)
    n = nperseg
    w = 0.5 * _dirichlet(nu, n) - 0.25 * _dirichlet(nu - 1.0 / n, n) - 0.25 * _dirichlet(nu + 1.0 / n, n)
    return np.abs(w) ** 2 * tau / (0.375 * n)


def expected_welch(spectrum, omega_bins: np.ndarray, tau: float, nperseg: int,
                   half_width_bins: int = 48, points_per_bin: int = 16) -> np.ndarray:
    """Mean of the Welch estimator for a record with spectrum ``spectrum(omega)``.

    Convolves the spectrum with :func:`hann_kernel` by trapezoidal quadrature
    over +/- ``half_width_bins`` frequency bins around each target.
    """
    bin_w = 2 * math.pi / (nperseg * tau)
    u = np.linspace(-half_width_bins, half_width_bins, 2 * half_width_bins * points_per_bin + 1) * bin_w
    ker = hann_kernel(u, tau, nperseg)
    out = []
    for w0 in np.atleast_1d(omega_bins):
        s = spectrum(w0 - u)
        out.append(np.trapezoid(s * ker, u) / (2 * math.pi))
    return np.array(out)


def lyapunov_covariance(p: SystemParams, noise: Optional[NoiseModel] = None) -> np.ndarray:
    """Stationary covariance C solving M C + C M^T + L L^T = 0."""
    noise = noise or NoiseModel()
    lin, _ = noise_channels(p, noise)
    return solve_continuous_lyapunov(drift_matrix(p), -lin @ lin.T)


def sine_response(p: SystemParams, omega: float, channel: str, quadrature_index: int,
                  port: str = "R", steps_per_period: int = 64, settle: float = 1e-8,
                  window_periods: int = 1):
    """Steady-state complex amplitudes for a unit cosine on one input quadrature.

    The drive cos(omega t) enters through the ``channel`` input ("L", "R",
    "V" or "eta") in quadrature ``quadrature_index`` (0 for +/z, 1 for -/p).
    The linear system is propagated exactly over each sub-step (drive
    included), so the result differs from the resolvent only by unsettled
    transients. Amplitudes follow x(t) = Re[X exp(-i omega t)].

    Returns
    -------
    states : ndarray of complex, shape (4,)
    output : ndarray of complex, shape (2,)
        Reflected field quadratures at ``port``.

    Raises
    ------
    NotSettled
        If two consecutive windows differ by more than 1e-6 of the amplitude.
    """
    from .output import normalize_channel

    j = _detection_port(port)
    k = normalize_channel(channel)
    if omega <= 0:
        raise ConfigError("drive frequency must be positive")
    b = np.zeros(4)
    if k == "eta":
        b[2 + quadrature_index] = math.sqrt(p.gamma_m)
    else:
        b[quadrature_index] = math.sqrt(p.port_rate(k))
    aug = np.zeros((6, 6))
    aug[:4, :4] = drift_matrix(p)
    aug[:4, 4] = b
    aug[4, 5] = -omega
    aug[5, 4] = omega
    period = 2 * math.pi / omega
    h = period / steps_per_period
    step = expm(aug * h)
    rate = -float(np.max(np.linalg.eigvals(drift_matrix(p)).real))
    n_burn = int(math.ceil(math.log(1.0 / settle) / (rate * period)))
    state = np.zeros(6)
    state[4] = 1.0
    state = np.linalg.matrix_power(np.linalg.matrix_power(step, steps_per_period), n_burn) @ state
    n = steps_per_period * window_periods

    def window(s):
        acc = np.zeros(4, dtype=complex)
        for i in range(n):
            acc += s[:4] * np.exp(1j * omega * (i * h))
            s = step @ s
        # state[4:] tracks (cos, sin) of the drive; rephase to drive time zero
        phase = complex(s[4], s[5])
        return 2.0 * acc / n * phase, s

    first, state = window(state)
    second, state = window(state)
    scale = max(np.max(np.abs(second)), 1e-300)
    if np.max(np.abs(second - first)) > 1e-6 * scale:
        raise NotSettled("transient has not decayed below 1e-6 of the response")
    out = math.sqrt(p.port_rate(j)) * second[:2]
    if k == j:
        out[quadrature_index] -= 1.0
    return second, out
