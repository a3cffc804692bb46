"""Gust signals: the 1-minus-cosine discrete gust and Von Karman turbulence.

Turbulence is white noise through a third-order rational approximation of
the Von Karman vertical spectrum in the variable ``tau s`` with
``tau = L_w / U_inf``::

    H(s) = sqrt(tau) * (1 + n1 p + n2 p^2) / (1 + d1 p + d2 p^2 + d3 p^3),  p = tau s

The coefficients are configuration data (:class:`ShapingFilter`).  The
filter is discretized exactly for a piecewise-constant white-noise sample
(Van Loan), started from its stationary covariance and scaled so the
stationary output variance is exactly ``sigma_w^2``.
"""

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError

VK_CONSTANT = 1.339


@dataclass(frozen=True)
class DiscreteGust:
    """``w0``: peak velocity (m/s); ``H_g``: gradient distance (m), total length ``2 H_g``."""

    w0: float
    H_g: float
    U_inf: float
    start_time: float = 0.0

    def __post_init__(self):
        if not self.H_g > 0:
            raise ConfigError("H_g: gust gradient distance must be > 0")
        if not self.U_inf > 0:
            raise ConfigError("U_inf: must be > 0")
        if not (np.isfinite(self.w0) and np.isfinite(self.start_time)):
            raise ConfigError("w0 and start_time must be finite")

    @property
    def duration(self):
        return 2.0 * self.H_g / self.U_inf

    @property
    def end_time(self):
        return self.start_time + self.duration

    def __call__(self, t):
        return discrete_gust(self, t)


def discrete_gust(g, t):
    """Gust velocity at time(s) ``t``; zero outside the gust window."""
    t = np.asarray(t, dtype=float)
    s = t - g.start_time
    inside = (s >= 0.0) & (s <= g.duration)
    w = 0.5 * g.w0 * (1.0 - np.cos(np.pi * g.U_inf * s / g.H_g))
    out = np.where(inside, w, 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ShapingFilter:
    """Numerator ``(1, n1, n2)`` and denominator ``(1, d1, d2, d3)`` in ``p = tau s``.

    The defaults are the widely used third-order fit of the vertical Von
    Karman spectrum.
    """

    num: tuple = (1.0, 2.7478, 0.3398)
    den: tuple = (1.0, 2.9958, 1.9754, 0.1539)

    def __post_init__(self):
        if len(self.num) != 3 or len(self.den) != 4:
            raise ConfigError("shaping filter: need 3 numerator and 4 denominator coefficients")
        if self.den[0] != 1.0 or self.num[0] != 1.0:
            raise ConfigError("shaping filter: leading coefficients must be 1")
        if not all(np.isfinite(self.num)) or not all(c > 0 for c in self.den):
            raise ConfigError("shaping filter: denominator coefficients must be positive")

    def poles(self, tau=1.0):
        return np.roots(self.den[::-1]) / tau

    def state_space(self, tau):
        """Controllable canonical realization in physical time (unit-intensity input)."""
        d1, d2, d3 = self.den[1:]
        _, n1, n2 = self.num
        a = np.array([1.0, d2 / d3, d1 / d3, 1.0 / d3])  # monic in p
        A = np.zeros((3, 3))
        A[0, 1] = A[1, 2] = 1.0
        A[2] = -a[:0:-1]
        B = np.array([[0.0], [0.0], [1.0]])
        C = np.array([[1.0, n1, n2]]) / d3
        # G(tau s) = C (tau s I - A_p)^-1 B = C (s I - A_p / tau)^-1 B / tau
        return A / tau, B / tau, np.sqrt(tau) * C


def vonkarman_psd(omega, sigma_w, L_w, U_inf):
    """One-sided (in rad/s) vertical Von Karman spectrum; integrates to ``sigma_w^2``."""
    x = VK_CONSTANT * L_w * np.asarray(omega, dtype=float) / U_inf
    return sigma_w**2 * L_w / (np.pi * U_inf) * (1.0 + 8.0 / 3.0 * x * x) / (1.0 + x * x) ** (11.0 / 6.0)


def filter_psd(omega, sigma_w, L_w, U_inf, shaping=None):
    """One-sided spectrum of the shaping-filter output after variance normalization."""
    shaping = shaping or ShapingFilter()
    A, B, C = shaping.state_space(L_w / U_inf)
    P = sla.solve_continuous_lyapunov(A, -B @ B.T)
    var = (C @ P @ C.T).item()
    s = 1j * np.asarray(omega, dtype=float)
    p = s * L_w / U_inf
    n1, n2 = shaping.num[1:]
    d1, d2, d3 = shaping.den[1:]
    H = np.sqrt(L_w / U_inf) * (1 + n1 * p + n2 * p * p) / (1 + d1 * p + d2 * p * p + d3 * p**3)
    # unit-intensity white noise has one-sided spectrum 1/pi in rad/s
    return sigma_w**2 / var * np.abs(H) ** 2 / np.pi


@dataclass(frozen=True)
class TurbulenceConfig:
    sigma_w: float
    L_w: float
    U_inf: float
    seed: int = 0
    duration: float = 60.0
    sample_rate: float = 100.0

    def __post_init__(self):
        if self.sigma_w < 0:
            raise ConfigError("sigma_w: must be >= 0")
        for name in ("L_w", "U_inf", "duration", "sample_rate"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}: must be > 0")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError("seed: non-negative integer required")
        need = 20.0 * self.U_inf / self.L_w
        if self.sample_rate < need:
            raise ConfigError(
                f"sample_rate {self.sample_rate:g} Hz below 20 U_inf / L_w = {need:g} Hz; spectral knee unresolved"
            )


@dataclass(frozen=True)
class GustSignal:
    """Sampled gust history, linearly interpolated between samples (zero outside)."""

    t: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        if self.t.ndim != 1 or self.t.shape != self.w.shape or self.t.size < 2:
            raise ConfigError("gust signal: t and w must be equal-length 1-D arrays")
        if np.any(np.diff(self.t) <= 0):
            raise ConfigError("gust signal: time stamps must increase strictly")
        if not np.all(np.isfinite(self.w)):
            raise ConfigError("gust signal: non-finite velocity")

    @property
    def end_time(self):
        return float(self.t[-1])

    def __call__(self, t):
        out = np.interp(t, self.t, self.w, left=0.0, right=0.0)
        return out if np.ndim(out) else float(out)


def vonkarman_realization(cfg, shaping=None):
    """Seeded turbulence realization sampled at ``cfg.sample_rate``."""
    shaping = shaping or ShapingFilter()
    n_samples = int(round(cfg.duration * cfg.sample_rate)) + 1
    t = np.arange(n_samples) / cfg.sample_rate
    if cfg.sigma_w == 0:
        return GustSignal(t, np.zeros(n_samples))
    dt = 1.0 / cfg.sample_rate
    A, B, C = shaping.state_space(cfg.L_w / cfg.U_inf)
    if np.linalg.eigvals(A).real.max() >= 0:
        raise ConfigError("shaping filter is not stable")
    n = A.shape[0]
    # Van Loan: transition matrix and exact covariance of the sampled noise
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = -A
    M[:n, n:] = B @ B.T
    M[n:, n:] = A.T
    E = sla.expm(M * dt)
    Phi = E[n:, n:].T
    Qd = Phi @ E[:n, n:]
    Lq = np.linalg.cholesky(0.5 * (Qd + Qd.T))
    P = sla.solve_continuous_lyapunov(A, -B @ B.T)
    Lp = np.linalg.cholesky(0.5 * (P + P.T))
    c = (C / np.sqrt((C @ P @ C.T).item()) * cfg.sigma_w).ravel()

    rng = np.random.default_rng(cfg.seed)
    xi = rng.standard_normal((n_samples, n))
    x = Lp @ xi[0]
    w = np.empty(n_samples)
    w[0] = c @ x
    for k in range(1, n_samples):
        x = Phi @ x + Lq @ xi[k]
        w[k] = c @ x
    return GustSignal(t, w)


def write_gust_csv(signal, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["t", "w_g"])
        for t, w in zip(signal.t, signal.w):
            out.writerow([repr(float(t)), repr(float(w))])


def read_gust_csv(path):
    """Two-column CSV (time s, velocity m/s) with an optional header row."""
    rows = []
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            if len(row) != 2:
                raise ConfigError(f"{path}: line {k + 1}: expected 2 columns, got {len(row)}")
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if k == 0:
                    continue
                raise ConfigError(f"{path}: line {k + 1}: non-numeric value") from None
    if len(rows) < 2:
        raise ConfigError(f"{path}: need at least two samples")
    data = np.array(rows)
    return GustSignal(data[:, 0], data[:, 1])
