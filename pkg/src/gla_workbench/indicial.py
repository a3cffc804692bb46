"""Exponential approximations of the Wagner and Kussner indicial functions.

Both functions are written in reduced time ``s = U t / b``::

    phi(s) = 1 - sum_i A_i exp(-beta_i s)      (Wagner, step in angle of attack)
    psi(s) = 1 - sum_j C_j exp(-eps_j s)       (Kussner, sharp-edged gust)

Each exponential maps onto one first-order lag state, which is how the
aeroelastic model realizes the Duhamel integrals in the time domain.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

# R.T. Jones two-term Wagner fit.
JONES_WAGNER = ((0.165, 0.0455), (0.335, 0.3))

# Three-term Kussner fit, coefficients rescaled so that psi(0) = 0 exactly.
_KUSSNER_RAW = ((0.236, 0.058), (0.513, 0.364), (0.171, 2.42))
_KSUM = sum(c for c, _ in _KUSSNER_RAW)
DEFAULT_KUSSNER = tuple((c / _KSUM, e) for c, e in _KUSSNER_RAW)


@dataclass(frozen=True)
class IndicialApprox:
    """Coefficient/exponent pairs for the Wagner and Kussner approximations."""

    wagner_terms: tuple = JONES_WAGNER
    kussner_terms: tuple = DEFAULT_KUSSNER
    wagner_initial: float = 0.5
    kussner_initial: float = 0.0

    def __post_init__(self):
        wt = tuple((float(a), float(e)) for a, e in self.wagner_terms)
        kt = tuple((float(a), float(e)) for a, e in self.kussner_terms)
        object.__setattr__(self, "wagner_terms", wt)
        object.__setattr__(self, "kussner_terms", kt)
        if len(kt) != 3:
            raise ConfigError(f"kussner_terms: exactly 3 terms required, got {len(kt)}")
        if not wt:
            raise ConfigError("wagner_terms: at least one term required")
        for name, terms in (("wagner_terms", wt), ("kussner_terms", kt)):
            if any(e <= 0 for _, e in terms):
                raise ConfigError(f"{name}: all exponents must be positive")
        if abs(1.0 - sum(a for a, _ in wt) - self.wagner_initial) > 1e-9:
            raise ConfigError("wagner_terms: coefficients inconsistent with wagner_initial")
        if abs(1.0 - sum(a for a, _ in kt) - self.kussner_initial) > 1e-9:
            raise ConfigError("kussner_terms: coefficients inconsistent with kussner_initial")

    @property
    def wagner_coefficients(self):
        return np.array([a for a, _ in self.wagner_terms])

    @property
    def wagner_exponents(self):
        return np.array([e for _, e in self.wagner_terms])

    @property
    def kussner_coefficients(self):
        return np.array([a for a, _ in self.kussner_terms])

    @property
    def kussner_exponents(self):
        return np.array([e for _, e in self.kussner_terms])


def _exp_sum(s, terms):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("reduced_time must be non-negative")
    out = np.ones_like(s)
    for a, e in terms:
        out = out - a * np.exp(-e * s)
    return out if out.ndim else float(out)


def wagner_value(reduced_time, approx=None):
    """Lift deficiency factor phi(s) after a unit step in angle of attack."""
    approx = approx or IndicialApprox()
    return _exp_sum(reduced_time, approx.wagner_terms)


def kussner_value(reduced_time, approx=None):
    """Gust penetration factor psi(s) for a sharp-edged unit gust."""
    approx = approx or IndicialApprox()
    return _exp_sum(reduced_time, approx.kussner_terms)


def lag_realization(terms, direct):
    """State-space (A, B, C, D) in reduced time for ``1 - sum a_i exp(-e_i s)``.

    The step response of ``x' = A x + B u, y = C x + D u`` equals the
    indicial function; ``direct`` is its value at s = 0.
    """
    e = np.array([t[1] for t in terms])
    a = np.array([t[0] for t in terms])
    A = -np.diag(e)
    B = np.ones((len(terms), 1))
    C = (a * e)[None, :]
    D = np.array([[direct]])
    return A, B, C, D


def theodorsen_flap_constants(hinge):
    """Theodorsen T-functions for a flap hinged at ``hinge`` (semichords aft of midchord).

    Returns a dict with keys ``T1, T4, T7, T8, T10, T11``.
    """
    c = float(hinge)
    if not -1.0 < c < 1.0:
        raise ConfigError("flap hinge must lie strictly inside the chord")
    r = np.sqrt(1.0 - c * c)
    ac = np.arccos(c)
    return {
        "T1": -r * (2.0 + c * c) / 3.0 + c * ac,
        "T4": -ac + c * r,
        "T7": -(0.125 + c * c) * ac + 0.125 * c * r * (7.0 + 2.0 * c * c),
        "T8": -r * (2.0 * c * c + 1.0) / 3.0 + c * ac,
        "T10": r + ac,
        "T11": ac * (1.0 - 2.0 * c) + r * (2.0 - c),
    }
